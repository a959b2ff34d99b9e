use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use randlocal::cli::{self, AdvantageArgs, AnalyzeArgs, GapArgs, MixingArgs, ProblemArgs, ReduceArgs, Run, SecretSpec};
use randlocal::hypergraph::DEFAULT_T_MULTIPLIER;
use randlocal::{Error, ReductionConfig};

#[derive(Parser)]
#[command(name = "randlocal", version, about = "Experiments on random local functions")]
struct Cli {
    /// Write the JSON result here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fourier profile, correlation order and bias of a predicate.
    AnalyzePredicate {
        #[arg(long)]
        predicate: String,
        /// Bias bounds as `lo,hi`.
        #[arg(long, value_parser = parse_bounds)]
        bounds: Option<(f64, f64)>,
        /// Reject constant predicates.
        #[arg(long)]
        strict: bool,
    },
    /// Deviation decay and TV distance of random transformations.
    Mixing {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
        #[arg(long)]
        d: usize,
        #[arg(long, default_value_t = 0.25)]
        eps: f64,
        #[arg(long, default_value_t = 100_000)]
        samples: u64,
        #[arg(long, default_value_t = DEFAULT_T_MULTIPLIER)]
        t_multiplier: f64,
        #[arg(long)]
        steps: Option<u64>,
        /// Comma-separated transformation counts for the TV diagnostic.
        #[arg(long, value_delimiter = ',')]
        checkpoints: Option<Vec<u64>>,
        #[arg(long, default_value_t = 200)]
        bootstrap: usize,
        /// Also write the decay curve as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[command(flatten)]
        run: RunFlags,
    },
    /// Monte Carlo advantage of a distinguisher.
    EstimateAdvantage {
        #[command(flatten)]
        problem: ProblemFlags,
        #[arg(long)]
        distinguisher: String,
        #[arg(long, default_value_t = 10_000)]
        trials: u64,
        #[command(flatten)]
        run: RunFlags,
    },
    /// Recover a planted secret using a distinguisher.
    Reduce {
        #[command(flatten)]
        problem: ProblemFlags,
        #[arg(long)]
        distinguisher: String,
        /// `random`, `balanced`, `zeros` or a bit string.
        #[arg(long, default_value = "random")]
        secret: SecretSpec,
        #[arg(long, default_value_t = 1)]
        oracle_seed: u64,
        /// Cap on oracle instances.
        #[arg(long)]
        budget: Option<u64>,
        /// Claimed distinguisher advantage.
        #[arg(long)]
        eps: Option<f64>,
        /// Reduction config overrides, inline JSON or a file path.
        #[arg(long)]
        config: Option<String>,
        #[command(flatten)]
        run: RunFlags,
    },
    /// Per-index predictor gaps for a fixed secret.
    PredictorGap {
        #[command(flatten)]
        problem: ProblemFlags,
        #[arg(long)]
        distinguisher: String,
        #[arg(long, default_value = "balanced")]
        secret: SecretSpec,
        #[arg(long, default_value_t = 10_000)]
        trials: u64,
        #[arg(long, default_value_t = 0.5)]
        eps: f64,
        #[arg(long, default_value_t = DEFAULT_T_MULTIPLIER)]
        t_multiplier: f64,
        #[command(flatten)]
        run: RunFlags,
    },
}

#[derive(Args)]
struct ProblemFlags {
    /// `builtin:NAME` or a predicate JSON file.
    #[arg(long)]
    predicate: String,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    m: usize,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    noisy_beta: Option<f64>,
    /// Sample hypergraphs with distinct vertices per edge.
    #[arg(long)]
    distinct: bool,
}

impl From<ProblemFlags> for ProblemArgs {
    fn from(p: ProblemFlags) -> Self {
        ProblemArgs {
            predicate: p.predicate,
            n: p.n,
            m: p.m,
            d: p.d,
            noisy_beta: p.noisy_beta,
            distinct: p.distinct,
        }
    }
}

#[derive(Args)]
struct RunFlags {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

fn parse_bounds(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s.split_once(',').ok_or("expected lo,hi")?;
    let parse = |x: &str| x.trim().parse::<f64>().map_err(|e| e.to_string());
    Ok((parse(lo)?, parse(hi)?))
}

fn load_config(spec: Option<&str>) -> Result<ReductionConfig, Error> {
    match spec {
        None => Ok(ReductionConfig::default()),
        Some(s) if s.trim_start().starts_with('{') => Ok(serde_json::from_str(s)?),
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::InvalidArgument(format!("cannot read config {path:?}: {e}")))?;
            Ok(serde_json::from_str(&text)?)
        }
    }
}

fn summary(run: &Run) -> String {
    let r = &run.result;
    match run.manifest.subcommand.as_str() {
        "analyze-predicate" => format!(
            "arity {} correlation order {} bias {}",
            r["predicate"]["d"], r["profile"]["correlation_order"], r["output_bias"]
        ),
        "mixing" => format!("t = {}", r["t"]),
        "estimate-advantage" => format!(
            "{}: advantage {} +/- {}",
            r["distinguisher"], r["report"]["advantage"], r["report"]["ci_halfwidth"]
        ),
        "reduce" if r["mode"] == "noisy" => format!(
            "{} candidates, secret among them: {}",
            r["candidate_count"], r["contains_secret"]
        ),
        "reduce" => format!("success: {}, matches secret: {}", r["success"], r["matches_secret"]),
        "predictor-gap" => format!("t = {}, min unequal gap {} (target {})", r["t"], r["min_unequal_gap"], r["target_gap"]),
        _ => String::new(),
    }
}

fn execute(cli: Cli) -> Result<Run, Error> {
    let mut csv = None;
    let run = match cli.command {
        Command::AnalyzePredicate { predicate, bounds, strict } => {
            cli::cmd_analyze_predicate(&AnalyzeArgs { predicate, bounds, strict })?
        }
        Command::Mixing { n, m, d, eps, samples, t_multiplier, steps, checkpoints, bootstrap, csv: path, run } => {
            let run = cli::cmd_mixing(&MixingArgs {
                n,
                m,
                d,
                eps,
                samples,
                seed: run.seed,
                workers: run.workers,
                t_multiplier,
                curve_steps: steps,
                checkpoints,
                bootstrap,
            })?;
            if let Some(path) = path {
                csv = Some((path, cli::curve_csv(&run.result)?));
            }
            run
        }
        Command::EstimateAdvantage { problem, distinguisher, trials, run } => cli::cmd_estimate_advantage(&AdvantageArgs {
            problem: problem.into(),
            distinguisher,
            trials,
            seed: run.seed,
            workers: run.workers,
        })?,
        Command::Reduce { problem, distinguisher, secret, oracle_seed, budget, eps, config, run } => {
            let mut config = load_config(config.as_deref())?;
            if let Some(eps) = eps {
                config.eps = eps;
            }
            config.seed = run.seed;
            cli::cmd_reduce(&ReduceArgs {
                problem: problem.into(),
                distinguisher,
                secret,
                oracle_seed,
                budget,
                config,
                workers: run.workers,
            })?
        }
        Command::PredictorGap { problem, distinguisher, secret, trials, eps, t_multiplier, run } => {
            cli::cmd_predictor_gap(&GapArgs {
                problem: problem.into(),
                distinguisher,
                secret,
                trials,
                eps,
                t_multiplier,
                seed: run.seed,
                workers: run.workers,
            })?
        }
    };
    let mut run = run;
    let write = |path: &PathBuf, text: &str| {
        std::fs::write(path, text).map_err(|e| Error::InvalidArgument(format!("cannot write {}: {e}", path.display())))
    };
    if let Some((path, text)) = csv {
        write(&path, &text)?;
        run.manifest.outputs.push(path.display().to_string());
    }
    match &cli.out {
        Some(path) => {
            run.manifest.outputs.push(path.display().to_string());
            write(path, &serde_json::to_string_pretty(&run.to_json())?)?;
        }
        None => println!("{}", serde_json::to_string_pretty(&run.to_json())?),
    }
    Ok(run)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(run) => {
            eprintln!("{}", summary(&run));
            ExitCode::from(cli::EXIT_OK as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(cli::exit_code(&e) as u8)
        }
    }
}

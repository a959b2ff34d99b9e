//! Experiment commands behind the `randlocal` binary.
//!
//! Every command returns a JSON value `{"manifest": .., "result": ..}`.
//! The result is a pure function of the arguments and the seed; wall-clock
//! time, worker count and output paths live in the manifest only.

use std::path::Path;
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::distinguish::{by_name, estimate_advantage};
use crate::error::{invalid, Error, Result};
use crate::exec::{Exec, Streams};
use crate::hypergraph::{
    apply_transforms, hybrid_budget, mixing_time, support_size, DeviationTrace, GraphFamily, Hypergraph, Vertex,
    DEFAULT_T_MULTIPLIER,
};
use crate::localfn::{sample_secret_with_weight, verify, Secret, SecretOracle};
use crate::predicate::{NoisyPredicate, Predicate};
use crate::reduction::{predictor_gap, search, search_noisy, ReductionConfig};
use crate::stats::{tv_empirical_vs, EmpiricalCounts, MeanAcc, TvEstimate};

/// Exit status for completed runs, including failed searches.
pub const EXIT_OK: i32 = 0;
/// Exit status for malformed or inconsistent arguments.
pub const EXIT_BAD_ARGS: i32 = 2;
/// Exit status for valid but infeasible parameters.
pub const EXIT_INFEASIBLE: i32 = 3;

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Infeasible(_) | Error::OracleExhausted { .. } => EXIT_INFEASIBLE,
        _ => EXIT_BAD_ARGS,
    }
}

// stream namespaces per subcommand
const SUB_MIXING: u64 = 2;
const SUB_ADVANTAGE: u64 = 3;
const SUB_REDUCE: u64 = 4;
const SUB_GAP: u64 = 5;

/// Execution details that may differ between replays.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub config: Value,
    pub seed: u64,
    pub version: String,
    pub workers: usize,
    pub wall_clock_secs: f64,
    pub outputs: Vec<String>,
}

/// A finished command: manifest plus deterministic result.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Run {
    pub manifest: RunManifest,
    pub result: Value,
}

impl Run {
    pub fn to_json(&self) -> Value {
        json!({ "manifest": self.manifest, "result": self.result })
    }

    /// The deterministic part, serialized.
    pub fn result_string(&self) -> String {
        serde_json::to_string(&self.result).expect("values serialize")
    }
}

fn finish<C: Serialize>(subcommand: &str, config: &C, seed: u64, workers: usize, started: Instant, result: Value) -> Result<Run> {
    Ok(Run {
        manifest: RunManifest {
            subcommand: subcommand.to_string(),
            config: serde_json::to_value(config)?,
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            workers,
            wall_clock_secs: started.elapsed().as_secs_f64(),
            outputs: Vec::new(),
        },
        result,
    })
}

/// `builtin:NAME`, or a path to a predicate JSON file (with optional
/// `"beta"` for a noisy predicate).
pub fn load_predicate(spec: &str) -> Result<NoisyPredicate> {
    if let Some(name) = spec.strip_prefix("builtin:") {
        return Ok(NoisyPredicate::noiseless(Predicate::builtin(name)?));
    }
    let text = std::fs::read_to_string(Path::new(spec))
        .map_err(|e| invalid(format!("cannot read predicate file {spec:?}: {e}")))?;
    parse_predicate(&text)
}

pub fn parse_predicate(text: &str) -> Result<NoisyPredicate> {
    let value: Value = serde_json::from_str(text)?;
    if value.get("beta").is_some() {
        Ok(serde_json::from_value(value)?)
    } else {
        Ok(NoisyPredicate::noiseless(serde_json::from_value(value)?))
    }
}

/// Predicate and graph family shared by most commands.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemArgs {
    pub predicate: String,
    pub n: usize,
    pub m: usize,
    /// Must match the predicate arity when given.
    pub d: Option<usize>,
    pub noisy_beta: Option<f64>,
    pub distinct: bool,
}

impl ProblemArgs {
    pub fn build(&self) -> Result<(NoisyPredicate, GraphFamily)> {
        let mut model = load_predicate(&self.predicate)?;
        if let Some(beta) = self.noisy_beta {
            model = NoisyPredicate::new(model.base().clone(), beta)?;
        }
        let arity = model.base().arity();
        if let Some(d) = self.d {
            if d != arity {
                return Err(invalid(format!("--d {d} does not match predicate arity {arity}")));
            }
        }
        let family = GraphFamily {
            n: self.n,
            m: self.m,
            d: arity,
            distinct: self.distinct,
        };
        family.validate()?;
        Ok((model, family))
    }
}

/// How a command chooses its secret.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum SecretSpec {
    Random,
    /// Uniform of weight `floor(n / 2)`.
    Balanced,
    Zeros,
    Literal(Secret),
}

impl SecretSpec {
    pub fn resolve<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Secret> {
        match self {
            SecretSpec::Random => Ok(Secret::uniform(n, rng)),
            SecretSpec::Balanced => sample_secret_with_weight(n, n / 2, rng),
            SecretSpec::Zeros => Ok(Secret::zeros(n)),
            SecretSpec::Literal(s) if s.len() == n => Ok(s.clone()),
            SecretSpec::Literal(s) => Err(invalid(format!("secret has {} bits, n = {n}", s.len()))),
        }
    }
}

impl std::str::FromStr for SecretSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "random" => SecretSpec::Random,
            "balanced" => SecretSpec::Balanced,
            "zeros" => SecretSpec::Zeros,
            bits => SecretSpec::Literal(bits.parse()?),
        })
    }
}

impl TryFrom<String> for SecretSpec {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<SecretSpec> for String {
    fn from(s: SecretSpec) -> Self {
        match s {
            SecretSpec::Random => "random".into(),
            SecretSpec::Balanced => "balanced".into(),
            SecretSpec::Zeros => "zeros".into(),
            SecretSpec::Literal(bits) => bits.to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalyzeArgs {
    pub predicate: String,
    pub bounds: Option<(f64, f64)>,
    /// Fail on constant predicates.
    pub strict: bool,
}

pub fn cmd_analyze_predicate(args: &AnalyzeArgs) -> Result<Run> {
    let started = Instant::now();
    let model = load_predicate(&args.predicate)?;
    let pred = model.base();
    let constant = pred.is_constant();
    if constant && args.strict {
        return Err(Error::Infeasible("predicate is constant".into()));
    }
    let profile = pred.profile::<f64>(args.bounds)?;
    let result = json!({
        "predicate": pred,
        "noise_rate": model.noise_rate(),
        "constant": constant,
        "output_bias": model.bias(),
        "profile": profile,
    });
    finish("analyze-predicate", args, 0, 1, started, result)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixingArgs {
    pub n: usize,
    pub m: usize,
    pub d: usize,
    pub eps: f64,
    /// Trajectories for the decay curve and samples per TV checkpoint.
    pub samples: u64,
    pub seed: u64,
    pub workers: usize,
    pub t_multiplier: f64,
    /// Length of the decay curve; defaults to `min(t, 1000)`.
    pub curve_steps: Option<u64>,
    /// Transformation counts at which TV is measured; defaults to
    /// `t/8, t/4, t/2, t`.
    pub checkpoints: Option<Vec<u64>>,
    pub bootstrap: usize,
}

impl Default for MixingArgs {
    fn default() -> Self {
        Self {
            n: 4,
            m: 2,
            d: 2,
            eps: 0.25,
            samples: 100_000,
            seed: 0,
            workers: 1,
            t_multiplier: DEFAULT_T_MULTIPLIER,
            curve_steps: None,
            checkpoints: None,
            bootstrap: 200,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CurvePoint {
    pub i: u64,
    pub mean: f64,
    pub std_error: f64,
    /// `(1 - 1/n)^i (n - 1) / n`.
    pub predicted: f64,
}

/// Mean of `V(i)` over `trajectories` point-mass starts with uniform pairs.
pub fn deviation_curve(n: usize, steps: u64, trajectories: u64, streams: &Streams, exec: &Exec) -> Result<Vec<CurvePoint>> {
    if n == 0 {
        return Err(invalid("n must be positive"));
    }
    let parts = exec.map_chunks(trajectories, |c, range| {
        let mut rng = streams.stream(&[c]);
        let mut acc = vec![MeanAcc::default(); steps as usize + 1];
        for _ in range {
            let mut tr = DeviationTrace::<f64>::point_mass(n, 0).expect("n >= 1");
            acc[0].push(*tr.v());
            for a in acc.iter_mut().skip(1) {
                let (x, y) = (rng.random_range(0..n), rng.random_range(0..n));
                tr.step(x, y).expect("pair in range");
                a.push(*tr.v());
            }
        }
        acc
    });
    let mut total = vec![MeanAcc::default(); steps as usize + 1];
    for p in parts {
        for (t, a) in total.iter_mut().zip(&p) {
            t.merge(a);
        }
    }
    let v0 = (n as f64 - 1.0) / n as f64;
    Ok(total
        .iter()
        .enumerate()
        .map(|(i, a)| CurvePoint {
            i: i as u64,
            mean: a.mean(),
            std_error: a.std_error(),
            predicted: (1.0 - 1.0 / n as f64).powi(i as i32) * v0,
        })
        .collect())
}

/// Empirical TV to uniform after `steps` random transformations of the
/// all-zero start graph.
pub fn mixing_tv(
    family: &GraphFamily,
    steps: u64,
    samples: u64,
    bootstrap: usize,
    streams: &Streams,
    exec: &Exec,
) -> Result<TvEstimate> {
    family.validate()?;
    if family.distinct {
        return Err(Error::Infeasible("TV diagnostic covers repeat-allowed graphs".into()));
    }
    let size = support_size(family.n, family.m, family.d)
        .filter(|&s| s as usize <= crate::stats::MAX_EMPIRICAL_SUPPORT)
        .ok_or_else(|| Error::Infeasible("graph support too large to enumerate".into()))? as usize;
    let start = Hypergraph::from_support_index(family.n, family.m, family.d, 0)?;
    let n = family.n as Vertex;
    let parts = exec.map_chunks(samples, |c, range| {
        let mut rng = streams.stream(&[c]);
        let mut counts = EmpiricalCounts::new(size).expect("size checked");
        let mut pairs = Vec::with_capacity(steps as usize);
        for _ in range {
            pairs.clear();
            pairs.extend((0..steps).map(|_| (rng.random_range(0..n), rng.random_range(0..n))));
            let mut g = start.clone();
            apply_transforms(&mut g, &pairs, &mut rng).expect("pairs in range");
            counts.add(g.support_index().expect("support checked") as usize);
        }
        counts
    });
    let mut total = EmpiricalCounts::new(size)?;
    for p in &parts {
        total.merge(p)?;
    }
    let uniform = vec![1.0 / size as f64; size];
    tv_empirical_vs(&total, &uniform, bootstrap, &mut streams.stream(&[u64::MAX]))
}

pub fn cmd_mixing(args: &MixingArgs) -> Result<Run> {
    let started = Instant::now();
    let exec = Exec::with_workers(args.workers);
    let family = GraphFamily::uniform(args.n, args.m, args.d);
    family.validate()?;
    let t = if args.t_multiplier == DEFAULT_T_MULTIPLIER {
        mixing_time(args.n, args.m, args.d, args.eps)?
    } else {
        hybrid_budget(args.t_multiplier, args.n, args.m, args.d, args.eps)?
    };
    if args.samples == 0 {
        return Err(invalid("samples must be positive"));
    }
    let streams = Streams::new(args.seed).child(&[SUB_MIXING]);
    let steps = args.curve_steps.unwrap_or(t.min(1000));
    let curve = deviation_curve(args.n, steps, args.samples, &streams.child(&[0]), &exec)?;
    let enumerable = support_size(args.n, args.m, args.d).is_some_and(|s| s as usize <= crate::stats::MAX_EMPIRICAL_SUPPORT);
    let tv = if enumerable {
        let mut checkpoints = args.checkpoints.clone().unwrap_or_else(|| vec![t / 8, t / 4, t / 2, t]);
        checkpoints.sort_unstable();
        checkpoints.dedup();
        let rows = checkpoints
            .iter()
            .map(|&c| {
                let est = mixing_tv(&family, c, args.samples, args.bootstrap, &streams.child(&[1, c]), &exec)?;
                Ok(json!({ "steps": c, "tv": est }))
            })
            .collect::<Result<Vec<_>>>()?;
        Value::Array(rows)
    } else {
        Value::Null
    };
    let result = json!({
        "t": t,
        "eps": args.eps,
        "tv_target": args.eps / 8.0,
        "v0": (args.n as f64 - 1.0) / args.n as f64,
        "curve": curve,
        "tv": tv,
    });
    finish("mixing", args, args.seed, args.workers, started, result)
}

/// Decay curve as CSV with header `i,mean,std_error,predicted`.
pub fn curve_csv(result: &Value) -> Result<String> {
    let curve = result
        .get("curve")
        .and_then(Value::as_array)
        .ok_or_else(|| invalid("result has no decay curve"))?;
    let mut out = String::from("i,mean,std_error,predicted\n");
    for p in curve {
        let f = |k: &str| p.get(k).and_then(Value::as_f64).unwrap_or(f64::NAN);
        out.push_str(&format!("{},{},{},{}\n", f("i"), f("mean"), f("std_error"), f("predicted")));
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdvantageArgs {
    pub problem: ProblemArgs,
    pub distinguisher: String,
    pub trials: u64,
    pub seed: u64,
    pub workers: usize,
}

pub fn cmd_estimate_advantage(args: &AdvantageArgs) -> Result<Run> {
    let started = Instant::now();
    let (model, family) = args.problem.build()?;
    let dist = by_name(&args.distinguisher, &model, &family)?;
    let streams = Streams::new(args.seed).child(&[SUB_ADVANTAGE]);
    let report = estimate_advantage(&dist, &model, &family, args.trials, &streams, &Exec::with_workers(args.workers))?;
    let result = json!({
        "distinguisher": dist.name(),
        "cost": dist.cost_note(),
        "family": family,
        "noise_rate": model.noise_rate(),
        "report": report,
    });
    finish("estimate-advantage", args, args.seed, args.workers, started, result)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReduceArgs {
    pub problem: ProblemArgs,
    pub distinguisher: String,
    pub secret: SecretSpec,
    /// Seed of the planted oracle; the reduction itself uses `config.seed`.
    pub oracle_seed: u64,
    pub budget: Option<u64>,
    pub config: ReductionConfig,
    pub workers: usize,
}

pub fn cmd_reduce(args: &ReduceArgs) -> Result<Run> {
    let started = Instant::now();
    let (model, family) = args.problem.build()?;
    let dist = by_name(&args.distinguisher, &model, &family)?;
    let oracle_streams = Streams::new(args.oracle_seed).child(&[SUB_REDUCE]);
    let secret = args.secret.resolve(family.n, &mut oracle_streams.stream(&[0]))?;
    let mut oracle = SecretOracle::new(model.clone(), family, secret.clone(), oracle_streams.child(&[1]).seed())?;
    if let Some(b) = args.budget {
        oracle = oracle.with_budget(b);
    }
    let exec = Exec::with_workers(args.workers);
    let result = if model.noise_rate() > 0.0 {
        let out = search_noisy(&mut oracle, &dist, &args.config, &exec)?;
        json!({
            "mode": "noisy",
            "candidate_count": out.candidates.len(),
            "contains_secret": out.candidates.contains(&secret),
            "candidates": out.candidates,
            "secret": secret,
            "report": out.report,
        })
    } else {
        let out = search(&mut oracle, &dist, &args.config, &exec)?;
        json!({
            "mode": "exact",
            "success": out.success,
            "candidate": out.secret,
            "matches_secret": out.secret.as_ref() == Some(&secret),
            "secret": secret,
            "report": out.report,
        })
    };
    finish("reduce", args, args.config.seed, args.workers, started, result)
}

/// Re-checks a reduce result: a reported success must verify on a fresh
/// instance planted with the reported secret.
pub fn recheck_reduce(result: &Value, problem: &ProblemArgs) -> Result<bool> {
    if result.get("success").and_then(Value::as_bool) != Some(true) {
        return Ok(true);
    }
    let (model, family) = problem.build()?;
    let secret: Secret = serde_json::from_value(result["secret"].clone())?;
    let cand: Secret = serde_json::from_value(result["candidate"].clone())?;
    let oracle = SecretOracle::new(model, family, secret, 0x5eed)?;
    let inst = oracle.instance_at(0);
    verify(inst.graph(), oracle.predicate(), &cand, inst.outputs())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapArgs {
    pub problem: ProblemArgs,
    pub distinguisher: String,
    pub secret: SecretSpec,
    pub trials: u64,
    pub eps: f64,
    pub t_multiplier: f64,
    pub seed: u64,
    pub workers: usize,
}

pub fn cmd_predictor_gap(args: &GapArgs) -> Result<Run> {
    let started = Instant::now();
    let (model, family) = args.problem.build()?;
    let dist = by_name(&args.distinguisher, &model, &family)?;
    let streams = Streams::new(args.seed).child(&[SUB_GAP]);
    let secret = args.secret.resolve(family.n, &mut streams.stream(&[0]))?;
    let t = hybrid_budget(args.t_multiplier, family.n, family.m, family.d, args.eps)?;
    let table = predictor_gap(&model, &dist, &family, &secret, t, args.trials, &streams.child(&[1]), &Exec::with_workers(args.workers))?;
    let target = args.eps / (4.0 * t as f64);
    let min_unequal = table.unequal().map(|r| r.gap).fold(None, |m: Option<f64>, g| Some(m.map_or(g, |m| m.min(g))));
    let result = json!({
        "distinguisher": dist.name(),
        "secret": secret,
        "t": t,
        "eps": args.eps,
        "target_gap": target,
        "min_unequal_gap": min_unequal,
        "table": table,
    });
    finish("predictor-gap", args, args.seed, args.workers, started, result)
}

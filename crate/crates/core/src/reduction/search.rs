use serde::Serialize;

use super::hybrid::{estimate_eq, predictor};
use super::{Derived, ReductionConfig};
use crate::distinguish::{estimate_advantage, Distinguisher, Negated};
use crate::error::{invalid, Result};
use crate::exec::{Exec, Streams};
use crate::hypergraph::GraphFamily;
use crate::localfn::{verify, Secret, SecretOracle};
use crate::stats::Proportion;

const PHASE_EQ: u64 = 1;
const PHASE_PREDICT: u64 = 2;
const PHASE_PROBE: u64 = 3;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EqRow {
    pub weight: usize,
    pub eq: f64,
    pub ci_halfwidth: f64,
    pub trials: u64,
}

/// Estimated `eq` for each fairly balanced weight, center first.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EqTable {
    pub rows: Vec<EqRow>,
}

impl EqTable {
    pub fn estimate(
        oracle: &SecretOracle,
        dist: &dyn Distinguisher,
        derived: &Derived,
        weights: &[usize],
        streams: &Streams,
        exec: &Exec,
    ) -> Result<Self> {
        let rows = weights
            .iter()
            .map(|&w| {
                let p: Proportion = estimate_eq(
                    oracle.model(),
                    w,
                    dist,
                    derived.t,
                    oracle.family(),
                    derived.eq_trials,
                    &streams.child(&[PHASE_EQ]),
                    exec,
                )?;
                Ok(EqRow {
                    weight: w,
                    eq: p.estimate,
                    ci_halfwidth: p.ci_halfwidth,
                    trials: p.trials,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { rows })
    }
}

/// Predictor acceptance counts `sum_i` for `i = 1..n`, each out of `l`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PredictorSums {
    pub l: u64,
    /// `sums[i - 1]` belongs to bit `i`.
    pub sums: Vec<u64>,
    pub instances: u64,
}

impl PredictorSums {
    /// Sums of the negated distinguisher on the same randomness.
    pub fn negated(&self) -> Self {
        Self {
            l: self.l,
            sums: self.sums.iter().map(|&s| self.l - s).collect(),
            instances: self.instances,
        }
    }
}

/// Runs `l` predictors per bit on fresh oracle instances. With
/// `reuse_instances` the same `l` instances serve every bit; otherwise each
/// bit gets its own `l` instances.
pub fn predictor_sums(
    oracle: &mut SecretOracle,
    dist: &dyn Distinguisher,
    t: u64,
    l: u64,
    reuse_instances: bool,
    streams: &Streams,
    exec: &Exec,
) -> Result<PredictorSums> {
    let n = oracle.family().n;
    if n < 2 {
        return Err(invalid("recovering relative bits needs n >= 2"));
    }
    let bits = (n - 1) as u64;
    let needed = if reuse_instances { Some(l) } else { l.checked_mul(bits) }
        .ok_or_else(|| invalid("instance count overflows"))?;
    let range = oracle.reserve(needed, "predictor amplification")?;
    let oracle = &*oracle;
    let streams = streams.child(&[PHASE_PREDICT]);
    let parts = exec.map_chunks(l, |c, ks| {
        let mut rng = streams.stream(&[c]);
        let mut sums = vec![0u64; n - 1];
        for k in ks {
            let shared = reuse_instances.then(|| oracle.instance_at(range.start + k));
            for i in 1..n {
                let own;
                let inst = match &shared {
                    Some(inst) => inst,
                    None => {
                        own = oracle.instance_at(range.start + k * bits + (i as u64 - 1));
                        &own
                    }
                };
                if predictor(i, inst, dist, t, &mut rng).expect("arguments checked") {
                    sums[i - 1] += 1;
                }
            }
        }
        sums
    });
    let mut sums = vec![0u64; n - 1];
    for p in parts {
        for (a, b) in sums.iter_mut().zip(p) {
            *a += b;
        }
    }
    Ok(PredictorSums {
        l,
        sums,
        instances: needed,
    })
}

/// Threshold `l (eq - eps / 8t)`; bit `i` is declared equal to bit 0 iff its
/// sum strictly exceeds it.
pub fn declare_equal(sums: &PredictorSums, eq: f64, eps: f64, t: u64) -> (f64, Vec<bool>) {
    let threshold = sums.l as f64 * (eq - eps / (8.0 * t as f64));
    let equal = sums.sums.iter().map(|&s| s as f64 > threshold).collect();
    (threshold, equal)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RelativeBits {
    pub sums: PredictorSums,
    pub threshold: f64,
    /// `equal[i - 1]` claims `s_i = s_0`.
    pub equal: Vec<bool>,
}

/// Estimates every `s_i = s_0` relation of the oracle's secret given the
/// `eq` value for its weight.
pub fn recover_relative_bits(
    oracle: &mut SecretOracle,
    dist: &dyn Distinguisher,
    eq: f64,
    config: &ReductionConfig,
    exec: &Exec,
) -> Result<RelativeBits> {
    let derived = config.derive(oracle.family())?;
    let streams = Streams::new(config.seed);
    let sums = predictor_sums(oracle, dist, derived.t, derived.l, config.reuse_instances, &streams, exec)?;
    let (threshold, equal) = declare_equal(&sums, eq, config.eps, derived.t);
    Ok(RelativeBits { sums, threshold, equal })
}

fn candidate(guess: bool, equal: &[bool]) -> Secret {
    let mut bits = Vec::with_capacity(equal.len() + 1);
    bits.push(guess);
    bits.extend(equal.iter().map(|&e| if e { guess } else { !guess }));
    Secret::new(bits)
}

/// One candidate formed during search.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Attempt {
    pub negated: bool,
    pub weight: usize,
    pub guess: bool,
    pub threshold: f64,
    pub candidate: Secret,
    /// `None` for the noisy search, which cannot verify.
    pub verified: Option<bool>,
}

/// Everything a search run did, for the JSON report.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SearchReport {
    pub config: ReductionConfig,
    pub family: GraphFamily,
    pub noise_rate: f64,
    pub distinguisher: String,
    pub t: u64,
    pub l: u64,
    pub eq_trials: u64,
    pub eq_table: EqTable,
    pub sums: PredictorSums,
    /// Sign chosen by the local probe (noisy search only).
    pub negated: Option<bool>,
    pub attempts: Vec<Attempt>,
    pub oracle_instances: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SearchOutcome {
    pub success: bool,
    pub secret: Option<Secret>,
    pub report: SearchReport,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NoisyOutcome {
    /// At most `2n` distinct candidates, in the order they were formed.
    pub candidates: Vec<Secret>,
    pub report: SearchReport,
}

fn check_inputs(oracle: &SecretOracle, dist: &dyn Distinguisher, config: &ReductionConfig) -> Result<Derived> {
    if oracle.predicate().is_constant() {
        return Err(invalid("search needs a non-constant predicate"));
    }
    dist.supports(oracle.family())?;
    config.derive(oracle.family())
}

/// Recovers the oracle's secret, or reports failure.
///
/// `eq` is estimated for every fairly balanced weight and the predictor
/// sums are computed once; each weight and each guess of `s_0` then yields
/// one candidate, checked against one fresh oracle instance. With
/// `try_negated_distinguisher` the candidates of `1 - D` follow, using
/// `l - sum` and `1 - eq` from the same randomness. The first candidate
/// that verifies is returned; a returned secret always verifies.
pub fn search(
    oracle: &mut SecretOracle,
    dist: &dyn Distinguisher,
    config: &ReductionConfig,
    exec: &Exec,
) -> Result<SearchOutcome> {
    let derived = check_inputs(oracle, dist, config)?;
    let streams = Streams::new(config.seed);
    let eq_table = EqTable::estimate(oracle, dist, &derived, &derived.weights, &streams, exec)?;
    let sums = predictor_sums(oracle, dist, derived.t, derived.l, config.reuse_instances, &streams, exec)?;
    let check = oracle.draw()?;

    let signs: &[bool] = if config.try_negated_distinguisher { &[false, true] } else { &[false] };
    let mut attempts = Vec::new();
    let mut found = None;
    'outer: for &negated in signs {
        let sums = if negated { sums.negated() } else { sums.clone() };
        for row in &eq_table.rows {
            let eq = if negated { 1.0 - row.eq } else { row.eq };
            let (threshold, equal) = declare_equal(&sums, eq, config.eps, derived.t);
            for guess in [false, true] {
                let cand = candidate(guess, &equal);
                let ok = verify(check.graph(), oracle.predicate(), &cand, check.outputs())?;
                attempts.push(Attempt {
                    negated,
                    weight: row.weight,
                    guess,
                    threshold,
                    candidate: cand.clone(),
                    verified: Some(ok),
                });
                if ok {
                    found = Some(cand);
                    break 'outer;
                }
            }
        }
    }
    let report = SearchReport {
        config: config.clone(),
        family: *oracle.family(),
        noise_rate: oracle.model().noise_rate(),
        distinguisher: dist.name(),
        t: derived.t,
        l: derived.l,
        eq_trials: derived.eq_trials,
        eq_table,
        sums,
        negated: None,
        attempts,
        oracle_instances: oracle.drawn(),
    };
    Ok(SearchOutcome {
        success: found.is_some(),
        secret: found,
        report,
    })
}

/// Candidate-set search for noisy oracles.
///
/// Exact verification is unavailable, so the sign of `D` is settled first
/// by a local advantage probe (when `try_negated_distinguisher` is set),
/// and at most `n` weights with two guesses each are emitted.
pub fn search_noisy(
    oracle: &mut SecretOracle,
    dist: &dyn Distinguisher,
    config: &ReductionConfig,
    exec: &Exec,
) -> Result<NoisyOutcome> {
    let derived = check_inputs(oracle, dist, config)?;
    let streams = Streams::new(config.seed);
    let negated = if config.try_negated_distinguisher {
        let probe = estimate_advantage(
            dist,
            oracle.model(),
            oracle.family(),
            config.sign_probe_trials,
            &streams.child(&[PHASE_PROBE]),
            exec,
        )?;
        probe.advantage < 0.0
    } else {
        false
    };
    let flipped = Negated(dist);
    let dist: &dyn Distinguisher = if negated { &flipped } else { dist };
    let n = oracle.family().n;
    let weights: Vec<usize> = derived.weights.iter().copied().take(n).collect();
    let eq_table = EqTable::estimate(oracle, dist, &derived, &weights, &streams, exec)?;
    let sums = predictor_sums(oracle, dist, derived.t, derived.l, config.reuse_instances, &streams, exec)?;

    let mut attempts = Vec::new();
    let mut candidates: Vec<Secret> = Vec::new();
    for row in &eq_table.rows {
        let (threshold, equal) = declare_equal(&sums, row.eq, config.eps, derived.t);
        for guess in [false, true] {
            let cand = candidate(guess, &equal);
            if !candidates.contains(&cand) {
                candidates.push(cand.clone());
            }
            attempts.push(Attempt {
                negated,
                weight: row.weight,
                guess,
                threshold,
                candidate: cand,
                verified: None,
            });
        }
    }
    let report = SearchReport {
        config: config.clone(),
        family: *oracle.family(),
        noise_rate: oracle.model().noise_rate(),
        distinguisher: dist.name(),
        t: derived.t,
        l: derived.l,
        eq_trials: derived.eq_trials,
        eq_table,
        sums,
        negated: Some(negated),
        attempts,
        oracle_instances: oracle.drawn(),
    };
    Ok(NoisyOutcome { candidates, report })
}

//! Distinguishers between planted and null instances, advantage estimation
//! and the per-weight gap scan.
//!
//! A distinguisher only ever sees a hypergraph and its output bits; the
//! instance kind is not part of the interface.

use std::sync::Arc;

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::Rng;
use serde::Serialize;

use crate::error::{check_len, invalid, Error, Result};
use crate::exec::{Exec, Stream, Streams};
use crate::hypergraph::{GraphFamily, Hypergraph, Vertex};
use crate::localfn::{edge_index, sample_null, sample_planted, planted_with_secret, sample_secret_with_weight, OutputModel};
use crate::predicate::Predicate;
use crate::stats::{binomial_mass, wilson_halfwidth, Proportion};
use crate::Exact;

/// Largest `n` the likelihood-ratio test will enumerate.
pub const LR_MAX_N: usize = 20;

pub trait Distinguisher: Send + Sync {
    fn name(&self) -> String;

    /// Rough cost of one call, for reports.
    fn cost_note(&self) -> String {
        String::new()
    }

    /// Rejects families the procedure cannot handle.
    fn supports(&self, _family: &GraphFamily) -> Result<()> {
        Ok(())
    }

    /// Guess that the instance is planted (`true`) or null (`false`).
    fn decide(&self, graph: &Hypergraph, outputs: &[bool], rng: &mut Stream) -> bool;
}

pub type SharedDistinguisher = Arc<dyn Distinguisher>;

impl<D: Distinguisher + ?Sized> Distinguisher for Arc<D> {
    fn name(&self) -> String {
        (**self).name()
    }

    fn cost_note(&self) -> String {
        (**self).cost_note()
    }

    fn supports(&self, family: &GraphFamily) -> Result<()> {
        (**self).supports(family)
    }

    fn decide(&self, graph: &Hypergraph, outputs: &[bool], rng: &mut Stream) -> bool {
        (**self).decide(graph, outputs, rng)
    }
}

impl<D: Distinguisher + ?Sized> Distinguisher for &D {
    fn name(&self) -> String {
        (**self).name()
    }

    fn cost_note(&self) -> String {
        (**self).cost_note()
    }

    fn supports(&self, family: &GraphFamily) -> Result<()> {
        (**self).supports(family)
    }

    fn decide(&self, graph: &Hypergraph, outputs: &[bool], rng: &mut Stream) -> bool {
        (**self).decide(graph, outputs, rng)
    }
}

/// Always answers the same bit.
#[derive(Clone, Copy, Debug)]
pub struct Constant(pub bool);

impl Distinguisher for Constant {
    fn name(&self) -> String {
        format!("constant-{}", u8::from(self.0))
    }

    fn cost_note(&self) -> String {
        "O(1)".into()
    }

    fn decide(&self, _: &Hypergraph, _: &[bool], _: &mut Stream) -> bool {
        self.0
    }
}

/// Fair coin, ignoring the instance.
#[derive(Clone, Copy, Debug)]
pub struct Coin;

impl Distinguisher for Coin {
    fn name(&self) -> String {
        "coin".into()
    }

    fn cost_note(&self) -> String {
        "O(1)".into()
    }

    fn decide(&self, _: &Hypergraph, _: &[bool], rng: &mut Stream) -> bool {
        rng.random()
    }
}

/// `1 - D`.
#[derive(Clone)]
pub struct Negated<D>(pub D);

impl<D: Distinguisher> Distinguisher for Negated<D> {
    fn name(&self) -> String {
        format!("not:{}", self.0.name())
    }

    fn cost_note(&self) -> String {
        self.0.cost_note()
    }

    fn supports(&self, family: &GraphFamily) -> Result<()> {
        self.0.supports(family)
    }

    fn decide(&self, graph: &Hypergraph, outputs: &[bool], rng: &mut Stream) -> bool {
        !self.0.decide(graph, outputs, rng)
    }
}

/// Accepts iff some pair of identical edges exists and every such pair has
/// equal outputs.
#[derive(Clone, Copy, Debug, Default)]
pub struct RepeatedEdge;

impl Distinguisher for RepeatedEdge {
    fn name(&self) -> String {
        "repeated-edge".into()
    }

    fn cost_note(&self) -> String {
        "O(m d log m)".into()
    }

    fn decide(&self, graph: &Hypergraph, outputs: &[bool], _: &mut Stream) -> bool {
        let space = crate::hypergraph::support_size(graph.n(), 1, graph.d());
        match packed_edges(graph) {
            Some(keys) if space.is_some_and(|s| s <= DENSE_KEYS) => {
                // 0 unseen, 1 + output once seen
                let mut seen = vec![0u8; space.unwrap_or(0) as usize];
                let mut collided = false;
                for (k, &y) in keys.iter().zip(outputs) {
                    let tag = 1 + u8::from(y);
                    match seen[*k as usize] {
                        0 => seen[*k as usize] = tag,
                        prev if prev != tag => return false,
                        _ => collided = true,
                    }
                }
                collided
            }
            Some(keys) => {
                // output in the low bit, so sorting groups equal edges
                let mut keyed: Vec<u64> = keys
                    .into_iter()
                    .zip(outputs)
                    .map(|(k, &y)| k << 1 | u64::from(y))
                    .collect();
                keyed.sort_unstable();
                collisions_agree(&keyed, |a, b| a >> 1 == b >> 1, |k| k & 1 == 1)
            }
            None => {
                let mut keyed: Vec<(&[Vertex], bool)> = graph.edges().zip(outputs.iter().copied()).collect();
                keyed.sort_unstable_by(|a, b| a.0.cmp(b.0));
                collisions_agree(&keyed, |a, b| a.0 == b.0, |k| k.1)
            }
        }
    }
}

/// Edge key spaces up to this size use a lookup table instead of sorting.
const DENSE_KEYS: u64 = 1 << 12;

/// Each edge as the base-`n` number of its slots, when that fits in 63 bits.
fn packed_edges(graph: &Hypergraph) -> Option<Vec<u64>> {
    crate::hypergraph::support_size(graph.n(), 1, graph.d()).filter(|&s| s <= 1 << 62)?;
    let n = graph.n() as u64;
    Some(
        graph
            .edges()
            .map(|e| e.iter().fold(0u64, |acc, &v| acc * n + u64::from(v)))
            .collect(),
    )
}

/// True iff sorted `items` contain at least one equal neighbour pair and
/// every such pair carries the same output.
fn collisions_agree<T>(items: &[T], same: impl Fn(&T, &T) -> bool, out: impl Fn(&T) -> bool) -> bool {
    let mut collided = false;
    for w in items.windows(2) {
        if same(&w[0], &w[1]) {
            if out(&w[0]) != out(&w[1]) {
                return false;
            }
            collided = true;
        }
    }
    collided
}

/// Neyman–Pearson test: planted likelihood `|{s : f_G(s) = y}| / 2^n`
/// against null likelihood `eta^wt(y) (1 - eta)^(m - wt(y))`, compared
/// exactly. Ties answer 0.
#[derive(Clone, Debug)]
pub struct LikelihoodRatio {
    pred: Predicate,
    max_n: usize,
}

impl LikelihoodRatio {
    pub fn new(pred: Predicate, max_n: usize) -> Result<Self> {
        if max_n > LR_MAX_N {
            return Err(Error::Infeasible(format!(
                "likelihood-ratio cap {max_n} exceeds {LR_MAX_N}"
            )));
        }
        Ok(Self { pred, max_n })
    }

    pub fn predicate(&self) -> &Predicate {
        &self.pred
    }

    /// Number of secrets `s` with `f_G(s) = y`.
    pub fn preimage_count(&self, graph: &Hypergraph, outputs: &[bool]) -> u64 {
        let n = graph.n();
        let mut bits = vec![false; n];
        let mut count = 0;
        for s in 0..1u64 << n {
            for (i, b) in bits.iter_mut().enumerate() {
                *b = s >> i & 1 == 1;
            }
            if graph
                .edges()
                .zip(outputs)
                .all(|(e, &y)| self.pred.entry(edge_index(e, &bits)) == y)
            {
                count += 1;
            }
        }
        count
    }

    #[inline]
    fn accepts(&self, count: u64, n: usize, m: usize, weight: usize) -> bool {
        lr_accepts(&self.pred, count, n, m, weight)
    }

    /// Exact acceptance probabilities `(planted, null)` conditioned on `graph`.
    pub fn conditional(&self, graph: &Hypergraph) -> Result<(Exact, Exact)> {
        self.supports(&GraphFamily::uniform(graph.n(), graph.m().max(1), graph.d()))?;
        let table = image_table(&self.pred, graph)?;
        let (n, m) = (graph.n(), graph.m());
        let mut planted = 0u64;
        let mut null = BigUint::zero();
        for (&y, &count) in &table {
            let w = y.count_ones() as usize;
            if self.accepts(count, n, m, w) {
                planted += count;
                null += null_weight(&self.pred, m, w);
            }
        }
        let planted = BigRational::new(planted.into(), (BigUint::one() << n).into());
        let null = BigRational::new(null.into(), (BigUint::one() << (self.pred.arity() * m)).into());
        Ok((planted, null))
    }
}

/// `ones^w (2^d - ones)^(m - w)`: the null likelihood times `2^(d m)`.
fn null_weight(pred: &Predicate, m: usize, w: usize) -> BigUint {
    let ones = BigUint::from(pred.ones());
    let zeros = BigUint::from(pred.table_len() as u64 - pred.ones());
    ones.pow(w as u32) * zeros.pow((m - w) as u32)
}

pub(crate) fn lr_accepts(pred: &Predicate, count: u64, n: usize, m: usize, w: usize) -> bool {
    if count == 0 {
        return false;
    }
    let lhs = BigUint::from(count) << (pred.arity() * m);
    let rhs = null_weight(pred, m, w) << n;
    lhs > rhs
}

/// Histogram of `f_G(s)` over all secrets, keyed by the output bits packed
/// with output `i` at bit `i`.
fn image_table(pred: &Predicate, graph: &Hypergraph) -> Result<std::collections::BTreeMap<u64, u64>> {
    if graph.m() > 64 {
        return Err(Error::Infeasible("image table packs at most 64 outputs".into()));
    }
    let n = graph.n();
    let mut bits = vec![false; n];
    let mut table = std::collections::BTreeMap::new();
    for s in 0..1u64 << n {
        for (i, b) in bits.iter_mut().enumerate() {
            *b = s >> i & 1 == 1;
        }
        let y = graph
            .edges()
            .enumerate()
            .fold(0u64, |acc, (i, e)| acc | u64::from(pred.entry(edge_index(e, &bits))) << i);
        *table.entry(y).or_insert(0) += 1;
    }
    Ok(table)
}

impl Distinguisher for LikelihoodRatio {
    fn name(&self) -> String {
        "likelihood-ratio".into()
    }

    fn cost_note(&self) -> String {
        format!("O(2^n m d), n <= {}", self.max_n)
    }

    fn supports(&self, family: &GraphFamily) -> Result<()> {
        if family.n > self.max_n {
            return Err(Error::Infeasible(format!(
                "likelihood-ratio enumerates 2^n secrets; n = {} exceeds cap {}",
                family.n, self.max_n
            )));
        }
        check_len("predicate arity", family.d, self.pred.arity())
    }

    fn decide(&self, graph: &Hypergraph, outputs: &[bool], _: &mut Stream) -> bool {
        if graph.n() > self.max_n {
            return false;
        }
        let count = self.preimage_count(graph, outputs);
        let w = outputs.iter().filter(|&&b| b).count();
        self.accepts(count, graph.n(), graph.m(), w)
    }
}

/// Exact quantities of the likelihood-ratio test over the whole family.
#[derive(Clone, Debug, Serialize)]
pub struct ExactLikelihoodRatio {
    /// Acceptance under the null distribution.
    pub p_null: f64,
    /// Acceptance under the planted distribution with a uniform secret.
    pub p_planted: f64,
    /// Acceptance under the planted distribution, secret uniform of weight `w`.
    pub p_planted_by_weight: Vec<f64>,
    pub advantage: f64,
    pub graphs: u64,
}

/// Enumerates every graph of the repeat-allowed family and every secret.
pub fn exact_likelihood_ratio(pred: &Predicate, family: &GraphFamily) -> Result<ExactLikelihoodRatio> {
    family.validate()?;
    check_len("predicate arity", family.d, pred.arity())?;
    if family.distinct {
        return Err(invalid("exact enumeration covers repeat-allowed families only"));
    }
    let (n, m, d) = (family.n, family.m, family.d);
    let graphs = crate::hypergraph::support_size(n, m, d)
        .filter(|&g| g.saturating_mul(1 << n) <= 1 << 34 && n <= LR_MAX_N && m <= 64)
        .ok_or_else(|| Error::Infeasible(format!("{n}^{} graphs times 2^{n} secrets is too many", m * d)))?;
    let mut weight_of = vec![0usize; 1 << n];
    for (s, w) in weight_of.iter_mut().enumerate() {
        *w = (s as u64).count_ones() as usize;
    }
    let mut planted_by_weight = vec![0u64; n + 1];
    let mut null = BigUint::zero();
    // the decision depends on (preimage count, output weight) only
    let mut cache = std::collections::HashMap::new();
    let mut images = vec![0u64; 1 << n];
    let mut bits = vec![false; n];
    for gi in 0..graphs {
        let g = Hypergraph::from_support_index(n, m, d, gi)?;
        let mut hist = std::collections::HashMap::<u64, u64>::new();
        for s in 0..1usize << n {
            for (i, b) in bits.iter_mut().enumerate() {
                *b = s >> i & 1 == 1;
            }
            let y = g
                .edges()
                .enumerate()
                .fold(0u64, |acc, (i, e)| acc | u64::from(pred.entry(edge_index(e, &bits))) << i);
            images[s] = y;
            *hist.entry(y).or_insert(0) += 1;
        }
        for s in 0..1usize << n {
            let y = images[s];
            let count = hist[&y];
            let w = y.count_ones() as usize;
            let ok = *cache
                .entry((count, w))
                .or_insert_with(|| lr_accepts(pred, count, n, m, w));
            if ok {
                planted_by_weight[weight_of[s]] += 1;
            }
        }
        for (&y, &count) in &hist {
            let w = y.count_ones() as usize;
            if cache[&(count, w)] {
                null += null_weight(pred, m, w);
            }
        }
    }
    let p_planted_by_weight: Vec<f64> = planted_by_weight
        .iter()
        .enumerate()
        .map(|(w, &c)| c as f64 / (graphs as f64 * binomial_count(n, w)))
        .collect();
    let p_planted = planted_by_weight.iter().sum::<u64>() as f64 / (graphs as f64 * (1u64 << n) as f64);
    let denom = BigUint::from(graphs) << (d * m);
    let p_null = crate::Scalar::as_f64(&BigRational::new(null.into(), denom.into()));
    Ok(ExactLikelihoodRatio {
        p_null,
        p_planted,
        p_planted_by_weight,
        advantage: p_planted - p_null,
        graphs,
    })
}

fn binomial_count(n: usize, k: usize) -> f64 {
    (1..=k).fold(1.0, |acc, i| acc * (n - k + i) as f64 / i as f64)
}

/// Collision test on a correlated subset `T`: pairs of edges whose
/// `T`-slot vertex multisets coincide should have equal outputs more often
/// than the null rate `eta^2 + (1 - eta)^2`.
#[derive(Clone, Debug)]
pub struct ParityCollision {
    subset: Vec<usize>,
    null_agreement: f64,
    offset: f64,
}

impl ParityCollision {
    /// Uses the lowest lexicographic minimal correlated subset. `eta` is the
    /// output bias of the null distribution; `offset` defaults to the
    /// midpoint between the null rate and full agreement.
    pub fn new(pred: &Predicate, eta: f64, offset: Option<f64>) -> Result<Self> {
        let subset = pred
            .correlated_subset()
            .ok_or_else(|| invalid("parity collision needs a non-constant predicate"))?;
        Self::with_subset(subset, eta, offset)
    }

    pub fn with_subset(subset: Vec<usize>, eta: f64, offset: Option<f64>) -> Result<Self> {
        if subset.is_empty() {
            return Err(invalid("correlated subset must be non-empty"));
        }
        if !(0.0..=1.0).contains(&eta) {
            return Err(invalid(format!("bias {eta} outside [0, 1]")));
        }
        let null_agreement = eta * eta + (1.0 - eta) * (1.0 - eta);
        let offset = offset.unwrap_or((1.0 - null_agreement) / 2.0);
        Ok(Self {
            subset,
            null_agreement,
            offset,
        })
    }

    pub fn subset(&self) -> &[usize] {
        &self.subset
    }

    pub fn threshold(&self) -> f64 {
        self.null_agreement + self.offset
    }

    /// `(agreeing pairs, pairs)` among edges with equal `T`-multisets.
    pub fn agreement(&self, graph: &Hypergraph, outputs: &[bool]) -> (u64, u64) {
        let mut keyed: Vec<(Vec<Vertex>, bool)> = graph
            .edges()
            .zip(outputs)
            .map(|(e, &y)| {
                let mut key: Vec<Vertex> = self.subset.iter().map(|&k| e[k]).collect();
                key.sort_unstable();
                (key, y)
            })
            .collect();
        keyed.sort_unstable();
        let (mut agree, mut pairs) = (0u64, 0u64);
        for group in keyed.chunk_by(|a, b| a.0 == b.0) {
            let k = group.len() as u64;
            let ones = group.iter().filter(|g| g.1).count() as u64;
            let zeros = k - ones;
            pairs += k * (k - 1) / 2;
            agree += ones * ones.saturating_sub(1) / 2 + zeros * zeros.saturating_sub(1) / 2;
        }
        (agree, pairs)
    }
}

impl Distinguisher for ParityCollision {
    fn name(&self) -> String {
        "parity-collision".into()
    }

    fn cost_note(&self) -> String {
        "O(m c log m)".into()
    }

    fn supports(&self, family: &GraphFamily) -> Result<()> {
        match self.subset.iter().max() {
            Some(&k) if k < family.d => Ok(()),
            _ => Err(invalid("correlated subset does not fit the edge arity")),
        }
    }

    fn decide(&self, graph: &Hypergraph, outputs: &[bool], _: &mut Stream) -> bool {
        let (agree, pairs) = self.agreement(graph, outputs);
        pairs > 0 && agree as f64 / pairs as f64 > self.threshold()
    }
}

/// Built-in distinguisher names accepted by [`by_name`]; prefix any of them
/// with `not:` for the negation.
pub const BUILTIN_DISTINGUISHERS: [&str; 6] = [
    "repeated-edge",
    "likelihood-ratio",
    "parity-collision",
    "coin",
    "constant-0",
    "constant-1",
];

/// Builds a distinguisher by name for the given output model and family.
pub fn by_name(name: &str, model: &dyn OutputModel, family: &GraphFamily) -> Result<SharedDistinguisher> {
    if let Some(inner) = name.strip_prefix("not:") {
        return Ok(Arc::new(Negated(by_name(inner, model, family)?)));
    }
    let d: SharedDistinguisher = match name {
        "repeated-edge" => Arc::new(RepeatedEdge),
        "likelihood-ratio" => Arc::new(LikelihoodRatio::new(model.base().clone(), LR_MAX_N)?),
        "parity-collision" => Arc::new(ParityCollision::new(model.base(), model.output_bias(), None)?),
        "coin" => Arc::new(Coin),
        "constant-0" => Arc::new(Constant(false)),
        "constant-1" => Arc::new(Constant(true)),
        other => {
            return Err(invalid(format!(
                "unknown distinguisher {other:?}; expected one of {}",
                BUILTIN_DISTINGUISHERS.join(", ")
            )))
        }
    };
    d.supports(family)?;
    Ok(d)
}

/// Acceptance frequencies on planted and null instances.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AdvantageReport {
    pub p_planted: f64,
    pub p_null: f64,
    /// `p_planted - p_null`, signed.
    pub advantage: f64,
    /// 95% half-width for `advantage` (Wilson half-widths in quadrature).
    pub ci_halfwidth: f64,
    pub trials: u64,
}

impl AdvantageReport {
    pub fn from_counts(planted: u64, null: u64, trials: u64) -> Self {
        let t = trials.max(1) as f64;
        let (p, q) = (planted as f64 / t, null as f64 / t);
        Self {
            p_planted: p,
            p_null: q,
            advantage: p - q,
            ci_halfwidth: wilson_halfwidth(planted, trials).hypot(wilson_halfwidth(null, trials)),
            trials,
        }
    }
}

const KEY_PLANTED: u64 = 0;
const KEY_NULL: u64 = 1;

/// Monte Carlo acceptance of `dist` on `trials` fresh planted instances
/// (uniform secret each time) and `trials` fresh null instances.
pub fn estimate_advantage(
    dist: &dyn Distinguisher,
    model: &dyn OutputModel,
    family: &GraphFamily,
    trials: u64,
    streams: &Streams,
    exec: &Exec,
) -> Result<AdvantageReport> {
    if trials == 0 {
        return Err(invalid("trials must be at least 1"));
    }
    family.validate()?;
    check_len("predicate arity", family.d, model.arity())?;
    dist.supports(family)?;
    let planted = exec.count_true(streams, &[KEY_PLANTED], trials, |_, rng| {
        let (inst, _) = sample_planted(model, family, rng).expect("family validated");
        dist.decide(inst.graph(), inst.outputs(), rng)
    });
    let null = exec.count_true(streams, &[KEY_NULL], trials, |_, rng| {
        let inst = sample_null(model, family, rng).expect("family validated");
        dist.decide(inst.graph(), inst.outputs(), rng)
    });
    Ok(AdvantageReport::from_counts(planted, null, trials))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct WeightRow {
    pub weight: usize,
    pub p_planted: f64,
    /// `p_planted(weight) - p_null`.
    pub gap: f64,
    pub ci_halfwidth: f64,
    /// `gap >= eps / 2`.
    pub flagged: bool,
    /// Probability `C(n, w) / 2^n` that a uniform secret has this weight.
    pub mass: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WeightScan {
    pub eps: f64,
    pub p_null: Proportion,
    pub rows: Vec<WeightRow>,
}

impl WeightScan {
    /// Binomial mass of the flagged weights.
    pub fn flagged_mass(&self) -> f64 {
        self.rows.iter().filter(|r| r.flagged).fold(0.0, |acc, r| acc + r.mass)
    }

    /// Mass of weights whose flag could flip within their interval.
    pub fn ambiguous_mass(&self) -> f64 {
        self.rows
            .iter()
            .filter(|r| (r.gap - self.eps / 2.0).abs() < r.ci_halfwidth)
            .fold(0.0, |acc, r| acc + r.mass)
    }
}

/// For every weight `w` in `0..=n`, estimates acceptance on planted
/// instances whose secret is uniform of weight `w`, against one shared null
/// estimate, and flags weights with gap at least `eps / 2`.
#[allow(clippy::too_many_arguments)]
pub fn good_weight_scan(
    dist: &dyn Distinguisher,
    model: &dyn OutputModel,
    family: &GraphFamily,
    eps: f64,
    trials_per_weight: u64,
    streams: &Streams,
    exec: &Exec,
) -> Result<WeightScan> {
    if trials_per_weight == 0 {
        return Err(invalid("trials must be at least 1"));
    }
    family.validate()?;
    check_len("predicate arity", family.d, model.arity())?;
    dist.supports(family)?;
    let null = exec.count_true(streams, &[KEY_NULL], trials_per_weight, |_, rng| {
        let inst = sample_null(model, family, rng).expect("family validated");
        dist.decide(inst.graph(), inst.outputs(), rng)
    });
    let p_null = Proportion::new(null, trials_per_weight);
    let n = family.n;
    let rows = (0..=n)
        .map(|w| {
            let hits = exec.count_true(streams, &[KEY_PLANTED, w as u64], trials_per_weight, |_, rng| {
                let s = sample_secret_with_weight(n, w, rng).expect("weight in range");
                let inst = planted_with_secret(model, family, &s, rng).expect("family validated");
                dist.decide(inst.graph(), inst.outputs(), rng)
            });
            let p = Proportion::new(hits, trials_per_weight);
            let gap = p.estimate - p_null.estimate;
            WeightRow {
                weight: w,
                p_planted: p.estimate,
                gap,
                ci_halfwidth: p.ci_halfwidth.hypot(p_null.ci_halfwidth),
                flagged: gap >= eps / 2.0,
                mass: binomial_mass(n, w),
            }
        })
        .collect();
    Ok(WeightScan { eps, p_null, rows })
}

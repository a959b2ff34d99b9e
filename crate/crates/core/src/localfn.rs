//! Local functions `f_{G,P}(s)`: evaluation, planted and null instances,
//! secrets and the oracle handing out fresh planted instances.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use rand::seq::index;
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, invalid, Error, Result};
use crate::exec::{Stream, Streams};
use crate::hypergraph::{GraphFamily, Hypergraph, Permutation, Vertex};
use crate::predicate::{NoisyPredicate, Predicate};

/// An `n`-bit input with its Hamming weight cached.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Secret {
    bits: Vec<bool>,
    weight: usize,
}

impl Secret {
    pub fn new(bits: Vec<bool>) -> Self {
        let weight = bits.iter().filter(|&&b| b).count();
        Self { bits, weight }
    }

    pub fn zeros(n: usize) -> Self {
        Self::new(vec![false; n])
    }

    pub fn uniform<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        Self::new((0..n).map(|_| rng.random()).collect())
    }

    /// Bits of `value`, bit `i` of the integer becoming position `i`.
    pub fn from_u64(n: usize, value: u64) -> Self {
        Self::new((0..n).map(|i| value >> i & 1 == 1).collect())
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn weight(&self) -> usize {
        self.weight
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, i: usize) -> bool {
        self.bits[i]
    }

    pub fn complement(&self) -> Self {
        Self::new(self.bits.iter().map(|b| !b).collect())
    }
}

impl fmt::Debug for Secret {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Secret({self})")
    }
}

impl fmt::Display for Secret {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&bit_string(&self.bits))
    }
}

impl FromStr for Secret {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_bits(s).map(Secret::new)
    }
}

impl TryFrom<String> for Secret {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Secret> for String {
    fn from(s: Secret) -> Self {
        s.to_string()
    }
}

pub(crate) fn bit_string(bits: &[bool]) -> String {
    bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

pub(crate) fn parse_bits(s: &str) -> Result<Vec<bool>> {
    s.chars()
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            _ => Err(Error::Malformed(format!("bit string contains {c:?}"))),
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InstanceKind {
    Planted,
    Null,
    Unknown,
}

/// A hypergraph with one output bit per edge. The kind tag is bookkeeping
/// only and never reaches a distinguisher.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "InstanceWire", into = "InstanceWire")]
pub struct Instance {
    graph: Hypergraph,
    outputs: Vec<bool>,
    kind: InstanceKind,
}

impl Instance {
    pub fn new(graph: Hypergraph, outputs: Vec<bool>, kind: InstanceKind) -> Result<Self> {
        check_len("instance outputs", graph.m(), outputs.len())?;
        Ok(Self { graph, outputs, kind })
    }

    pub fn graph(&self) -> &Hypergraph {
        &self.graph
    }

    pub fn outputs(&self) -> &[bool] {
        &self.outputs
    }

    pub fn kind(&self) -> InstanceKind {
        self.kind
    }

    pub fn into_parts(self) -> (Hypergraph, Vec<bool>) {
        (self.graph, self.outputs)
    }
}

#[derive(Serialize, Deserialize)]
struct InstanceWire {
    graph: Hypergraph,
    outputs: String,
    kind: InstanceKind,
}

impl TryFrom<InstanceWire> for Instance {
    type Error = Error;

    fn try_from(w: InstanceWire) -> Result<Self> {
        Instance::new(w.graph, parse_bits(&w.outputs)?, w.kind)
    }
}

impl From<Instance> for InstanceWire {
    fn from(i: Instance) -> Self {
        InstanceWire {
            outputs: bit_string(&i.outputs),
            graph: i.graph,
            kind: i.kind,
        }
    }
}

#[inline]
pub(crate) fn edge_index(edge: &[Vertex], bits: &[bool]) -> usize {
    edge.iter()
        .enumerate()
        .fold(0, |acc, (k, &v)| acc | usize::from(bits[v as usize]) << k)
}

fn check_dims(g: &Hypergraph, pred: &Predicate, n: usize) -> Result<()> {
    check_len("predicate arity", g.d(), pred.arity())?;
    check_len("secret length", g.n(), n)
}

/// `f_{G,P}(s)`: output `i` is `P` applied to the secret bits at edge `i`,
/// in slot order.
pub fn evaluate(g: &Hypergraph, pred: &Predicate, s: &Secret) -> Result<Vec<bool>> {
    check_dims(g, pred, s.len())?;
    Ok(g.edges().map(|e| pred.entry(edge_index(e, s.bits()))).collect())
}

/// True iff `candidate` reproduces `outputs` on `g`.
pub fn verify(g: &Hypergraph, pred: &Predicate, candidate: &Secret, outputs: &[bool]) -> Result<bool> {
    check_dims(g, pred, candidate.len())?;
    check_len("instance outputs", g.m(), outputs.len())?;
    Ok(g.edges()
        .zip(outputs)
        .all(|(e, &y)| pred.entry(edge_index(e, candidate.bits())) == y))
}

/// How output bits arise from a graph and a secret.
pub trait OutputModel: Send + Sync {
    fn base(&self) -> &Predicate;

    fn noise_rate(&self) -> f64;

    /// Marginal probability of a 1 output; the null distribution uses it.
    fn output_bias(&self) -> f64;

    fn arity(&self) -> usize {
        self.base().arity()
    }

    fn outputs(&self, g: &Hypergraph, s: &Secret, rng: &mut dyn RngCore) -> Result<Vec<bool>>;
}

impl OutputModel for Predicate {
    fn base(&self) -> &Predicate {
        self
    }

    fn noise_rate(&self) -> f64 {
        0.0
    }

    fn output_bias(&self) -> f64 {
        self.bias()
    }

    fn outputs(&self, g: &Hypergraph, s: &Secret, _rng: &mut dyn RngCore) -> Result<Vec<bool>> {
        evaluate(g, self, s)
    }
}

impl OutputModel for NoisyPredicate {
    fn base(&self) -> &Predicate {
        NoisyPredicate::base(self)
    }

    fn noise_rate(&self) -> f64 {
        NoisyPredicate::noise_rate(self)
    }

    fn output_bias(&self) -> f64 {
        self.bias()
    }

    fn outputs(&self, g: &Hypergraph, s: &Secret, rng: &mut dyn RngCore) -> Result<Vec<bool>> {
        let mut y = evaluate(g, self.base(), s)?;
        for b in y.iter_mut() {
            *b ^= self.flip(rng);
        }
        Ok(y)
    }
}

fn check_family<M: OutputModel + ?Sized>(model: &M, family: &GraphFamily) -> Result<()> {
    family.validate()?;
    check_len("predicate arity", family.d, model.arity())
}

/// Planted instance for a given secret.
pub fn planted_with_secret<M: OutputModel + ?Sized, R: RngCore>(
    model: &M,
    family: &GraphFamily,
    s: &Secret,
    rng: &mut R,
) -> Result<Instance> {
    check_family(model, family)?;
    let g = family.sample(rng)?;
    let y = model.outputs(&g, s, rng)?;
    Instance::new(g, y, InstanceKind::Planted)
}

/// Uniform graph, uniform secret, outputs `f_{G,P}(s)` (plus noise for noisy
/// models).
pub fn sample_planted<M: OutputModel + ?Sized, R: RngCore>(
    model: &M,
    family: &GraphFamily,
    rng: &mut R,
) -> Result<(Instance, Secret)> {
    let s = Secret::uniform(family.n, rng);
    let inst = planted_with_secret(model, family, &s, rng)?;
    Ok((inst, s))
}

/// Uniform graph with outputs drawn i.i.d. from Bernoulli of the model's
/// output bias, independent of the graph.
pub fn sample_null<M: OutputModel + ?Sized, R: RngCore>(
    model: &M,
    family: &GraphFamily,
    rng: &mut R,
) -> Result<Instance> {
    check_family(model, family)?;
    let g = family.sample(rng)?;
    let eta = model.output_bias();
    let y = (0..family.m).map(|_| rng.random_bool(eta)).collect();
    Instance::new(g, y, InstanceKind::Null)
}

/// Half-width `w = 2 sqrt(n) ln(1/eps)` of the fairly balanced weight window.
pub fn fairly_balanced_window(n: usize, eps: f64) -> Result<f64> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(invalid(format!("eps must lie in (0, 1], got {eps}")));
    }
    Ok(2.0 * (n as f64).sqrt() * (1.0 / eps).ln())
}

/// Weights in `[n/2 - w, n/2 + w]`, ordered from the center outward (lower
/// weight first on ties). The half-width is floored at 1/2 so the window is
/// never empty for odd `n`.
pub fn balanced_weights(n: usize, eps: f64) -> Result<Vec<usize>> {
    let w = fairly_balanced_window(n, eps)?.max(0.5);
    let half = n as f64 / 2.0;
    let mut ws: Vec<usize> = (0..=n).filter(|&k| (k as f64 - half).abs() <= w).collect();
    ws.sort_by(|&a, &b| {
        let da = (a as f64 - half).abs();
        let db = (b as f64 - half).abs();
        da.total_cmp(&db).then(a.cmp(&b))
    });
    Ok(ws)
}

pub fn is_fairly_balanced(s: &Secret, eps: f64) -> Result<bool> {
    let w = fairly_balanced_window(s.len(), eps)?.max(0.5);
    Ok((s.weight() as f64 - s.len() as f64 / 2.0).abs() <= w)
}

/// Uniform secret among the `C(n, w)` strings of weight `w`.
pub fn sample_secret_with_weight<R: Rng + ?Sized>(n: usize, w: usize, rng: &mut R) -> Result<Secret> {
    if w > n {
        return Err(invalid(format!("weight {w} exceeds length {n}")));
    }
    let mut bits = vec![false; n];
    for i in index::sample(rng, n, w) {
        bits[i] = true;
    }
    Ok(Secret::new(bits))
}

/// `pi(s)` with `pi(s)[pi(j)] = s[j]`, so that
/// `f_{G,P}(s) = f_{pi(G),P}(pi(s))`.
pub fn permuted_secret(s: &Secret, pi: &Permutation) -> Result<Secret> {
    check_len("permutation size", s.len(), pi.len())?;
    let mut bits = vec![false; s.len()];
    for (j, &b) in s.bits().iter().enumerate() {
        bits[pi.apply(j)] = b;
    }
    Ok(Secret::new(bits))
}

/// Source of fresh planted instances sharing one hidden secret.
///
/// Instance `k` is a pure function of the oracle seed and `k`, so draws can
/// be generated concurrently and replayed. An optional budget caps how many
/// instances may be handed out.
#[derive(Clone, Debug)]
pub struct SecretOracle {
    model: NoisyPredicate,
    family: GraphFamily,
    secret: Secret,
    streams: Streams,
    drawn: u64,
    budget: Option<u64>,
}

impl SecretOracle {
    pub fn new(model: NoisyPredicate, family: GraphFamily, secret: Secret, seed: u64) -> Result<Self> {
        check_family(&model, &family)?;
        check_len("secret length", family.n, secret.len())?;
        Ok(Self {
            model,
            family,
            secret,
            streams: Streams::new(seed),
            drawn: 0,
            budget: None,
        })
    }

    /// Oracle with a uniformly random secret drawn from `seed`.
    pub fn with_random_secret(model: NoisyPredicate, family: GraphFamily, seed: u64) -> Result<Self> {
        let secret = Secret::uniform(family.n, &mut Streams::new(seed).stream(&[0]));
        Self::new(model, family, secret, seed)
    }

    pub fn with_budget(mut self, budget: u64) -> Self {
        self.budget = Some(budget);
        self
    }

    pub fn model(&self) -> &NoisyPredicate {
        &self.model
    }

    pub fn predicate(&self) -> &Predicate {
        self.model.base()
    }

    pub fn family(&self) -> &GraphFamily {
        &self.family
    }

    pub fn drawn(&self) -> u64 {
        self.drawn
    }

    pub fn budget(&self) -> Option<u64> {
        self.budget
    }

    /// The hidden secret, for scoring experiments. Search code must not
    /// call this.
    pub fn secret(&self) -> &Secret {
        &self.secret
    }

    /// Instance number `k`, independent of how many have been reserved.
    pub fn instance_at(&self, k: u64) -> Instance {
        let mut rng: Stream = self.streams.stream(&[1, k]);
        let g = self.family.sample(&mut rng).expect("family validated");
        let y = self
            .model
            .outputs(&g, &self.secret, &mut rng)
            .expect("dimensions validated");
        Instance::new(g, y, InstanceKind::Unknown).expect("outputs match edges")
    }

    /// Reserves the next `count` instance numbers.
    pub fn reserve(&mut self, count: u64, context: &str) -> Result<Range<u64>> {
        let start = self.drawn;
        let end = start.checked_add(count).ok_or_else(|| invalid("instance counter overflow"))?;
        if let Some(budget) = self.budget {
            if end > budget {
                return Err(Error::OracleExhausted {
                    drawn: start,
                    requested: count,
                    budget,
                    context: context.to_string(),
                });
            }
        }
        self.drawn = end;
        Ok(start..end)
    }

    pub fn draw(&mut self) -> Result<Instance> {
        let k = self.reserve(1, "single draw")?.start;
        Ok(self.instance_at(k))
    }
}

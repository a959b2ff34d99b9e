use rand::Rng;
use serde::Serialize;

use crate::distinguish::Distinguisher;
use crate::error::{check_len, invalid, Result};
use crate::exec::{Exec, Stream, Streams};
use crate::hypergraph::{apply_transforms, GraphFamily, Hypergraph, Permutation, Vertex};
use crate::localfn::{planted_with_secret, sample_secret_with_weight, Instance, InstanceKind, OutputModel, Secret};
use crate::stats::{Proportion, Z95};

/// One draw of the hybrid randomness: a relabeling `pi` followed by `r`
/// transformations `T_{a_j, b_j}` out of a budget of `t`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HybridParams {
    pub t: u64,
    pub r: u64,
    pub pi: Permutation,
    pub pairs: Vec<(Vertex, Vertex)>,
}

impl HybridParams {
    /// `pi` uniform and `r` pairs with `a, b` independent uniform on `0..n`.
    pub fn sample<R: Rng + ?Sized>(n: usize, t: u64, r: u64, rng: &mut R) -> Result<Self> {
        if r > t {
            return Err(invalid(format!("hybrid index {r} exceeds budget {t}")));
        }
        let pi = Permutation::random(n, rng);
        let pairs = random_pairs(n, r, rng);
        Ok(Self { t, r, pi, pairs })
    }

    /// `T_{a_r,b_r} o ... o T_{a_1,b_1}(pi(G))`.
    pub fn apply<R: Rng + ?Sized>(&self, g: &Hypergraph, rng: &mut R) -> Result<Hypergraph> {
        let mut out = g.permute(&self.pi)?;
        apply_transforms(&mut out, &self.pairs, rng)?;
        Ok(out)
    }
}

fn random_pairs<R: Rng + ?Sized>(n: usize, r: u64, rng: &mut R) -> Vec<(Vertex, Vertex)> {
    let n = n as Vertex;
    (0..r)
        .map(|_| (rng.random_range(0..n), rng.random_range(0..n)))
        .collect()
}

/// A draw from the hybrid `H_r^s`: fresh graph `G`, outputs of `s` on `G`,
/// and the graph replaced by `r` random transformations of `pi(G)`.
pub fn hybrid_sample<M: OutputModel + ?Sized, R: Rng>(
    model: &M,
    s: &Secret,
    r: u64,
    t: u64,
    family: &GraphFamily,
    rng: &mut R,
) -> Result<Instance> {
    let (g, y) = planted_with_secret(model, family, s, rng)?.into_parts();
    let params = HybridParams::sample(family.n, t, r, rng)?;
    Instance::new(params.apply(&g, rng)?, y, InstanceKind::Unknown)
}

/// The predictor `S_i` on one oracle instance: a uniform `r` in `0..t`,
/// `r` random transformations of `pi(G)`, then `T_{pi(0), pi(i)}`, then `D`.
pub fn predictor(i: usize, inst: &Instance, dist: &dyn Distinguisher, t: u64, rng: &mut Stream) -> Result<bool> {
    let n = inst.graph().n();
    if i == 0 || i >= n {
        return Err(invalid(format!("predictor index {i} outside 1..{n}")));
    }
    if t == 0 {
        return Err(invalid("transformation budget must be positive"));
    }
    let r = rng.random_range(0..t);
    let pi = Permutation::random(n, rng);
    let mut pairs = random_pairs(n, r, rng);
    pairs.push((pi.apply(0) as Vertex, pi.apply(i) as Vertex));
    let mut g = inst.graph().permute(&pi)?;
    apply_transforms(&mut g, &pairs, rng)?;
    Ok(dist.decide(&g, inst.outputs(), rng))
}

/// `eq_w = Pr[D(H_r^s) = 1]` with `s` uniform of weight `w` and `r` uniform
/// in `0..t`, estimated locally from `trials` samples.
#[allow(clippy::too_many_arguments)]
pub fn estimate_eq(
    model: &dyn OutputModel,
    weight: usize,
    dist: &dyn Distinguisher,
    t: u64,
    family: &GraphFamily,
    trials: u64,
    streams: &Streams,
    exec: &Exec,
) -> Result<Proportion> {
    family.validate()?;
    check_len("predicate arity", family.d, model.arity())?;
    if weight > family.n {
        return Err(invalid(format!("weight {weight} exceeds n = {}", family.n)));
    }
    if trials == 0 || t == 0 {
        return Err(invalid("trials and t must be positive"));
    }
    let hits = exec.count_true(streams, &[weight as u64], trials, |_, rng| {
        let s = sample_secret_with_weight(family.n, weight, rng).expect("weight checked");
        let r = rng.random_range(0..t);
        let h = hybrid_sample(model, &s, r, t, family, rng).expect("family checked");
        dist.decide(h.graph(), h.outputs(), rng)
    });
    Ok(Proportion::new(hits, trials))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GapRow {
    pub i: usize,
    /// Whether `s_i = s_0`.
    pub equal: bool,
    pub acceptance: Proportion,
    /// Paired estimate of `eq - acceptance`.
    pub gap: f64,
    /// 95% half-width of the paired gap.
    pub ci_halfwidth: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GapTable {
    pub t: u64,
    pub trials: u64,
    pub eq: Proportion,
    pub rows: Vec<GapRow>,
}

impl GapTable {
    /// Rows with `s_i != s_0`.
    pub fn unequal(&self) -> impl Iterator<Item = &GapRow> {
        self.rows.iter().filter(|r| !r.equal)
    }
}

/// Measures every predictor against `eq` for a fixed secret.
///
/// Each trial draws one planted instance and one hybrid randomness
/// `(r, pi, pairs)`; `eq` uses the resulting graph and predictor `i`
/// additionally applies `T_{pi(0), pi(i)}` to that same graph. The
/// marginal of each arm is exactly its target distribution, and the
/// shared randomness makes the paired differences far less noisy.
#[allow(clippy::too_many_arguments)]
pub fn predictor_gap(
    model: &dyn OutputModel,
    dist: &dyn Distinguisher,
    family: &GraphFamily,
    secret: &Secret,
    t: u64,
    trials: u64,
    streams: &Streams,
    exec: &Exec,
) -> Result<GapTable> {
    family.validate()?;
    check_len("secret length", family.n, secret.len())?;
    check_len("predicate arity", family.d, model.arity())?;
    dist.supports(family)?;
    if family.n < 2 {
        return Err(invalid("predictor gaps need n >= 2"));
    }
    if trials == 0 || t == 0 {
        return Err(invalid("trials and t must be positive"));
    }
    let n = family.n;
    #[derive(Clone, Default)]
    struct Acc {
        eq: u64,
        hits: Vec<u64>,
        diff: Vec<i64>,
        diff_sq: Vec<u64>,
    }
    let parts = exec.map_chunks(trials, |c, range| {
        let mut rng = streams.stream(&[c]);
        let mut acc = Acc {
            eq: 0,
            hits: vec![0; n - 1],
            diff: vec![0; n - 1],
            diff_sq: vec![0; n - 1],
        };
        for _ in range {
            let (g, y) = planted_with_secret(model, family, secret, &mut rng)
                .expect("dimensions checked")
                .into_parts();
            let r = rng.random_range(0..t);
            let params = HybridParams::sample(n, t, r, &mut rng).expect("r < t");
            let hr = params.apply(&g, &mut rng).expect("dimensions checked");
            let base = dist.decide(&hr, &y, &mut rng);
            acc.eq += u64::from(base);
            let a = params.pi.apply(0) as Vertex;
            for i in 1..n {
                let mut gi = hr.clone();
                let b = params.pi.apply(i) as Vertex;
                apply_transforms(&mut gi, &[(a, b)], &mut rng).expect("pair in range");
                let hit = dist.decide(&gi, &y, &mut rng);
                let d = i64::from(base) - i64::from(hit);
                acc.hits[i - 1] += u64::from(hit);
                acc.diff[i - 1] += d;
                acc.diff_sq[i - 1] += (d * d) as u64;
            }
        }
        acc
    });
    let mut total = Acc {
        eq: 0,
        hits: vec![0; n - 1],
        diff: vec![0; n - 1],
        diff_sq: vec![0; n - 1],
    };
    for p in parts {
        total.eq += p.eq;
        for k in 0..n - 1 {
            total.hits[k] += p.hits[k];
            total.diff[k] += p.diff[k];
            total.diff_sq[k] += p.diff_sq[k];
        }
    }
    let tn = trials as f64;
    let rows = (1..n)
        .map(|i| {
            let k = i - 1;
            let mean = total.diff[k] as f64 / tn;
            let var = if trials > 1 {
                (total.diff_sq[k] as f64 - tn * mean * mean) / (tn - 1.0)
            } else {
                0.0
            };
            GapRow {
                i,
                equal: secret.get(i) == secret.get(0),
                acceptance: Proportion::new(total.hits[k], trials),
                gap: mean,
                ci_halfwidth: Z95 * (var.max(0.0) / tn).sqrt(),
            }
        })
        .collect();
    Ok(GapTable {
        t,
        trials,
        eq: Proportion::new(total.eq, trials),
        rows,
    })
}

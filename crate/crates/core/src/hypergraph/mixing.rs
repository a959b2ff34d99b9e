use serde::Serialize;

use crate::error::{invalid, Result};
use crate::scalar::{sum, Scalar};

/// Multiplier `8` in `t = 8 n ln(m d n / eps)`.
pub const DEFAULT_T_MULTIPLIER: f64 = 8.0;

/// Distribution of one tracked slot under repeated pair averaging, together
/// with the history of its squared L2 distance from uniform.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DeviationTrace<T> {
    dist: Vec<T>,
    history: Vec<T>,
}

impl<T: Scalar> DeviationTrace<T> {
    pub fn new(dist: Vec<T>) -> Result<Self> {
        if dist.is_empty() {
            return Err(invalid("trace needs at least one vertex"));
        }
        if dist.iter().any(|x| x.is_negative()) {
            return Err(invalid("trace has negative mass"));
        }
        let total = sum(&dist).as_f64();
        if (total - 1.0).abs() > 1e-9 {
            return Err(crate::Error::Unnormalized(total));
        }
        let v = deviation(&dist);
        Ok(Self {
            dist,
            history: vec![v],
        })
    }

    /// Point mass on vertex `k` out of `n`.
    pub fn point_mass(n: usize, k: usize) -> Result<Self> {
        if k >= n {
            return Err(invalid(format!("vertex {k} outside 0..{n}")));
        }
        let mut dist = vec![T::zero(); n];
        dist[k] = T::one();
        Self::new(dist)
    }

    pub fn n(&self) -> usize {
        self.dist.len()
    }

    pub fn dist(&self) -> &[T] {
        &self.dist
    }

    pub fn history(&self) -> &[T] {
        &self.history
    }

    /// Current deviation `V`.
    pub fn v(&self) -> &T {
        self.history.last().expect("history starts non-empty")
    }

    /// Averages entries `a` and `b` and records the new `V`.
    pub fn step(&mut self, a: usize, b: usize) -> Result<()> {
        let n = self.n();
        if a >= n || b >= n {
            return Err(invalid(format!("pair ({a}, {b}) outside 0..{n}")));
        }
        let half = T::ratio(1, 2);
        let avg = (self.dist[a].clone() + self.dist[b].clone()) * half;
        self.dist[a] = avg.clone();
        self.dist[b] = avg;
        let v = deviation(&self.dist);
        self.history.push(v);
        Ok(())
    }
}

fn deviation<T: Scalar>(dist: &[T]) -> T {
    let u = T::ratio(1, dist.len() as i64);
    dist.iter().fold(T::zero(), |acc, x| {
        let e = x.clone() - u.clone();
        acc + e.clone() * e
    })
}

/// Returns `trace` after one averaging step on `(a, b)`.
pub fn deviation_step<T: Scalar>(trace: &DeviationTrace<T>, a: usize, b: usize) -> Result<DeviationTrace<T>> {
    let mut out = trace.clone();
    out.step(a, b)?;
    Ok(out)
}

/// `ceil(multiplier * n * ln(m * d * n / eps))`, at least 1. Accepts
/// `eps` in `(0, 1]` so that distinguishers with advantage 1 are usable.
pub fn hybrid_budget(multiplier: f64, n: usize, m: usize, d: usize, eps: f64) -> Result<u64> {
    if !(multiplier.is_finite() && multiplier > 0.0) {
        return Err(invalid(format!("t multiplier must be positive, got {multiplier}")));
    }
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(invalid(format!("eps must lie in (0, 1], got {eps}")));
    }
    if n == 0 || m == 0 || d == 0 {
        return Err(invalid("n, m and d must be positive"));
    }
    let arg = (m as f64) * (d as f64) * (n as f64) / eps;
    let t = (multiplier * n as f64 * arg.ln()).ceil();
    Ok((t as u64).max(1))
}

/// Number of random transformations after which any start graph is within
/// `eps / 8` of uniform: `ceil(8 n ln(m d n / eps))`.
pub fn mixing_time(n: usize, m: usize, d: usize, eps: f64) -> Result<u64> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(invalid(format!("eps must lie in (0, 1), got {eps}")));
    }
    hybrid_budget(DEFAULT_T_MULTIPLIER, n, m, d, eps)
}

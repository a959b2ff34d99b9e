use serde::Serialize;

use crate::error::{invalid, Result};

/// One inequality `lhs < rhs`; `margin = lhs / rhs`, so it holds iff the
/// margin is below 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SparsityCondition {
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub holds: bool,
}

impl SparsityCondition {
    fn new(lhs: f64, rhs: f64) -> Self {
        Self {
            lhs,
            rhs,
            margin: lhs / rhs,
            holds: lhs < rhs,
        }
    }
}

/// Finite-`n` stand-ins for the asymptotic conditions allowing arity
/// `d = log^r n`. They are one concrete instantiation, not the asymptotic
/// statements themselves.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SparsityReport {
    /// `(m / n^c) (log^r n log(1/eps))^(2c) < eps^2`.
    pub distinguishing: SparsityCondition,
    /// `log^r n log(1/eps) < sqrt(n)`.
    pub window: SparsityCondition,
    pub holds: bool,
    pub log_base: f64,
}

/// Evaluates both conditions with base-2 logarithms.
pub fn check_large_sparsity(n: f64, m: f64, r: f64, c: f64, eps: f64) -> Result<SparsityReport> {
    if !(n > 1.0 && m > 0.0 && r >= 0.0 && c > 0.0) {
        return Err(invalid("sparsity check needs n > 1, m > 0, r >= 0, c > 0"));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(invalid(format!("eps must lie in (0, 1), got {eps}")));
    }
    let spread = n.log2().powf(r) * (1.0 / eps).log2();
    let distinguishing = SparsityCondition::new(m / n.powf(c) * spread.powf(2.0 * c), eps * eps);
    let window = SparsityCondition::new(spread, n.sqrt());
    Ok(SparsityReport {
        distinguishing,
        window,
        holds: distinguishing.holds && window.holds,
        log_base: 2.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_arity_regime_holds() {
        let rep = check_large_sparsity(1e4, 1e4, 0.0, 3.0, 0.1).unwrap();
        assert!(rep.distinguishing.holds && rep.window.holds && rep.holds);
    }

    #[test]
    fn small_eps_eventually_fails() {
        let mut eps = 0.5;
        while check_large_sparsity(1e4, 1e4, 0.0, 3.0, eps).unwrap().holds {
            eps /= 2.0;
            assert!(eps > 1e-300);
        }
    }

    #[test]
    fn boundary_case_has_unit_margin() {
        let rep = check_large_sparsity(16.0, 16.0, 1.0, 1.0, 0.5).unwrap();
        assert!((rep.window.margin - 1.0).abs() < 1e-12);
        assert!(!rep.window.holds);
    }
}

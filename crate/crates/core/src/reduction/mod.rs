//! Search from decision: hybrids between planted and null instances, the
//! per-bit predictor, amplification over many oracle instances, and the
//! search drivers built on top.
//!
//! Bit 0 of the secret is the reference bit: the predictor for index `i`
//! tells whether `s_i = s_0`, and the two guesses for `s_0` give two
//! candidates per hamming weight.

mod hybrid;
mod search;
mod sparsity;

pub use hybrid::{
    estimate_eq, hybrid_sample, predictor, predictor_gap, GapRow, GapTable, HybridParams,
};
pub use search::{
    declare_equal, predictor_sums, recover_relative_bits, search, search_noisy, Attempt, EqRow, EqTable,
    NoisyOutcome, PredictorSums, RelativeBits, SearchOutcome, SearchReport,
};
pub use sparsity::{check_large_sparsity, SparsityCondition, SparsityReport};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::hypergraph::{hybrid_budget, GraphFamily, DEFAULT_T_MULTIPLIER};
use crate::localfn::balanced_weights;
use crate::stats::hoeffding_repetitions;

/// Every constant of the reduction, explicit and overridable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReductionConfig {
    /// Claimed advantage of the distinguisher, in `(0, 1]`.
    pub eps: f64,
    /// `t = ceil(t_multiplier * n * ln(m d n / eps))`.
    pub t_multiplier: f64,
    /// Extra factor on `t` for distinct-vertex families.
    pub distinct_multiplier: u64,
    /// Predictor repetitions per bit; Hoeffding with gap `eps / 8t` and
    /// failure `eps / 4n` when unset.
    pub l: Option<u64>,
    /// Samples per weight for `eq`; Hoeffding with gap `eps / 16t` and
    /// failure `eps / 8` when unset.
    pub eq_trials: Option<u64>,
    /// Share the same oracle instances across all bit indices.
    pub reuse_instances: bool,
    /// Also run the pipeline for `1 - D`.
    pub try_negated_distinguisher: bool,
    /// Local samples used by the noisy search to pick the sign of `D`.
    pub sign_probe_trials: u64,
    pub seed: u64,
}

impl Default for ReductionConfig {
    fn default() -> Self {
        Self {
            eps: 0.5,
            t_multiplier: DEFAULT_T_MULTIPLIER,
            distinct_multiplier: 10,
            l: None,
            eq_trials: None,
            reuse_instances: true,
            try_negated_distinguisher: true,
            sign_probe_trials: 4096,
            seed: 0,
        }
    }
}

/// Counts derived from a config for one graph family.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Derived {
    pub t: u64,
    pub l: u64,
    pub eq_trials: u64,
    /// Fairly balanced weights, center first.
    pub weights: Vec<usize>,
}

impl ReductionConfig {
    pub fn with_eps(eps: f64) -> Self {
        Self {
            eps,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps <= 1.0) {
            return Err(invalid(format!("eps must lie in (0, 1], got {}", self.eps)));
        }
        if !(self.t_multiplier.is_finite() && self.t_multiplier > 0.0) {
            return Err(invalid("t_multiplier must be positive"));
        }
        if self.distinct_multiplier == 0 || self.l == Some(0) || self.eq_trials == Some(0) || self.sign_probe_trials == 0 {
            return Err(invalid("all counts must be at least 1"));
        }
        Ok(())
    }

    /// Transformation budget `t` for `family`.
    pub fn budget(&self, family: &GraphFamily) -> Result<u64> {
        self.validate()?;
        family.validate()?;
        let t = hybrid_budget(self.t_multiplier, family.n, family.m, family.d, self.eps)?;
        Ok(if family.distinct {
            t.saturating_mul(self.distinct_multiplier)
        } else {
            t
        })
    }

    pub fn derive(&self, family: &GraphFamily) -> Result<Derived> {
        let t = self.budget(family)?;
        let eps = self.eps;
        let tf = t as f64;
        let l = match self.l {
            Some(l) => l,
            None => hoeffding_repetitions(eps / (8.0 * tf), (eps / (4.0 * family.n as f64)).min(0.5))?,
        };
        let eq_trials = match self.eq_trials {
            Some(e) => e,
            None => hoeffding_repetitions(eps / (16.0 * tf), eps / 8.0)?,
        };
        Ok(Derived {
            t,
            l,
            eq_trials,
            weights: balanced_weights(family.n, eps)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_the_closed_forms() {
        let fam = GraphFamily::uniform(16, 8, 3);
        let cfg = ReductionConfig::with_eps(0.25);
        let d = cfg.derive(&fam).unwrap();
        assert_eq!(d.t, 940);
        let gap = 0.25 / (8.0 * 940.0);
        assert_eq!(d.l, hoeffding_repetitions(gap, 0.25 / 64.0).unwrap());
        assert_eq!(d.eq_trials, hoeffding_repetitions(gap / 2.0, 0.25 / 8.0).unwrap());
        assert_eq!(d.weights[0], 8);
        let distinct = cfg.derive(&GraphFamily::distinct(16, 8, 3)).unwrap();
        assert_eq!(distinct.t, 9400);
    }

    #[test]
    fn overrides_and_validation() {
        let fam = GraphFamily::uniform(6, 4, 1);
        let cfg = ReductionConfig {
            l: Some(7),
            eq_trials: Some(9),
            ..ReductionConfig::with_eps(1.0)
        };
        let d = cfg.derive(&fam).unwrap();
        assert_eq!((d.l, d.eq_trials), (7, 9));
        assert_eq!(d.weights, vec![3]);
        assert!(ReductionConfig::with_eps(0.0).validate().is_err());
        assert!(ReductionConfig { l: Some(0), ..Default::default() }.validate().is_err());
        let parsed: ReductionConfig = serde_json::from_str(r#"{"eps":0.5,"l":12}"#).unwrap();
        assert_eq!(parsed.l, Some(12));
        assert!(parsed.reuse_instances);
        assert!(serde_json::from_str::<ReductionConfig>(r#"{"epsilon":0.5}"#).is_err());
    }
}

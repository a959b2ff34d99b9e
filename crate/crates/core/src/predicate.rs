//! Truth-table predicates and their Boolean Fourier analysis.
//!
//! Entry `k` of a table is the predicate applied to the binary expansion of
//! `k` with the first argument in the least-significant bit. Fourier
//! coefficients use the convention `0 -> +1`, `1 -> -1` and are indexed by
//! the subset mask `S` (bit `i` set means argument `i` is in `S`).

use std::fmt;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, invalid, Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "PredicateWire", into = "PredicateWire")]
pub struct Predicate {
    arity: usize,
    table: Vec<u64>,
}

impl fmt::Debug for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Predicate(d={}, table={})", self.arity, self.to_hex())
    }
}

/// Minimal correlated-parity size, or the marker for constant predicates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrelationOrder {
    Constant,
    Order(usize),
}

impl CorrelationOrder {
    pub fn order(self) -> Option<usize> {
        match self {
            CorrelationOrder::Constant => None,
            CorrelationOrder::Order(c) => Some(c),
        }
    }
}

impl Predicate {
    pub const MAX_ARITY: usize = 24;

    fn blank(arity: usize) -> Result<Self> {
        if arity == 0 || arity > Self::MAX_ARITY {
            return Err(invalid(format!(
                "predicate arity must lie in 1..={}, got {arity}",
                Self::MAX_ARITY
            )));
        }
        let words = (1usize << arity).div_ceil(64);
        Ok(Self {
            arity,
            table: vec![0; words],
        })
    }

    /// Builds a predicate from its value at every table index.
    pub fn from_index_fn(arity: usize, mut f: impl FnMut(usize) -> bool) -> Result<Self> {
        let mut p = Self::blank(arity)?;
        for k in 0..p.table_len() {
            if f(k) {
                p.table[k / 64] |= 1 << (k % 64);
            }
        }
        Ok(p)
    }

    /// Builds a predicate from a function of its `arity` argument bits.
    pub fn from_fn(arity: usize, f: impl Fn(&[bool]) -> bool) -> Result<Self> {
        let mut args = vec![false; arity];
        Self::from_index_fn(arity, |k| {
            for (i, a) in args.iter_mut().enumerate() {
                *a = (k >> i) & 1 == 1;
            }
            f(&args)
        })
    }

    pub fn from_table(arity: usize, table: &[bool]) -> Result<Self> {
        Self::blank(arity)?;
        check_len("truth table", 1 << arity, table.len())?;
        Self::from_index_fn(arity, |k| table[k])
    }

    pub fn constant(arity: usize, value: bool) -> Result<Self> {
        Self::from_index_fn(arity, |_| value)
    }

    pub fn identity() -> Self {
        Self::from_index_fn(1, |k| k == 1).expect("arity 1 is valid")
    }

    pub fn xor(arity: usize) -> Result<Self> {
        Self::from_index_fn(arity, |k| k.count_ones() % 2 == 1)
    }

    pub fn and(arity: usize) -> Result<Self> {
        Self::from_index_fn(arity, |k| k == (1 << arity) - 1)
    }

    pub fn majority(arity: usize) -> Result<Self> {
        Self::from_index_fn(arity, |k| 2 * k.count_ones() as usize > arity)
    }

    /// `x_1 + ... + x_k + x_{k+1} * ... * x_{k+l}` over GF(2).
    pub fn xor_and(k: usize, l: usize) -> Result<Self> {
        let and_mask = ((1usize << l) - 1) << k;
        Self::from_index_fn(k + l, |x| {
            let parity = (x & ((1 << k) - 1)).count_ones() % 2 == 1;
            parity ^ (x & and_mask == and_mask)
        })
    }

    pub const BUILTIN_NAMES: [&'static str; 6] =
        ["xor2", "xor3", "and2", "maj3", "xor-and-3-2", "identity"];

    pub fn builtin(name: &str) -> Result<Self> {
        match name {
            "xor2" => Self::xor(2),
            "xor3" => Self::xor(3),
            "and2" => Self::and(2),
            "maj3" => Self::majority(3),
            "xor-and-3-2" => Self::xor_and(3, 2),
            "identity" => Ok(Self::identity()),
            other => Err(invalid(format!(
                "unknown builtin predicate {other:?}; expected one of {}",
                Self::BUILTIN_NAMES.join(", ")
            ))),
        }
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn table_len(&self) -> usize {
        1 << self.arity
    }

    /// Table entry at `index`; the caller guarantees `index < 2^arity`.
    #[inline]
    pub fn entry(&self, index: usize) -> bool {
        (self.table[index / 64] >> (index % 64)) & 1 == 1
    }

    pub fn eval(&self, input: &[bool]) -> Result<bool> {
        check_len("predicate input", self.arity, input.len())?;
        let index = input
            .iter()
            .enumerate()
            .fold(0usize, |acc, (i, &b)| acc | (usize::from(b) << i));
        Ok(self.entry(index))
    }

    pub fn ones(&self) -> u64 {
        self.table.iter().map(|w| u64::from(w.count_ones())).sum()
    }

    pub fn is_constant(&self) -> bool {
        let ones = self.ones();
        ones == 0 || ones == self.table_len() as u64
    }

    /// Probability that the predicate outputs 1 on a uniform input; exact in
    /// rational scalars since it is a dyadic fraction.
    pub fn bias<T: Scalar>(&self) -> T {
        T::ratio(self.ones() as i64, self.table_len() as i64)
    }

    /// Fourier spectrum via the fast Walsh-Hadamard transform.
    pub fn fourier<T: Scalar>(&self) -> Vec<T> {
        let len = self.table_len();
        let mut data: Vec<T> = (0..len)
            .map(|k| if self.entry(k) { -T::one() } else { T::one() })
            .collect();
        let mut half = 1;
        while half < len {
            for block in (0..len).step_by(2 * half) {
                for k in block..block + half {
                    let a = data[k].clone();
                    let b = data[k + half].clone();
                    data[k] = a.clone() + b.clone();
                    data[k + half] = a - b;
                }
            }
            half *= 2;
        }
        let scale = T::ratio(1, len as i64);
        data.into_iter().map(|v| v * scale.clone()).collect()
    }

    /// Number of inputs on which the predicate agrees with the parity of
    /// the arguments selected by `mask`.
    pub fn parity_agreement(&self, mask: usize) -> u64 {
        (0..self.table_len())
            .filter(|&x| self.entry(x) == ((x & mask).count_ones() % 2 == 1))
            .count() as u64
    }

    pub fn is_correlated_with(&self, mask: usize) -> bool {
        2 * self.parity_agreement(mask) != self.table_len() as u64
    }

    /// Minimal correlated-parity size by an exhaustive scan over subsets.
    /// Costs `O(4^d)` in the worst case.
    pub fn correlation_order(&self) -> CorrelationOrder {
        if self.is_constant() {
            return CorrelationOrder::Constant;
        }
        for size in 1..=self.arity {
            if combinations(self.arity, size).any(|mask| self.is_correlated_with(mask)) {
                return CorrelationOrder::Order(size);
            }
        }
        unreachable!("a non-constant predicate correlates with some parity")
    }

    /// All correlated subsets of minimal size, as sorted argument lists in
    /// lexicographic order. Empty for constant predicates.
    pub fn minimal_correlated_subsets(&self) -> Vec<Vec<usize>> {
        match self.correlation_order() {
            CorrelationOrder::Constant => Vec::new(),
            CorrelationOrder::Order(c) => combinations(self.arity, c)
                .filter(|&mask| self.is_correlated_with(mask))
                .map(mask_to_positions)
                .collect(),
        }
    }

    /// The lexicographically smallest minimal correlated subset.
    pub fn correlated_subset(&self) -> Option<Vec<usize>> {
        self.minimal_correlated_subsets().into_iter().next()
    }

    /// Smallest nonempty Fourier level with a coefficient above `tol`.
    pub fn min_fourier_level<T: Scalar>(&self, tol: &T) -> Option<usize> {
        self.fourier::<T>()
            .iter()
            .enumerate()
            .skip(1)
            .filter(|(_, v)| v.abs() > *tol)
            .map(|(mask, _)| mask.count_ones() as usize)
            .min()
    }

    /// True iff some argument flips the output at every input.
    pub fn is_sensitive(&self) -> bool {
        (0..self.arity).any(|i| {
            (0..self.table_len()).all(|x| self.entry(x) != self.entry(x ^ (1 << i)))
        })
    }

    pub fn bounded_bias_check(&self, c1: f64, c2: f64) -> Result<bool> {
        if !(0.0 < c1 && c1 <= c2 && c2 < 1.0) {
            return Err(invalid(format!(
                "bias bounds must satisfy 0 < c1 <= c2 < 1, got ({c1}, {c2})"
            )));
        }
        let eta: f64 = self.bias();
        Ok(c1 <= eta && eta <= c2)
    }

    pub fn profile<T: Scalar>(&self, bounds: Option<(f64, f64)>) -> Result<PredicateProfile<T>> {
        let bounded_bias = bounds
            .map(|(c1, c2)| self.bounded_bias_check(c1, c2))
            .transpose()?;
        Ok(PredicateProfile {
            arity: self.arity,
            bias: self.bias(),
            fourier: self.fourier(),
            correlation_order: self.correlation_order().order(),
            minimal_subsets: self.minimal_correlated_subsets(),
            sensitive: self.is_sensitive(),
            bounded_bias,
        })
    }

    /// Lowercase hex of `ceil(2^d / 8)` bytes; bit `k` of the table is bit
    /// `k mod 8` of byte `k / 8`.
    pub fn to_hex(&self) -> String {
        let nbytes = self.table_len().div_ceil(8);
        let bytes: Vec<u8> = (0..nbytes)
            .map(|j| (self.table[j / 8] >> (8 * (j % 8))) as u8)
            .collect();
        hex::encode(bytes)
    }

    pub fn from_hex(arity: usize, table_hex: &str) -> Result<Self> {
        let mut p = Self::blank(arity)?;
        let bytes = hex::decode(table_hex)
            .map_err(|e| Error::Malformed(format!("table_hex: {e}")))?;
        check_len("table_hex bytes", p.table_len().div_ceil(8), bytes.len())?;
        for (j, &byte) in bytes.iter().enumerate() {
            p.table[j / 8] |= u64::from(byte) << (8 * (j % 8));
        }
        if p.table_len() < 8 && bytes[0] >> p.table_len() != 0 {
            return Err(Error::Malformed(format!(
                "table_hex sets bits beyond the {} table entries",
                p.table_len()
            )));
        }
        Ok(p)
    }
}

/// Lexicographic size-`k` subsets of `0..d` as bit masks.
pub fn combinations(d: usize, k: usize) -> impl Iterator<Item = usize> {
    let mut idx: Vec<usize> = (0..k).collect();
    let mut done = k > d;
    std::iter::from_fn(move || {
        if done {
            return None;
        }
        let mask = idx.iter().fold(0usize, |m, &i| m | (1 << i));
        // advance to the next combination
        let mut pos = k;
        loop {
            if pos == 0 {
                done = true;
                break;
            }
            pos -= 1;
            if idx[pos] < d - k + pos {
                idx[pos] += 1;
                for q in pos + 1..k {
                    idx[q] = idx[q - 1] + 1;
                }
                break;
            }
        }
        Some(mask)
    })
}

fn mask_to_positions(mask: usize) -> Vec<usize> {
    (0..usize::BITS as usize).filter(|i| mask >> i & 1 == 1).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PredicateProfile<T> {
    pub arity: usize,
    pub bias: T,
    pub fourier: Vec<T>,
    pub correlation_order: Option<usize>,
    pub minimal_subsets: Vec<Vec<usize>>,
    pub sensitive: bool,
    pub bounded_bias: Option<bool>,
}

#[derive(Serialize, Deserialize)]
struct PredicateWire {
    d: usize,
    table_hex: String,
}

impl TryFrom<PredicateWire> for Predicate {
    type Error = Error;

    fn try_from(w: PredicateWire) -> Result<Self> {
        Predicate::from_hex(w.d, &w.table_hex)
    }
}

impl From<Predicate> for PredicateWire {
    fn from(p: Predicate) -> Self {
        PredicateWire {
            d: p.arity,
            table_hex: p.to_hex(),
        }
    }
}

/// A deterministic base predicate whose output is flipped by independent
/// Bernoulli(`beta`) noise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NoisyWire", into = "NoisyWire")]
pub struct NoisyPredicate {
    base: Predicate,
    beta: f64,
}

impl NoisyPredicate {
    pub fn new(base: Predicate, beta: f64) -> Result<Self> {
        if !(0.0..0.5).contains(&beta) {
            return Err(invalid(format!("noise rate must lie in [0, 1/2), got {beta}")));
        }
        Ok(Self { base, beta })
    }

    pub fn noiseless(base: Predicate) -> Self {
        Self { base, beta: 0.0 }
    }

    pub fn base(&self) -> &Predicate {
        &self.base
    }

    pub fn noise_rate(&self) -> f64 {
        self.beta
    }

    pub fn eval_noisy<R: RngCore + ?Sized>(&self, input: &[bool], rng: &mut R) -> Result<bool> {
        let clean = self.base.eval(input)?;
        Ok(clean ^ self.flip(rng))
    }

    #[inline]
    pub(crate) fn flip<R: RngCore + ?Sized>(&self, rng: &mut R) -> bool {
        self.beta > 0.0 && rng.random_bool(self.beta)
    }

    /// Bias of the noisy output: `eta (1 - beta) + (1 - eta) beta`.
    pub fn bias(&self) -> f64 {
        let eta: f64 = self.base.bias();
        eta * (1.0 - self.beta) + (1.0 - eta) * self.beta
    }
}

#[derive(Serialize, Deserialize)]
struct NoisyWire {
    d: usize,
    table_hex: String,
    beta: f64,
}

impl TryFrom<NoisyWire> for NoisyPredicate {
    type Error = Error;

    fn try_from(w: NoisyWire) -> Result<Self> {
        NoisyPredicate::new(Predicate::from_hex(w.d, &w.table_hex)?, w.beta)
    }
}

impl From<NoisyPredicate> for NoisyWire {
    fn from(p: NoisyPredicate) -> Self {
        NoisyWire {
            d: p.base.arity,
            table_hex: p.base.to_hex(),
            beta: p.beta,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Streams;
    use crate::Exact;

    fn bits(s: &str) -> Vec<bool> {
        s.chars().map(|c| c == '1').collect()
    }

    /// Direct expectation of `P'(x) * prod_{i in S} x_i` over all inputs.
    fn fourier_by_expectation(p: &Predicate, mask: usize) -> f64 {
        let total: i64 = (0..p.table_len())
            .map(|x| {
                let pv = if p.entry(x) { -1 } else { 1 };
                let chi = if (x & mask).count_ones() % 2 == 1 { -1 } else { 1 };
                pv * chi
            })
            .sum();
        total as f64 / p.table_len() as f64
    }

    #[test]
    fn eval_examples() {
        assert!(Predicate::and(2).unwrap().eval(&bits("11")).unwrap());
        assert!(!Predicate::xor(3).unwrap().eval(&bits("101")).unwrap());
        let xa = Predicate::builtin("xor-and-3-2").unwrap();
        assert!(xa.eval(&bits("11011")).unwrap());
        assert!(matches!(
            xa.eval(&bits("11")),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn bias_examples() {
        for d in 1..=6 {
            assert_eq!(Predicate::xor(d).unwrap().bias::<Exact>(), Exact::ratio(1, 2));
        }
        assert_eq!(Predicate::and(2).unwrap().bias::<Exact>(), Exact::ratio(1, 4));
        assert_eq!(Predicate::constant(3, false).unwrap().bias::<f64>(), 0.0);
    }

    #[test]
    fn fourier_examples() {
        let f = Predicate::xor(2).unwrap().fourier::<Exact>();
        assert_eq!(f, vec![Exact::from_count(0), Exact::from_count(0), Exact::from_count(0), Exact::from_count(1)]);

        let maj = Predicate::majority(3).unwrap();
        let f = maj.fourier::<f64>();
        for mask in 0..8 {
            assert!((f[mask] - fourier_by_expectation(&maj, mask)).abs() < 1e-15);
        }
        // frozen from the expectation oracle: 4/8 on each singleton
        assert_eq!(f[1], 0.5);
        assert_eq!(f[2], f[1]);
        assert_eq!(f[4], f[1]);
        assert_eq!(f[7], -0.5);
    }

    #[test]
    fn correlation_order_examples() {
        assert_eq!(Predicate::xor(3).unwrap().correlation_order(), CorrelationOrder::Order(3));
        assert_eq!(Predicate::and(2).unwrap().correlation_order(), CorrelationOrder::Order(1));
        assert_eq!(Predicate::majority(3).unwrap().correlation_order(), CorrelationOrder::Order(1));
        assert_eq!(
            Predicate::constant(2, true).unwrap().correlation_order(),
            CorrelationOrder::Constant
        );
        // frozen by brute force: AND2 agrees with x1 on 3 of 4 inputs, MAJ3 with x1 on 6 of 8
        assert_eq!(Predicate::and(2).unwrap().parity_agreement(0b01), 3);
        assert_eq!(Predicate::majority(3).unwrap().parity_agreement(0b001), 6);
    }

    #[test]
    fn minimal_subsets_are_lexicographic() {
        let maj = Predicate::majority(3).unwrap();
        assert_eq!(maj.minimal_correlated_subsets(), vec![vec![0], vec![1], vec![2]]);
        let xa = Predicate::xor_and(3, 2).unwrap();
        assert_eq!(xa.correlated_subset(), Some(vec![0, 1, 2]));
        assert!(Predicate::constant(2, false).unwrap().correlated_subset().is_none());
    }

    #[test]
    fn combinations_enumerate_in_order() {
        let masks: Vec<usize> = combinations(4, 2).collect();
        assert_eq!(masks, vec![0b0011, 0b0101, 0b1001, 0b0110, 0b1010, 0b1100]);
        assert_eq!(combinations(3, 0).collect::<Vec<_>>(), vec![0]);
        assert_eq!(combinations(2, 3).count(), 0);
    }

    #[test]
    fn sensitivity_examples() {
        assert!(Predicate::xor(3).unwrap().is_sensitive());
        assert!(!Predicate::and(2).unwrap().is_sensitive());
        assert!(Predicate::xor_and(3, 2).unwrap().is_sensitive());
        assert!(!Predicate::majority(3).unwrap().is_sensitive());
    }

    #[test]
    fn bounded_bias_examples() {
        assert!(Predicate::xor(3).unwrap().bounded_bias_check(0.1, 0.9).unwrap());
        assert!(!Predicate::constant(2, true).unwrap().bounded_bias_check(0.1, 0.9).unwrap());
        assert!(Predicate::and(2).unwrap().bounded_bias_check(0.2, 0.8).unwrap());
        assert!(Predicate::and(2).unwrap().bounded_bias_check(0.8, 0.2).is_err());
        assert!(Predicate::and(2).unwrap().bounded_bias_check(0.0, 0.5).is_err());
    }

    #[test]
    fn arity_bounds_and_builtins() {
        assert!(Predicate::xor(0).is_err());
        assert!(Predicate::xor(25).is_err());
        assert!(Predicate::builtin("nope").is_err());
        for name in Predicate::BUILTIN_NAMES {
            assert!(Predicate::builtin(name).is_ok(), "{name}");
        }
    }

    #[test]
    fn hex_wire_format() {
        let and2 = Predicate::and(2).unwrap();
        assert_eq!(and2.to_hex(), "08");
        let json = serde_json::to_string(&and2).unwrap();
        assert_eq!(json, r#"{"d":2,"table_hex":"08"}"#);
        let xor3 = Predicate::xor(3).unwrap();
        assert_eq!(xor3.to_hex(), "96");
        let back: Predicate = serde_json::from_str(&serde_json::to_string(&xor3).unwrap()).unwrap();
        assert_eq!(back, xor3);
        assert!(serde_json::from_str::<Predicate>(r#"{"d":2,"table_hex":"18"}"#).is_err());
        assert!(serde_json::from_str::<Predicate>(r#"{"d":4,"table_hex":"ff"}"#).is_err());
        assert!(serde_json::from_str::<Predicate>(r#"{"d":2,"table_hex":"zz"}"#).is_err());
        let wide = Predicate::xor(7).unwrap();
        assert_eq!(Predicate::from_hex(7, &wide.to_hex()).unwrap(), wide);
    }

    #[test]
    fn noisy_wire_format_and_bounds() {
        let np = NoisyPredicate::new(Predicate::identity(), 0.25).unwrap();
        let json = serde_json::to_string(&np).unwrap();
        assert_eq!(json, r#"{"d":1,"table_hex":"02","beta":0.25}"#);
        assert_eq!(serde_json::from_str::<NoisyPredicate>(&json).unwrap(), np);
        assert!(NoisyPredicate::new(Predicate::identity(), 0.5).is_err());
        assert!(NoisyPredicate::new(Predicate::identity(), -0.1).is_err());
    }

    #[test]
    fn noisy_eval_matches_rates() {
        let base = Predicate::and(2).unwrap();
        let clean = NoisyPredicate::noiseless(base.clone());
        let mut rng = Streams::new(1).stream(&[0]);
        for k in 0..4usize {
            let input = [k & 1 == 1, k & 2 == 2];
            for _ in 0..10 {
                assert_eq!(clean.eval_noisy(&input, &mut rng).unwrap(), base.eval(&input).unwrap());
            }
        }

        let noisy = NoisyPredicate::new(base.clone(), 0.25).unwrap();
        let draws = 100_000;
        let flips = (0..draws)
            .filter(|_| noisy.eval_noisy(&[false, false], &mut rng).unwrap())
            .count();
        assert!((flips as f64 / draws as f64 - 0.25).abs() < 0.01);

        // convolution identity against Monte Carlo on uniform inputs
        let expected = 0.25 * 0.75 + 0.75 * 0.25;
        assert!((noisy.bias() - expected).abs() < 1e-15);
        let ones = (0..draws)
            .filter(|_| {
                let input = [rng.random::<bool>(), rng.random::<bool>()];
                noisy.eval_noisy(&input, &mut rng).unwrap()
            })
            .count();
        assert!((ones as f64 / draws as f64 - expected).abs() < 0.01);
    }

    #[test]
    fn eval_is_pure() {
        let p = Predicate::majority(5).unwrap();
        let x = bits("10110");
        assert_eq!(p.eval(&x).unwrap(), p.eval(&x).unwrap());
    }
}

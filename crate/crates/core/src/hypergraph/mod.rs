//! Hypergraphs with ordered hyperedges, their sampling and relabeling, the
//! averaging transformation family and the L2 mixing diagnostic.

mod mixing;
mod transform;

pub use mixing::{deviation_step, hybrid_budget, mixing_time, DeviationTrace, DEFAULT_T_MULTIPLIER};
pub use transform::{
    apply_transforms, inverse_transform_det, transform, transform_det, transform_distinct, transform_distinct_in_place,
    transform_in_place, SwapVector,
};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub type Vertex = u32;

/// `m` ordered hyperedges of `d` vertices each over the vertex set `0..n`.
///
/// Edges are stored flat: slot `k` of edge `i` lives at `i * d + k`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "GraphWire", into = "GraphWire")]
pub struct Hypergraph {
    n: usize,
    d: usize,
    distinct: bool,
    slots: Vec<Vertex>,
}

impl Hypergraph {
    pub fn new(n: usize, d: usize, distinct: bool, edges: &[Vec<usize>]) -> Result<Self> {
        let mut slots = Vec::with_capacity(edges.len() * d);
        for (i, e) in edges.iter().enumerate() {
            if e.len() != d {
                return Err(Error::DimensionMismatch {
                    what: "hyperedge length",
                    expected: d,
                    actual: e.len(),
                });
            }
            for &v in e {
                if v >= n {
                    return Err(invalid(format!("edge {i} has vertex {v} outside 0..{n}")));
                }
                slots.push(v as Vertex);
            }
        }
        Self::from_slots(n, d, distinct, slots)
    }

    pub fn from_slots(n: usize, d: usize, distinct: bool, slots: Vec<Vertex>) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(invalid("hypergraph needs n >= 1 and d >= 1"));
        }
        if n > Vertex::MAX as usize {
            return Err(invalid(format!("n = {n} exceeds the vertex index range")));
        }
        if !slots.len().is_multiple_of(d) {
            return Err(invalid(format!("{} slots do not split into edges of {d}", slots.len())));
        }
        if let Some(v) = slots.iter().find(|&&v| v as usize >= n) {
            return Err(invalid(format!("vertex {v} outside 0..{n}")));
        }
        let g = Self { n, d, distinct, slots };
        if distinct {
            if let Some(i) = (0..g.m()).find(|&i| !edge_is_distinct(g.edge(i))) {
                return Err(invalid(format!("edge {i} repeats a vertex in distinct mode")));
            }
        }
        Ok(g)
    }

    /// Every slot independent and uniform over `0..n`.
    pub fn sample_uniform<R: Rng + ?Sized>(n: usize, m: usize, d: usize, rng: &mut R) -> Result<Self> {
        if n == 0 || m == 0 || d == 0 {
            return Err(invalid(format!("sample_uniform needs n, m, d >= 1, got ({n}, {m}, {d})")));
        }
        let slots = (0..m * d).map(|_| rng.random_range(0..n) as Vertex).collect();
        Self::from_slots(n, d, false, slots)
    }

    /// Each edge a uniform ordered `d`-tuple of distinct vertices.
    pub fn sample_distinct<R: Rng + ?Sized>(n: usize, m: usize, d: usize, rng: &mut R) -> Result<Self> {
        if n == 0 || m == 0 || d == 0 {
            return Err(invalid(format!("sample_distinct needs n, m, d >= 1, got ({n}, {m}, {d})")));
        }
        if d > n {
            return Err(invalid(format!("distinct edges need d <= n, got d = {d}, n = {n}")));
        }
        let mut slots = Vec::with_capacity(m * d);
        for _ in 0..m {
            let chosen = rand::seq::index::sample(rng, n, d);
            slots.extend(chosen.iter().map(|v| v as Vertex));
        }
        Self::from_slots(n, d, true, slots)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn m(&self) -> usize {
        self.slots.len() / self.d
    }

    pub fn is_distinct(&self) -> bool {
        self.distinct
    }

    pub fn slots(&self) -> &[Vertex] {
        &self.slots
    }

    pub(crate) fn slots_mut(&mut self) -> &mut [Vertex] {
        &mut self.slots
    }

    pub fn edge(&self, i: usize) -> &[Vertex] {
        &self.slots[i * self.d..(i + 1) * self.d]
    }

    pub fn edges(&self) -> impl Iterator<Item = &[Vertex]> {
        self.slots.chunks_exact(self.d)
    }

    /// Relabels every slot value `j` as `pi(j)`.
    pub fn permute(&self, pi: &Permutation) -> Result<Self> {
        if pi.len() != self.n {
            return Err(Error::DimensionMismatch {
                what: "permutation size",
                expected: self.n,
                actual: pi.len(),
            });
        }
        let mut g = self.clone();
        for v in g.slots.iter_mut() {
            *v = pi.map[*v as usize];
        }
        Ok(g)
    }

    /// Index of this graph in the lexicographic enumeration of all
    /// `n^(m d)` slot assignments (slot 0 most significant). `None` when the
    /// index does not fit in 64 bits.
    pub fn support_index(&self) -> Option<u64> {
        self.slots.iter().try_fold(0u64, |acc, &v| {
            acc.checked_mul(self.n as u64)?.checked_add(u64::from(v))
        })
    }

    /// Inverse of [`support_index`](Self::support_index) for repeat-allowed graphs.
    pub fn from_support_index(n: usize, m: usize, d: usize, mut index: u64) -> Result<Self> {
        let mut slots = vec![0; m * d];
        for s in slots.iter_mut().rev() {
            *s = (index % n as u64) as Vertex;
            index /= n as u64;
        }
        if index != 0 {
            return Err(invalid("support index out of range"));
        }
        Self::from_slots(n, d, false, slots)
    }
}

pub(crate) fn edge_is_distinct(edge: &[Vertex]) -> bool {
    edge.iter()
        .enumerate()
        .all(|(k, v)| !edge[..k].contains(v))
}

/// Size of the repeat-allowed support `n^(m d)`, if it fits in `u64`.
pub fn support_size(n: usize, m: usize, d: usize) -> Option<u64> {
    (n as u64).checked_pow(u32::try_from(m * d).ok()?)
}

/// Parameters of the uniform hypergraph family being sampled.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphFamily {
    pub n: usize,
    pub m: usize,
    pub d: usize,
    #[serde(default)]
    pub distinct: bool,
}

impl GraphFamily {
    pub fn uniform(n: usize, m: usize, d: usize) -> Self {
        Self { n, m, d, distinct: false }
    }

    pub fn distinct(n: usize, m: usize, d: usize) -> Self {
        Self { n, m, d, distinct: true }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.m == 0 || self.d == 0 {
            return Err(invalid(format!(
                "graph family needs n, m, d >= 1, got ({}, {}, {})",
                self.n, self.m, self.d
            )));
        }
        if self.distinct && self.d > self.n {
            return Err(invalid(format!("distinct edges need d <= n, got d = {}, n = {}", self.d, self.n)));
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Hypergraph> {
        if self.distinct {
            Hypergraph::sample_distinct(self.n, self.m, self.d, rng)
        } else {
            Hypergraph::sample_uniform(self.n, self.m, self.d, rng)
        }
    }
}

/// A bijection on `0..n`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Permutation {
    map: Vec<Vertex>,
}

impl Permutation {
    pub fn new(map: Vec<usize>) -> Result<Self> {
        let n = map.len();
        let mut seen = vec![false; n];
        for &v in &map {
            if v >= n || std::mem::replace(&mut seen[v], true) {
                return Err(invalid("permutation is not a bijection on 0..n"));
            }
        }
        Ok(Self {
            map: map.into_iter().map(|v| v as Vertex).collect(),
        })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            map: (0..n as Vertex).collect(),
        }
    }

    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let mut map: Vec<Vertex> = (0..n as Vertex).collect();
        map.shuffle(rng);
        Self { map }
    }

    /// Transposition of `a` and `b`.
    pub fn swap(n: usize, a: usize, b: usize) -> Result<Self> {
        if a >= n || b >= n {
            return Err(invalid("swap indices out of range"));
        }
        let mut p = Self::identity(n);
        p.map.swap(a, b);
        Ok(p)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    #[inline]
    pub fn apply(&self, j: usize) -> usize {
        self.map[j] as usize
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.map.len()];
        for (j, &v) in self.map.iter().enumerate() {
            inv[v as usize] = j as Vertex;
        }
        Self { map: inv }
    }

    pub fn as_slice(&self) -> &[Vertex] {
        &self.map
    }
}

#[derive(Serialize, Deserialize)]
struct GraphWire {
    n: usize,
    d: usize,
    distinct: bool,
    edges: Vec<Vec<usize>>,
}

impl TryFrom<GraphWire> for Hypergraph {
    type Error = Error;

    fn try_from(w: GraphWire) -> Result<Self> {
        Hypergraph::new(w.n, w.d, w.distinct, &w.edges)
    }
}

impl From<Hypergraph> for GraphWire {
    fn from(g: Hypergraph) -> Self {
        GraphWire {
            n: g.n,
            d: g.d,
            distinct: g.distinct,
            edges: g
                .edges()
                .map(|e| e.iter().map(|&v| v as usize).collect())
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Streams;
    use std::collections::HashMap;

    #[test]
    fn n_one_forces_zero_edges() {
        let mut rng = Streams::new(1).stream(&[]);
        let g = Hypergraph::sample_uniform(1, 5, 3, &mut rng).unwrap();
        assert!(g.slots().iter().all(|&v| v == 0));
        assert_eq!(g.m(), 5);
    }

    #[test]
    fn zero_parameters_are_rejected() {
        let mut rng = Streams::new(1).stream(&[]);
        assert!(Hypergraph::sample_uniform(0, 1, 1, &mut rng).is_err());
        assert!(Hypergraph::sample_uniform(3, 0, 1, &mut rng).is_err());
        assert!(Hypergraph::sample_uniform(3, 1, 0, &mut rng).is_err());
        assert!(Hypergraph::sample_distinct(2, 1, 3, &mut rng).is_err());
    }

    #[test]
    fn single_slot_is_fair() {
        let mut rng = Streams::new(2).stream(&[]);
        let trials = 100_000;
        let zeros = (0..trials)
            .filter(|_| Hypergraph::sample_uniform(2, 1, 1, &mut rng).unwrap().slots()[0] == 0)
            .count();
        assert!((zeros as f64 / trials as f64 - 0.5).abs() < 0.01);
    }

    #[test]
    fn distinct_pairs_are_equiprobable() {
        let mut rng = Streams::new(3).stream(&[]);
        let trials = 100_000;
        let mut counts: HashMap<(Vertex, Vertex), usize> = HashMap::new();
        for _ in 0..trials {
            let g = Hypergraph::sample_distinct(3, 1, 2, &mut rng).unwrap();
            assert!(g.is_distinct());
            *counts.entry((g.slots()[0], g.slots()[1])).or_default() += 1;
        }
        assert_eq!(counts.len(), 6);
        for &c in counts.values() {
            assert!((c as f64 / trials as f64 - 1.0 / 6.0).abs() < 0.01);
        }
    }

    #[test]
    fn distinct_with_n_equal_d_is_a_permutation() {
        let mut rng = Streams::new(4).stream(&[]);
        let g = Hypergraph::sample_distinct(5, 20, 5, &mut rng).unwrap();
        for e in g.edges() {
            let mut sorted = e.to_vec();
            sorted.sort();
            assert_eq!(sorted, vec![0, 1, 2, 3, 4]);
        }
    }

    #[test]
    fn permute_examples() {
        let g = Hypergraph::new(2, 2, false, &[vec![0, 1]]).unwrap();
        assert_eq!(g.permute(&Permutation::identity(2)).unwrap(), g);
        let swapped = g.permute(&Permutation::swap(2, 0, 1).unwrap()).unwrap();
        assert_eq!(swapped.edge(0), &[1, 0]);

        let mut rng = Streams::new(5).stream(&[]);
        let g = Hypergraph::sample_uniform(7, 4, 3, &mut rng).unwrap();
        let pi = Permutation::random(7, &mut rng);
        assert_eq!(g.permute(&pi).unwrap().permute(&pi.inverse()).unwrap(), g);
        assert!(g.permute(&Permutation::identity(6)).is_err());
    }

    #[test]
    fn permutation_validation() {
        assert!(Permutation::new(vec![1, 0, 2]).is_ok());
        assert!(Permutation::new(vec![0, 0, 2]).is_err());
        assert!(Permutation::new(vec![0, 3, 1]).is_err());
    }

    #[test]
    fn construction_validates_edges() {
        assert!(Hypergraph::new(3, 2, false, &[vec![0, 3]]).is_err());
        assert!(Hypergraph::new(3, 2, false, &[vec![0]]).is_err());
        assert!(Hypergraph::new(3, 2, true, &[vec![1, 1]]).is_err());
        assert!(Hypergraph::new(3, 2, false, &[vec![1, 1]]).is_ok());
        assert_eq!(Hypergraph::new(3, 2, false, &[]).unwrap().m(), 0);
    }

    #[test]
    fn json_wire_format() {
        let g = Hypergraph::new(4, 2, true, &[vec![0, 3], vec![2, 1]]).unwrap();
        let json = serde_json::to_string(&g).unwrap();
        assert_eq!(json, r#"{"n":4,"d":2,"distinct":true,"edges":[[0,3],[2,1]]}"#);
        assert_eq!(serde_json::from_str::<Hypergraph>(&json).unwrap(), g);
        assert!(serde_json::from_str::<Hypergraph>(r#"{"n":2,"d":1,"distinct":false,"edges":[[2]]}"#).is_err());
    }

    #[test]
    fn support_index_round_trip() {
        for idx in 0..81 {
            let g = Hypergraph::from_support_index(3, 2, 2, idx).unwrap();
            assert_eq!(g.support_index(), Some(idx));
        }
        assert!(Hypergraph::from_support_index(3, 2, 2, 81).is_err());
        assert_eq!(support_size(3, 2, 2), Some(81));
    }
}

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Hypergraph, Vertex};
use crate::error::{invalid, Error, Result};

fn check_pair(g: &Hypergraph, a: usize, b: usize) -> Result<(Vertex, Vertex)> {
    if a >= g.n() || b >= g.n() {
        return Err(invalid(format!("transformation pair ({a}, {b}) outside 0..{}", g.n())));
    }
    Ok((a as Vertex, b as Vertex))
}

/// `T_{a,b}`: every slot holding `a` or `b` is resampled uniformly from
/// `{a, b}`; all other slots are kept.
pub fn transform<R: Rng + ?Sized>(g: &Hypergraph, a: usize, b: usize, rng: &mut R) -> Result<Hypergraph> {
    let mut out = g.clone();
    transform_in_place(&mut out, a, b, rng)?;
    Ok(out)
}

pub fn transform_in_place<R: Rng + ?Sized>(g: &mut Hypergraph, a: usize, b: usize, rng: &mut R) -> Result<()> {
    let (a, b) = check_pair(g, a, b)?;
    if a == b {
        return Ok(());
    }
    for v in g.slots_mut() {
        if *v == a || *v == b {
            *v = if rng.random::<bool>() { a } else { b };
        }
    }
    Ok(())
}

/// Distinct-mode `T_{a,b}`: edges containing both `a` and `b` are left
/// alone, every other edge is treated as in [`transform`].
pub fn transform_distinct<R: Rng + ?Sized>(
    g: &Hypergraph,
    a: usize,
    b: usize,
    rng: &mut R,
) -> Result<Hypergraph> {
    let mut out = g.clone();
    transform_distinct_in_place(&mut out, a, b, rng)?;
    Ok(out)
}

pub fn transform_distinct_in_place<R: Rng + ?Sized>(
    g: &mut Hypergraph,
    a: usize,
    b: usize,
    rng: &mut R,
) -> Result<()> {
    if !g.is_distinct() {
        return Err(invalid("transform_distinct needs a distinct-mode hypergraph"));
    }
    let (a, b) = check_pair(g, a, b)?;
    if a == b {
        return Ok(());
    }
    let d = g.d();
    for edge in g.slots_mut().chunks_exact_mut(d) {
        let pos = edge.iter().position(|&v| v == a || v == b);
        let Some(k) = pos else { continue };
        // at most one of a, b can be present unless both are
        let other = if edge[k] == a { b } else { a };
        if edge[k + 1..].contains(&other) {
            continue;
        }
        edge[k] = if rng.random::<bool>() { a } else { b };
    }
    Ok(())
}

/// Applies `T_{a_1,b_1}`, then `T_{a_2,b_2}`, and so on.
///
/// For plain graphs each step only visits the slots currently holding `a`
/// or `b`; the law is the same as applying [`transform_in_place`] once per
/// pair. Distinct-mode graphs couple the
/// slots of an edge and use the step-by-step rule.
pub fn apply_transforms<R: Rng + ?Sized>(
    g: &mut Hypergraph,
    pairs: &[(Vertex, Vertex)],
    rng: &mut R,
) -> Result<()> {
    let n = g.n();
    if let Some(&(a, b)) = pairs.iter().find(|&&(a, b)| a as usize >= n || b as usize >= n) {
        return Err(invalid(format!("transformation pair ({a}, {b}) outside 0..{n}")));
    }
    if g.is_distinct() {
        for &(a, b) in pairs {
            transform_distinct_in_place(g, a as usize, b as usize, rng)?;
        }
        return Ok(());
    }
    // slots holding each vertex as singly linked lists; a step only
    // visits the slots currently at a or b
    const NIL: u32 = u32::MAX;
    let slots = g.slots_mut();
    let mut head = vec![NIL; n];
    let mut next = vec![NIL; slots.len()];
    for (k, &v) in slots.iter().enumerate().rev() {
        next[k] = head[v as usize];
        head[v as usize] = k as u32;
    }
    let mut coins = Coins::default();
    for &(a, b) in pairs {
        if a == b {
            continue;
        }
        let (mut to_a, mut to_b) = (NIL, NIL);
        for start in [head[a as usize], head[b as usize]] {
            let mut k = start;
            while k != NIL {
                let after = next[k as usize];
                if coins.flip(rng) {
                    next[k as usize] = to_a;
                    to_a = k;
                } else {
                    next[k as usize] = to_b;
                    to_b = k;
                }
                k = after;
            }
        }
        head[a as usize] = to_a;
        head[b as usize] = to_b;
    }
    for (v, &h) in head.iter().enumerate() {
        let mut k = h;
        while k != NIL {
            slots[k as usize] = v as Vertex;
            k = next[k as usize];
        }
    }
    Ok(())
}

/// Fair coins drawn 64 at a time.
#[derive(Default)]
struct Coins {
    word: u64,
    left: u32,
}

impl Coins {
    #[inline]
    fn flip<R: Rng + ?Sized>(&mut self, rng: &mut R) -> bool {
        if self.left == 0 {
            self.word = rng.next_u64();
            self.left = 64;
        }
        let bit = self.word & 1 == 1;
        self.word >>= 1;
        self.left -= 1;
        bit
    }
}

/// Bit vector selecting which matching slots keep their value under the
/// derandomized transformation. Position `i * d + k` belongs to slot `k` of
/// edge `i`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct SwapVector {
    bits: Vec<bool>,
}

impl SwapVector {
    pub fn new(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    pub fn ones(len: usize) -> Self {
        Self { bits: vec![true; len] }
    }

    pub fn random<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Self {
        Self {
            bits: (0..len).map(|_| rng.random()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    /// Lowercase hex with bit `p` stored as bit `p mod 8` of byte `p / 8`.
    pub fn to_hex(&self) -> String {
        let mut bytes = vec![0u8; self.bits.len().div_ceil(8)];
        for (p, &b) in self.bits.iter().enumerate() {
            if b {
                bytes[p / 8] |= 1 << (p % 8);
            }
        }
        hex::encode(bytes)
    }

    pub fn from_hex(len: usize, s: &str) -> Result<Self> {
        let bytes = hex::decode(s).map_err(|e| Error::Malformed(format!("swap vector: {e}")))?;
        if bytes.len() != len.div_ceil(8) {
            return Err(Error::DimensionMismatch {
                what: "swap vector bytes",
                expected: len.div_ceil(8),
                actual: bytes.len(),
            });
        }
        Ok(Self {
            bits: (0..len).map(|p| bytes[p / 8] >> (p % 8) & 1 == 1).collect(),
        })
    }
}

// The wire string is "<len>:<hex>" so that lengths that are not a
// multiple of eight survive a round trip.
impl TryFrom<String> for SwapVector {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        let (len, hex) = s
            .split_once(':')
            .ok_or_else(|| Error::Malformed("swap vector must be \"<len>:<hex>\"".into()))?;
        let len = len
            .parse()
            .map_err(|e| Error::Malformed(format!("swap vector length: {e}")))?;
        SwapVector::from_hex(len, hex)
    }
}

impl From<SwapVector> for String {
    fn from(v: SwapVector) -> Self {
        format!("{}:{}", v.len(), v.to_hex())
    }
}

/// Deterministic `T'_{a,b}`: a slot holding `a` or `b` keeps its value when
/// its bit is 1 and is swapped to the other endpoint when its bit is 0.
pub fn transform_det(g: &Hypergraph, a: usize, b: usize, v: &SwapVector) -> Result<Hypergraph> {
    let (a, b) = check_pair(g, a, b)?;
    if v.len() != g.slots().len() {
        return Err(Error::DimensionMismatch {
            what: "swap vector length",
            expected: g.slots().len(),
            actual: v.len(),
        });
    }
    let mut out = g.clone();
    for (slot, &keep) in out.slots_mut().iter_mut().zip(v.bits()) {
        if keep {
            continue;
        }
        if *slot == a {
            *slot = b;
        } else if *slot == b {
            *slot = a;
        }
    }
    Ok(out)
}

/// Undoes [`transform_det`] with the same vector. The map is an involution
/// for fixed `(a, b, v)`, so this applies it once more.
pub fn inverse_transform_det(g: &Hypergraph, a: usize, b: usize, v: &SwapVector) -> Result<Hypergraph> {
    transform_det(g, a, b, v)
}

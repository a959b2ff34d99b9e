//! Reference computations shared by the integration tests. Written against
//! the definitions directly, without calling into the library's transforms.

#![allow(dead_code)]

use randlocal::Scalar;

/// Slot vector of a graph index; slot 0 is the most significant digit.
pub fn slots_of(mut index: usize, n: usize, len: usize) -> Vec<usize> {
    let mut out = vec![0; len];
    for s in out.iter_mut().rev() {
        *s = index % n;
        index /= n;
    }
    out
}

pub fn index_of(slots: &[usize], n: usize) -> usize {
    slots.iter().fold(0, |acc, &s| acc * n + s)
}

pub fn is_distinct(slots: &[usize], d: usize) -> bool {
    slots.chunks(d).all(|e| (0..e.len()).all(|i| !e[i + 1..].contains(&e[i])))
}

/// One step of `T_{a,b}` pushed through a distribution over all `n^len`
/// slot vectors. In distinct mode, edges holding both endpoints stay put.
pub fn propagate<T: Scalar>(dist: &[T], n: usize, d: usize, a: usize, b: usize, distinct: bool) -> Vec<T> {
    let len = (dist.len() as f64).log(n as f64).round() as usize;
    let mut out = vec![T::zero(); dist.len()];
    for (idx, p) in dist.iter().enumerate() {
        if p.is_zero() {
            continue;
        }
        let slots = slots_of(idx, n, len);
        if a == b {
            out[idx] = out[idx].clone() + p.clone();
            continue;
        }
        let free: Vec<usize> = (0..len)
            .filter(|&k| slots[k] == a || slots[k] == b)
            .filter(|&k| {
                let e = &slots[k / d * d..k / d * d + d];
                !(distinct && e.contains(&a) && e.contains(&b))
            })
            .collect();
        let outcomes = 1usize << free.len();
        let share = p.clone() * T::ratio(1, outcomes as i64);
        for mask in 0..outcomes {
            let mut next = slots.clone();
            for (j, &k) in free.iter().enumerate() {
                next[k] = if mask >> j & 1 == 1 { b } else { a };
            }
            let t = index_of(&next, n);
            out[t] = out[t].clone() + share.clone();
        }
    }
    out
}

/// Uniform distribution over all (or all distinct-mode) graphs.
pub fn uniform_graphs<T: Scalar>(n: usize, m: usize, d: usize, distinct: bool) -> Vec<T> {
    let size = n.pow((m * d) as u32);
    let ok: Vec<bool> = (0..size)
        .map(|i| !distinct || is_distinct(&slots_of(i, n, m * d), d))
        .collect();
    let count = ok.iter().filter(|&&x| x).count();
    ok.iter()
        .map(|&x| if x { T::ratio(1, count as i64) } else { T::zero() })
        .collect()
}

/// Truth-table evaluation with the first argument as the low bit.
pub fn eval_table(table: &[bool], args: &[bool]) -> bool {
    let idx = args.iter().enumerate().fold(0, |acc, (k, &x)| acc | (x as usize) << k);
    table[idx]
}

/// RNG replaying a fixed bit script: each `next_u32` is all ones or all
/// zeros, so any single-bit coin reads the scripted value. Reads past the
/// end return zeros and are counted.
pub struct ScriptRng {
    script: Vec<bool>,
    pub calls: usize,
}

impl rand::RngCore for ScriptRng {
    fn next_u32(&mut self) -> u32 {
        let bit = self.script.get(self.calls).copied().unwrap_or(false);
        self.calls += 1;
        if bit {
            u32::MAX
        } else {
            0
        }
    }

    fn next_u64(&mut self) -> u64 {
        self.next_u32() as u64
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        for b in dst {
            *b = self.next_u32() as u8;
        }
    }
}

/// Every outcome of a coin-driven computation with its exact probability,
/// found by depth-first extension of the coin script.
pub fn enumerate_coins<T: Scalar, O>(mut run: impl FnMut(&mut ScriptRng) -> O) -> Vec<(O, T)> {
    let mut out = Vec::new();
    let mut stack = vec![Vec::new()];
    while let Some(script) = stack.pop() {
        let mut rng = ScriptRng { script: script.clone(), calls: 0 };
        let o = run(&mut rng);
        if rng.calls > script.len() {
            for bit in [false, true] {
                let mut next = script.clone();
                next.push(bit);
                stack.push(next);
            }
        } else {
            out.push((o, T::ratio(1, 1i64 << script.len())));
        }
    }
    out
}

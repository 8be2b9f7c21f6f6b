//! Deterministic coin tossing: the bit-level identifier reduction used by the
//! fast ring protocol, plus exhaustive checks of its three key properties.
//!
//! Bits are indexed little-endian from bit 0, so `z = Σ z_k 2^k`.

use serde::Serialize;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum CoinTossError {
    #[error("logstar_steps is only defined for x >= 1")]
    DomainError,
}

/// Values at or above this are still being contracted by `F`.
pub const CONTRACTION_FLOOR: u64 = 10;

/// `⌈log₂(z + 1)⌉`, the number of significant bits of `z`.
#[inline]
pub fn bit_length(z: u64) -> u32 {
    u64::BITS - z.leading_zeros()
}

#[inline]
fn bit(z: u64, k: u32) -> u64 {
    z.checked_shr(k).unwrap_or(0) & 1
}

/// `2i + x_i`, where `i` is the lowest bit position at which `x` and `y`
/// differ, capped by the shorter of the two bit lengths.
///
/// Total on all pairs: for `x == y` the index falls back to the length term.
#[inline]
pub fn cv_reduce(x: u64, y: u64) -> u64 {
    let mut i = bit_length(x).min(bit_length(y));
    if x != y {
        i = i.min((x ^ y).trailing_zeros());
    }
    2 * u64::from(i) + bit(x, i)
}

/// `F(x) = 2·|x| + 1`, the upper envelope of `cv_reduce(x, ·)`.
#[inline]
pub fn contraction(x: u64) -> u64 {
    2 * u64::from(bit_length(x)) + 1
}

/// Smallest `t` with `F^(t)(x) < 10`.
pub fn logstar_steps(x: u64) -> Result<u32, CoinTossError> {
    if x == 0 {
        return Err(CoinTossError::DomainError);
    }
    let (mut x, mut t) = (x, 0);
    while x >= CONTRACTION_FLOOR {
        x = contraction(x);
        t += 1;
    }
    Ok(t)
}

/// Outcome of one exhaustive property suite.
#[derive(Clone, Debug, Serialize)]
pub struct LemmaReport {
    pub name: &'static str,
    pub checked: u64,
    /// Offending tuples, truncated to the first few.
    pub counterexamples: Vec<Vec<u64>>,
}

impl LemmaReport {
    const MAX_RECORDED: usize = 16;

    fn new(name: &'static str) -> Self {
        LemmaReport { name, checked: 0, counterexamples: Vec::new() }
    }

    fn record(&mut self, ok: bool, tuple: impl FnOnce() -> Vec<u64>) {
        self.checked += 1;
        if !ok && self.counterexamples.len() < Self::MAX_RECORDED {
            self.counterexamples.push(tuple());
        }
    }

    pub fn passed(&self) -> bool {
        self.counterexamples.is_empty()
    }
}

/// `cv_reduce(x, y) < y` for all `limit > x > y >= 10`.
pub fn check_contraction(limit: u64) -> LemmaReport {
    check_contraction_with(limit, |x, y| cv_reduce(x, y) < y)
}

/// Contraction sweep with a caller-supplied predicate over `(x, y)`.
pub fn check_contraction_with(limit: u64, holds: impl Fn(u64, u64) -> bool) -> LemmaReport {
    let mut report = LemmaReport::new("contraction");
    for x in CONTRACTION_FLOOR..limit {
        for y in CONTRACTION_FLOOR..x {
            report.record(holds(x, y), || vec![x, y]);
        }
    }
    report
}

/// `cv_reduce(x, y) != cv_reduce(y, z)` for all `limit > x > y > z`.
pub fn check_chain_coloring(limit: u64) -> LemmaReport {
    let mut report = LemmaReport::new("chain-coloring");
    let n = limit as usize;
    // table[x * n + y] = f(x, y) for x > y
    let mut table = vec![0u64; n * n];
    for x in 0..limit {
        for y in 0..x {
            table[x as usize * n + y as usize] = cv_reduce(x, y);
        }
    }
    for x in 0..n {
        for y in 0..x {
            let fxy = table[x * n + y];
            for z in 0..y {
                let ok = fxy != table[y * n + z];
                report.record(ok, || vec![x as u64, y as u64, z as u64]);
            }
        }
    }
    report
}

/// `cv_reduce(x, y) <= 2·|x| + 1` for all `x, y < limit`.
pub fn check_range(limit: u64) -> LemmaReport {
    let mut report = LemmaReport::new("range");
    for x in 0..limit {
        let cap = contraction(x);
        for y in 0..limit {
            report.record(cv_reduce(x, y) <= cap, || vec![x, y]);
        }
    }
    report
}

/// `logstar_steps(2^k) <= max_steps` for every power of two up to 2⁶³, plus
/// monotonicity across consecutive samples.
pub fn check_logstar(max_steps: u32) -> LemmaReport {
    let mut report = LemmaReport::new("logstar");
    let mut prev = 0;
    for k in 0..64 {
        let x = 1u64 << k;
        let steps = logstar_steps(x).expect("x >= 1");
        report.record(steps <= max_steps && steps >= prev, || vec![x, u64::from(steps)]);
        prev = steps;
    }
    report
}

pub const DEFAULT_CONTRACTION_LIMIT: u64 = 4096;
pub const DEFAULT_CHAIN_LIMIT: u64 = 512;
pub const DEFAULT_RANGE_LIMIT: u64 = 1024;
pub const LOGSTAR_CEILING: u32 = 5;

/// All suites at their default ranges.
pub fn lemma_suite() -> Vec<LemmaReport> {
    vec![
        check_contraction(DEFAULT_CONTRACTION_LIMIT),
        check_chain_coloring(DEFAULT_CHAIN_LIMIT),
        check_range(DEFAULT_RANGE_LIMIT),
        check_logstar(LOGSTAR_CEILING),
    ]
}

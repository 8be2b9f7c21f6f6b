//! The four coloring protocols as pure per-activation transition functions.
//!
//! Every activation of a working process publishes its local state, receives
//! one view per neighbor (`None` for a register that was never written) and
//! either returns a color or continues with a new local state. The engine is
//! responsible for the write/read ordering; nothing here touches shared state.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cointoss::cv_reduce;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Protocol {
    /// Six colors `(a, b)` with `a + b <= 2`, linear time.
    Slow6,
    /// Five colors `{0..4}`, linear time.
    Slow5,
    /// Five colors with identifier reduction, `O(log* n)` activations.
    Fast5,
    /// `(a, b)` with `a + b <= Δ` on bounded-degree graphs.
    DeltaSq,
}

impl Protocol {
    pub const ALL: [Protocol; 4] = [Protocol::Slow6, Protocol::Slow5, Protocol::Fast5, Protocol::DeltaSq];

    pub fn name(self) -> &'static str {
        match self {
            Protocol::Slow6 => "slow6",
            Protocol::Slow5 => "slow5",
            Protocol::Fast5 => "fast5",
            Protocol::DeltaSq => "deltasq",
        }
    }

    /// Whether the protocol only runs on rings.
    pub fn cycle_only(self) -> bool {
        !matches!(self, Protocol::DeltaSq)
    }

    /// Palette membership; `delta` is the graph's maximum degree and only
    /// matters for `deltasq`.
    pub fn in_palette(self, color: Color, delta: usize) -> bool {
        match (self, color) {
            (Protocol::Slow6, Color::Pair(a, b)) => u64::from(a) + u64::from(b) <= 2,
            (Protocol::DeltaSq, Color::Pair(a, b)) => u64::from(a) + u64::from(b) <= delta as u64,
            (Protocol::Slow5 | Protocol::Fast5, Color::Scalar(c)) => c <= 4,
            _ => false,
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Protocol {
    type Err = ProtocolError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Protocol::ALL.into_iter().find(|p| p.name() == s).ok_or_else(|| ProtocolError::UnknownProtocol(s.to_string()))
    }
}

impl Serialize for Protocol {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for Protocol {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ProtocolError {
    #[error("unknown protocol {0:?}")]
    UnknownProtocol(String),
    #[error("protocol mismatch: expected {expected} record, got {found}")]
    Mismatch { expected: Protocol, found: Protocol },
    #[error("view arity mismatch: expected {expected} views, got {found}")]
    Arity { expected: usize, found: usize },
}

/// Round counter of the fast protocol: a natural or `∞`, with `∞` above
/// every natural.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Counter {
    Finite(u64),
    Infinite,
}

impl Counter {
    pub const ZERO: Counter = Counter::Finite(0);

    pub fn is_finite(self) -> bool {
        matches!(self, Counter::Finite(_))
    }

    fn incremented(self) -> Counter {
        match self {
            Counter::Finite(r) => Counter::Finite(r + 1),
            Counter::Infinite => Counter::Infinite,
        }
    }
}

impl fmt::Display for Counter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Counter::Finite(r) => write!(f, "{r}"),
            Counter::Infinite => f.write_str("inf"),
        }
    }
}

impl Serialize for Counter {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Counter::Finite(r) => s.serialize_u64(*r),
            Counter::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Counter {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Wire {
            Num(u64),
            Text(String),
        }
        match Wire::deserialize(d)? {
            Wire::Num(r) => Ok(Counter::Finite(r)),
            Wire::Text(s) if s == "inf" => Ok(Counter::Infinite),
            Wire::Text(s) => Err(serde::de::Error::custom(format!("bad counter {s:?}"))),
        }
    }
}

/// Output color: a pair for `slow6`/`deltasq`, a scalar for `slow5`/`fast5`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Color {
    Pair(u32, u32),
    Scalar(u32),
}

impl fmt::Display for Color {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Color::Pair(a, b) => write!(f, "({a},{b})"),
            Color::Scalar(c) => write!(f, "{c}"),
        }
    }
}

/// Content of a single-writer register once written. The never-written
/// state is represented by `None` in a [`View`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RegisterRecord {
    pub protocol: Protocol,
    pub x: u64,
    pub a: u32,
    pub b: u32,
    /// Only present for `fast5`.
    pub r: Option<Counter>,
}

/// A neighbor register as read: `None` is ⊥.
pub type View = Option<RegisterRecord>;

/// Private local state of a process.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ProtocolState {
    pub protocol: Protocol,
    pub x: u64,
    pub a: u32,
    pub b: u32,
    /// Always zero outside `fast5`.
    pub r: Counter,
}

impl ProtocolState {
    pub fn initial(protocol: Protocol, x: u64) -> Self {
        ProtocolState { protocol, x, a: 0, b: 0, r: Counter::ZERO }
    }

    /// The record this state writes into its register.
    pub fn publish(&self) -> RegisterRecord {
        RegisterRecord {
            protocol: self.protocol,
            x: self.x,
            a: self.a,
            b: self.b,
            r: (self.protocol == Protocol::Fast5).then_some(self.r),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Decision {
    Return(Color),
    Continue(ProtocolState),
}

/// Least natural not in `values`.
pub fn mex(values: impl IntoIterator<Item = u32>) -> u32 {
    let mut v: Vec<u32> = values.into_iter().collect();
    v.sort_unstable();
    v.dedup();
    v.iter().enumerate().find(|&(i, &x)| x != i as u32).map_or(v.len() as u32, |(i, _)| i as u32)
}

fn mex_u64(values: impl IntoIterator<Item = u64>) -> u64 {
    let mut v: Vec<u64> = values.into_iter().collect();
    v.sort_unstable();
    v.dedup();
    v.iter().enumerate().find(|&(i, &x)| x != i as u64).map_or(v.len() as u64, |(i, _)| i as u64)
}

fn visible(expected: Protocol, views: &[View]) -> Result<impl Iterator<Item = &RegisterRecord> + Clone, ProtocolError> {
    for rec in views.iter().flatten() {
        if rec.protocol != expected {
            return Err(ProtocolError::Mismatch { expected, found: rec.protocol });
        }
    }
    Ok(views.iter().flatten())
}

fn check_state(st: &ProtocolState, expected: Protocol) -> Result<(), ProtocolError> {
    if st.protocol != expected {
        return Err(ProtocolError::Mismatch { expected, found: st.protocol });
    }
    Ok(())
}

fn check_ring_arity(views: &[View]) -> Result<(), ProtocolError> {
    if views.len() != 2 {
        return Err(ProtocolError::Arity { expected: 2, found: views.len() });
    }
    Ok(())
}

/// Dispatches on `st.protocol`.
pub fn activate(st: &ProtocolState, views: &[View]) -> Result<Decision, ProtocolError> {
    match st.protocol {
        Protocol::Slow6 => slow6_activate(st, views),
        Protocol::Slow5 => slow5_activate(st, views),
        Protocol::Fast5 => fast5_activate(st, views),
        Protocol::DeltaSq => deltasq_activate(st, views),
    }
}

/// Shared rule of the two pair-colored protocols: return `(a, b)` unless a
/// visible neighbor holds the same pair; otherwise recompute `a` from larger
/// neighbors and `b` from smaller ones.
fn pair_step(st: &ProtocolState, views: &[View]) -> Result<Decision, ProtocolError> {
    let seen = visible(st.protocol, views)?;
    if seen.clone().all(|u| (u.a, u.b) != (st.a, st.b)) {
        return Ok(Decision::Return(Color::Pair(st.a, st.b)));
    }
    let a = mex(seen.clone().filter(|u| u.x > st.x).map(|u| u.a));
    let b = mex(seen.filter(|u| u.x < st.x).map(|u| u.b));
    Ok(Decision::Continue(ProtocolState { a, b, ..*st }))
}

pub fn slow6_activate(st: &ProtocolState, views: &[View]) -> Result<Decision, ProtocolError> {
    check_state(st, Protocol::Slow6)?;
    check_ring_arity(views)?;
    pair_step(st, views)
}

/// Arity is the node's degree; the engine guarantees it, so only the
/// maximum cannot be checked here.
pub fn deltasq_activate(st: &ProtocolState, views: &[View]) -> Result<Decision, ProtocolError> {
    check_state(st, Protocol::DeltaSq)?;
    pair_step(st, views)
}

/// Coloring lines shared by `slow5` and `fast5`. Returns the decision and,
/// on continue, the candidate next state with `x`/`r` untouched.
fn five_color_step(st: &ProtocolState, views: &[View]) -> Result<Decision, ProtocolError> {
    let seen = visible(st.protocol, views)?;
    let taken: Vec<u32> = seen.clone().flat_map(|u| [u.a, u.b]).collect();
    if !taken.contains(&st.a) {
        return Ok(Decision::Return(Color::Scalar(st.a)));
    }
    if !taken.contains(&st.b) {
        return Ok(Decision::Return(Color::Scalar(st.b)));
    }
    let a = mex(seen.filter(|u| u.x > st.x).flat_map(|u| [u.a, u.b]));
    let b = mex(taken);
    Ok(Decision::Continue(ProtocolState { a, b, ..*st }))
}

pub fn slow5_activate(st: &ProtocolState, views: &[View]) -> Result<Decision, ProtocolError> {
    check_state(st, Protocol::Slow5)?;
    check_ring_arity(views)?;
    five_color_step(st, views)
}

/// Same coloring rule as `slow5`, followed on continue by one attempt at
/// shrinking the identifier. The attempt needs both neighbor registers to be
/// written and is gated on the counter not running ahead of either neighbor.
pub fn fast5_activate(st: &ProtocolState, views: &[View]) -> Result<Decision, ProtocolError> {
    check_state(st, Protocol::Fast5)?;
    check_ring_arity(views)?;
    let mut next = match five_color_step(st, views)? {
        Decision::Continue(next) => next,
        ret => return Ok(ret),
    };
    let (Some(q), Some(q2)) = (views[0], views[1]) else {
        // A ⊥ neighbor leaves the counter guard undefined: keep x and r.
        return Ok(Decision::Continue(next));
    };
    let rq = q.r.unwrap_or(Counter::ZERO);
    let rq2 = q2.r.unwrap_or(Counter::ZERO);
    if !(st.r.is_finite() && st.r <= rq.min(rq2)) {
        return Ok(Decision::Continue(next));
    }
    let lo = q.x.min(q2.x);
    let hi = q.x.max(q2.x);
    if lo < st.x && st.x < hi {
        next.r = st.r.incremented();
        let y = cv_reduce(st.x, lo);
        if y < lo {
            next.x = y;
        }
    } else {
        next.r = Counter::Infinite;
        if st.x < lo {
            next.x = st.x.min(mex_u64([cv_reduce(q.x, st.x), cv_reduce(q2.x, st.x)]));
        }
    }
    Ok(Decision::Continue(next))
}

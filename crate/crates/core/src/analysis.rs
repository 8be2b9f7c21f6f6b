//! Audits and metrics computed from recorded traces.
//!
//! Traces store what each step wrote, read and decided; the helpers here
//! replay that record to recover registers (the values visible to neighbors)
//! and local states at the end of every time step.

use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

use crate::engine::{StepRecord, Trace};
use crate::model::{Graph, IdAssignment, IdKind, NodeId};
use crate::protocols::{Color, Counter, Decision, Protocol, ProtocolState, View};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum AnalysisError {
    #[error("trace did not terminate within its horizon")]
    NotTerminated,
    #[error("audit requires a {expected} trace, got {found}")]
    WrongProtocol { expected: Protocol, found: Protocol },
    #[error("time {t} is outside the trace (last step {last})")]
    OutOfRange { t: u64, last: u64 },
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("audit requires a cycle graph")]
    NotACycle,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub t: Option<u64>,
    pub node: Option<NodeId>,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AuditReport {
    pub audit: String,
    pub violations: Vec<Violation>,
}

impl AuditReport {
    pub fn new(audit: impl Into<String>) -> Self {
        AuditReport { audit: audit.into(), violations: Vec::new() }
    }

    pub fn pass(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn push(&mut self, t: Option<u64>, node: Option<NodeId>, detail: impl Into<String>) {
        self.violations.push(Violation { t, node, detail: detail.into() });
    }

    /// One JSON object per line: a summary line, then one per violation.
    pub fn to_jsonl(&self) -> String {
        let mut out =
            serde_json::json!({ "audit": self.audit, "pass": self.pass(), "violations": self.violations.len() })
                .to_string();
        out.push('\n');
        for v in &self.violations {
            out.push_str(&serde_json::to_string(v).expect("violation serializes"));
            out.push('\n');
        }
        out
    }
}

impl fmt::Display for AuditReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}\t{}", self.audit, if self.pass() { "PASS" } else { "FAIL" })?;
        if !self.pass() {
            write!(f, "\t{} violation(s)", self.violations.len())?;
            if let Some(v) = self.violations.first() {
                write!(f, "; first: t={:?} node={:?} {}", v.t, v.node, v.detail)?;
            }
        }
        Ok(())
    }
}

fn require(tr: &Trace, expected: Protocol) -> Result<(), AnalysisError> {
    if tr.header.protocol != expected {
        return Err(AnalysisError::WrongProtocol { expected, found: tr.header.protocol });
    }
    Ok(())
}

/// Every edge whose endpoints both returned the same color.
pub fn check_proper_coloring(g: &Graph, outputs: &[Option<Color>]) -> AuditReport {
    let mut report = AuditReport::new("proper-coloring");
    for (u, v) in g.edges() {
        if let (Some(cu), Some(cv)) = (outputs[u], outputs[v]) {
            if cu == cv {
                report.push(None, Some(u), format!("nodes {u} and {v} both output {cu}"));
            }
        }
    }
    report
}

/// Outputs outside the protocol's palette. `delta` only matters for `deltasq`.
pub fn check_palette(outputs: &[Option<Color>], protocol: Protocol, delta: usize) -> AuditReport {
    let mut report = AuditReport::new("palette");
    for (p, c) in outputs.iter().enumerate() {
        if let Some(c) = c {
            if !protocol.in_palette(*c, delta) {
                report.push(None, Some(p), format!("{protocol} output {c} outside palette"));
            }
        }
    }
    report
}

/// Largest working-activation index over all processes.
pub fn round_complexity(tr: &Trace) -> Result<u32, AnalysisError> {
    if !tr.outcome.terminated {
        return Err(AnalysisError::NotTerminated);
    }
    Ok(tr.outcome.max_activations())
}

/// Registers and local states at the end of some time step.
#[derive(Clone, Debug)]
pub struct Snapshot {
    pub t: u64,
    pub registers: Vec<View>,
    pub locals: Vec<ProtocolState>,
    pub returned: Vec<Option<Color>>,
}

impl Snapshot {
    pub fn initial(tr: &Trace) -> Self {
        let h = &tr.header;
        Snapshot {
            t: 0,
            registers: vec![None; h.ids.len()],
            locals: h.ids.iter().map(|&x| ProtocolState::initial(h.protocol, x)).collect(),
            returned: vec![None; h.ids.len()],
        }
    }

    pub fn advance(&mut self, step: &StepRecord) {
        self.t = step.t;
        for &(p, rec) in &step.writes {
            self.registers[p] = Some(rec);
        }
        for &(p, d) in &step.decisions {
            match d {
                Decision::Return(c) => self.returned[p] = Some(c),
                Decision::Continue(s) => self.locals[p] = s,
            }
        }
    }
}

/// Calls `f(step, before, after)` for every recorded step.
pub fn for_each_step(tr: &Trace, mut f: impl FnMut(&StepRecord, &Snapshot, &Snapshot)) {
    let mut before = Snapshot::initial(tr);
    for step in &tr.steps {
        let mut after = before.clone();
        after.advance(step);
        f(step, &before, &after);
        before = after;
    }
}

/// State at the end of time `t`.
pub fn snapshot_at(tr: &Trace, t: u64) -> Result<Snapshot, AnalysisError> {
    let last = tr.steps.last().map_or(0, |s| s.t);
    if t > last {
        return Err(AnalysisError::OutOfRange { t, last });
    }
    let mut snap = Snapshot::initial(tr);
    for step in tr.steps.iter().take_while(|s| s.t <= t) {
        snap.advance(step);
    }
    snap.t = t;
    Ok(snap)
}

/// Identifier values heard of through increasing (`a`) and decreasing (`b`)
/// neighbor paths.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ABSets {
    pub a: BTreeSet<u64>,
    pub b: BTreeSet<u64>,
}

/// Per step, the `A`/`B` sets of every node and the neighbor splits used
/// to build them.
#[derive(Clone, Debug)]
pub struct AbHistory {
    /// `sets[t][p]`, `t = 0..=T`.
    pub sets: Vec<Vec<ABSets>>,
    /// `|N⁺_p(t)|` and `|N⁻_p(t)|` for `p ∈ σ̄(t)`, indexed like `sets`.
    pub split: Vec<Vec<Option<(usize, usize)>>>,
    /// `x̂_p(t)`.
    pub xhat: Vec<Vec<Option<u64>>>,
}

/// Unfolds the `A`/`B` recursion over the whole trace.
///
/// For a working process `p` at time `t`, `A_p(t)` is the union over
/// neighbors `q` with `x̂_q(t) > x̂_p(t)` of `Â_q(t) ∪ {x̂_q(t)}`, where
/// `Â_q(t)` is the set `q` held when it last published. Otherwise the sets
/// are carried over.
pub fn ab_history(tr: &Trace) -> AbHistory {
    let g = &tr.header.graph;
    let n = g.node_count();
    let mut sets = vec![vec![ABSets::default(); n]];
    let mut published = vec![ABSets::default(); n];
    let mut split = vec![vec![None; n]];
    let mut xhat_hist = vec![vec![None; n]];
    for_each_step(tr, |step, _, after| {
        let prev = sets.last().expect("t=0 present").clone();
        let xhat: Vec<Option<u64>> = after.registers.iter().map(|v| v.map(|r| r.x)).collect();
        for p in step.working() {
            published[p] = prev[p].clone();
        }
        let mut cur = prev.clone();
        let mut cur_split = vec![None; n];
        for p in step.working() {
            let xp = xhat[p].expect("working process just wrote");
            let mut ab = ABSets::default();
            let (mut up, mut down) = (0, 0);
            for &q in g.neighbors(p) {
                match xhat[q] {
                    Some(xq) if xq > xp => {
                        up += 1;
                        ab.a.insert(xq);
                        ab.a.extend(&published[q].a);
                    }
                    Some(xq) if xq < xp => {
                        down += 1;
                        ab.b.insert(xq);
                        ab.b.extend(&published[q].b);
                    }
                    _ => {}
                }
            }
            cur[p] = ab;
            cur_split[p] = Some((up, down));
        }
        sets.push(cur);
        split.push(cur_split);
        xhat_hist.push(xhat);
    });
    AbHistory { sets, split, xhat: xhat_hist }
}

pub fn ab_sets(tr: &Trace, p: NodeId, t: u64) -> Result<ABSets, AnalysisError> {
    if p >= tr.node_count() {
        return Err(AnalysisError::UnknownNode(p));
    }
    let last = tr.steps.last().map_or(0, |s| s.t);
    if t > last {
        return Err(AnalysisError::OutOfRange { t, last });
    }
    let hist = ab_history(tr);
    // steps are dense from t = 1 in engine-produced traces
    let idx = tr.steps.iter().take_while(|s| s.t <= t).count();
    Ok(hist.sets[idx][p].clone())
}

/// Parity of the color components against the sizes of the `A`/`B` sets,
/// checked only where at most one neighbor lies on the relevant side.
pub fn parity_audit(tr: &Trace) -> Result<AuditReport, AnalysisError> {
    require(tr, Protocol::Slow6)?;
    let hist = ab_history(tr);
    let mut report = AuditReport::new("parity");
    for (i, step) in tr.steps.iter().enumerate() {
        for &(p, d) in &step.decisions {
            let Decision::Continue(next) = d else { continue };
            let (up, down) = hist.split[i + 1][p].expect("working process has a split");
            let ab = &hist.sets[i + 1][p];
            if up <= 1 && next.a as usize % 2 != ab.a.len() % 2 {
                report.push(Some(step.t), Some(p), format!("a={} but |A|={}", next.a, ab.a.len()));
            }
            if down <= 1 && next.b as usize % 2 != ab.b.len() % 2 {
                report.push(Some(step.t), Some(p), format!("b={} but |B|={}", next.b, ab.b.len()));
            }
        }
    }
    Ok(report)
}

/// Every element of `A_p(t)` exceeds `x̂_p(t)`; every element of `B_p(t)` is
/// below it. The `B` side is only asserted for unique identifiers.
pub fn sets_ab_exclude_audit(tr: &Trace) -> Result<AuditReport, AnalysisError> {
    require(tr, Protocol::Slow6)?;
    let hist = ab_history(tr);
    let check_b = tr.header.id_kind == IdKind::Unique;
    let mut report = AuditReport::new("sets-ab-exclude");
    for (i, row) in hist.sets.iter().enumerate() {
        let t = i as u64;
        for (p, ab) in row.iter().enumerate() {
            let Some(xp) = hist.xhat[i][p] else {
                if !ab.a.is_empty() || !ab.b.is_empty() {
                    report.push(Some(t), Some(p), "non-empty sets before first write");
                }
                continue;
            };
            if let Some(x) = ab.a.iter().find(|&&x| x <= xp) {
                report.push(Some(t), Some(p), format!("{x} in A but x̂={xp}"));
            }
            if check_b {
                if let Some(x) = ab.b.iter().find(|&&x| x >= xp) {
                    report.push(Some(t), Some(p), format!("{x} in B but x̂={xp}"));
                }
            }
        }
    }
    Ok(report)
}

/// `A_p(t-1) ⊆ A_p(t)` and `B_p(t-1) ⊆ B_p(t)`.
pub fn ab_monotone_audit(tr: &Trace) -> Result<AuditReport, AnalysisError> {
    require(tr, Protocol::Slow6)?;
    let hist = ab_history(tr);
    let mut report = AuditReport::new("ab-monotone");
    for (i, pair) in hist.sets.windows(2).enumerate() {
        for (p, (old, new)) in pair[0].iter().zip(&pair[1]).enumerate() {
            if !old.a.is_subset(&new.a) || !old.b.is_subset(&new.b) {
                report.push(Some(i as u64 + 1), Some(p), "A or B shrank");
            }
        }
    }
    Ok(report)
}

/// In every continuing `slow5` activation the new `b` avoids all visible
/// neighbor color components.
pub fn stop_rule_audit(tr: &Trace) -> Result<AuditReport, AnalysisError> {
    require(tr, Protocol::Slow5)?;
    let mut report = AuditReport::new("stop-rule");
    for step in &tr.steps {
        for ((p, views), &(_, d)) in step.reads.iter().zip(&step.decisions) {
            let Decision::Continue(next) = d else { continue };
            let taken: Vec<u32> = views.iter().flatten().flat_map(|u| [u.a, u.b]).collect();
            if taken.contains(&next.b) {
                report.push(Some(step.t), Some(*p), format!("b={} collides with {taken:?}", next.b));
            }
            if next.b < next.a {
                report.push(Some(step.t), Some(*p), format!("b={} < a={}", next.b, next.a));
            }
        }
    }
    Ok(report)
}

/// Online check that published identifiers properly color the ring. Only
/// pairs touching a node written in the current step can change, so each
/// step costs `O(|σ̄(t)|)`.
#[derive(Clone, Debug)]
pub struct XhatMonitor {
    pub report: AuditReport,
}

impl Default for XhatMonitor {
    fn default() -> Self {
        XhatMonitor { report: AuditReport::new("xhat-coloring") }
    }
}

impl XhatMonitor {
    pub fn observe(&mut self, g: &Graph, registers: &[View], step: &StepRecord) {
        for (p, rec) in &step.writes {
            for &q in g.neighbors(*p) {
                if registers[q].is_some_and(|r| r.x == rec.x) {
                    self.report.push(Some(step.t), Some(*p), format!("x̂ of {p} and {q} both {}", rec.x));
                }
            }
        }
    }
}

pub fn xhat_coloring_audit(tr: &Trace) -> Result<AuditReport, AnalysisError> {
    require(tr, Protocol::Fast5)?;
    let mut monitor = XhatMonitor::default();
    for_each_step(tr, |step, _, after| monitor.observe(&tr.header.graph, &after.registers, step));
    Ok(monitor.report)
}

/// A working `fast5` process whose finite counter equals its published
/// counter, i.e. it is waiting on its neighbors before moving its identifier.
pub fn blocked_at(tr: &Trace, p: NodeId, t: u64) -> Result<bool, AnalysisError> {
    require(tr, Protocol::Fast5)?;
    if p >= tr.node_count() {
        return Err(AnalysisError::UnknownNode(p));
    }
    let snap = snapshot_at(tr, t)?;
    Ok(is_blocked(&snap, p))
}

pub fn is_blocked(snap: &Snapshot, p: NodeId) -> bool {
    let r = snap.locals[p].r;
    let published = snap.registers[p].and_then(|rec| rec.r);
    snap.returned[p].is_none() && r.is_finite() && published == Some(r)
}

/// Per node `(ℓ, ℓ')`: length of the shortest strictly increasing walk to a
/// local maximum and of the shortest strictly decreasing walk to a local
/// minimum.
pub fn monotone_distances(ids: &IdAssignment, g: &Graph) -> Result<Vec<(u32, u32)>, AnalysisError> {
    let order = g.ring_order().ok_or(AnalysisError::NotACycle)?;
    let n = order.len();
    let x: Vec<u64> = order.iter().map(|&p| ids.ids[p]).collect();
    let walk = |start: usize, dir: isize, up: bool| -> Option<u32> {
        let step = |i: usize| ((i as isize + dir).rem_euclid(n as isize)) as usize;
        let better = |a: u64, b: u64| if up { b > a } else { b < a };
        let mut i = start;
        let mut len = 0;
        if !better(x[i], x[step(i)]) {
            return None;
        }
        while better(x[i], x[step(i)]) {
            i = step(i);
            len += 1;
        }
        Some(len)
    };
    let mut out = vec![(0, 0); n];
    for i in 0..n {
        let l_up = walk(i, 1, true).into_iter().chain(walk(i, -1, true)).min().unwrap_or(0);
        let l_down = walk(i, 1, false).into_iter().chain(walk(i, -1, false)).min().unwrap_or(0);
        out[order[i]] = (l_up, l_down);
    }
    Ok(out)
}

/// Whether `p` is strictly above (or below) both ring neighbors.
pub fn is_local_max(ids: &[u64], g: &Graph, p: NodeId) -> bool {
    g.neighbors(p).iter().all(|&q| ids[q] < ids[p])
}

pub fn is_local_min(ids: &[u64], g: &Graph, p: NodeId) -> bool {
    g.neighbors(p).iter().all(|&q| ids[q] > ids[p])
}

/// `⌊3n/2⌋ + 4`.
pub fn slow6_bound(n: usize) -> u32 {
    (3 * n / 2 + 4) as u32
}

/// `3n + 8`.
pub fn slow5_bound(n: usize) -> u32 {
    (3 * n + 8) as u32
}

/// Ceiling on `fast5` working activations used by sweeps and crash checks.
/// This is an empirical figure, not a proven bound: the largest count seen
/// across the acceptance runs and randomized worst-case searches on rings of
/// up to 10⁵ nodes was 12, and the ceiling leaves twice that as headroom.
pub const FAST5_ACTIVATION_CEILING: u32 = 24;

/// Chains of published identifiers are expected to be no longer than this
/// once identifier reduction has settled.
pub const CHAIN_LENGTH_THRESHOLD: usize = 10;

/// Declared per-process activation bound, if the protocol has one.
pub fn declared_activation_bound(protocol: Protocol, n: usize) -> Option<u32> {
    match protocol {
        Protocol::Slow6 => Some(slow6_bound(n)),
        Protocol::Slow5 => Some(slow5_bound(n)),
        Protocol::Fast5 => Some(FAST5_ACTIVATION_CEILING),
        Protocol::DeltaSq => None,
    }
}

/// Per-node activation bounds derived from monotone distances:
/// `min{3ℓ, 3ℓ', ℓ+ℓ'} + 4` (and `⌊3n/2⌋ + 4`) for `slow6`; `3ℓ + 4` for
/// non-minima (and `3n + 8` for all) for `slow5`. Every node is checked,
/// including those that never returned.
pub fn activation_bound_audit(tr: &Trace) -> Result<AuditReport, AnalysisError> {
    let h = &tr.header;
    let g = &h.graph;
    let n = g.node_count();
    let ids = IdAssignment { ids: h.ids.clone(), kind: h.id_kind };
    let dist = monotone_distances(&ids, g)?;
    let mut report = AuditReport::new("activation-bound");
    for (p, &count) in tr.outcome.activations.iter().enumerate() {
        let (l_up, l_down) = dist[p];
        let bound = match h.protocol {
            Protocol::Slow6 => (3 * l_up).min(3 * l_down).min(l_up + l_down).saturating_add(4).min(slow6_bound(n)),
            Protocol::Slow5 if !is_local_min(&h.ids, g, p) => (3 * l_up + 4).min(slow5_bound(n)),
            Protocol::Slow5 => slow5_bound(n),
            other => return Err(AnalysisError::WrongProtocol { expected: Protocol::Slow6, found: other }),
        };
        if count > bound {
            report.push(None, Some(p), format!("{count} activations > bound {bound} (ℓ={l_up}, ℓ'={l_down})"));
        }
    }
    Ok(report)
}

/// Every node's working-activation count is within `bound`.
pub fn global_bound_audit(tr: &Trace, bound: u32) -> AuditReport {
    let mut report = AuditReport::new("global-bound");
    for (p, &c) in tr.outcome.activations.iter().enumerate() {
        if c > bound {
            report.push(None, Some(p), format!("{c} activations > {bound}"));
        }
    }
    report
}

/// Longest strictly monotone path (in edges) of values around a ring.
pub fn longest_monotone_run(ring_values: &[u64]) -> usize {
    let n = ring_values.len();
    if n < 2 {
        return 0;
    }
    // start from a local extremum so runs do not wrap past the starting point
    let start = (0..n)
        .find(|&i| {
            let (prev, next) = (ring_values[(i + n - 1) % n], ring_values[(i + 1) % n]);
            let v = ring_values[i];
            (v > prev && v > next) || (v < prev && v < next)
        })
        .unwrap_or(0);
    let mut best = 0;
    let mut run = 0;
    let mut dir = 0i8;
    for k in 0..n {
        let a = ring_values[(start + k) % n];
        let b = ring_values[(start + k + 1) % n];
        let d = match a.cmp(&b) {
            std::cmp::Ordering::Less => 1,
            std::cmp::Ordering::Greater => -1,
            std::cmp::Ordering::Equal => 0,
        };
        run = if d != 0 && d == dir {
            run + 1
        } else if d != 0 {
            1
        } else {
            0
        };
        dir = d;
        best = best.max(run);
    }
    best
}

/// Longest monotone chain of the identifiers published at the end of a trace.
pub fn final_identifier_chain(tr: &Trace) -> Result<usize, AnalysisError> {
    let g = &tr.header.graph;
    let order = g.ring_order().ok_or(AnalysisError::NotACycle)?;
    let last = snapshot_at(tr, tr.steps.last().map_or(0, |s| s.t))?;
    let values: Vec<u64> = order.iter().map(|&p| last.registers[p].map_or(tr.header.ids[p], |r| r.x)).collect();
    Ok(longest_monotone_run(&values))
}

/// `r̂_p(t)` of a snapshot as a counter, for tests and tooling.
pub fn published_counter(snap: &Snapshot, p: NodeId) -> Option<Counter> {
    snap.registers[p].and_then(|r| r.r)
}

//! Schedule generators, adversarial schedule search and an exhaustive
//! explorer for tiny rings.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::engine::{EngineError, Execution};
use crate::model::{Graph, IdAssignment, NodeId};
use crate::protocols::{Color, Protocol, ProtocolState, View};

#[derive(Debug, thiserror::Error)]
pub enum SchedError {
    #[error("activation probability must lie in (0, 1], got {0}")]
    InvalidProbability(f64),
    #[error("bad scheduler descriptor {0:?}")]
    BadDescriptor(String),
    #[error("crash time refers to unknown node {0}")]
    UnknownNode(NodeId),
    #[error("exhaustive check supports at most {max} nodes, got {found}")]
    TooManyNodes { max: usize, found: usize },
    #[error("state space exceeded {0} configurations")]
    StateSpaceExceeded(usize),
    #[error("budget must be at least 1")]
    ZeroBudget,
    #[error("replay file {path}: {msg}")]
    ReplayFile { path: PathBuf, msg: String },
    #[error(transparent)]
    Engine(#[from] EngineError),
}

#[derive(Clone, Debug, PartialEq)]
pub enum SchedulerDescriptor {
    /// Every node at every step.
    Synchronous,
    /// `σ(t) = {t mod n}`.
    RoundRobin,
    /// Each node independently with probability `p_act`; redrawn if empty.
    Random { p_act: f64, seed: u64 },
    /// `base` with node `p` removed from every `σ(t)`, `t >= crash_times[p]`.
    Crash { base: Box<SchedulerDescriptor>, crash_times: BTreeMap<NodeId, u64> },
    /// Explicit finite sequence `σ(1), σ(2), ...`; empty afterwards.
    Replay { sets: Vec<Vec<NodeId>>, source: Option<PathBuf> },
}

impl SchedulerDescriptor {
    pub fn replay(sets: Vec<Vec<NodeId>>) -> Self {
        SchedulerDescriptor::Replay { sets, source: None }
    }

    pub fn load_replay(path: impl AsRef<Path>) -> Result<Self, SchedError> {
        let path = path.as_ref();
        let err = |msg: String| SchedError::ReplayFile { path: path.to_path_buf(), msg };
        let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        let sets = parse_replay(&text).map_err(err)?;
        Ok(SchedulerDescriptor::Replay { sets, source: Some(path.to_path_buf()) })
    }
}

/// Replay file: one line per time step, whitespace or comma separated node
/// indices, an empty line for an empty set, `#` comments.
pub fn parse_replay(text: &str) -> Result<Vec<Vec<NodeId>>, String> {
    text.lines()
        .filter(|l| !l.trim_start().starts_with('#'))
        .enumerate()
        .map(|(i, l)| {
            l.split(|c: char| c.is_whitespace() || c == ',')
                .filter(|s| !s.is_empty())
                .map(|s| s.parse().map_err(|_| format!("line {}: bad node {s:?}", i + 1)))
                .collect()
        })
        .collect()
}

pub fn format_replay(sets: &[Vec<NodeId>]) -> String {
    sets.iter().map(|s| s.iter().map(ToString::to_string).collect::<Vec<_>>().join(" ") + "\n").collect()
}

impl fmt::Display for SchedulerDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SchedulerDescriptor::Synchronous => f.write_str("sync"),
            SchedulerDescriptor::RoundRobin => f.write_str("rr"),
            SchedulerDescriptor::Random { p_act, seed } => write!(f, "rand:{p_act}:{seed}"),
            SchedulerDescriptor::Crash { base, crash_times } => {
                f.write_str("crash:")?;
                for (i, (p, t)) in crash_times.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{p}@{t}")?;
                }
                write!(f, ";{base}")
            }
            SchedulerDescriptor::Replay { source: Some(path), .. } => write!(f, "replay:{}", path.display()),
            SchedulerDescriptor::Replay { source: None, .. } => f.write_str("replay:<inline>"),
        }
    }
}

impl FromStr for SchedulerDescriptor {
    type Err = SchedError;

    /// `replay:<file>` reads the file.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || SchedError::BadDescriptor(s.to_string());
        match s {
            "sync" => return Ok(SchedulerDescriptor::Synchronous),
            "rr" => return Ok(SchedulerDescriptor::RoundRobin),
            _ => {}
        }
        if let Some(rest) = s.strip_prefix("rand:") {
            let (p, seed) = rest.split_once(':').ok_or_else(bad)?;
            let p_act: f64 = p.parse().map_err(|_| bad())?;
            if !(p_act > 0.0 && p_act <= 1.0) {
                return Err(SchedError::InvalidProbability(p_act));
            }
            return Ok(SchedulerDescriptor::Random { p_act, seed: seed.parse().map_err(|_| bad())? });
        }
        if let Some(rest) = s.strip_prefix("crash:") {
            let (list, base) = rest.split_once(';').ok_or_else(bad)?;
            let mut crash_times = BTreeMap::new();
            for item in list.split(',').filter(|i| !i.is_empty()) {
                let (p, t) = item.split_once('@').ok_or_else(bad)?;
                crash_times.insert(p.parse().map_err(|_| bad())?, t.parse().map_err(|_| bad())?);
            }
            return Ok(SchedulerDescriptor::Crash { base: Box::new(base.parse()?), crash_times });
        }
        if let Some(path) = s.strip_prefix("replay:") {
            return SchedulerDescriptor::load_replay(path);
        }
        Err(bad())
    }
}

/// A pure `σ(t)` generator for a fixed node count.
#[derive(Clone, Debug)]
pub struct Scheduler {
    descriptor: SchedulerDescriptor,
    n: usize,
    /// Per node, the last replay step that activates it (0 if none).
    last_replay: Vec<u64>,
}

impl Scheduler {
    pub fn new(descriptor: SchedulerDescriptor, n: usize) -> Result<Self, SchedError> {
        validate(&descriptor, n)?;
        let mut last_replay = vec![0; n];
        if let Some(sets) = replay_sets(&descriptor) {
            for (i, set) in sets.iter().enumerate() {
                for &p in set {
                    last_replay[p] = i as u64 + 1;
                }
            }
        }
        Ok(Scheduler { descriptor, n, last_replay })
    }

    pub fn descriptor(&self) -> &SchedulerDescriptor {
        &self.descriptor
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    /// `σ(t)` for `t >= 1`, sorted.
    pub fn sigma(&self, t: u64) -> Vec<NodeId> {
        sigma_of(&self.descriptor, self.n, t)
    }

    /// True if `p` is in no `σ(t')` with `t' >= t`.
    pub fn is_crashed(&self, p: NodeId, t: u64) -> bool {
        crashed_in(&self.descriptor, &self.last_replay, p, t)
    }

    /// True when every node is activated infinitely often.
    pub fn never_crashes(&self) -> bool {
        matches!(
            self.descriptor,
            SchedulerDescriptor::Synchronous | SchedulerDescriptor::RoundRobin | SchedulerDescriptor::Random { .. }
        )
    }

    /// `σ(1..=horizon)` as an explicit replay.
    pub fn materialize(&self, horizon: u64) -> SchedulerDescriptor {
        SchedulerDescriptor::replay((1..=horizon).map(|t| self.sigma(t)).collect())
    }
}

/// Convenience wrapper mirroring the descriptor-first API.
pub fn make_scheduler(descriptor: SchedulerDescriptor, n: usize) -> Result<Scheduler, SchedError> {
    Scheduler::new(descriptor, n)
}

fn validate(d: &SchedulerDescriptor, n: usize) -> Result<(), SchedError> {
    match d {
        SchedulerDescriptor::Random { p_act, .. } if !(*p_act > 0.0 && *p_act <= 1.0) => {
            Err(SchedError::InvalidProbability(*p_act))
        }
        SchedulerDescriptor::Crash { base, crash_times } => {
            if let Some(&p) = crash_times.keys().find(|&&p| p >= n) {
                return Err(SchedError::UnknownNode(p));
            }
            validate(base, n)
        }
        SchedulerDescriptor::Replay { sets, .. } => match sets.iter().flatten().find(|&&p| p >= n) {
            Some(&p) => Err(SchedError::UnknownNode(p)),
            None => Ok(()),
        },
        _ => Ok(()),
    }
}

fn replay_sets(d: &SchedulerDescriptor) -> Option<&Vec<Vec<NodeId>>> {
    match d {
        SchedulerDescriptor::Replay { sets, .. } => Some(sets),
        SchedulerDescriptor::Crash { base, .. } => replay_sets(base),
        _ => None,
    }
}

fn sigma_of(d: &SchedulerDescriptor, n: usize, t: u64) -> Vec<NodeId> {
    match d {
        SchedulerDescriptor::Synchronous => (0..n).collect(),
        SchedulerDescriptor::RoundRobin => vec![(t % n as u64) as NodeId],
        SchedulerDescriptor::Random { p_act, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            rng.set_stream(t);
            loop {
                let set: Vec<NodeId> = (0..n).filter(|_| rng.gen_bool(*p_act)).collect();
                if !set.is_empty() || n == 0 {
                    return set;
                }
            }
        }
        SchedulerDescriptor::Crash { base, crash_times } => {
            let mut set = sigma_of(base, n, t);
            set.retain(|p| crash_times.get(p).is_none_or(|&c| t < c));
            set
        }
        SchedulerDescriptor::Replay { sets, .. } => {
            let mut set = t.checked_sub(1).and_then(|i| sets.get(i as usize)).cloned().unwrap_or_default();
            set.sort_unstable();
            set.dedup();
            set
        }
    }
}

fn crashed_in(d: &SchedulerDescriptor, last_replay: &[u64], p: NodeId, t: u64) -> bool {
    match d {
        SchedulerDescriptor::Synchronous | SchedulerDescriptor::RoundRobin | SchedulerDescriptor::Random { .. } => {
            false
        }
        SchedulerDescriptor::Crash { base, crash_times } => {
            crash_times.get(&p).is_some_and(|&c| t >= c) || crashed_in(base, last_replay, p, t)
        }
        SchedulerDescriptor::Replay { .. } => last_replay[p] < t,
    }
}

/// Result of [`worst_case_search`].
#[derive(Clone, Debug)]
pub struct WorstCase {
    pub descriptor: SchedulerDescriptor,
    pub max_activations: u32,
    pub evaluations: usize,
}

fn measure(
    graph: &Arc<Graph>,
    ids: &IdAssignment,
    protocol: Protocol,
    sets: &[Vec<NodeId>],
) -> Result<u32, SchedError> {
    let mut ex = Execution::new(graph.clone(), ids.clone(), protocol)?;
    for set in sets {
        if ex.all_returned() {
            break;
        }
        ex.apply_step(set)?;
    }
    Ok(ex.activations().iter().copied().max().unwrap_or(0))
}

/// Randomized hill climbing over replay schedules, maximizing the largest
/// per-process working-activation count. `budget` is the number of schedule
/// evaluations; a fresh random schedule is drawn every `RESTART` evaluations
/// without improvement.
pub fn worst_case_search(
    graph: &Arc<Graph>,
    ids: &IdAssignment,
    protocol: Protocol,
    budget: usize,
    seed: u64,
) -> Result<WorstCase, SchedError> {
    const RESTART: usize = 200;
    if budget == 0 {
        return Err(SchedError::ZeroBudget);
    }
    let n = graph.node_count();
    let len = (n * 24).clamp(16, 2000);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let random_set = |rng: &mut ChaCha8Rng| -> Vec<NodeId> {
        loop {
            let s: Vec<NodeId> = (0..n).filter(|_| rng.gen_bool(0.5)).collect();
            if !s.is_empty() {
                return s;
            }
        }
    };
    let fresh = |rng: &mut ChaCha8Rng| -> Vec<Vec<NodeId>> { (0..len).map(|_| random_set(rng)).collect() };

    let mutate = |rng: &mut ChaCha8Rng, base: &[Vec<NodeId>]| -> Vec<Vec<NodeId>> {
        let mut c = base.to_vec();
        let i = rng.gen_range(0..c.len());
        match rng.gen_range(0..4) {
            0 => c[i] = random_set(rng),
            1 => {
                // toggle one node, never emptying the set
                let p = rng.gen_range(0..n);
                match c[i].iter().position(|&q| q == p) {
                    Some(k) if c[i].len() > 1 => {
                        c[i].remove(k);
                    }
                    Some(_) => {}
                    None => c[i].push(p),
                }
            }
            2 => c[i] = vec![rng.gen_range(0..n)],
            _ => {
                let j = rng.gen_range(0..c.len());
                c.swap(i, j);
            }
        }
        c
    };

    let mut current = fresh(&mut rng);
    let mut current_score = measure(graph, ids, protocol, &current)?;
    let (mut best, mut best_score) = (current.clone(), current_score);
    let mut stale = 0;
    for _ in 1..budget {
        let restart = stale >= RESTART;
        let candidate = if restart {
            stale = 0;
            fresh(&mut rng)
        } else {
            mutate(&mut rng, &current)
        };
        let score = measure(graph, ids, protocol, &candidate)?;
        if restart || score > current_score {
            current = candidate;
            current_score = score;
        }
        if current_score > best_score {
            best = current.clone();
            best_score = current_score;
            stale = 0;
        } else {
            stale += 1;
        }
    }
    Ok(WorstCase { descriptor: SchedulerDescriptor::replay(best), max_activations: best_score, evaluations: budget })
}

/// Summary of an exhaustive exploration.
#[derive(Clone, Debug, Serialize)]
pub struct McReport {
    /// Distinct configurations visited.
    pub explored: usize,
    pub memo_hits: usize,
    /// Activation-set sequences leading to an improper or off-palette output.
    pub safety_violations: Vec<Vec<Vec<NodeId>>>,
    /// `(node, activation count)` pairs exceeding the bound.
    pub bound_violations: Vec<(NodeId, u32)>,
    /// Largest working-activation count seen anywhere in the exploration.
    pub max_activations: u32,
    pub pass: bool,
}

pub const MC_MAX_NODES: usize = 5;
pub const MC_DEFAULT_CEILING: usize = 20_000_000;
const MC_MAX_RECORDED: usize = 8;

#[derive(Clone, PartialEq, Eq, Hash)]
struct Config {
    registers: Vec<View>,
    locals: Vec<ProtocolState>,
    outputs: Vec<Option<Color>>,
    counts: Vec<u32>,
}

struct Explorer<'a> {
    graph: &'a Graph,
    protocol: Protocol,
    bound: u32,
    ceiling: usize,
    seen: HashSet<Config>,
    report: McReport,
    path: Vec<Vec<NodeId>>,
}

impl Explorer<'_> {
    fn visit(&mut self, ex: &Execution) -> Result<(), SchedError> {
        let working: Vec<NodeId> = (0..self.graph.node_count()).filter(|&p| ex.is_working(p)).collect();
        if working.is_empty() {
            return Ok(());
        }
        for mask in 1u32..(1 << working.len()) {
            let set: Vec<NodeId> =
                working.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, &p)| p).collect();
            let mut next = ex.clone();
            next.apply_step(&set)?;
            self.path.push(set);
            self.check(&next);
            let over = set_over_bound(&next, self.bound, &self.path);
            if over.is_empty() {
                let key = Config {
                    registers: next.registers().to_vec(),
                    locals: next.locals().to_vec(),
                    outputs: next.returned().to_vec(),
                    counts: next.activations().to_vec(),
                };
                if self.seen.insert(key) {
                    self.report.explored += 1;
                    if self.report.explored > self.ceiling {
                        return Err(SchedError::StateSpaceExceeded(self.ceiling));
                    }
                    self.visit(&next)?;
                } else {
                    self.report.memo_hits += 1;
                }
            } else {
                for v in over {
                    if !self.report.bound_violations.contains(&v)
                        && self.report.bound_violations.len() < MC_MAX_RECORDED
                    {
                        self.report.bound_violations.push(v);
                    }
                }
            }
            self.path.pop();
        }
        Ok(())
    }

    fn check(&mut self, ex: &Execution) {
        let max = ex.activations().iter().copied().max().unwrap_or(0);
        self.report.max_activations = self.report.max_activations.max(max);
        let outputs = ex.returned();
        let delta = self.graph.max_degree();
        let bad_palette = outputs.iter().flatten().any(|&c| !self.protocol.in_palette(c, delta));
        let clash = self.graph.edges().any(|(u, v)| outputs[u].is_some() && outputs[u] == outputs[v]);
        if (bad_palette || clash) && self.report.safety_violations.len() < MC_MAX_RECORDED {
            self.report.safety_violations.push(self.path.clone());
        }
    }
}

fn set_over_bound(ex: &Execution, bound: u32, path: &[Vec<NodeId>]) -> Vec<(NodeId, u32)> {
    let last = path.last().map(Vec::as_slice).unwrap_or(&[]);
    last.iter().map(|&p| (p, ex.activations()[p])).filter(|&(_, c)| c > bound).collect()
}

/// Explores every schedule (all non-empty subsets of working processes at
/// every step) from the initial configuration, memoizing configurations.
///
/// Safety: adjacent returned processes never share a color and every output
/// is in the palette. Bound: no process is activated more than
/// `activation_bound` times while working. A branch is closed once all
/// processes have returned or once a bound violation occurs.
pub fn exhaustive_check(
    graph: &Arc<Graph>,
    ids: &IdAssignment,
    protocol: Protocol,
    activation_bound: u32,
) -> Result<McReport, SchedError> {
    exhaustive_check_with_ceiling(graph, ids, protocol, activation_bound, MC_DEFAULT_CEILING)
}

pub fn exhaustive_check_with_ceiling(
    graph: &Arc<Graph>,
    ids: &IdAssignment,
    protocol: Protocol,
    activation_bound: u32,
    ceiling: usize,
) -> Result<McReport, SchedError> {
    let n = graph.node_count();
    if n > MC_MAX_NODES {
        return Err(SchedError::TooManyNodes { max: MC_MAX_NODES, found: n });
    }
    let ex = Execution::new(graph.clone(), ids.clone(), protocol)?;
    let mut explorer = Explorer {
        graph,
        protocol,
        bound: activation_bound,
        ceiling,
        seen: HashSet::new(),
        report: McReport {
            explored: 1,
            memo_hits: 0,
            safety_violations: Vec::new(),
            bound_violations: Vec::new(),
            max_activations: 0,
            pass: false,
        },
        path: Vec::new(),
    };
    explorer.visit(&ex)?;
    let mut report = explorer.report;
    report.pass = report.safety_violations.is_empty() && report.bound_violations.is_empty();
    Ok(report)
}

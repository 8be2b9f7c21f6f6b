//! The `wfc` experiment harness.
//!
//! Exit codes are shared by every subcommand: 0 on success, 1 when a run
//! violates a checked property, fails to terminate or a lemma suite finds a
//! counterexample, and 2 on usage or configuration errors.

use std::ffi::OsString;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::analysis::{
    ab_monotone_audit, activation_bound_audit, check_palette, check_proper_coloring, declared_activation_bound,
    global_bound_audit, parity_audit, sets_ab_exclude_audit, stop_rule_audit, AuditReport, XhatMonitor,
    FAST5_ACTIVATION_CEILING,
};
use crate::cointoss::{self, cv_reduce, LemmaReport};
use crate::engine::{default_horizon, Execution, Outcome, StepRecord, Trace, TraceHeader, TraceWriter};
use crate::model::{default_id_bound, monotone_chain_ids, proper_coloring_ids, random_unique_ids, Graph, IdAssignment};
use crate::protocols::Protocol;
use crate::schedulers::{exhaustive_check, format_replay, worst_case_search, Scheduler, SchedulerDescriptor};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Runs retaining every step (and so the step-based audits) only up to this
/// many nodes; larger runs are streamed.
pub const FULL_AUDIT_MAX_NODES: usize = 64;

const DEFAULT_BUDGET: usize = 2000;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Core(#[from] crate::Error),
}

fn core(e: impl Into<crate::Error>) -> CliError {
    CliError::Core(e.into())
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Where the graph comes from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Topology {
    Cycle(usize),
    File(PathBuf),
}

/// How identifiers are assigned.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum IdMode {
    /// Distinct values drawn from `[0, n³)`.
    Random,
    /// `0, 1, ..., n-1` in node order.
    Chain,
    /// A random proper coloring with at most `k` values.
    Proper(u64),
    File(PathBuf),
    /// Explicit values in node order.
    List(Vec<u64>),
}

impl fmt::Display for IdMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IdMode::Random => write!(f, "random"),
            IdMode::Chain => write!(f, "chain"),
            IdMode::Proper(k) => write!(f, "proper:{k}"),
            IdMode::File(p) => write!(f, "file:{}", p.display()),
            IdMode::List(v) => {
                let parts: Vec<String> = v.iter().map(u64::to_string).collect();
                write!(f, "list:{}", parts.join(","))
            }
        }
    }
}

impl FromStr for IdMode {
    type Err = String;

    /// Also accepts a bare comma-separated list such as `1,2,5`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let list = |body: &str| -> Result<IdMode, String> {
            body.split(',')
                .map(|v| v.trim().parse::<u64>().map_err(|e| format!("bad identifier {v:?}: {e}")))
                .collect::<Result<Vec<_>, _>>()
                .map(IdMode::List)
        };
        match s.split_once(':') {
            None if s == "random" => Ok(IdMode::Random),
            None if s == "chain" => Ok(IdMode::Chain),
            None if s.starts_with(|c: char| c.is_ascii_digit()) => list(s),
            Some(("proper", k)) => k.parse().map(IdMode::Proper).map_err(|e| format!("bad palette size {k:?}: {e}")),
            Some(("file", p)) if !p.is_empty() => Ok(IdMode::File(PathBuf::from(p))),
            Some(("list", body)) => list(body),
            _ => Err(format!(
                "unknown id mode {s:?} (expected random, chain, proper:<k>, file:<path> or list:<a,b,...>)"
            )),
        }
    }
}

/// Every setting shared by the subcommands, all optional so that values from
/// a config file and from flags can be layered.
#[derive(Args, Clone, Debug, Default, PartialEq)]
pub struct PartialConfig {
    #[arg(long)]
    pub protocol: Option<Protocol>,
    /// Ring size.
    #[arg(long)]
    pub n: Option<usize>,
    /// Edge-list file.
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// random | chain | proper:<k> | file:<path> | list:<a,b,...>
    #[arg(long)]
    pub ids: Option<IdMode>,
    /// Base seed; falls back to WFC_SEED, then 0.
    #[arg(long)]
    pub seed: Option<u64>,
    /// sync | rr | rand:<p>:<seed> | crash:<p>@<t>,...;<base> | replay:<file>
    #[arg(long)]
    pub sched: Option<SchedulerDescriptor>,
    #[arg(long)]
    pub horizon: Option<u64>,
    #[arg(long)]
    pub trials: Option<u64>,
    /// Output file: the trace for `run`, audit reports for `sweep`, the
    /// report for `mc`, the worst schedule for `worstcase`.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Activation bound overriding the protocol's own.
    #[arg(long)]
    pub bound: Option<u32>,
}

impl PartialConfig {
    /// Parses `key=value` lines; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut cfg = PartialConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |msg: String| CliError::Config { line: i + 1, msg };
            let (key, value) = line.split_once('=').ok_or_else(|| err(format!("expected key=value, got {line:?}")))?;
            let value = value.trim();
            fn p<T: FromStr>(v: &str) -> Result<T, String>
            where
                T::Err: fmt::Display,
            {
                v.parse().map_err(|e: T::Err| e.to_string())
            }
            let res: Result<(), String> = match key.trim() {
                "protocol" => p(value).map(|v| cfg.protocol = Some(v)),
                "n" => p(value).map(|v| cfg.n = Some(v)),
                "graph" => {
                    cfg.graph = Some(PathBuf::from(value));
                    Ok(())
                }
                "ids" => p(value).map(|v| cfg.ids = Some(v)),
                "seed" => p(value).map(|v| cfg.seed = Some(v)),
                "sched" => p(value).map(|v| cfg.sched = Some(v)),
                "horizon" => p(value).map(|v| cfg.horizon = Some(v)),
                "trials" => p(value).map(|v| cfg.trials = Some(v)),
                "trace" => {
                    cfg.trace = Some(PathBuf::from(value));
                    Ok(())
                }
                "bound" => p(value).map(|v| cfg.bound = Some(v)),
                other => Err(format!("unknown key {other:?}")),
            };
            res.map_err(err)?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Values set in `top` win.
    pub fn overlay(self, top: PartialConfig) -> PartialConfig {
        PartialConfig {
            protocol: top.protocol.or(self.protocol),
            n: top.n.or(self.n),
            graph: top.graph.or(self.graph),
            ids: top.ids.or(self.ids),
            seed: top.seed.or(self.seed),
            sched: top.sched.or(self.sched),
            horizon: top.horizon.or(self.horizon),
            trials: top.trials.or(self.trials),
            trace: top.trace.or(self.trace),
            bound: top.bound.or(self.bound),
        }
    }

    pub fn resolve(self, env_seed: Option<u64>) -> Result<ExperimentConfig, CliError> {
        let protocol = self.protocol.ok_or_else(|| usage("--protocol is required"))?;
        let topology = match (self.n, self.graph) {
            (Some(n), None) => Topology::Cycle(n),
            (None, Some(path)) => Topology::File(path),
            (Some(_), Some(_)) => return Err(usage("--n and --graph are mutually exclusive")),
            (None, None) => return Err(usage("one of --n or --graph is required")),
        };
        let trials = self.trials.unwrap_or(1);
        if trials == 0 {
            return Err(usage("--trials must be at least 1"));
        }
        if self.horizon == Some(0) {
            return Err(usage("--horizon must be at least 1"));
        }
        Ok(ExperimentConfig {
            protocol,
            topology,
            ids: self.ids.unwrap_or(IdMode::Random),
            seed: self.seed.or(env_seed).unwrap_or(0),
            sched: self.sched.unwrap_or(SchedulerDescriptor::Synchronous),
            horizon: self.horizon,
            trials,
            trace: self.trace,
            bound: self.bound,
        })
    }
}

/// A fully specified experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub protocol: Protocol,
    pub topology: Topology,
    pub ids: IdMode,
    pub seed: u64,
    pub sched: SchedulerDescriptor,
    /// Defaults to [`default_horizon`].
    pub horizon: Option<u64>,
    pub trials: u64,
    pub trace: Option<PathBuf>,
    pub bound: Option<u32>,
}

impl ExperimentConfig {
    pub fn to_config_string(&self) -> String {
        let mut s = format!("protocol={}\n", self.protocol);
        match &self.topology {
            Topology::Cycle(n) => s += &format!("n={n}\n"),
            Topology::File(p) => s += &format!("graph={}\n", p.display()),
        }
        s += &format!("ids={}\nseed={}\nsched={}\n", self.ids, self.seed, self.sched);
        if let Some(h) = self.horizon {
            s += &format!("horizon={h}\n");
        }
        s += &format!("trials={}\n", self.trials);
        if let Some(p) = &self.trace {
            s += &format!("trace={}\n", p.display());
        }
        if let Some(b) = self.bound {
            s += &format!("bound={b}\n");
        }
        s
    }

    pub fn from_config_str(text: &str) -> Result<Self, CliError> {
        PartialConfig::parse(text)?.resolve(None)
    }

    pub fn graph(&self) -> Result<Graph, CliError> {
        match &self.topology {
            Topology::Cycle(n) => Graph::cycle(*n).map_err(core),
            Topology::File(p) => Graph::load_edge_list(p).map_err(core),
        }
    }

    /// Identifiers for trial `trial`; trial 0 uses the base seed itself.
    pub fn ids_for(&self, g: &Graph, trial: u64) -> Result<IdAssignment, CliError> {
        let seed = trial_seed(self.seed, trial);
        let ids = match &self.ids {
            IdMode::Random => random_unique_ids(g, default_id_bound(g.node_count()), seed),
            IdMode::Chain => monotone_chain_ids(g.node_count()),
            IdMode::Proper(k) => proper_coloring_ids(g, *k, seed),
            IdMode::File(p) => IdAssignment::load_id_file(g, p),
            IdMode::List(v) => IdAssignment::infer(g, v.clone()),
        };
        ids.map_err(core)
    }

    pub fn sched_for(&self, trial: u64) -> SchedulerDescriptor {
        reseed(&self.sched, trial)
    }

    pub fn horizon_for(&self, n: usize, sched: &SchedulerDescriptor) -> u64 {
        self.horizon.unwrap_or_else(|| default_horizon(self.protocol, n, sched))
    }
}

/// Seed of trial `i`: the base seed for `i = 0`, a SplitMix64 mix otherwise.
pub fn trial_seed(base: u64, i: u64) -> u64 {
    if i == 0 {
        return base;
    }
    let mut z = base.wrapping_add(i.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn reseed(d: &SchedulerDescriptor, trial: u64) -> SchedulerDescriptor {
    match d {
        SchedulerDescriptor::Random { p_act, seed } => {
            SchedulerDescriptor::Random { p_act: *p_act, seed: trial_seed(*seed, trial) }
        }
        SchedulerDescriptor::Crash { base, crash_times } => {
            SchedulerDescriptor::Crash { base: Box::new(reseed(base, trial)), crash_times: crash_times.clone() }
        }
        other => other.clone(),
    }
}

#[derive(Parser, Debug)]
#[command(name = "wfc", version, about = "Wait-free ring and graph coloring simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Debug)]
struct Common {
    /// key=value file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    values: PartialConfig,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Execute one run, print its statistics and audit verdicts.
    Run {
        #[command(flatten)]
        common: Common,
        /// Re-execute the inputs recorded in a trace file.
        #[arg(long)]
        from_trace: Option<PathBuf>,
    },
    /// Execute many seeded trials in parallel.
    Sweep {
        #[command(flatten)]
        common: Common,
    },
    /// Explore every schedule of a ring with at most five nodes.
    Mc {
        #[command(flatten)]
        common: Common,
    },
    /// Search for a schedule maximizing activations.
    Worstcase {
        #[command(flatten)]
        common: Common,
        /// Number of schedule evaluations.
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: usize,
    },
    /// Exhaustively check the coin-tossing properties.
    Lemmas {
        #[arg(long, hide = true)]
        negative_control: bool,
    },
}

/// Parses `args` (including the program name), runs the subcommand and
/// returns the exit code.
pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let sink: &mut dyn Write = if e.use_stderr() { err } else { out };
            let _ = write!(sink, "{}", e.render());
            return code;
        }
    };
    let env_seed = std::env::var("WFC_SEED").ok().and_then(|s| s.trim().parse().ok());
    match dispatch(cli.cmd, env_seed, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_USAGE
        }
    }
}

fn dispatch(cmd: Cmd, env_seed: Option<u64>, out: &mut dyn Write) -> Result<i32, CliError> {
    let resolve = |c: Common| -> Result<ExperimentConfig, CliError> {
        let base = match &c.config {
            Some(p) => PartialConfig::load(p)?,
            None => PartialConfig::default(),
        };
        base.overlay(c.values).resolve(env_seed)
    };
    match cmd {
        Cmd::Run { common, from_trace: Some(path) } => {
            let trace_out = common.values.trace.clone();
            cmd_replay(&path, trace_out.as_deref(), out)
        }
        Cmd::Run { common, from_trace: None } => cmd_run(&resolve(common)?, out),
        Cmd::Sweep { common } => cmd_sweep(&resolve(common)?, out),
        Cmd::Mc { common } => cmd_mc(&resolve(common)?, out),
        Cmd::Worstcase { common, budget } => cmd_worstcase(&resolve(common)?, budget, out),
        Cmd::Lemmas { negative_control } => cmd_lemmas(negative_control, out),
    }
}

/// Audits that can be computed without retaining the steps of a run.
struct StreamAudits {
    xhat: Option<XhatMonitor>,
}

impl StreamAudits {
    fn new(protocol: Protocol) -> Self {
        StreamAudits { xhat: (protocol == Protocol::Fast5).then(XhatMonitor::default) }
    }

    fn observe(&mut self, ex: &Execution, step: &StepRecord) {
        if let Some(m) = &mut self.xhat {
            m.observe(ex.graph(), ex.registers(), step);
        }
    }

    fn finish(self) -> Vec<AuditReport> {
        self.xhat.map(|m| m.report).into_iter().collect()
    }
}

/// Coloring, palette and bound audits over a finished run. `tr.steps` may be
/// empty when the run was streamed; step-based audits are then skipped.
fn outcome_audits(tr: &Trace, bound: Option<u32>, full: bool) -> Result<Vec<AuditReport>, CliError> {
    let g = &tr.header.graph;
    let p = tr.header.protocol;
    let mut reports =
        vec![check_proper_coloring(g, &tr.outcome.outputs), check_palette(&tr.outcome.outputs, p, g.max_degree())];
    match (bound, p) {
        (Some(b), _) => reports.push(global_bound_audit(tr, b)),
        (None, Protocol::Slow6 | Protocol::Slow5) => reports.push(activation_bound_audit(tr).map_err(core)?),
        (None, Protocol::Fast5) => reports.push(global_bound_audit(tr, FAST5_ACTIVATION_CEILING)),
        (None, Protocol::DeltaSq) => {}
    }
    if full {
        match p {
            Protocol::Slow6 => {
                reports.push(parity_audit(tr).map_err(core)?);
                reports.push(sets_ab_exclude_audit(tr).map_err(core)?);
                reports.push(ab_monotone_audit(tr).map_err(core)?);
            }
            Protocol::Slow5 => reports.push(stop_rule_audit(tr).map_err(core)?),
            _ => {}
        }
    }
    Ok(reports)
}

struct RunResult {
    outcome: Outcome,
    reports: Vec<AuditReport>,
}

/// Executes one run, streaming the trace to `trace_out` if given.
fn execute(
    header: TraceHeader,
    ids: IdAssignment,
    sched: &Scheduler,
    trace_out: Option<&Path>,
    bound: Option<u32>,
) -> Result<RunResult, CliError> {
    let graph = Arc::new(header.graph.clone());
    let n = graph.node_count();
    let full = n <= FULL_AUDIT_MAX_NODES;
    let mut ex = Execution::new(graph, ids, header.protocol).map_err(core)?.with_seed(header.seed);
    let mut writer = match trace_out {
        Some(path) => Some(TraceWriter::new(BufWriter::new(File::create(path)?), &header).map_err(core)?),
        None => None,
    };
    let mut stream = StreamAudits::new(header.protocol);
    let mut steps = Vec::new();
    let mut write_err = None;
    let outcome = ex
        .run_streaming(sched, header.horizon, |ex, step| {
            stream.observe(ex, step);
            if let Some(w) = &mut writer {
                if let Err(e) = w.step(step) {
                    write_err.get_or_insert(e);
                }
            }
            if full {
                steps.push(step.clone());
            }
        })
        .map_err(core)?;
    if let Some(e) = write_err {
        return Err(core(e));
    }
    if let Some(w) = writer {
        w.finish(&outcome).map_err(core)?;
    }
    let tr = Trace { header, steps, outcome };
    let mut reports = outcome_audits(&tr, bound, full)?;
    reports.extend(stream.finish());
    Ok(RunResult { outcome: tr.outcome, reports })
}

fn print_run(out: &mut dyn Write, header: &TraceHeader, r: &RunResult) -> Result<i32, CliError> {
    let o = &r.outcome;
    writeln!(out, "protocol\t{}", header.protocol)?;
    writeln!(out, "n\t{}", header.graph.node_count())?;
    writeln!(out, "sched\t{}", header.sched)?;
    writeln!(out, "horizon\t{}", header.horizon)?;
    writeln!(out, "terminated\t{}", o.terminated)?;
    writeln!(out, "steps\t{}", o.steps)?;
    writeln!(out, "tstar\t{}", o.tstar.map_or("-".to_string(), |t| t.to_string()))?;
    let rc = if o.terminated { o.max_activations().to_string() } else { "-".to_string() };
    writeln!(out, "round_complexity\t{rc}")?;
    writeln!(out, "max_activations\t{}", o.max_activations())?;
    writeln!(out, "returned\t{}", o.outputs.iter().filter(|c| c.is_some()).count())?;
    for rep in &r.reports {
        writeln!(out, "audit\t{rep}")?;
    }
    let ok = o.terminated && r.reports.iter().all(AuditReport::pass);
    writeln!(out, "verdict\t{}", if ok { "PASS" } else { "FAIL" })?;
    Ok(if ok { EXIT_OK } else { EXIT_FAIL })
}

pub fn cmd_run(cfg: &ExperimentConfig, out: &mut dyn Write) -> Result<i32, CliError> {
    let graph = cfg.graph()?;
    if cfg.protocol.cycle_only() && !graph.is_cycle() {
        return Err(usage(format!("protocol {} requires a cycle graph", cfg.protocol)));
    }
    let ids = cfg.ids_for(&graph, 0)?;
    let desc = cfg.sched_for(0);
    let n = graph.node_count();
    let sched = Scheduler::new(desc, n).map_err(core)?;
    let header = TraceHeader {
        horizon: cfg.horizon_for(n, sched.descriptor()),
        sched: sched.descriptor().to_string(),
        ids: ids.ids.clone(),
        id_kind: ids.kind,
        protocol: cfg.protocol,
        seed: cfg.seed,
        graph,
    };
    let r = execute(header.clone(), ids, &sched, cfg.trace.as_deref(), cfg.bound)?;
    print_run(out, &header, &r)
}

fn read_header(path: &Path) -> Result<TraceHeader, CliError> {
    let f = File::open(path).map_err(|e| usage(format!("cannot open trace {}: {e}", path.display())))?;
    let mut first = String::new();
    BufReader::new(f).read_line(&mut first)?;
    serde_json::from_str(&first).map_err(|e| usage(format!("bad trace header in {}: {e}", path.display())))
}

/// Re-executes a stored trace header; with `trace_out` the new trace is
/// byte-identical to the stored one.
pub fn cmd_replay(path: &Path, trace_out: Option<&Path>, out: &mut dyn Write) -> Result<i32, CliError> {
    let header = read_header(path)?;
    let ids = IdAssignment::new(&header.graph, header.ids.clone(), header.id_kind).map_err(core)?;
    let desc: SchedulerDescriptor = header.sched.parse().map_err(core)?;
    let sched = Scheduler::new(desc, header.graph.node_count()).map_err(core)?;
    let r = execute(header.clone(), ids, &sched, trace_out, None)?;
    print_run(out, &header, &r)
}

/// Per-trial statistics of a sweep.
#[derive(Clone, Debug)]
pub struct TrialStats {
    pub trial: u64,
    pub seed: u64,
    pub terminated: bool,
    pub steps: u64,
    pub max_activations: u32,
    pub median_activations: u32,
    pub reports: Vec<AuditReport>,
}

impl TrialStats {
    pub fn violations(&self) -> usize {
        self.reports.iter().map(|r| r.violations.len()).sum::<usize>() + usize::from(!self.terminated)
    }
}

fn median(values: &[u32]) -> u32 {
    if values.is_empty() {
        return 0;
    }
    let mut v = values.to_vec();
    let mid = (v.len() - 1) / 2;
    *v.select_nth_unstable(mid).1
}

pub fn run_trial(cfg: &ExperimentConfig, graph: &Graph, trial: u64) -> Result<TrialStats, CliError> {
    let ids = cfg.ids_for(graph, trial)?;
    let n = graph.node_count();
    let sched = Scheduler::new(cfg.sched_for(trial), n).map_err(core)?;
    let seed = trial_seed(cfg.seed, trial);
    let header = TraceHeader {
        graph: graph.clone(),
        ids: ids.ids.clone(),
        id_kind: ids.kind,
        protocol: cfg.protocol,
        sched: sched.descriptor().to_string(),
        seed,
        horizon: cfg.horizon_for(n, sched.descriptor()),
    };
    let r = execute(header, ids, &sched, None, cfg.bound)?;
    Ok(TrialStats {
        trial,
        seed,
        terminated: r.outcome.terminated,
        steps: r.outcome.steps,
        max_activations: r.outcome.max_activations(),
        median_activations: median(&r.outcome.activations),
        reports: r.reports,
    })
}

pub fn cmd_sweep(cfg: &ExperimentConfig, out: &mut dyn Write) -> Result<i32, CliError> {
    let graph = cfg.graph()?;
    if cfg.protocol.cycle_only() && !graph.is_cycle() {
        return Err(usage(format!("protocol {} requires a cycle graph", cfg.protocol)));
    }
    let stats: Vec<TrialStats> =
        (0..cfg.trials).into_par_iter().map(|i| run_trial(cfg, &graph, i)).collect::<Result<_, _>>()?;

    writeln!(out, "trial\tseed\tterminated\tsteps\tmax_activations\tmedian_activations\tviolations")?;
    for s in &stats {
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            s.trial,
            s.seed,
            s.terminated,
            s.steps,
            s.max_activations,
            s.median_activations,
            s.violations()
        )?;
    }
    if let Some(path) = &cfg.trace {
        let mut w = BufWriter::new(File::create(path)?);
        for s in &stats {
            for r in &s.reports {
                w.write_all(r.to_jsonl().as_bytes())?;
            }
        }
        w.flush()?;
    }
    let maxima: Vec<u32> = stats.iter().map(|s| s.max_activations).collect();
    let violations: usize = stats.iter().map(TrialStats::violations).sum();
    let bound = cfg.bound.or_else(|| declared_activation_bound(cfg.protocol, graph.node_count()));
    let worst = maxima.iter().copied().max().unwrap_or(0);
    writeln!(out, "aggregate\ttrials\t{}", stats.len())?;
    writeln!(out, "aggregate\tterminated\t{}", stats.iter().filter(|s| s.terminated).count())?;
    writeln!(out, "aggregate\tmax_activations\t{worst}")?;
    writeln!(out, "aggregate\tmedian_max_activations\t{}", median(&maxima))?;
    writeln!(out, "aggregate\tbound\t{}", bound.map_or("-".to_string(), |b| b.to_string()))?;
    writeln!(out, "aggregate\tviolations\t{violations}")?;
    let ok = violations == 0 && bound.is_none_or(|b| worst <= b);
    writeln!(out, "verdict\t{}", if ok { "PASS" } else { "FAIL" })?;
    Ok(if ok { EXIT_OK } else { EXIT_FAIL })
}

pub fn cmd_mc(cfg: &ExperimentConfig, out: &mut dyn Write) -> Result<i32, CliError> {
    let graph = cfg.graph()?;
    let n = graph.node_count();
    if n > crate::schedulers::MC_MAX_NODES {
        return Err(usage(format!("mc supports at most {} nodes, got {n}", crate::schedulers::MC_MAX_NODES)));
    }
    let bound = cfg
        .bound
        .or_else(|| declared_activation_bound(cfg.protocol, n))
        .ok_or_else(|| usage(format!("--bound is required for {}", cfg.protocol)))?;
    let ids = cfg.ids_for(&graph, 0)?;
    let report = exhaustive_check(&Arc::new(graph), &ids, cfg.protocol, bound).map_err(core)?;
    writeln!(out, "protocol\t{}", cfg.protocol)?;
    writeln!(out, "n\t{n}")?;
    let id_text: Vec<String> = ids.ids.iter().map(u64::to_string).collect();
    writeln!(out, "ids\t{}", id_text.join(","))?;
    writeln!(out, "bound\t{bound}")?;
    writeln!(out, "explored\t{}", report.explored)?;
    writeln!(out, "memo_hits\t{}", report.memo_hits)?;
    writeln!(out, "max_activations\t{}", report.max_activations)?;
    writeln!(out, "safety_violations\t{}", report.safety_violations.len())?;
    writeln!(out, "bound_violations\t{}", report.bound_violations.len())?;
    for path in &report.safety_violations {
        writeln!(out, "counterexample\t{}", format_replay(path).trim_end().replace('\n', " | "))?;
    }
    writeln!(out, "verdict\t{}", if report.pass { "PASS" } else { "FAIL" })?;
    if let Some(path) = &cfg.trace {
        let json = serde_json::to_string(&report).map_err(|e| core(crate::engine::EngineError::from(e)))?;
        std::fs::write(path, json + "\n")?;
    }
    Ok(if report.pass { EXIT_OK } else { EXIT_FAIL })
}

pub fn cmd_worstcase(cfg: &ExperimentConfig, budget: usize, out: &mut dyn Write) -> Result<i32, CliError> {
    let graph = cfg.graph()?;
    if cfg.protocol.cycle_only() && !graph.is_cycle() {
        return Err(usage(format!("protocol {} requires a cycle graph", cfg.protocol)));
    }
    if budget == 0 {
        return Err(usage("--budget must be at least 1"));
    }
    let n = graph.node_count();
    let ids = cfg.ids_for(&graph, 0)?;
    let found = worst_case_search(&Arc::new(graph), &ids, cfg.protocol, budget, cfg.seed).map_err(core)?;
    let bound = cfg.bound.or_else(|| declared_activation_bound(cfg.protocol, n));
    writeln!(out, "protocol\t{}", cfg.protocol)?;
    writeln!(out, "n\t{n}")?;
    writeln!(out, "evaluations\t{}", found.evaluations)?;
    writeln!(out, "max_activations\t{}", found.max_activations)?;
    writeln!(out, "bound\t{}", bound.map_or("-".to_string(), |b| b.to_string()))?;
    if let (Some(path), SchedulerDescriptor::Replay { sets, .. }) = (&cfg.trace, &found.descriptor) {
        std::fs::write(path, format_replay(sets))?;
    }
    let ok = bound.is_none_or(|b| found.max_activations <= b);
    writeln!(out, "verdict\t{}", if ok { "PASS" } else { "FAIL" })?;
    Ok(if ok { EXIT_OK } else { EXIT_FAIL })
}

pub fn cmd_lemmas(negative_control: bool, out: &mut dyn Write) -> Result<i32, CliError> {
    let mut suite = cointoss::lemma_suite();
    if negative_control {
        suite[0] = cointoss::check_contraction_with(cointoss::DEFAULT_CONTRACTION_LIMIT, |x, y| cv_reduce(x, y) >= y);
    }
    writeln!(out, "lemma\tchecked\tcounterexamples\tverdict")?;
    for r in &suite {
        writeln!(
            out,
            "{}\t{}\t{}\t{}",
            r.name,
            r.checked,
            r.counterexamples.len(),
            if r.passed() { "PASS" } else { "FAIL" }
        )?;
        for c in &r.counterexamples {
            let parts: Vec<String> = c.iter().map(u64::to_string).collect();
            writeln!(out, "counterexample\t{}\t{}", r.name, parts.join(","))?;
        }
    }
    let ok = suite.iter().all(LemmaReport::passed);
    Ok(if ok { EXIT_OK } else { EXIT_FAIL })
}

//! Step semantics of the shared-register model and execution traces.
//!
//! A step activates a set of processes. Processes that already returned are
//! filtered out; every remaining (working) process writes its register, then
//! all of them read their neighbors' registers, then all of them apply their
//! transition. Readers therefore always see same-step writes of neighbors.

use std::io::{BufRead, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::model::{Graph, IdAssignment, IdKind, ModelError, NodeId};
use crate::protocols::{
    activate, Color, Counter, Decision, Protocol, ProtocolError, ProtocolState, RegisterRecord, View,
};
use crate::schedulers::{Scheduler, SchedulerDescriptor};

#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error(transparent)]
    Ids(#[from] ModelError),
    #[error("protocol {0} requires a cycle graph")]
    TopologyMismatch(Protocol),
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("horizon must be at least 1")]
    ZeroHorizon,
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error("malformed trace: {0}")]
    Trace(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// What happened during one time step.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StepRecord {
    pub t: u64,
    /// `σ(t)`, sorted and deduplicated; may contain returned processes.
    pub activated: Vec<NodeId>,
    /// Register writes of the working processes (`σ̄(t)`), in node order.
    pub writes: Vec<(NodeId, RegisterRecord)>,
    pub reads: Vec<(NodeId, Vec<View>)>,
    pub decisions: Vec<(NodeId, Decision)>,
}

impl StepRecord {
    /// `σ̄(t)`.
    pub fn working(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.writes.iter().map(|&(p, _)| p)
    }
}

/// Final state of a run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Outcome {
    pub outputs: Vec<Option<Color>>,
    /// Working activations per node.
    pub activations: Vec<u32>,
    pub terminated: bool,
    /// Last time step with a working process.
    pub tstar: Option<u64>,
    /// Number of steps executed.
    pub steps: u64,
}

impl Outcome {
    pub fn max_activations(&self) -> u32 {
        self.activations.iter().copied().max().unwrap_or(0)
    }
}

/// Everything needed to reproduce a run.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub graph: Graph,
    pub ids: Vec<u64>,
    pub id_kind: IdKind,
    pub protocol: Protocol,
    pub sched: String,
    pub seed: u64,
    pub horizon: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trace {
    pub header: TraceHeader,
    pub steps: Vec<StepRecord>,
    pub outcome: Outcome,
}

/// Mutable state of a simulated run.
#[derive(Clone, Debug)]
pub struct Execution {
    graph: Arc<Graph>,
    ids: IdAssignment,
    protocol: Protocol,
    registers: Vec<View>,
    locals: Vec<ProtocolState>,
    returned: Vec<Option<Color>>,
    activations: Vec<u32>,
    remaining: usize,
    time: u64,
    last_working: Option<u64>,
    seed: u64,
}

impl Execution {
    pub fn new(graph: Arc<Graph>, ids: IdAssignment, protocol: Protocol) -> Result<Self, EngineError> {
        ids.validate(&graph)?;
        if protocol.cycle_only() && !graph.is_cycle() {
            return Err(EngineError::TopologyMismatch(protocol));
        }
        let n = graph.node_count();
        let locals = ids.ids.iter().map(|&x| ProtocolState::initial(protocol, x)).collect();
        Ok(Execution {
            graph,
            ids,
            protocol,
            registers: vec![None; n],
            locals,
            returned: vec![None; n],
            activations: vec![0; n],
            remaining: n,
            time: 0,
            last_working: None,
            seed: 0,
        })
    }

    /// Seed recorded in the trace header (the identifier-generation seed).
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn graph(&self) -> &Arc<Graph> {
        &self.graph
    }

    pub fn ids(&self) -> &IdAssignment {
        &self.ids
    }

    pub fn protocol(&self) -> Protocol {
        self.protocol
    }

    pub fn registers(&self) -> &[View] {
        &self.registers
    }

    pub fn locals(&self) -> &[ProtocolState] {
        &self.locals
    }

    pub fn returned(&self) -> &[Option<Color>] {
        &self.returned
    }

    pub fn activations(&self) -> &[u32] {
        &self.activations
    }

    pub fn time(&self) -> u64 {
        self.time
    }

    pub fn is_working(&self, p: NodeId) -> bool {
        self.returned[p].is_none()
    }

    pub fn all_returned(&self) -> bool {
        self.remaining == 0
    }

    /// Executes one time step with `σ(t) = activated`.
    pub fn apply_step(&mut self, activated: &[NodeId]) -> Result<StepRecord, EngineError> {
        let n = self.graph.node_count();
        if let Some(&p) = activated.iter().find(|&&p| p >= n) {
            return Err(EngineError::UnknownNode(p));
        }
        let mut activated = activated.to_vec();
        activated.sort_unstable();
        activated.dedup();
        self.time += 1;
        let working: Vec<NodeId> = activated.iter().copied().filter(|&p| self.is_working(p)).collect();

        let writes: Vec<(NodeId, RegisterRecord)> = working.iter().map(|&p| (p, self.locals[p].publish())).collect();
        for &(p, rec) in &writes {
            self.registers[p] = Some(rec);
        }
        let reads: Vec<(NodeId, Vec<View>)> = working
            .iter()
            .map(|&p| (p, self.graph.neighbors(p).iter().map(|&q| self.registers[q]).collect()))
            .collect();
        let mut decisions = Vec::with_capacity(working.len());
        for (p, views) in &reads {
            let d = activate(&self.locals[*p], views)?;
            decisions.push((*p, d));
        }
        for &(p, d) in &decisions {
            self.activations[p] += 1;
            match d {
                Decision::Return(c) => {
                    self.returned[p] = Some(c);
                    self.remaining -= 1;
                }
                Decision::Continue(next) => self.locals[p] = next,
            }
        }
        if !working.is_empty() {
            self.last_working = Some(self.time);
        }
        Ok(StepRecord { t: self.time, activated, writes, reads, decisions })
    }

    /// True when no process can ever work again under `sched`.
    fn quiescent(&self, sched: &Scheduler) -> bool {
        if self.remaining == 0 {
            return true;
        }
        if sched.never_crashes() {
            return false;
        }
        (0..self.graph.node_count()).all(|p| !self.is_working(p) || sched.is_crashed(p, self.time + 1))
    }

    pub fn outcome(&self, terminated: bool) -> Outcome {
        Outcome {
            outputs: self.returned.clone(),
            activations: self.activations.clone(),
            terminated,
            tstar: self.last_working,
            steps: self.time,
        }
    }

    /// Runs until every process has returned or will never be activated
    /// again, or until `horizon` steps have elapsed. Steps are handed to
    /// `on_step` and dropped.
    pub fn run_streaming(
        &mut self,
        sched: &Scheduler,
        horizon: u64,
        mut on_step: impl FnMut(&Execution, &StepRecord),
    ) -> Result<Outcome, EngineError> {
        if horizon == 0 {
            return Err(EngineError::ZeroHorizon);
        }
        while self.time < horizon && !self.quiescent(sched) {
            let sigma = sched.sigma(self.time + 1);
            let rec = self.apply_step(&sigma)?;
            on_step(self, &rec);
        }
        let terminated = self.quiescent(sched);
        Ok(self.outcome(terminated))
    }

    pub fn run(&mut self, sched: &Scheduler, horizon: u64) -> Result<Trace, EngineError> {
        let header = TraceHeader {
            graph: (*self.graph).clone(),
            ids: self.ids.ids.clone(),
            id_kind: self.ids.kind,
            protocol: self.protocol,
            sched: sched.descriptor().to_string(),
            seed: self.seed,
            horizon,
        };
        let mut steps = Vec::new();
        let outcome = self.run_streaming(sched, horizon, |_, rec| steps.push(rec.clone()))?;
        Ok(Trace { header, steps, outcome })
    }
}

/// Incremental JSONL writer, so long runs need not hold their steps.
pub struct TraceWriter<W: Write> {
    out: W,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(mut out: W, header: &TraceHeader) -> Result<Self, EngineError> {
        serde_json::to_writer(&mut out, header)?;
        out.write_all(b"\n")?;
        Ok(TraceWriter { out })
    }

    pub fn step(&mut self, step: &StepRecord) -> Result<(), EngineError> {
        serde_json::to_writer(&mut self.out, &step_to_json(step))?;
        self.out.write_all(b"\n")?;
        Ok(())
    }

    pub fn finish(mut self, o: &Outcome) -> Result<W, EngineError> {
        let out: Vec<Value> = o.outputs.iter().enumerate().filter_map(|(p, c)| c.map(|c| json!([p, c]))).collect();
        serde_json::to_writer(
            &mut self.out,
            &json!({
                "out": out,
                "tstar": o.tstar,
                "terminated": o.terminated,
                "activations": o.activations,
                "steps": o.steps,
            }),
        )?;
        self.out.write_all(b"\n")?;
        self.out.flush()?;
        Ok(self.out)
    }
}

/// Default step budget: `20n + 200` for the linear-time protocols and 400
/// for `fast5`, scaled by how many steps a process waits between
/// activations under the given scheduler.
pub fn default_horizon(protocol: Protocol, n: usize, sched: &SchedulerDescriptor) -> u64 {
    let base = match protocol {
        Protocol::Fast5 => 400,
        _ => 20 * n as u64 + 200,
    };
    fn spread(d: &SchedulerDescriptor, n: usize) -> Option<u64> {
        match d {
            SchedulerDescriptor::Synchronous => Some(1),
            SchedulerDescriptor::RoundRobin => Some(n as u64),
            SchedulerDescriptor::Random { p_act, .. } => Some((1.0 / p_act).ceil() as u64),
            SchedulerDescriptor::Crash { base, .. } => spread(base, n),
            SchedulerDescriptor::Replay { .. } => None,
        }
    }
    match (spread(sched, n), sched) {
        (Some(k), _) => base * k,
        (None, SchedulerDescriptor::Replay { sets, .. }) => sets.len().max(1) as u64,
        (None, SchedulerDescriptor::Crash { base: inner, .. }) => default_horizon(protocol, n, inner),
        (None, _) => base,
    }
}

impl Trace {
    /// Re-executes the header's inputs.
    pub fn replay(&self) -> Result<Trace, crate::Error> {
        let h = &self.header;
        let graph = Arc::new(h.graph.clone());
        let ids = IdAssignment::new(&graph, h.ids.clone(), h.id_kind)?;
        let sched = Scheduler::new(h.sched.parse()?, graph.node_count())?;
        Ok(Execution::new(graph, ids, h.protocol)?.with_seed(h.seed).run(&sched, h.horizon)?)
    }

    pub fn node_count(&self) -> usize {
        self.header.graph.node_count()
    }

    /// Line-delimited JSON: header, one line per step, then the outcome.
    pub fn write_jsonl(&self, w: impl Write) -> Result<(), EngineError> {
        let mut writer = TraceWriter::new(w, &self.header)?;
        for step in &self.steps {
            writer.step(step)?;
        }
        writer.finish(&self.outcome)?;
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("JSON is UTF-8")
    }

    pub fn read_jsonl(r: impl BufRead) -> Result<Trace, EngineError> {
        let lines: Vec<String> = r.lines().collect::<Result<_, _>>()?;
        let lines: Vec<&str> = lines.iter().map(|l| l.trim()).filter(|l| !l.is_empty()).collect();
        let (first, rest) = lines.split_first().ok_or_else(|| EngineError::Trace("empty trace".into()))?;
        let header: TraceHeader = serde_json::from_str(first)?;
        let (last, body) = rest.split_last().ok_or_else(|| EngineError::Trace("missing outcome line".into()))?;
        let steps = body
            .iter()
            .map(|l| step_from_json(header.protocol, &serde_json::from_str(l)?))
            .collect::<Result<Vec<_>, _>>()?;
        let outcome = outcome_from_json(header.graph.node_count(), &serde_json::from_str(last)?)?;
        Ok(Trace { header, steps, outcome })
    }
}

#[derive(Serialize, Deserialize)]
struct WireRecord {
    x: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    r: Option<Counter>,
    a: u32,
    b: u32,
}

impl From<&RegisterRecord> for WireRecord {
    fn from(rec: &RegisterRecord) -> Self {
        WireRecord { x: rec.x, r: rec.r, a: rec.a, b: rec.b }
    }
}

impl WireRecord {
    fn into_record(self, protocol: Protocol) -> RegisterRecord {
        RegisterRecord { protocol, x: self.x, a: self.a, b: self.b, r: self.r }
    }

    fn into_state(self, protocol: Protocol) -> ProtocolState {
        ProtocolState { protocol, x: self.x, a: self.a, b: self.b, r: self.r.unwrap_or(Counter::ZERO) }
    }
}

#[derive(Serialize, Deserialize)]
enum WireDecision {
    #[serde(rename = "ret")]
    Return(Color),
    #[serde(rename = "cont")]
    Continue(WireRecord),
}

fn step_to_json(step: &StepRecord) -> Value {
    let w: Vec<Value> = step.writes.iter().map(|(p, rec)| json!([p, WireRecord::from(rec)])).collect();
    let rd: Vec<Value> = step
        .reads
        .iter()
        .map(|(p, views)| {
            let views: Vec<Option<WireRecord>> = views.iter().map(|v| v.as_ref().map(WireRecord::from)).collect();
            json!([p, views])
        })
        .collect();
    let dec: Vec<Value> = step
        .decisions
        .iter()
        .map(|(p, d)| {
            let d = match d {
                Decision::Return(c) => WireDecision::Return(*c),
                Decision::Continue(s) => WireDecision::Continue(WireRecord::from(&s.publish())),
            };
            json!([p, d])
        })
        .collect();
    json!({ "t": step.t, "act": step.activated, "w": w, "rd": rd, "dec": dec })
}

fn step_from_json(protocol: Protocol, v: &Value) -> Result<StepRecord, EngineError> {
    #[derive(Deserialize)]
    struct WireStep {
        t: u64,
        act: Vec<NodeId>,
        w: Vec<(NodeId, WireRecord)>,
        rd: Vec<(NodeId, Vec<Option<WireRecord>>)>,
        dec: Vec<(NodeId, WireDecision)>,
    }
    let s = WireStep::deserialize(v)?;
    Ok(StepRecord {
        t: s.t,
        activated: s.act,
        writes: s.w.into_iter().map(|(p, r)| (p, r.into_record(protocol))).collect(),
        reads: s
            .rd
            .into_iter()
            .map(|(p, vs)| (p, vs.into_iter().map(|v| v.map(|r| r.into_record(protocol))).collect()))
            .collect(),
        decisions: s
            .dec
            .into_iter()
            .map(|(p, d)| {
                let d = match d {
                    WireDecision::Return(c) => Decision::Return(c),
                    WireDecision::Continue(r) => Decision::Continue(r.into_state(protocol)),
                };
                (p, d)
            })
            .collect(),
    })
}

fn outcome_from_json(n: usize, v: &Value) -> Result<Outcome, EngineError> {
    #[derive(Deserialize)]
    struct WireOutcome {
        out: Vec<(NodeId, Color)>,
        tstar: Option<u64>,
        terminated: bool,
        activations: Vec<u32>,
        steps: u64,
    }
    let o = WireOutcome::deserialize(v)?;
    let mut outputs = vec![None; n];
    for (p, c) in o.out {
        *outputs.get_mut(p).ok_or(EngineError::UnknownNode(p))? = Some(c);
    }
    Ok(Outcome { outputs, activations: o.activations, terminated: o.terminated, tstar: o.tstar, steps: o.steps })
}

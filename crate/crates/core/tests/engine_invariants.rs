use std::collections::BTreeMap;
use std::sync::Arc;

use proptest::prelude::*;

use wfcolor::analysis::{check_palette, check_proper_coloring};
use wfcolor::engine::{default_horizon, Execution, Trace};
use wfcolor::model::{random_unique_ids, Graph, IdAssignment};
use wfcolor::protocols::{Decision, Protocol};
use wfcolor::schedulers::{Scheduler, SchedulerDescriptor};

fn ring_protocol() -> impl Strategy<Value = Protocol> {
    prop_oneof![Just(Protocol::Slow6), Just(Protocol::Slow5), Just(Protocol::Fast5)]
}

fn base_sched() -> impl Strategy<Value = SchedulerDescriptor> {
    prop_oneof![
        Just(SchedulerDescriptor::Synchronous),
        Just(SchedulerDescriptor::RoundRobin),
        (0.2f64..=1.0, any::<u64>()).prop_map(|(p_act, seed)| SchedulerDescriptor::Random { p_act, seed }),
    ]
}

fn run(g: &Arc<Graph>, ids: &IdAssignment, protocol: Protocol, desc: SchedulerDescriptor) -> Trace {
    let n = g.node_count();
    let horizon = default_horizon(protocol, n, &desc);
    let sched = Scheduler::new(desc, n).unwrap();
    Execution::new(g.clone(), ids.clone(), protocol).unwrap().run(&sched, horizon).unwrap()
}

fn ring(n: usize, seed: u64) -> (Arc<Graph>, IdAssignment) {
    let g = Graph::cycle(n).unwrap();
    let ids = random_unique_ids(&g, (n * n * n) as u64, seed).unwrap();
    (Arc::new(g), ids)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn registers_hold_last_write_and_counters_count_working_steps(
        n in 3usize..12, seed: u64, protocol in ring_protocol(), desc in base_sched(),
    ) {
        let (g, ids) = ring(n, seed);
        let sched = Scheduler::new(desc, n).unwrap();
        let mut ex = Execution::new(g.clone(), ids, protocol).unwrap();
        let mut last_write = vec![None; n];
        let mut counts = vec![0u32; n];
        for t in 1..=200 {
            if ex.all_returned() {
                break;
            }
            let before: Vec<bool> = (0..n).map(|p| ex.is_working(p)).collect();
            let step = ex.apply_step(&sched.sigma(t)).unwrap();
            prop_assert_eq!(step.t, t);
            for p in step.working() {
                prop_assert!(before[p]);
                counts[p] += 1;
            }
            for &(p, rec) in &step.writes {
                last_write[p] = Some(rec);
            }
            prop_assert_eq!(ex.registers(), last_write.as_slice());
            prop_assert_eq!(ex.activations(), counts.as_slice());
            for (p, views) in &step.reads {
                let expected: Vec<_> = g.neighbors(*p).iter().map(|&q| last_write[q]).collect();
                prop_assert_eq!(views, &expected);
            }
            for &(p, d) in &step.decisions {
                if let Decision::Return(c) = d {
                    prop_assert_eq!(ex.returned()[p], Some(c));
                }
            }
        }
    }

    #[test]
    fn runs_are_deterministic_and_replayable(
        n in 3usize..12, seed: u64, protocol in ring_protocol(), desc in base_sched(),
    ) {
        let (g, ids) = ring(n, seed);
        let a = run(&g, &ids, protocol, desc.clone());
        let b = run(&g, &ids, protocol, desc.clone());
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(&a.replay().unwrap(), &a);

        let sched = Scheduler::new(desc, n).unwrap();
        let replay = sched.materialize(a.outcome.steps);
        let c = run(&g, &ids, protocol, replay);
        prop_assert_eq!(&c.steps, &a.steps);
        prop_assert_eq!(&c.outcome.outputs, &a.outcome.outputs);
        prop_assert_eq!(&c.outcome.activations, &a.outcome.activations);
    }

    #[test]
    fn jsonl_round_trip(n in 3usize..10, seed: u64, protocol in ring_protocol(), desc in base_sched()) {
        let (g, ids) = ring(n, seed);
        let tr = run(&g, &ids, protocol, desc);
        let text = tr.to_jsonl();
        let back = Trace::read_jsonl(text.as_bytes()).unwrap();
        prop_assert_eq!(&back, &tr);
        prop_assert_eq!(back.to_jsonl(), text);
    }

    #[test]
    fn crash_equals_removal_from_later_sets(
        n in 3usize..10, seed: u64, protocol in ring_protocol(), desc in base_sched(),
        victim in 0usize..10, at in 0u64..8,
    ) {
        let victim = victim % n;
        let (g, ids) = ring(n, seed);
        let crashed = SchedulerDescriptor::Crash {
            base: Box::new(desc.clone()),
            crash_times: BTreeMap::from([(victim, at)]),
        };
        let a = run(&g, &ids, protocol, crashed);
        let base = Scheduler::new(desc, n).unwrap();
        let sets: Vec<Vec<usize>> = (1..=a.outcome.steps)
            .map(|t| base.sigma(t).into_iter().filter(|&p| p != victim || t < at).collect())
            .collect();
        let b = run(&g, &ids, protocol, SchedulerDescriptor::replay(sets));
        prop_assert_eq!(&a.steps, &b.steps);
        prop_assert_eq!(&a.outcome.outputs, &b.outcome.outputs);
        if at <= 1 {
            prop_assert_eq!(a.outcome.activations[victim], 0);
        }
    }

    #[test]
    fn termination_bookkeeping(n in 3usize..12, seed: u64, protocol in ring_protocol(), desc in base_sched()) {
        let (g, ids) = ring(n, seed);
        let tr = run(&g, &ids, protocol, desc);
        let o = &tr.outcome;
        prop_assert!(o.steps <= tr.header.horizon);
        prop_assert!(o.tstar.is_none_or(|t| t <= o.steps));
        if let Some(t) = o.tstar {
            prop_assert!(tr.steps[t as usize - 1].working().next().is_some());
            prop_assert!(tr.steps[t as usize..].iter().all(|s| s.working().next().is_none()));
        }
        if o.terminated {
            prop_assert!(o.outputs.iter().all(Option::is_some));
        }
        prop_assert!(check_proper_coloring(&g, &o.outputs).pass());
        prop_assert!(check_palette(&o.outputs, protocol, 2).pass());
    }

    #[test]
    fn deltasq_is_safe_on_bounded_degree_graphs(
        n in 4usize..24, max_degree in 3usize..6, extra in 0usize..30, seed: u64, desc in base_sched(),
    ) {
        let g = Arc::new(Graph::random_bounded_degree(n, max_degree, extra, seed).unwrap());
        prop_assert!(g.max_degree() <= max_degree);
        let ids = random_unique_ids(&g, (n * n * n) as u64, seed).unwrap();
        let tr = run(&g, &ids, Protocol::DeltaSq, desc);
        prop_assert!(tr.outcome.terminated);
        prop_assert!(check_proper_coloring(&g, &tr.outcome.outputs).pass());
        prop_assert!(check_palette(&tr.outcome.outputs, Protocol::DeltaSq, g.max_degree()).pass());
    }
}

#[test]
fn synchronous_triangle_chain() {
    let g = Arc::new(Graph::cycle(3).unwrap());
    let ids = IdAssignment::infer(&g, vec![0, 1, 2]).unwrap();
    let tr = run(&g, &ids, Protocol::Slow6, SchedulerDescriptor::Synchronous);
    assert!(tr.outcome.terminated);
    assert_eq!(tr.outcome.tstar, Some(2));
    assert_eq!(tr.outcome.max_activations(), 2);
}

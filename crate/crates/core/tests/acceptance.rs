//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};
use scorecheck_core::attacks::{min_extra_topics, run_scenario, Scenario, ScenarioOptions};
use scorecheck_core::config::{eth, filecoin, Preset};
use scorecheck_core::network::{schedule_heartbeats, subscribe_all, Recording, RunOutcome};
use scorecheck_core::peer::{Event, Payload};
use scorecheck_core::properties::{
    check_prop2, check_prop3, check_prop4, search_counterexample, GeneratorConfig, GoodIncrement, PenaltyDeltas,
    PropertyId,
};
use scorecheck_core::rational::{int, parse, ratio, to_f64};
use scorecheck_core::score::{score_breakdown, topic_score};
use scorecheck_core::topology::{synth_topology, Topology};
use scorecheck_core::{
    calc_score, CounterMaps, GlobalCounters, PeerId, Rational, Simulation, Topic, TopicCounters, Trace, Twp,
};
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::time::{Duration, Instant};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn q() -> PeerId {
    PeerId::from("q")
}

fn counters(rows: &[(&str, [i64; 5])]) -> CounterMaps {
    let mut cm = CounterMaps::default();
    for (t, [mt, fmd, mmd, imd, mfp]) in rows {
        cm.set_topic(&q(), &Topic::from(*t), TopicCounters::new(*mt, *fmd, *mmd, *imd, *mfp));
    }
    cm
}

// 1. Under-delivering neighbor: per-topic and total scores against the published table.
fn score_table() -> Outcome {
    let cm = counters(&[
        ("BLOCKS", [147, 194, 200, 0, 0]),
        ("AGG", [42, 0, 1, 0, 81]),
        ("SUB1", [141, 188, 194, 0, 0]),
        ("SUB2", [42, 0, 1, 0, 1]),
        ("SUB3", [135, 182, 188, 0, 0]),
    ]);
    let shown = [("BLOCKS", 22.21), ("AGG", -4.5), ("SUB1", 7.80), ("SUB2", -25.0), ("SUB3", 7.78)];
    let twp = eth();
    let start = Instant::now();
    let b = score_breakdown(&q(), &cm, &twp);
    let elapsed = start.elapsed();
    for (t, want) in shown {
        let got = to_f64(&b.topics[&Topic::from(t)]);
        ensure((got - want).abs() <= 0.30, format!("{t}: {got} vs {want}"))?;
    }
    let total = to_f64(&b.total);
    ensure((total - 8.29).abs() <= 0.05, format!("total {total} vs 8.29"))?;
    ensure(elapsed < Duration::from_secs(1), format!("took {elapsed:?}"))?;
    Ok(format!("total {total:.4} in {elapsed:?}"))
}

// 2. The topic cap hides a large drop in one topic.
fn cap_hides_penalty() -> Outcome {
    let cm = counters(&[
        ("BLOCKS", [147, 194, 200, 0, 0]),
        ("AGG", [150, 194, 230, 0, 0]),
        ("SUB1", [141, 188, 194, 0, 0]),
        ("SUB2", [110, 180, 232, 0, 0]),
        ("SUB3", [135, 182, 188, 0, 0]),
    ]);
    let primed = counters(&[
        ("BLOCKS", [147, 3, 10, 0, 0]),
        ("AGG", [150, 194, 230, 0, 0]),
        ("SUB1", [141, 188, 194, 0, 0]),
        ("SUB2", [110, 180, 232, 0, 0]),
        ("SUB3", [135, 182, 188, 0, 0]),
    ]);
    let twp = eth();
    let cap = parse("32.72").unwrap();
    let (before, after) = (calc_score(&q(), &cm, &twp), calc_score(&q(), &primed, &twp));
    ensure(before == cap, format!("before {before}"))?;
    ensure(after == cap, format!("after {after}"))?;
    let deltas = PenaltyDeltas {
        first_deliveries_drop: int(191),
        mesh_deliveries_drop: int(190),
        ..Default::default()
    };
    let blocks = Topic::from("BLOCKS");
    let moved = deltas.apply(&cm, &q(), &blocks);
    ensure(
        moved.topic_counters(&q(), &blocks) == primed.topic_counters(&q(), &blocks),
        "perturbation does not give the primed table",
    )?;
    let cx = check_prop2(&cm, &q(), &Topic::from("BLOCKS"), &deltas, &twp).map_err(|e| e.to_string())?;
    ensure(cx.is_some(), "no violation reported")?;
    Ok("both totals exactly 32.72, violation reported".into())
}

fn search(prop: PropertyId, twp: &Twp, seed: u64) -> scorecheck_core::properties::SearchOutcome {
    search_counterexample(prop, twp, &GeneratorConfig::with_seed(seed)).expect("default generator is valid")
}

// 3. Random search finds witnesses for the multi-topic preset and none for the capless one.
fn counterexample_search() -> Outcome {
    let mut notes = Vec::new();
    for prop in [PropertyId::NegativeTopicDominates, PropertyId::PenaltiesLowerScore] {
        let start = Instant::now();
        let mut trials = 0;
        for seed in 0..10 {
            let out = search(prop, &eth(), seed);
            ensure(out.counterexample.is_some(), format!("{prop} eth seed {seed}: no witness"))?;
            ensure(out.trials <= 100_000, format!("{prop} seed {seed}: {} trials", out.trials))?;
            trials += out.trials;
        }
        let avg = start.elapsed() / 10;
        ensure(avg < Duration::from_secs(60), format!("{prop}: {avg:?} per seed"))?;
        notes.push(format!("{prop} eth {:.1} trials/seed", trials as f64 / 10.0));
    }
    let found: Vec<String> = std::thread::scope(|s| {
        let handles: Vec<_> = [PropertyId::NegativeTopicDominates, PropertyId::PenaltiesLowerScore]
            .into_iter()
            .flat_map(|prop| (0..10).map(move |seed| (prop, seed)))
            .map(|(prop, seed)| s.spawn(move || (prop, seed, search(prop, &filecoin(), seed))))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap())
            .filter(|(_, _, out)| out.counterexample.is_some() || out.trials != 100_000)
            .map(|(prop, seed, _)| format!("{prop}/{seed}"))
            .collect()
    });
    ensure(found.is_empty(), format!("filecoin witnesses: {found:?}"))?;
    notes.push("filecoin none in 1e5 x 10 seeds".into());
    Ok(notes.join("; "))
}

fn q_strategy(lo: i64, hi: i64) -> impl Strategy<Value = Rational> {
    (lo..=hi, 1i64..=8).prop_map(|(n, d)| ratio(n, d))
}

// 4. Monotone good counters and deterministic scoring, 1e5 random cases each.
fn universal_properties() -> Outcome {
    const CASES: u32 = 100_000;
    let base = eth().topics[&Topic::from("BLOCKS")].clone();
    let gp = eth().global;
    let params = (
        q_strategy(0, 40),
        q_strategy(0, 40),
        q_strategy(0, 40),
        q_strategy(-400, 0),
        q_strategy(-400, 0),
        1u64..=20,
        (q_strategy(1, 400), q_strategy(1, 400), 0i64..=100, 0i64..=300),
        0u64..=10,
    )
        .prop_map(move |(tw, w1, w2, w3, w3b, quantum, (tcap, fcap, thr, extra), act)| {
            let mut tp = base.clone();
            tp.topic_weight = tw;
            tp.time_in_mesh_weight = w1;
            tp.first_message_deliveries_weight = w2;
            tp.mesh_message_deliveries_weight = w3;
            tp.mesh_failure_penalty_weight = w3b;
            tp.time_in_mesh_quantum = quantum;
            tp.time_in_mesh_cap = tcap;
            tp.first_message_deliveries_cap = fcap;
            tp.mesh_message_deliveries_threshold = int(thr);
            tp.mesh_message_deliveries_cap = int(thr + extra);
            tp.activation_window = act;
            tp
        });
    let case = (params, 1i64..=2000, 0i64..=500, 0i64..=500, 0i64..=50, 0i64..=50, [0i64..=300, 0i64..=300, 0i64..=300]);

    let mut runner = TestRunner::new_with_rng(
        Config { cases: CASES, failure_persistence: None, ..Config::default() },
        proptest::test_runner::TestRng::deterministic_rng(proptest::test_runner::RngAlgorithm::ChaCha),
    );
    runner
        .run(&case, |(tp, extra_time, fmd, mmd, imd, mfp, [dt, df, dm])| {
            // just past the activation window plus some slack
            let mt = (tp.activation_window as i64 + 1) * tp.time_in_mesh_quantum as i64 + extra_time;
            let tc = TopicCounters::new(mt, fmd, mmd, imd, mfp);
            let inc = GoodIncrement { mesh_time: int(dt), first_deliveries: int(df), mesh_deliveries: int(dm) };
            let bumped = TopicCounters::new(mt + dt, fmd + df, mmd + dm, imd, mfp);
            let (before, after) = (topic_score(&tc, &tp, &gp), topic_score(&bumped, &tp, &gp));
            prop_assert!(after >= before, "score fell from {before} to {after}");
            let verdict = check_prop3(&tc, &inc, &tp, &gp).map_err(|e| TestCaseError::fail(e.to_string()))?;
            prop_assert!(verdict.is_none());
            Ok(())
        })
        .map_err(|e| format!("prop3: {e}"))?;

    let presets: Vec<Twp> = Preset::ALL.iter().map(|p| p.build()).collect();
    let twin = PeerId::from("twin");
    let case = (0..presets.len(), proptest::collection::vec([0i64..=400, 0i64..=400, 0i64..=400, 0i64..=20, 0i64..=20], 1..=8), -50i64..=50, 0u64..=8, 0i64..=20);
    let mut runner = TestRunner::new_with_rng(
        Config { cases: CASES, failure_persistence: None, ..Config::default() },
        proptest::test_runner::TestRng::deterministic_rng(proptest::test_runner::RngAlgorithm::ChaCha),
    );
    runner
        .run(&case, |(which, rows, app, ipc, bp)| {
            let twp = &presets[which];
            let mut cm = CounterMaps::default();
            for (t, [mt, f, m, i, p]) in twp.topics.keys().zip(rows.iter().cycle()) {
                let tc = TopicCounters::new(*mt, *f, *m, *i, *p);
                cm.set_topic(&q(), t, tc.clone());
                cm.set_topic(&twin, t, tc);
            }
            let gc = GlobalCounters { app_specific_score: int(app), ip_colocation_count: ipc, behaviour_penalty: int(bp) };
            cm.set_global(&q(), gc.clone());
            cm.set_global(&twin, gc);
            let copy = cm.clone();
            prop_assert_eq!(calc_score(&q(), &cm, twp), calc_score(&twin, &copy, twp));
            let verdict = check_prop4(&cm, &q(), &twin, twp).map_err(|e| TestCaseError::fail(e.to_string()))?;
            prop_assert!(verdict.is_none());
            Ok(())
        })
        .map_err(|e| format!("prop4: {e}"))?;
    Ok(format!("{CASES} cases each, no violations"))
}

// Direct scan over every split of T topics into attacked, served and untouched.
fn scan_extra_topics(i: u64, total: u64) -> Option<u64> {
    let frac = |a: u64| ratio(a as i64, total as i64);
    let base = parse("7.2").unwrap();
    let per_served = parse("3.2").unwrap();
    let per_attacked = parse("24.7").unwrap();
    (0..=total).find(|&t| t + i <= total && &base + &per_served * frac(t) > &per_attacked * frac(i))
}

// 5. Closed-form topic planning against a direct scan.
fn planning_oracle() -> Outcome {
    let mut checked = 0;
    for total in 1..=256u64 {
        for i in 0..=total {
            let (got, want) = (min_extra_topics(i, total), scan_extra_topics(i, total));
            ensure(got == want, format!("i={i} T={total}: {got:?} vs {want:?}"))?;
            checked += 1;
        }
    }
    Ok(format!("{checked} (i, T) pairs agree"))
}

// 6. The blocking attack on three peers.
fn block_attack() -> Outcome {
    let run = run_scenario(Scenario::EthBlockAg1, &ScenarioOptions::default()).map_err(|e| e.to_string())?;
    ensure(run.topology.nodes == 3, format!("{} nodes", run.topology.nodes))?;
    ensure(run.b == 0 && run.f == 10, format!("b={} f={}", run.b, run.f))?;
    ensure(run.outcome == RunOutcome::Quiescent, "budget exhausted")?;
    ensure(run.report.all_violated(), "not every gadget violates")?;
    for g in &run.report.gadgets {
        ensure(g.at_activation_boundary, format!("{} -> {} not at the activation boundary", g.attacker, g.victim))?;
        ensure(g.stable_from.is_some_and(|s| s <= 50), format!("stable from {:?}", g.stable_from))?;
        ensure(g.final_total > int(0), format!("final total {}", g.final_total))?;
    }
    Ok(format!("{} subnets, {} gadget(s) violate at the boundary and settle", run.subnets, run.report.gadgets.len()))
}

fn victim_deliveries(trace: &Trace, victim: &PeerId) -> Vec<(Topic, u64)> {
    trace
        .entries
        .iter()
        .filter(|e| &e.actor == victim)
        .filter_map(|e| match &e.event {
            Event::Receive { msg: Payload::Full { topic, mid, .. }, .. } => Some((topic.clone(), *mid)),
            _ => None,
        })
        .collect()
}

fn reachable(topo: &Topology, from: &BTreeSet<PeerId>, removed: &BTreeSet<PeerId>) -> BTreeSet<PeerId> {
    let mut seen: BTreeSet<PeerId> = from.clone();
    let mut queue: VecDeque<PeerId> = from.iter().cloned().collect();
    while let Some(p) = queue.pop_front() {
        for n in topo.neighbors(&p) {
            if !removed.contains(n) && seen.insert(n.clone()) {
                queue.push_back(n.clone());
            }
        }
    }
    seen
}

fn brute_cut_size(topo: &Topology, victims: &BTreeSet<PeerId>) -> Option<usize> {
    let pool: Vec<PeerId> = topo.nodes().filter(|p| !victims.contains(*p)).cloned().collect();
    (0u32..1 << pool.len())
        .filter_map(|mask| {
            let cut: BTreeSet<PeerId> = (0..pool.len()).filter(|i| mask >> i & 1 == 1).map(|i| pool[i].clone()).collect();
            let left = topo.node_count() - cut.len();
            (reachable(topo, victims, &cut).len() < left).then_some(cut.len())
        })
        .min()
}

fn timed_simulation() -> Result<Duration, String> {
    const EVENTS: u64 = 100_000;
    let twp = eth();
    let topo = synth_topology(200, 10.0, 1);
    let mut sim = Simulation::from_topology(&topo, &subscribe_all(&topo, &twp), &twp, 1).map_err(|e| e.to_string())?;
    sim.recording = Recording::Off;
    let ids: Vec<PeerId> = sim.group.ids().cloned().collect();
    let topics: Vec<Topic> = twp.topics.keys().cloned().collect();
    let mut events = Vec::new();
    let mut mid = 1;
    for r in 0..200 {
        for (k, t) in topics.iter().enumerate() {
            events.push(Event::publish(&ids[(r * 7 + k) % ids.len()], t, mid));
            mid += 1;
        }
        events.extend(schedule_heartbeats(&sim.group, 1));
    }
    let start_steps = sim.steps();
    sim.max_steps = start_steps + EVENTS;
    let start = Instant::now();
    sim.run_segmented(events);
    let elapsed = start.elapsed();
    ensure(sim.steps() - start_steps == EVENTS, format!("only {} events consumed", sim.steps() - start_steps))?;
    ensure(elapsed < Duration::from_secs(300), format!("took {elapsed:?}"))?;
    Ok(elapsed)
}

// 7. Eclipse and partition isolate their victims; a large simulation stays fast.
fn isolation() -> Outcome {
    let eclipse = run_scenario(Scenario::Eclipse, &ScenarioOptions::default()).map_err(|e| e.to_string())?;
    ensure(eclipse.topology.nodes <= 600, format!("{} nodes", eclipse.topology.nodes))?;
    for v in &eclipse.victims {
        let got = victim_deliveries(&eclipse.trace, v);
        let attacked = got.iter().filter(|(t, _)| eclipse.attacked_topics.contains(t)).count();
        let served = got.len() - attacked;
        ensure(attacked == 0, format!("eclipse victim {v} got {attacked} attacked-topic messages"))?;
        ensure(served >= 1, format!("eclipse victim {v} got no other messages"))?;
    }
    ensure(eclipse.report.isolation_holds(), "eclipse cache check failed")?;

    let part = run_scenario(Scenario::Partition, &ScenarioOptions::default()).map_err(|e| e.to_string())?;
    ensure(part.topology.nodes == 12, format!("{} nodes", part.topology.nodes))?;
    let plan = part.partition.as_ref().ok_or("partition run has no plan")?;
    let topo = synth_topology(12, 3.0, part.seed);
    let want = brute_cut_size(&topo, &plan.isolated).ok_or("no separating set exists")?;
    ensure(plan.cut.len() == want, format!("cut {:?} vs brute-force size {want}", plan.cut))?;
    let side = reachable(&topo, &plan.isolated, &plan.cut);
    ensure(side.len() + plan.cut.len() < topo.node_count(), "cut does not separate")?;
    for v in &part.victims {
        let component = reachable(&topo, &[v.clone()].into(), &plan.cut);
        for (t, mid) in victim_deliveries(&part.trace, v) {
            if !part.attacked_topics.contains(&t) {
                continue;
            }
            let origin = part.trace.origins.get(&mid).map(|o| o.peer.clone());
            let near = origin.as_ref().is_some_and(|o| component.contains(o) || plan.cut.contains(o));
            ensure(near, format!("{v} received {t}/{mid} from {origin:?} across the cut"))?;
        }
    }
    ensure(part.report.isolation_holds(), "partition cache check failed")?;

    let elapsed = timed_simulation()?;
    Ok(format!("eclipse victims {:?}; cut {:?}; 100k events in {elapsed:.1?}", eclipse.victims, plan.cut))
}

// 8. Fixed seeds give byte-identical reports.
fn determinism() -> Outcome {
    let search_json = |prop, seed| serde_json::to_string(&search(prop, &eth(), seed)).unwrap();
    for prop in [PropertyId::NegativeTopicDominates, PropertyId::PenaltiesLowerScore] {
        for seed in [0, 5] {
            ensure(search_json(prop, seed) == search_json(prop, seed), format!("{prop} seed {seed} differs"))?;
        }
    }
    let opts = ScenarioOptions::default();
    let mut sizes = BTreeMap::new();
    for sc in [Scenario::EthBlockAg1, Scenario::Eclipse, Scenario::Partition] {
        let a = run_scenario(sc, &opts).map_err(|e| e.to_string())?.to_json();
        let b = run_scenario(sc, &opts).map_err(|e| e.to_string())?.to_json();
        ensure(a == b, format!("{sc} reports differ"))?;
        sizes.insert(sc.to_string(), a.len());
    }
    Ok(format!("identical reports {sizes:?}"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("score table regression", score_table),
        ("topic cap hides a penalty", cap_hides_penalty),
        ("counterexample search", counterexample_search),
        ("monotonicity and determinism", universal_properties),
        ("topic planning oracle", planning_oracle),
        ("blocking attack end to end", block_attack),
        ("eclipse and partition isolation", isolation),
        ("byte-identical reports", determinism),
    ];
    let mut failed = 0;
    for (n, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = std::panic::catch_unwind(check).unwrap_or_else(|e| {
            Err(e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("criterion {}: PASS {name} ({secs:.1}s): {detail}", n + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL {name} ({secs:.1}s): {why}", n + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}

use super::*;
use crate::config::{eth, filecoin, pathological, Preset};
use crate::network::Simulation;
use crate::peer::{Event, Payload};
use crate::rational::{int, parse};
use crate::topology::Topology;
use proptest::prelude::*;
use std::collections::BTreeSet;

fn t(s: &str) -> Topic {
    Topic::from(s)
}

fn q() -> PeerId {
    PeerId::from("q")
}

fn table_one() -> CounterMaps {
    let mut cm = CounterMaps::default();
    cm.set_topic(&q(), &t("BLOCKS"), TopicCounters::new(147, 194, 200, 0, 0));
    cm.set_topic(&q(), &t("AGG"), TopicCounters::new(42, 0, 1, 0, 81));
    cm.set_topic(&q(), &t("SUB1"), TopicCounters::new(141, 188, 194, 0, 0));
    cm.set_topic(&q(), &t("SUB2"), TopicCounters::new(42, 0, 1, 0, 1));
    cm.set_topic(&q(), &t("SUB3"), TopicCounters::new(135, 182, 188, 0, 0));
    cm
}

fn table_three() -> CounterMaps {
    let mut cm = CounterMaps::default();
    cm.set_topic(&q(), &t("BLOCKS"), TopicCounters::new(147, 194, 200, 0, 0));
    cm.set_topic(&q(), &t("AGG"), TopicCounters::new(150, 194, 230, 0, 0));
    cm.set_topic(&q(), &t("SUB1"), TopicCounters::new(141, 188, 194, 0, 0));
    cm.set_topic(&q(), &t("SUB2"), TopicCounters::new(110, 180, 232, 0, 0));
    cm.set_topic(&q(), &t("SUB3"), TopicCounters::new(135, 182, 188, 0, 0));
    cm
}

#[test]
fn prop1_table_one_is_a_witness() {
    let cx = check_prop1_snapshot(&table_one(), &q(), &t("AGG"), &eth()).unwrap().unwrap();
    assert_eq!(cx.scores["topic"], parse("-4.5036").unwrap());
    assert_eq!(cx.scores["total"], parse("8.3116456").unwrap());
    assert!(cx.reverify(&eth()));
}

#[test]
fn prop1_zero_counters_hold() {
    let cm = CounterMaps::default();
    assert!(check_prop1_snapshot(&cm, &q(), &t("AGG"), &eth()).unwrap().is_none());
}

#[test]
fn prop1_single_topic_negative_is_not_a_witness() {
    let mut twp = eth();
    twp.topics.retain(|k, _| k.as_str() == "AGG");
    let mut cm = CounterMaps::default();
    cm.set_topic(&q(), &t("AGG"), TopicCounters::new(42, 0, 1, 0, 81));
    assert!(check_prop1_snapshot(&cm, &q(), &t("AGG"), &twp).unwrap().is_none());
}

#[test]
fn prop2_table_three_caps_both_totals() {
    let d = PenaltyDeltas {
        first_deliveries_drop: int(191),
        mesh_deliveries_drop: int(190),
        ..Default::default()
    };
    let cx = check_prop2(&table_three(), &q(), &t("BLOCKS"), &d, &eth()).unwrap().unwrap();
    assert_eq!(cx.scores["before"], parse("32.72").unwrap());
    assert_eq!(cx.scores["after"], parse("32.72").unwrap());
    assert!(cx.reverify(&eth()));
    let after = d.apply(&table_three(), &q(), &t("BLOCKS"));
    let blocks = crate::score::topic_score(
        after.topic_counters(&q(), &t("BLOCKS")),
        &eth().topics[&t("BLOCKS")],
        &eth().global,
    );
    assert_eq!(blocks, parse("6.21024").unwrap());
}

#[test]
fn prop2_filecoin_invalid_delivery_strictly_lowers() {
    let twp = filecoin();
    let mut cm = CounterMaps::default();
    for name in twp.topics.keys() {
        cm.set_topic(&q(), name, TopicCounters::new(100, 50, 50, 0, 0));
    }
    let d = PenaltyDeltas {
        invalid_deliveries: int(1),
        ..Default::default()
    };
    let first = twp.topics.keys().next().unwrap().clone();
    assert!(check_prop2(&cm, &q(), &first, &d, &twp).unwrap().is_none());
}

#[test]
fn prop2_zero_deltas_rejected() {
    let err = check_prop2(&table_three(), &q(), &t("AGG"), &PenaltyDeltas::default(), &eth());
    assert!(matches!(err, Err(PropertyError::Precondition(_))));
    let neg = PenaltyDeltas {
        invalid_deliveries: int(-1),
        behaviour_penalty: int(2),
        ..Default::default()
    };
    assert!(check_prop2(&table_three(), &q(), &t("AGG"), &neg, &eth()).is_err());
}

#[test]
fn prop3_examples() {
    let twp = eth();
    let tp = &twp.topics[&t("BLOCKS")];
    let tc = TopicCounters::new(50, 3, 2, 0, 0);
    let more_time = GoodIncrement {
        mesh_time: int(10),
        ..Default::default()
    };
    assert!(check_prop3(&tc, &more_time, tp, &twp.global).unwrap().is_none());
    let cross = GoodIncrement {
        mesh_deliveries: int(20),
        ..Default::default()
    };
    let before = crate::score::topic_score(&tc, tp, &twp.global);
    let after = crate::score::topic_score(&cross.apply(&tc), tp, &twp.global);
    assert!(after > before);
    assert!(check_prop3(&tc, &cross, tp, &twp.global).unwrap().is_none());
    assert!(check_prop3(&tc, &GoodIncrement::default(), tp, &twp.global).unwrap().is_none());
    let young = TopicCounters::new(5, 0, 0, 0, 0);
    assert!(check_prop3(&young, &more_time, tp, &twp.global).is_err());
}

#[test]
fn prop4_examples() {
    for twp in [eth(), pathological()] {
        let mut cm = table_one();
        let twin = PeerId::from("twin");
        for name in twp.topics.keys() {
            cm.set_topic(&twin, name, cm.topic_counters(&q(), name).clone());
        }
        cm.set_global(&twin, cm.global_counters(&q()).clone());
        assert!(check_prop4(&cm, &q(), &twin, &twp).unwrap().is_none());
    }
    let cm = CounterMaps::default();
    assert!(check_prop4(&cm, &q(), &PeerId::from("z"), &eth()).unwrap().is_none());
    assert!(check_prop4(&table_one(), &q(), &PeerId::from("z"), &eth()).is_err());
}

#[test]
fn property_ids_parse() {
    assert_eq!("1".parse::<PropertyId>().unwrap(), PropertyId::NegativeTopicDominates);
    assert_eq!("prop4".parse::<PropertyId>().unwrap().number(), 4);
    assert!("5".parse::<PropertyId>().is_err());
}

#[test]
fn search_finds_eth_witnesses_quickly() {
    for prop in [PropertyId::NegativeTopicDominates, PropertyId::PenaltiesLowerScore] {
        let out = search_counterexample(prop, &eth(), &GeneratorConfig::with_seed(7)).unwrap();
        let cx = out.counterexample.expect("witness");
        assert!(cx.reverify(&eth()), "{prop}");
        assert!(out.trials < 1000, "{prop} took {} trials", out.trials);
    }
}

#[test]
fn search_is_deterministic() {
    let gen = GeneratorConfig {
        budget: 500,
        ..GeneratorConfig::with_seed(3)
    };
    let a = search_counterexample(PropertyId::PenaltiesLowerScore, &eth(), &gen).unwrap();
    let b = search_counterexample(PropertyId::PenaltiesLowerScore, &eth(), &gen).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}

#[test]
fn search_holds_where_expected_small_budget() {
    let gen = GeneratorConfig {
        budget: 2_000,
        ..GeneratorConfig::with_seed(1)
    };
    for prop in [PropertyId::NegativeTopicDominates, PropertyId::PenaltiesLowerScore] {
        let out = search_counterexample(prop, &filecoin(), &gen).unwrap();
        assert!(out.counterexample.is_none(), "{prop}: {:?}", out.counterexample);
        assert_eq!(out.trials, 2_000);
    }
    for preset in Preset::ALL {
        let twp = preset.build();
        for prop in [PropertyId::GoodCountersMonotone, PropertyId::EqualCountersEqualScores] {
            let out = search_counterexample(prop, &twp, &gen).unwrap();
            assert!(out.counterexample.is_none(), "{prop} under {preset:?}");
        }
    }
}

#[test]
fn search_rejects_bad_generators() {
    let gen = GeneratorConfig {
        budget: 0,
        ..Default::default()
    };
    assert!(search_counterexample(PropertyId::EqualCountersEqualScores, &eth(), &gen).is_err());
    let gen = GeneratorConfig {
        counters: ValueRange::new(5, 4),
        ..Default::default()
    };
    assert!(search_counterexample(PropertyId::EqualCountersEqualScores, &eth(), &gen).is_err());
}

#[test]
fn counterexample_json_round_trip() {
    let out = search_counterexample(PropertyId::NegativeTopicDominates, &eth(), &GeneratorConfig::with_seed(2)).unwrap();
    let cx = out.counterexample.unwrap();
    let text = serde_json::to_string_pretty(&cx).unwrap();
    let back: Counterexample = serde_json::from_str(&text).unwrap();
    assert_eq!(back, cx);
    assert!(back.reverify(&eth()));
}

/// Victim "v" scores a peer "a" that never delivers on SUB1 but keeps every
/// other topic busy, and an honest peer "c".
fn blocking_trace(honest: bool) -> (crate::network::Trace, Topic) {
    let twp = crate::config::eth_with_subnets(10);
    let topo = Topology::path(&["a", "v"]);
    let all: BTreeSet<Topic> = twp.topics.keys().cloned().collect();
    let subs = topo.nodes().map(|n| (n.clone(), all.clone())).collect();
    let mut sim = Simulation::from_topology(&topo, &subs, &twp, 1).unwrap();
    let (a, v) = (PeerId::from("a"), PeerId::from("v"));
    let mut mid = 1000;
    let mut script = Vec::new();
    for _ in 0..60 {
        for topic in twp.topics.keys() {
            let n = if topic.as_str() == "SUB1" && !honest { 0 } else { 10 };
            for _ in 0..n {
                mid += 1;
                script.push(Event::send(&a, &v, Payload::full(topic, mid)));
            }
        }
        script.push(Event::heartbeat(&v));
    }
    sim.run_segmented(script);
    (sim.trace, t("SUB1"))
}

#[test]
fn prop1_trace_detects_blocking() {
    let (trace, topic) = blocking_trace(false);
    let verdict = check_prop1_trace(&trace, &PeerId::from("v"), &PeerId::from("a"), &topic);
    let Prop1TraceVerdict::Violation(v) = verdict else { panic!("{verdict:?}") };
    let tp = &crate::config::eth_with_subnets(10).topics[&topic];
    assert_eq!(v.first_violation_mesh_time, big(tp.activation_ticks() + 1));
    assert!(v.final_total.is_positive());
}

#[test]
fn prop1_trace_honest_and_short() {
    let (trace, topic) = blocking_trace(true);
    let (v, a) = (PeerId::from("v"), PeerId::from("a"));
    assert_eq!(check_prop1_trace(&trace, &v, &a, &topic), Prop1TraceVerdict::NoViolation);
    let mut short = trace.clone();
    let keep = short.entries.iter().position(|e| e.scores.is_some()).unwrap();
    short.entries.truncate(keep + 1);
    assert!(matches!(
        check_prop1_trace(&short, &v, &a, &topic),
        Prop1TraceVerdict::Indeterminate { .. }
    ));
}

fn topic_counters() -> impl Strategy<Value = TopicCounters> {
    (0i64..500, 0i64..400, 0i64..400, 0i64..30, 0i64..300)
        .prop_map(|(mt, f, m, i, p)| TopicCounters::new(mt, f, m, i, p))
}

proptest! {
    #[test]
    fn witnesses_always_reverify(seed in 0u64..500) {
        let gen = GeneratorConfig { budget: 200, ..GeneratorConfig::with_seed(seed) };
        for prop in [PropertyId::NegativeTopicDominates, PropertyId::PenaltiesLowerScore] {
            if let Some(cx) = search_counterexample(prop, &eth(), &gen).unwrap().counterexample {
                prop_assert!(cx.reverify(&eth()));
            }
        }
    }

    #[test]
    fn good_increments_never_lower_topic_scores(
        tc in topic_counters(),
        inc in (0i64..100, 0i64..100, 0i64..100),
        which in 0usize..5,
    ) {
        let twp = eth();
        let tp = twp.topics.values().nth(which).unwrap();
        let mut tc = tc;
        tc.mesh_time = big(tp.activation_ticks() + 1) + &tc.mesh_time;
        let inc = GoodIncrement { mesh_time: int(inc.0), first_deliveries: int(inc.1), mesh_deliveries: int(inc.2) };
        prop_assert!(check_prop3(&tc, &inc, tp, &twp.global).unwrap().is_none());
    }
}

//! The peer score function: indicators, weighting, topic cap, decay and prune penalty.

use crate::config::{GlobalParams, TopicParams, Twp};
use crate::ids::{PeerId, Topic};
use crate::rational::{self, serde_q, serde_q_map, Rational};
use num_bigint::BigInt;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::sync::LazyLock;

/// Raw per-(neighbor, topic) counters.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct TopicCounters {
    #[serde(with = "serde_q")]
    pub invalid_message_deliveries: Rational,
    #[serde(with = "serde_q")]
    pub mesh_message_deliveries: Rational,
    /// Ticks of continuous mesh membership.
    #[serde(with = "serde_q")]
    pub mesh_time: Rational,
    #[serde(with = "serde_q")]
    pub first_message_deliveries: Rational,
    #[serde(with = "serde_q")]
    pub mesh_failure_penalty: Rational,
}

impl TopicCounters {
    pub fn new(mesh_time: i64, fmd: i64, mmd: i64, imd: i64, mfp: i64) -> Self {
        Self {
            invalid_message_deliveries: rational::int(imd),
            mesh_message_deliveries: rational::int(mmd),
            mesh_time: rational::int(mesh_time),
            first_message_deliveries: rational::int(fmd),
            mesh_failure_penalty: rational::int(mfp),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.invalid_message_deliveries.is_zero()
            && self.mesh_message_deliveries.is_zero()
            && self.mesh_time.is_zero()
            && self.first_message_deliveries.is_zero()
            && self.mesh_failure_penalty.is_zero()
    }
}

/// Raw per-neighbor counters.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct GlobalCounters {
    #[serde(with = "serde_q")]
    pub app_specific_score: Rational,
    pub ip_colocation_count: u64,
    #[serde(with = "serde_q")]
    pub behaviour_penalty: Rational,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopicIndicators {
    #[serde(with = "serde_q")]
    pub p1: Rational,
    #[serde(with = "serde_q")]
    pub p2: Rational,
    #[serde(with = "serde_q")]
    pub p3: Rational,
    #[serde(with = "serde_q")]
    pub p3b: Rational,
    #[serde(with = "serde_q")]
    pub p4: Rational,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GlobalIndicators {
    #[serde(with = "serde_q")]
    pub p5: Rational,
    #[serde(with = "serde_q")]
    pub p6: Rational,
    #[serde(with = "serde_q")]
    pub p7: Rational,
}

static ZERO_TOPIC: LazyLock<TopicCounters> = LazyLock::new(TopicCounters::default);
static ZERO_GLOBAL: LazyLock<GlobalCounters> = LazyLock::new(GlobalCounters::default);

/// Counters for a set of neighbors; absent entries read as zero.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct CounterMaps {
    pub topic: BTreeMap<PeerId, BTreeMap<Topic, TopicCounters>>,
    pub global: BTreeMap<PeerId, GlobalCounters>,
}

impl CounterMaps {
    pub fn topic_counters(&self, peer: &PeerId, topic: &Topic) -> &TopicCounters {
        self.topic
            .get(peer)
            .and_then(|m| m.get(topic))
            .unwrap_or(&ZERO_TOPIC)
    }

    pub fn global_counters(&self, peer: &PeerId) -> &GlobalCounters {
        self.global.get(peer).unwrap_or(&ZERO_GLOBAL)
    }

    pub fn topic_counters_mut(&mut self, peer: &PeerId, topic: &Topic) -> &mut TopicCounters {
        self.topic
            .entry(peer.clone())
            .or_default()
            .entry(topic.clone())
            .or_default()
    }

    pub fn global_counters_mut(&mut self, peer: &PeerId) -> &mut GlobalCounters {
        self.global.entry(peer.clone()).or_default()
    }

    pub fn set_topic(&mut self, peer: &PeerId, topic: &Topic, tc: TopicCounters) {
        *self.topic_counters_mut(peer, topic) = tc;
    }

    pub fn set_global(&mut self, peer: &PeerId, gc: GlobalCounters) {
        self.global.insert(peer.clone(), gc);
    }

    pub fn peers(&self) -> impl Iterator<Item = &PeerId> {
        let mut all: Vec<&PeerId> = self.topic.keys().chain(self.global.keys()).collect();
        all.sort();
        all.dedup();
        all.into_iter()
    }

    pub fn remove_peer(&mut self, peer: &PeerId) {
        self.topic.remove(peer);
        self.global.remove(peer);
    }
}

fn squared(x: &Rational) -> Rational {
    x * x
}

fn mesh_quanta(tc: &TopicCounters, tp: &TopicParams) -> Rational {
    &tc.mesh_time / Rational::from_integer(BigInt::from(tp.time_in_mesh_quantum))
}

/// Whether the delivery deficit is counted for this neighbor yet.
pub fn past_activation(tc: &TopicCounters, tp: &TopicParams) -> bool {
    mesh_quanta(tc, tp) > Rational::from_integer(BigInt::from(tp.activation_window))
}

/// Squared delivery deficit, or zero when not yet active or not in deficit.
pub fn delivery_deficit_penalty(tc: &TopicCounters, tp: &TopicParams) -> Rational {
    let thr = &tp.mesh_message_deliveries_threshold;
    if past_activation(tc, tp) && tc.mesh_message_deliveries < *thr {
        squared(&(thr - &tc.mesh_message_deliveries))
    } else {
        Rational::zero()
    }
}

pub fn compute_topic_indicators(
    tc: &TopicCounters,
    tp: &TopicParams,
    gp: &GlobalParams,
) -> TopicIndicators {
    let p4 = if gp.square_invalid_deliveries {
        squared(&tc.invalid_message_deliveries)
    } else {
        tc.invalid_message_deliveries.clone()
    };
    TopicIndicators {
        p1: rational::min(&mesh_quanta(tc, tp), &tp.time_in_mesh_cap),
        p2: rational::min(
            &tc.first_message_deliveries,
            &tp.first_message_deliveries_cap,
        ),
        p3: delivery_deficit_penalty(tc, tp),
        p3b: tc.mesh_failure_penalty.clone(),
        p4,
    }
}

pub fn weigh_topic(ind: &TopicIndicators, tp: &TopicParams) -> Rational {
    let inner = &tp.time_in_mesh_weight * &ind.p1
        + &tp.first_message_deliveries_weight * &ind.p2
        + &tp.mesh_message_deliveries_weight * &ind.p3
        + &tp.mesh_failure_penalty_weight * &ind.p3b
        + &tp.invalid_message_deliveries_weight * &ind.p4;
    &tp.topic_weight * inner
}

/// Score contribution of one topic's counters, topic weight included.
pub fn topic_score(tc: &TopicCounters, tp: &TopicParams, gp: &GlobalParams) -> Rational {
    weigh_topic(&compute_topic_indicators(tc, tp, gp), tp)
}

pub fn topic_cap(x: &Rational, cap: &Rational) -> Rational {
    if cap.is_zero() {
        x.clone()
    } else {
        rational::min(x, cap)
    }
}

pub fn compute_global_indicators(gc: &GlobalCounters, gp: &GlobalParams) -> GlobalIndicators {
    let p6 = if gc.ip_colocation_count > gp.ip_colocation_threshold {
        let excess = gc.ip_colocation_count - gp.ip_colocation_threshold;
        squared(&Rational::from_integer(BigInt::from(excess)))
    } else {
        Rational::zero()
    };
    let p7 = if gc.behaviour_penalty > gp.behaviour_penalty_threshold {
        squared(&(&gc.behaviour_penalty - &gp.behaviour_penalty_threshold))
    } else {
        Rational::zero()
    };
    GlobalIndicators {
        p5: gc.app_specific_score.clone(),
        p6,
        p7,
    }
}

pub fn weigh_global(ind: &GlobalIndicators, gp: &GlobalParams) -> Rational {
    &gp.app_specific_weight * &ind.p5
        + &gp.ip_colocation_weight * &ind.p6
        + &gp.behaviour_penalty_weight * &ind.p7
}

/// Per-topic scores and the pieces that make up a total.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreBreakdown {
    #[serde(with = "serde_q_map")]
    pub topics: BTreeMap<Topic, Rational>,
    #[serde(with = "serde_q")]
    pub topic_sum: Rational,
    #[serde(with = "serde_q")]
    pub capped_topic_sum: Rational,
    #[serde(with = "serde_q")]
    pub global: Rational,
    #[serde(with = "serde_q")]
    pub total: Rational,
}

pub fn score_breakdown(peer: &PeerId, cm: &CounterMaps, twp: &Twp) -> ScoreBreakdown {
    let mut topics = BTreeMap::new();
    let mut sum = Rational::zero();
    for (t, tp) in &twp.topics {
        let s = topic_score(cm.topic_counters(peer, t), tp, &twp.global);
        sum += &s;
        topics.insert(t.clone(), s);
    }
    let capped = topic_cap(&sum, &twp.global.topic_cap);
    let global = weigh_global(
        &compute_global_indicators(cm.global_counters(peer), &twp.global),
        &twp.global,
    );
    let total = &capped + &global;
    ScoreBreakdown {
        topics,
        topic_sum: sum,
        capped_topic_sum: capped,
        global,
        total,
    }
}

pub fn calc_score(peer: &PeerId, cm: &CounterMaps, twp: &Twp) -> Rational {
    let mut sum = Rational::zero();
    for (t, tp) in &twp.topics {
        sum += topic_score(cm.topic_counters(peer, t), tp, &twp.global);
    }
    let global = weigh_global(
        &compute_global_indicators(cm.global_counters(peer), &twp.global),
        &twp.global,
    );
    topic_cap(&sum, &twp.global.topic_cap) + global
}

fn decay_value(x: &mut Rational, decay: &Rational, floor: &Rational) {
    if x.is_zero() {
        return;
    }
    let next = &*x * decay;
    *x = if next.abs() < *floor {
        Rational::zero()
    } else {
        next
    };
}

pub fn decay_topic_counters(tc: &mut TopicCounters, tp: &TopicParams, gp: &GlobalParams) {
    let floor = &gp.decay_to_zero;
    decay_value(
        &mut tc.first_message_deliveries,
        &tp.first_message_deliveries_decay,
        floor,
    );
    decay_value(
        &mut tc.mesh_message_deliveries,
        &tp.mesh_message_deliveries_decay,
        floor,
    );
    decay_value(
        &mut tc.mesh_failure_penalty,
        &tp.mesh_failure_penalty_decay,
        floor,
    );
    decay_value(
        &mut tc.invalid_message_deliveries,
        &tp.invalid_message_deliveries_decay,
        floor,
    );
}

pub fn decay_global_counters(gc: &mut GlobalCounters, gp: &GlobalParams) {
    decay_value(
        &mut gc.behaviour_penalty,
        &gp.behaviour_penalty_decay,
        &gp.decay_to_zero,
    );
}

pub fn decay_counters(
    tc: &TopicCounters,
    gc: &GlobalCounters,
    tp: &TopicParams,
    gp: &GlobalParams,
) -> (TopicCounters, GlobalCounters) {
    let mut tc = tc.clone();
    let mut gc = gc.clone();
    decay_topic_counters(&mut tc, tp, gp);
    decay_global_counters(&mut gc, gp);
    (tc, gc)
}

pub fn apply_prune_penalty(tc: &TopicCounters, tp: &TopicParams) -> TopicCounters {
    let mut out = tc.clone();
    out.mesh_failure_penalty += delivery_deficit_penalty(tc, tp);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{eth, filecoin};
    use crate::rational::{int, parse, ratio};
    use proptest::prelude::*;

    fn t(s: &str) -> Topic {
        Topic::from(s)
    }

    #[test]
    fn agg_deficit_row_indicators() {
        let twp = eth();
        let tp = &twp.topics[&t("AGG")];
        let ind = compute_topic_indicators(&TopicCounters::new(42, 0, 1, 0, 81), tp, &twp.global);
        assert_eq!(ind.p1, int(42));
        assert_eq!(ind.p2, int(0));
        assert_eq!(ind.p3, int(81));
        assert_eq!(ind.p3b, int(81));
        assert_eq!(ind.p4, int(0));
        // 0.5 * (0.0324*42 - 0.064*81 - 0.064*81)
        assert_eq!(weigh_topic(&ind, tp), parse("-4.5036").unwrap());
    }

    #[test]
    fn blocks_row_score() {
        let twp = eth();
        let tp = &twp.topics[&t("BLOCKS")];
        let s = topic_score(&TopicCounters::new(147, 194, 200, 0, 0), tp, &twp.global);
        // 0.8 * (0.0324*147 + 23)
        assert_eq!(s, parse("22.21024").unwrap());
    }

    #[test]
    fn deficit_branches() {
        let twp = eth();
        let tp = &twp.topics[&t("AGG")];
        let above = TopicCounters::new(100, 0, 10, 0, 0);
        assert_eq!(compute_topic_indicators(&above, tp, &twp.global).p3, int(0));
        let fresh = TopicCounters::new(0, 0, 0, 0, 0);
        assert_eq!(compute_topic_indicators(&fresh, tp, &twp.global).p3, int(0));
        // exactly at the window is not past it
        let at_window = TopicCounters::new(32, 0, 0, 0, 0);
        assert_eq!(compute_topic_indicators(&at_window, tp, &twp.global).p3, int(0));
        let past = TopicCounters::new(33, 0, 0, 0, 0);
        assert_eq!(compute_topic_indicators(&past, tp, &twp.global).p3, int(100));
    }

    #[test]
    fn mesh_time_is_quantized_then_capped() {
        let twp = eth();
        let tp = &twp.topics[&t("SUB1")];
        let ind = compute_topic_indicators(&TopicCounters::new(141, 0, 0, 0, 0), tp, &twp.global);
        assert_eq!(ind.p1, ratio(141, 10));
        let ind = compute_topic_indicators(&TopicCounters::new(9000, 0, 0, 0, 0), tp, &twp.global);
        assert_eq!(ind.p1, int(300));
    }

    #[test]
    fn invalid_deliveries_unsquared_unless_switched() {
        let mut twp = eth();
        let tp = twp.topics[&t("AGG")].clone();
        let tc = TopicCounters::new(0, 0, 0, 3, 0);
        assert_eq!(compute_topic_indicators(&tc, &tp, &twp.global).p4, int(3));
        twp.global.square_invalid_deliveries = true;
        assert_eq!(compute_topic_indicators(&tc, &tp, &twp.global).p4, int(9));
    }

    #[test]
    fn zero_indicators_weigh_zero() {
        let twp = eth();
        for tp in twp.topics.values() {
            assert_eq!(weigh_topic(&TopicIndicators::default(), tp), int(0));
        }
    }

    #[test]
    fn cap_cases() {
        let x = parse("59.42").unwrap();
        assert_eq!(topic_cap(&x, &parse("32.72").unwrap()), parse("32.72").unwrap());
        assert_eq!(topic_cap(&x, &int(0)), x);
        assert_eq!(topic_cap(&int(-5), &int(10)), int(-5));
    }

    #[test]
    fn global_indicator_cases() {
        let mut gp = eth().global;
        gp.ip_colocation_threshold = 1;
        let gc = |ip: u64, bp: i64| GlobalCounters {
            app_specific_score: int(0),
            ip_colocation_count: ip,
            behaviour_penalty: int(bp),
        };
        assert_eq!(compute_global_indicators(&gc(5, 0), &gp).p6, int(16));
        assert_eq!(compute_global_indicators(&gc(1, 0), &gp).p6, int(0));
        assert_eq!(compute_global_indicators(&gc(0, 10), &gp).p7, int(16));
        assert_eq!(compute_global_indicators(&gc(0, 6), &gp).p7, int(0));
    }

    #[test]
    fn zero_counters_score_zero() {
        let peer = PeerId::from("q");
        for twp in [eth(), filecoin()] {
            assert_eq!(calc_score(&peer, &CounterMaps::default(), &twp), int(0));
        }
    }

    #[test]
    fn decay_cases() {
        let mut gp = eth().global;
        gp.decay_to_zero = ratio(1, 100);
        let mut tp = eth().topics[&t("AGG")].clone();
        tp.first_message_deliveries_decay = ratio(9, 10);
        tp.mesh_message_deliveries_decay = ratio(1, 2);

        let mut tc = TopicCounters::new(7, 100, 0, 0, 0);
        tc.mesh_message_deliveries = ratio(1, 10000);
        let (out, _) = decay_counters(&tc, &GlobalCounters::default(), &tp, &gp);
        assert_eq!(out.first_message_deliveries, int(90));
        assert_eq!(out.mesh_message_deliveries, int(0));
        assert_eq!(out.mesh_time, int(7));

        tc.mesh_message_deliveries = ratio(2, 100);
        let (out, _) = decay_counters(&tc, &GlobalCounters::default(), &tp, &gp);
        assert_eq!(out.mesh_message_deliveries, ratio(1, 100));
    }

    #[test]
    fn decay_leaves_time_app_and_ip_alone() {
        let twp = eth();
        let tp = &twp.topics[&t("AGG")];
        let gc = GlobalCounters {
            app_specific_score: int(5),
            ip_colocation_count: 3,
            behaviour_penalty: int(10),
        };
        let (tc2, gc2) = decay_counters(&TopicCounters::new(9, 0, 0, 0, 0), &gc, tp, &twp.global);
        assert_eq!(tc2.mesh_time, int(9));
        assert_eq!(gc2.app_specific_score, int(5));
        assert_eq!(gc2.ip_colocation_count, 3);
        assert_eq!(gc2.behaviour_penalty, parse("9.857").unwrap());
    }

    #[test]
    fn prune_penalty_cases() {
        let twp = eth();
        let tp = &twp.topics[&t("AGG")];
        let deficit = TopicCounters::new(42, 0, 1, 0, 0);
        assert_eq!(apply_prune_penalty(&deficit, tp).mesh_failure_penalty, int(81));
        let ok = TopicCounters::new(42, 0, 10, 0, 0);
        assert_eq!(apply_prune_penalty(&ok, tp), ok);
        let young = TopicCounters::new(3, 0, 1, 0, 0);
        assert_eq!(apply_prune_penalty(&young, tp), young);
    }

    #[test]
    fn absent_keys_read_zero() {
        let cm = CounterMaps::default();
        assert!(cm.topic_counters(&PeerId::from("x"), &t("AGG")).is_zero());
        assert_eq!(cm.global_counters(&PeerId::from("x")), &GlobalCounters::default());
    }

    #[test]
    fn breakdown_agrees_with_total() {
        let twp = eth();
        let q = PeerId::from("q");
        let mut cm = CounterMaps::default();
        cm.set_topic(&q, &t("BLOCKS"), TopicCounters::new(147, 194, 200, 0, 0));
        cm.set_topic(&q, &t("SUB1"), TopicCounters::new(141, 188, 194, 0, 0));
        let b = score_breakdown(&q, &cm, &twp);
        assert_eq!(b.total, calc_score(&q, &cm, &twp));
        assert_eq!(b.topics.len(), 5);
    }

    fn counters() -> impl Strategy<Value = TopicCounters> {
        (0i64..400, 0i64..300, 0i64..300, 0i64..20, 0i64..200)
            .prop_map(|(mt, f, m, i, p)| TopicCounters::new(mt, f, m, i, p))
    }

    proptest! {
        #[test]
        fn capped_sum_never_exceeds_cap(cs in proptest::collection::vec(counters(), 5)) {
            let twp = eth();
            let q = PeerId::from("q");
            let mut cm = CounterMaps::default();
            for (tc, t) in cs.into_iter().zip(twp.topics.keys()) {
                cm.set_topic(&q, t, tc);
            }
            let b = score_breakdown(&q, &cm, &twp);
            prop_assert!(b.capped_topic_sum <= twp.global.topic_cap);
        }

        #[test]
        fn bad_counters_strictly_lower_topic_score(tc in counters(), extra in 1i64..50) {
            let twp = eth();
            for tp in twp.topics.values() {
                let base = topic_score(&tc, tp, &twp.global);
                let mut more_invalid = tc.clone();
                more_invalid.invalid_message_deliveries += int(extra);
                prop_assert!(topic_score(&more_invalid, tp, &twp.global) < base);
                let mut more_failure = tc.clone();
                more_failure.mesh_failure_penalty += int(extra);
                prop_assert!(topic_score(&more_failure, tp, &twp.global) < base);
            }
        }

        #[test]
        fn decay_keeps_counters_non_negative(tc in counters(), bp in 0i64..100) {
            let twp = eth();
            let gc = GlobalCounters { behaviour_penalty: int(bp), ..Default::default() };
            for tp in twp.topics.values() {
                let (a, b) = decay_counters(&tc, &gc, tp, &twp.global);
                for v in [&a.first_message_deliveries, &a.mesh_message_deliveries,
                          &a.mesh_failure_penalty, &a.invalid_message_deliveries,
                          &b.behaviour_penalty] {
                    prop_assert!(!v.is_negative());
                }
            }
        }
    }

    #[test]
    fn decay_idempotent_on_zero() {
        let twp = eth();
        for tp in twp.topics.values() {
            let (a, b) = decay_counters(
                &TopicCounters::default(),
                &GlobalCounters::default(),
                tp,
                &twp.global,
            );
            assert!(a.is_zero());
            assert_eq!(b, GlobalCounters::default());
        }
    }
}

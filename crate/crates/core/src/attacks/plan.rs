use crate::config::{eth_with_subnets, TopicParams, Twp, ETH_SUBNET_PREFIX};
use crate::ids::Topic;
use crate::rational::Rational;
use crate::score::{topic_cap, topic_score, TopicCounters};
use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

/// Fewest honestly served subnet topics `t` that keep an attacker positive while
/// it blocks `attacked` of `total` subnet topics, using the published Eth2.0
/// constants. `None` when no `t` with `t + attacked <= total` works.
pub fn min_extra_topics(attacked: u64, total: u64) -> Option<u64> {
    if total == 0 {
        return None;
    }
    // 7.2 + 3.2 t/T > 24.7 i/T, scaled by 10 T
    let need = 247 * attacked as i128 - 72 * total as i128;
    let t = if need < 0 { 0 } else { (need / 32 + 1) as u64 };
    (t + attacked <= total).then_some(t)
}

/// Best case a topic can add to an attacker's score: full mesh time and first
/// deliveries at their caps.
pub fn max_topic_reward(tp: &TopicParams) -> Rational {
    &tp.topic_weight
        * (&tp.time_in_mesh_weight * &tp.time_in_mesh_cap
            + &tp.first_message_deliveries_weight * &tp.first_message_deliveries_cap)
}

/// Worst case a starved topic costs: the full delivery deficit squared.
pub fn max_topic_deficit(tp: &TopicParams) -> Rational {
    let thr = &tp.mesh_message_deliveries_threshold;
    &tp.topic_weight * &tp.mesh_message_deliveries_weight * thr * thr
}

/// Config-generic counterpart of [`min_extra_topics`]: the fewest `candidates`
/// the attacker must serve, on top of every topic that is neither attacked nor a
/// candidate, so that best-case rewards outweigh worst-case deficits. Attacked
/// topics still earn their mesh-time reward.
pub fn generic_extra_topics(twp: &Twp, attacked: &BTreeSet<Topic>, candidates: &[Topic]) -> Option<usize> {
    let mut base = Rational::zero();
    for (t, tp) in &twp.topics {
        if attacked.contains(t) {
            base += &tp.topic_weight * &tp.time_in_mesh_weight * &tp.time_in_mesh_cap + max_topic_deficit(tp);
        } else if !candidates.contains(t) {
            base += max_topic_reward(tp);
        }
    }
    let mut sum = base;
    for k in 0..=candidates.len() {
        if sum.is_positive() {
            return Some(k);
        }
        if let Some(tp) = candidates.get(k).and_then(|t| twp.topic(t)) {
            sum += max_topic_reward(tp);
        }
    }
    None
}

/// How far into an attack the estimate looks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlanMode {
    /// Counters at their steady state.
    Asymptotic,
    /// Counters at the first heartbeat where the deficit penalty applies.
    Conservative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlanTarget {
    Positive,
    /// At least the topic cap, so the total stops moving.
    AtCap,
}

fn q(n: u64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// Delivery counter after `rounds` heartbeats of `per_round` arrivals each.
fn deliveries_after(per_round: u64, cap: &Rational, decay: &Rational, rounds: u64) -> Rational {
    let mut x = Rational::zero();
    for _ in 0..rounds {
        x = (&x + q(per_round)).min(cap.clone()) * decay;
    }
    x
}

fn deliveries_steady(per_round: u64, cap: &Rational, decay: &Rational) -> Rational {
    if per_round == 0 {
        return Rational::zero();
    }
    if decay.is_one() {
        return cap.clone();
    }
    let free = decay * q(per_round) / (Rational::one() - decay);
    if &free + q(per_round) <= *cap {
        free
    } else {
        cap * decay
    }
}

fn horizon(twp: &Twp, attacked: &BTreeSet<Topic>, honest: &[Topic], mode: PlanMode) -> u64 {
    match mode {
        PlanMode::Conservative => attacked
            .iter()
            .filter_map(|t| twp.topic(t))
            .map(|tp| tp.activation_ticks() + 1)
            .max()
            .unwrap_or(1),
        PlanMode::Asymptotic => attacked
            .iter()
            .chain(honest)
            .filter_map(|t| twp.topic(t))
            .map(|tp| {
                (&tp.time_in_mesh_cap * q(tp.time_in_mesh_quantum))
                    .ceil()
                    .to_integer()
                    .try_into()
                    .unwrap_or(u64::MAX)
            })
            .max()
            .unwrap_or(1),
    }
}

fn expected_counters(tp: &TopicParams, per_round: u64, rounds: u64, mode: PlanMode) -> TopicCounters {
    let (fmd, mmd) = match mode {
        PlanMode::Conservative => (
            deliveries_after(
                per_round,
                &tp.first_message_deliveries_cap,
                &tp.first_message_deliveries_decay,
                rounds,
            ),
            deliveries_after(
                per_round,
                &tp.mesh_message_deliveries_cap,
                &tp.mesh_message_deliveries_decay,
                rounds,
            ),
        ),
        PlanMode::Asymptotic => (
            deliveries_steady(per_round, &tp.first_message_deliveries_cap, &tp.first_message_deliveries_decay),
            deliveries_steady(per_round, &tp.mesh_message_deliveries_cap, &tp.mesh_message_deliveries_decay),
        ),
    };
    TopicCounters {
        mesh_time: q(rounds),
        first_message_deliveries: fmd,
        mesh_message_deliveries: mmd,
        ..Default::default()
    }
}

/// The score a victim is expected to give an attacker that sends `b` messages
/// per round on `attacked` topics and `f` on `honest` ones.
pub fn estimate_attacker_score(
    twp: &Twp,
    attacked: &BTreeSet<Topic>,
    honest: &[Topic],
    f: u64,
    b: u64,
    mode: PlanMode,
) -> Rational {
    let rounds = horizon(twp, attacked, honest, mode);
    let mut sum = Rational::zero();
    for (topics, rate) in [(attacked.iter().collect::<Vec<_>>(), b), (honest.iter().collect(), f)] {
        for t in topics {
            if let Some(tp) = twp.topic(t) {
                sum += topic_score(&expected_counters(tp, rate, rounds, mode), tp, &twp.global);
            }
        }
    }
    topic_cap(&sum, &twp.global.topic_cap)
}

fn meets(twp: &Twp, estimate: &Rational, target: PlanTarget) -> bool {
    match target {
        PlanTarget::Positive => estimate.is_positive(),
        PlanTarget::AtCap if twp.global.topic_cap.is_zero() => estimate.is_positive(),
        PlanTarget::AtCap => *estimate >= twp.global.topic_cap,
    }
}

/// Shortest prefix of `candidates` the attacker must serve honestly.
pub fn plan_honest_topics(
    twp: &Twp,
    attacked: &BTreeSet<Topic>,
    candidates: &[Topic],
    f: u64,
    b: u64,
    mode: PlanMode,
    target: PlanTarget,
) -> Option<usize> {
    (0..=candidates.len()).find(|&k| {
        let est = estimate_attacker_score(twp, attacked, &candidates[..k], f, b, mode);
        meets(twp, &est, target)
    })
}

/// Subnet topics attacked first in an Eth2.0-shaped config.
pub fn attacked_subnets(i: u64) -> BTreeSet<Topic> {
    (1..=i).map(|k| Topic::from(format!("{ETH_SUBNET_PREFIX}{k}"))).collect()
}

/// Smallest subnet count `T <= max_total` for which an attacker blocking `i`
/// subnets and serving every other topic meets `target`, under this crate's Eth
/// preset.
pub fn plan_subnet_count(i: u64, f: u64, b: u64, mode: PlanMode, target: PlanTarget, max_total: u64) -> Option<u64> {
    (i.max(1)..=max_total).find(|&total| {
        let twp = eth_with_subnets(total as usize);
        let attacked = attacked_subnets(i);
        let honest: Vec<Topic> = twp.topics.keys().filter(|t| !attacked.contains(*t)).cloned().collect();
        let est = estimate_attacker_score(&twp, &attacked, &honest, f, b, mode);
        meets(&twp, &est, target)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{eth, filecoin};
    use crate::rational::parse;

    fn brute(i: u64, total: u64) -> Option<u64> {
        let lhs = |t: u64| parse("7.2").unwrap() + parse("3.2").unwrap() * q(t) / q(total);
        let rhs = parse("24.7").unwrap() * q(i) / q(total);
        (0..=total).find(|&t| t + i <= total && lhs(t) > rhs)
    }

    #[test]
    fn published_examples() {
        assert_eq!(min_extra_topics(1, 3), Some(1));
        assert_eq!(min_extra_topics(1, 1), None);
        assert_eq!(min_extra_topics(0, 10), Some(0));
        assert_eq!(min_extra_topics(0, 0), None);
    }

    #[test]
    fn agrees_with_scan_on_a_grid() {
        for total in 1..=256 {
            for i in 0..=total {
                assert_eq!(min_extra_topics(i, total), brute(i, total), "i={i} T={total}");
            }
        }
    }

    #[test]
    fn steady_state_matches_iteration() {
        let cap = q(1000);
        let d = parse("0.9").unwrap();
        let steady = deliveries_steady(10, &cap, &d);
        assert_eq!(steady, q(90));
        let late = deliveries_after(10, &cap, &d, 200);
        assert!((&steady - &late).abs() < parse("0.001").unwrap());
        assert_eq!(deliveries_steady(10, &q(20), &d), q(18));
    }

    #[test]
    fn more_honest_topics_never_hurt() {
        let twp = eth_with_subnets(12);
        let attacked = attacked_subnets(1);
        let honest: Vec<Topic> = twp.topics.keys().filter(|t| !attacked.contains(*t)).cloned().collect();
        let mut last = None;
        for k in 0..=honest.len() {
            let e = estimate_attacker_score(&twp, &attacked, &honest[..k], 10, 0, PlanMode::Conservative);
            if let Some(prev) = &last {
                assert!(&e >= prev);
            }
            last = Some(e);
        }
    }

    #[test]
    fn planner_sizes_grow_with_attacked_topics() {
        let sizes: Vec<u64> = (1..=3)
            .map(|i| plan_subnet_count(i, 10, 0, PlanMode::Conservative, PlanTarget::AtCap, 64).unwrap())
            .collect();
        assert!(sizes.windows(2).all(|w| w[0] < w[1]), "{sizes:?}");
        let asym = plan_subnet_count(1, 10, 0, PlanMode::Asymptotic, PlanTarget::Positive, 64).unwrap();
        let cons = plan_subnet_count(1, 10, 0, PlanMode::Conservative, PlanTarget::Positive, 64).unwrap();
        assert!(asym <= cons);
    }

    #[test]
    fn generic_bound_by_hand() {
        let twp = eth_with_subnets(3);
        let sub = &twp.topics[&Topic::from("SUB1")];
        // 0.33 * (0.0324 * 300 + 0.95 * 24)
        assert_eq!(max_topic_reward(sub), parse("10.7316").unwrap());
        // 0.33 * -37.55 * 4
        assert_eq!(max_topic_deficit(sub), parse("-49.566").unwrap());
        let attacked = attacked_subnets(1);
        let cands: Vec<Topic> = ["SUB2", "SUB3"].map(Topic::from).to_vec();
        // 26.176 + 16.252 - 46.3584 < 0, one served subnet fixes it
        assert_eq!(generic_extra_topics(&twp, &attacked, &cands), Some(1));
        let mut bare = eth_with_subnets(6);
        for t in ["AGG", "BLOCKS"] {
            bare.topics.remove(&Topic::from(t));
        }
        let cands: Vec<Topic> = (2..=6).map(|k| Topic::from(format!("SUB{k}"))).collect();
        assert_eq!(generic_extra_topics(&bare, &attacked, &cands), Some(5));
        assert_eq!(generic_extra_topics(&bare, &attacked, &cands[..4]), Some(4));
        assert_eq!(generic_extra_topics(&bare, &attacked_subnets(3), &[]), None);
    }

    #[test]
    fn zero_cap_config_targets_positivity() {
        let twp = filecoin();
        let attacked: BTreeSet<Topic> = twp.topics.keys().take(1).cloned().collect();
        let rest: Vec<Topic> = twp.topics.keys().skip(1).cloned().collect();
        assert!(plan_honest_topics(&twp, &attacked, &rest, 10, 0, PlanMode::Conservative, PlanTarget::AtCap).is_some());
        assert!(eth().global.topic_cap.is_positive());
    }
}

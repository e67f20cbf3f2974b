//! The four score-function properties as executable predicates, plus
//! counterexample search.

mod search;
mod trace_check;

pub use search::{search_counterexample, GeneratorConfig, SearchOutcome, ValueRange};
pub use trace_check::{check_prop1_trace, score_series, Prop1TraceVerdict, Prop1Violation, ScorePoint};

use crate::config::{GlobalParams, TopicParams, Twp};
use crate::ids::{PeerId, Topic};
use crate::rational::{serde_q, serde_q_map, Rational};
use crate::score::{calc_score, topic_score, CounterMaps, TopicCounters};
use num_bigint::BigInt;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PropertyId {
    #[serde(rename = "prop1")]
    NegativeTopicDominates,
    #[serde(rename = "prop2")]
    PenaltiesLowerScore,
    #[serde(rename = "prop3")]
    GoodCountersMonotone,
    #[serde(rename = "prop4")]
    EqualCountersEqualScores,
}

impl PropertyId {
    pub const ALL: [PropertyId; 4] = [
        PropertyId::NegativeTopicDominates,
        PropertyId::PenaltiesLowerScore,
        PropertyId::GoodCountersMonotone,
        PropertyId::EqualCountersEqualScores,
    ];

    pub fn number(self) -> u8 {
        match self {
            PropertyId::NegativeTopicDominates => 1,
            PropertyId::PenaltiesLowerScore => 2,
            PropertyId::GoodCountersMonotone => 3,
            PropertyId::EqualCountersEqualScores => 4,
        }
    }
}

impl fmt::Display for PropertyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "prop{}", self.number())
    }
}

impl FromStr for PropertyId {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let n = s.strip_prefix("prop").unwrap_or(s);
        match n {
            "1" => Ok(PropertyId::NegativeTopicDominates),
            "2" => Ok(PropertyId::PenaltiesLowerScore),
            "3" => Ok(PropertyId::GoodCountersMonotone),
            "4" => Ok(PropertyId::EqualCountersEqualScores),
            _ => Err(format!("unknown property `{s}` (expected 1-4)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PropertyError {
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("topic {0} is not configured")]
    UnknownTopic(Topic),
}

/// Perturbation applied to one (peer, topic) for the penalty property.
/// Every field is a non-negative amount.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct PenaltyDeltas {
    /// Lowers mesh message deliveries, widening the deficit.
    #[serde(with = "serde_q")]
    pub mesh_deliveries_drop: Rational,
    #[serde(with = "serde_q")]
    pub first_deliveries_drop: Rational,
    #[serde(with = "serde_q")]
    pub mesh_failure_penalty: Rational,
    #[serde(with = "serde_q")]
    pub invalid_deliveries: Rational,
    pub ip_colocation: u64,
    #[serde(with = "serde_q")]
    pub behaviour_penalty: Rational,
}

impl PenaltyDeltas {
    fn any_positive(&self) -> bool {
        [
            &self.mesh_deliveries_drop,
            &self.first_deliveries_drop,
            &self.mesh_failure_penalty,
            &self.invalid_deliveries,
            &self.behaviour_penalty,
        ]
        .iter()
        .any(|d| d.is_positive())
            || self.ip_colocation > 0
    }

    fn any_negative(&self) -> bool {
        [
            &self.mesh_deliveries_drop,
            &self.first_deliveries_drop,
            &self.mesh_failure_penalty,
            &self.invalid_deliveries,
            &self.behaviour_penalty,
        ]
        .iter()
        .any(|d| d.is_negative())
    }

    /// Counters after the perturbation. Drops stop at zero.
    pub fn apply(&self, cm: &CounterMaps, p: &PeerId, t: &Topic) -> CounterMaps {
        let mut out = cm.clone();
        let tc = out.topic_counters_mut(p, t);
        tc.mesh_message_deliveries = sub_floor(&tc.mesh_message_deliveries, &self.mesh_deliveries_drop);
        tc.first_message_deliveries = sub_floor(&tc.first_message_deliveries, &self.first_deliveries_drop);
        tc.mesh_failure_penalty += &self.mesh_failure_penalty;
        tc.invalid_message_deliveries += &self.invalid_deliveries;
        let gc = out.global_counters_mut(p);
        gc.ip_colocation_count += self.ip_colocation;
        gc.behaviour_penalty += &self.behaviour_penalty;
        out
    }
}

fn sub_floor(x: &Rational, d: &Rational) -> Rational {
    let r = x - d;
    if r.is_negative() {
        Rational::zero()
    } else {
        r
    }
}

/// Increase of the good counters of one topic.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct GoodIncrement {
    #[serde(with = "serde_q")]
    pub mesh_time: Rational,
    #[serde(with = "serde_q")]
    pub first_deliveries: Rational,
    #[serde(with = "serde_q")]
    pub mesh_deliveries: Rational,
}

impl GoodIncrement {
    pub fn apply(&self, tc: &TopicCounters) -> TopicCounters {
        let mut out = tc.clone();
        out.mesh_time += &self.mesh_time;
        out.first_message_deliveries += &self.first_deliveries;
        out.mesh_message_deliveries += &self.mesh_deliveries;
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Perturbation {
    Penalty(PenaltyDeltas),
    Good(GoodIncrement),
}

/// A counter snapshot that violates one property, with the scores showing it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Counterexample {
    pub property: PropertyId,
    pub peer: PeerId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub topic: Option<Topic>,
    /// Second peer compared against `peer` (equal-counters property only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub other_peer: Option<PeerId>,
    pub counters: CounterMaps,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<Perturbation>,
    #[serde(with = "serde_q_map")]
    pub scores: BTreeMap<String, Rational>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trial: Option<u64>,
}

impl Counterexample {
    fn new(property: PropertyId, peer: &PeerId, cm: &CounterMaps) -> Self {
        Counterexample {
            property,
            peer: peer.clone(),
            topic: None,
            other_peer: None,
            counters: cm.clone(),
            perturbation: None,
            scores: BTreeMap::new(),
            seed: None,
            trial: None,
        }
    }

    fn score(mut self, name: &str, v: Rational) -> Self {
        self.scores.insert(name.to_string(), v);
        self
    }

    /// Re-evaluates the stored witness; true when the violation reproduces.
    pub fn reverify(&self, twp: &Twp) -> bool {
        let found = match (self.property, &self.topic, &self.perturbation) {
            (PropertyId::NegativeTopicDominates, Some(t), _) => {
                check_prop1_snapshot(&self.counters, &self.peer, t, twp).ok().flatten()
            }
            (PropertyId::PenaltiesLowerScore, Some(t), Some(Perturbation::Penalty(d))) => {
                check_prop2(&self.counters, &self.peer, t, d, twp).ok().flatten()
            }
            (PropertyId::GoodCountersMonotone, Some(t), Some(Perturbation::Good(inc))) => {
                let Some(tp) = twp.topic(t) else { return false };
                check_prop3(self.counters.topic_counters(&self.peer, t), inc, tp, &twp.global)
                    .ok()
                    .flatten()
            }
            (PropertyId::EqualCountersEqualScores, _, _) => {
                let Some(q2) = &self.other_peer else { return false };
                check_prop4(&self.counters, &self.peer, q2, twp).ok().flatten()
            }
            _ => None,
        };
        found.is_some()
    }
}

fn topic_params<'a>(twp: &'a Twp, t: &Topic) -> Result<&'a TopicParams, PropertyError> {
    twp.topic(t).ok_or_else(|| PropertyError::UnknownTopic(t.clone()))
}

/// Violation when the overall score is positive although topic `t` contributes
/// nothing positive.
pub fn check_prop1_snapshot(
    cm: &CounterMaps,
    p: &PeerId,
    t: &Topic,
    twp: &Twp,
) -> Result<Option<Counterexample>, PropertyError> {
    let tp = topic_params(twp, t)?;
    let total = calc_score(p, cm, twp);
    let ts = topic_score(cm.topic_counters(p, t), tp, &twp.global);
    if total.is_positive() && !ts.is_positive() {
        let mut cx = Counterexample::new(PropertyId::NegativeTopicDominates, p, cm)
            .score("total", total)
            .score("topic", ts);
        cx.topic = Some(t.clone());
        Ok(Some(cx))
    } else {
        Ok(None)
    }
}

/// Violation when a penalty perturbation fails to lower the overall score.
pub fn check_prop2(
    cm: &CounterMaps,
    p: &PeerId,
    t: &Topic,
    deltas: &PenaltyDeltas,
    twp: &Twp,
) -> Result<Option<Counterexample>, PropertyError> {
    topic_params(twp, t)?;
    if deltas.any_negative() {
        return Err(PropertyError::Precondition("perturbation amounts must be non-negative".into()));
    }
    if !deltas.any_positive() {
        return Err(PropertyError::Precondition("at least one perturbation must be positive".into()));
    }
    let before = calc_score(p, cm, twp);
    let after = calc_score(p, &deltas.apply(cm, p, t), twp);
    if before <= after {
        let mut cx = Counterexample::new(PropertyId::PenaltiesLowerScore, p, cm)
            .score("before", before)
            .score("after", after);
        cx.topic = Some(t.clone());
        cx.perturbation = Some(Perturbation::Penalty(deltas.clone()));
        Ok(Some(cx))
    } else {
        Ok(None)
    }
}

/// Violation when raising mesh time or deliveries lowers the topic score.
/// Requires the neighbor to be past activation and the delivery cap to admit the
/// threshold.
pub fn check_prop3(
    tc: &TopicCounters,
    inc: &GoodIncrement,
    tp: &TopicParams,
    gp: &GlobalParams,
) -> Result<Option<Counterexample>, PropertyError> {
    if tp.mesh_message_deliveries_cap < tp.mesh_message_deliveries_threshold {
        return Err(PropertyError::Precondition("delivery cap below threshold".into()));
    }
    if !crate::score::past_activation(tc, tp) {
        return Err(PropertyError::Precondition("mesh time not past activation".into()));
    }
    if [&inc.mesh_time, &inc.first_deliveries, &inc.mesh_deliveries]
        .iter()
        .any(|d| d.is_negative())
    {
        return Err(PropertyError::Precondition("increments must be non-negative".into()));
    }
    let before = topic_score(tc, tp, gp);
    let after = topic_score(&inc.apply(tc), tp, gp);
    if after < before {
        let p = PeerId::from("peer");
        let t = Topic::from("topic");
        let mut cm = CounterMaps::default();
        cm.set_topic(&p, &t, tc.clone());
        let mut cx = Counterexample::new(PropertyId::GoodCountersMonotone, &p, &cm)
            .score("before", before)
            .score("after", after);
        cx.topic = Some(t);
        cx.perturbation = Some(Perturbation::Good(inc.clone()));
        Ok(Some(cx))
    } else {
        Ok(None)
    }
}

/// Violation when two peers with identical counters score differently, or a
/// repeated evaluation disagrees with the first.
pub fn check_prop4(
    cm: &CounterMaps,
    q: &PeerId,
    q2: &PeerId,
    twp: &Twp,
) -> Result<Option<Counterexample>, PropertyError> {
    let same_topics = twp
        .topics
        .keys()
        .all(|t| cm.topic_counters(q, t) == cm.topic_counters(q2, t));
    if !same_topics || cm.global_counters(q) != cm.global_counters(q2) {
        return Err(PropertyError::Precondition("peers have different counters".into()));
    }
    let a = calc_score(q, cm, twp);
    let b = calc_score(q2, cm, twp);
    let again = calc_score(q, cm, twp);
    if a != b || a != again {
        let mut cx = Counterexample::new(PropertyId::EqualCountersEqualScores, q, cm)
            .score("first", a)
            .score("second", b)
            .score("repeat", again);
        cx.other_peer = Some(q2.clone());
        Ok(Some(cx))
    } else {
        Ok(None)
    }
}

fn big(n: u64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

#[cfg(test)]
mod tests;

use crate::ids::{PeerId, Topic};
use crate::network::Trace;
use crate::rational::{serde_q, Rational};
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

/// The attacker's standing at one victim heartbeat.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ScorePoint {
    pub tick: u64,
    #[serde(with = "serde_q")]
    pub total: Rational,
    #[serde(with = "serde_q")]
    pub topic_score: Rational,
    #[serde(with = "serde_q")]
    pub mesh_time: Rational,
}

/// Attacker scores as computed by `victim` at each of its recorded heartbeats.
/// Heartbeats where the attacker is not a neighbor are skipped.
pub fn score_series(trace: &Trace, victim: &PeerId, attacker: &PeerId, t: &Topic) -> Vec<ScorePoint> {
    trace
        .snapshots_of(victim)
        .filter_map(|snap| {
            let ns = snap.scores.get(attacker)?;
            let (topic_score, mesh_time) = ns
                .topics
                .get(t)
                .map(|ts| (ts.score.clone(), ts.mesh_time.clone()))
                .unwrap_or_else(|| (Rational::zero(), Rational::zero()));
            Some(ScorePoint {
                tick: snap.tick,
                total: ns.total.clone(),
                topic_score,
                mesh_time,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Prop1Violation {
    /// Index into the victim's heartbeat series.
    pub first_violation_index: usize,
    pub first_violation_tick: u64,
    /// The attacker's mesh time on the topic at that heartbeat.
    #[serde(with = "serde_q")]
    pub first_violation_mesh_time: Rational,
    #[serde(with = "serde_q")]
    pub final_total: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum Prop1TraceVerdict {
    Violation(Prop1Violation),
    NoViolation,
    Indeterminate { reason: String },
}

impl Prop1TraceVerdict {
    pub fn is_violation(&self) -> bool {
        matches!(self, Prop1TraceVerdict::Violation(_))
    }
}

/// Finite-trace reading of the topic-dominance property. The attacker's topic
/// score must stay non-positive from some heartbeat on while its total stays
/// positive; the last two heartbeats agreeing on the total stands in for "forever".
pub fn check_prop1_trace(trace: &Trace, victim: &PeerId, attacker: &PeerId, t: &Topic) -> Prop1TraceVerdict {
    let series = score_series(trace, victim, attacker, t);
    if series.len() < 2 {
        return Prop1TraceVerdict::Indeterminate {
            reason: format!("{} heartbeat snapshot(s) of {victim} scoring {attacker}", series.len()),
        };
    }
    let start = series
        .iter()
        .rposition(|pt| pt.topic_score.is_positive())
        .map_or(0, |i| i + 1);
    // A zero topic score (e.g. never meshed) is not a penalty; the violation
    // starts at the first strictly negative point of the non-positive suffix.
    let Some(start) = (start..series.len()).find(|&i| series[i].topic_score.is_negative()) else {
        return Prop1TraceVerdict::NoViolation;
    };
    if !series[start..].iter().all(|pt| pt.total.is_positive()) {
        return Prop1TraceVerdict::NoViolation;
    }
    let n = series.len();
    if series[n - 1].total != series[n - 2].total {
        return Prop1TraceVerdict::Indeterminate {
            reason: "attacker total has not stabilized by the end of the trace".into(),
        };
    }
    let first = &series[start];
    Prop1TraceVerdict::Violation(Prop1Violation {
        first_violation_index: start,
        first_violation_tick: first.tick,
        first_violation_mesh_time: first.mesh_time.clone(),
        final_total: series[n - 1].total.clone(),
    })
}

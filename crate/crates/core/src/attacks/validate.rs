use super::script::AttackScript;
use super::AttackError;
use crate::config::Twp;
use crate::ids::{PeerId, Topic};
use crate::network::{Group, Trace};
use crate::peer::{Event, Payload};
use crate::properties::{check_prop1_trace, score_series, Prop1TraceVerdict, ScorePoint};
use crate::rational::{int, serde_q, zero, Rational};
use crate::topology::Topology;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

/// How one attacker fared against one victim on one attacked topic.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GadgetVerdict {
    pub attacker: PeerId,
    pub victim: PeerId,
    pub topic: Topic,
    pub verdict: Prop1TraceVerdict,
    pub heartbeats: usize,
    pub activation_ticks: u64,
    /// The first violating heartbeat is the first one past the activation window.
    pub at_activation_boundary: bool,
    /// Index of the heartbeat from which the attacker's total never changes again.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stable_from: Option<usize>,
    #[serde(with = "serde_q")]
    pub final_total: Rational,
    /// The attacker as scored at every victim heartbeat.
    pub series: Vec<ScorePoint>,
}

/// What a victim holds at the end of the run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CacheCheck {
    pub victim: PeerId,
    /// Size of the victim's component once attackers are removed.
    pub component_size: usize,
    /// Attacked-topic messages that originated beyond the attackers.
    pub attacked_from_outside: usize,
    /// Messages held on topics the attackers still serve.
    pub served_messages: usize,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AttackReport {
    pub gadgets: Vec<GadgetVerdict>,
    /// Only filled for attacks meant to isolate their victims.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub caches: Vec<CacheCheck>,
    /// Attacker sends dropped by block rules.
    pub suppressed: u64,
}

impl AttackReport {
    pub fn all_violated(&self) -> bool {
        !self.gadgets.is_empty() && self.gadgets.iter().all(|g| g.verdict.is_violation())
    }

    pub fn isolation_holds(&self) -> bool {
        self.caches.iter().all(|c| c.passed)
    }

    /// Every gadget violates at the activation boundary and settles within
    /// `max_heartbeats` heartbeats at a positive total.
    pub fn settles_within(&self, max_heartbeats: usize) -> bool {
        self.all_violated()
            && self.gadgets.iter().all(|g| {
                g.at_activation_boundary
                    && g.stable_from.is_some_and(|s| s <= max_heartbeats)
                    && g.final_total > zero()
            })
    }
}

fn stable_from(totals: &[Rational]) -> Option<usize> {
    let last = totals.last()?;
    Some(totals.iter().rposition(|t| t != last).map_or(0, |i| i + 1))
}

fn check_shape(trace: &Trace, group: &Group, script: &AttackScript) -> Result<(), AttackError> {
    for p in script.attackers().iter().chain(&script.victims()) {
        if !group.contains(p) {
            return Err(AttackError::UnknownPeer(p.clone()));
        }
    }
    for v in script.victims() {
        let beats = trace
            .entries
            .iter()
            .filter(|e| e.actor == v && e.event.is_heartbeat())
            .count() as u64;
        if beats < script.rounds {
            return Err(AttackError::Mismatch(format!(
                "{v} has {beats} recorded heartbeats, the script has {} rounds",
                script.rounds
            )));
        }
    }
    Ok(())
}

/// Checks every gadget of `script` against the run that produced `trace` and
/// `group`. `topo` is the topology the group was built from.
pub fn validate_attack(
    trace: &Trace,
    group: &Group,
    script: &AttackScript,
    topo: &Topology,
    twp: &Twp,
) -> Result<AttackReport, AttackError> {
    check_shape(trace, group, script)?;
    let mut gadgets = Vec::new();
    for g in &script.gadgets {
        for t in &g.attacked_topics {
            let series = score_series(trace, &g.victim, &g.attacker, t);
            let totals: Vec<Rational> = series.iter().map(|p| p.total.clone()).collect();
            let verdict = check_prop1_trace(trace, &g.victim, &g.attacker, t);
            let activation_ticks = twp.topic(t).map_or(0, |tp| tp.activation_ticks());
            let at_activation_boundary = match &verdict {
                Prop1TraceVerdict::Violation(v) => v.first_violation_mesh_time == int(activation_ticks as i64 + 1),
                _ => false,
            };
            gadgets.push(GadgetVerdict {
                attacker: g.attacker.clone(),
                victim: g.victim.clone(),
                topic: t.clone(),
                verdict,
                heartbeats: series.len(),
                activation_ticks,
                at_activation_boundary,
                stable_from: stable_from(&totals),
                final_total: totals.last().cloned().unwrap_or_else(zero),
                series,
            });
        }
    }

    let mut caches = Vec::new();
    if script.kind.isolates() {
        let attackers = script.attackers();
        let rest = topo.without(&attackers);
        for victim in script.victims() {
            let attacked: BTreeSet<&Topic> = script
                .gadgets
                .iter()
                .filter(|g| g.victim == victim)
                .flat_map(|g| &g.attacked_topics)
                .collect();
            let component = rest.reachable_from([&victim]);
            let Some(state) = group.get(&victim) else { continue };
            // Cache contents expire, so deliveries seen in the trace count too.
            let mut held = state.msgs.known_mids();
            held.extend(trace.entries.iter().filter(|e| e.actor == victim).filter_map(|e| match &e.event {
                Event::Receive {
                    msg: Payload::Full { topic, mid, .. },
                    ..
                } => Some((topic.clone(), *mid)),
                _ => None,
            }));
            let mut attacked_from_outside = 0;
            let mut served_messages = 0;
            for (topic, mid) in held {
                if !attacked.contains(&topic) {
                    served_messages += 1;
                    continue;
                }
                let outside = trace
                    .origins
                    .get(&mid)
                    .is_some_and(|o| !component.contains(&o.peer) && !attackers.contains(&o.peer));
                if outside {
                    attacked_from_outside += 1;
                }
            }
            caches.push(CacheCheck {
                victim,
                component_size: component.len(),
                attacked_from_outside,
                served_messages,
                passed: attacked_from_outside == 0 && served_messages > 0,
            });
        }
    }

    Ok(AttackReport {
        gadgets,
        caches,
        suppressed: trace.suppressed,
    })
}

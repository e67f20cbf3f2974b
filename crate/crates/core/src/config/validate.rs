use super::{GlobalParams, TopicParams, Twp};
use crate::rational::{int, ratio, Rational, Show};
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub severity: Severity,
    /// Dotted path of the offending field, e.g. `topics.AGG.w3`.
    pub location: String,
    pub message: String,
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Warning => "warning",
            Severity::Error => "error",
        };
        write!(f, "{sev}: {}: {}", self.location, self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.findings.is_empty()
    }

    pub fn has_errors(&self) -> bool {
        self.findings.iter().any(|f| f.severity == Severity::Error)
    }

    pub fn errors(&self) -> impl Iterator<Item = &Finding> {
        self.findings.iter().filter(|f| f.severity == Severity::Error)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &Finding> {
        self.findings.iter().filter(|f| f.severity == Severity::Warning)
    }
}

struct Checker {
    strict: bool,
    report: ValidationReport,
}

impl Checker {
    /// Violations of a field's type; always errors.
    fn hard(&mut self, ok: bool, location: &str, message: impl Into<String>) {
        if !ok {
            self.push(Severity::Error, location, message.into());
        }
    }

    /// Violations of configuration guidance; errors only in strict mode.
    fn guide(&mut self, ok: bool, location: &str, message: impl Into<String>) {
        if !ok {
            let sev = if self.strict {
                Severity::Error
            } else {
                Severity::Warning
            };
            self.push(sev, location, message.into());
        }
    }

    fn push(&mut self, severity: Severity, location: &str, message: String) {
        self.report.findings.push(Finding {
            severity,
            location: location.to_string(),
            message,
        });
    }

    fn decay(&mut self, value: &Rational, location: &str) {
        let in_type = value.is_positive() && *value <= Rational::one();
        self.hard(
            in_type,
            location,
            format!("decay not in (0,1]: {}", Show(value)),
        );
        if in_type {
            self.guide(
                *value < Rational::one(),
                location,
                format!("decay should be in (0,1): {}", Show(value)),
            );
        }
    }

    fn positive_weight(&mut self, value: &Rational, location: &str) {
        self.hard(
            !value.is_negative(),
            location,
            format!("weight must be positive: {}", Show(value)),
        );
        if !value.is_negative() {
            self.guide(!value.is_zero(), location, "zero-valued weight");
        }
    }

    fn negative_weight(&mut self, value: &Rational, location: &str) {
        self.hard(
            !value.is_positive(),
            location,
            format!("weight must be negative: {}", Show(value)),
        );
        if !value.is_positive() {
            self.guide(!value.is_zero(), location, "zero-valued weight");
        }
    }
}

/// Checks types and configuration guidance. One finding per violated constraint.
pub fn validate_config(twp: &Twp, strict: bool) -> ValidationReport {
    let mut c = Checker {
        strict,
        report: ValidationReport::default(),
    };
    if twp.topics.is_empty() {
        c.hard(false, "topics", "no topics defined");
    }
    for (name, tp) in &twp.topics {
        check_topic(&mut c, &format!("topics.{name}"), tp, &twp.global);
    }
    check_global(&mut c, &twp.global);
    c.report
}

fn check_topic(c: &mut Checker, at: &str, tp: &TopicParams, gp: &GlobalParams) {
    let loc = |field: &str| format!("{at}.{field}");
    c.hard(
        tp.topic_weight.is_positive(),
        &loc("topicWeight"),
        "topic weight must be positive",
    );
    c.positive_weight(&tp.time_in_mesh_weight, &loc("w1"));
    c.positive_weight(&tp.first_message_deliveries_weight, &loc("w2"));
    c.negative_weight(&tp.mesh_message_deliveries_weight, &loc("w3"));
    c.negative_weight(&tp.mesh_failure_penalty_weight, &loc("w3b"));
    c.negative_weight(&tp.invalid_message_deliveries_weight, &loc("w4"));

    c.hard(
        tp.time_in_mesh_quantum >= 1,
        &loc("timeInMeshQuantum"),
        "quantum must be at least one tick",
    );
    c.hard(
        tp.time_in_mesh_cap.is_positive(),
        &loc("timeInMeshCap"),
        "cap must be positive",
    );
    c.hard(
        tp.first_message_deliveries_cap.is_positive(),
        &loc("firstMessageDeliveriesCap"),
        "cap must be positive",
    );
    c.decay(&tp.first_message_deliveries_decay, &loc("firstMessageDeliveriesDecay"));
    c.decay(&tp.mesh_message_deliveries_decay, &loc("meshMessageDeliveriesDecay"));
    c.decay(&tp.mesh_failure_penalty_decay, &loc("meshFailurePenaltyDecay"));
    c.decay(
        &tp.invalid_message_deliveries_decay,
        &loc("invalidMessageDeliveriesDecay"),
    );

    let thr = &tp.mesh_message_deliveries_threshold;
    c.hard(
        !thr.is_negative(),
        &loc("meshMessageDeliveriesThreshold"),
        "threshold must be non-negative",
    );
    c.hard(
        !tp.mesh_message_deliveries_cap.is_negative(),
        &loc("meshMessageDeliveriesCap"),
        "cap must be non-negative",
    );
    c.guide(
        thr.is_positive(),
        &loc("meshMessageDeliveriesThreshold"),
        "zero-valued threshold",
    );
    c.guide(
        tp.first_message_deliveries_cap >= *thr,
        &loc("firstMessageDeliveriesCap"),
        "first-delivery cap below mesh delivery threshold",
    );
    c.guide(
        tp.mesh_message_deliveries_cap >= *thr,
        &loc("meshMessageDeliveriesCap"),
        "mesh delivery cap below mesh delivery threshold",
    );

    c.hard(
        tp.d_low <= tp.d && tp.d <= tp.d_hi,
        &loc("D"),
        format!("need Dlow <= D <= Dhi, got {} {} {}", tp.d_low, tp.d, tp.d_hi),
    );
    c.guide(
        gp.dout * 2 <= tp.d,
        &loc("D"),
        format!("dout {} exceeds D/2", gp.dout),
    );
    c.guide(
        gp.dout < tp.d_low,
        &loc("Dlow"),
        format!("dout {} not below Dlow", gp.dout),
    );
    c.guide(
        gp.dscore <= tp.d,
        &loc("D"),
        format!("dscore {} exceeds D", gp.dscore),
    );
}

fn check_global(c: &mut Checker, gp: &GlobalParams) {
    c.positive_weight(&gp.app_specific_weight, "global.w5");
    c.negative_weight(&gp.ip_colocation_weight, "global.w6");
    c.negative_weight(&gp.behaviour_penalty_weight, "global.w7");
    c.hard(
        !gp.topic_cap.is_negative(),
        "global.topicCap",
        "topic cap must be non-negative",
    );
    c.hard(
        gp.ip_colocation_threshold >= 1,
        "global.ipColocationThreshold",
        "threshold must be at least 1",
    );
    c.hard(
        !gp.behaviour_penalty_threshold.is_negative(),
        "global.behaviourPenaltyThreshold",
        "threshold must be non-negative",
    );
    c.decay(&gp.behaviour_penalty_decay, "global.behaviourPenaltyDecay");
    c.hard(
        gp.decay_to_zero.is_positive(),
        "global.decayToZero",
        "must be positive",
    );
    c.guide(
        gp.decay_to_zero <= ratio(1, 10),
        "global.decayToZero",
        "should be close to 0",
    );
    c.hard(
        gp.decay_interval_ticks >= 1,
        "global.decayIntervalTicks",
        "must be at least one tick",
    );
    c.hard(
        gp.heartbeat_interval_ticks == 1,
        "global.heartbeatIntervalTicks",
        "heartbeat interval is fixed at one tick",
    );
    c.hard(
        !gp.gossip_factor.is_negative() && gp.gossip_factor <= Rational::one(),
        "global.gossipFactor",
        "gossip factor not in [0,1]",
    );
    c.hard(gp.mcache_len >= 1, "global.mcacheLen", "must be positive");
    c.hard(gp.mcache_gossip >= 1, "global.mcacheGossip", "must be positive");
    c.hard(
        gp.mcache_gossip <= gp.mcache_len,
        "global.mcacheGossip",
        "exceeds mcacheLen",
    );
    c.hard(
        !gp.iwant_failure_probability.is_negative()
            && gp.iwant_failure_probability <= Rational::one(),
        "global.iwantFailureProbability",
        "probability not in [0,1]",
    );
    c.hard(
        gp.iwant_timeout_ticks >= 1,
        "global.iwantTimeoutTicks",
        "must be at least one tick",
    );

    c.guide(
        gp.gossip_threshold < int(0),
        "global.gossipThreshold",
        "must be negative",
    );
    c.guide(
        gp.publish_threshold <= gp.gossip_threshold,
        "global.publishThreshold",
        "must not exceed gossipThreshold",
    );
    c.guide(
        gp.graylist_threshold < gp.publish_threshold,
        "global.graylistThreshold",
        "must be below publishThreshold",
    );
    c.guide(
        !gp.opportunistic_graft_threshold.is_negative(),
        "global.opportunisticGraftThreshold",
        "must be non-negative",
    );
}

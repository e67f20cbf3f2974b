use super::AttackError;
use crate::ids::{MessageId, PeerId, Topic};
use crate::network::{BlockRule, Recording, RunOutcome, Simulation};
use crate::peer::{Event, Payload};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

/// First message id used for attacker-scripted messages.
pub const SCRIPT_MID_BASE: MessageId = 1 << 40;
/// First message id used for honest background publications.
pub const BACKGROUND_MID_BASE: MessageId = 1 << 41;

/// An attacker that starves one victim of some topics while serving the rest.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AttackGadget {
    pub attacker: PeerId,
    pub victim: PeerId,
    pub attacked_topics: BTreeSet<Topic>,
}

impl AttackGadget {
    pub fn new(attacker: impl Into<PeerId>, victim: impl Into<PeerId>, attacked: &BTreeSet<Topic>) -> Self {
        AttackGadget {
            attacker: attacker.into(),
            victim: victim.into(),
            attacked_topics: attacked.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttackKind {
    Throttle,
    Block,
    Eclipse,
    Partition,
}

impl AttackKind {
    pub const ALL: [AttackKind; 4] = [AttackKind::Throttle, AttackKind::Block, AttackKind::Eclipse, AttackKind::Partition];

    pub fn name(self) -> &'static str {
        match self {
            AttackKind::Throttle => "throttle",
            AttackKind::Block => "block",
            AttackKind::Eclipse => "eclipse",
            AttackKind::Partition => "partition",
        }
    }

    /// Whether victims must end up without attacked-topic messages from outside.
    pub fn isolates(self) -> bool {
        !matches!(self, AttackKind::Throttle)
    }
}

impl std::str::FromStr for AttackKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        AttackKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown attack kind {s:?}, expected throttle, block, eclipse or partition"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AttackScript {
    pub kind: AttackKind,
    pub gadgets: Vec<AttackGadget>,
    /// Every topic of the run, in sending order.
    pub topics: Vec<Topic>,
    pub rounds: u64,
    pub f: u64,
    pub b: u64,
    /// Honest publishers that inject one message per listed topic each round.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub background: Vec<(PeerId, Vec<Topic>)>,
    pub events: Vec<Event>,
}

impl AttackScript {
    pub fn victims(&self) -> BTreeSet<PeerId> {
        self.gadgets.iter().map(|g| g.victim.clone()).collect()
    }

    pub fn attackers(&self) -> BTreeSet<PeerId> {
        self.gadgets.iter().map(|g| g.attacker.clone()).collect()
    }

    pub fn attacked_topics(&self) -> BTreeSet<Topic> {
        self.gadgets.iter().flat_map(|g| g.attacked_topics.iter().cloned()).collect()
    }

    fn rounds_of_events(&self) -> Vec<&[Event]> {
        let mut out = Vec::new();
        let mut start = 0;
        for (k, ev) in self.events.iter().enumerate() {
            let round_ends = ev.is_heartbeat() && self.events.get(k + 1).is_none_or(|n| !n.is_heartbeat());
            if round_ends {
                out.push(&self.events[start..=k]);
                start = k + 1;
            }
        }
        if start < self.events.len() {
            out.push(&self.events[start..]);
        }
        out
    }

    /// The script with background publications placed at the start of each round.
    pub fn schedule(&self) -> Vec<Event> {
        let mut mid = BACKGROUND_MID_BASE;
        let mut out = Vec::with_capacity(self.events.len());
        for round in self.rounds_of_events() {
            for (publisher, topics) in &self.background {
                for t in topics {
                    out.push(Event::publish(publisher, t, mid));
                    mid += 1;
                }
            }
            out.extend_from_slice(round);
        }
        out
    }
}

/// Builds `(Msgs H)^rounds`: per round and gadget, `b` messages on each attacked
/// topic then `f` on every other topic, followed by one heartbeat per victim.
pub fn gen_attack_events(
    kind: AttackKind,
    gadgets: &[AttackGadget],
    topics: &[Topic],
    rounds: u64,
    f: u64,
    b: u64,
) -> Result<AttackScript, AttackError> {
    if b > 1 {
        return Err(AttackError::BadBlockRate(b));
    }
    if f == 0 {
        return Err(AttackError::ZeroHonestRate);
    }
    for g in gadgets {
        if let Some(t) = g.attacked_topics.iter().find(|t| !topics.contains(t)) {
            return Err(AttackError::UnknownTopic(t.clone()));
        }
    }
    let mut victims: Vec<&PeerId> = Vec::new();
    for g in gadgets {
        if !victims.contains(&&g.victim) {
            victims.push(&g.victim);
        }
    }
    let mut mid = SCRIPT_MID_BASE;
    let mut events = Vec::new();
    for _ in 0..rounds {
        for g in gadgets {
            let attacked = topics.iter().filter(|t| g.attacked_topics.contains(*t));
            let honest = topics.iter().filter(|t| !g.attacked_topics.contains(*t));
            for (t, count) in attacked.map(|t| (t, b)).chain(honest.map(|t| (t, f))) {
                for _ in 0..count {
                    events.push(Event::send(&g.attacker, &g.victim, Payload::full(t, mid)));
                    mid += 1;
                }
            }
        }
        events.extend(victims.iter().map(|v| Event::heartbeat(v)));
    }
    Ok(AttackScript {
        kind,
        gadgets: gadgets.to_vec(),
        topics: topics.to_vec(),
        rounds,
        f,
        b,
        background: Vec::new(),
        events,
    })
}

/// Runs `script` on an initialized simulation: attackers collude, suppress their
/// own relays of attacked topics to their victims, and only victims are recorded.
pub fn run_attack(sim: &mut Simulation, script: &AttackScript) -> Result<RunOutcome, AttackError> {
    for p in script.attackers().iter().chain(&script.victims()) {
        if !sim.group.contains(p) {
            return Err(AttackError::UnknownPeer(p.clone()));
        }
    }
    for g in &script.gadgets {
        sim.blocks.push(BlockRule {
            attacker: g.attacker.clone(),
            victim: g.victim.clone(),
            topics: g.attacked_topics.clone(),
        });
    }
    sim.coalition.extend(script.attackers());
    sim.recording = Recording::Peers(script.victims());
    Ok(sim.run_segmented(script.schedule()))
}

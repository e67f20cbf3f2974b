//! Group-level semantics: the FIFO event worklist, topology instantiation and
//! trace recording.

mod trace;

pub use crate::oracle::Oracle;
pub use trace::{Origin, Trace, TraceEntry};

use crate::config::Twp;
use crate::ids::{PeerId, Topic};
use crate::peer::{Event, Payload, PeerState};
use crate::topology::Topology;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, VecDeque};

/// Default budget of consumed events per run.
pub const DEFAULT_MAX_STEPS: u64 = 100_000;

/// Heartbeat rounds appended to the initialization sequence.
pub const INIT_HEARTBEAT_ROUNDS: usize = 2;

#[derive(Debug, thiserror::Error)]
pub enum NetworkError {
    #[error("subscriber {0} is not a node of the topology")]
    UnknownSubscriber(PeerId),
    #[error("{peer} subscribes to unconfigured topic {topic}")]
    UnknownTopic { peer: PeerId, topic: Topic },
    #[error("invalid subscription file: {0}")]
    Json(#[from] serde_json::Error),
}

/// Every peer's local state, keyed by id.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Group {
    pub peers: BTreeMap<PeerId, PeerState>,
}

impl Group {
    pub fn new<I, P>(ids: I) -> Self
    where
        I: IntoIterator<Item = P>,
        P: Into<PeerId>,
    {
        let peers = ids
            .into_iter()
            .map(|p| {
                let p = p.into();
                (p.clone(), PeerState::new(p))
            })
            .collect();
        Group { peers }
    }

    pub fn get(&self, p: &PeerId) -> Option<&PeerState> {
        self.peers.get(p)
    }

    pub fn peer(&self, p: &str) -> &PeerState {
        &self.peers[p]
    }

    pub fn contains(&self, p: &PeerId) -> bool {
        self.peers.contains_key(p)
    }

    pub fn ids(&self) -> impl Iterator<Item = &PeerId> {
        self.peers.keys()
    }

    pub fn len(&self) -> usize {
        self.peers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.peers.is_empty()
    }
}

/// Which peers get trace entries.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub enum Recording {
    #[default]
    All,
    Peers(BTreeSet<PeerId>),
    Off,
}

impl Recording {
    pub fn includes(&self, p: &PeerId) -> bool {
        match self {
            Recording::All => true,
            Recording::Peers(s) => s.contains(p),
            Recording::Off => false,
        }
    }
}

/// Drops FULL and IHAVE messages an attacker would otherwise emit to a victim
/// on the listed topics.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockRule {
    pub attacker: PeerId,
    pub victim: PeerId,
    pub topics: BTreeSet<Topic>,
}

impl BlockRule {
    fn blocks(&self, ev: &Event) -> bool {
        let Event::Send { peer, to, msg } = ev else {
            return false;
        };
        if peer != &self.attacker || to != &self.victim {
            return false;
        }
        match msg {
            Payload::Full { topic, .. } | Payload::Ihave { topic, .. } => self.topics.contains(topic),
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunOutcome {
    Quiescent,
    BudgetExhausted,
}

/// A group together with its worklist, oracle and trace.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub group: Group,
    pub twp: Twp,
    pub oracle: Oracle,
    pub trace: Trace,
    pub recording: Recording,
    pub blocks: Vec<BlockRule>,
    /// Colluding peers: a message one of them injects is known to all of them,
    /// so none relays it.
    pub coalition: BTreeSet<PeerId>,
    pub max_steps: u64,
    queue: VecDeque<Event>,
}

impl Simulation {
    pub fn new(group: Group, twp: Twp, seed: u64) -> Self {
        Simulation {
            group,
            twp,
            oracle: Oracle::new(seed),
            trace: Trace::default(),
            recording: Recording::All,
            blocks: Vec::new(),
            coalition: BTreeSet::new(),
            max_steps: DEFAULT_MAX_STEPS,
            queue: VecDeque::new(),
        }
    }

    /// Builds the group for `topo` and runs its initialization sequence unrecorded.
    pub fn from_topology(
        topo: &Topology,
        subs: &BTreeMap<PeerId, BTreeSet<Topic>>,
        twp: &Twp,
        seed: u64,
    ) -> Result<Self, NetworkError> {
        let (group, init) = group_from_topology(topo, subs, twp)?;
        let mut sim = Simulation::new(group, twp.clone(), seed);
        sim.recording = Recording::Off;
        sim.run_segmented(init);
        sim.recording = Recording::All;
        Ok(sim)
    }

    pub fn enqueue(&mut self, events: impl IntoIterator<Item = Event>) {
        self.queue.extend(events);
    }

    pub fn pending(&self) -> usize {
        self.queue.len()
    }

    /// Consumed events so far, counting unrecorded ones.
    pub fn steps(&self) -> u64 {
        self.trace.steps
    }

    fn budget_left(&self) -> bool {
        self.trace.steps < self.max_steps
    }

    /// Pops events until the worklist is empty or the budget is spent.
    pub fn run(&mut self) -> RunOutcome {
        while self.budget_left() {
            let Some(ev) = self.queue.pop_front() else {
                return RunOutcome::Quiescent;
            };
            self.process(ev);
        }
        if self.queue.is_empty() {
            RunOutcome::Quiescent
        } else {
            RunOutcome::BudgetExhausted
        }
    }

    /// Treats every heartbeat as a barrier: the worklist is drained before and
    /// after it, so messages injected between two heartbeats all land in between.
    pub fn run_segmented(&mut self, events: impl IntoIterator<Item = Event>) -> RunOutcome {
        for ev in events {
            if ev.is_heartbeat() {
                if self.run() == RunOutcome::BudgetExhausted {
                    return RunOutcome::BudgetExhausted;
                }
                self.queue.push_back(ev);
                if self.run() == RunOutcome::BudgetExhausted {
                    return RunOutcome::BudgetExhausted;
                }
            } else {
                self.queue.push_back(ev);
            }
        }
        self.run()
    }

    fn process(&mut self, ev: Event) {
        let step = self.trace.steps;
        self.trace.steps += 1;
        let actor = ev.actor().clone();
        let record = self.recording.includes(&actor);

        if !self.group.contains(&actor) {
            if record {
                let mut entry = TraceEntry::new(step, ev);
                entry.notes.push(format!("unknown peer {actor}; skipped"));
                self.trace.entries.push(entry);
            }
            return;
        }

        match &ev {
            Event::Publish { peer, topic, mid } => self.trace.note_origin(*mid, peer, topic),
            Event::Send {
                peer,
                msg: Payload::Full { topic, mid, .. },
                ..
            } => {
                self.trace.note_origin(*mid, peer, topic);
                if self.coalition.contains(peer) {
                    for member in self.coalition.iter().filter(|m| *m != peer) {
                        if let Some(st) = self.group.peers.get_mut(member) {
                            st.mark_seen(*mid, topic);
                        }
                    }
                }
            }
            _ => {}
        }
        let state = self.group.peers.get_mut(&actor).expect("checked above");

        let tr = state.apply(&ev, &self.twp, &mut self.oracle, record);
        if let Some(rcv) = ev.delivery() {
            self.queue.push_back(rcv);
        }
        let mut emitted = Vec::with_capacity(tr.emitted.len());
        let mut suppressed = Vec::new();
        for out in tr.emitted {
            if self.blocks.iter().any(|b| b.blocks(&out)) {
                self.trace.suppressed += 1;
                suppressed.push(out);
            } else {
                self.queue
                    .push_back(out.delivery().expect("peers only emit sends"));
                emitted.push(out);
            }
        }
        if record {
            let mut entry = TraceEntry::new(step, ev);
            entry.emitted = emitted;
            entry.suppressed = suppressed;
            entry.notes = tr.notes;
            entry.scores = tr.snapshot;
            self.trace.entries.push(entry);
        }
    }
}

/// Runs `worklist` FIFO over `g`: each consumed event is applied to its acting
/// peer and every emitted send enqueues the matching receive.
pub fn gs_trx(g: Group, worklist: Vec<Event>, twp: &Twp, oracle: Oracle, max_steps: u64) -> (Group, Trace) {
    let mut sim = Simulation::new(g, twp.clone(), oracle.seed());
    sim.oracle = oracle;
    sim.max_steps = max_steps;
    sim.enqueue(worklist);
    sim.run();
    (sim.group, sim.trace)
}

/// One heartbeat per peer per round, peers in id order.
pub fn schedule_heartbeats(g: &Group, rounds: usize) -> Vec<Event> {
    (0..rounds)
        .flat_map(|_| g.ids().map(Event::heartbeat))
        .collect()
}

/// Fresh peers for every topology node plus the events that wire them up:
/// JOINs, CONNECTs in both directions per edge, then heartbeat rounds.
pub fn group_from_topology(
    topo: &Topology,
    subs: &BTreeMap<PeerId, BTreeSet<Topic>>,
    twp: &Twp,
) -> Result<(Group, Vec<Event>), NetworkError> {
    for (p, topics) in subs {
        if !topo.contains(p) {
            return Err(NetworkError::UnknownSubscriber(p.clone()));
        }
        if let Some(t) = topics.iter().find(|t| !twp.topics.contains_key(*t)) {
            return Err(NetworkError::UnknownTopic {
                peer: p.clone(),
                topic: t.clone(),
            });
        }
    }
    let group = Group::new(topo.nodes().cloned());
    let mut init = Vec::new();
    for (p, topics) in subs {
        init.extend(topics.iter().map(|t| Event::join(p, t)));
    }
    for (a, b) in topo.edges() {
        init.push(Event::connect(a, b));
        init.push(Event::connect(b, a));
    }
    init.extend(schedule_heartbeats(&group, INIT_HEARTBEAT_ROUNDS));
    Ok((group, init))
}

/// Every node subscribes to every topic of `twp`.
pub fn subscribe_all(topo: &Topology, twp: &Twp) -> BTreeMap<PeerId, BTreeSet<Topic>> {
    let all: BTreeSet<Topic> = twp.topics.keys().cloned().collect();
    topo.nodes().map(|p| (p.clone(), all.clone())).collect()
}

/// Subscription file: a JSON object mapping peer ids to topic lists.
pub fn parse_subscriptions(text: &str) -> Result<BTreeMap<PeerId, BTreeSet<Topic>>, NetworkError> {
    Ok(serde_json::from_str(text)?)
}

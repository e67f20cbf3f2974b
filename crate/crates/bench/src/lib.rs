//! Workloads shared by the benchmarks.

use scorecheck_core::config::eth;
use scorecheck_core::network::{schedule_heartbeats, subscribe_all, Simulation};
use scorecheck_core::topology::synth_topology;
use scorecheck_core::{CounterMaps, Event, PeerId, Topic, TopicCounters};

/// One neighbor with one starved topic among nominal ones.
pub fn mixed_counters() -> (CounterMaps, PeerId) {
    let q = PeerId::from("q");
    let mut cm = CounterMaps::default();
    for (t, c) in [
        ("BLOCKS", TopicCounters::new(147, 194, 200, 0, 0)),
        ("AGG", TopicCounters::new(42, 0, 1, 0, 81)),
        ("SUB1", TopicCounters::new(141, 188, 194, 0, 0)),
        ("SUB2", TopicCounters::new(42, 0, 1, 0, 1)),
        ("SUB3", TopicCounters::new(135, 182, 188, 0, 0)),
    ] {
        cm.set_topic(&q, &Topic::from(t), c);
    }
    (cm, q)
}

/// An initialized Eth network of `nodes` peers plus `rounds` rounds of one
/// publication per topic followed by a heartbeat from every peer.
pub fn flood_workload(nodes: usize, rounds: usize, seed: u64) -> (Simulation, Vec<Event>) {
    let twp = eth();
    let topo = synth_topology(nodes, 6.0, seed);
    let sim = Simulation::from_topology(&topo, &subscribe_all(&topo, &twp), &twp, seed).expect("valid subscriptions");
    let ids: Vec<PeerId> = sim.group.ids().cloned().collect();
    let mut events = Vec::new();
    let mut mid = 1;
    for r in 0..rounds {
        for (k, t) in twp.topics.keys().enumerate() {
            events.push(Event::publish(&ids[(r + k) % ids.len()], t, mid));
            mid += 1;
        }
        events.extend(schedule_heartbeats(&sim.group, 1));
    }
    (sim, events)
}

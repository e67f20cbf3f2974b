use crate::common::{read, to_json, ConfigArgs, Status};
use anyhow::{Context, Result};
use clap::Args;
use scorecheck_core::config::Preset;
use scorecheck_core::network::{parse_subscriptions, schedule_heartbeats, subscribe_all, RunOutcome, DEFAULT_MAX_STEPS};
use scorecheck_core::topology::{load_topology, Topology, TopologyStats};
use scorecheck_core::{Event, PeerId, Simulation, Topic, Twp};
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Edge-list file.
    #[arg(long, value_name = "PATH")]
    topology: PathBuf,
    /// Subscriptions as `{peer: [topic, ...]}`; every peer joins every topic if absent.
    #[arg(long, value_name = "PATH")]
    subs: Option<PathBuf>,
    /// JSON array of events to run after initialization.
    #[arg(long, value_name = "PATH")]
    events: Option<PathBuf>,
    /// Heartbeat rounds for every peer appended after the events.
    #[arg(long, default_value_t = 0)]
    heartbeats: usize,
    /// Drain the worklist before and after each heartbeat.
    #[arg(long)]
    barrier: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_MAX_STEPS)]
    max_steps: u64,
    /// Write the trace as newline-delimited JSON.
    #[arg(long, value_name = "PATH")]
    trace: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct PeerSummary {
    neighbors: usize,
    seen: usize,
    mesh: BTreeMap<Topic, BTreeSet<PeerId>>,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct SimulateReport {
    fingerprint: String,
    seed: u64,
    topology: TopologyStats,
    input_events: usize,
    steps: u64,
    outcome: RunOutcome,
    recorded: usize,
    conservation: bool,
    peers: BTreeMap<PeerId, PeerSummary>,
}

pub fn load_subs(path: Option<&Path>, topo: &Topology, twp: &Twp) -> Result<BTreeMap<PeerId, BTreeSet<Topic>>> {
    match path {
        Some(p) => parse_subscriptions(&read(p)?).with_context(|| format!("parsing {}", p.display())),
        None => Ok(subscribe_all(topo, twp)),
    }
}

pub fn write_trace(path: &Path, trace: &scorecheck_core::Trace) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    trace
        .write_ndjson(BufWriter::new(file))
        .with_context(|| format!("writing {}", path.display()))
}

pub fn simulate(args: SimulateArgs) -> Result<Status> {
    let twp = args.config.load_or(Preset::Eth)?;
    let topo = load_topology(&args.topology)?;
    let subs = load_subs(args.subs.as_deref(), &topo, &twp)?;
    let mut sim = Simulation::from_topology(&topo, &subs, &twp, args.seed)?;
    sim.max_steps = args.max_steps;
    let mut events: Vec<Event> = match &args.events {
        Some(p) => serde_json::from_str(&read(p)?).with_context(|| format!("parsing {}", p.display()))?,
        None => Vec::new(),
    };
    let input_events = events.len();
    events.extend(schedule_heartbeats(&sim.group, args.heartbeats));
    // Initialization steps do not count against the budget.
    sim.max_steps = sim.max_steps.saturating_add(sim.steps());
    let outcome = if args.barrier {
        sim.run_segmented(events)
    } else {
        sim.enqueue(events);
        sim.run()
    };
    if let Some(p) = &args.trace {
        write_trace(p, &sim.trace)?;
    }
    let peers = sim
        .group
        .peers
        .iter()
        .map(|(id, st)| {
            let mesh = st.subs.iter().map(|t| (t.clone(), st.mesh(t))).collect();
            (
                id.clone(),
                PeerSummary {
                    neighbors: st.neighbors().count(),
                    seen: st.msgs.seen.len(),
                    mesh,
                },
            )
        })
        .collect();
    let report = SimulateReport {
        fingerprint: twp.fingerprint(),
        seed: args.seed,
        topology: topo.stats(),
        input_events,
        steps: sim.steps(),
        outcome,
        recorded: sim.trace.entries.len(),
        conservation: sim.trace.check_conservation().is_ok(),
        peers,
    };
    if args.json {
        println!("{}", to_json(&report));
    } else {
        println!("config {} seed {}", report.fingerprint, report.seed);
        println!(
            "{} nodes, {} edges; {} input events, {} steps, {:?}",
            report.topology.nodes, report.topology.edges, input_events, report.steps, report.outcome
        );
        println!("recorded {} entries, conservation {}", report.recorded, if report.conservation { "ok" } else { "broken" });
    }
    Ok(Status::Clean)
}

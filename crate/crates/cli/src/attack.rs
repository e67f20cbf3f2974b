use crate::common::{parse_json, split_list, to_json, write, ConfigArgs, Status};
use crate::simulate::{load_subs, write_trace};
use anyhow::{bail, Context, Result};
use clap::Args;
use scorecheck_core::attacks::{
    attacked_subnets, gen_attack_events, min_vertex_cut, plan_subnet_count, run_attack, run_scenario,
    synth_partition_attack, validate_attack, AttackGadget, AttackKind, AttackReport, AttackScript, PlanMode,
    PlanTarget, Scenario, ScenarioOptions,
};
use scorecheck_core::config::eth_with_subnets;
use scorecheck_core::network::{RunOutcome, DEFAULT_MAX_STEPS};
use scorecheck_core::topology::{load_topology, Topology};
use scorecheck_core::{PeerId, Simulation, Topic, Twp};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::path::PathBuf;

/// An attack script together with the config it was planned for.
#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct ScriptFile {
    fingerprint: String,
    /// Subnet count of the Eth config, when the script was planned on one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    subnets: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cut: Option<BTreeSet<PeerId>>,
    #[serde(flatten)]
    script: AttackScript,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// throttle, block, eclipse or partition.
    #[arg(long)]
    kind: AttackKind,
    /// Parameters to attack instead of the planned Eth config; needs `--attacked-topics`.
    #[command(flatten)]
    config: ConfigArgs,
    /// Edge list; required for eclipse and partition.
    #[arg(long, value_name = "PATH")]
    topology: Option<PathBuf>,
    /// Attacker for throttle and block.
    #[arg(long)]
    attacker: Option<String>,
    /// Victim for throttle, block and eclipse.
    #[arg(long)]
    victim: Option<String>,
    /// Comma-separated peers to cut off (partition).
    #[arg(long)]
    victims: Option<String>,
    /// Number of subnet topics blocked.
    #[arg(long, default_value_t = 1)]
    attacked: u64,
    /// Comma-separated topics blocked, for custom configs.
    #[arg(long)]
    attacked_topics: Option<String>,
    /// Subnet count; planned so the attacker's score reaches the cap when absent.
    #[arg(long)]
    subnets: Option<u64>,
    #[arg(long, default_value_t = 60)]
    rounds: u64,
    /// Messages per round on each served topic.
    #[arg(long, default_value_t = 10)]
    f: u64,
    /// Peer that publishes on the attacked topics plus one served topic each round.
    #[arg(long)]
    background: Option<String>,
    /// Write the script here instead of standard output.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

fn peer_arg(v: &Option<String>, flag: &str) -> Result<PeerId> {
    Ok(PeerId::from(v.as_deref().with_context(|| format!("{flag} is required for this kind"))?))
}

fn ensure_edge(topo: &Option<Topology>, a: &PeerId, v: &PeerId) -> Result<()> {
    if let Some(t) = topo {
        if !t.has_edge(a, v) {
            bail!("{a} and {v} are not adjacent in the topology");
        }
    }
    Ok(())
}

pub fn synth(args: SynthArgs) -> Result<Status> {
    let b = u64::from(args.kind == AttackKind::Throttle);
    let (twp, subnets, attacked): (Twp, Option<u64>, BTreeSet<Topic>) = if args.config.is_set() {
        let twp = args.config.load_or(scorecheck_core::config::Preset::Eth)?;
        let list = args.attacked_topics.as_deref().context("--attacked-topics is required with a custom config")?;
        let attacked: BTreeSet<Topic> = split_list(list)?.into_iter().map(Topic::from).collect();
        (twp, None, attacked)
    } else {
        let total = match args.subnets {
            Some(t) => t,
            None => plan_subnet_count(args.attacked, args.f, b, PlanMode::Conservative, PlanTarget::AtCap, 256)
                .with_context(|| format!("no subnet count up to 256 keeps an attacker blocking {} topics at the cap", args.attacked))?,
        };
        if args.attacked > total {
            bail!("cannot block {} of {total} subnets", args.attacked);
        }
        (eth_with_subnets(total as usize), Some(total), attacked_subnets(args.attacked))
    };
    let mut topics: Vec<Topic> = attacked.iter().cloned().collect();
    topics.extend(twp.topics.keys().filter(|t| !attacked.contains(*t)).cloned());

    let topo = args.topology.as_ref().map(load_topology).transpose()?;
    let mut cut = None;
    let gadgets = match args.kind {
        AttackKind::Throttle | AttackKind::Block => {
            let (a, v) = (peer_arg(&args.attacker, "--attacker")?, peer_arg(&args.victim, "--victim")?);
            ensure_edge(&topo, &a, &v)?;
            vec![AttackGadget::new(a, v, &attacked)]
        }
        AttackKind::Eclipse => {
            let topo = topo.as_ref().context("--topology is required for eclipse")?;
            let v = peer_arg(&args.victim, "--victim")?;
            if !topo.contains(&v) {
                bail!("victim {v} is not in the topology");
            }
            topo.neighbors(&v)
                .map(|a| AttackGadget::new(a.clone(), v.clone(), &attacked))
                .collect()
        }
        AttackKind::Partition => {
            let topo = topo.as_ref().context("--topology is required for partition")?;
            let victims: BTreeSet<PeerId> = split_list(args.victims.as_deref().context("--victims is required for partition")?)?
                .into_iter()
                .map(PeerId::from)
                .collect();
            let gadgets = match subnets {
                Some(_) => {
                    let subnet_list: Vec<Topic> = twp
                        .topics
                        .keys()
                        .filter(|t| t.as_str().starts_with(scorecheck_core::config::ETH_SUBNET_PREFIX))
                        .cloned()
                        .collect();
                    let plan = synth_partition_attack(topo, &victims, &subnet_list, args.attacked)?;
                    cut = Some(plan.cut);
                    plan.gadgets
                }
                None => {
                    let x = min_vertex_cut(topo, &victims)?;
                    let gadgets = x
                        .iter()
                        .flat_map(|a| {
                            topo.neighbors(a)
                                .filter(|v| !x.contains(*v))
                                .map(|v| AttackGadget::new(a.clone(), v.clone(), &attacked))
                                .collect::<Vec<_>>()
                        })
                        .collect();
                    cut = Some(x);
                    gadgets
                }
            };
            gadgets
        }
    };
    let mut script = gen_attack_events(args.kind, &gadgets, &topics, args.rounds, args.f, b)?;
    if let Some(p) = &args.background {
        let mut publish: Vec<Topic> = attacked.iter().cloned().collect();
        publish.extend(topics.iter().find(|t| !attacked.contains(*t)).cloned());
        script.background = vec![(PeerId::from(p.as_str()), publish)];
    }
    let file = ScriptFile { fingerprint: twp.fingerprint(), subnets, cut, script };
    let text = to_json(&file);
    match &args.out {
        Some(p) => write(p, &text)?,
        None => println!("{text}"),
    }
    Ok(Status::Clean)
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Built-in scenario: eth-throttle-ag1, eth-block-ag1/2/3, eclipse, partition.
    #[arg(long, conflicts_with = "script", required_unless_present = "script")]
    scenario: Option<Scenario>,
    /// Script written by `attack-synth`.
    #[arg(long, value_name = "PATH")]
    script: Option<PathBuf>,
    /// Config the script runs under; defaults to the Eth config it was planned on.
    #[command(flatten)]
    config: ConfigArgs,
    /// Edge list; required with `--script`, replaces the default graph of a scenario.
    #[arg(long, value_name = "PATH")]
    topology: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    subs: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Rounds for a scenario.
    #[arg(long)]
    rounds: Option<u64>,
    /// Node count of a synthesized eclipse graph.
    #[arg(long)]
    nodes: Option<usize>,
    #[arg(long)]
    max_steps: Option<u64>,
    #[arg(long, value_name = "PATH")]
    trace: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct RunReport {
    fingerprint: String,
    seed: u64,
    kind: AttackKind,
    steps: u64,
    outcome: RunOutcome,
    report: AttackReport,
}

fn status_of(report: &AttackReport) -> Status {
    if report.gadgets.iter().any(|g| g.verdict.is_violation()) {
        Status::Violation
    } else {
        Status::Clean
    }
}

fn print_report(header: &str, report: &AttackReport) {
    println!("{header}");
    for g in &report.gadgets {
        let verdict = serde_json::to_value(&g.verdict).expect("serializes");
        println!(
            "  {} -> {} on {}: {} (boundary {}, stable from {:?}, final {})",
            g.attacker,
            g.victim,
            g.topic,
            verdict["verdict"].as_str().unwrap_or("?"),
            g.at_activation_boundary,
            g.stable_from,
            scorecheck_core::rational::format(&g.final_total)
        );
    }
    for c in &report.caches {
        println!(
            "  cache {}: {} attacked-topic message(s) from outside, {} served, {}",
            c.victim,
            c.attacked_from_outside,
            c.served_messages,
            if c.passed { "isolated" } else { "NOT isolated" }
        );
    }
    println!("  suppressed sends: {}", report.suppressed);
}

pub fn run(args: RunArgs) -> Result<Status> {
    if let Some(scenario) = args.scenario {
        let mut opts = ScenarioOptions { seed: args.seed, rounds: args.rounds, ..Default::default() };
        if let Some(p) = &args.topology {
            opts.topology = Some(load_topology(p)?);
        }
        if let Some(n) = args.nodes {
            opts.nodes = n;
        }
        if let Some(m) = args.max_steps {
            opts.max_steps = m;
        }
        let run = run_scenario(scenario, &opts)?;
        if let Some(p) = &args.trace {
            write_trace(p, &run.trace)?;
        }
        if args.json {
            println!("{}", run.to_json());
        } else {
            let header = format!(
                "{} config {} seed {}: {} subnets, {} steps, {:?}",
                scenario, run.fingerprint, run.seed, run.subnets, run.steps, run.outcome
            );
            print_report(&header, &run.report);
        }
        return Ok(status_of(&run.report));
    }

    let path = args.script.as_ref().expect("clap requires a script or scenario");
    let file: ScriptFile = parse_json(path)?;
    let twp = if args.config.is_set() {
        args.config.load_or(scorecheck_core::config::Preset::Eth)?
    } else {
        let subnets = file.subnets.context("script has no subnet count; pass --preset or --config")?;
        eth_with_subnets(subnets as usize)
    };
    if twp.fingerprint() != file.fingerprint {
        bail!(
            "config fingerprint {} does not match the script's {}",
            twp.fingerprint(),
            file.fingerprint
        );
    }
    let topo_path = args.topology.as_ref().context("--topology is required with --script")?;
    let topo = load_topology(topo_path)?;
    let subs = load_subs(args.subs.as_deref(), &topo, &twp)?;
    let mut sim = Simulation::from_topology(&topo, &subs, &twp, args.seed)?;
    sim.max_steps = sim.steps() + args.max_steps.unwrap_or(DEFAULT_MAX_STEPS.max(file.script.events.len() as u64 * 64));
    let outcome = run_attack(&mut sim, &file.script)?;
    if let Some(p) = &args.trace {
        write_trace(p, &sim.trace)?;
    }
    let report = validate_attack(&sim.trace, &sim.group, &file.script, &topo, &twp)?;
    let status = status_of(&report);
    let out = RunReport {
        fingerprint: file.fingerprint,
        seed: args.seed,
        kind: file.script.kind,
        steps: sim.steps(),
        outcome,
        report,
    };
    if args.json {
        println!("{}", to_json(&out));
    } else {
        let header = format!(
            "{} attack, config {} seed {}: {} steps, {:?}",
            out.kind.name(),
            out.fingerprint,
            out.seed,
            out.steps,
            out.outcome
        );
        print_report(&header, &out.report);
    }
    Ok(status)
}

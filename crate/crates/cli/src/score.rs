use crate::common::{parse_json, read, to_json, ConfigArgs, Status};
use anyhow::{bail, Context, Result};
use clap::Args;
use scorecheck_core::config::Preset;
use scorecheck_core::network::Trace;
use scorecheck_core::properties::{
    check_prop1_snapshot, check_prop1_trace, search_counterexample, Counterexample, GeneratorConfig,
    Prop1TraceVerdict, PropertyId, SearchOutcome,
};
use scorecheck_core::rational::format;
use scorecheck_core::score::{score_breakdown, ScoreBreakdown};
use scorecheck_core::{CounterMaps, PeerId, Topic};
use serde::Serialize;
use std::collections::BTreeMap;
use std::io::BufReader;
use std::path::PathBuf;

#[derive(Debug, Args)]
pub struct ScoreEvalArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Counters file: `{"topic": {peer: {topic: counters}}, "global": {peer: counters}}`.
    #[arg(long, value_name = "PATH")]
    counters: PathBuf,
    /// Only score this neighbor.
    #[arg(long)]
    peer: Option<String>,
    #[arg(long)]
    json: bool,
}

#[derive(Serialize)]
struct ScoreReport {
    fingerprint: String,
    peers: BTreeMap<PeerId, ScoreBreakdown>,
}

pub fn score_eval(args: ScoreEvalArgs) -> Result<Status> {
    let twp = args.config.load_or(Preset::Eth)?;
    let cm: CounterMaps = parse_json(&args.counters)?;
    let mut peers: Vec<PeerId> = cm.topic.keys().chain(cm.global.keys()).cloned().collect();
    peers.sort();
    peers.dedup();
    if let Some(p) = &args.peer {
        let p = PeerId::from(p.as_str());
        if !peers.contains(&p) {
            bail!("peer {p} has no counters in {}", args.counters.display());
        }
        peers = vec![p];
    }
    let report = ScoreReport {
        fingerprint: twp.fingerprint(),
        peers: peers.iter().map(|p| (p.clone(), score_breakdown(p, &cm, &twp))).collect(),
    };
    if args.json {
        println!("{}", to_json(&report));
    } else {
        println!("config {}", report.fingerprint);
        for (p, b) in &report.peers {
            println!("peer {p}");
            for (t, s) in &b.topics {
                println!("  {:<12} {:>14}", t.as_str(), format(s));
            }
            println!("  {:<12} {:>14}", "topics", format(&b.topic_sum));
            println!("  {:<12} {:>14}", "capped", format(&b.capped_topic_sum));
            println!("  {:<12} {:>14}", "global", format(&b.global));
            println!("  {:<12} {:>14}", "total", format(&b.total));
        }
    }
    Ok(Status::Clean)
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    /// Property number, 1 to 4.
    #[arg(long)]
    property: PropertyId,
    #[command(flatten)]
    config: ConfigArgs,
    /// Random trials to try.
    #[arg(long, default_value_t = 100_000)]
    budget: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Generator ranges as JSON; `--seed` and `--budget` override its values.
    #[arg(long, value_name = "PATH")]
    generator: Option<PathBuf>,
    /// Check one counters file instead of searching (property 1).
    #[arg(long, value_name = "PATH", conflicts_with = "trace")]
    counters: Option<PathBuf>,
    /// Check a recorded trace instead of searching (property 1).
    #[arg(long, value_name = "PATH")]
    trace: Option<PathBuf>,
    #[arg(long)]
    peer: Option<String>,
    #[arg(long)]
    topic: Option<String>,
    /// Scoring peer whose heartbeats are read from the trace.
    #[arg(long)]
    victim: Option<String>,
    /// Scored peer, with `--trace`.
    #[arg(long)]
    attacker: Option<String>,
    #[arg(long)]
    json: bool,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct CheckReport<T: Serialize> {
    fingerprint: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(flatten)]
    result: T,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct SnapshotResult {
    property: PropertyId,
    peer: PeerId,
    counterexample: Option<Counterexample>,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct TraceResult {
    property: PropertyId,
    victim: PeerId,
    attacker: PeerId,
    topic: Topic,
    verdict: Prop1TraceVerdict,
}

fn required<'a>(v: &'a Option<String>, flag: &str) -> Result<&'a str> {
    v.as_deref().with_context(|| format!("{flag} is required here"))
}

pub fn check(args: CheckArgs) -> Result<Status> {
    let twp = args.config.load_or(Preset::Eth)?;
    let fingerprint = twp.fingerprint();
    if args.counters.is_some() || args.trace.is_some() {
        if args.property != PropertyId::NegativeTopicDominates {
            bail!("--counters and --trace only apply to property 1");
        }
    }

    if let Some(path) = &args.counters {
        let cm: CounterMaps = parse_json(path)?;
        let peer = PeerId::from(required(&args.peer, "--peer")?);
        let topics: Vec<Topic> = match &args.topic {
            Some(t) => vec![Topic::from(t.as_str())],
            None => twp.topics.keys().cloned().collect(),
        };
        let mut found = None;
        for t in &topics {
            if let Some(cx) = check_prop1_snapshot(&cm, &peer, t, &twp)? {
                found = Some(cx);
                break;
            }
        }
        let status = if found.is_some() { Status::Violation } else { Status::Clean };
        let report = CheckReport {
            fingerprint,
            seed: None,
            result: SnapshotResult { property: args.property, peer, counterexample: found },
        };
        emit_check(&report, args.json, report.result.counterexample.as_ref());
        return Ok(status);
    }

    if let Some(path) = &args.trace {
        let file = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
        let trace = Trace::read_ndjson(BufReader::new(file)).with_context(|| format!("reading {}", path.display()))?;
        let victim = PeerId::from(required(&args.victim, "--victim")?);
        let attacker = PeerId::from(required(&args.attacker, "--attacker")?);
        let topic = Topic::from(required(&args.topic, "--topic")?);
        if twp.topic(&topic).is_none() {
            bail!("topic {topic} is not in the config");
        }
        let verdict = check_prop1_trace(&trace, &victim, &attacker, &topic);
        let status = if verdict.is_violation() { Status::Violation } else { Status::Clean };
        let report = CheckReport {
            fingerprint,
            seed: None,
            result: TraceResult { property: args.property, victim, attacker, topic, verdict },
        };
        if args.json {
            println!("{}", to_json(&report));
        } else {
            println!("config {}", report.fingerprint);
            println!("{}", serde_json::to_string(&report.result.verdict).expect("serializes"));
        }
        return Ok(status);
    }

    let mut gen = match &args.generator {
        Some(p) => serde_json::from_str(&read(p)?).with_context(|| format!("parsing {}", p.display()))?,
        None => GeneratorConfig::default(),
    };
    gen.seed = args.seed;
    gen.budget = args.budget;
    let outcome: SearchOutcome = search_counterexample(args.property, &twp, &gen)?;
    let status = if outcome.counterexample.is_some() { Status::Violation } else { Status::Clean };
    let report = CheckReport { fingerprint, seed: Some(args.seed), result: outcome };
    if args.json {
        println!("{}", to_json(&report));
    } else {
        println!("config {} seed {}", report.fingerprint, args.seed);
        println!("{}: {} trial(s) of {}", args.property, report.result.trials, args.budget);
        print_witness(report.result.counterexample.as_ref());
    }
    Ok(status)
}

fn emit_check<T: Serialize>(report: &CheckReport<T>, json: bool, cx: Option<&Counterexample>) {
    if json {
        println!("{}", to_json(report));
    } else {
        println!("config {}", report.fingerprint);
        print_witness(cx);
    }
}

fn print_witness(cx: Option<&Counterexample>) {
    match cx {
        None => println!("no counterexample"),
        Some(cx) => {
            print!("counterexample for {} at peer {}", cx.property, cx.peer);
            if let Some(t) = &cx.topic {
                print!(" topic {t}");
            }
            println!();
            for (k, v) in &cx.scores {
                println!("  {k:<8} {}", format(v));
            }
        }
    }
}

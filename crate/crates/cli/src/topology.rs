use crate::common::{to_json, write, Status};
use anyhow::Result;
use clap::Subcommand;
use scorecheck_core::topology::{load_topology, synth_topology, Topology};
use std::path::PathBuf;

#[derive(Debug, Subcommand)]
pub enum TopologyCommand {
    /// Synthesize a connected random graph.
    Gen {
        #[arg(long)]
        nodes: usize,
        #[arg(long, default_value_t = 10.0)]
        avg_degree: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the edge list here instead of standard output.
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
    /// Print degree and diameter statistics of an edge list.
    Stats {
        path: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Parse an edge list and print it in normalized form.
    Load { path: PathBuf },
}

fn print_stats(topo: &Topology, json: bool) {
    let s = topo.stats();
    if json {
        println!("{}", to_json(&s));
    } else {
        println!("nodes {}", s.nodes);
        println!("edges {}", s.edges);
        println!("degree min {} max {} avg {:.2}", s.min_degree, s.max_degree, s.avg_degree);
        match s.diameter {
            Some(d) => println!("diameter {d}"),
            None => println!("diameter undefined ({} components)", s.components),
        }
    }
}

pub fn run(cmd: TopologyCommand) -> Result<Status> {
    match cmd {
        TopologyCommand::Gen { nodes, avg_degree, seed, out } => {
            anyhow::ensure!(nodes >= 1, "--nodes must be at least 1");
            let topo = synth_topology(nodes, avg_degree, seed);
            let text = topo.to_edge_list();
            match out {
                Some(p) => {
                    write(&p, &text)?;
                    print_stats(&topo, false);
                }
                None => print!("{text}"),
            }
        }
        TopologyCommand::Stats { path, json } => print_stats(&load_topology(&path)?, json),
        TopologyCommand::Load { path } => print!("{}", load_topology(&path)?.to_edge_list()),
    }
    Ok(Status::Clean)
}

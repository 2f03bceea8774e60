use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use smoc_core::netgraph::{
    compute_path_set, parse_topology, shared_edges, PathSetOptions, Topology,
};
use smoc_core::scenario::parse_scenario;
use smoc_core::wire::{decode_packet, describe, parse_hex};

const EXIT_PARSE: u8 = 2;
const EXIT_SIM: u8 = 3;

#[derive(Parser)]
#[command(
    name = "smoc",
    version,
    about = "MPTCP-aware multipath routing simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario and print its summary.
    Run {
        topology: PathBuf,
        scenario: PathBuf,
        /// Write the throughput CSV to this file.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print the throughput CSV to stdout after the summary.
        #[arg(long)]
        csv: bool,
        /// Suppress the summary.
        #[arg(long)]
        quiet: bool,
    },
    /// List the path set between two switches, primary first.
    Paths {
        topology: PathBuf,
        src: String,
        dst: String,
    },
    /// Decode one frame given as hex, or `@file` for a hex dump file.
    Decode { frame: String },
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn parse(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_PARSE,
            message: message.into(),
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::parse(format!("{}: {e}", path.display())))
}

fn load_topology(path: &Path) -> Result<Topology, Failure> {
    parse_topology(&read(path)?).map_err(|e| Failure::parse(format!("{}: {e}", path.display())))
}

fn run(
    topology: &Path,
    scenario: &Path,
    out: Option<&Path>,
    csv: bool,
    quiet: bool,
) -> Result<(), Failure> {
    let topo = load_topology(topology)?;
    let scn = parse_scenario(&read(scenario)?)
        .and_then(|s| s.resolve(&topo).map(|_| s))
        .map_err(|e| Failure::parse(format!("{}: {e}", scenario.display())))?;
    let output = scn.run(&topo).map_err(|e| Failure {
        code: EXIT_SIM,
        message: e.to_string(),
    })?;
    let table = output.series.to_csv();
    if let Some(path) = out {
        fs::write(path, &table).map_err(|e| Failure {
            code: EXIT_SIM,
            message: format!("{}: {e}", path.display()),
        })?;
    }
    if !quiet {
        print!("{}", output.summary.to_text());
    }
    if csv {
        print!("{table}");
    }
    Ok(())
}

fn paths(topology: &Path, src: &str, dst: &str) -> Result<(), Failure> {
    let topo = load_topology(topology)?;
    let set = compute_path_set(&topo, &src.into(), &dst.into(), PathSetOptions::default())
        .map_err(|e| Failure::parse(e.to_string()))?;
    for (i, p) in set.paths().iter().enumerate() {
        println!(
            "{i} {p} hops={} shared={}",
            p.hop_len(),
            shared_edges(p, set.primary())
        );
    }
    Ok(())
}

fn decode(frame: &str) -> Result<(), Failure> {
    let text = match frame.strip_prefix('@') {
        Some(path) => read(Path::new(path))?,
        None => frame.to_string(),
    };
    let bytes = parse_hex(&text).map_err(|e| Failure::parse(format!("bad hex: {e}")))?;
    match decode_packet(&bytes) {
        Ok(p) => println!("{}", describe(&p)),
        Err(e) => println!("error: {e}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run {
            topology,
            scenario,
            out,
            csv,
            quiet,
        } => run(topology, scenario, out.as_deref(), *csv, *quiet),
        Command::Paths { topology, src, dst } => paths(topology, src, dst),
        Command::Decode { frame } => decode(frame),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

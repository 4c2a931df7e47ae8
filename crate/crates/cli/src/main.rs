use std::net::SocketAddr;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use hawk_cli::commands::{self, CliError, CliResult};

#[derive(Parser)]
#[command(name = "hawk", version, about = "Multimodal drone fleet supervision: simulator, recognizers, planner")]
struct Cli {
    #[command(subcommand)]
    cmd: Top,
}

#[derive(Subcommand)]
enum Top {
    /// Mission simulator.
    #[command(subcommand)]
    Sim(SimCmd),
    /// Gesture recognizer.
    #[command(subcommand)]
    Gesture(GestureCmd),
    /// Speech and gesture fusion.
    #[command(subcommand)]
    Fuse(FuseCmd),
    /// Path planning.
    #[command(subcommand)]
    Plan(PlanCmd),
    /// Recorded traces.
    #[command(subcommand)]
    Trace(TraceCmd),
}

#[derive(Subcommand)]
enum SimCmd {
    /// Run scripted missions headless.
    Run {
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Operator script (JSONL); the reference script when absent.
        #[arg(long)]
        script: Option<PathBuf>,
        /// `N` or `a..b`.
        #[arg(long)]
        seeds: Option<String>,
        /// Fleet sizes to compare, comma separated.
        #[arg(long, value_delimiter = ',')]
        drones: Vec<usize>,
        /// JSON report with every run and the per-fleet summaries.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Session log of a single run.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Serve live sessions over HTTP and WebSocket.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: std::net::IpAddr,
    },
    /// Write the reference operator script for a scenario.
    Script {
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum GestureCmd {
    /// Train on one trace file and score another; synthetic corpus when both are absent.
    Eval {
        #[arg(long)]
        train: Option<PathBuf>,
        #[arg(long)]
        test: Option<PathBuf>,
        #[arg(long)]
        emit_confusion: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Write the synthetic corpus as trace files.
    Synth {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

#[derive(Subcommand)]
enum FuseCmd {
    /// Unimodal and fused accuracy on a paired corpus.
    Eval {
        #[arg(long)]
        paired_corpus: Option<PathBuf>,
        #[arg(long, default_value_t = 3)]
        seed: u64,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Write a synthetic paired corpus.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 3)]
        seed: u64,
    },
}

#[derive(Subcommand)]
enum PlanCmd {
    /// Plan through a world and time the path.
    Demo {
        /// Plan request JSON: world, start, goal and optional planner settings.
        #[arg(long)]
        world: Option<PathBuf>,
        #[arg(long)]
        export_samples: Option<PathBuf>,
        /// Sampling period of the exported trajectory, seconds.
        #[arg(long, default_value_t = 0.1)]
        dt: f64,
    },
}

#[derive(Subcommand)]
enum TraceCmd {
    /// Replay a session log, or classify an armband trace.
    Replay {
        file: PathBuf,
        /// Fail unless the replayed log equals the recording byte for byte.
        #[arg(long)]
        check: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli, out: &mut String) -> CliResult {
    match cli.cmd {
        Top::Sim(SimCmd::Run { scenario, script, seeds, drones, report, log }) => {
            let args = commands::SimRunArgs { scenario, script, seeds, drones, report, log };
            commands::sim_run(&args, out)
        }
        Top::Sim(SimCmd::Serve { port, host }) => {
            let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::new("io", e.to_string()))?;
            rt.block_on(hawk_cli::server::serve(SocketAddr::new(host, port)))
                .map_err(|e| CliError::new("io", e.to_string()))
        }
        Top::Sim(SimCmd::Script { scenario, out: path }) => commands::sim_script(scenario.as_deref(), path.as_deref(), out),
        Top::Gesture(GestureCmd::Eval { train, test, emit_confusion, report, seed }) => {
            commands::gesture_eval(&commands::GestureEvalArgs { train, test, emit_confusion, report, seed }, out)
        }
        Top::Gesture(GestureCmd::Synth { train, test, seed }) => commands::gesture_synth(&train, &test, seed),
        Top::Fuse(FuseCmd::Eval { paired_corpus, seed, report }) => {
            commands::fuse_eval(paired_corpus.as_deref(), seed, report.as_deref(), out)
        }
        Top::Fuse(FuseCmd::Synth { out: path, seed }) => commands::fuse_synth(&path, seed),
        Top::Plan(PlanCmd::Demo { world, export_samples, dt }) => {
            commands::plan_demo(world.as_deref(), export_samples.as_deref(), dt, out)
        }
        Top::Trace(TraceCmd::Replay { file, check, out: path }) => commands::trace_replay(&file, check, path.as_deref(), out),
    }
}

fn main() {
    let cli = Cli::parse();
    let mut out = String::new();
    let r = run(cli, &mut out);
    print!("{out}");
    if let Err(e) = r {
        eprintln!("{e}");
        std::process::exit(e.exit_code());
    }
}

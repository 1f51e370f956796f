use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand};
use serde_json::json;

use urllc_hrl::experiment::{build_remote_learner, emit_plot_data, remote_agent_name, run_experiment, ExperimentError, ExperimentSpec, Setup};
use urllc_hrl::hierarchy::gateway::{serve_agent, ServeMode};
use urllc_hrl::ScenarioConfig;

#[derive(Debug, Parser)]
#[command(name = "urllc-hrl", version, about = "URLLC power/HARQ orchestration experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train and evaluate setups; one output subdirectory per setup.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Comma-separated; defaults to all five.
        #[arg(long, value_delimiter = ',')]
        setup: Vec<Setup>,
        #[arg(long, value_delimiter = ',', default_value = "0")]
        seeds: Vec<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Wait for the flat or high-level agent on this `host:port`.
        #[arg(long)]
        gateway: Option<String>,
        #[arg(long)]
        dump_traces: bool,
    },
    /// Derive CDF/CCDF/error-bar/signal-bar CSVs from a `run` output directory.
    Plot {
        #[arg(long)]
        out: PathBuf,
    },
    /// Serve the remote agent of a setup over the gateway, one session per seed.
    Agent {
        #[arg(long)]
        connect: String,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        setup: Setup,
        #[arg(long, value_delimiter = ',', default_value = "0")]
        seeds: Vec<u64>,
        /// Write the final parameters of each session here.
        #[arg(long)]
        checkpoint_dir: Option<PathBuf>,
    },
}

fn load(config: &Option<PathBuf>) -> Result<ScenarioConfig, ExperimentError> {
    match config {
        Some(p) => Ok(ScenarioConfig::load(p)?),
        None => Ok(ScenarioConfig::default()),
    }
}

fn run(cmd: Command) -> Result<(), ExperimentError> {
    match cmd {
        Command::Run { config, setup, seeds, out, gateway, dump_traces } => {
            let scenario = load(&config)?;
            let setups = if setup.is_empty() { Setup::ALL.to_vec() } else { setup };
            for s in setups {
                let mut spec = ExperimentSpec::new(scenario.clone(), s, seeds.clone());
                spec.out_dir = Some(out.join(s.name()));
                spec.gateway = gateway.clone();
                spec.dump_traces = dump_traces;
                let report = run_experiment(&spec)?;
                println!(
                    "{}: availability {:.5} crossing_rate {:.4} remote_messages {}",
                    s,
                    report.mean_availability(),
                    report.mean_crossing_rate(),
                    report.ledger().total()
                );
            }
            Ok(())
        }
        Command::Plot { out } => {
            let dir = emit_plot_data(&out)?;
            println!("{}", dir.display());
            Ok(())
        }
        Command::Agent { connect, config, setup, seeds, checkpoint_dir } => {
            let cfg = match setup.reward_mode() {
                Some(m) => load(&config)?.with_reward_mode(m),
                None => load(&config)?,
            };
            cfg.validate()?;
            let name = remote_agent_name(setup).ok_or_else(|| ExperimentError::Spec(format!("{setup} has no remote agent")))?;
            for seed in seeds {
                let mut agent = build_remote_learner(setup, &cfg, seed)?.expect("setup has a remote agent");
                let mode = ServeMode { explore: true, learn: true };
                let stats = loop {
                    match serve_agent(connect.as_str(), name, agent.as_mut(), mode) {
                        Err(urllc_hrl::hierarchy::gateway::GatewayError::Io(e))
                            if e.kind() == std::io::ErrorKind::ConnectionRefused =>
                        {
                            std::thread::sleep(Duration::from_millis(200));
                        }
                        other => break other?,
                    }
                };
                eprintln!("seed {seed}: {} actions over {} episodes", stats.actions, stats.episodes);
                if let (Some(dir), Some(text)) = (&checkpoint_dir, agent.checkpoint()) {
                    std::fs::create_dir_all(dir).map_err(|e| ExperimentError::File { path: dir.clone(), message: e.to_string() })?;
                    let p = dir.join(format!("seed{seed}_{name}.ckpt"));
                    std::fs::write(&p, text).map_err(|e| ExperimentError::File { path: p.clone(), message: e.to_string() })?;
                }
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let errors: Vec<_> = e.issues().into_iter().map(|(key, message)| json!({ "key": key, "message": message })).collect();
            eprintln!("{}", json!({ "errors": errors }));
            ExitCode::from(2)
        }
    }
}

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use flowpilot::harness::{run_replay_with, run_sim_with, serve, Metrics, RunConfig, ServeOptions};
use flowpilot::sim::Scenario;
use flowpilot::Result;

#[derive(Parser)]
#[command(name = "flowpilot", version, about = "Optical-flow obstacle avoidance: replay, simulate, serve")]
struct Cli {
    #[command(subcommand)]
    command: Top,
}

#[derive(Subcommand)]
enum Top {
    /// Run the pipeline.
    #[command(subcommand)]
    Run(Mode),
}

#[derive(Subcommand)]
enum Mode {
    /// Detector over a directory of recorded frames.
    Replay {
        #[arg(long)]
        frames: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Headless closed-loop simulation.
    Sim {
        #[arg(long)]
        scenario: PathBuf,
        /// Overrides the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Write every rendered camera frame here as binary PGM.
        #[arg(long)]
        export_frames: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Wall-clock simulation streamed to the operator console over WebSocket.
    Serve {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON-lines telemetry file.
    #[arg(long)]
    telemetry: Option<PathBuf>,
    /// Record wall-clock frame times in metrics and telemetry.
    #[arg(long)]
    timing: bool,
}

impl Common {
    fn config(&self) -> Result<RunConfig> {
        let mut cfg = load_config(self.config.as_deref())?;
        cfg.report_timing |= self.timing;
        Ok(cfg)
    }

    fn telemetry(&self) -> Result<Option<BufWriter<File>>> {
        Ok(match &self.telemetry {
            Some(p) => Some(BufWriter::new(File::create(p)?)),
            None => None,
        })
    }

    fn finish(&self, metrics: &Metrics) -> Result<()> {
        match &self.out {
            Some(p) => metrics.write(p),
            None => {
                println!("{}", metrics.to_json());
                Ok(())
            }
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    path.map_or_else(|| Ok(RunConfig::default()), RunConfig::load)
}

fn run(cli: Cli) -> Result<i32> {
    let Top::Run(mode) = cli.command;
    match mode {
        Mode::Replay { frames, common } => {
            let cfg = common.config()?;
            let mut tel = common.telemetry()?;
            let metrics = run_replay_with(&frames, &cfg, tel.as_mut().map(|w| w as &mut dyn Write))?;
            if let Some(mut w) = tel {
                w.flush()?;
            }
            common.finish(&metrics)?;
            Ok(metrics.termination.exit_code())
        }
        Mode::Sim {
            scenario,
            seed,
            export_frames,
            common,
        } => {
            let cfg = common.config()?;
            let mut scenario = Scenario::load(&scenario)?;
            if let Some(seed) = seed {
                scenario.seed = seed;
            }
            if let Some(dir) = &export_frames {
                std::fs::create_dir_all(dir)?;
            }
            let mut tel = common.telemetry()?;
            let mut export_err = None;
            let metrics = run_sim_with(&scenario, &cfg, tel.as_mut().map(|w| w as &mut dyn Write), |r| {
                if let (Some(dir), Some(frame), None) = (&export_frames, &r.frame, &export_err) {
                    if let Err(e) = frame.save_pgm(&dir.join(format!("frame_{:06}.pgm", r.tick))) {
                        export_err = Some(e);
                    }
                }
            })?;
            if let Some(e) = export_err {
                return Err(e);
            }
            if let Some(mut w) = tel {
                w.flush()?;
            }
            common.finish(&metrics)?;
            Ok(metrics.termination.exit_code())
        }
        Mode::Serve {
            scenario,
            config,
            port,
            host,
        } => {
            let mut opts = ServeOptions::new(Scenario::load(&scenario)?, load_config(config.as_deref())?, port);
            opts.host = host;
            let handle = serve(opts)?;
            eprintln!("serving on ws://{}", handle.local_addr());
            handle.join()?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    // clap's usage errors default to 2, which means collision here
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use bdris_core::harness::{run_experiment, write_outputs, ExperimentSpec, Preset};
use bdris_core::model::SystemConfig;
use bdris_core::orchestrator::{ArchTag, Scenario, Scheme, Site};
use bdris_core::replay::{load_channels, replay, save_channels};
use bdris_core::Error;
use clap::{Parser, Subcommand};
use serde::Serialize;

const EXIT_CONFIG: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;

#[derive(Parser)]
#[command(name = "bdris", version, about = "UAV-mounted BD-IRS edge computing simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment preset and write rows.csv, summary.csv and trace.jsonl.
    Run {
        /// TOML config; defaults are used when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "latency-vs-N")]
        preset: Preset,
        /// Base seed; trial t uses seed + t.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        trials: Option<usize>,
        /// Comma-separated architectures, overriding the preset.
        #[arg(long, value_delimiter = ',')]
        arch: Vec<ArchTag>,
        /// Comma-separated schemes, overriding the preset.
        #[arg(long, value_delimiter = ',')]
        scheme: Vec<Scheme>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Also write every trial's channels as channels_g<grid>_t<trial>.bin.
        #[arg(long)]
        dump_channels: Option<PathBuf>,
    },
    /// Check a config file and list every violated constraint.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Re-run cells on channels stored by `run --dump-channels`.
    Replay {
        /// Config matching the stored channel dimensions.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Seed that generated the tasks and positions.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        channels: PathBuf,
        #[arg(long, default_value = "gc")]
        arch: ArchTag,
        #[arg(long, value_delimiter = ',', default_value = "proposed")]
        scheme: Vec<Scheme>,
        /// JSON-lines output; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum Failure {
    Config(String),
    Infeasible(String),
    Other(anyhow::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidConfig(_) | Error::ConfigParse(_) | Error::Replay(_) => Failure::Config(e.to_string()),
            other => Failure::Other(other.into()),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Other(e)
    }
}

fn load_config(path: Option<&Path>) -> Result<SystemConfig, Failure> {
    match path {
        Some(p) => Ok(SystemConfig::load(p)?),
        None => Ok(SystemConfig::default()),
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_run(
    config: Option<&Path>,
    preset: Preset,
    seed: u64,
    trials: Option<usize>,
    arch: Vec<ArchTag>,
    scheme: Vec<Scheme>,
    out: &Path,
    dump_channels: Option<&Path>,
) -> Result<(), Failure> {
    let base = load_config(config)?;
    let mut spec = ExperimentSpec::preset(preset, base);
    spec.base_seed = seed;
    if let Some(t) = trials {
        spec.n_trials = t;
    }
    if !arch.is_empty() {
        spec.archs = arch;
    }
    if !scheme.is_empty() {
        spec.schemes = scheme;
    }
    let cfgs = spec.grid_configs()?;
    if let Some(dir) = dump_channels {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        for (gi, cfg) in cfgs.iter().enumerate() {
            for t in 0..spec.n_trials {
                let sc = Scenario::generate(cfg, seed.wrapping_add(t as u64), Site::Optimized)?;
                save_channels(&dir.join(format!("channels_g{gi}_t{t}.bin")), &sc.channels)?;
            }
        }
    }
    let result = run_experiment(&spec)?;
    let files = write_outputs(&result, out)?;
    println!(
        "{} cells, {} feasible; wrote {}, {}, {}",
        result.rows.len(),
        result.rows.iter().filter(|r| r.feasible).count(),
        files.rows.display(),
        files.summary.display(),
        files.trace.display()
    );
    if result.all_infeasible() {
        return Err(Failure::Infeasible("no cell produced a feasible allocation".into()));
    }
    Ok(())
}

fn cmd_validate(config: &Path) -> Result<(), Failure> {
    let text = std::fs::read_to_string(config).with_context(|| format!("reading {}", config.display()))?;
    let cfg = SystemConfig::from_toml_str(&text)?;
    match cfg.validate() {
        Ok(()) => {
            println!("ok");
            Ok(())
        }
        Err(issues) => {
            for i in &issues {
                println!("{i}");
            }
            Err(Failure::Config(format!("{} violated constraint(s)", issues.len())))
        }
    }
}

#[derive(Serialize)]
struct ReplayLine<'a> {
    scheme: Scheme,
    arch: ArchTag,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    metrics: Option<&'a bdris_core::orchestrator::MetricsReport>,
}

fn cmd_replay(
    config: Option<&Path>,
    seed: u64,
    channels: &Path,
    arch: ArchTag,
    scheme: &[Scheme],
    out: Option<&Path>,
) -> Result<(), Failure> {
    let cfg = load_config(config)?;
    let ch = load_channels(channels)?;
    let results = replay(&cfg, seed, ch, arch, scheme)?;
    let mut text = String::new();
    let mut any_feasible = false;
    for (s, r) in &results {
        let line = match r {
            Ok(res) => {
                any_feasible |= res.metrics.feasible();
                ReplayLine {
                    scheme: *s,
                    arch,
                    error: None,
                    metrics: Some(&res.metrics),
                }
            }
            Err(e) => ReplayLine {
                scheme: *s,
                arch,
                error: Some(e.to_string()),
                metrics: None,
            },
        };
        text.push_str(&serde_json::to_string(&line).context("serializing replay output")?);
        text.push('\n');
    }
    match out {
        Some(p) => std::fs::write(p, &text).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{text}"),
    }
    if !any_feasible {
        return Err(Failure::Infeasible("no replayed cell is feasible".into()));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.cmd {
        Command::Run {
            config,
            preset,
            seed,
            trials,
            arch,
            scheme,
            out,
            dump_channels,
        } => cmd_run(
            config.as_deref(),
            preset,
            seed,
            trials,
            arch,
            scheme,
            &out,
            dump_channels.as_deref(),
        ),
        Command::Validate { config } => cmd_validate(&config),
        Command::Replay {
            config,
            seed,
            channels,
            arch,
            scheme,
            out,
        } => cmd_replay(config.as_deref(), seed, &channels, arch, &scheme, out.as_deref()),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Infeasible(msg)) => {
            eprintln!("infeasible: {msg}");
            ExitCode::from(EXIT_INFEASIBLE)
        }
        Err(Failure::Other(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

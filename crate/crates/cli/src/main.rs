use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use humanoid_agent::agent::skill_library;
use humanoid_agent::gateway::GatewayConfig;
use humanoid_agent::harness::{
    build_world, episode_seed, run_episode, run_experiment, BackendKind, EpisodeConfig, Matrix, MetricsReport, Scenario,
};
use humanoid_agent::sim::CameraMode;
use humanoid_agent::trace::EpisodeTrace;

#[derive(Parser)]
#[command(name = "humanoid-agent", version, about = "Run and evaluate the simulated humanoid agent")]
struct Cli {
    /// Scenario file; the built-in office scenario when omitted.
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Backend {
    Oracle,
    Remote,
}

#[derive(Subcommand)]
enum Command {
    /// Run episodes of one task under one configuration.
    Run {
        #[arg(long)]
        task: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        episodes: usize,
        #[arg(long)]
        no_connector: bool,
        #[arg(long)]
        no_adjustment: bool,
        /// `active` or `fixed:<pitch>`.
        #[arg(long, default_value = "active")]
        camera: String,
        #[arg(long, value_enum, default_value = "oracle")]
        backend: Backend,
        #[arg(long)]
        endpoint: Option<String>,
        /// Environment variable holding the bearer token for the endpoint.
        #[arg(long)]
        token_env: Option<String>,
        #[arg(long, default_value_t = 60.0)]
        timeout: f64,
        /// Directory for trace files.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run an ablation matrix described by a JSON file.
    Matrix {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recompute the report from stored traces.
    Report {
        #[arg(long)]
        traces: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Print the skill library as the planner sees it.
    DumpSkills {
        #[arg(long)]
        json: bool,
    },
    /// Check a scenario file.
    ValidateScenario { path: PathBuf },
}

fn scenario(path: Option<&Path>) -> Result<Scenario> {
    match path {
        Some(p) => Scenario::load(p).with_context(|| format!("loading {}", p.display())),
        None => Ok(Scenario::office()),
    }
}

fn trace_name(t: &EpisodeTrace) -> String {
    let cfg: String = t.header.config.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' }).collect();
    format!("{}__{}__{}.jsonl", t.header.task, cfg, t.header.seed)
}

fn write_traces(dir: &Path, traces: &[EpisodeTrace]) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    for t in traces {
        let path = dir.join(trace_name(t));
        let f = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        t.write_jsonl(std::io::BufWriter::new(f))?;
    }
    Ok(())
}

fn write_report(dir: &Path, report: &MetricsReport) -> Result<()> {
    fs::write(dir.join("report.json"), report.to_json())?;
    fs::write(dir.join("report.txt"), report.to_table())?;
    Ok(())
}

fn read_traces(dir: &Path) -> Result<Vec<EpisodeTrace>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| {
            let f = fs::File::open(p)?;
            EpisodeTrace::read_jsonl(BufReader::new(f)).with_context(|| format!("reading {}", p.display()))
        })
        .collect()
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { task, seed, episodes, no_connector, no_adjustment, camera, backend, endpoint, token_env, timeout, out } => {
            let sc = scenario(cli.scenario.as_deref())?;
            let mut cfg = EpisodeConfig::new(&task, seed);
            cfg.connector_enabled = !no_connector;
            cfg.adjustment_enabled = !no_adjustment;
            cfg.camera_mode = camera.parse::<CameraMode>().map_err(anyhow::Error::msg)?;
            if let Backend::Remote = backend {
                let Some(url) = endpoint else { bail!("--backend remote needs --endpoint") };
                cfg.backend = BackendKind::Remote;
                cfg.gateway = Some(GatewayConfig { timeout, auth_token_env: token_env, ..GatewayConfig::new(url) });
            }
            let mut traces = Vec::new();
            for i in 0..episodes {
                let mut c = cfg.clone();
                if episodes > 1 {
                    c.seed = episode_seed(seed, &task, &cfg.label(), i);
                }
                traces.push(run_episode(&sc, &c)?);
            }
            let report = MetricsReport::from_traces(&traces)?;
            if let Some(dir) = out {
                write_traces(&dir, &traces)?;
                write_report(&dir, &report)?;
            }
            print!("{}", report.to_table());
        }
        Command::Matrix { config, out } => {
            let sc = scenario(cli.scenario.as_deref())?;
            let text = fs::read_to_string(&config).with_context(|| format!("reading {}", config.display()))?;
            let matrix: Matrix = serde_json::from_str(&text).context("parsing matrix")?;
            if matrix.cells.is_empty() {
                bail!("matrix has no cells");
            }
            let result = run_experiment(&sc, &matrix);
            for (task, cfg, seed, msg) in &result.failures {
                eprintln!("episode failed: {task} {cfg} seed {seed}: {msg}");
            }
            if let Some(dir) = out {
                write_traces(&dir, &result.traces)?;
                write_report(&dir, &result.report)?;
            }
            print!("{}", result.report.to_table());
        }
        Command::Report { traces, json } => {
            let report = MetricsReport::from_traces(&read_traces(&traces)?)?;
            if json {
                println!("{}", report.to_json());
            } else {
                print!("{}", report.to_table());
            }
        }
        Command::DumpSkills { json } => {
            let sc = scenario(cli.scenario.as_deref())?;
            if json {
                println!("{}", serde_json::to_string_pretty(&sc.registry()?.to_json())?);
            } else {
                let task = sc.tasks.first().context("scenario has no tasks")?;
                let w = build_world(&sc, &EpisodeConfig::new(&task.name, 0))?;
                println!("{}", skill_library(&w, true));
            }
        }
        Command::ValidateScenario { path } => {
            let sc = Scenario::load(&path).with_context(|| format!("validating {}", path.display()))?;
            println!("ok: {} ({} rooms, {} objects, {} skills, {} tasks)", sc.name, sc.scene.rooms.len(), sc.scene.objects.len(), sc.skills.len(), sc.tasks.len());
        }
    }
    Ok(())
}

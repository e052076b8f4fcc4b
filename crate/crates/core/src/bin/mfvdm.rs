use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mfvdm::config::ExperimentConfig;
use mfvdm::io;
use mfvdm::pipeline::{self, Stage, StageError, StageResult};
use mfvdm::Error;

#[derive(Parser)]
#[command(name = "mfvdm", version, about = "Multi-frequency vector diffusion maps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a dataset, build the clean graph and the rewired graphs.
    Generate(Overrides),
    /// Compute (or load cached) spectral bundles for every frequency.
    Embed(Overrides),
    /// Nearest-neighbor search for MFVDM and the baselines.
    Nn(Overrides),
    /// Nearest neighbors plus alignment angles.
    Align(Overrides),
    /// Full run over every p: generate, embed, search, align, score.
    Pipeline(Overrides),
    /// Spectral reports of I - S_k on the sphere.
    Spectrum(Overrides),
}

/// Command-line settings; these take precedence over the config file.
#[derive(Args, Debug, Default)]
struct Overrides {
    /// Config file with `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Rewiring probability; repeat or comma-separate for a sweep.
    #[arg(long, value_delimiter = ',')]
    p: Vec<f64>,
    #[arg(long)]
    kmax: Option<u32>,
    #[arg(long)]
    mk: Option<usize>,
    #[arg(long)]
    t: Option<u32>,
    /// Neighbors per node in the search.
    #[arg(long)]
    kappa: Option<usize>,
    /// Neighbors per node when building the clean graph.
    #[arg(long)]
    kappa_build: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    /// sphere, torus or external.
    #[arg(long)]
    manifold: Option<String>,
    #[arg(long)]
    graph: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    /// Comma-separated list of vdm, dm, or none.
    #[arg(long)]
    baselines: Option<String>,
    /// Arbitrary `key=value` setting; may be repeated.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl Overrides {
    fn resolve(&self) -> mfvdm::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_file(path)?,
            None => ExperimentConfig::default(),
        };
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::InvalidParameter(format!("--set expects KEY=VALUE, got {kv:?}")))?;
            cfg.set(k, v)?;
        }
        if let Some(m) = &self.manifold {
            cfg.set("manifold", m)?;
        }
        if let Some(g) = &self.graph {
            cfg.graph = Some(g.clone());
        }
        if let Some(b) = &self.baselines {
            cfg.set("baselines", b)?;
        }
        if let Some(o) = &self.out {
            cfg.out = o.clone();
        }
        if !self.p.is_empty() {
            cfg.p = self.p.clone();
        }
        cfg.seed = self.seed.unwrap_or(cfg.seed);
        cfg.kmax = self.kmax.unwrap_or(cfg.kmax);
        cfg.mk = self.mk.unwrap_or(cfg.mk);
        cfg.t = self.t.unwrap_or(cfg.t);
        cfg.kappa_search = self.kappa.unwrap_or(cfg.kappa_search);
        cfg.kappa_build = self.kappa_build.unwrap_or(cfg.kappa_build);
        cfg.n = self.n.unwrap_or(cfg.n);
        cfg.workers = self.workers.unwrap_or(cfg.workers);
        Ok(cfg)
    }
}

fn config_error(source: Error) -> StageError {
    StageError {
        stage: Stage::Config,
        source,
    }
}

impl Command {
    fn overrides(&self) -> &Overrides {
        match self {
            Command::Generate(o)
            | Command::Embed(o)
            | Command::Nn(o)
            | Command::Align(o)
            | Command::Pipeline(o)
            | Command::Spectrum(o) => o,
        }
    }
}

fn run(command: Command) -> StageResult<()> {
    let cfg = command.overrides().resolve().map_err(config_error)?;
    cfg.validate().map_err(config_error)?;
    log::info!("resolved configuration:\n{}", cfg.to_file_string());
    pipeline::with_workers(cfg.workers, move || dispatch(&command, &cfg)).map_err(config_error)?
}

fn dispatch(command: &Command, cfg: &ExperimentConfig) -> StageResult<()> {
    match command {
        Command::Generate(_) => {
            pipeline::cmd_generate(cfg)?;
        }
        Command::Embed(_) => {
            let graph = match &cfg.graph {
                Some(path) => io::load_graph(path).map_err(|source| StageError {
                    stage: Stage::Generate,
                    source,
                })?,
                None => pipeline::cmd_generate(cfg)?.graphs.swap_remove(0).1,
            };
            let set = pipeline::cmd_embed(cfg, &graph)?;
            println!(
                "{} bundles ({} solved, {} from cache) in {}",
                set.bundles.len(),
                set.solved.len(),
                set.cache_hits.len(),
                pipeline::cache_dir(cfg).display()
            );
        }
        Command::Nn(_) => {
            pipeline::cmd_nn(cfg)?;
        }
        Command::Align(_) => {
            pipeline::cmd_align(cfg)?;
        }
        Command::Pipeline(_) => {
            for run in pipeline::cmd_pipeline(cfg)? {
                for m in &run.methods {
                    let Some(report) = &m.report else { continue };
                    let nn = report.nn.as_ref().map_or(f64::NAN, |s| s.mean);
                    let al = report
                        .alignment
                        .as_ref()
                        .map_or_else(|| "-".into(), |a| format!("{:.3}°", a.median_abs_error_deg));
                    println!(
                        "p = {:<5} {:<6} mean NN geodesic {:.4}  median |align error| {}",
                        run.p, report.method, nn, al
                    );
                }
            }
        }
        Command::Spectrum(_) => {
            for f in pipeline::cmd_spectrum(cfg)? {
                println!(
                    "p = {:<5} k = {:<3} cluster sizes {:?}",
                    f.p,
                    f.report.k,
                    f.report.cluster_sizes()
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

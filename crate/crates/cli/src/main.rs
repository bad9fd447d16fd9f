use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use stochdom::analyticity::{RegionInput, SparseGridConstants};
use stochdom::runner::{self, ExperimentConfig};
use stochdom::sparse_grid::RuleKind;

/// Stochastic collocation on a randomly deformed square.
#[derive(Parser, Debug)]
#[command(name = "stochdom", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// TOML experiment file; built-in defaults apply otherwise.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for CSV and JSON artifacts.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for node solves (0 = all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Use the 257 x 257 mesh preset instead of 129 x 129.
    #[arg(long, global = true)]
    paper_scale: bool,
    /// Run even if the deformation violates the positivity assumption.
    #[arg(long, global = true)]
    force_unsafe: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Mean and variance of the QoI on one sparse grid.
    Solve(GridOverrides),
    /// Sparse-grid error against the reference for each N_s.
    SgStudy(GridOverrides),
    /// Error against the reference as the number of random variables grows.
    TruncationStudy,
    /// QoI error under mesh refinement.
    FemStudy,
    /// Analyticity region and predicted rates for given parameters.
    AnalyzeRegion(RegionArgs),
    /// Square experiment: statistics, sparse-grid and truncation curves.
    ReproducePaper,
}

#[derive(Args, Debug)]
struct GridOverrides {
    /// Vertices per side of the mesh.
    #[arg(long)]
    mesh: Option<usize>,
    #[arg(long)]
    rule: Option<RuleKind>,
    /// Sparse-grid level.
    #[arg(long)]
    w: Option<usize>,
    /// Number of active random variables.
    #[arg(long)]
    n_s: Option<usize>,
}

#[derive(Args, Debug)]
struct RegionArgs {
    #[arg(long, default_value_t = 0.5)]
    delta: f64,
    #[arg(long, default_value_t = 2)]
    d: u32,
    #[arg(long, default_value_t = 1.0)]
    a_min: f64,
    #[arg(long, default_value_t = 1.0)]
    a_max: f64,
    #[arg(long, default_value_t = 1)]
    n_s: usize,
    #[arg(long, default_value_t = 0.9)]
    beta_fraction: f64,
    /// Override the sparse-grid constant C1.
    #[arg(long)]
    c1: Option<f64>,
    /// Print an aligned text table instead of JSON.
    #[arg(long)]
    text: bool,
}

fn load_config(g: &Global) -> Result<ExperimentConfig> {
    let mut cfg = match &g.config {
        Some(p) => ExperimentConfig::load(p)?,
        None if g.paper_scale => ExperimentConfig::paper_scale(),
        None => ExperimentConfig::desk(),
    };
    if g.paper_scale && g.config.is_some() {
        let preset = ExperimentConfig::paper_scale();
        cfg.mesh = preset.mesh;
        cfg.fem = preset.fem;
    }
    if let Some(o) = &g.out {
        cfg.run.out = o.clone();
    }
    if let Some(j) = g.jobs {
        cfg.run.jobs = j;
    }
    cfg.run.force_unsafe |= g.force_unsafe;
    Ok(cfg)
}

fn apply(cfg: &mut ExperimentConfig, o: &GridOverrides) -> Result<()> {
    if let Some(m) = o.mesh {
        cfg.mesh.n = m;
    }
    if let Some(r) = o.rule {
        cfg.grid.rule = r;
    }
    if let Some(w) = o.w {
        cfg.grid.w = w;
    }
    if let Some(n) = o.n_s {
        cfg.grid.n_s = n;
        cfg.grid.n_s_list = vec![n];
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if let Command::AnalyzeRegion(a) = &cli.command {
        let input = RegionInput {
            delta_tilde: a.delta,
            d: a.d,
            a_min: a.a_min,
            a_max: a.a_max,
            n_s: a.n_s,
            beta_fraction: a.beta_fraction,
        };
        let mut consts = SparseGridConstants::default();
        if let Some(c1) = a.c1 {
            consts.c1 = c1;
        }
        let report = runner::analyze_region(&input, &consts)?;
        if a.text {
            print!("{}", report.to_text());
        } else {
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        return Ok(());
    }
    let mut cfg = load_config(&cli.global)?;
    let outcome = match &cli.command {
        Command::Solve(o) => {
            apply(&mut cfg, o)?;
            runner::run_solve(&cfg)
        }
        Command::SgStudy(o) => {
            apply(&mut cfg, o)?;
            runner::run_sg_study(&cfg)
        }
        Command::TruncationStudy => runner::run_truncation_study(&cfg),
        Command::FemStudy => runner::run_fem_study(&cfg),
        Command::ReproducePaper => runner::run_reproduce_paper(&cfg),
        Command::AnalyzeRegion(_) => unreachable!(),
    }?;
    println!("{}", outcome.summary);
    println!("artifacts in {}", cfg.run.out.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

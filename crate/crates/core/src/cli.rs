//! Command-line interface. Every subcommand works on artifact files, and
//! `run` chains them over a configured grid.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::artifact::{self, LossMatrix, RunRecord, Trajectory};
use crate::bounds::{self, Theorem};
use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::geometry::{self, DistanceMatrix};
use crate::lifetime;
use crate::magnitude::{self, ScaleGrid, Solver};
use crate::pipeline;
use crate::stability::{self, Direction, StabilityReport};

#[derive(Debug, Parser)]
#[command(name = "trajtopo", version, about = "Topological complexity and stability of optimizer trajectories")]
pub struct Cli {
    /// Output root; otherwise the config `out` key, then `$TRAJTOPO_OUT`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for grid cells.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Log verbosity: -v info, -vv debug.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// TOML experiment configuration; defaults apply when absent.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override any config key, e.g. `--set n=[50,100] --set stability.enabled=true`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the full grid: training, complexities, stability, bounds and reports.
    Run(ConfigArgs),
    /// Train every grid cell and write trajectory and loss-matrix artifacts.
    TrajGen(ConfigArgs),
    /// Pairwise distances of (optionally subsampled) trajectory iterates.
    Distmat {
        /// Trajectory artifact stem.
        trajectory: PathBuf,
        #[arg(long)]
        subsample: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output artifact stem; defaults to `<trajectory>_dist`.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Alpha-weighted lifetime sum of a distance matrix.
    LifetimeSum {
        distmat: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
    },
    /// Positive magnitude at fixed scales or at the theorem scale.
    Pmag {
        distmat: PathBuf,
        /// Comma-separated increasing scales.
        #[arg(long, value_delimiter = ',', conflicts_with = "theorem_scale", required_unless_present = "theorem_scale")]
        scales: Vec<f64>,
        /// `lambda,L,B,beta` for `s = lambda L beta^(-1/3) / B`.
        #[arg(long, value_delimiter = ',', num_args = 1)]
        theorem_scale: Option<Vec<f64>>,
        #[arg(long, default_value = "cg")]
        solver: String,
        /// Drop near-duplicate points first.
        #[arg(long)]
        dedup: bool,
    },
    /// Stability estimate from two loss matrices, or a full experiment from a config.
    Stability {
        /// Loss matrices on `S` and on `S'`.
        #[arg(num_args = 2, value_names = ["LOSS_S", "LOSS_S_PRIME"])]
        losses: Vec<PathBuf>,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        symmetrized: bool,
    },
    /// Evaluate a theorem bound from complexity samples and a stability parameter.
    Bound {
        #[arg(long)]
        theorem: Theorem,
        /// Comma-separated complexity samples (E^alpha or PMag at the theorem scale).
        #[arg(long, value_delimiter = ',')]
        samples: Vec<f64>,
        /// Directory with run records to take the samples (and defaults for L, B, n) from.
        #[arg(long)]
        runs: Option<PathBuf>,
        #[arg(long)]
        beta: Option<f64>,
        /// Stability report JSON whose mean is used as beta.
        #[arg(long)]
        stability: Option<PathBuf>,
        #[arg(long)]
        loss_bound: Option<f64>,
        #[arg(long)]
        lipschitz: Option<f64>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
    },
    /// Rebuild report.csv and summary.json from the records under a run directory.
    Report { runs: PathBuf },
}

fn print_json<T: Serialize>(v: &T) -> Result<()> {
    let s = serde_json::to_string_pretty(v).map_err(|e| Error::invalid(e.to_string()))?;
    println!("{s}");
    Ok(())
}

impl Cli {
    fn load_config(&self, args: &ConfigArgs) -> Result<ExperimentConfig> {
        let mut overrides = args.overrides.clone();
        if let Some(out) = &self.out {
            overrides.push(format!("out={}", toml::Value::String(out.display().to_string())));
        }
        if let Some(j) = self.jobs {
            overrides.push(format!("jobs={j}"));
        }
        match &args.config {
            Some(p) => ExperimentConfig::load(p, &overrides),
            None => ExperimentConfig::from_toml_str("", &overrides),
        }
    }
}

fn default_stem(p: &Path, suffix: &str) -> PathBuf {
    let mut s = p.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Executes the parsed command.
pub fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Run(args) => {
            let cfg = cli.load_config(args)?;
            let out = pipeline::run_pipeline(&cfg)?;
            print_json(&serde_json::json!({
                "out": out.out_dir.display().to_string(),
                "cells": out.records.len(),
                "computed": out.computed,
                "skipped": out.skipped,
            }))
        }
        Command::TrajGen(args) => {
            let cfg = cli.load_config(args)?;
            let root = cfg.out_dir().join("cells");
            let mut ids = Vec::new();
            for spec in pipeline::cells(&cfg) {
                let cell = pipeline::train_cell(&spec)?;
                pipeline::save_trained(&cell, &root.join(spec.run_id()))?;
                ids.push(spec.run_id());
            }
            print_json(&ids)
        }
        Command::Distmat {
            trajectory,
            subsample,
            seed,
            output,
        } => {
            let mut t = Trajectory::load(trajectory)?;
            if let Some(m) = subsample {
                t = geometry::subsample_uniform(&t, *m, *seed)?;
            }
            let d = geometry::pairwise_distances(&t)?;
            let stem = output.clone().unwrap_or_else(|| default_stem(trajectory, "_dist"));
            d.save(&stem)?;
            print_json(&serde_json::json!({"points": d.len(), "output": stem.display().to_string()}))
        }
        Command::LifetimeSum { distmat, alpha } => {
            let d = DistanceMatrix::load(distmat)?;
            let tree = lifetime::minimum_spanning_tree(&d);
            lifetime::check_alpha(*alpha)?;
            print_json(&serde_json::json!({
                "alpha": alpha,
                "e_alpha": lifetime::lifetime_sum_of_edges(&tree, *alpha),
                "edges": tree.count(),
            }))
        }
        Command::Pmag {
            distmat,
            scales,
            theorem_scale,
            solver,
            dedup,
        } => {
            let mut d = DistanceMatrix::load(distmat)?;
            if *dedup {
                d = geometry::deduplicate_relative(&d);
            }
            let solver: Solver = solver.parse()?;
            let grid = match theorem_scale {
                Some(v) => {
                    let [lambda, l, b, beta] = v[..] else {
                        return Err(Error::invalid("--theorem-scale takes lambda,L,B,beta"));
                    };
                    ScaleGrid::new(vec![magnitude::pmag_scale(lambda, l, b, beta)?])?
                }
                None => ScaleGrid::new(scales.clone())?,
            };
            print_json(&magnitude::pmag_sweep(&d, &grid, solver)?)
        }
        Command::Stability {
            losses,
            config,
            symmetrized,
        } => {
            if losses.len() == 2 {
                let a = LossMatrix::load(&losses[0])?;
                let b = LossMatrix::load(&losses[1])?;
                let direction = if *symmetrized { Direction::Symmetrized } else { Direction::Directed };
                let value = stability::estimate_with(direction, &a, &b)?;
                return print_json(&serde_json::json!({"beta_hat": value, "direction": direction}));
            }
            let cfg = cli.load_config(config)?;
            let mut reports = Vec::new();
            for &n in &cfg.n {
                for &eta in &cfg.eta {
                    let mut setup = pipeline::stability_setup(&cfg, eta, &cfg.stability);
                    if *symmetrized {
                        setup.direction = Direction::Symmetrized;
                    }
                    let j = cfg.stability.j.unwrap_or_else(|| stability::default_j(n));
                    reports.push(stability::stability_experiment(&setup, n, j, &cfg.stability.seeds)?);
                }
            }
            let out = cfg.out_dir();
            artifact::write_json(&reports, &out.join("stability.json"))?;
            std::fs::write(out.join("stability.csv"), stability::stability_csv(&reports)).map_err(|e| Error::io(out.join("stability.csv"), e))?;
            print!("{}", stability::stability_csv(&reports));
            Ok(())
        }
        Command::Bound {
            theorem,
            samples,
            runs,
            beta,
            stability,
            loss_bound,
            lipschitz,
            n,
            alpha,
            lambda,
        } => {
            let records: Vec<RunRecord> = match runs {
                Some(dir) => pipeline::load_records(dir)?,
                None => Vec::new(),
            };
            let beta = match (beta, stability) {
                (Some(b), _) => *b,
                (None, Some(p)) => {
                    let r: StabilityReport = artifact::read_json(p)?;
                    r.mean
                }
                (None, None) => return Err(Error::invalid("give --beta or --stability")),
            };
            let max_of = |f: fn(&RunRecord) -> Option<f64>| records.iter().filter_map(f).fold(None, |a: Option<f64>, v| Some(a.map_or(v, |a| a.max(v))));
            let b = loss_bound
                .or_else(|| max_of(|r| r.loss_bound_hat))
                .ok_or_else(|| Error::invalid("give --loss-bound (or --runs with recorded estimates)"))?;
            let mut values = samples.clone();
            if values.is_empty() {
                values = match theorem {
                    Theorem::Ealpha => records.iter().filter_map(|r| r.e_alpha).collect(),
                    Theorem::Pmag => records
                        .iter()
                        .flat_map(|r| r.pmag_theorem.iter().filter(|p| p.lambda == *lambda && p.beta_source == "empirical").map(|p| p.value))
                        .collect(),
                };
            }
            let result = match theorem {
                Theorem::Ealpha => {
                    let l = lipschitz
                        .or_else(|| max_of(|r| r.lipschitz_hat))
                        .ok_or_else(|| Error::invalid("give --lipschitz"))?;
                    let n = n.or(records.first().map(|r| r.n)).ok_or_else(|| Error::invalid("give --n"))?;
                    bounds::ealpha_bound_for(n, l, b, *alpha, beta, &values)?
                }
                Theorem::Pmag => bounds::pmag_bound(beta, b, *lambda, &values)?,
            };
            print_json(&result)
        }
        Command::Report { runs } => {
            let records = pipeline::load_records(runs)?;
            pipeline::write_reports(runs, &records)?;
            print!("{}", std::fs::read_to_string(runs.join("report.csv")).map_err(|e| Error::io(runs.join("report.csv"), e))?);
            Ok(())
        }
    }
}

/// Parses arguments, runs, and maps errors to exit codes (2 input, 3 numerical).
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

//! Grid execution: training, complexity, stability, bounds and reports.
//!
//! Layout under the output root:
//!
//! ```text
//! config.toml            resolved configuration
//! ledger.json            stage id -> digest of the inputs that produced it
//! stability/<id>.json    one StabilityReport per (n, eta)
//! cells/<run_id>/        record.json plus trajectory artifacts
//! stability.csv report.csv summary.json
//! log.jsonl              per-stage timings, not covered by determinism
//! ```
//!
//! A stage whose id is in the ledger with an unchanged digest, and whose
//! output still exists, is loaded instead of recomputed.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{self, ComplexityKind, GridReport, TrendSummary};
use crate::artifact::{read_json, scale_key, write_json, LossMatrix, RunRecord, Split, TheoremPmag, Trajectory};
use crate::bounds::{self, BoundResult};
use crate::config::{ConstantsConfig, ExperimentConfig, StabilityConfig, StepRuleKind};
use crate::error::{Error, Result};
use crate::geometry;
use crate::lifetime;
use crate::magnitude::{self, Solver};
use crate::stability::{self, StabilityReport, StabilitySetup};
use crate::trainer::{self, GeneratorConfig, Init, SgdConfig, StepRule, TaskKind};

/// Everything that determines the outputs of one grid cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSpec {
    pub task: TaskKind,
    pub input_dim: usize,
    pub separation: f64,
    pub n: usize,
    pub eta: f64,
    pub batch: usize,
    pub seed: u64,
    pub step_rule: StepRuleKind,
    pub radius: f64,
    pub warmup: usize,
    pub iterations: usize,
    pub subsample: usize,
    pub test_size: usize,
    pub alpha: f64,
    pub fixed_scales: Vec<f64>,
    pub theorem_lambdas: Vec<f64>,
    pub solver: String,
    pub constants: ConstantsConfig,
    pub keep_artifacts: bool,
}

impl CellSpec {
    pub fn run_id(&self) -> String {
        format!("{}_n{}_eta{}_b{}_s{}", self.task, self.n, self.eta, self.batch, self.seed)
    }

    pub fn step(&self) -> StepRule {
        match self.step_rule {
            StepRuleKind::Constant => StepRule::Constant { eta: self.eta },
            StepRuleKind::Decaying => StepRule::Decaying { c: self.eta },
        }
    }

    fn generator(&self) -> GeneratorConfig {
        GeneratorConfig {
            separation: self.separation,
            pool_size: None,
        }
    }
}

/// Grid cells in `n`, `eta`, `batch`, `seed` order.
pub fn cells(cfg: &ExperimentConfig) -> Vec<CellSpec> {
    let mut out = Vec::new();
    for &n in &cfg.n {
        for &eta in &cfg.eta {
            for &batch in &cfg.batch {
                for &seed in &cfg.seeds {
                    out.push(CellSpec {
                        task: cfg.task,
                        input_dim: cfg.input_dim,
                        separation: cfg.separation,
                        n,
                        eta,
                        batch,
                        seed,
                        step_rule: cfg.step_rule,
                        radius: cfg.radius,
                        warmup: cfg.warmup,
                        iterations: cfg.iterations,
                        subsample: cfg.subsample,
                        test_size: cfg.test_size,
                        alpha: cfg.alpha,
                        fixed_scales: cfg.pmag.fixed_scales.clone(),
                        theorem_lambdas: cfg.pmag.theorem_lambdas.clone(),
                        solver: cfg.pmag.solver.clone(),
                        constants: cfg.constants.clone(),
                        keep_artifacts: cfg.keep_artifacts,
                    });
                }
            }
        }
    }
    out
}

pub fn digest<T: Serialize>(value: &T) -> String {
    let text = serde_json::to_string(value).expect("config values serialize");
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

/// Re-labels an error with the stage that produced it, keeping its kind.
fn in_stage(id: &str, e: Error) -> Error {
    match e {
        Error::Numerical(m) => Error::Numerical(format!("{id}: {m}")),
        Error::InvalidInput(m) => Error::InvalidInput(format!("{id}: {m}")),
        Error::UndefinedStatistic(m) => Error::UndefinedStatistic(format!("{id}: {m}")),
        other => other,
    }
}

/// Trained cell before any complexity is computed.
pub struct TrainedCell {
    pub trajectory: Trajectory,
    pub train_losses: LossMatrix,
    pub test_losses: LossMatrix,
    pub record: RunRecord,
    pub task: trainer::SyntheticTask,
    pub train: trainer::Dataset,
}

/// Data generation, optional warm-up, recorded SGD and loss evaluation.
pub fn train_cell(spec: &CellSpec) -> Result<TrainedCell> {
    let (task, train, pool) = trainer::make_task_and_data_with(spec.task, spec.n, spec.input_dim, spec.seed, &spec.generator())?;
    let mut cfg = SgdConfig::new(spec.radius, spec.step(), spec.warmup, spec.seed);
    cfg.init = Init::Gaussian { std: task.default_init_std() };
    let run = |cfg: &SgdConfig| {
        if spec.batch == 1 {
            trainer::projected_sgd(&task, &train, cfg)
        } else {
            trainer::projected_sgd_minibatch(&task, &train, cfg, spec.batch)
        }
    };
    if spec.warmup > 0 {
        let warm = run(&cfg)?;
        cfg.init = Init::Given(warm.last().to_vec());
        cfg.step_offset = spec.warmup as u64;
        // fresh index stream for the recorded segment
        cfg.seed = spec.seed ^ 0x5757_5757_5757_5757;
    }
    cfg.iterations = spec.iterations;
    let mut trajectory = run(&cfg)?;
    trajectory.meta.insert("seed".into(), spec.seed.to_string());
    trajectory.meta.insert("warmup".into(), spec.warmup.to_string());

    let test = pool.subset(spec.test_size, spec.seed, 1);
    let train_losses = trainer::loss_matrix(&task, &trajectory, &train, Split::Train)?;
    let test_losses = trainer::loss_matrix(&task, &trajectory, &test, Split::Test)?;
    let gap = analysis::worst_case_gap(&train_losses, &test_losses)?;
    let mut record = RunRecord::stub(spec.run_id(), spec.task.to_string(), spec.n, spec.eta, spec.batch, spec.seed, gap);
    record.alpha = spec.alpha;
    Ok(TrainedCell {
        trajectory,
        train_losses,
        test_losses,
        record,
        task,
        train,
    })
}

/// Writes the trajectory, both loss matrices and the record stub into `dir`.
pub fn save_trained(cell: &TrainedCell, dir: &Path) -> Result<()> {
    cell.trajectory.save(&dir.join("trajectory"))?;
    cell.train_losses.save(&dir.join("train_loss"))?;
    cell.test_losses.save(&dir.join("test_loss"))?;
    cell.record.save(&dir.join("record.json"))
}

/// Stability parameters available to a cell.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Betas {
    pub empirical: Option<f64>,
    pub analytic: Option<f64>,
}

impl Betas {
    fn sources(&self) -> Vec<(&'static str, f64)> {
        let mut v = Vec::new();
        if let Some(b) = self.empirical.filter(|b| *b > 0.0) {
            v.push(("empirical", b));
        }
        if let Some(b) = self.analytic.filter(|b| *b > 0.0) {
            v.push(("analytic", b));
        }
        v
    }
}

/// Full cell: training, complexities, constants and bounds.
pub fn run_cell(spec: &CellSpec, betas: Betas, dir: &Path) -> Result<RunRecord> {
    let trained = train_cell(spec)?;
    if spec.keep_artifacts {
        save_trained(&trained, dir)?;
    }
    let TrainedCell {
        trajectory,
        train_losses,
        test_losses,
        mut record,
        task,
        train,
    } = trained;

    let sub = geometry::subsample_uniform(&trajectory, spec.subsample, spec.seed)?;
    sub.save(&dir.join("subsample"))?;
    let d = geometry::pairwise_distances(&sub)?;
    if spec.keep_artifacts {
        d.save(&dir.join("distances"))?;
    }
    record.e_alpha = Some(lifetime::alpha_weighted_lifetime_sum(&d, spec.alpha)?);

    let distinct = geometry::deduplicate_relative(&d);
    let solver: Solver = spec.solver.parse()?;
    for &s in &spec.fixed_scales {
        record.pmag.insert(scale_key(s), magnitude::positive_magnitude(&distinct, s, solver)?);
    }

    let estimate = bounds::estimate_constants(&trajectory, &train_losses)?;
    let observed_max = test_losses.values().as_slice().iter().copied().fold(estimate.loss_bound, f64::max);
    record.lipschitz_hat = Some(estimate.lipschitz);
    record.loss_bound_hat = Some(observed_max);
    let l = spec.constants.lipschitz.unwrap_or(estimate.lipschitz);
    let b = spec.constants.loss_bound.unwrap_or(observed_max);
    record.beta_hat = betas.empirical;
    record.beta_analytic = betas.analytic.or_else(|| analytic_beta(spec, &task, &train));

    let betas = Betas {
        empirical: betas.empirical,
        analytic: record.beta_analytic,
    };
    if l > 0.0 && b > 0.0 {
        for (source, beta) in betas.sources() {
            for &lambda in &spec.theorem_lambdas {
                let s = magnitude::pmag_scale(lambda, l, b, beta)?;
                let value = magnitude::positive_magnitude(&distinct, s, solver)?;
                record.pmag_theorem.push(TheoremPmag {
                    lambda,
                    beta_source: source.to_string(),
                    scale: s,
                    value,
                });
                record.bounds.push(bounds::pmag_bound(beta, b, lambda, &[value])?.with_context(l, spec.n, source));
            }
            if spec.alpha > 0.0 && spec.alpha <= 1.0 {
                let e = record.e_alpha.expect("computed above");
                let r = bounds::ealpha_bound_for(spec.n, l, b, spec.alpha, beta, &[e])?;
                record.bounds.push(r.with_context(l, spec.n, source));
            }
        }
    } else {
        log::warn!("{}: L = {l}, B = {b}; bounds skipped", spec.run_id());
    }
    Ok(record)
}

/// Closed-form stability for the decaying rule when `(L, G)` are known.
fn analytic_beta(spec: &CellSpec, task: &trainer::SyntheticTask, train: &trainer::Dataset) -> Option<f64> {
    let StepRule::Decaying { c } = spec.step() else {
        return None;
    };
    let (l, g) = match (spec.constants.lipschitz, spec.constants.gradient_lipschitz) {
        (Some(l), Some(g)) => (l, g),
        _ => task.analytic_constants(train, spec.radius)?,
    };
    let t = (spec.warmup + spec.iterations) as u64;
    stability::analytic_sgd_stability(l, g, spec.radius, c, spec.n, t).ok()
}

fn stability_id(task: TaskKind, n: usize, eta: f64) -> String {
    format!("stability_{task}_n{n}_eta{eta}")
}

#[derive(Serialize)]
struct StabilityInputs<'a> {
    setup: &'a StabilitySetup,
    n: usize,
    j: usize,
    seeds: &'a [u64],
}

/// Stability setup for one learning rate of the grid.
pub fn stability_setup(cfg: &ExperimentConfig, eta: f64, sc: &StabilityConfig) -> StabilitySetup {
    let step = match cfg.step_rule {
        StepRuleKind::Constant => StepRule::Constant { eta },
        StepRuleKind::Decaying => StepRule::Decaying { c: eta },
    };
    let mut s = StabilitySetup::new(cfg.task, cfg.input_dim, step, sc.iterations);
    s.radius = cfg.radius;
    s.init_mode = sc.init_mode;
    s.eval_split = sc.eval_split;
    s.direction = sc.direction;
    s.generator.separation = cfg.separation;
    s
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct Ledger(BTreeMap<String, String>);

struct Stage<T> {
    id: String,
    digest: String,
    value: T,
    seconds: f64,
    skipped: bool,
}

fn cached<T, F>(ledger: &Ledger, id: String, digest: String, path: &Path, compute: F) -> Result<Stage<T>>
where
    T: for<'de> Deserialize<'de>,
    F: FnOnce() -> Result<T>,
{
    let start = Instant::now();
    if ledger.0.get(&id) == Some(&digest) && path.exists() {
        if let Ok(value) = read_json(path) {
            return Ok(Stage {
                id,
                digest,
                value,
                seconds: start.elapsed().as_secs_f64(),
                skipped: true,
            });
        }
    }
    let value = compute().map_err(|e| in_stage(&id, e))?;
    Ok(Stage {
        id,
        digest,
        value,
        seconds: start.elapsed().as_secs_f64(),
        skipped: false,
    })
}

/// Result of [`run_pipeline`].
#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub out_dir: PathBuf,
    pub records: Vec<RunRecord>,
    pub stability: Vec<StabilityReport>,
    pub computed: usize,
    pub skipped: usize,
}

/// Runs every stage of the grid and writes the reports.
pub fn run_pipeline(cfg: &ExperimentConfig) -> Result<PipelineOutput> {
    cfg.validate()?;
    let out = cfg.out_dir();
    fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    fs::write(out.join("config.toml"), cfg.to_toml()?).map_err(|e| Error::io(out.join("config.toml"), e))?;
    let ledger_path = out.join("ledger.json");
    let mut ledger: Ledger = if ledger_path.exists() { read_json(&ledger_path)? } else { Ledger::default() };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))?;
    let mut log_lines = Vec::new();

    // stability, one report per (n, eta)
    let mut betas: BTreeMap<(usize, String), StabilityReport> = BTreeMap::new();
    let mut stability_reports = Vec::new();
    if cfg.stability.enabled {
        let jobs: Vec<(usize, f64)> = cfg.n.iter().flat_map(|&n| cfg.eta.iter().map(move |&e| (n, e))).collect();
        let stages = pool.install(|| {
            jobs.par_iter()
                .map(|&(n, eta)| {
                    let setup = stability_setup(cfg, eta, &cfg.stability);
                    let j = cfg.stability.j.unwrap_or_else(|| stability::default_j(n));
                    let seeds = &cfg.stability.seeds;
                    let id = stability_id(cfg.task, n, eta);
                    let dg = digest(&StabilityInputs { setup: &setup, n, j, seeds });
                    let path = out.join("stability").join(format!("{id}.json"));
                    let stage = cached(&ledger, id, dg, &path, || stability::stability_experiment(&setup, n, j, seeds))?;
                    if !stage.skipped {
                        write_json(&stage.value, &path)?;
                    }
                    Ok(stage)
                })
                .collect::<Result<Vec<_>>>()
        })?;
        for (&(n, eta), stage) in jobs.iter().zip(stages) {
            log_lines.push(log_line(&stage));
            ledger.0.insert(stage.id.clone(), stage.digest.clone());
            betas.insert((n, scale_key(eta)), stage.value.clone());
            stability_reports.push(stage.value);
        }
        fs::write(out.join("stability.csv"), stability::stability_csv(&stability_reports))
            .map_err(|e| Error::io(out.join("stability.csv"), e))?;
    }

    let specs = cells(cfg);
    let stages = pool.install(|| {
        specs
            .par_iter()
            .map(|spec| {
                let id = spec.run_id();
                let dir = out.join("cells").join(&id);
                let beta = betas.get(&(spec.n, scale_key(spec.eta)));
                let b = Betas {
                    empirical: beta.map(|r| r.mean),
                    analytic: beta.and_then(|r| r.beta_analytic),
                };
                let dg = digest(&(spec, b.empirical, b.analytic));
                let path = dir.join("record.json");
                let stage = cached(&ledger, id, dg, &path, || run_cell(spec, b, &dir))?;
                if !stage.skipped {
                    stage.value.save(&path)?;
                }
                Ok(stage)
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let (mut computed, mut skipped) = (0, 0);
    let mut records = Vec::with_capacity(stages.len());
    for stage in stages {
        if stage.skipped {
            skipped += 1;
        } else {
            computed += 1;
        }
        log_lines.push(log_line(&stage));
        ledger.0.insert(stage.id.clone(), stage.digest.clone());
        records.push(stage.value);
    }
    write_json(&ledger, &ledger_path)?;
    write_reports(&out, &records)?;

    let log_path = out.join("log.jsonl");
    let mut f = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(&log_path)
        .map_err(|e| Error::io(&log_path, e))?;
    for l in log_lines {
        writeln!(f, "{l}").map_err(|e| Error::io(&log_path, e))?;
    }
    Ok(PipelineOutput {
        out_dir: out,
        records,
        stability: stability_reports,
        computed,
        skipped,
    })
}

fn log_line<T>(stage: &Stage<T>) -> String {
    serde_json::json!({"stage": stage.id, "seconds": stage.seconds, "skipped": stage.skipped}).to_string()
}

/// Complexity kinds present in the records, in a fixed order.
pub fn complexity_kinds(records: &[RunRecord]) -> Vec<ComplexityKind> {
    let mut kinds = Vec::new();
    if records.iter().any(|r| r.e_alpha.is_some()) {
        kinds.push(ComplexityKind::EAlpha);
    }
    let mut scales: Vec<f64> = records.iter().flat_map(|r| r.pmag.keys()).filter_map(|k| k.parse().ok()).collect();
    scales.sort_by(f64::total_cmp);
    scales.dedup();
    kinds.extend(scales.into_iter().map(|scale| ComplexityKind::PmagFixedScale { scale }));
    let mut lambdas: Vec<f64> = records.iter().flat_map(|r| r.pmag_theorem.iter().map(|p| p.lambda)).collect();
    lambdas.sort_by(f64::total_cmp);
    lambdas.dedup();
    kinds.extend(lambdas.into_iter().map(|lambda| ComplexityKind::PmagTheoremScale { lambda }));
    kinds
}

/// Aggregates over the seeds of one `(n, eta, batch)` group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub n: usize,
    pub eta: f64,
    pub batch: usize,
    pub runs: usize,
    pub mean_gap: f64,
    pub mean_e_alpha: Option<f64>,
    pub mean_pmag: BTreeMap<String, f64>,
    pub beta_hat: Option<f64>,
    pub beta_analytic: Option<f64>,
    /// Bounds with expectations replaced by means over the group's seeds.
    pub bounds: Vec<BoundResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KindSummary {
    pub kind: String,
    /// Slope of complexity on gap across `n`; absent with fewer than three groups.
    pub slope_trend: Option<TrendSummary>,
    /// Spearman correlation of the mean complexity with `n`, per learning rate.
    pub spearman_vs_n: BTreeMap<String, Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub runs: usize,
    pub groups: Vec<GroupSummary>,
    pub kinds: Vec<KindSummary>,
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn group_bounds(rs: &[&RunRecord]) -> Vec<BoundResult> {
    let first = rs[0];
    let mut out = Vec::new();
    for (source, beta) in [("empirical", first.beta_hat), ("analytic", first.beta_analytic)] {
        let Some(beta) = beta.filter(|b| *b > 0.0) else { continue };
        let same = |b: &BoundResult| b.beta_source.as_deref() == Some(source);
        // L and B as used by the per-run bounds, maximized over the group
        let used: Vec<&BoundResult> = rs.iter().flat_map(|r| r.bounds.iter()).filter(|b| same(b)).collect();
        let l = used.iter().filter_map(|b| b.lipschitz).fold(f64::NAN, f64::max);
        let bb = used.iter().map(|b| b.loss_bound).fold(f64::NAN, f64::max);
        if !(l.is_finite() && bb.is_finite()) {
            continue;
        }
        let lambdas: Vec<f64> = {
            let mut v: Vec<f64> = rs.iter().flat_map(|r| r.bounds.iter()).filter(|b| same(b)).filter_map(|b| b.lambda).collect();
            v.sort_by(f64::total_cmp);
            v.dedup();
            v
        };
        for lambda in lambdas {
            let samples: Vec<f64> = rs
                .iter()
                .flat_map(|r| r.pmag_theorem.iter().filter(|p| p.lambda == lambda && p.beta_source == source).map(|p| p.value))
                .collect();
            if let Ok(r) = bounds::pmag_bound(beta, bb, lambda, &samples) {
                out.push(r.with_context(l, first.n, source));
            }
        }
        let e: Vec<f64> = rs.iter().filter_map(|r| r.e_alpha).collect();
        if first.alpha > 0.0 && first.alpha <= 1.0 && !e.is_empty() {
            if let Ok(r) = bounds::ealpha_bound_for(first.n, l, bb, first.alpha, beta, &e) {
                out.push(r.with_context(l, first.n, source));
            }
        }
    }
    out
}

pub fn summarize(records: &[RunRecord]) -> Result<Summary> {
    let mut groups: BTreeMap<(usize, String, usize), Vec<&RunRecord>> = BTreeMap::new();
    let mut order = Vec::new();
    for r in records {
        let key = (r.n, scale_key(r.eta), r.batch);
        if !groups.contains_key(&key) {
            order.push(key.clone());
        }
        groups.entry(key).or_default().push(r);
    }
    let groups_out: Vec<GroupSummary> = order
        .iter()
        .map(|key| {
            let rs = &groups[key];
            let mut pmag: BTreeMap<String, Vec<f64>> = BTreeMap::new();
            for r in rs {
                for (k, v) in &r.pmag {
                    pmag.entry(k.clone()).or_default().push(*v);
                }
            }
            GroupSummary {
                n: key.0,
                eta: rs[0].eta,
                batch: key.2,
                runs: rs.len(),
                mean_gap: mean(&rs.iter().map(|r| r.gen_gap).collect::<Vec<_>>()).unwrap_or(f64::NAN),
                mean_e_alpha: mean(&rs.iter().filter_map(|r| r.e_alpha).collect::<Vec<_>>()),
                mean_pmag: pmag.into_iter().filter_map(|(k, v)| mean(&v).map(|m| (k, m))).collect(),
                beta_hat: rs[0].beta_hat,
                beta_analytic: rs[0].beta_analytic,
                bounds: group_bounds(rs),
            }
        })
        .collect();

    let mut kinds = Vec::new();
    for kind in complexity_kinds(records) {
        let rep = analysis::grid_report(records, kind)?;
        let slope_trend = analysis::slope_vs_n(&rep.slopes()).ok();
        let mut spearman_vs_n = BTreeMap::new();
        let mut etas: Vec<f64> = records.iter().map(|r| r.eta).collect();
        etas.sort_by(f64::total_cmp);
        etas.dedup();
        for eta in etas {
            let mut by_n: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
            for r in records.iter().filter(|r| r.eta == eta) {
                if let Some(v) = kind.value(r) {
                    by_n.entry(r.n).or_default().push(v);
                }
            }
            let ns: Vec<f64> = by_n.keys().map(|n| *n as f64).collect();
            let means: Vec<f64> = by_n.values().filter_map(|v| mean(v)).collect();
            spearman_vs_n.insert(scale_key(eta), analysis::spearman(&ns, &means).ok());
        }
        kinds.push(KindSummary {
            kind: kind.name(),
            slope_trend,
            spearman_vs_n,
        });
    }
    Ok(Summary {
        runs: records.len(),
        groups: groups_out,
        kinds,
    })
}

/// Writes `report.csv` and `summary.json` for the given records.
pub fn write_reports(out: &Path, records: &[RunRecord]) -> Result<()> {
    let reports: Vec<GridReport> = complexity_kinds(records)
        .into_iter()
        .map(|k| analysis::grid_report(records, k))
        .collect::<Result<_>>()?;
    let path = out.join("report.csv");
    fs::write(&path, analysis::grid_csv(&reports)).map_err(|e| Error::io(&path, e))?;
    write_json(&summarize(records)?, &out.join("summary.json"))
}

/// Loads `cells/*/record.json` under `dir`, ordered by `(n, eta, batch, seed)`.
pub fn load_records(dir: &Path) -> Result<Vec<RunRecord>> {
    let cells = dir.join("cells");
    let root = if cells.is_dir() { cells } else { dir.to_path_buf() };
    let mut records = Vec::new();
    for entry in fs::read_dir(&root).map_err(|e| Error::io(&root, e))? {
        let p = entry.map_err(|e| Error::io(&root, e))?.path().join("record.json");
        if p.is_file() {
            records.push(RunRecord::load(&p)?);
        }
    }
    if records.is_empty() {
        return Err(Error::invalid(format!("no run records under {}", root.display())));
    }
    records.sort_by(|a, b| a.n.cmp(&b.n).then(a.eta.total_cmp(&b.eta)).then(a.batch.cmp(&b.batch)).then(a.seed.cmp(&b.seed)));
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(out: &Path) -> ExperimentConfig {
        ExperimentConfig {
            task: TaskKind::Quadratic,
            input_dim: 3,
            n: vec![20],
            eta: vec![0.05],
            seeds: vec![0],
            iterations: 50,
            subsample: 40,
            test_size: 30,
            out: Some(out.to_path_buf()),
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn one_cell_smoke_run() {
        let dir = tempfile::tempdir().unwrap();
        let out = run_pipeline(&small(dir.path())).unwrap();
        assert_eq!(out.records.len(), 1);
        let r = &out.records[0];
        assert!(r.e_alpha.unwrap().is_finite());
        assert!(r.pmag.values().all(|v| v.is_finite()));
        assert!(r.gen_gap.is_finite());
        assert!(dir.path().join("report.csv").exists());
    }

    #[test]
    fn rerun_skips_and_matches() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small(dir.path());
        cfg.stability.enabled = true;
        cfg.stability.iterations = 30;
        cfg.stability.seeds = vec![1, 2];
        let first = run_pipeline(&cfg).unwrap();
        let report = fs::read(dir.path().join("report.csv")).unwrap();
        let summary = fs::read(dir.path().join("summary.json")).unwrap();
        let second = run_pipeline(&cfg).unwrap();
        assert_eq!(second.computed, 0);
        assert_eq!(first.records, second.records);
        assert_eq!(report, fs::read(dir.path().join("report.csv")).unwrap());
        assert_eq!(summary, fs::read(dir.path().join("summary.json")).unwrap());
        assert!(first.records[0].beta_hat.is_some());
        assert!(!first.records[0].bounds.is_empty());
    }

    #[test]
    fn empty_grid_is_invalid() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small(dir.path());
        cfg.n.clear();
        assert!(matches!(run_pipeline(&cfg), Err(Error::InvalidInput(_))));
    }
}

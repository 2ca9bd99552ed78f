//! Empirical trajectory stability and the closed-form projected-SGD parameter.
//!
//! For loss matrices `A` (trajectory on `S`) and `A'` (trajectory on `S'`)
//! that share their evaluation samples, the estimate is
//!
//! ```text
//! max_j min_l max_i |A[j, i] - A'[l, i]|
//! ```
//!
//! a directed Hausdorff distance between the two trajectories under the sup
//! metric on the evaluation losses.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::artifact::{LossMatrix, Split};
use crate::error::{Error, Result};
use crate::trainer::{self, Dataset, GeneratorConfig, Init, Objective, PerturbSpec, SgdConfig, StepRule, TaskKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Directed,
    Symmetrized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalSplit {
    /// Samples of the perturbed set that were not injected.
    Train,
    /// Fresh pool samples, excluding the injected ones.
    Validation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitMode {
    RandomInit,
    LocallyConverged,
}

macro_rules! str_enum {
    ($t:ty { $($v:ident => $s:literal),* $(,)? }) => {
        impl $t {
            pub fn as_str(self) -> &'static str {
                match self { $(<$t>::$v => $s),* }
            }
        }
        impl fmt::Display for $t {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }
        impl FromStr for $t {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($s => Ok(<$t>::$v),)*
                    other => Err(Error::invalid(format!("unknown value {other:?}"))),
                }
            }
        }
    };
}

str_enum!(Direction { Directed => "directed", Symmetrized => "symmetrized" });
str_enum!(EvalSplit { Train => "train", Validation => "validation" });
str_enum!(InitMode { RandomInit => "random_init", LocallyConverged => "locally_converged" });

/// Directed estimate; rows of `losses_s` are parallelized.
pub fn estimate_stability(losses_s: &LossMatrix, losses_sprime: &LossMatrix) -> Result<f64> {
    if losses_s.sample_ids() != losses_sprime.sample_ids() {
        return Err(Error::invalid("loss matrices must share the same evaluation samples"));
    }
    if losses_s.samples() == 0 {
        return Err(Error::invalid("evaluation set is empty"));
    }
    let (a, b) = (losses_s.values(), losses_sprime.values());
    let best = (0..a.rows())
        .into_par_iter()
        .map(|j| {
            let row = a.row(j);
            let mut nearest = f64::INFINITY;
            for l in 0..b.rows() {
                let other = b.row(l);
                let mut worst = 0.0f64;
                for (x, y) in row.iter().zip(other) {
                    worst = worst.max((x - y).abs());
                    if worst >= nearest {
                        break;
                    }
                }
                nearest = nearest.min(worst);
            }
            nearest
        })
        .reduce(|| 0.0, f64::max);
    Ok(best)
}

/// `max(estimate(A, B), estimate(B, A))`.
pub fn estimate_stability_symmetrized(a: &LossMatrix, b: &LossMatrix) -> Result<f64> {
    Ok(estimate_stability(a, b)?.max(estimate_stability(b, a)?))
}

pub fn estimate_with(direction: Direction, a: &LossMatrix, b: &LossMatrix) -> Result<f64> {
    match direction {
        Direction::Directed => estimate_stability(a, b),
        Direction::Symmetrized => estimate_stability_symmetrized(a, b),
    }
}

/// Stability parameter of projected SGD with `eta_k = c / k`:
///
/// ```text
/// (4 L R / (n - 1)) * (L / (G R))^(1 / (G c + 1)) * sum_{k=1}^{T} k^(G c / (G c + 1))
/// ```
pub fn analytic_sgd_stability(l: f64, g: f64, r: f64, c: f64, n: usize, t: u64) -> Result<f64> {
    for (name, v) in [("L", l), ("G", g), ("R", r), ("c", c)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::invalid(format!("{name} must be positive and finite, got {v}")));
        }
    }
    if n < 2 {
        return Err(Error::invalid("n must be at least 2"));
    }
    if c * g >= 1.0 {
        return Err(Error::invalid(format!("step constant c = {c} must be below 1/G = {}", 1.0 / g)));
    }
    let gc = g * c;
    let exponent = gc / (gc + 1.0);
    let sum: f64 = (1..=t).map(|k| (k as f64).powf(exponent)).sum();
    Ok(4.0 * l * r / (n as f64 - 1.0) * (l / (g * r)).powf(1.0 / (gc + 1.0)) * sum)
}

/// Default replacement count: 50, scaled by `n / 100` below `n = 100`.
pub fn default_j(n: usize) -> usize {
    if n >= 100 {
        50
    } else {
        (n / 2).max(1)
    }
}

/// Mean and standard error (sample deviation over `sqrt(k)`); `stderr = 0` for one value.
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (k - 1.0);
    (mean, (var / k).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub beta_hat: Vec<f64>,
    pub direction: Direction,
    pub eval_split: EvalSplit,
    pub seeds: Vec<u64>,
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
    #[serde(rename = "J")]
    pub j: usize,
    pub init_mode: InitMode,
    /// Closed-form parameter, when the step rule and task constants allow it.
    pub beta_analytic: Option<f64>,
}

impl StabilityReport {
    pub fn from_values(beta_hat: Vec<f64>, seeds: Vec<u64>, n: usize, j: usize, setup: &StabilitySetup) -> Result<Self> {
        if beta_hat.is_empty() || beta_hat.len() != seeds.len() {
            return Err(Error::invalid("need one estimate per seed"));
        }
        let (mean, stderr) = mean_stderr(&beta_hat);
        Ok(Self {
            beta_hat,
            direction: setup.direction,
            eval_split: setup.eval_split,
            seeds,
            mean,
            stderr,
            n,
            j,
            init_mode: setup.init_mode,
            beta_analytic: None,
        })
    }

    pub const CSV_HEADER: &'static str = "init_mode,eval_split,direction,n,J,mean,stderr,seeds";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.init_mode, self.eval_split, self.direction, self.n, self.j, self.mean, self.stderr,
            self.seeds.len()
        )
    }
}

/// Table with the header row followed by one line per report.
pub fn stability_csv(reports: &[StabilityReport]) -> String {
    let mut out = String::from(StabilityReport::CSV_HEADER);
    out.push('\n');
    for r in reports {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    out
}

/// Training setup shared by every seed of a stability experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilitySetup {
    pub task: TaskKind,
    pub input_dim: usize,
    pub radius: f64,
    pub step: StepRule,
    /// Recorded iterations per run.
    pub iterations: usize,
    pub init_mode: InitMode,
    pub eval_split: EvalSplit,
    pub direction: Direction,
    pub generator: GeneratorConfig,
    /// Iterations per warm-up chunk for `locally_converged`.
    pub warmup_chunk: usize,
    pub warmup_max_chunks: usize,
    /// Relative change of the training loss between chunks that counts as a plateau.
    pub plateau_tol: f64,
}

impl StabilitySetup {
    pub fn new(task: TaskKind, input_dim: usize, step: StepRule, iterations: usize) -> Self {
        Self {
            task,
            input_dim,
            radius: 10.0,
            step,
            iterations,
            init_mode: InitMode::RandomInit,
            eval_split: EvalSplit::Train,
            direction: Direction::Directed,
            generator: GeneratorConfig::default(),
            warmup_chunk: 500,
            warmup_max_chunks: 20,
            plateau_tol: 1e-3,
        }
    }
}

fn mean_loss(task: &dyn Objective, w: &[f64], data: &Dataset) -> f64 {
    (0..data.len()).map(|i| task.loss(w, data.sample(i))).sum::<f64>() / data.len() as f64
}

/// Trains on `data` in chunks until the mean training loss stops moving.
/// Returns the checkpoint and the number of iterations spent.
pub fn warm_up(task: &dyn Objective, data: &Dataset, base: &SgdConfig, setup: &StabilitySetup) -> Result<(Vec<f64>, u64)> {
    let mut cfg = base.clone();
    cfg.iterations = setup.warmup_chunk;
    let mut w = trainer::initial_point(task.param_dim(), base);
    let mut prev = mean_loss(task, &w, data);
    let mut spent = 0u64;
    for chunk in 0..setup.warmup_max_chunks as u64 {
        cfg.init = Init::Given(w.clone());
        cfg.seed = base.seed.wrapping_add(chunk + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
        cfg.step_offset = spent;
        let traj = trainer::projected_sgd(task, data, &cfg)?;
        w = traj.last().to_vec();
        spent += setup.warmup_chunk as u64;
        let cur = mean_loss(task, &w, data);
        if (prev - cur).abs() <= setup.plateau_tol * (1.0 + cur.abs()) {
            break;
        }
        prev = cur;
    }
    Ok((w, spent))
}

/// One seed: trains on `S` and `S'` under the same index stream and starting
/// point and returns the estimate over the shared evaluation set.
pub fn stability_pair(setup: &StabilitySetup, n: usize, j: usize, seed: u64) -> Result<f64> {
    let (task, train, pool) = trainer::make_task_and_data_with(setup.task, n, setup.input_dim, seed, &setup.generator)?;
    let perturbed = trainer::perturb_dataset_detailed(&train, &PerturbSpec { j, pool: pool.clone(), seed })?;
    let injected: HashSet<u64> = perturbed.injected.iter().copied().collect();

    let mut cfg = SgdConfig::new(setup.radius, setup.step, setup.iterations, seed);
    cfg.init = Init::Gaussian { std: task.default_init_std() };
    let start = match setup.init_mode {
        InitMode::RandomInit => trainer::initial_point(task.param_dim(), &cfg),
        InitMode::LocallyConverged => {
            let (w, spent) = warm_up(&task, &train, &cfg, setup)?;
            cfg.step_offset = spent;
            w
        }
    };
    cfg.init = Init::Given(start);

    let m = trainer::eval_size(n);
    let eval = match setup.eval_split {
        EvalSplit::Train => perturbed.dataset.filter(|id| !injected.contains(&id)),
        EvalSplit::Validation => pool.filter(|id| !injected.contains(&id)),
    };
    if eval.is_empty() {
        return Err(Error::invalid("no evaluation samples remain after excluding the injected ones"));
    }
    let eval = eval.subset(m, seed, 0);
    let split = match setup.eval_split {
        EvalSplit::Train => Split::Train,
        EvalSplit::Validation => Split::Probe,
    };

    let run_s = trainer::projected_sgd(&task, &train, &cfg)?;
    let run_sp = trainer::projected_sgd(&task, &perturbed.dataset, &cfg)?;
    let a = trainer::loss_matrix(&task, &run_s, &eval, split)?;
    let b = trainer::loss_matrix(&task, &run_sp, &eval, split)?;
    estimate_with(setup.direction, &a, &b)
}

/// Runs [`stability_pair`] for every seed (in parallel) and aggregates.
pub fn stability_experiment(setup: &StabilitySetup, n: usize, j: usize, seeds: &[u64]) -> Result<StabilityReport> {
    if seeds.is_empty() {
        return Err(Error::invalid("at least one seed is required"));
    }
    if j > n {
        return Err(Error::invalid(format!("J = {j} exceeds n = {n}")));
    }
    let values = seeds
        .par_iter()
        .map(|&s| stability_pair(setup, n, j, s))
        .collect::<Result<Vec<f64>>>()?;
    let mut report = StabilityReport::from_values(values, seeds.to_vec(), n, j, setup)?;
    if let (StepRule::Decaying { c }, Some(seed)) = (setup.step, seeds.first()) {
        let (task, train, _) = trainer::make_task_and_data_with(setup.task, n, setup.input_dim, *seed, &setup.generator)?;
        if let Some((l, g)) = task.analytic_constants(&train, setup.radius) {
            report.beta_analytic = analytic_sgd_stability(l, g, setup.radius, c, n, setup.iterations as u64).ok();
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::artifact::Matrix;
    use proptest::prelude::*;

    fn lm(rows: &[Vec<f64>]) -> LossMatrix {
        let m = Matrix::from_rows(rows).unwrap();
        let it = (0..m.rows() as u64).collect();
        let si = (0..m.cols() as u64).collect();
        LossMatrix::new(m, it, si, Split::Train).unwrap()
    }

    #[test]
    fn estimate_examples() {
        let a = lm(&[vec![0.0], vec![1.0]]);
        assert_eq!(estimate_stability(&a, &a).unwrap(), 0.0);
        assert_eq!(estimate_stability(&lm(&[vec![0.3]]), &lm(&[vec![1.0]])).unwrap(), 0.7);
        let b = lm(&[vec![0.5], vec![0.9]]);
        assert!((estimate_stability(&a, &b).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn mismatched_samples_rejected() {
        let a = lm(&[vec![0.0, 1.0]]);
        let b = LossMatrix::new(Matrix::from_rows(&[[0.0, 1.0]]).unwrap(), vec![0], vec![0, 5], Split::Train).unwrap();
        assert!(estimate_stability(&a, &b).is_err());
    }

    #[test]
    fn analytic_examples() {
        assert_eq!(analytic_sgd_stability(1.0, 1.0, 1.0, 0.5, 5, 0).unwrap(), 0.0);
        assert!((analytic_sgd_stability(1.0, 1.0, 1.0, 0.5, 5, 1).unwrap() - 1.0).abs() <= 1e-12);
        let a = analytic_sgd_stability(2.0, 0.7, 3.0, 0.4, 11, 40).unwrap();
        let b = analytic_sgd_stability(2.0, 0.7, 3.0, 0.4, 21, 40).unwrap();
        assert!((a / b - 2.0).abs() <= 1e-12);
        assert!(analytic_sgd_stability(1.0, 2.0, 1.0, 0.5, 5, 3).is_err());
        assert!(analytic_sgd_stability(1.0, 1.0, 1.0, 0.5, 1, 3).is_err());
    }

    #[test]
    fn zero_replacement_gives_zero() {
        let setup = StabilitySetup::new(TaskKind::LogisticRegression, 3, StepRule::Constant { eta: 0.05 }, 60);
        let r = stability_experiment(&setup, 30, 0, &[1, 2]).unwrap();
        assert!(r.beta_hat.iter().all(|b| *b == 0.0));
    }

    #[test]
    fn single_seed_stderr_zero() {
        let setup = StabilitySetup::new(TaskKind::Quadratic, 2, StepRule::Constant { eta: 0.05 }, 40);
        let r = stability_experiment(&setup, 20, 3, &[4]).unwrap();
        assert_eq!(r.stderr, 0.0);
        assert!(r.beta_hat[0] >= 0.0);
        assert!(StabilityReport::CSV_HEADER.starts_with("init_mode,eval_split"));
    }

    #[test]
    fn decaying_rule_reports_analytic_value() {
        let setup = StabilitySetup::new(TaskKind::Quadratic, 2, StepRule::Decaying { c: 0.5 }, 30);
        let r = stability_experiment(&setup, 20, 2, &[1]).unwrap();
        assert!(r.beta_analytic.unwrap() > 0.0);
    }

    fn table(seed: u64, t: usize, m: usize) -> Vec<Vec<f64>> {
        use rand::Rng;
        let mut rng = crate::rng::stream(seed, crate::rng::Purpose::Instance, 0);
        (0..t).map(|_| (0..m).map(|_| rng.random::<f64>()).collect()).collect()
    }

    proptest! {
        #[test]
        fn estimate_properties(seed in any::<u64>(), t in 1usize..8, tp in 1usize..8, m in 1usize..6) {
            let a = lm(&table(seed, t, m));
            let b = lm(&table(seed ^ 1, tp, m));
            let est = estimate_stability(&a, &b).unwrap();
            prop_assert_eq!(estimate_stability(&a, &a).unwrap(), 0.0);
            let mut worst = 0.0f64;
            for j in 0..t { for l in 0..tp { for i in 0..m {
                worst = worst.max((a.values().get(j, i) - b.values().get(l, i)).abs());
            }}}
            prop_assert!(est >= 0.0 && est <= worst);
            let sym = estimate_stability_symmetrized(&a, &b).unwrap();
            prop_assert!(sym >= est && sym >= estimate_stability(&b, &a).unwrap());

            let perm: Vec<usize> = (0..m).rev().collect();
            let flip = |x: &LossMatrix| {
                let rows: Vec<Vec<f64>> = (0..x.iterations()).map(|r| perm.iter().map(|&i| x.values().get(r, i)).collect()).collect();
                lm(&rows)
            };
            prop_assert_eq!(estimate_stability(&flip(&a), &flip(&b)).unwrap(), est);
        }

        #[test]
        fn analytic_monotone(n in 2usize..200, t in 1u64..200, c in 0.01f64..0.9) {
            let b = analytic_sgd_stability(1.5, 1.0, 2.0, c, n, t).unwrap();
            prop_assert!(analytic_sgd_stability(1.5, 1.0, 2.0, c, n + 1, t).unwrap() < b);
            prop_assert!(analytic_sgd_stability(1.5, 1.0, 2.0, c, n, t + 1).unwrap() > b);
        }
    }
}

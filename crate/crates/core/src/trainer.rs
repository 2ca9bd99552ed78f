//! Synthetic desk-scale training: tasks, datasets, projected SGD and loss
//! evaluation.
//!
//! Projected SGD follows
//!
//! ```text
//! w_k = Pi_R[ w_{k-1} - eta_k * grad l(w_{k-1}, z_{i_k}) ],   k = 1..T
//! ```
//!
//! where `Pi_R` projects onto the centered ball of radius `R` and `i_k` is
//! drawn uniformly from `0..n` by the `(seed, BatchIndices)` stream. Runs on
//! different datasets with the same seed therefore share their algorithmic
//! randomness.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::index;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::artifact::{decode_ids, encode_ids, read_artifact, write_artifact, ArtifactManifest, LossMatrix, Matrix, Role, Split, Trajectory};
use crate::error::{Error, Result};
use crate::rng::{self, Purpose};

/// Loss and gradient of a model on one sample (features followed by the label).
pub trait Objective: Sync {
    fn param_dim(&self) -> usize;
    fn loss(&self, w: &[f64], sample: &[f64]) -> f64;
    fn gradient(&self, w: &[f64], sample: &[f64], grad: &mut [f64]);
    fn name(&self) -> String;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    LogisticRegression,
    SmallMlp,
    Quadratic,
}

impl TaskKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::LogisticRegression => "logistic_regression",
            TaskKind::SmallMlp => "small_mlp",
            TaskKind::Quadratic => "quadratic",
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "logistic_regression" | "logistic" => Ok(TaskKind::LogisticRegression),
            "small_mlp" | "mlp" => Ok(TaskKind::SmallMlp),
            "quadratic" => Ok(TaskKind::Quadratic),
            other => Err(Error::invalid(format!("unknown task kind {other:?}"))),
        }
    }
}

/// Hidden width of the small MLP.
pub const MLP_HIDDEN: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticTask {
    pub kind: TaskKind,
    pub input_dim: usize,
}

/// `log(1 + exp(x))` without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl SyntheticTask {
    pub fn new(kind: TaskKind, input_dim: usize) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::invalid("input dimension must be positive"));
        }
        Ok(Self { kind, input_dim })
    }

    /// Standard deviation of the default Gaussian initialization.
    pub fn default_init_std(&self) -> f64 {
        match self.kind {
            TaskKind::SmallMlp => 0.5,
            _ => 0.1,
        }
    }

    /// Closed-form `(L, G)` on the radius-`R` ball for the given samples, when available.
    ///
    /// Quadratic: `|grad| = |w - x| <= R + max|x|`, Hessian is the identity.
    /// Logistic: `|grad| <= |(x,1)|`, Hessian norm `<= |(x,1)|^2 / 4`.
    pub fn analytic_constants(&self, data: &Dataset, radius: f64) -> Option<(f64, f64)> {
        let max_norm = |extra: f64| {
            (0..data.len())
                .map(|i| data.features(i).iter().map(|v| v * v).sum::<f64>() + extra)
                .fold(0.0, f64::max)
                .sqrt()
        };
        match self.kind {
            TaskKind::Quadratic => Some((radius + max_norm(0.0), 1.0)),
            TaskKind::LogisticRegression => {
                let x = max_norm(1.0);
                Some((x, x * x / 4.0))
            }
            TaskKind::SmallMlp => None,
        }
    }
}

impl Objective for SyntheticTask {
    fn param_dim(&self) -> usize {
        let d = self.input_dim;
        match self.kind {
            TaskKind::Quadratic => d,
            TaskKind::LogisticRegression => d + 1,
            TaskKind::SmallMlp => MLP_HIDDEN * d + 2 * MLP_HIDDEN + 1,
        }
    }

    fn loss(&self, w: &[f64], sample: &[f64]) -> f64 {
        let d = self.input_dim;
        let (x, y) = (&sample[..d], sample[d]);
        match self.kind {
            TaskKind::Quadratic => 0.5 * w.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(),
            TaskKind::LogisticRegression => {
                let score = w[..d].iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + w[d];
                softplus(-y * score)
            }
            TaskKind::SmallMlp => {
                let (out, _) = mlp_forward(w, x, d);
                softplus(-y * out)
            }
        }
    }

    fn gradient(&self, w: &[f64], sample: &[f64], grad: &mut [f64]) {
        let d = self.input_dim;
        let (x, y) = (&sample[..d], sample[d]);
        match self.kind {
            TaskKind::Quadratic => {
                for ((g, a), b) in grad.iter_mut().zip(w).zip(x) {
                    *g = a - b;
                }
            }
            TaskKind::LogisticRegression => {
                let score = w[..d].iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + w[d];
                let coef = -y * sigmoid(-y * score);
                for (g, xi) in grad[..d].iter_mut().zip(x) {
                    *g = coef * xi;
                }
                grad[d] = coef;
            }
            TaskKind::SmallMlp => {
                let h = MLP_HIDDEN;
                let (out, hidden) = mlp_forward(w, x, d);
                let g_out = -y * sigmoid(-y * out);
                let b1_off = h * d;
                let w2_off = b1_off + h;
                let b2_off = w2_off + h;
                for k in 0..h {
                    let g_hidden = g_out * w[w2_off + k] * (1.0 - hidden[k] * hidden[k]);
                    for j in 0..d {
                        grad[k * d + j] = g_hidden * x[j];
                    }
                    grad[b1_off + k] = g_hidden;
                    grad[w2_off + k] = g_out * hidden[k];
                }
                grad[b2_off] = g_out;
            }
        }
    }

    fn name(&self) -> String {
        self.kind.to_string()
    }
}

/// Parameter layout: `W1` (hidden x d, row-major), `b1`, `w2`, `b2`.
fn mlp_forward(w: &[f64], x: &[f64], d: usize) -> (f64, [f64; MLP_HIDDEN]) {
    let h = MLP_HIDDEN;
    let mut hidden = [0.0; MLP_HIDDEN];
    let mut out = w[h * d + 2 * h];
    for k in 0..h {
        let pre = w[k * d..(k + 1) * d].iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + w[h * d + k];
        hidden[k] = pre.tanh();
        out += w[h * d + h + k] * hidden[k];
    }
    (out, hidden)
}

/// Samples as rows of features followed by the label, with globally unique ids.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    samples: Matrix,
    ids: Vec<u64>,
    pub seed: u64,
}

impl Dataset {
    pub fn new(samples: Matrix, ids: Vec<u64>, seed: u64) -> Result<Self> {
        if samples.rows() == 0 {
            return Err(Error::invalid("dataset needs at least one sample"));
        }
        if samples.cols() < 2 {
            return Err(Error::invalid("samples need at least one feature and a label"));
        }
        if ids.len() != samples.rows() {
            return Err(Error::invalid(format!("{} ids for {} samples", ids.len(), samples.rows())));
        }
        Ok(Self { samples, ids, seed })
    }

    pub fn len(&self) -> usize {
        self.samples.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.rows() == 0
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        self.samples.row(i)
    }

    pub fn features(&self, i: usize) -> &[f64] {
        let r = self.samples.row(i);
        &r[..r.len() - 1]
    }

    pub fn label(&self, i: usize) -> f64 {
        let r = self.samples.row(i);
        r[r.len() - 1]
    }

    pub fn ids(&self) -> &[u64] {
        &self.ids
    }

    pub fn samples(&self) -> &Matrix {
        &self.samples
    }

    pub fn select(&self, idx: &[usize]) -> Dataset {
        Dataset {
            samples: self.samples.select_rows(idx),
            ids: idx.iter().map(|&i| self.ids[i]).collect(),
            seed: self.seed,
        }
    }

    /// Samples whose id is accepted by `keep`, in order.
    pub fn filter(&self, keep: impl Fn(u64) -> bool) -> Dataset {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| keep(self.ids[i])).collect();
        self.select(&idx)
    }

    /// At most `m` samples drawn uniformly without replacement, in their original order.
    pub fn subset(&self, m: usize, seed: u64, index_tag: u64) -> Dataset {
        if m >= self.len() {
            return self.clone();
        }
        let mut rng = rng::stream(seed, Purpose::EvalSet, index_tag);
        let mut idx = index::sample(&mut rng, self.len(), m).into_vec();
        idx.sort_unstable();
        self.select(&idx)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let m = ArtifactManifest::new(Role::Dataset, self.len(), self.samples.cols())
            .with_meta("sample_ids", encode_ids(&self.ids))
            .with_meta("seed", self.seed)
            .with_meta("n", self.len());
        write_artifact(&m, &self.samples, path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let (m, x) = read_artifact(path)?;
        if m.role != Role::Dataset {
            return Err(Error::invalid(format!("expected a dataset artifact, found {:?}", m.role)));
        }
        let ids = decode_ids(m.meta("sample_ids")?)?;
        let seed = m.meta("seed")?.parse().map_err(|_| Error::invalid("bad dataset seed"))?;
        Self::new(x, ids, seed)
    }
}

/// Synthetic data generator parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    /// Distance between the two class means, for the classification tasks.
    pub separation: f64,
    /// Pool (test and injection) size; `None` means `max(n, 500)`.
    pub pool_size: Option<usize>,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            separation: 1.0,
            pool_size: None,
        }
    }
}

fn generate(kind: TaskKind, count: usize, input_dim: usize, gen: &GeneratorConfig, seed: u64, purpose: Purpose, first_id: u64) -> Result<Dataset> {
    let mut rng = rng::stream(seed, purpose, 0);
    let cols = input_dim + 1;
    let mut data = Vec::with_capacity(count * cols);
    let offset = gen.separation / (2.0 * (input_dim as f64).sqrt());
    for _ in 0..count {
        match kind {
            TaskKind::Quadratic => {
                data.extend((0..input_dim).map(|_| rng.sample::<f64, _>(StandardNormal)));
                data.push(0.0);
            }
            TaskKind::LogisticRegression | TaskKind::SmallMlp => {
                let y = if rng.random::<bool>() { 1.0 } else { -1.0 };
                data.extend((0..input_dim).map(|_| rng.sample::<f64, _>(StandardNormal) + y * offset));
                data.push(y);
            }
        }
    }
    let ids = (first_id..first_id + count as u64).collect();
    Dataset::new(Matrix::new(count, cols, data)?, ids, seed)
}

/// Task plus a training set of size `n` and a disjoint pool used for testing
/// and injection. Training ids are `0..n`, pool ids start at `n`.
///
/// Classification tasks draw `y = +-1` with equal probability and
/// `x ~ N(y * mu, I)` with `|2 mu| = separation`; the quadratic task draws
/// `x ~ N(0, I)`.
pub fn make_task_and_data(kind: TaskKind, n: usize, input_dim: usize, seed: u64) -> Result<(SyntheticTask, Dataset, Dataset)> {
    make_task_and_data_with(kind, n, input_dim, seed, &GeneratorConfig::default())
}

pub fn make_task_and_data_with(kind: TaskKind, n: usize, input_dim: usize, seed: u64, gen: &GeneratorConfig) -> Result<(SyntheticTask, Dataset, Dataset)> {
    if n == 0 {
        return Err(Error::invalid("n must be at least 1"));
    }
    let task = SyntheticTask::new(kind, input_dim)?;
    let pool_size = gen.pool_size.unwrap_or(n.max(500));
    if pool_size == 0 {
        return Err(Error::invalid("pool size must be at least 1"));
    }
    let train = generate(kind, n, input_dim, gen, seed, Purpose::TrainData, 0)?;
    let pool = generate(kind, pool_size, input_dim, gen, seed, Purpose::PoolData, n as u64)?;
    Ok((task, train, pool))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule")]
pub enum StepRule {
    Constant { eta: f64 },
    /// `eta_k = c / k`.
    Decaying { c: f64 },
}

impl StepRule {
    pub fn eta(&self, k: u64) -> f64 {
        match *self {
            StepRule::Constant { eta } => eta,
            StepRule::Decaying { c } => c / k as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Init {
    /// `N(0, std^2 I)` from the `(seed, Init)` stream, then projected onto the ball.
    Gaussian { std: f64 },
    Given(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SgdConfig {
    pub radius: f64,
    pub step: StepRule,
    pub iterations: usize,
    pub seed: u64,
    pub init: Init,
    /// Added to the step counter `k` (and to iteration ids), to continue a schedule.
    pub step_offset: u64,
}

impl SgdConfig {
    pub fn new(radius: f64, step: StepRule, iterations: usize, seed: u64) -> Self {
        Self {
            radius,
            step,
            iterations,
            seed,
            init: Init::Gaussian { std: 0.1 },
            step_offset: 0,
        }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::invalid("projection radius must be positive"));
        }
        match self.step {
            StepRule::Constant { eta } if !(eta >= 0.0 && eta.is_finite()) => {
                return Err(Error::invalid("learning rate must be finite and >= 0"))
            }
            StepRule::Decaying { c } if !(c > 0.0 && c.is_finite()) => {
                return Err(Error::invalid("step constant c must be positive"))
            }
            _ => {}
        }
        match &self.init {
            Init::Given(w) if w.len() != dim => Err(Error::invalid(format!(
                "initial point has dimension {}, task expects {dim}",
                w.len()
            ))),
            Init::Gaussian { std } if !(*std >= 0.0) => Err(Error::invalid("init std must be >= 0")),
            _ => Ok(()),
        }
    }
}

/// Projection onto the centered ball of radius `r`.
pub fn project_ball(w: &mut [f64], r: f64) {
    let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > r {
        let f = r / norm;
        w.iter_mut().for_each(|v| *v *= f);
    }
}

pub fn initial_point(dim: usize, cfg: &SgdConfig) -> Vec<f64> {
    match &cfg.init {
        Init::Given(w) => w.clone(),
        Init::Gaussian { std } => {
            let mut rng = rng::stream(cfg.seed, Purpose::Init, 0);
            let mut w: Vec<f64> = (0..dim).map(|_| std * rng.sample::<f64, _>(StandardNormal)).collect();
            project_ball(&mut w, cfg.radius);
            w
        }
    }
}

/// Projected SGD with one sample per step. Returns `T + 1` iterates including `w_0`.
///
/// The starting point is used as given (it is projected only by the first
/// step), so a point outside the ball shows up as row 0 only.
pub fn projected_sgd(task: &dyn Objective, data: &Dataset, cfg: &SgdConfig) -> Result<Trajectory> {
    run_sgd(task, data, cfg, 1)
}

/// Mini-batch variant: the step uses the mean gradient over `batch` indices
/// drawn uniformly with replacement. Recorded with `sampler = minibatch`.
pub fn projected_sgd_minibatch(task: &dyn Objective, data: &Dataset, cfg: &SgdConfig, batch: usize) -> Result<Trajectory> {
    if batch == 0 {
        return Err(Error::invalid("batch size must be at least 1"));
    }
    run_sgd(task, data, cfg, batch)
}

fn run_sgd(task: &dyn Objective, data: &Dataset, cfg: &SgdConfig, batch: usize) -> Result<Trajectory> {
    let dim = task.param_dim();
    cfg.validate(dim)?;
    if data.sample(0).len() < 2 {
        return Err(Error::invalid("dataset samples are too short"));
    }
    let n = data.len();
    let mut w = initial_point(dim, cfg);
    let mut rows = Vec::with_capacity((cfg.iterations + 1) * dim);
    rows.extend_from_slice(&w);
    let mut rng = rng::stream(cfg.seed, Purpose::BatchIndices, 0);
    let mut grad = vec![0.0; dim];
    let mut acc = vec![0.0; dim];
    for step in 1..=cfg.iterations as u64 {
        let k = step + cfg.step_offset;
        let eta = cfg.step.eta(k);
        acc.iter_mut().for_each(|v| *v = 0.0);
        for _ in 0..batch {
            let i = rng.random_range(0..n);
            task.gradient(&w, data.sample(i), &mut grad);
            for (a, g) in acc.iter_mut().zip(&grad) {
                *a += g;
            }
        }
        if acc.iter().any(|g| !g.is_finite()) {
            return Err(Error::numerical(format!("non-finite gradient at step {k}")));
        }
        let inv = 1.0 / batch as f64;
        for (wi, g) in w.iter_mut().zip(&acc) {
            *wi -= eta * g * inv;
        }
        project_ball(&mut w, cfg.radius);
        rows.extend_from_slice(&w);
    }
    let ids = (0..=cfg.iterations as u64).map(|t| t + cfg.step_offset).collect();
    let mut meta = BTreeMap::new();
    meta.insert("task".to_string(), task.name());
    meta.insert("n".to_string(), n.to_string());
    meta.insert("seed".to_string(), cfg.seed.to_string());
    meta.insert("batch".to_string(), batch.to_string());
    meta.insert("sampler".to_string(), if batch == 1 { "single" } else { "minibatch" }.to_string());
    meta.insert("radius".to_string(), cfg.radius.to_string());
    match cfg.step {
        StepRule::Constant { eta } => {
            meta.insert("eta".to_string(), eta.to_string());
            meta.insert("step_rule".to_string(), "constant".to_string());
        }
        StepRule::Decaying { c } => {
            meta.insert("c".to_string(), c.to_string());
            meta.insert("step_rule".to_string(), "decaying".to_string());
        }
    }
    Trajectory::new(Matrix::new(cfg.iterations + 1, dim, rows)?, ids, meta)
}

/// How many training samples are swapped for unseen ones.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbSpec {
    pub j: usize,
    pub pool: Dataset,
    pub seed: u64,
}

/// Result of [`perturb_dataset_detailed`].
#[derive(Debug, Clone, PartialEq)]
pub struct Perturbation {
    pub dataset: Dataset,
    /// Positions in the training set that were replaced, ascending.
    pub positions: Vec<usize>,
    /// Ids of the injected pool samples.
    pub injected: Vec<u64>,
}

/// Replaces `J` PRNG-chosen samples of `data` in place by `J` samples of the pool.
pub fn perturb_dataset(data: &Dataset, spec: &PerturbSpec) -> Result<Dataset> {
    Ok(perturb_dataset_detailed(data, spec)?.dataset)
}

pub fn perturb_dataset_detailed(data: &Dataset, spec: &PerturbSpec) -> Result<Perturbation> {
    let n = data.len();
    if spec.j > n {
        return Err(Error::invalid(format!("J = {} exceeds n = {n}", spec.j)));
    }
    if spec.j > spec.pool.len() {
        return Err(Error::invalid(format!("J = {} exceeds the pool size {}", spec.j, spec.pool.len())));
    }
    if spec.pool.samples().cols() != data.samples().cols() {
        return Err(Error::invalid("pool samples have a different width"));
    }
    let train_ids: HashSet<u64> = data.ids().iter().copied().collect();
    if spec.pool.ids().iter().any(|id| train_ids.contains(id)) {
        return Err(Error::invalid("pool must be disjoint from the training set"));
    }
    let mut positions = index::sample(&mut rng::stream(spec.seed, Purpose::Perturb, 0), n, spec.j).into_vec();
    positions.sort_unstable();
    let picks = index::sample(&mut rng::stream(spec.seed, Purpose::Perturb, 1), spec.pool.len(), spec.j).into_vec();

    let mut samples = data.samples().clone();
    let mut ids = data.ids().to_vec();
    let mut injected = Vec::with_capacity(spec.j);
    for (&pos, &pick) in positions.iter().zip(&picks) {
        samples.row_mut(pos).copy_from_slice(spec.pool.sample(pick));
        ids[pos] = spec.pool.ids()[pick];
        injected.push(ids[pos]);
    }
    Ok(Perturbation {
        dataset: Dataset::new(samples, ids, data.seed)?,
        positions,
        injected,
    })
}

/// Losses of every iterate on every evaluation sample, rows in parallel.
pub fn loss_matrix(task: &dyn Objective, traj: &Trajectory, eval: &Dataset, split: Split) -> Result<LossMatrix> {
    if eval.is_empty() {
        return Err(Error::invalid("evaluation set is empty"));
    }
    if traj.dim() != task.param_dim() {
        return Err(Error::invalid(format!(
            "trajectory dimension {} does not match the task ({})",
            traj.dim(),
            task.param_dim()
        )));
    }
    let m = eval.len();
    let rows: Vec<Vec<f64>> = (0..traj.len())
        .into_par_iter()
        .map(|t| {
            let w = traj.point(t);
            (0..m).map(|i| task.loss(w, eval.sample(i))).collect()
        })
        .collect();
    let mut data = Vec::with_capacity(traj.len() * m);
    for r in rows {
        data.extend(r);
    }
    LossMatrix::new(
        Matrix::new(traj.len(), m, data)?,
        traj.iteration_ids().to_vec(),
        eval.ids().to_vec(),
        split,
    )
}

/// Evaluation-set size `M = min(n, 500)`.
pub fn eval_size(n: usize) -> usize {
    n.min(500)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct ConstantLoss(f64);

    impl Objective for ConstantLoss {
        fn param_dim(&self) -> usize {
            2
        }
        fn loss(&self, _: &[f64], _: &[f64]) -> f64 {
            self.0
        }
        fn gradient(&self, _: &[f64], _: &[f64], g: &mut [f64]) {
            g.iter_mut().for_each(|v| *v = 0.0);
        }
        fn name(&self) -> String {
            "constant".into()
        }
    }

    fn one_sample(z: f64) -> Dataset {
        Dataset::new(Matrix::from_rows(&[[z, 0.0]]).unwrap(), vec![0], 0).unwrap()
    }

    #[test]
    fn zero_step_keeps_point() {
        let (task, data, _) = make_task_and_data(TaskKind::Quadratic, 10, 3, 1).unwrap();
        let cfg = SgdConfig::new(5.0, StepRule::Constant { eta: 0.0 }, 20, 3);
        let t = projected_sgd(&task, &data, &cfg).unwrap();
        assert_eq!(t.len(), 21);
        for i in 1..t.len() {
            assert_eq!(t.point(i), t.point(0));
        }
    }

    #[test]
    fn outside_start_is_projected() {
        let task = SyntheticTask::new(TaskKind::Quadratic, 2).unwrap();
        let data = Dataset::new(Matrix::from_rows(&[[0.3, -0.2, 0.0]]).unwrap(), vec![0], 0).unwrap();
        let mut cfg = SgdConfig::new(1.0, StepRule::Constant { eta: 0.0 }, 5, 0);
        cfg.init = Init::Given(vec![2.0, 0.0]);
        let t = projected_sgd(&task, &data, &cfg).unwrap();
        assert_eq!(t.point(0), &[2.0, 0.0]);
        for i in 1..t.len() {
            assert_eq!(t.point(i), &[1.0, 0.0]);
        }
    }

    #[test]
    fn single_quadratic_step() {
        let task = SyntheticTask::new(TaskKind::Quadratic, 1).unwrap();
        let mut cfg = SgdConfig::new(1.0, StepRule::Decaying { c: 0.5 }, 1, 0);
        cfg.init = Init::Given(vec![0.0]);
        let t = projected_sgd(&task, &one_sample(1.0), &cfg).unwrap();
        assert_eq!(t.point(1), &[0.5]);
    }

    #[test]
    fn perturb_cardinalities() {
        let (_, data, pool) = make_task_and_data(TaskKind::LogisticRegression, 4, 2, 5).unwrap();
        let same = perturb_dataset(&data, &PerturbSpec { j: 0, pool: pool.clone(), seed: 1 }).unwrap();
        assert_eq!(same, data);

        let all = perturb_dataset(&data, &PerturbSpec { j: 4, pool: pool.clone(), seed: 1 }).unwrap();
        assert!(all.ids().iter().all(|id| pool.ids().contains(id)));

        let two = perturb_dataset_detailed(&data, &PerturbSpec { j: 2, pool: pool.clone(), seed: 1 }).unwrap();
        let shared = (0..4).filter(|&i| two.dataset.sample(i) == data.sample(i) && two.dataset.ids()[i] == data.ids()[i]).count();
        assert_eq!(shared, 2);
        assert_eq!(two.injected.len(), 2);

        assert!(perturb_dataset(&data, &PerturbSpec { j: 5, pool: pool.clone(), seed: 1 }).is_err());
        let tiny_pool = pool.select(&[0]);
        assert!(perturb_dataset(&data, &PerturbSpec { j: 2, pool: tiny_pool, seed: 1 }).is_err());
    }

    #[test]
    fn perturb_is_deterministic() {
        let (_, data, pool) = make_task_and_data(TaskKind::Quadratic, 30, 2, 5).unwrap();
        let spec = PerturbSpec { j: 7, pool, seed: 3 };
        assert_eq!(perturb_dataset(&data, &spec).unwrap(), perturb_dataset(&data, &spec).unwrap());
    }

    #[test]
    fn loss_matrix_examples() {
        let t = Trajectory::from_points(Matrix::from_rows(&[[0.0, 1.0], [2.0, 3.0]]).unwrap()).unwrap();
        let (_, data, _) = make_task_and_data(TaskKind::Quadratic, 3, 1, 0).unwrap();
        let c = loss_matrix(&ConstantLoss(0.7), &t, &data, Split::Train).unwrap();
        assert!(c.values().as_slice().iter().all(|v| *v == 0.7));

        let task = SyntheticTask::new(TaskKind::Quadratic, 1).unwrap();
        let single = Trajectory::from_points(Matrix::from_rows(&[[0.25]]).unwrap()).unwrap();
        let l = loss_matrix(&task, &single, &one_sample(1.0), Split::Test).unwrap();
        assert_eq!(l.values().get(0, 0), task.loss(&[0.25], &[1.0, 0.0]));

        let two = Trajectory::from_points(Matrix::from_rows(&[[0.0], [0.5]]).unwrap()).unwrap();
        let eval = Dataset::new(Matrix::from_rows(&[[1.0, 0.0], [-2.0, 0.0]]).unwrap(), vec![0, 1], 0).unwrap();
        let l = loss_matrix(&task, &two, &eval, Split::Train).unwrap();
        let expected = [[0.5, 2.0], [0.125, 3.125]];
        for (t, row) in expected.iter().enumerate() {
            for (i, v) in row.iter().enumerate() {
                assert!((l.values().get(t, i) - v).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn datasets_are_deterministic_and_disjoint() {
        let (_, a, pa) = make_task_and_data(TaskKind::SmallMlp, 40, 3, 9).unwrap();
        let (_, b, pb) = make_task_and_data(TaskKind::SmallMlp, 40, 3, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(pa, pb);
        let ids: HashSet<u64> = a.ids().iter().copied().collect();
        assert!(pa.ids().iter().all(|id| !ids.contains(id)));
        let (_, one, _) = make_task_and_data(TaskKind::Quadratic, 1, 2, 0).unwrap();
        assert_eq!(one.len(), 1);
        assert!("nope".parse::<TaskKind>().is_err());
        assert!(make_task_and_data(TaskKind::Quadratic, 0, 2, 0).is_err());
    }
}

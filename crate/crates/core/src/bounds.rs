//! Generalization bounds driven by trajectory complexity and stability.
//!
//! With `K = 2 (2 L sqrt(n) / B)^alpha` the lifetime-sum bound reads
//!
//! ```text
//! beta^(1/3) * (2 + 2B + 2B * mean sqrt(2 ln(1 + K E^alpha)))
//! ```
//!
//! and the positive-magnitude bound, with magnitudes taken at
//! `s(lambda) = lambda L beta^(-1/3) / B`,
//!
//! ```text
//! beta^(1/3) * (2 + lambda B + (2B / lambda) * mean ln PMag)
//! ```
//!
//! Expectations are replaced by sample means over runs. The Rademacher
//! estimator and the two lemma right-hand sides exist to check the
//! intermediate inequalities on small instances.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::artifact::{LossMatrix, Matrix, Trajectory};
use crate::error::{Error, Result};
use crate::rng::{self, Purpose};
use crate::trainer::{Dataset, Objective};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstantsSource {
    UserSupplied,
    Empirical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantsEstimate {
    /// Lipschitz constant of the loss in the parameters. Empirical values are lower bounds.
    pub lipschitz: f64,
    pub loss_bound: f64,
    pub gradient_lipschitz: Option<f64>,
    pub source: ConstantsSource,
    /// Number of (iterate pair, sample) probes behind an empirical estimate.
    pub probes: usize,
}

impl ConstantsEstimate {
    pub fn user(lipschitz: f64, loss_bound: f64, gradient_lipschitz: Option<f64>) -> Result<Self> {
        positive("L", lipschitz)?;
        positive("B", loss_bound)?;
        if let Some(g) = gradient_lipschitz {
            positive("G", g)?;
        }
        Ok(Self {
            lipschitz,
            loss_bound,
            gradient_lipschitz,
            source: ConstantsSource::UserSupplied,
            probes: 0,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Theorem {
    Ealpha,
    Pmag,
}

impl std::str::FromStr for Theorem {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ealpha" => Ok(Theorem::Ealpha),
            "pmag" => Ok(Theorem::Pmag),
            other => Err(Error::invalid(format!("unknown theorem {other:?}, expected ealpha or pmag"))),
        }
    }
}

/// A bound value together with the inputs that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundResult {
    pub theorem: Theorem,
    pub beta: f64,
    /// Where `beta` came from, e.g. `empirical` or `analytic`.
    pub beta_source: Option<String>,
    pub value: f64,
    pub loss_bound: f64,
    pub lipschitz: Option<f64>,
    pub alpha: Option<f64>,
    pub lambda: Option<f64>,
    pub n: Option<usize>,
    pub k: Option<f64>,
    pub complexity_mean: f64,
    pub samples: usize,
}

impl BoundResult {
    pub fn with_context(mut self, lipschitz: f64, n: usize, beta_source: &str) -> Self {
        self.lipschitz = Some(lipschitz);
        self.n = Some(n);
        self.beta_source = Some(beta_source.to_string());
        self
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be positive and finite, got {v}")))
    }
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// `2 (2 L sqrt(n) / B)^alpha` for `alpha` in `(0, 1]`.
pub fn kn_alpha(n: usize, l: f64, b: f64, alpha: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::invalid("n must be at least 1"));
    }
    positive("L", l)?;
    positive("B", b)?;
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::invalid(format!("alpha must lie in (0, 1], got {alpha}")));
    }
    Ok(2.0 * (2.0 * l * (n as f64).sqrt() / b).powf(alpha))
}

pub fn ealpha_bound(beta: f64, b: f64, k: f64, ealpha_samples: &[f64]) -> Result<BoundResult> {
    positive("beta", beta)?;
    positive("B", b)?;
    positive("K", k)?;
    if ealpha_samples.is_empty() {
        return Err(Error::invalid("need at least one E^alpha sample"));
    }
    if let Some(e) = ealpha_samples.iter().find(|e| !(**e >= 0.0 && e.is_finite())) {
        return Err(Error::invalid(format!("E^alpha samples must be finite and >= 0, got {e}")));
    }
    let terms: Vec<f64> = ealpha_samples.iter().map(|e| (2.0 * (k * e).ln_1p()).sqrt()).collect();
    let value = beta.cbrt() * (2.0 + 2.0 * b + 2.0 * b * mean(&terms));
    Ok(BoundResult {
        theorem: Theorem::Ealpha,
        beta,
        beta_source: None,
        value,
        loss_bound: b,
        lipschitz: None,
        alpha: None,
        lambda: None,
        n: None,
        k: Some(k),
        complexity_mean: mean(ealpha_samples),
        samples: ealpha_samples.len(),
    })
}

/// Lifetime-sum bound with `K` computed from `(n, L, B, alpha)`.
pub fn ealpha_bound_for(n: usize, l: f64, b: f64, alpha: f64, beta: f64, ealpha_samples: &[f64]) -> Result<BoundResult> {
    let k = kn_alpha(n, l, b, alpha)?;
    let mut r = ealpha_bound(beta, b, k, ealpha_samples)?;
    r.alpha = Some(alpha);
    r.lipschitz = Some(l);
    r.n = Some(n);
    Ok(r)
}

/// Positive-magnitude bound; samples must be evaluated at `s(lambda)`.
pub fn pmag_bound(beta: f64, b: f64, lambda: f64, pmag_samples: &[f64]) -> Result<BoundResult> {
    positive("beta", beta)?;
    positive("B", b)?;
    positive("lambda", lambda)?;
    if pmag_samples.is_empty() {
        return Err(Error::invalid("need at least one PMag sample"));
    }
    if let Some(p) = pmag_samples.iter().find(|p| !(**p >= 1.0 && p.is_finite())) {
        return Err(Error::invalid(format!("PMag samples must be finite and >= 1, got {p}")));
    }
    let logs: Vec<f64> = pmag_samples.iter().map(|p| p.ln()).collect();
    let value = beta.cbrt() * (2.0 + lambda * b + 2.0 * b / lambda * mean(&logs));
    Ok(BoundResult {
        theorem: Theorem::Pmag,
        beta,
        beta_source: None,
        value,
        loss_bound: b,
        lipschitz: None,
        alpha: None,
        lambda: Some(lambda),
        n: None,
        k: None,
        complexity_mean: mean(pmag_samples),
        samples: pmag_samples.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RademacherMode {
    MonteCarlo,
    Exhaustive,
}

/// Largest `n` accepted by the exhaustive mode.
pub const EXHAUSTIVE_MAX_N: usize = 20;

/// `E_eps sup_w (1/n) sum_i eps_i losses[w, i]` over a `|W| x n` table.
///
/// Exhaustive mode enumerates all `2^n` sign patterns and returns stderr 0.
pub fn mc_rademacher(losses: &Matrix, draws: usize, seed: u64, mode: RademacherMode) -> Result<(f64, f64)> {
    let (w, n) = (losses.rows(), losses.cols());
    if w == 0 || n == 0 {
        return Err(Error::invalid("loss table must be nonempty"));
    }
    match mode {
        RademacherMode::Exhaustive => {
            if n > EXHAUSTIVE_MAX_N {
                return Err(Error::invalid(format!("exhaustive mode needs n <= {EXHAUSTIVE_MAX_N}, got {n}")));
            }
            Ok((exhaustive(losses), 0.0))
        }
        RademacherMode::MonteCarlo => {
            if draws == 0 {
                return Err(Error::invalid("need at least one draw"));
            }
            let sups: Vec<f64> = (0..draws as u64)
                .into_par_iter()
                .map(|d| {
                    let mut r = rng::stream(seed, Purpose::Rademacher, d);
                    let signs: Vec<f64> = (0..n).map(|_| if r.random::<bool>() { 1.0 } else { -1.0 }).collect();
                    signed_sup(losses, &signs)
                })
                .collect();
            let m = mean(&sups);
            let stderr = if draws > 1 {
                let var = sups.iter().map(|s| (s - m) * (s - m)).sum::<f64>() / (draws as f64 - 1.0);
                (var / draws as f64).sqrt()
            } else {
                0.0
            };
            Ok((m, stderr))
        }
    }
}

fn signed_sup(losses: &Matrix, signs: &[f64]) -> f64 {
    let n = signs.len() as f64;
    losses
        .row_iter()
        .map(|row| row.iter().zip(signs).map(|(l, e)| l * e).sum::<f64>() / n)
        .fold(f64::NEG_INFINITY, f64::max)
}

fn exhaustive(losses: &Matrix) -> f64 {
    let n = losses.cols();
    // Pattern g and its complement share one pass: their signed sums are
    // exact negatives, so symmetric cases cancel exactly.
    let half = 1u64 << (n - 1);
    let chunk = 1u64 << 12;
    let partial: Vec<f64> = (0..half.div_ceil(chunk))
        .into_par_iter()
        .map(|c| {
            let mut acc = 0.0;
            let mut signs = vec![0.0f64; n];
            for g in c * chunk..((c + 1) * chunk).min(half) {
                for (i, e) in signs.iter_mut().enumerate() {
                    *e = if g >> i & 1 == 1 { -1.0 } else { 1.0 };
                }
                let (mut hi, mut lo) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
                for row in losses.row_iter() {
                    let s: f64 = row.iter().zip(&signs).map(|(l, e)| l * e).sum();
                    hi = hi.max(s);
                    lo = lo.max(-s);
                }
                acc += hi + lo;
            }
            acc
        })
        .collect();
    partial.iter().sum::<f64>() / ((2 * half) as f64 * n as f64)
}

fn check_m(m: usize) -> Result<()> {
    if m == 0 {
        Err(Error::invalid("m must be at least 1"))
    } else {
        Ok(())
    }
}

/// `B / sqrt(m) + B sqrt(2 ln(1 + K E^alpha) / m)`.
pub fn lemma_rhs_ealpha(m: usize, b: f64, k: f64, ealpha: f64) -> Result<f64> {
    check_m(m)?;
    positive("B", b)?;
    positive("K", k)?;
    if !(ealpha >= 0.0 && ealpha.is_finite()) {
        return Err(Error::invalid(format!("E^alpha must be finite and >= 0, got {ealpha}")));
    }
    let m = m as f64;
    Ok(b / m.sqrt() + b * (2.0 * (k * ealpha).ln_1p() / m).sqrt())
}

/// `lambda B^2 / (2m) + ln(PMag) / lambda`, with PMag taken at scale `L lambda`.
pub fn lemma_rhs_pmag(m: usize, b: f64, lambda: f64, pmag_at_l_lambda: f64) -> Result<f64> {
    check_m(m)?;
    positive("B", b)?;
    positive("lambda", lambda)?;
    if !(pmag_at_l_lambda >= 1.0 && pmag_at_l_lambda.is_finite()) {
        return Err(Error::invalid(format!("PMag must be finite and >= 1, got {pmag_at_l_lambda}")));
    }
    Ok(lambda * b * b / (2.0 * m as f64) + pmag_at_l_lambda.ln() / lambda)
}

const MIN_STEP: f64 = 1e-12;

/// Empirical `L` and `B` from consecutive iterates and their losses.
///
/// `L` is the largest `|l(w_{t+1}, z) - l(w_t, z)| / |w_{t+1} - w_t|` over
/// steps longer than `1e-12`, a lower bound on the true constant. `B` is the
/// largest observed loss.
pub fn estimate_constants(traj: &Trajectory, losses: &LossMatrix) -> Result<ConstantsEstimate> {
    if traj.len() < 2 {
        return Err(Error::invalid("need at least two iterates"));
    }
    if traj.iteration_ids() != losses.iteration_ids() {
        return Err(Error::invalid("loss rows must correspond to the trajectory iterates"));
    }
    let vals = losses.values();
    let mut lipschitz = 0.0f64;
    let mut probes = 0usize;
    for t in 0..traj.len() - 1 {
        let step = dist(traj.point(t), traj.point(t + 1));
        if step < MIN_STEP {
            continue;
        }
        for i in 0..vals.cols() {
            lipschitz = lipschitz.max((vals.get(t + 1, i) - vals.get(t, i)).abs() / step);
        }
        probes += vals.cols();
    }
    if probes == 0 {
        return Err(Error::numerical("every step of the trajectory is shorter than 1e-12"));
    }
    let loss_bound = vals.as_slice().iter().copied().fold(0.0, f64::max);
    Ok(ConstantsEstimate {
        lipschitz,
        loss_bound,
        gradient_lipschitz: None,
        source: ConstantsSource::Empirical,
        probes,
    })
}

/// Empirical gradient-Lipschitz constant `max |grad(w_{t+1}) - grad(w_t)| / |w_{t+1} - w_t|`.
pub fn estimate_gradient_lipschitz(task: &dyn Objective, traj: &Trajectory, eval: &Dataset) -> Result<f64> {
    let dim = task.param_dim();
    if traj.dim() != dim {
        return Err(Error::invalid("trajectory dimension does not match the task"));
    }
    let mut ga = vec![0.0; dim];
    let mut gb = vec![0.0; dim];
    let mut best = 0.0f64;
    let mut used = false;
    for t in 0..traj.len().saturating_sub(1) {
        let step = dist(traj.point(t), traj.point(t + 1));
        if step < MIN_STEP {
            continue;
        }
        used = true;
        for i in 0..eval.len() {
            task.gradient(traj.point(t), eval.sample(i), &mut ga);
            task.gradient(traj.point(t + 1), eval.sample(i), &mut gb);
            best = best.max(dist(&ga, &gb) / step);
        }
    }
    if !used {
        return Err(Error::numerical("every step of the trajectory is shorter than 1e-12"));
    }
    Ok(best)
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

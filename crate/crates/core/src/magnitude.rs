//! Weightings and positive magnitude of scaled finite metric spaces.
//!
//! For a scale `s > 0` the similarity matrix is `Z[a][b] = exp(-s * d(a, b))`.
//! A weighting `gamma` solves `Z gamma = 1`; the magnitude is `sum(gamma)` and
//! the positive magnitude is `sum(max(gamma, 0))`. For distinct Euclidean
//! points `Z` is symmetric positive definite, so both a Cholesky solve and
//! conjugate gradients apply.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::artifact::Matrix;
use crate::error::{Error, Result};
use crate::geometry::DistanceMatrix;

/// Scale used for grid experiments when the theorem schedule is not wanted.
pub const FIXED_SCALE: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Solver {
    Direct,
    ConjugateGradient,
}

impl std::str::FromStr for Solver {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(Solver::Direct),
            "cg" | "conjugate_gradient" => Ok(Solver::ConjugateGradient),
            other => Err(Error::invalid(format!("unknown solver {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightingOptions {
    /// Maximum accepted `||Z gamma - 1||_inf`.
    pub tolerance: f64,
    /// CG stops once `||r||_2 <= cg_relative_tol * ||1||_2`.
    pub cg_relative_tol: f64,
    /// CG gives up after `cg_iteration_factor * m` iterations.
    pub cg_iteration_factor: usize,
    /// Iterative refinement steps after the Cholesky solve.
    pub refinement_steps: usize,
}

impl Default for WeightingOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            cg_relative_tol: 1e-12,
            cg_iteration_factor: 10,
            refinement_steps: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightingSolution {
    pub gamma: Vec<f64>,
    /// `||Z gamma - 1||_inf`.
    pub residual: f64,
    /// Solver that produced `gamma` (after any fallback).
    pub solver: Solver,
    pub iterations: usize,
}

/// Positive magnitude together with the plain magnitude diagnostic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MagnitudeResult {
    pub scale: f64,
    pub pmag: f64,
    pub magnitude: f64,
    pub solver: Solver,
    pub iterations: usize,
    pub residual: f64,
}

/// Strictly increasing list of positive scales.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleGrid(Vec<f64>);

impl ScaleGrid {
    pub fn new(scales: Vec<f64>) -> Result<Self> {
        if scales.is_empty() {
            return Err(Error::invalid("scale grid is empty"));
        }
        if scales.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(Error::invalid("scales must be positive and finite"));
        }
        if scales.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("scales must be strictly increasing"));
        }
        Ok(Self(scales))
    }

    pub fn scales(&self) -> &[f64] {
        &self.0
    }
}

/// `Z[a][b] = exp(-s d(a,b))`; entries below the smallest normal double are flushed to zero.
pub fn similarity_matrix(d: &DistanceMatrix, s: f64) -> Matrix {
    let m = d.len();
    let mut z = Matrix::zeros(m, m);
    for i in 0..m {
        let row = z.row_mut(i);
        for (j, slot) in row.iter_mut().enumerate() {
            let v = (-s * d.get(i, j)).exp();
            *slot = if v < f64::MIN_POSITIVE { 0.0 } else { v };
        }
    }
    z
}

fn matvec(z: &Matrix, x: &[f64], out: &mut [f64]) {
    let dot = |i: usize| z.row(i).iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    if z.rows() >= 256 {
        out.par_iter_mut().enumerate().for_each(|(i, o)| *o = dot(i));
    } else {
        for (i, o) in out.iter_mut().enumerate() {
            *o = dot(i);
        }
    }
}

fn residual_inf(z: &Matrix, gamma: &[f64]) -> f64 {
    let mut zg = vec![0.0; gamma.len()];
    matvec(z, gamma, &mut zg);
    zg.iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Conjugate gradients on `Z x = 1`, preconditioned by `diag(Z)`, which is the identity.
/// Returns `None` on breakdown or when the iteration cap is reached.
fn conjugate_gradient(z: &Matrix, opts: &WeightingOptions) -> Option<(Vec<f64>, usize)> {
    let m = z.rows();
    let mut x = vec![0.0; m];
    let mut r = vec![1.0; m];
    let mut p = r.clone();
    let mut ap = vec![0.0; m];
    let mut rs = dot(&r, &r);
    let stop = opts.cg_relative_tol * (m as f64).sqrt();
    let max_iter = opts.cg_iteration_factor * m;
    for k in 1..=max_iter {
        matvec(z, &p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return None;
        }
        let step = rs / pap;
        for i in 0..m {
            x[i] += step * p[i];
            r[i] -= step * ap[i];
        }
        let rs_new = dot(&r, &r);
        if rs_new.sqrt() <= stop {
            return Some((x, k));
        }
        let beta = rs_new / rs;
        for i in 0..m {
            p[i] = r[i] + beta * p[i];
        }
        rs = rs_new;
    }
    None
}

fn direct(z: &Matrix, opts: &WeightingOptions) -> Result<(Vec<f64>, usize)> {
    let m = z.rows();
    let zm = DMatrix::from_row_slice(m, m, z.as_slice());
    let chol = zm
        .cholesky()
        .ok_or_else(|| Error::numerical("similarity matrix is not positive definite (duplicate or non-finite points?)"))?;
    let ones = DVector::from_element(m, 1.0);
    let mut gamma = chol.solve(&ones);
    let mut steps = 0;
    let mut zg = vec![0.0; m];
    while steps < opts.refinement_steps {
        matvec(z, gamma.as_slice(), &mut zg);
        let res = zg.iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max);
        if res <= opts.tolerance * 1e-2 {
            break;
        }
        let r = DVector::from_iterator(m, zg.iter().map(|v| 1.0 - v));
        gamma += chol.solve(&r);
        steps += 1;
    }
    Ok((gamma.as_slice().to_vec(), steps))
}

/// Weighting of `s * X` with the default [`WeightingOptions`].
pub fn weighting(d: &DistanceMatrix, s: f64, solver: Solver) -> Result<WeightingSolution> {
    weighting_with(d, s, solver, &WeightingOptions::default())
}

pub fn weighting_with(d: &DistanceMatrix, s: f64, solver: Solver, opts: &WeightingOptions) -> Result<WeightingSolution> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::invalid(format!("scale must be positive and finite, got {s}")));
    }
    if d.is_empty() {
        return Err(Error::invalid("weighting of an empty space"));
    }
    if let Some(min) = d.min_distance() {
        if min <= 0.0 {
            return Err(Error::numerical(
                "coincident points make the similarity matrix singular; deduplicate first",
            ));
        }
    }
    let z = similarity_matrix(d, s);

    let cg = match solver {
        Solver::ConjugateGradient => conjugate_gradient(&z, opts)
            .map(|(g, it)| (g, it, Solver::ConjugateGradient))
            .filter(|(g, _, _)| g.iter().all(|v| v.is_finite()) && residual_inf(&z, g) <= opts.tolerance),
        Solver::Direct => None,
    };
    let (gamma, iterations, used) = match cg {
        Some(found) => found,
        None => {
            if solver == Solver::ConjugateGradient {
                log::debug!("conjugate gradient did not converge at s = {s}; falling back to Cholesky");
            }
            let (g, it) = direct(&z, opts)?;
            (g, it, Solver::Direct)
        }
    };
    let residual = residual_inf(&z, &gamma);
    if !(residual <= opts.tolerance) || gamma.iter().any(|v| !v.is_finite()) {
        return Err(Error::numerical(format!(
            "weighting residual {residual:e} exceeds tolerance {:e} at scale {s}",
            opts.tolerance
        )));
    }
    Ok(WeightingSolution {
        gamma,
        residual,
        solver: used,
        iterations,
    })
}

/// `PMag(s X) = sum_b max(gamma_s(b), 0)`.
pub fn positive_magnitude(d: &DistanceMatrix, s: f64, solver: Solver) -> Result<f64> {
    Ok(magnitude_at(d, s, solver)?.pmag)
}

pub fn magnitude_at(d: &DistanceMatrix, s: f64, solver: Solver) -> Result<MagnitudeResult> {
    magnitude_at_with(d, s, solver, &WeightingOptions::default())
}

pub fn magnitude_at_with(d: &DistanceMatrix, s: f64, solver: Solver, opts: &WeightingOptions) -> Result<MagnitudeResult> {
    let w = weighting_with(d, s, solver, opts)?;
    Ok(MagnitudeResult {
        scale: s,
        pmag: w.gamma.iter().map(|g| g.max(0.0)).sum(),
        magnitude: w.gamma.iter().sum(),
        solver: w.solver,
        iterations: w.iterations,
        residual: w.residual,
    })
}

/// Magnitudes over a scale grid, computed in parallel, returned in grid order.
pub fn pmag_sweep(d: &DistanceMatrix, grid: &ScaleGrid, solver: Solver) -> Result<Vec<MagnitudeResult>> {
    grid.scales().par_iter().map(|&s| magnitude_at(d, s, solver)).collect()
}

/// Theorem scale schedule `s(lambda) = lambda * L * beta^(-1/3) / B`.
pub fn pmag_scale(lambda: f64, lipschitz: f64, loss_bound: f64, beta: f64) -> Result<f64> {
    for (name, v) in [("lambda", lambda), ("L", lipschitz), ("B", loss_bound), ("beta", beta)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::invalid(format!("{name} must be positive and finite, got {v}")));
        }
    }
    Ok(lambda * lipschitz / beta.cbrt() / loss_bound)
}

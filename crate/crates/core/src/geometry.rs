//! Euclidean geometry over trajectories: distance matrices, uniform
//! subsampling, and removal of numerically coincident iterates.

use std::path::Path;

use rand::seq::index;
use rayon::prelude::*;

use crate::artifact::{decode_ids, encode_ids, read_artifact, write_artifact, ArtifactManifest, Matrix, Role, Trajectory};
use crate::error::{Error, Result};
use crate::rng::{self, Purpose};

/// Default number of iterates kept by [`subsample_uniform`].
pub const DEFAULT_SUBSAMPLE: usize = 1500;
/// Relative duplicate threshold used by [`deduplicate_relative`].
pub const DEFAULT_RELATIVE_EPS: f64 = 1e-12;

/// Symmetric matrix of pairwise distances with a zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    values: Matrix,
    point_ids: Vec<u64>,
}

impl DistanceMatrix {
    pub fn new(values: Matrix, point_ids: Vec<u64>) -> Result<Self> {
        let m = values.rows();
        if values.cols() != m {
            return Err(Error::invalid(format!("distance matrix must be square, got {m}x{}", values.cols())));
        }
        if point_ids.len() != m {
            return Err(Error::invalid(format!("{} point ids for {m} points", point_ids.len())));
        }
        for i in 0..m {
            if values.get(i, i) != 0.0 {
                return Err(Error::invalid(format!("nonzero diagonal at {i}")));
            }
            for j in (i + 1)..m {
                let v = values.get(i, j);
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::invalid(format!("entry ({i},{j}) = {v} is not a finite nonnegative distance")));
                }
                if v != values.get(j, i) {
                    return Err(Error::invalid(format!("matrix is not symmetric at ({i},{j})")));
                }
            }
        }
        Ok(Self { values, point_ids })
    }

    /// Distance matrix of points on a line, mostly useful for tests and examples.
    pub fn from_coords_1d(coords: &[f64]) -> Result<Self> {
        let rows: Vec<Vec<f64>> = coords.iter().map(|&c| vec![c]).collect();
        pairwise_distances(&Trajectory::from_points(Matrix::from_rows(&rows)?)?)
    }

    pub fn len(&self) -> usize {
        self.values.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.rows() == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values.get(i, j)
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn point_ids(&self) -> &[u64] {
        &self.point_ids
    }

    pub fn max_distance(&self) -> f64 {
        self.values.as_slice().iter().copied().fold(0.0, f64::max)
    }

    /// Smallest off-diagonal entry, `None` for a single point.
    pub fn min_distance(&self) -> Option<f64> {
        let m = self.len();
        (0..m)
            .flat_map(|i| ((i + 1)..m).map(move |j| (i, j)))
            .map(|(i, j)| self.get(i, j))
            .reduce(f64::min)
    }

    /// Every distance multiplied by `t > 0`.
    pub fn scaled(&self, t: f64) -> Result<Self> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::invalid(format!("scale factor must be positive, got {t}")));
        }
        let data = self.values.as_slice().iter().map(|v| v * t).collect();
        Ok(Self {
            values: Matrix::new(self.len(), self.len(), data)?,
            point_ids: self.point_ids.clone(),
        })
    }

    /// Principal submatrix on the given indices.
    pub fn select(&self, idx: &[usize]) -> Self {
        let k = idx.len();
        let mut values = Matrix::zeros(k, k);
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                values.set(a, b, self.get(i, j));
            }
        }
        Self {
            values,
            point_ids: idx.iter().map(|&i| self.point_ids[i]).collect(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let m = ArtifactManifest::new(Role::DistanceMatrix, self.len(), self.len())
            .with_meta("point_ids", encode_ids(&self.point_ids));
        write_artifact(&m, &self.values, path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let (m, x) = read_artifact(path)?;
        if m.role != Role::DistanceMatrix {
            return Err(Error::invalid(format!("expected a distance matrix artifact, found {:?}", m.role)));
        }
        let ids = match m.metadata.get("point_ids") {
            Some(s) => decode_ids(s)?,
            None => (0..x.rows() as u64).collect(),
        };
        Self::new(x, ids)
    }
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Pairwise Euclidean distances between all iterates.
///
/// Rows are computed in parallel; each unordered pair is evaluated once, so
/// the result is exactly symmetric.
pub fn pairwise_distances(traj: &Trajectory) -> Result<DistanceMatrix> {
    let pts = traj.points();
    if !pts.is_finite() {
        return Err(Error::invalid("trajectory has non-finite entries"));
    }
    let m = traj.len();
    let upper: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|i| ((i + 1)..m).map(|j| euclidean(pts.row(i), pts.row(j))).collect())
        .collect();
    let mut values = Matrix::zeros(m, m);
    for (i, row) in upper.iter().enumerate() {
        for (k, &d) in row.iter().enumerate() {
            let j = i + 1 + k;
            values.set(i, j, d);
            values.set(j, i, d);
        }
    }
    Ok(DistanceMatrix {
        values,
        point_ids: traj.iteration_ids().to_vec(),
    })
}

/// Keeps `m` iterates drawn uniformly without replacement, in their original order.
pub fn subsample_uniform(traj: &Trajectory, m: usize, seed: u64) -> Result<Trajectory> {
    if m == 0 {
        return Err(Error::invalid("subsample size must be at least 1"));
    }
    let t = traj.len();
    if m >= t {
        return Ok(traj.clone());
    }
    let mut rng = rng::stream(seed, Purpose::Subsample, 0);
    let mut idx = index::sample(&mut rng, t, m).into_vec();
    idx.sort_unstable();
    let ids = idx.iter().map(|&i| traj.iteration_ids()[i]).collect();
    let mut meta = traj.meta.clone();
    meta.insert("subsample".into(), m.to_string());
    meta.insert("subsample_seed".into(), seed.to_string());
    Trajectory::new(traj.points().select_rows(&idx), ids, meta)
}

/// Greedy scan in index order: a point is dropped when it lies within `eps`
/// of a point already kept. All remaining pairwise distances exceed `eps`.
pub fn deduplicate(d: &DistanceMatrix, eps: f64) -> DistanceMatrix {
    let mut kept: Vec<usize> = Vec::with_capacity(d.len());
    for i in 0..d.len() {
        if kept.iter().all(|&k| d.get(i, k) > eps) {
            kept.push(i);
        }
    }
    if kept.len() == d.len() {
        return d.clone();
    }
    d.select(&kept)
}

/// [`deduplicate`] with `eps = 1e-12 * max distance`.
pub fn deduplicate_relative(d: &DistanceMatrix) -> DistanceMatrix {
    deduplicate(d, DEFAULT_RELATIVE_EPS * d.max_distance())
}

//! On-disk artifacts shared by every stage.
//!
//! An artifact is a pair of files next to each other:
//!
//! * `<stem>.json` holds the [`ArtifactManifest`] with keys exactly
//!   `schema_version`, `role`, `dtype`, `shape`, `metadata`;
//! * `<stem>.bin` holds the matrix as row-major little-endian `f64`s.
//!
//! The byte layout does not depend on the host, so identical inputs give
//! identical files everywhere. Non-finite payloads are rejected on read.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bounds::BoundResult;
use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;
pub const DTYPE: &str = "f64le";

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows.checked_mul(cols) != Some(data.len()) {
            return Err(Error::invalid(format!(
                "matrix data has {} entries, expected {rows}x{cols}",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Builds a matrix from equally long rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::invalid(format!(
                    "row {i} has {} entries, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.rows).map(move |i| self.row(i))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// New matrix holding the given rows, in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Matrix {
            rows: idx.len(),
            cols: self.cols,
            data,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// How the matrix in an artifact is interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    /// Rows are iterates, columns are parameter coordinates.
    Trajectory,
    /// Rows are iterates, columns are evaluation samples.
    LossMatrix,
    DistanceMatrix,
    /// Rows are samples, columns are features followed by the label.
    Dataset,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactManifest {
    pub schema_version: u32,
    pub role: Role,
    pub dtype: String,
    pub shape: Vec<usize>,
    pub metadata: BTreeMap<String, String>,
}

impl ArtifactManifest {
    pub fn new(role: Role, rows: usize, cols: usize) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            role,
            dtype: DTYPE.to_string(),
            shape: vec![rows, cols],
            metadata: BTreeMap::new(),
        }
    }

    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.metadata.insert(key.to_string(), value.to_string());
        self
    }

    fn validate(&self) -> Result<(usize, usize)> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::UnsupportedVersion {
                found: self.schema_version,
                supported: SCHEMA_VERSION,
            });
        }
        if self.dtype != DTYPE {
            return Err(Error::invalid(format!("unsupported dtype {:?}", self.dtype)));
        }
        match self.shape.as_slice() {
            &[r, c] if r > 0 && c > 0 => Ok((r, c)),
            s => Err(Error::invalid(format!("shape must be two positive integers, got {s:?}"))),
        }
    }

    pub fn meta(&self, key: &str) -> Result<&str> {
        self.metadata
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| Error::invalid(format!("manifest metadata lacks key {key:?}")))
    }
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s: OsString = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn manifest_path(stem: &Path) -> PathBuf {
    with_suffix(stem, ".json")
}

pub fn payload_path(stem: &Path) -> PathBuf {
    with_suffix(stem, ".bin")
}

/// Writes `<path>.json` and `<path>.bin`.
pub fn write_artifact(manifest: &ArtifactManifest, matrix: &Matrix, path: &Path) -> Result<()> {
    let (rows, cols) = manifest.validate()?;
    if rows != matrix.rows() || cols != matrix.cols() {
        return Err(Error::invalid(format!(
            "manifest shape {rows}x{cols} does not match matrix {}x{}",
            matrix.rows(),
            matrix.cols()
        )));
    }
    let mut bytes = Vec::with_capacity(8 * matrix.as_slice().len());
    for v in matrix.as_slice() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    let json = serde_json::to_string_pretty(manifest)
        .map_err(|e| Error::invalid(format!("cannot encode manifest: {e}")))?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let bin = payload_path(path);
    fs::write(&bin, bytes).map_err(|e| Error::io(&bin, e))?;
    let mpath = manifest_path(path);
    fs::write(&mpath, json + "\n").map_err(|e| Error::io(&mpath, e))?;
    Ok(())
}

pub fn read_artifact(path: &Path) -> Result<(ArtifactManifest, Matrix)> {
    let mpath = manifest_path(path);
    let text = fs::read_to_string(&mpath).map_err(|e| Error::io(&mpath, e))?;
    let manifest: ArtifactManifest = serde_json::from_str(&text)
        .map_err(|e| Error::invalid(format!("malformed manifest {}: {e}", mpath.display())))?;
    let (rows, cols) = manifest.validate()?;

    let bin = payload_path(path);
    let bytes = fs::read(&bin).map_err(|e| Error::io(&bin, e))?;
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(8))
        .ok_or_else(|| Error::invalid("shape overflows"))?;
    if bytes.len() != expected {
        return Err(Error::invalid(format!(
            "{} holds {} bytes, expected {expected}",
            bin.display(),
            bytes.len()
        )));
    }
    let data: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
        return Err(Error::invalid(format!(
            "non-finite value at flat index {pos} in {}",
            bin.display()
        )));
    }
    Ok((manifest, Matrix::new(rows, cols, data)?))
}

pub(crate) fn encode_ids(ids: &[u64]) -> String {
    ids.iter().map(u64::to_string).collect::<Vec<_>>().join(",")
}

pub(crate) fn decode_ids(s: &str) -> Result<Vec<u64>> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<u64>()
                .map_err(|e| Error::invalid(format!("bad id {t:?}: {e}")))
        })
        .collect()
}

fn expect_role(manifest: &ArtifactManifest, role: Role) -> Result<()> {
    if manifest.role != role {
        return Err(Error::invalid(format!(
            "expected a {role:?} artifact, found {:?}",
            manifest.role
        )));
    }
    Ok(())
}

/// Ordered optimizer iterates.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    points: Matrix,
    iteration_ids: Vec<u64>,
    pub meta: BTreeMap<String, String>,
}

impl Trajectory {
    pub fn new(points: Matrix, iteration_ids: Vec<u64>, meta: BTreeMap<String, String>) -> Result<Self> {
        if points.rows() == 0 {
            return Err(Error::invalid("trajectory needs at least one iterate"));
        }
        if iteration_ids.len() != points.rows() {
            return Err(Error::invalid(format!(
                "{} iteration ids for {} iterates",
                iteration_ids.len(),
                points.rows()
            )));
        }
        if iteration_ids.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("iteration ids must be strictly increasing"));
        }
        if !points.is_finite() {
            return Err(Error::invalid("trajectory has non-finite entries"));
        }
        Ok(Self {
            points,
            iteration_ids,
            meta,
        })
    }

    /// Trajectory with iteration ids `0..T`.
    pub fn from_points(points: Matrix) -> Result<Self> {
        let ids = (0..points.rows() as u64).collect();
        Self::new(points, ids, BTreeMap::new())
    }

    pub fn len(&self) -> usize {
        self.points.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.cols()
    }

    pub fn points(&self) -> &Matrix {
        &self.points
    }

    pub fn point(&self, i: usize) -> &[f64] {
        self.points.row(i)
    }

    pub fn iteration_ids(&self) -> &[u64] {
        &self.iteration_ids
    }

    pub fn last(&self) -> &[f64] {
        self.points.row(self.len() - 1)
    }

    pub fn to_artifact(&self) -> (ArtifactManifest, Matrix) {
        let mut m = ArtifactManifest::new(Role::Trajectory, self.len(), self.dim());
        m.metadata = self.meta.clone();
        m.metadata
            .insert("iteration_ids".into(), encode_ids(&self.iteration_ids));
        m.metadata.insert("iterations".into(), self.len().to_string());
        (m, self.points.clone())
    }

    pub fn from_artifact(manifest: ArtifactManifest, matrix: Matrix) -> Result<Self> {
        expect_role(&manifest, Role::Trajectory)?;
        let mut meta = manifest.metadata;
        meta.remove("iterations");
        let ids = match meta.remove("iteration_ids") {
            Some(s) => decode_ids(&s)?,
            None => (0..matrix.rows() as u64).collect(),
        };
        Self::new(matrix, ids, meta)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let (m, x) = self.to_artifact();
        write_artifact(&m, &x, path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let (m, x) = read_artifact(path)?;
        Self::from_artifact(m, x)
    }
}

/// Which samples a loss matrix was evaluated on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
    Probe,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
            Split::Probe => "probe",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            "probe" => Ok(Split::Probe),
            other => Err(Error::invalid(format!("unknown split {other:?}"))),
        }
    }
}

/// Per-iterate, per-sample losses: entry `(t, i)` is the loss of iterate `t` on sample `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct LossMatrix {
    values: Matrix,
    iteration_ids: Vec<u64>,
    sample_ids: Vec<u64>,
    pub split: Split,
}

impl LossMatrix {
    pub fn new(values: Matrix, iteration_ids: Vec<u64>, sample_ids: Vec<u64>, split: Split) -> Result<Self> {
        if iteration_ids.len() != values.rows() || sample_ids.len() != values.cols() {
            return Err(Error::invalid(format!(
                "loss matrix is {}x{} but has {} iteration ids and {} sample ids",
                values.rows(),
                values.cols(),
                iteration_ids.len(),
                sample_ids.len()
            )));
        }
        if let Some(v) = values.as_slice().iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::invalid(format!("losses must be finite and nonnegative, found {v}")));
        }
        Ok(Self {
            values,
            iteration_ids,
            sample_ids,
            split,
        })
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn iterations(&self) -> usize {
        self.values.rows()
    }

    pub fn samples(&self) -> usize {
        self.values.cols()
    }

    pub fn iteration_ids(&self) -> &[u64] {
        &self.iteration_ids
    }

    pub fn sample_ids(&self) -> &[u64] {
        &self.sample_ids
    }

    /// Mean loss of iterate `t` over all samples.
    pub fn row_mean(&self, t: usize) -> f64 {
        let r = self.values.row(t);
        r.iter().sum::<f64>() / r.len() as f64
    }

    /// Keeps only the columns whose sample id is accepted by `keep`.
    pub fn retain_samples(&self, keep: impl Fn(u64) -> bool) -> Result<LossMatrix> {
        let cols: Vec<usize> = (0..self.samples()).filter(|&i| keep(self.sample_ids[i])).collect();
        let mut data = Vec::with_capacity(self.iterations() * cols.len());
        for t in 0..self.iterations() {
            let r = self.values.row(t);
            data.extend(cols.iter().map(|&i| r[i]));
        }
        let ids = cols.iter().map(|&i| self.sample_ids[i]).collect();
        LossMatrix::new(
            Matrix::new(self.iterations(), cols.len(), data)?,
            self.iteration_ids.clone(),
            ids,
            self.split,
        )
    }

    pub fn to_artifact(&self) -> (ArtifactManifest, Matrix) {
        let m = ArtifactManifest::new(Role::LossMatrix, self.iterations(), self.samples())
            .with_meta("iteration_ids", encode_ids(&self.iteration_ids))
            .with_meta("sample_ids", encode_ids(&self.sample_ids))
            .with_meta("split", self.split.as_str());
        (m, self.values.clone())
    }

    pub fn from_artifact(manifest: ArtifactManifest, matrix: Matrix) -> Result<Self> {
        expect_role(&manifest, Role::LossMatrix)?;
        let it = decode_ids(manifest.meta("iteration_ids")?)?;
        let si = decode_ids(manifest.meta("sample_ids")?)?;
        let split = Split::parse(manifest.meta("split")?)?;
        Self::new(matrix, it, si, split)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let (m, x) = self.to_artifact();
        write_artifact(&m, &x, path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let (m, x) = read_artifact(path)?;
        Self::from_artifact(m, x)
    }
}

/// Positive magnitude evaluated at the theorem scale `s(lambda)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremPmag {
    pub lambda: f64,
    /// `empirical` or `analytic`, naming the stability parameter behind the scale.
    pub beta_source: String,
    pub scale: f64,
    pub value: f64,
}

/// Summary of one training run (one grid cell).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: String,
    pub task: String,
    pub n: usize,
    pub eta: f64,
    pub batch: usize,
    pub seed: u64,
    /// Worst-case (test risk - train risk) over all recorded iterates.
    pub gen_gap: f64,
    pub e_alpha: Option<f64>,
    pub alpha: f64,
    /// Positive magnitude keyed by the fixed scale, formatted with [`scale_key`].
    pub pmag: BTreeMap<String, f64>,
    pub pmag_theorem: Vec<TheoremPmag>,
    pub beta_hat: Option<f64>,
    pub beta_analytic: Option<f64>,
    /// Empirical lower bound on the Lipschitz constant and maximum observed loss.
    pub lipschitz_hat: Option<f64>,
    pub loss_bound_hat: Option<f64>,
    pub bounds: Vec<BoundResult>,
}

impl RunRecord {
    pub fn stub(run_id: String, task: String, n: usize, eta: f64, batch: usize, seed: u64, gen_gap: f64) -> Self {
        Self {
            run_id,
            task,
            n,
            eta,
            batch,
            seed,
            gen_gap,
            e_alpha: None,
            alpha: 1.0,
            pmag: BTreeMap::new(),
            pmag_theorem: Vec::new(),
            beta_hat: None,
            beta_analytic: None,
            lipschitz_hat: None,
            loss_bound_hat: None,
            bounds: Vec::new(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(self, path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        read_json(path)
    }
}

/// Canonical map key for a magnitude scale.
pub fn scale_key(s: f64) -> String {
    format!("{s}")
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::invalid(format!("cannot encode json: {e}")))?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::invalid(format!("malformed json {}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use tempfile::tempdir;

    #[test]
    fn single_zero_roundtrip() {
        let dir = tempdir().unwrap();
        let stem = dir.path().join("one");
        let m = Matrix::new(1, 1, vec![0.0]).unwrap();
        write_artifact(&ArtifactManifest::new(Role::Trajectory, 1, 1), &m, &stem).unwrap();
        assert_eq!(fs::metadata(payload_path(&stem)).unwrap().len(), 8);
        let (_, back) = read_artifact(&stem).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn payload_is_row_major_little_endian() {
        let dir = tempdir().unwrap();
        let stem = dir.path().join("ints");
        let m = Matrix::new(2, 3, (0..6).map(f64::from).collect()).unwrap();
        write_artifact(&ArtifactManifest::new(Role::LossMatrix, 2, 3), &m, &stem).unwrap();
        let mut expected = Vec::new();
        for v in [0.0f64, 1.0, 2.0, 3.0, 4.0, 5.0] {
            expected.extend_from_slice(&v.to_le_bytes());
        }
        // 1.0 is 0x3FF0000000000000
        assert_eq!(&expected[8..16], &[0, 0, 0, 0, 0, 0, 0xF0, 0x3F]);
        assert_eq!(fs::read(payload_path(&stem)).unwrap(), expected);
    }

    #[test]
    fn manifest_keys_are_exact() {
        let dir = tempdir().unwrap();
        let stem = dir.path().join("k");
        let m = Matrix::zeros(1, 2);
        write_artifact(&ArtifactManifest::new(Role::Dataset, 1, 2).with_meta("n", 1), &m, &stem).unwrap();
        let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(manifest_path(&stem)).unwrap()).unwrap();
        let mut keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        keys.sort();
        assert_eq!(keys, ["dtype", "metadata", "role", "schema_version", "shape"]);
        assert_eq!(v["dtype"], "f64le");
        assert_eq!(v["role"], "dataset");
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let dir = tempdir().unwrap();
        let m = Matrix::zeros(2, 3);
        let err = write_artifact(&ArtifactManifest::new(Role::Trajectory, 2, 2), &m, &dir.path().join("x"));
        assert!(matches!(err, Err(Error::InvalidInput(_))));
    }

    #[test]
    fn truncated_payload_is_rejected() {
        let dir = tempdir().unwrap();
        let stem = dir.path().join("t");
        let m = Matrix::zeros(2, 2);
        write_artifact(&ArtifactManifest::new(Role::Trajectory, 2, 2), &m, &stem).unwrap();
        let bytes = fs::read(payload_path(&stem)).unwrap();
        fs::write(payload_path(&stem), &bytes[..bytes.len() - 8]).unwrap();
        assert!(matches!(read_artifact(&stem), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn version_two_is_unsupported() {
        let dir = tempdir().unwrap();
        let stem = dir.path().join("v");
        let m = Matrix::zeros(1, 1);
        write_artifact(&ArtifactManifest::new(Role::Trajectory, 1, 1), &m, &stem).unwrap();
        let text = fs::read_to_string(manifest_path(&stem)).unwrap();
        fs::write(manifest_path(&stem), text.replace("\"schema_version\": 1", "\"schema_version\": 2")).unwrap();
        assert!(matches!(
            read_artifact(&stem),
            Err(Error::UnsupportedVersion { found: 2, .. })
        ));
    }

    #[test]
    fn nan_payload_and_bad_json_are_rejected() {
        let dir = tempdir().unwrap();
        let stem = dir.path().join("n");
        let m = Matrix::new(1, 2, vec![1.0, f64::NAN]).unwrap();
        write_artifact(&ArtifactManifest::new(Role::Trajectory, 1, 2), &m, &stem).unwrap();
        assert!(matches!(read_artifact(&stem), Err(Error::InvalidInput(_))));
        fs::write(manifest_path(&stem), "{ not json").unwrap();
        assert!(matches!(read_artifact(&stem), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn trajectory_and_loss_matrix_roundtrip_ids() {
        let dir = tempdir().unwrap();
        let pts = Matrix::from_rows(&[[0.0, 1.0], [2.0, 3.0], [4.0, 5.0]]).unwrap();
        let mut meta = BTreeMap::new();
        meta.insert("seed".to_string(), "3".to_string());
        let t = Trajectory::new(pts.clone(), vec![0, 5, 9], meta).unwrap();
        t.save(&dir.path().join("traj")).unwrap();
        assert_eq!(Trajectory::load(&dir.path().join("traj")).unwrap(), t);

        let l = LossMatrix::new(pts, vec![0, 5, 9], vec![10, 11], Split::Test).unwrap();
        l.save(&dir.path().join("loss")).unwrap();
        assert_eq!(LossMatrix::load(&dir.path().join("loss")).unwrap(), l);
    }

    #[test]
    fn trajectory_invariants() {
        let pts = Matrix::zeros(2, 1);
        assert!(Trajectory::new(pts.clone(), vec![1, 1], BTreeMap::new()).is_err());
        assert!(Trajectory::new(Matrix::zeros(0, 1), vec![], BTreeMap::new()).is_err());
        let nan = Matrix::new(1, 1, vec![f64::INFINITY]).unwrap();
        assert!(Trajectory::from_points(nan).is_err());
        let neg = Matrix::new(1, 1, vec![-1.0]).unwrap();
        assert!(LossMatrix::new(neg, vec![0], vec![0], Split::Train).is_err());
    }

    proptest! {
        #[test]
        fn roundtrip_is_bit_exact(rows in 1usize..6, cols in 1usize..6, seed in any::<u64>()) {
            use rand::Rng;
            let mut rng = crate::rng::stream(seed, crate::rng::Purpose::Instance, 0);
            let data: Vec<f64> = (0..rows * cols)
                .map(|_| f64::from_bits(rng.random::<u64>()))
                .map(|v| if v.is_finite() { v } else { 0.5 })
                .collect();
            let m = Matrix::new(rows, cols, data).unwrap();
            let dir = tempdir().unwrap();
            let stem = dir.path().join("p");
            write_artifact(&ArtifactManifest::new(Role::Trajectory, rows, cols), &m, &stem).unwrap();
            let (_, back) = read_artifact(&stem).unwrap();
            let a: Vec<u64> = m.as_slice().iter().map(|v| v.to_bits()).collect();
            let b: Vec<u64> = back.as_slice().iter().map(|v| v.to_bits()).collect();
            prop_assert_eq!(a, b);
        }
    }
}

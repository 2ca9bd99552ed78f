//! Generalization gaps, correlation statistics and grid reports.
//!
//! Variances use the sample convention (`k - 1` denominator); `r` does not
//! depend on it. Slopes regress the complexity on the gap.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::artifact::{scale_key, LossMatrix, RunRecord};
use crate::error::{Error, Result};

/// `max_t (mean_i test[t, i] - mean_i train[t, i])`.
pub fn worst_case_gap(train: &LossMatrix, test: &LossMatrix) -> Result<f64> {
    if train.iteration_ids() != test.iteration_ids() {
        return Err(Error::invalid("train and test losses must share iteration ids"));
    }
    Ok((0..train.iterations())
        .map(|t| test.row_mean(t) - train.row_mean(t))
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Gap of the last iterate.
pub fn final_gap(train: &LossMatrix, test: &LossMatrix) -> Result<f64> {
    if train.iteration_ids() != test.iteration_ids() {
        return Err(Error::invalid("train and test losses must share iteration ids"));
    }
    let t = train.iterations() - 1;
    Ok(test.row_mean(t) - train.row_mean(t))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pearson {
    pub r: f64,
    /// Least-squares slope of `y` on `x`.
    pub slope: f64,
    pub intercept: f64,
}

fn check_pair(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::invalid(format!("lengths differ: {} vs {}", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(Error::invalid("need at least two observations"));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::invalid("observations must be finite"));
    }
    Ok(())
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<Pearson> {
    check_pair(x, y)?;
    let k = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / k, y.iter().sum::<f64>() / k);
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedStatistic("zero variance".into()));
    }
    let r = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    let slope = sxy / sxx;
    Ok(Pearson {
        r,
        slope,
        intercept: my - slope * mx,
    })
}

/// Kendall tau-b by enumeration of all pairs.
pub fn kendall(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    let (mut concordant, mut discordant, mut ties_x, mut ties_y) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            let dx = x[i].partial_cmp(&x[j]).expect("finite");
            let dy = y[i].partial_cmp(&y[j]).expect("finite");
            use std::cmp::Ordering::Equal;
            match (dx, dy) {
                (Equal, Equal) => {
                    ties_x += 1;
                    ties_y += 1;
                }
                (Equal, _) => ties_x += 1,
                (_, Equal) => ties_y += 1,
                (a, b) if a == b => concordant += 1,
                _ => discordant += 1,
            }
        }
    }
    let pairs = (x.len() * (x.len() - 1) / 2) as i64;
    let denom = (((pairs - ties_x) * (pairs - ties_y)) as f64).sqrt();
    if denom == 0.0 {
        return Err(Error::UndefinedStatistic("all pairs tied".into()));
    }
    Ok(((concordant - discordant) as f64 / denom).clamp(-1.0, 1.0))
}

/// Ranks starting at 1, ties receiving their average rank.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && x[idx[end]] == x[idx[start]] {
            end += 1;
        }
        let rank = (start + end + 1) as f64 / 2.0;
        for &i in &idx[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

/// Spearman rank correlation (Pearson on average ranks).
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    Ok(pearson(&average_ranks(x), &average_ranks(y))?.r)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ComplexityKind {
    EAlpha,
    PmagFixedScale { scale: f64 },
    PmagTheoremScale { lambda: f64 },
}

impl ComplexityKind {
    pub fn value(&self, run: &RunRecord) -> Option<f64> {
        match *self {
            ComplexityKind::EAlpha => run.e_alpha,
            ComplexityKind::PmagFixedScale { scale } => run.pmag.get(&scale_key(scale)).copied(),
            ComplexityKind::PmagTheoremScale { lambda } => {
                run.pmag_theorem.iter().find(|p| p.lambda == lambda).map(|p| p.value)
            }
        }
    }

    pub fn name(&self) -> String {
        match *self {
            ComplexityKind::EAlpha => "e_alpha".into(),
            ComplexityKind::PmagFixedScale { scale } => format!("pmag_s{}", scale_key(scale)),
            ComplexityKind::PmagTheoremScale { lambda } => format!("pmag_lambda{}", scale_key(lambda)),
        }
    }
}

impl fmt::Display for ComplexityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// Statistics of one `n` group for one measure; `None` marks an undefined value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupStat {
    pub tau: Option<f64>,
    pub r: Option<f64>,
    pub slope: Option<f64>,
    pub count: usize,
}

impl GroupStat {
    /// Statistics of `complexity` against `gap`.
    pub fn compute(gap: &[f64], complexity: &[f64]) -> Self {
        let p = pearson(gap, complexity).ok();
        Self {
            tau: kendall(gap, complexity).ok(),
            r: p.map(|p| p.r),
            slope: p.map(|p| p.slope),
            count: gap.len(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NStats {
    pub raw: GroupStat,
    /// Against the natural log of the complexity; undefined when a value is not positive.
    pub log: GroupStat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridReport {
    pub rows: Vec<RunRecord>,
    pub per_n_stats: BTreeMap<usize, NStats>,
    pub complexity_kind: ComplexityKind,
}

const EMPTY: GroupStat = GroupStat {
    tau: None,
    r: None,
    slope: None,
    count: 0,
};

/// Groups runs by `n` and correlates the gap with the chosen complexity.
/// Runs lacking the complexity are skipped; groups of one get null statistics.
pub fn grid_report(runs: &[RunRecord], kind: ComplexityKind) -> Result<GridReport> {
    if runs.is_empty() {
        return Err(Error::invalid("no runs to report"));
    }
    let mut groups: BTreeMap<usize, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for run in runs {
        let entry = groups.entry(run.n).or_default();
        if let Some(c) = kind.value(run).filter(|c| c.is_finite()) {
            if run.gen_gap.is_finite() {
                entry.0.push(run.gen_gap);
                entry.1.push(c);
            }
        }
    }
    let per_n_stats = groups
        .into_iter()
        .map(|(n, (gap, c))| {
            let raw = if gap.is_empty() { EMPTY } else { GroupStat::compute(&gap, &c) };
            let log = if !gap.is_empty() && c.iter().all(|v| *v > 0.0) {
                let logs: Vec<f64> = c.iter().map(|v| v.ln()).collect();
                GroupStat::compute(&gap, &logs)
            } else {
                GroupStat { count: gap.len(), ..EMPTY }
            };
            (n, NStats { raw, log })
        })
        .collect();
    Ok(GridReport {
        rows: runs.to_vec(),
        per_n_stats,
        complexity_kind: kind,
    })
}

pub const GRID_CSV_HEADER: &str = "n,measure,tau,r,slope,count";

fn cell(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

impl GridReport {
    /// Rows without the header: one raw and one log line per `n`.
    pub fn csv_rows(&self) -> String {
        let name = self.complexity_kind.name();
        let mut out = String::new();
        for (n, s) in &self.per_n_stats {
            for (measure, g) in [(name.clone(), s.raw), (format!("log_{name}"), s.log)] {
                out.push_str(&format!("{n},{measure},{},{},{},{}\n", cell(g.tau), cell(g.r), cell(g.slope), g.count));
            }
        }
        out
    }

    pub fn to_csv(&self) -> String {
        format!("{GRID_CSV_HEADER}\n{}", self.csv_rows())
    }

    /// Raw-measure slopes in increasing `n`, skipping undefined groups.
    pub fn slopes(&self) -> Vec<(usize, f64)> {
        self.per_n_stats.iter().filter_map(|(n, s)| s.raw.slope.map(|v| (*n, v))).collect()
    }
}

/// One CSV with a single header and one block per report.
pub fn grid_csv(reports: &[GridReport]) -> String {
    let mut out = format!("{GRID_CSV_HEADER}\n");
    for r in reports {
        out.push_str(&r.csv_rows());
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendSummary {
    pub ns: Vec<usize>,
    pub slopes: Vec<f64>,
    /// Fraction of consecutive pairs where the slope increases.
    pub increasing_fraction: f64,
}

/// Monotonicity of slopes ordered by `n`; needs at least three groups.
pub fn slope_vs_n(per_n: &[(usize, f64)]) -> Result<TrendSummary> {
    if per_n.len() < 3 {
        return Err(Error::invalid(format!("need slopes for at least 3 values of n, got {}", per_n.len())));
    }
    let mut sorted = per_n.to_vec();
    sorted.sort_by_key(|p| p.0);
    let slopes: Vec<f64> = sorted.iter().map(|p| p.1).collect();
    let up = slopes.windows(2).filter(|w| w[1] > w[0]).count();
    Ok(TrendSummary {
        ns: sorted.iter().map(|p| p.0).collect(),
        increasing_fraction: up as f64 / (slopes.len() - 1) as f64,
        slopes,
    })
}

//! Independent reference computations shared by the integration tests and the
//! acceptance runner. Nothing here calls into the library's numerics.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_points(rng: &mut ChaCha8Rng, m: usize, dim: usize, spread: f64) -> Vec<Vec<f64>> {
    (0..m).map(|_| (0..dim).map(|_| rng.random_range(-spread..spread)).collect()).collect()
}

/// Coordinate-by-coordinate Euclidean distance.
pub fn euclid(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for k in 0..a.len() {
        let t = a[k] - b[k];
        acc += t * t;
    }
    acc.sqrt()
}

pub fn distance_rows(points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    points.iter().map(|a| points.iter().map(|b| euclid(a, b)).collect()).collect()
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        x = parent[x];
    }
    x
}

/// Minimum over every spanning tree of the complete graph, found by testing all
/// `(m - 1)`-edge subsets. Returns the sorted edge lengths of one minimizer.
/// Every minimum spanning tree has the same length multiset, so any minimizer works.
pub fn brute_force_mst_lengths(d: &[Vec<f64>]) -> Vec<f64> {
    let m = d.len();
    if m <= 1 {
        return Vec::new();
    }
    let edges: Vec<(usize, usize)> = (0..m).flat_map(|i| (i + 1..m).map(move |j| (i, j))).collect();
    let k = m - 1;
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        let mut parent: Vec<usize> = (0..m).collect();
        let mut ok = true;
        for &e in &idx {
            let (a, b) = edges[e];
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra == rb {
                ok = false;
                break;
            }
            parent[ra] = rb;
        }
        if ok {
            let lengths: Vec<f64> = idx.iter().map(|&e| d[edges[e].0][edges[e].1]).collect();
            let total: f64 = lengths.iter().sum();
            if best.as_ref().is_none_or(|(t, _)| total < *t) {
                best = Some((total, lengths));
            }
        }
        // next k-combination of edge indices
        let mut p = k;
        loop {
            if p == 0 {
                let mut l = best.expect("complete graph has a spanning tree").1;
                l.sort_by(f64::total_cmp);
                return l;
            }
            p -= 1;
            if idx[p] < edges.len() - k + p {
                break;
            }
        }
        idx[p] += 1;
        for q in p + 1..k {
            idx[q] = idx[q - 1] + 1;
        }
    }
}

pub fn brute_force_e_alpha(d: &[Vec<f64>], alpha: f64) -> f64 {
    brute_force_mst_lengths(d).iter().map(|l| l.powf(alpha)).sum()
}

/// Positive magnitude of two points at distance `d`, scale `s`.
pub fn two_point_pmag(d: f64, s: f64) -> f64 {
    2.0 / (1.0 + (-s * d).exp())
}

/// Exact Rademacher complexity of a `|W| x n` loss table by direct enumeration
/// of all `2^n` sign patterns.
pub fn naive_rademacher(table: &[Vec<f64>]) -> f64 {
    let n = table[0].len();
    let patterns = 1u64 << n;
    let mut total = 0.0;
    for mask in 0..patterns {
        let mut sup = f64::NEG_INFINITY;
        for row in table {
            let mut s = 0.0;
            for (i, v) in row.iter().enumerate() {
                s += if mask >> i & 1 == 1 { *v } else { -*v };
            }
            sup = sup.max(s / n as f64);
        }
        total += sup;
    }
    total / patterns as f64
}

/// A finite hypothesis set with losses that are `L`-Lipschitz in `w` and lie in `[0, B]`.
pub struct LemmaInstance {
    pub points: Vec<Vec<f64>>,
    /// `losses[w][i]`.
    pub losses: Vec<Vec<f64>>,
    pub lipschitz: f64,
    pub loss_bound: f64,
}

/// `l(w, z_i) = clamp(c_i + a_i . w, 0, B)` with `||a_i|| = L`.
pub fn lemma_instance(rng: &mut ChaCha8Rng) -> LemmaInstance {
    let w = rng.random_range(1..=8usize);
    let n = rng.random_range(1..=12usize);
    let dim = rng.random_range(1..=4usize);
    let lipschitz = rng.random_range(0.2..5.0);
    let loss_bound = rng.random_range(0.2..3.0);
    let spread = rng.random_range(0.01..2.0);
    let points = random_points(rng, w, dim, spread);
    let losses_by_sample: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let mut a: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            let na = a.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
            a.iter_mut().for_each(|v| *v *= lipschitz / na);
            let c = rng.random_range(0.0..loss_bound);
            points
                .iter()
                .map(|p| (c + a.iter().zip(p).map(|(x, y)| x * y).sum::<f64>()).clamp(0.0, loss_bound))
                .collect()
        })
        .collect();
    let losses = (0..w).map(|j| losses_by_sample.iter().map(|s| s[j]).collect()).collect();
    LemmaInstance {
        points,
        losses,
        lipschitz,
        loss_bound,
    }
}

/// Least-squares slope of `y` on `x`.
pub fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + b.abs())
}

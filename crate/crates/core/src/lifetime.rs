//! Minimum spanning trees and alpha-weighted lifetime sums.
//!
//! The degree-0 persistence lifetimes of a Vietoris-Rips filtration are the
//! edge lengths of a minimum spanning tree, so `E^alpha(X)` is the sum of
//! MST edge lengths raised to `alpha`.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::DistanceMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub length: f64,
}

impl Edge {
    fn new(a: usize, b: usize, length: f64) -> Self {
        Self {
            i: a.min(b),
            j: a.max(b),
            length,
        }
    }

    /// Strict total order: by length, then by index pair.
    fn key_cmp(&self, other: &Edge) -> Ordering {
        self.length
            .total_cmp(&other.length)
            .then(self.i.cmp(&other.i))
            .then(self.j.cmp(&other.j))
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EdgeList {
    pub edges: Vec<Edge>,
}

impl EdgeList {
    pub fn count(&self) -> usize {
        self.edges.len()
    }

    pub fn total_length(&self) -> f64 {
        self.edges.iter().map(|e| e.length).sum()
    }

    pub fn lengths(&self) -> impl Iterator<Item = f64> + '_ {
        self.edges.iter().map(|e| e.length)
    }
}

/// Dense Prim's algorithm, O(m^2) time and O(m) extra memory.
///
/// Edges are compared by `(length, i, j)` with `i < j`. Under that strict
/// order the minimum spanning tree is unique, so the result is the same tree
/// Kruskal's algorithm would pick with lexicographic tie breaking.
pub fn minimum_spanning_tree(d: &DistanceMatrix) -> EdgeList {
    let m = d.len();
    if m <= 1 {
        return EdgeList::default();
    }
    let mut in_tree = vec![false; m];
    let mut best: Vec<Edge> = (0..m).map(|v| Edge::new(0, v, d.get(0, v))).collect();
    in_tree[0] = true;
    let mut edges = Vec::with_capacity(m - 1);

    for _ in 1..m {
        let mut pick: Option<usize> = None;
        for v in 0..m {
            if in_tree[v] {
                continue;
            }
            match pick {
                Some(p) if best[v].key_cmp(&best[p]) != Ordering::Less => {}
                _ => pick = Some(v),
            }
        }
        let v = pick.expect("a vertex outside the tree remains");
        in_tree[v] = true;
        edges.push(best[v]);
        for u in 0..m {
            if in_tree[u] {
                continue;
            }
            let cand = Edge::new(v, u, d.get(v, u));
            if cand.key_cmp(&best[u]) == Ordering::Less {
                best[u] = cand;
            }
        }
    }
    EdgeList { edges }
}

/// `sum_{e in MST} |e|^alpha`.
///
/// `alpha > 1` is accepted, but the lifetime-sum generalization bound only
/// covers `alpha` in `(0, 1]`, so a warning is logged.
pub fn alpha_weighted_lifetime_sum(d: &DistanceMatrix, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(lifetime_sum_of_edges(&minimum_spanning_tree(d), alpha))
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::invalid(format!("alpha must be a finite value >= 0, got {alpha}")));
    }
    if alpha > 1.0 {
        log::warn!("alpha = {alpha} lies outside (0, 1], where the lifetime-sum bound holds");
    }
    Ok(())
}

pub fn lifetime_sum_of_edges(tree: &EdgeList, alpha: f64) -> f64 {
    tree.lengths().map(|l| l.powf(alpha)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::artifact::{Matrix, Trajectory};
    use crate::geometry::pairwise_distances;
    use proptest::prelude::*;

    fn square() -> DistanceMatrix {
        let t = Trajectory::from_points(Matrix::from_rows(&[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]).unwrap()).unwrap();
        pairwise_distances(&t).unwrap()
    }

    #[test]
    fn collinear_path() {
        let d = DistanceMatrix::from_coords_1d(&[0.0, 1.0, 3.0]).unwrap();
        let t = minimum_spanning_tree(&d);
        assert_eq!(
            t.edges,
            vec![Edge { i: 0, j: 1, length: 1.0 }, Edge { i: 1, j: 2, length: 2.0 }]
        );
    }

    #[test]
    fn single_point() {
        let d = DistanceMatrix::from_coords_1d(&[4.0]).unwrap();
        assert_eq!(minimum_spanning_tree(&d).count(), 0);
        assert_eq!(alpha_weighted_lifetime_sum(&d, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn unit_square_uses_sides_with_lexicographic_ties() {
        let t = minimum_spanning_tree(&square());
        assert_eq!(t.total_length(), 3.0);
        let pairs: Vec<(usize, usize)> = t.edges.iter().map(|e| (e.i, e.j)).collect();
        // Four unit sides tie; the smallest three index pairs win.
        assert_eq!(pairs, vec![(0, 1), (0, 3), (1, 2)]);
    }

    #[test]
    fn lifetime_sum_examples() {
        let d = DistanceMatrix::from_coords_1d(&[0.0, 1.0, 2.0, 3.0]).unwrap();
        assert_eq!(alpha_weighted_lifetime_sum(&d, 1.0).unwrap(), 3.0);
        let d = DistanceMatrix::from_coords_1d(&[0.0, 1.0, 3.0]).unwrap();
        assert_eq!(alpha_weighted_lifetime_sum(&d, 2.0).unwrap(), 5.0);
        assert!(matches!(alpha_weighted_lifetime_sum(&d, -0.1), Err(Error::InvalidInput(_))));
    }

    fn cloud(seed: u64, m: usize) -> Vec<[f64; 2]> {
        use rand::Rng;
        let mut rng = crate::rng::stream(seed, crate::rng::Purpose::Instance, 0);
        (0..m).map(|_| [rng.random::<f64>(), rng.random::<f64>()]).collect()
    }

    fn dist(pts: &[[f64; 2]]) -> DistanceMatrix {
        pairwise_distances(&Trajectory::from_points(Matrix::from_rows(pts).unwrap()).unwrap()).unwrap()
    }

    proptest! {
        #[test]
        fn homogeneity(seed in any::<u64>(), m in 2usize..30, alpha in 0.0f64..2.0, t in 0.1f64..10.0) {
            let d = dist(&cloud(seed, m));
            let a = alpha_weighted_lifetime_sum(&d, alpha).unwrap();
            let b = alpha_weighted_lifetime_sum(&d.scaled(t).unwrap(), alpha).unwrap();
            prop_assert!((b - t.powf(alpha) * a).abs() <= 1e-10 * (1.0 + b.abs()));
        }

        #[test]
        fn permutation_invariance(seed in any::<u64>(), m in 2usize..25, alpha in 0.0f64..1.5) {
            let pts = cloud(seed, m);
            let mut rev = pts.clone();
            rev.reverse();
            let a = alpha_weighted_lifetime_sum(&dist(&pts), alpha).unwrap();
            let b = alpha_weighted_lifetime_sum(&dist(&rev), alpha).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a));
        }

        #[test]
        fn zero_alpha_counts_edges(seed in any::<u64>(), m in 1usize..40) {
            let d = dist(&cloud(seed, m));
            prop_assert_eq!(alpha_weighted_lifetime_sum(&d, 0.0).unwrap(), (m - 1) as f64);
            let t = minimum_spanning_tree(&d);
            // spanning and acyclic: m - 1 edges connecting all points
            let mut parent: Vec<usize> = (0..m).collect();
            fn find(p: &mut Vec<usize>, x: usize) -> usize { if p[x] != x { let r = find(p, p[x]); p[x] = r; } p[x] }
            for e in &t.edges {
                let (a, b) = (find(&mut parent, e.i), find(&mut parent, e.j));
                prop_assert_ne!(a, b);
                parent[a] = b;
            }
        }
    }
}

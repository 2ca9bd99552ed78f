mod common;

use proptest::prelude::*;

use trajtopo::analysis;
use trajtopo::artifact::{Matrix, Trajectory};
use trajtopo::bounds::{self, RademacherMode};
use trajtopo::geometry::{self, DistanceMatrix};
use trajtopo::lifetime;
use trajtopo::magnitude::{self, Solver};
use trajtopo::stability;
use trajtopo::trainer::{self, Dataset, Init, Objective, SgdConfig, StepRule, SyntheticTask, TaskKind};

use common::*;

fn dm(rows: &[Vec<f64>]) -> DistanceMatrix {
    DistanceMatrix::new(Matrix::from_rows(rows).unwrap(), (0..rows.len() as u64).collect()).unwrap()
}

#[test]
fn unit_square_matches_enumeration_of_all_sixteen_trees() {
    let pts = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0]];
    let rows = distance_rows(&pts);
    assert_eq!(brute_force_mst_lengths(&rows), vec![1.0, 1.0, 1.0]);
    assert_eq!(lifetime::minimum_spanning_tree(&dm(&rows)).total_length(), 3.0);
}

#[test]
fn six_random_points_alpha_point_seven() {
    let mut r = rng(6);
    let pts = random_points(&mut r, 6, 2, 0.5);
    let rows = distance_rows(&pts);
    let got = lifetime::alpha_weighted_lifetime_sum(&dm(&rows), 0.7).unwrap();
    assert!((got - brute_force_e_alpha(&rows, 0.7)).abs() <= 1e-12);
}

#[test]
fn quadratic_iterates_follow_the_closed_form() {
    // one sample z: w_k - z = (1 - eta)^k (w_0 - z) while the ball is not hit
    let z = vec![0.3, -0.2, 0.1];
    let mut sample = z.clone();
    sample.push(0.0);
    let data = Dataset::new(Matrix::from_rows(&[sample]).unwrap(), vec![0], 0).unwrap();
    let task = SyntheticTask::new(TaskKind::Quadratic, 3).unwrap();
    let w0 = vec![1.0, 1.0, -1.0];
    let eta = 0.1;
    let mut cfg = SgdConfig::new(10.0, StepRule::Constant { eta }, 40, 3);
    cfg.init = Init::Given(w0.clone());
    let traj = trainer::projected_sgd(&task, &data, &cfg).unwrap();
    for k in 0..traj.len() {
        let id = traj.iteration_ids()[k] as i32;
        let f = (1.0 - eta).powi(id);
        for c in 0..3 {
            let want = z[c] + f * (w0[c] - z[c]);
            assert!((traj.point(k)[c] - want).abs() < 1e-12);
        }
    }
}

#[test]
fn constants_on_hand_computed_quadratic() {
    let data = Dataset::new(Matrix::from_rows(&[vec![1.0, 0.0]]).unwrap(), vec![0], 0).unwrap();
    let task = SyntheticTask::new(TaskKind::Quadratic, 1).unwrap();
    let traj = Trajectory::from_points(Matrix::from_rows(&[vec![0.0], vec![0.5]]).unwrap()).unwrap();
    let losses = trainer::loss_matrix(&task, &traj, &data, trajtopo::artifact::Split::Train).unwrap();
    let est = bounds::estimate_constants(&traj, &losses).unwrap();
    assert!((est.lipschitz - 0.75).abs() < 1e-12);
    assert!((est.loss_bound - 0.5).abs() < 1e-12);
}

fn analytic_oracle(l: f64, g: f64, r: f64, c: f64, n: usize, t: u64) -> f64 {
    let q = g * c + 1.0;
    let mut sum = 0.0;
    for k in 1..=t {
        sum += (k as f64).powf(g * c / q);
    }
    4.0 * l * r / (n as f64 - 1.0) * (l / (g * r)).powf(1.0 / q) * sum
}

fn finite_difference_check(kind: TaskKind, seed: u64) {
    let (task, data, _) = trainer::make_task_and_data(kind, 5, 3, seed).unwrap();
    let mut r = rng(seed);
    let w: Vec<f64> = (0..task.param_dim()).map(|_| rand::Rng::random_range(&mut r, -0.8..0.8)).collect();
    let mut grad = vec![0.0; w.len()];
    for i in 0..data.len() {
        task.gradient(&w, data.sample(i), &mut grad);
        for k in 0..w.len() {
            let h = 1e-6;
            let (mut a, mut b) = (w.clone(), w.clone());
            a[k] += h;
            b[k] -= h;
            let fd = (task.loss(&a, data.sample(i)) - task.loss(&b, data.sample(i))) / (2.0 * h);
            assert!((fd - grad[k]).abs() < 1e-6 * (1.0 + fd.abs()), "{kind} coordinate {k}: fd {fd} vs {}", grad[k]);
        }
    }
}

#[test]
fn gradients_match_central_differences() {
    for kind in [TaskKind::Quadratic, TaskKind::LogisticRegression, TaskKind::SmallMlp] {
        for seed in 0..3 {
            finite_difference_check(kind, seed);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mst_matches_exhaustive_enumeration(seed in any::<u64>(), m in 1usize..=6, dim in 1usize..=3, alpha in 0.0f64..2.0) {
        let mut r = rng(seed);
        let rows = distance_rows(&random_points(&mut r, m, dim, 1.0));
        let got = lifetime::alpha_weighted_lifetime_sum(&dm(&rows), alpha).unwrap();
        prop_assert!((got - brute_force_e_alpha(&rows, alpha)).abs() <= 1e-12);
    }

    #[test]
    fn distances_match_coordinate_sums(seed in any::<u64>(), t in 1usize..12, dim in 1usize..6) {
        let mut r = rng(seed);
        let pts = random_points(&mut r, t, dim, 3.0);
        let traj = Trajectory::from_points(Matrix::from_rows(&pts).unwrap()).unwrap();
        let d = geometry::pairwise_distances(&traj).unwrap();
        let want = distance_rows(&pts);
        for i in 0..t {
            for j in 0..t {
                prop_assert!((d.get(i, j) - want[i][j]).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn two_point_magnitude_closed_form(d in 1e-3f64..20.0, s in 1e-3f64..100.0) {
        let mat = DistanceMatrix::from_coords_1d(&[0.0, d]).unwrap();
        for solver in [Solver::Direct, Solver::ConjugateGradient] {
            prop_assert!((magnitude::positive_magnitude(&mat, s, solver).unwrap() - two_point_pmag(d, s)).abs() <= 1e-10);
        }
    }

    #[test]
    fn exhaustive_rademacher_matches_direct_enumeration(seed in any::<u64>()) {
        let mut r = rng(seed);
        let inst = lemma_instance(&mut r);
        let table = Matrix::from_rows(&inst.losses).unwrap();
        let (got, se) = bounds::mc_rademacher(&table, 0, 0, RademacherMode::Exhaustive).unwrap();
        prop_assert_eq!(se, 0.0);
        prop_assert!((got - naive_rademacher(&inst.losses)).abs() <= 1e-12);
        prop_assert!(got >= -1e-15 && got <= inst.loss_bound + 1e-15);
    }

    #[test]
    fn lemma_right_hand_sides_dominate(seed in any::<u64>(), alpha in 0.05f64..=1.0, lambda in 0.05f64..20.0) {
        let mut r = rng(seed);
        let inst = lemma_instance(&mut r);
        let n = inst.losses[0].len();
        let (l, b) = (inst.lipschitz, inst.loss_bound);
        let rad = naive_rademacher(&inst.losses);
        let d = dm(&distance_rows(&inst.points));
        let e = lifetime::alpha_weighted_lifetime_sum(&d, alpha).unwrap();
        let k = bounds::kn_alpha(n, l, b, alpha).unwrap();
        prop_assert!(rad <= bounds::lemma_rhs_ealpha(n, b, k, e).unwrap());
        let pm = magnitude::positive_magnitude(&d, l * lambda, Solver::ConjugateGradient).unwrap();
        prop_assert!(rad <= bounds::lemma_rhs_pmag(n, b, lambda, pm).unwrap());
    }

    #[test]
    fn analytic_stability_matches_direct_sum(l in 0.1f64..5.0, g in 0.1f64..5.0, r in 0.1f64..10.0, frac in 0.01f64..0.99, n in 2usize..500, t in 0u64..300) {
        let c = frac / g;
        let got = stability::analytic_sgd_stability(l, g, r, c, n, t).unwrap();
        let want = analytic_oracle(l, g, r, c, n, t);
        prop_assert!((got - want).abs() <= 1e-12 * (1.0 + want.abs()));
    }

    #[test]
    fn bound_formulas_match_direct_evaluation(beta in 1e-4f64..10.0, b in 0.1f64..5.0, n in 1usize..1000, l in 0.1f64..5.0, alpha in 0.05f64..=1.0, e in 0.0f64..100.0, p in 1.0f64..100.0, lambda in 0.1f64..10.0) {
        let k = 2.0 * (2.0 * l * (n as f64).sqrt() / b).powf(alpha);
        prop_assert!(close(bounds::kn_alpha(n, l, b, alpha).unwrap(), k, 1e-12));
        let want_e = beta.cbrt() * (2.0 + 2.0 * b + 2.0 * b * (2.0 * (1.0 + k * e).ln()).sqrt());
        prop_assert!(close(bounds::ealpha_bound(beta, b, k, &[e]).unwrap().value, want_e, 1e-12));
        let want_p = beta.cbrt() * (2.0 + lambda * b + 2.0 * b / lambda * p.ln());
        prop_assert!(close(bounds::pmag_bound(beta, b, lambda, &[p]).unwrap().value, want_p, 1e-12));
        let want_s = lambda * l / beta.cbrt() / b;
        prop_assert!(close(magnitude::pmag_scale(lambda, l, b, beta).unwrap(), want_s, 1e-12));
    }

    #[test]
    fn spearman_is_pearson_on_ranks(x in prop::collection::vec(-5.0f64..5.0, 3..20), seed in any::<u64>()) {
        let mut r = rng(seed);
        let y: Vec<f64> = x.iter().map(|v| v * 2.0 + rand::Rng::random_range(&mut r, -3.0..3.0)).collect();
        let ranks = |v: &[f64]| -> Vec<f64> {
            v.iter()
                .map(|a| {
                    let below = v.iter().filter(|b| *b < a).count() as f64;
                    let ties = v.iter().filter(|b| *b == a).count() as f64;
                    below + (ties + 1.0) / 2.0
                })
                .collect()
        };
        let (rx, ry) = (ranks(&x), ranks(&y));
        if let Ok(p) = analysis::pearson(&rx, &ry) {
            prop_assert!((analysis::spearman(&x, &y).unwrap() - p.r).abs() <= 1e-12);
        }
    }
}

//! Rademacher complexity of a trajectory's loss table next to the two lemma
//! right-hand sides built from E^alpha and positive magnitude.

use trajtopo::artifact::Split;
use trajtopo::bounds::{self, RademacherMode};
use trajtopo::magnitude::{self, Solver};
use trajtopo::trainer::{self, SgdConfig, StepRule, TaskKind};
use trajtopo::{geometry, lifetime};

fn main() -> trajtopo::Result<()> {
    let (task, train, pool) = trainer::make_task_and_data(TaskKind::LogisticRegression, 100, 3, 5)?;
    let traj = trainer::projected_sgd(&task, &train, &SgdConfig::new(5.0, StepRule::Constant { eta: 0.05 }, 400, 5))?;
    let sub = geometry::subsample_uniform(&traj, 40, 5)?;
    let w = geometry::pairwise_distances(&sub)?;
    let eval = pool.subset(12, 5, 2);
    let full = trainer::loss_matrix(&task, &traj, &eval, Split::Probe)?;
    let table = trainer::loss_matrix(&task, &sub, &eval, Split::Probe)?.values().clone();

    let est = bounds::estimate_constants(&traj, &full)?;
    let (l, b, m) = (est.lipschitz, est.loss_bound, eval.len());
    let (exact, _) = bounds::mc_rademacher(&table, 0, 0, RademacherMode::Exhaustive)?;
    let (mc, se) = bounds::mc_rademacher(&table, 4000, 1, RademacherMode::MonteCarlo)?;
    println!("|W| = {}, m = {m}, L_hat = {l:.3}, B_hat = {b:.3}", w.len());
    println!("Rademacher exact {exact:.5}, Monte Carlo {mc:.5} +- {se:.5}");

    let e = lifetime::alpha_weighted_lifetime_sum(&w, 1.0)?;
    let k = bounds::kn_alpha(m, l, b, 1.0)?;
    println!("E^1 lemma RHS {:.5}", bounds::lemma_rhs_ealpha(m, b, k, e)?);
    for lambda in [0.5, 2.0, 8.0] {
        let pm = magnitude::positive_magnitude(&w, l * lambda, Solver::ConjugateGradient)?;
        println!("PMag lemma RHS at lambda {lambda}: {:.5}", bounds::lemma_rhs_pmag(m, b, lambda, pm)?);
    }
    Ok(())
}

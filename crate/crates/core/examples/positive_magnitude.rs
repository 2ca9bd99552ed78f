//! Positive magnitude of a trajectory across scales, with both solvers and
//! the scale used by the magnitude bound.

use trajtopo::geometry;
use trajtopo::magnitude::{self, ScaleGrid, Solver};
use trajtopo::trainer::{self, SgdConfig, StepRule, TaskKind};

fn main() -> trajtopo::Result<()> {
    let (task, train, _) = trainer::make_task_and_data(TaskKind::LogisticRegression, 200, 10, 4)?;
    let traj = trainer::projected_sgd(&task, &train, &SgdConfig::new(10.0, StepRule::Constant { eta: 0.05 }, 1000, 4))?;
    let d = geometry::deduplicate_relative(&geometry::pairwise_distances(&geometry::subsample_uniform(&traj, 300, 4)?)?);

    let grid = ScaleGrid::new(vec![1.0, 10.0, 100.0, 1000.0])?;
    for (cg, direct) in magnitude::pmag_sweep(&d, &grid, Solver::ConjugateGradient)?
        .iter()
        .zip(magnitude::pmag_sweep(&d, &grid, Solver::Direct)?)
    {
        println!(
            "s = {:>6}: PMag {:.6} (direct {:.6}), magnitude {:.6}, {} CG iterations, residual {:.1e}",
            cg.scale, cg.pmag, direct.pmag, cg.magnitude, cg.iterations, cg.residual
        );
    }

    let s = magnitude::pmag_scale(1.0, 2.0, 1.0, 1e-3)?;
    println!("theorem scale for lambda=1, L=2, B=1, beta=1e-3: {s}; PMag {:.4} of {} points", magnitude::positive_magnitude(&d, s, Solver::ConjugateGradient)?, d.len());
    Ok(())
}

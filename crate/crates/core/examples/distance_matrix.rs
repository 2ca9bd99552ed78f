//! Subsamples a trajectory, builds its Euclidean distance matrix and drops
//! near-duplicate iterates.

use trajtopo::geometry;
use trajtopo::trainer::{self, SgdConfig, StepRule, TaskKind};

fn main() -> trajtopo::Result<()> {
    let (task, train, _) = trainer::make_task_and_data(TaskKind::Quadratic, 100, 5, 1)?;
    let traj = trainer::projected_sgd(&task, &train, &SgdConfig::new(10.0, StepRule::Constant { eta: 0.05 }, 2000, 1))?;

    let sub = geometry::subsample_uniform(&traj, 300, 1)?;
    let d = geometry::pairwise_distances(&sub)?;
    println!("{} of {} iterates kept, iteration ids {:?}..", sub.len(), traj.len(), &sub.iteration_ids()[..5]);
    println!("diameter {:.4}, closest pair {:.2e}", d.max_distance(), d.min_distance().unwrap_or(0.0));

    let distinct = geometry::deduplicate_relative(&d);
    println!("{} points after removing near duplicates", distinct.len());
    Ok(())
}

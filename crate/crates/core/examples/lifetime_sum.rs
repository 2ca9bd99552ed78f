//! Degree-zero persistence via the minimum spanning tree: the alpha-weighted
//! lifetime sum of a trajectory for several alpha.

use trajtopo::geometry;
use trajtopo::lifetime;
use trajtopo::trainer::{self, SgdConfig, StepRule, TaskKind};

fn main() -> trajtopo::Result<()> {
    let (task, train, _) = trainer::make_task_and_data(TaskKind::LogisticRegression, 200, 10, 3)?;
    let traj = trainer::projected_sgd(&task, &train, &SgdConfig::new(10.0, StepRule::Constant { eta: 0.05 }, 1000, 3))?;
    let d = geometry::pairwise_distances(&geometry::subsample_uniform(&traj, 400, 3)?)?;

    let tree = lifetime::minimum_spanning_tree(&d);
    let longest = tree.lengths().fold(0.0, f64::max);
    println!("{} edges, total length {:.4}, longest {:.4}", tree.count(), tree.total_length(), longest);
    for alpha in [0.0, 0.5, 1.0, 1.5] {
        println!("E^{alpha} = {:.4}", lifetime::alpha_weighted_lifetime_sum(&d, alpha)?);
    }
    Ok(())
}

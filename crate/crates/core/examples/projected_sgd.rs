//! Projected SGD on the three synthetic tasks; prints train and test risk
//! and the worst-case gap over the recorded iterates.

use trajtopo::analysis;
use trajtopo::artifact::Split;
use trajtopo::trainer::{self, Init, SgdConfig, StepRule, TaskKind};

fn main() -> trajtopo::Result<()> {
    for kind in [TaskKind::Quadratic, TaskKind::LogisticRegression, TaskKind::SmallMlp] {
        let (task, train, pool) = trainer::make_task_and_data(kind, 100, 5, 0)?;
        let mut cfg = SgdConfig::new(10.0, StepRule::Decaying { c: 0.5 }, 1500, 0);
        cfg.init = Init::Gaussian { std: task.default_init_std() };
        let traj = trainer::projected_sgd(&task, &train, &cfg)?;
        let test = pool.subset(300, 0, 1);
        let tr = trainer::loss_matrix(&task, &traj, &train, Split::Train)?;
        let te = trainer::loss_matrix(&task, &traj, &test, Split::Test)?;
        let last = traj.len() - 1;
        println!(
            "{kind:>20}: train {:.4} test {:.4} at T={}, worst-case gap {:.4}, final gap {:.4}, |w_T| {:.3}",
            tr.row_mean(last),
            te.row_mean(last),
            traj.iteration_ids()[last],
            analysis::worst_case_gap(&tr, &te)?,
            analysis::final_gap(&tr, &te)?,
            traj.last().iter().map(|v| v * v).sum::<f64>().sqrt()
        );
    }
    Ok(())
}

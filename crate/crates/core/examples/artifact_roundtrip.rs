//! Writes a trajectory and its loss matrix as `<stem>.json` + `<stem>.bin`
//! pairs and reads them back.

use trajtopo::artifact::{read_artifact, Split, Trajectory};
use trajtopo::trainer::{self, SgdConfig, StepRule, TaskKind};

fn main() -> trajtopo::Result<()> {
    let dir = std::env::temp_dir().join("trajtopo-example-artifacts");
    let (task, train, _) = trainer::make_task_and_data(TaskKind::LogisticRegression, 64, 3, 7)?;
    let traj = trainer::projected_sgd(&task, &train, &SgdConfig::new(5.0, StepRule::Constant { eta: 0.1 }, 20, 7))?;
    let losses = trainer::loss_matrix(&task, &traj, &train, Split::Train)?;

    traj.save(&dir.join("trajectory"))?;
    losses.save(&dir.join("train_loss"))?;

    let (manifest, matrix) = read_artifact(&dir.join("trajectory"))?;
    println!("{}", serde_json::to_string_pretty(&manifest).unwrap());
    assert_eq!(Trajectory::load(&dir.join("trajectory"))?, traj);
    println!("trajectory {}x{}, payload {} bytes", matrix.rows(), matrix.cols(), 8 * matrix.as_slice().len());
    println!("loss matrix mean at last iterate: {:.4}", losses.row_mean(losses.iterations() - 1));
    Ok(())
}

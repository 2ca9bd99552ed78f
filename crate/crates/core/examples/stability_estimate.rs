//! Empirical trajectory stability: pairs of runs sharing their randomness on
//! datasets that differ in J samples, for growing n.

use trajtopo::stability::{self, Direction, StabilitySetup};
use trajtopo::trainer::{StepRule, TaskKind};

fn main() -> trajtopo::Result<()> {
    let mut setup = StabilitySetup::new(TaskKind::Quadratic, 5, StepRule::Decaying { c: 0.5 }, 500);
    let seeds: Vec<u64> = (0..10).collect();
    let mut reports = Vec::new();
    for n in [50, 100, 200, 400] {
        reports.push(stability::stability_experiment(&setup, n, 5, &seeds)?);
    }
    setup.direction = Direction::Symmetrized;
    reports.push(stability::stability_experiment(&setup, 400, 5, &seeds)?);
    print!("{}", stability::stability_csv(&reports));
    for r in &reports {
        if let Some(b) = r.beta_analytic {
            println!("n = {} ({}): closed-form SGD stability {b:.3}", r.n, r.direction);
        }
    }
    Ok(())
}

//! Both generalization bounds for one trained cell, with the empirical and
//! the closed-form stability parameter side by side.

use trajtopo::config::{ExperimentConfig, StepRuleKind};
use trajtopo::pipeline::{self, Betas};
use trajtopo::stability;

fn main() -> trajtopo::Result<()> {
    let cfg = ExperimentConfig {
        task: trajtopo::trainer::TaskKind::Quadratic,
        input_dim: 5,
        n: vec![200],
        eta: vec![0.5],
        step_rule: StepRuleKind::Decaying,
        iterations: 1000,
        subsample: 300,
        ..ExperimentConfig::default()
    };
    let spec = pipeline::cells(&cfg).remove(0);
    let setup = pipeline::stability_setup(&cfg, spec.eta, &cfg.stability);
    let beta = stability::stability_experiment(&setup, spec.n, 5, &[0, 1, 2, 3])?.mean;

    let dir = std::env::temp_dir().join("trajtopo-example-bounds");
    let record = pipeline::run_cell(&spec, Betas { empirical: Some(beta), analytic: None }, &dir)?;
    println!("gap {:.4}, E^1 {:.4}, L_hat {:.3}, B_hat {:.3}", record.gen_gap, record.e_alpha.unwrap(), record.lipschitz_hat.unwrap(), record.loss_bound_hat.unwrap());
    for b in &record.bounds {
        println!(
            "{:?} bound with {} beta = {:.4e}: {:.4} (complexity {:.4})",
            b.theorem,
            b.beta_source.as_deref().unwrap_or("?"),
            b.beta,
            b.value,
            b.complexity_mean
        );
    }
    Ok(())
}

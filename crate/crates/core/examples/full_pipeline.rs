//! The whole grid from a TOML config with command-line style overrides;
//! a second run reuses every completed cell.

use trajtopo::config::ExperimentConfig;
use trajtopo::pipeline;

const CONFIG: &str = r#"
task = "logistic_regression"
input_dim = 5
n = [40, 80, 160]
eta = [0.05]
seeds = [0, 1]
iterations = 400
subsample = 200
test_size = 200

[pmag]
fixed_scales = [10.0, 100.0]
theorem_lambdas = [1.0, 4.0]

[stability]
enabled = true
j = 4
seeds = [0, 1, 2]
iterations = 200
"#;

fn main() -> trajtopo::Result<()> {
    let out = std::env::temp_dir().join("trajtopo-example-pipeline");
    let _ = std::fs::remove_dir_all(&out);
    let overrides = vec![format!("out={:?}", out.display().to_string()), "jobs=2".to_string()];
    let cfg = ExperimentConfig::from_toml_str(CONFIG, &overrides)?;

    let first = pipeline::run_pipeline(&cfg)?;
    let again = pipeline::run_pipeline(&cfg)?;
    println!("first run computed {}, second run skipped {}", first.computed, again.skipped);
    for g in pipeline::summarize(&first.records)?.groups {
        let bounds: Vec<String> = g.bounds.iter().map(|b| format!("{:?}={:.3}", b.theorem, b.value)).collect();
        println!("n={:>4} gap {:.4} E^1 {:.3} beta_hat {:.4} bounds {}", g.n, g.mean_gap, g.mean_e_alpha.unwrap_or(f64::NAN), g.beta_hat.unwrap_or(f64::NAN), bounds.join(" "));
    }
    println!("outputs under {}", first.out_dir.display());
    Ok(())
}

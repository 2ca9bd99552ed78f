//! Per-n correlation of complexity with the generalization gap over a small
//! grid, and the trend of the regression slope across n.

use trajtopo::analysis::{self, ComplexityKind};
use trajtopo::config::ExperimentConfig;
use trajtopo::pipeline;

fn main() -> trajtopo::Result<()> {
    let out = std::env::temp_dir().join("trajtopo-example-grid");
    let _ = std::fs::remove_dir_all(&out);
    let cfg = ExperimentConfig {
        input_dim: 10,
        n: vec![50, 100, 200],
        eta: vec![0.01, 0.05, 0.1],
        seeds: vec![0, 1],
        warmup: 500,
        iterations: 500,
        subsample: 200,
        test_size: 200,
        out: Some(out),
        jobs: 4,
        ..ExperimentConfig::default()
    };
    let records = pipeline::run_pipeline(&cfg)?.records;
    let reports = [
        analysis::grid_report(&records, ComplexityKind::EAlpha)?,
        analysis::grid_report(&records, ComplexityKind::PmagFixedScale { scale: 100.0 })?,
    ];
    print!("{}", analysis::grid_csv(&reports));
    let trend = analysis::slope_vs_n(&reports[0].slopes())?;
    println!("E^1 slopes {:?}, increasing fraction {:.2}", trend.slopes, trend.increasing_fraction);
    Ok(())
}

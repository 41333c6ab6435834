//! Sensitivity to the prior weight and the pooling temperature.

use segfuse::lab::{generate_scene, run_sweep, SceneParams, Selection, SweepAxes, SweepOptions, PRIMARY_SOURCE};
use segfuse::prior::AggregationKind;

fn main() -> segfuse::Result<()> {
    let scene = generate_scene(&SceneParams {
        seed: 2,
        classes: 6,
        mask_noise: 2.0,
        ..SceneParams::default()
    })?;
    let axes = SweepAxes {
        p: vec![1.0],
        selection: vec![Selection::Easy],
        lambda_prior: vec![0.0, 0.3, 0.5, 0.7, 0.9],
        tau_s: vec![0.05, 0.1, 0.5],
        aggregation: vec![AggregationKind::LogSumExp],
        feature_source: vec![PRIMARY_SOURCE.into()],
    };
    let rows = run_sweep(&scene, &axes, &SweepOptions::default())?;
    println!("lambda  tau    miou");
    for r in &rows {
        println!("{:<7.1} {:<6.2} {:.4}", r.setting.lambda_prior, r.setting.tau_s, r.miou);
    }
    Ok(())
}

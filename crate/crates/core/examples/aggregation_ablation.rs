//! Average, Max and log-sum-exp synonym pooling side by side.

use segfuse::lab::{generate_scene, run_sweep, SceneParams, Selection, SweepAxes, SweepOptions, PRIMARY_SOURCE};
use segfuse::prior::AggregationKind;

fn main() -> segfuse::Result<()> {
    let axes = SweepAxes {
        p: vec![1.0],
        selection: vec![Selection::Easy],
        lambda_prior: vec![0.7],
        tau_s: vec![0.1],
        aggregation: vec![AggregationKind::Average, AggregationKind::Max, AggregationKind::LogSumExp],
        feature_source: vec![PRIMARY_SOURCE.into()],
    };
    println!("{:>6} {:>8} {:>8} {:>8}", "drift", "average", "max", "lse");
    for drift in [0.0, 0.3, 0.6, 1.0] {
        let mut total = [0.0; 3];
        for seed in 0..4 {
            let scene = generate_scene(&SceneParams {
                seed,
                classes: 6,
                synonyms_per_class: 4,
                drift,
                ..SceneParams::default()
            })?;
            let rows = run_sweep(&scene, &axes, &SweepOptions::default())?;
            for (t, r) in total.iter_mut().zip(&rows) {
                *t += r.miou / 4.0;
            }
        }
        println!("{drift:>6.1} {:>8.4} {:>8.4} {:>8.4}", total[0], total[1], total[2]);
    }
    Ok(())
}

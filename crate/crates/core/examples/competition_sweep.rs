//! Competitor-ratio sweep: how the candidate set changes mIoU.

use segfuse::lab::{
    generate_scene, run_sweep, select_competitors, sweep_csv, CompetitionSpec, SceneParams,
    Selection, SweepAxes, SweepOptions, PRIMARY_SOURCE,
};
use segfuse::prior::AggregationKind;

fn main() -> segfuse::Result<()> {
    // class 1 is a near-duplicate of class 0 and leaks into its masks
    let scene = generate_scene(&SceneParams {
        seed: 6,
        classes: 6,
        confuser_mix: 0.8,
        confuser_leak: 0.6,
        ..SceneParams::default()
    })?;

    let ps = vec![0.0, 0.2, 0.4, 0.6, 0.8, 1.0];
    for selection in [Selection::Easy, Selection::Hard] {
        for &p in &ps {
            let spec = CompetitionSpec {
                target_class: 0,
                p,
                selection,
            };
            let set = select_competitors(&scene.embeddings, &scene.bank, &spec)?;
            println!("{selection:>4} p={p:.1}: {set:?}");
        }
    }

    let axes = SweepAxes {
        p: ps,
        selection: vec![Selection::Easy, Selection::Hard],
        lambda_prior: vec![0.7],
        tau_s: vec![0.1],
        aggregation: vec![AggregationKind::LogSumExp],
        feature_source: vec![PRIMARY_SOURCE.into()],
    };
    let rows = run_sweep(&scene, &axes, &SweepOptions::default())?;
    print!("{}", sweep_csv(&rows));
    Ok(())
}

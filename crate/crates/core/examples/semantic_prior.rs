//! Semantic prior from dense features and synonym embeddings.

use segfuse::lab::{generate_scene, SceneParams};
use segfuse::prior::{build_prior, log_sum_exp_scaled, AggregationMode, PriorConfig};

fn main() -> segfuse::Result<()> {
    // pooled synonym scores for one pixel
    let u = [0.9, 0.1];
    println!("lse(tau=0.1) = {:.4}", AggregationMode::LogSumExp { tau_s: 0.1 }.reduce(&u));
    println!("average      = {:.4}", AggregationMode::Average.reduce(&u));
    println!("max          = {:.4}", AggregationMode::Max.reduce(&u));
    println!("lse(tau=1e-3) - max/tau = {:.2e}", log_sum_exp_scaled(&u, 1e-3) - 0.9 / 1e-3);

    // features at half the mask resolution
    let scene = generate_scene(&SceneParams {
        seed: 7,
        feature_stride: 2,
        ..SceneParams::default()
    })?;
    let p = &scene.params;
    let prior = build_prior(
        &scene.features,
        &scene.embeddings,
        &scene.bank,
        &PriorConfig::default(),
        p.height,
        p.width,
    )?;
    println!(
        "features {:?} -> log prior {:?}",
        scene.features.dims(),
        prior.log_pi.dims()
    );

    let mut correct = 0;
    for (px, &gt) in prior.log_pi.pixel_iter().zip(scene.gt.data()) {
        let best = (0..px.len()).fold(0, |b, c| if px[c] > px[b] { c } else { b });
        correct += usize::from(best as u32 == gt);
    }
    println!(
        "prior argmax agrees with ground truth on {correct}/{} pixels",
        scene.gt.data().len()
    );
    let center = prior.log_pi.pixel(p.height / 2, p.width / 2);
    let total: f32 = center.iter().map(|v| v.exp()).sum();
    println!("center pixel log pi {center:?}, sum of pi = {total:.6}");
    Ok(())
}

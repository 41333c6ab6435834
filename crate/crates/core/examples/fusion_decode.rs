//! Logit-space fusion and decoding with optional background rejection.

use segfuse::fusion::{
    fuse, fuse_and_decode, structural_argmax, Background, EvidenceBundle, EvidenceKind, FusionConfig,
};
use segfuse::prior::PriorStack;
use segfuse::tensor::DenseGrid;

fn main() -> segfuse::Result<()> {
    // one pixel, two classes: probabilities 0.5/0.5, presence favours class 1
    let evidence = EvidenceBundle::new(
        DenseGrid::new(vec![1, 1, 2], vec![0.5, 0.5])?,
        EvidenceKind::Probabilities,
        vec![0.0, 0.2],
    )?;
    let prior = PriorStack::from_log_pi(DenseGrid::new(vec![1, 1, 2], vec![0.5f32.ln(), 0.5f32.ln()])?);

    let cfg = FusionConfig::default();
    let scores = fuse(&evidence, &prior, &cfg)?;
    println!("fused scores {:?}", scores.scores.data());
    println!("label {}", fuse_and_decode(&evidence, &prior, &cfg)?.data()[0]);

    let strict = FusionConfig {
        background: Some(Background {
            threshold: 0.0,
            index: None,
        }),
        ..cfg
    };
    println!("with threshold 0: label {}", fuse_and_decode(&evidence, &prior, &strict)?.data()[0]);

    // no prior, no presence: plain structural argmax
    let bare = evidence.without_presence();
    let off = FusionConfig {
        lambda_prior: 0.0,
        background: None,
    };
    assert_eq!(
        fuse_and_decode(&bare, &prior, &off)?.data(),
        structural_argmax(&bare).data()
    );
    println!("lambda=0 without presence reproduces the structural argmax");
    Ok(())
}

//! Confusion-matrix mIoU with pooled accumulation.

use segfuse::eval::ConfusionMatrix;
use segfuse::tensor::LabelMap;

fn main() -> segfuse::Result<()> {
    let gt = LabelMap::new(2, 2, vec![0, 0, 1, 1])?;
    let pred = LabelMap::new(2, 2, vec![0, 1, 1, 1])?;

    let mut cm = ConfusionMatrix::new(2, None);
    cm.accumulate(&gt, &pred)?;
    print!("{}", cm.csv_report()?);

    // a second image accumulates into the same counts
    let gt2 = LabelMap::new(1, 3, vec![0, 1, 255])?;
    let pred2 = LabelMap::new(1, 3, vec![0, 1, 0])?;
    let mut other = ConfusionMatrix::new(2, Some(255));
    other.accumulate(&gt2, &pred2)?;
    let mut pooled = ConfusionMatrix::new(2, Some(255));
    pooled.merge(&cm)?;
    pooled.merge(&other)?;
    println!("pooled over {} pixels: miou = {:.6}", pooled.total(), pooled.miou()?);
    Ok(())
}

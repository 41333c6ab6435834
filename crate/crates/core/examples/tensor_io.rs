//! CFT1 grids and label maps: write, read back, resample.

use segfuse::tensor::{bilinear_resize, load_grid, load_labels, save_grid, save_labels, DenseGrid, LabelMap};

fn main() -> segfuse::Result<()> {
    let dir = tempfile::tempdir().expect("tempdir");

    let grid = DenseGrid::new(vec![2, 2], vec![0.0, 1.0, 2.0, 3.0])?;
    let path = dir.path().join("ramp.cft");
    save_grid(&grid, &path)?;
    let bytes = std::fs::read(&path).expect("read");
    println!("{} bytes on disk, header {:02x?}", bytes.len(), &bytes[..14]);

    let back = load_grid(&path)?;
    assert_eq!(back, grid);

    let up = bilinear_resize(&back, 4, 4)?;
    for y in 0..4 {
        let row: Vec<String> = (0..4).map(|x| format!("{:5.2}", up.get(y, x, 0))).collect();
        println!("{}", row.join(" "));
    }

    let labels = LabelMap::new(2, 3, vec![0, 1, 2, 2, 1, 0])?;
    let lpath = dir.path().join("labels.cft");
    save_labels(&labels, &lpath)?;
    println!("labels round trip: {:?}", load_labels(&lpath)?.data());

    // malformed input surfaces a typed error
    let mut bad = bytes.clone();
    bad[3] = b'9';
    std::fs::write(&path, bad).expect("write");
    match load_grid(&path) {
        Err(e) => println!("error[{}]: {e}", e.code()),
        Ok(_) => unreachable!(),
    }
    Ok(())
}

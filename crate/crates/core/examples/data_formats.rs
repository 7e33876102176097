//! Round-trips the on-disk formats: writes a tiny IDX image/label pair,
//! loads it with downsampling, then packs a synthetic shift into the
//! checksummed bundle container and reads it back.

use geocot::data::{
    gen_shift, load_bundle, load_idx, save_bundle, write_idx_images, write_idx_labels, ShiftScenario,
};

fn main() -> geocot::Result<()> {
    let dir = std::env::temp_dir().join(format!("geocot-formats-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;

    let images: Vec<Vec<u8>> = (0..4u8).map(|k| (0..16).map(|p| p * 16 + k).collect()).collect();
    let (img, lbl) = (dir.join("images.idx"), dir.join("labels.idx"));
    write_idx_images(&img, 4, 4, &images)?;
    write_idx_labels(&lbl, &[0, 1, 2, 3])?;
    let set = load_idx(&img, &lbl, None, Some(2))?;
    println!("idx: {} images of {} features, labels {:?}", set.len(), set.dim(), set.hard_labels().unwrap_or(&[]));
    println!("first image downsampled to 2x2: {:.4}", set.features().row(0));

    let bundle = gen_shift(&ShiftScenario::default())?;
    let path = dir.join("shift.bundle");
    save_bundle(&bundle, &path)?;
    let back = load_bundle(&path)?;
    println!(
        "bundle: {} bytes, {} source / {} target points, identical after reload: {}",
        std::fs::metadata(&path)?.len(),
        back.source().len(),
        back.target().len(),
        back == bundle
    );
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}

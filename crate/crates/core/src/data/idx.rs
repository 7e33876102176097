use std::fs;
use std::path::Path;

use ndarray::Array2;

use crate::cost::LabeledFeatureSet;
use crate::{Error, Result};

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;
const DIGIT_CLASSES: usize = 10;

fn be_u32(bytes: &[u8], at: usize, path: &Path) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes(b.try_into().expect("4 bytes")))
        .ok_or_else(|| Error::Truncated(format!("{}: header ends at byte {}", path.display(), bytes.len())))
}

fn check_magic(bytes: &[u8], expected: u32, path: &Path) -> Result<()> {
    let found = be_u32(bytes, 0, path)?;
    if found != expected {
        return Err(Error::BadMagic {
            path: path.to_path_buf(),
            found,
            expected,
        });
    }
    Ok(())
}

/// Area-average resampling of a `h×w` image to `s×s`: each output pixel is
/// the mean of the input area it covers, fractional overlaps weighted.
fn area_downsample(img: &[f64], h: usize, w: usize, s: usize) -> Vec<f64> {
    let weights = |from: usize, to: usize| -> Vec<Vec<(usize, f64)>> {
        let ratio = from as f64 / to as f64;
        (0..to)
            .map(|o| {
                let (lo, hi) = (o as f64 * ratio, (o + 1) as f64 * ratio);
                let mut cells = Vec::new();
                let mut i = lo.floor() as usize;
                while (i as f64) < hi && i < from {
                    let overlap = (hi.min((i + 1) as f64) - lo.max(i as f64)).max(0.0);
                    if overlap > 0.0 {
                        cells.push((i, overlap / ratio));
                    }
                    i += 1;
                }
                cells
            })
            .collect()
    };
    let wr = weights(h, s);
    let wc = weights(w, s);
    let mut out = vec![0.0; s * s];
    for (p, rows) in wr.iter().enumerate() {
        for (q, cols) in wc.iter().enumerate() {
            let mut acc = 0.0;
            for &(r, a) in rows {
                for &(c, b) in cols {
                    acc += a * b * img[r * w + c];
                }
            }
            out[p * s + q] = acc;
        }
    }
    out
}

/// Reads an IDX image file (`0x00000803`) and its label file (`0x00000801`).
///
/// Pixels are scaled to `[0, 1]`; with `downsample_to = Some(s)` every image
/// is area-averaged to `s×s`. Features are flattened row-major. At most
/// `max_items` images are read (`None` reads all).
pub fn load_idx(
    images_path: &Path,
    labels_path: &Path,
    max_items: Option<usize>,
    downsample_to: Option<usize>,
) -> Result<LabeledFeatureSet> {
    let images = fs::read(images_path)?;
    let labels = fs::read(labels_path)?;
    check_magic(&images, IDX_IMAGES_MAGIC, images_path)?;
    check_magic(&labels, IDX_LABELS_MAGIC, labels_path)?;
    let n_img = be_u32(&images, 4, images_path)? as usize;
    let h = be_u32(&images, 8, images_path)? as usize;
    let w = be_u32(&images, 12, images_path)? as usize;
    let n_lab = be_u32(&labels, 4, labels_path)? as usize;
    if n_img != n_lab {
        return Err(Error::CountMismatch(format!(
            "{} holds {n_img} images but {} holds {n_lab} labels",
            images_path.display(),
            labels_path.display()
        )));
    }
    if downsample_to == Some(0) {
        return Err(Error::InvalidParameter("downsample size must be positive".into()));
    }
    let n = max_items.map_or(n_img, |m| m.min(n_img));
    let pixels = h * w;
    let img_end = 16 + n * pixels;
    if images.len() < 16 + n_img * pixels {
        return Err(Error::Truncated(format!(
            "{}: expected {} bytes of pixels, found {}",
            images_path.display(),
            n_img * pixels,
            images.len().saturating_sub(16)
        )));
    }
    if labels.len() < 8 + n_lab {
        return Err(Error::Truncated(format!(
            "{}: expected {n_lab} labels, found {}",
            labels_path.display(),
            labels.len().saturating_sub(8)
        )));
    }
    let dim = downsample_to.map_or(pixels, |s| s * s);
    let mut features = Array2::zeros((n, dim));
    for (i, chunk) in images[16..img_end].chunks_exact(pixels.max(1)).take(n).enumerate() {
        let img: Vec<f64> = chunk.iter().map(|&p| f64::from(p) / 255.0).collect();
        let row = match downsample_to {
            Some(s) => area_downsample(&img, h, w, s),
            None => img,
        };
        features.row_mut(i).iter_mut().zip(row).for_each(|(f, v)| *f = v);
    }
    let ys: Vec<usize> = labels[8..8 + n].iter().map(|&l| usize::from(l)).collect();
    LabeledFeatureSet::new(features)?.with_hard_labels(ys, DIGIT_CLASSES)
}

/// Writes `images` (`n` images of `rows×cols` bytes) as an IDX image file.
pub fn write_idx_images(path: &Path, rows: usize, cols: usize, images: &[Vec<u8>]) -> Result<()> {
    let mut buf = Vec::with_capacity(16 + images.len() * rows * cols);
    buf.extend_from_slice(&IDX_IMAGES_MAGIC.to_be_bytes());
    for v in [images.len(), rows, cols] {
        buf.extend_from_slice(&(v as u32).to_be_bytes());
    }
    for img in images {
        if img.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!("image of {} bytes, expected {}", img.len(), rows * cols)));
        }
        buf.extend_from_slice(img);
    }
    fs::write(path, buf)?;
    Ok(())
}

pub fn write_idx_labels(path: &Path, labels: &[u8]) -> Result<()> {
    let mut buf = Vec::with_capacity(8 + labels.len());
    buf.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
    buf.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    buf.extend_from_slice(labels);
    fs::write(path, buf)?;
    Ok(())
}

use std::fs;
use std::path::Path;

use ndarray::{Array2, ArrayView2};
use sha2::{Digest, Sha256};

use crate::cost::LabeledFeatureSet;
use crate::{Error, Result};

pub const BUNDLE_MAGIC: &[u8; 8] = b"GEOCOTDB";
pub const BUNDLE_VERSION: u32 = 1;
const HEADER_LEN: usize = 8 + 4 + 8 * 4 + 1;
const CHECKSUM_LEN: usize = 32;

/// Labeled source, unlabeled target and (optionally) the target labels kept
/// aside for evaluation. Training code receives a [`TrainingView`], which has
/// no path to the target labels.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetBundle {
    source: LabeledFeatureSet,
    target: LabeledFeatureSet,
    target_labels: Option<Vec<usize>>,
}

/// What training may see.
#[derive(Debug, Clone, Copy)]
pub struct TrainingView<'a> {
    source: &'a LabeledFeatureSet,
    source_labels: &'a [usize],
    target: ArrayView2<'a, f64>,
}

impl<'a> TrainingView<'a> {
    pub fn source_features(&self) -> ArrayView2<'a, f64> {
        self.source.features()
    }

    pub fn source_labels(&self) -> &'a [usize] {
        self.source_labels
    }

    pub fn target_features(&self) -> ArrayView2<'a, f64> {
        self.target
    }

    pub fn num_classes(&self) -> usize {
        self.source.num_classes()
    }
}

/// Features with labels, used only for scoring.
#[derive(Debug, Clone, Copy)]
pub struct EvalSet<'a> {
    features: ArrayView2<'a, f64>,
    labels: &'a [usize],
}

impl<'a> EvalSet<'a> {
    pub fn new(features: ArrayView2<'a, f64>, labels: &'a [usize]) -> Result<Self> {
        if features.nrows() != labels.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} rows with {} labels",
                features.nrows(),
                labels.len()
            )));
        }
        Ok(Self { features, labels })
    }

    pub fn features(&self) -> ArrayView2<'a, f64> {
        self.features
    }

    pub fn labels(&self) -> &'a [usize] {
        self.labels
    }
}

impl DatasetBundle {
    /// `source` must carry hard labels; `target` must not carry any.
    pub fn new(source: LabeledFeatureSet, target: LabeledFeatureSet, target_labels: Option<Vec<usize>>) -> Result<Self> {
        let labels = source
            .hard_labels()
            .ok_or_else(|| Error::MissingLabels("bundle source needs hard labels".into()))?;
        if labels.len() != source.len() {
            return Err(Error::DimensionMismatch("source labels".into()));
        }
        if target.hard_labels().is_some() || target.soft_labels().is_some() {
            return Err(Error::InvalidParameter(
                "bundle target must be unlabeled; pass evaluation labels separately".into(),
            ));
        }
        if source.dim() != target.dim() && !target.is_empty() && !source.is_empty() {
            return Err(Error::DimensionMismatch(format!(
                "source dim {} vs target dim {}",
                source.dim(),
                target.dim()
            )));
        }
        if let Some(t) = &target_labels {
            if t.len() != target.len() {
                return Err(Error::DimensionMismatch(format!(
                    "{} target labels for {} target points",
                    t.len(),
                    target.len()
                )));
            }
            if let Some(&label) = t.iter().find(|&&l| l >= source.num_classes()) {
                return Err(Error::LabelOutOfRange {
                    label,
                    classes: source.num_classes(),
                });
            }
        }
        Ok(Self {
            source,
            target,
            target_labels,
        })
    }

    pub fn source(&self) -> &LabeledFeatureSet {
        &self.source
    }

    pub fn target(&self) -> &LabeledFeatureSet {
        &self.target
    }

    pub fn num_classes(&self) -> usize {
        self.source.num_classes()
    }

    pub fn training_view(&self) -> TrainingView<'_> {
        TrainingView {
            source: &self.source,
            source_labels: self.source.hard_labels().unwrap_or(&[]),
            target: self.target.features(),
        }
    }

    /// Target features with their held-out labels, when known.
    pub fn target_eval(&self) -> Option<EvalSet<'_>> {
        self.target_labels.as_deref().map(|labels| EvalSet {
            features: self.target.features(),
            labels,
        })
    }

    pub fn source_eval(&self) -> EvalSet<'_> {
        EvalSet {
            features: self.source.features(),
            labels: self.source.hard_labels().unwrap_or(&[]),
        }
    }
}

fn push_u64(buf: &mut Vec<u8>, v: usize) {
    buf.extend_from_slice(&(v as u64).to_le_bytes());
}

/// Serializes a bundle:
///
/// | bytes | content |
/// |---|---|
/// | 8 | magic `GEOCOTDB` |
/// | 4 | version, u32 LE |
/// | 8 × 4 | classes, source rows, target rows, dim, u64 LE |
/// | 1 | 1 if target labels follow, else 0 |
/// | … | source features (f64 LE, row-major), source labels (u64 LE), target features, target labels |
/// | 32 | SHA-256 of everything before it |
pub fn encode_bundle(bundle: &DatasetBundle) -> Vec<u8> {
    let s = &bundle.source;
    let t = &bundle.target;
    let dim = if s.is_empty() { t.dim() } else { s.dim() };
    let mut buf = Vec::new();
    buf.extend_from_slice(BUNDLE_MAGIC);
    buf.extend_from_slice(&BUNDLE_VERSION.to_le_bytes());
    push_u64(&mut buf, s.num_classes());
    push_u64(&mut buf, s.len());
    push_u64(&mut buf, t.len());
    push_u64(&mut buf, dim);
    buf.push(u8::from(bundle.target_labels.is_some()));
    for v in s.features().iter() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    for &l in s.hard_labels().unwrap_or(&[]) {
        push_u64(&mut buf, l);
    }
    for v in t.features().iter() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    if let Some(labels) = &bundle.target_labels {
        for &l in labels {
            push_u64(&mut buf, l);
        }
    }
    let digest = Sha256::digest(&buf);
    buf.extend_from_slice(&digest);
    buf
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            Error::Corrupted(format!("payload ends early at byte {}", self.pos))
        })?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u64(&mut self) -> Result<usize> {
        let b: [u8; 8] = self.take(8)?.try_into().expect("8 bytes");
        usize::try_from(u64::from_le_bytes(b)).map_err(|_| Error::Corrupted("size overflows usize".into()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.take(n.checked_mul(8).ok_or_else(|| Error::Corrupted("size overflow".into()))?)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }

    fn labels(&mut self, n: usize) -> Result<Vec<usize>> {
        (0..n).map(|_| self.u64()).collect()
    }
}

pub fn decode_bundle(bytes: &[u8]) -> Result<DatasetBundle> {
    if bytes.len() < HEADER_LEN + CHECKSUM_LEN {
        return Err(Error::Corrupted(format!("{} bytes is shorter than the header", bytes.len())));
    }
    if &bytes[..8] != BUNDLE_MAGIC {
        return Err(Error::Corrupted("not a bundle (magic mismatch)".into()));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != BUNDLE_VERSION {
        return Err(Error::VersionMismatch {
            found: version,
            expected: BUNDLE_VERSION,
        });
    }
    let (body, stored) = bytes.split_at(bytes.len() - CHECKSUM_LEN);
    if Sha256::digest(body).as_slice() != stored {
        return Err(Error::Corrupted("checksum mismatch".into()));
    }
    let mut r = Reader { bytes: body, pos: 12 };
    let classes = r.u64()?;
    let ns = r.u64()?;
    let nt = r.u64()?;
    let dim = r.u64()?;
    let has_labels = r.take(1)?[0];
    let xs = r.f64s(ns * dim)?;
    let ys = r.labels(ns)?;
    let xt = r.f64s(nt * dim)?;
    let yt = if has_labels == 1 { Some(r.labels(nt)?) } else { None };
    if r.pos != body.len() {
        return Err(Error::Corrupted(format!("{} trailing bytes", body.len() - r.pos)));
    }
    let to_array = |v: Vec<f64>, n: usize| {
        Array2::from_shape_vec((n, dim), v).map_err(|e| Error::Corrupted(e.to_string()))
    };
    let source = LabeledFeatureSet::new(to_array(xs, ns)?)?.with_hard_labels(ys, classes)?;
    let target = LabeledFeatureSet::new(to_array(xt, nt)?)?;
    DatasetBundle::new(source, target, yt)
}

pub fn save_bundle(bundle: &DatasetBundle, path: &Path) -> Result<()> {
    fs::write(path, encode_bundle(bundle))?;
    Ok(())
}

pub fn load_bundle(path: &Path) -> Result<DatasetBundle> {
    decode_bundle(&fs::read(path)?)
}

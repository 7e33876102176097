mod common;

use geocot::cost::LabeledFeatureSet;
use geocot::data::{
    decode_bundle, encode_bundle, gen_shift, load_bundle, load_idx, parse_run_config, save_bundle, DatasetBundle,
    GeneratorKind, ShiftScenario,
};
use geocot::Error;
use ndarray::array;
use proptest::prelude::*;

/// SHA-256 of the fixture body below, computed with Python's hashlib.
const FIXTURE_DIGEST: &str = "3351af0dacdcc399e4f22a4254c3a4680b1bafde880729ae2b4e89ac159a2db3";

fn fixture() -> DatasetBundle {
    let s = LabeledFeatureSet::new(array![[0.5, -1.0], [2.0, 0.25]])
        .unwrap()
        .with_hard_labels(vec![0, 1], 2)
        .unwrap();
    let t = LabeledFeatureSet::new(array![[1.0, 0.0]]).unwrap();
    DatasetBundle::new(s, t, Some(vec![1])).unwrap()
}

fn fixture_body() -> Vec<u8> {
    let mut b = b"GEOCOTDB".to_vec();
    b.extend(1u32.to_le_bytes());
    for v in [2u64, 2, 1, 2] {
        b.extend(v.to_le_bytes());
    }
    b.push(1);
    for v in [0.5f64, -1.0, 2.0, 0.25] {
        b.extend(v.to_le_bytes());
    }
    for v in [0u64, 1] {
        b.extend(v.to_le_bytes());
    }
    for v in [1.0f64, 0.0] {
        b.extend(v.to_le_bytes());
    }
    b.extend(1u64.to_le_bytes());
    b
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[test]
fn bundle_layout_and_checksum_match_fixture() {
    let bytes = encode_bundle(&fixture());
    let body = fixture_body();
    assert_eq!(bytes.len(), 149);
    assert_eq!(&bytes[..body.len()], body.as_slice());
    assert_eq!(hex(&bytes[body.len()..]), FIXTURE_DIGEST);
    assert_eq!(decode_bundle(&bytes).unwrap(), fixture());
}

#[test]
fn bundle_rejects_tampering_truncation_and_versions() {
    let bytes = encode_bundle(&fixture());
    let mut flipped = bytes.clone();
    flipped[40] ^= 1;
    assert!(matches!(decode_bundle(&flipped), Err(Error::Corrupted(_))));
    assert!(matches!(decode_bundle(&bytes[..bytes.len() - 1]), Err(Error::Corrupted(_))));
    let mut v2 = bytes.clone();
    v2[8] = 2;
    assert!(matches!(decode_bundle(&v2), Err(Error::VersionMismatch { found: 2, expected: 1 })));
}

#[test]
fn bundle_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("shift.bundle");
    let bundle = gen_shift(&ShiftScenario::default()).unwrap();
    save_bundle(&bundle, &path).unwrap();
    assert_eq!(load_bundle(&path).unwrap(), bundle);
}

fn write(dir: &std::path::Path, name: &str, bytes: &[u8]) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, bytes).unwrap();
    p
}

/// Two 2×3 images with big-endian headers, written byte by byte.
fn idx_images() -> Vec<u8> {
    let mut b = vec![0, 0, 8, 3, 0, 0, 0, 2, 0, 0, 0, 2, 0, 0, 0, 3];
    b.extend([0, 255, 128, 64, 10, 20, 1, 2, 3, 4, 5, 6]);
    b
}

fn idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut b = vec![0, 0, 8, 1, 0, 0, 0, labels.len() as u8];
    b.extend(labels);
    b
}

#[test]
fn idx_fixture_decodes() {
    let dir = tempfile::tempdir().unwrap();
    let img = write(dir.path(), "img", &idx_images());
    let lbl = write(dir.path(), "lbl", &idx_labels(&[7, 3]));
    let set = load_idx(&img, &lbl, None, None).unwrap();
    assert_eq!(set.features().row(0).to_vec(), [0.0, 1.0, 128.0 / 255.0, 64.0 / 255.0, 10.0 / 255.0, 20.0 / 255.0]);
    assert_eq!(set.hard_labels().unwrap(), &[7, 3]);
    assert_eq!(load_idx(&img, &lbl, Some(1), None).unwrap().len(), 1);
}

#[test]
fn idx_area_downsample_matches_hand_weights() {
    let dir = tempfile::tempdir().unwrap();
    // One 3×3 image reduced to 2×2: each output pixel spans 1.5 input pixels.
    let px: [u8; 9] = [0, 30, 60, 90, 120, 150, 180, 210, 240];
    let mut b = vec![0, 0, 8, 3, 0, 0, 0, 1, 0, 0, 0, 3, 0, 0, 0, 3];
    b.extend(px);
    let img = write(dir.path(), "img", &b);
    let lbl = write(dir.path(), "lbl", &idx_labels(&[0]));
    let set = load_idx(&img, &lbl, None, Some(2)).unwrap();
    let p = |r: usize, c: usize| f64::from(px[r * 3 + c]) / 255.0;
    let top_left = (p(0, 0) + 0.5 * p(0, 1) + 0.5 * p(1, 0) + 0.25 * p(1, 1)) / 2.25;
    let bottom_right = (p(2, 2) + 0.5 * p(2, 1) + 0.5 * p(1, 2) + 0.25 * p(1, 1)) / 2.25;
    assert!((set.features()[[0, 0]] - top_left).abs() <= 1e-12);
    assert!((set.features()[[0, 3]] - bottom_right).abs() <= 1e-12);
}

#[test]
fn idx_errors() {
    let dir = tempfile::tempdir().unwrap();
    let img = write(dir.path(), "img", &idx_images());
    let mut bad = idx_images();
    bad[3] = 1;
    let bad_img = write(dir.path(), "bad", &bad);
    let lbl2 = write(dir.path(), "lbl2", &idx_labels(&[1, 2]));
    let lbl3 = write(dir.path(), "lbl3", &idx_labels(&[1, 2, 3]));
    let short = write(dir.path(), "short", &idx_images()[..20]);
    assert!(matches!(load_idx(&bad_img, &lbl2, None, None), Err(Error::BadMagic { found: 0x801, .. })));
    assert!(matches!(load_idx(&img, &lbl3, None, None), Err(Error::CountMismatch(_))));
    assert!(matches!(load_idx(&short, &lbl2, None, None), Err(Error::Truncated(_))));
}

#[test]
fn generators_are_pure_functions_of_the_scenario() {
    for kind in [GeneratorKind::GaussianClusters, GeneratorKind::TwoMoons] {
        let sc = ShiftScenario {
            kind,
            classes: if kind == GeneratorKind::TwoMoons { 2 } else { 3 },
            ..ShiftScenario::default()
        };
        assert_eq!(gen_shift(&sc).unwrap(), gen_shift(&sc).unwrap());
        let other = ShiftScenario { seed: 18, ..sc.clone() };
        assert_ne!(gen_shift(&sc).unwrap(), gen_shift(&other).unwrap());
    }
}

#[test]
fn run_config_rejects_unknown_keys_and_collects_problems() {
    assert!(matches!(parse_run_config("[scenario]\nsigmaa = 1.0\n"), Err(Error::InvalidConfig(_))));
    let text = "[scenario]\nsigma = -1.0\nclasses = 0\n[train.collab]\nbeta = 0.0\n";
    match parse_run_config(text).and_then(|c| c.validate().map(|_| c)) {
        Err(Error::InvalidConfig(p)) => assert!(p.len() >= 3, "{p:?}"),
        other => panic!("expected InvalidConfig, got {other:?}"),
    }
}

proptest! {
    #![proptest_config(common::cases(32))]

    #[test]
    fn noise_free_identity_shift_copies_source(seed in any::<u64>(), classes in 2usize..5) {
        let sc = ShiftScenario {
            classes,
            samples_per_class: 5,
            rotation: 0.0,
            sigma: 0.0,
            seed,
            ..ShiftScenario::default()
        };
        let b = gen_shift(&sc).unwrap();
        prop_assert_eq!(b.source().features(), b.target().features());
    }

    #[test]
    fn bundle_round_trips(seed in any::<u64>(), n in 1usize..20) {
        let sc = ShiftScenario { samples_per_class: n, seed, ..ShiftScenario::default() };
        let b = gen_shift(&sc).unwrap();
        prop_assert_eq!(decode_bundle(&encode_bundle(&b)).unwrap(), b);
    }
}

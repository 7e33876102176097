use std::f64::consts::PI;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::DatasetBundle;
use crate::cost::LabeledFeatureSet;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeneratorKind {
    GaussianClusters,
    TwoMoons,
}

/// A source distribution and the affine shift producing the target.
///
/// Random draws come from ChaCha8 seeded with `seed`: stream 0 feeds the
/// source noise, stream 1 the target noise. Samples are ordered by class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShiftScenario {
    pub kind: GeneratorKind,
    pub classes: usize,
    pub samples_per_class: usize,
    pub dim: usize,
    /// Rotation in the plane of the first two coordinates, radians.
    pub rotation: f64,
    /// Added after rotation and scaling; empty means zero.
    pub translation: Vec<f64>,
    pub scale: f64,
    pub sigma: f64,
    /// Distance of the Gaussian class centers from the origin.
    pub spread: f64,
    pub seed: u64,
}

impl Default for ShiftScenario {
    fn default() -> Self {
        Self {
            kind: GeneratorKind::GaussianClusters,
            classes: 3,
            samples_per_class: 200,
            dim: 2,
            rotation: 0.9,
            translation: Vec::new(),
            scale: 1.0,
            sigma: 0.6,
            spread: 3.0,
            seed: 17,
        }
    }
}

impl ShiftScenario {
    pub fn problems(&self) -> Vec<String> {
        let mut p = Vec::new();
        if self.classes == 0 {
            p.push("classes must be at least 1".into());
        }
        if self.kind == GeneratorKind::TwoMoons && self.classes != 2 {
            p.push(format!("two-moons has exactly 2 classes, got {}", self.classes));
        }
        if self.samples_per_class == 0 {
            p.push("samples_per_class must be at least 1".into());
        }
        if self.dim == 0 {
            p.push("dim must be at least 1".into());
        }
        if self.kind == GeneratorKind::TwoMoons && self.dim < 2 {
            p.push("two-moons needs dim >= 2".into());
        }
        if self.rotation != 0.0 && self.dim < 2 {
            p.push("rotation needs dim >= 2".into());
        }
        if !self.translation.is_empty() && self.translation.len() != self.dim {
            p.push(format!(
                "translation has {} entries for dim {}",
                self.translation.len(),
                self.dim
            ));
        }
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            p.push(format!("sigma must be non-negative, got {}", self.sigma));
        }
        for (name, v) in [("rotation", self.rotation), ("scale", self.scale), ("spread", self.spread)] {
            if !v.is_finite() {
                p.push(format!("{name} must be finite"));
            }
        }
        if self.translation.iter().any(|v| !v.is_finite()) {
            p.push("translation must be finite".into());
        }
        p
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.problems();
        if p.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(p))
        }
    }

    /// Applies scale, rotation and translation to one point in place.
    fn shift(&self, x: &mut [f64]) {
        x.iter_mut().for_each(|v| *v *= self.scale);
        if x.len() >= 2 && self.rotation != 0.0 {
            let (s, c) = self.rotation.sin_cos();
            let (a, b) = (x[0], x[1]);
            x[0] = c * a - s * b;
            x[1] = s * a + c * b;
        }
        for (v, t) in x.iter_mut().zip(&self.translation) {
            *v += t;
        }
    }
}

fn build(scenario: &ShiftScenario, mean: impl Fn(usize, usize) -> Vec<f64>) -> Result<DatasetBundle> {
    scenario.validate()?;
    let (k, per, d) = (scenario.classes, scenario.samples_per_class, scenario.dim);
    let n = k * per;
    let mut src_rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let mut tgt_rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    tgt_rng.set_stream(1);
    let mut xs = Array2::zeros((n, d));
    let mut xt = Array2::zeros((n, d));
    let mut labels = Vec::with_capacity(n);
    for class in 0..k {
        for i in 0..per {
            let row = class * per + i;
            let base = mean(class, i);
            for (c, &b) in base.iter().enumerate() {
                let e: f64 = StandardNormal.sample(&mut src_rng);
                xs[[row, c]] = b + scenario.sigma * e;
            }
            let mut moved = base;
            scenario.shift(&mut moved);
            for (c, &b) in moved.iter().enumerate() {
                let e: f64 = StandardNormal.sample(&mut tgt_rng);
                xt[[row, c]] = b + scenario.sigma * e;
            }
            labels.push(class);
        }
    }
    let source = LabeledFeatureSet::new(xs)?.with_hard_labels(labels.clone(), k)?;
    let target = LabeledFeatureSet::new(xt)?;
    DatasetBundle::new(source, target, Some(labels))
}

/// Gaussian classes centred evenly on a circle of radius `spread` in the
/// first two coordinates (on a line for `dim = 1`); the target draws from
/// the shifted centres.
pub fn gen_gaussian_shift(scenario: &ShiftScenario) -> Result<DatasetBundle> {
    if scenario.kind != GeneratorKind::GaussianClusters {
        return Err(Error::InvalidParameter("scenario kind is not gaussian-clusters".into()));
    }
    let (k, d, r) = (scenario.classes, scenario.dim, scenario.spread);
    build(scenario, |class, _| {
        let mut c = vec![0.0; d];
        if d >= 2 {
            let t = 2.0 * PI * class as f64 / k as f64;
            c[0] = r * t.cos();
            c[1] = r * t.sin();
        } else {
            c[0] = r * class as f64;
        }
        c
    })
}

/// Two interleaved half circles; point `i` of a class sits at angle
/// `π·i/(n−1)` along its arc.
pub fn gen_two_moons_shift(scenario: &ShiftScenario) -> Result<DatasetBundle> {
    if scenario.kind != GeneratorKind::TwoMoons {
        return Err(Error::InvalidParameter("scenario kind is not two-moons".into()));
    }
    let (per, d) = (scenario.samples_per_class, scenario.dim);
    build(scenario, |class, i| {
        let t = if per > 1 { PI * i as f64 / (per - 1) as f64 } else { 0.0 };
        let mut c = vec![0.0; d];
        if class == 0 {
            c[0] = t.cos();
            c[1] = t.sin();
        } else {
            c[0] = 1.0 - t.cos();
            c[1] = 0.5 - t.sin();
        }
        c
    })
}

/// Dispatches on `scenario.kind`.
pub fn gen_shift(scenario: &ShiftScenario) -> Result<DatasetBundle> {
    match scenario.kind {
        GeneratorKind::GaussianClusters => gen_gaussian_shift(scenario),
        GeneratorKind::TwoMoons => gen_two_moons_shift(scenario),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_shift_without_noise() {
        let s = ShiftScenario { rotation: 0.0, sigma: 0.0, ..Default::default() };
        let b = gen_gaussian_shift(&s).unwrap();
        assert_eq!(b.source().features(), b.target().features());
    }

    #[test]
    fn two_moons_half_turn_reflects_points() {
        let s = ShiftScenario {
            kind: GeneratorKind::TwoMoons,
            classes: 2,
            samples_per_class: 9,
            rotation: PI,
            sigma: 0.0,
            ..Default::default()
        };
        let b = gen_two_moons_shift(&s).unwrap();
        let diff = &b.source().features() + &b.target().features();
        assert!(diff.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn problems_are_listed_together() {
        let s = ShiftScenario {
            kind: GeneratorKind::TwoMoons,
            classes: 3,
            samples_per_class: 0,
            sigma: -1.0,
            ..Default::default()
        };
        assert_eq!(s.problems().len(), 3);
    }
}

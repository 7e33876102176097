use ndarray::{Array1, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use super::{Dense, LinearClassifier, MlpEmbedding, Tape};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SgdConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
}

impl Default for SgdConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            momentum: 0.9,
            batch_size: 128,
        }
    }
}

impl SgdConfig {
    pub fn problems(&self) -> Vec<String> {
        let mut p = Vec::new();
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            p.push(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            p.push(format!("momentum must lie in [0,1), got {}", self.momentum));
        }
        if self.batch_size == 0 {
            p.push("batch_size must be positive".into());
        }
        p
    }
}

/// Parameter gradients for an embedding + classifier pair, laid out like the
/// parameters themselves.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub embedding: Vec<Dense>,
    pub classifier: LinearClassifier,
}

impl Gradients {
    pub fn zeros_like(model: &MlpEmbedding, clf: &LinearClassifier) -> Self {
        Self {
            embedding: model
                .layers
                .iter()
                .map(|l| Dense::zeros(l.weights.nrows(), l.weights.ncols()))
                .collect(),
            classifier: LinearClassifier::zeros(clf.latent_dim(), clf.classes()),
        }
    }

    /// Backpropagates gradients on the logits and (additionally) on the
    /// latent codes of one forward pass.
    pub fn compute(
        model: &MlpEmbedding,
        clf: &LinearClassifier,
        tape: &Tape,
        latent: ArrayView2<f64>,
        grad_logits: ArrayView2<f64>,
        grad_latent: ArrayView2<f64>,
    ) -> Result<Self> {
        let (dw, db, dx) = clf.backward(latent, grad_logits);
        let total_latent = &dx + &grad_latent;
        let embedding = model.backward(tape, total_latent.view())?;
        Ok(Self {
            embedding,
            classifier: LinearClassifier {
                weights: dw,
                bias: db,
            },
        })
    }

    pub fn accumulate(&mut self, other: &Gradients) {
        for (a, b) in self.embedding.iter_mut().zip(&other.embedding) {
            a.weights += &b.weights;
            a.bias += &b.bias;
        }
        self.classifier.weights += &other.classifier.weights;
        self.classifier.bias += &other.classifier.bias;
    }

    pub fn all_finite(&self) -> bool {
        self.embedding
            .iter()
            .all(|l| l.weights.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
            && self.classifier.all_finite()
    }

    /// Flat view in the order embedding layers (weights, bias) then classifier.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in &self.embedding {
            out.extend(l.weights.iter());
            out.extend(l.bias.iter());
        }
        out.extend(self.classifier.weights.iter());
        out.extend(self.classifier.bias.iter());
        out
    }
}

/// SGD with classic momentum: `v ← m·v − lr·g; p ← p + v`.
#[derive(Debug, Clone)]
pub struct Sgd {
    pub config: SgdConfig,
    velocity: Option<Gradients>,
}

fn step_array2(p: &mut Array2<f64>, v: &mut Array2<f64>, g: &Array2<f64>, lr: f64, m: f64) {
    ndarray::Zip::from(p).and(v).and(g).for_each(|p, v, &g| {
        *v = m * *v - lr * g;
        *p += *v;
    });
}

fn step_array1(p: &mut Array1<f64>, v: &mut Array1<f64>, g: &Array1<f64>, lr: f64, m: f64) {
    ndarray::Zip::from(p).and(v).and(g).for_each(|p, v, &g| {
        *v = m * *v - lr * g;
        *p += *v;
    });
}

impl Sgd {
    pub fn new(config: SgdConfig) -> Self {
        Self {
            config,
            velocity: None,
        }
    }

    /// Applies one update. A non-finite gradient leaves every parameter untouched.
    pub fn step(
        &mut self,
        model: &mut MlpEmbedding,
        clf: &mut LinearClassifier,
        grads: &Gradients,
    ) -> Result<()> {
        if !grads.all_finite() {
            return Err(Error::NonFinite("gradient; SGD step aborted".into()));
        }
        if grads.embedding.len() != model.layers.len() {
            return Err(Error::DimensionMismatch("gradient layer count".into()));
        }
        let velocity = self
            .velocity
            .get_or_insert_with(|| Gradients::zeros_like(model, clf));
        let (lr, m) = (self.config.learning_rate, self.config.momentum);
        for ((p, v), g) in model
            .layers
            .iter_mut()
            .zip(velocity.embedding.iter_mut())
            .zip(&grads.embedding)
        {
            step_array2(&mut p.weights, &mut v.weights, &g.weights, lr, m);
            step_array1(&mut p.bias, &mut v.bias, &g.bias, lr, m);
        }
        step_array2(
            &mut clf.weights,
            &mut velocity.classifier.weights,
            &grads.classifier.weights,
            lr,
            m,
        );
        step_array1(
            &mut clf.bias,
            &mut velocity.classifier.bias,
            &grads.classifier.bias,
            lr,
            m,
        );
        if !model.all_finite() || !clf.all_finite() {
            return Err(Error::NonFinite("parameters after SGD step".into()));
        }
        Ok(())
    }
}

/// Backpropagates one forward pass and applies an SGD step.
pub fn backward_and_step(
    model: &mut MlpEmbedding,
    clf: &mut LinearClassifier,
    tape: &Tape,
    latent: ArrayView2<f64>,
    grad_logits: ArrayView2<f64>,
    grad_latent: ArrayView2<f64>,
    optimizer: &mut Sgd,
) -> Result<Gradients> {
    let grads = Gradients::compute(model, clf, tape, latent, grad_logits, grad_latent)?;
    optimizer.step(model, clf, &grads)?;
    Ok(grads)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup() -> (MlpEmbedding, LinearClassifier, Array2<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = MlpEmbedding::new(&[2, 3], &mut rng).unwrap();
        let c = LinearClassifier::new(3, 2, &mut rng);
        (m, c, array![[0.3, -0.7], [1.2, 0.4]])
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let (mut m, mut c, _) = setup();
        let (m0, c0) = (m.clone(), c.clone());
        let g = Gradients::zeros_like(&m, &c);
        Sgd::new(SgdConfig::default()).step(&mut m, &mut c, &g).unwrap();
        assert_eq!(m, m0);
        assert_eq!(c, c0);
    }

    #[test]
    fn plain_step_without_momentum() {
        let (mut m, mut c, x) = setup();
        let (m0, c0) = (m.clone(), c.clone());
        let (z, tape) = m.forward(x.view()).unwrap();
        let gl = Array2::from_elem((2, 2), 0.5);
        let gz = Array2::from_elem((2, 3), -0.25);
        let cfg = SgdConfig { learning_rate: 0.1, momentum: 0.0, batch_size: 2 };
        let mut opt = Sgd::new(cfg);
        let g = backward_and_step(&mut m, &mut c, &tape, z.view(), gl.view(), gz.view(), &mut opt).unwrap();
        for (p, (p0, gg)) in m.layers[0].weights.iter().zip(m0.layers[0].weights.iter().zip(g.embedding[0].weights.iter())) {
            assert_eq!(*p, p0 - 0.1 * gg);
        }
        for (p, (p0, gg)) in c.bias.iter().zip(c0.bias.iter().zip(g.classifier.bias.iter())) {
            assert_eq!(*p, p0 - 0.1 * gg);
        }
    }

    #[test]
    fn momentum_accumulates() {
        let (mut m, mut c, _) = setup();
        let mut g = Gradients::zeros_like(&m, &c);
        g.classifier.bias[0] = 1.0;
        let b0 = c.bias[0];
        let mut opt = Sgd::new(SgdConfig { learning_rate: 0.1, momentum: 0.5, batch_size: 1 });
        opt.step(&mut m, &mut c, &g).unwrap();
        opt.step(&mut m, &mut c, &g).unwrap();
        // v1 = -0.1, v2 = 0.5·(-0.1) - 0.1 = -0.15
        assert!((c.bias[0] - (b0 - 0.25)).abs() < 1e-15);
    }

    #[test]
    fn non_finite_gradient_aborts() {
        let (mut m, mut c, _) = setup();
        let (m0, c0) = (m.clone(), c.clone());
        let mut g = Gradients::zeros_like(&m, &c);
        g.embedding[0].weights[[0, 0]] = f64::NAN;
        let err = Sgd::new(SgdConfig::default()).step(&mut m, &mut c, &g).unwrap_err();
        assert!(matches!(err, Error::NonFinite(_)));
        assert_eq!(m, m0);
        assert_eq!(c, c0);
    }

    #[test]
    fn config_validation() {
        let bad = SgdConfig { learning_rate: 0.0, momentum: 1.0, batch_size: 0 };
        assert_eq!(bad.problems().len(), 3);
        assert!(SgdConfig::default().problems().is_empty());
    }
}

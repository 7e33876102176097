use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::glorot_bound;
use crate::linalg::{matmul, matmul_nt, matmul_tn};
use crate::{Error, Result};

/// Negative-side slope of the leaky ReLU.
pub const LEAKY_SLOPE: f64 = 0.01;

/// Fully connected layer `y = x·W + b` with `W: in×out`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self {
            weights: Array2::zeros((fan_in, fan_out)),
            bias: Array1::zeros(fan_out),
        }
    }

    pub fn glorot<R: Rng + ?Sized>(fan_in: usize, fan_out: usize, rng: &mut R) -> Self {
        let bound = glorot_bound(fan_in, fan_out);
        Self {
            weights: Array2::from_shape_simple_fn((fan_in, fan_out), || {
                rng.gen_range(-bound..=bound)
            }),
            bias: Array1::zeros(fan_out),
        }
    }

    fn forward(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut z = matmul(x, self.weights.view());
        for mut row in z.outer_iter_mut() {
            row += &self.bias;
        }
        z
    }
}

/// MLP embedding with a leaky-ReLU after every layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpEmbedding {
    pub layers: Vec<Dense>,
}

/// Activations recorded by a forward pass.
#[derive(Debug, Clone)]
pub struct Tape {
    /// Input to each layer.
    pub inputs: Vec<Array2<f64>>,
    /// Pre-activation output of each layer.
    pub pre_activations: Vec<Array2<f64>>,
}

fn leaky(z: f64) -> f64 {
    if z > 0.0 {
        z
    } else {
        LEAKY_SLOPE * z
    }
}

fn leaky_grad(z: f64) -> f64 {
    if z > 0.0 {
        1.0
    } else {
        LEAKY_SLOPE
    }
}

impl MlpEmbedding {
    /// `widths = [input, hidden…, latent]`, Glorot-uniform weights, zero biases.
    pub fn new<R: Rng + ?Sized>(widths: &[usize], rng: &mut R) -> Result<Self> {
        if widths.len() < 2 || widths.contains(&0) {
            return Err(Error::InvalidParameter(format!(
                "embedding widths must list at least input and latent sizes, all positive: {widths:?}"
            )));
        }
        Ok(Self {
            layers: widths
                .windows(2)
                .map(|w| Dense::glorot(w[0], w[1], rng))
                .collect(),
        })
    }

    pub fn from_layers(layers: Vec<Dense>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidParameter("embedding needs at least one layer".into()));
        }
        for (k, pair) in layers.windows(2).enumerate() {
            if pair[0].weights.ncols() != pair[1].weights.nrows() {
                return Err(Error::DimensionMismatch(format!(
                    "layer {k} outputs {} but layer {} expects {}",
                    pair[0].weights.ncols(),
                    k + 1,
                    pair[1].weights.nrows()
                )));
            }
        }
        for (k, l) in layers.iter().enumerate() {
            if l.bias.len() != l.weights.ncols() {
                return Err(Error::DimensionMismatch(format!("layer {k} bias length")));
            }
        }
        Ok(Self { layers })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weights.nrows()
    }

    pub fn latent_dim(&self) -> usize {
        self.layers.last().map(|l| l.weights.ncols()).unwrap_or(0)
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    pub fn all_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }

    pub fn forward(&self, batch: ArrayView2<f64>) -> Result<(Array2<f64>, Tape)> {
        if batch.ncols() != self.input_dim() {
            return Err(Error::DimensionMismatch(format!(
                "batch has {} features, embedding expects {}",
                batch.ncols(),
                self.input_dim()
            )));
        }
        if batch.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("embedding input".into()));
        }
        let mut tape = Tape {
            inputs: Vec::with_capacity(self.layers.len()),
            pre_activations: Vec::with_capacity(self.layers.len()),
        };
        let mut x = batch.to_owned();
        for layer in &self.layers {
            let z = layer.forward(x.view());
            let a = z.mapv(leaky);
            tape.inputs.push(x);
            tape.pre_activations.push(z);
            x = a;
        }
        Ok((x, tape))
    }

    /// Parameter gradients for an upstream gradient on the latent output.
    pub fn backward(&self, tape: &Tape, grad_latent: ArrayView2<f64>) -> Result<Vec<Dense>> {
        if tape.inputs.len() != self.layers.len() {
            return Err(Error::DimensionMismatch("tape does not match this embedding".into()));
        }
        let out = tape.pre_activations.last().expect("non-empty tape");
        if out.dim() != grad_latent.dim() {
            return Err(Error::DimensionMismatch(format!(
                "latent gradient is {:?}, forward output was {:?}",
                grad_latent.dim(),
                out.dim()
            )));
        }
        let mut grads: Vec<Dense> = Vec::with_capacity(self.layers.len());
        let mut upstream = grad_latent.to_owned();
        for (k, layer) in self.layers.iter().enumerate().rev() {
            let z = &tape.pre_activations[k];
            let dz = ndarray::Zip::from(&upstream).and(z).map_collect(|g, &zv| g * leaky_grad(zv));
            let dw = matmul_tn(tape.inputs[k].view(), dz.view());
            let db = dz.sum_axis(Axis(0));
            if k > 0 {
                upstream = matmul_nt(dz.view(), layer.weights.view());
            }
            grads.push(Dense {
                weights: dw,
                bias: db,
            });
        }
        grads.reverse();
        Ok(grads)
    }
}

/// Forward pass returning latent codes and the activation tape.
pub fn embed_forward(model: &MlpEmbedding, batch: ArrayView2<f64>) -> Result<(Array2<f64>, Tape)> {
    model.forward(batch)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_model_gives_zero_latent() {
        let m = MlpEmbedding::from_layers(vec![Dense::zeros(3, 4), Dense::zeros(4, 2)]).unwrap();
        let (z, _) = m.forward(array![[1.0, -2.0, 3.0]].view()).unwrap();
        assert_eq!(z, Array2::<f64>::zeros((1, 2)));
    }

    #[test]
    fn identity_layer_in_positive_region() {
        let layer = Dense {
            weights: Array2::eye(3),
            bias: Array1::zeros(3),
        };
        let m = MlpEmbedding::from_layers(vec![layer]).unwrap();
        let x = array![[0.5, 1.0, 2.0], [3.0, 0.1, 0.2]];
        let (z, _) = m.forward(x.view()).unwrap();
        assert_eq!(z, x);
    }

    #[test]
    fn forward_matches_per_neuron_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = MlpEmbedding::new(&[4, 5, 3], &mut rng).unwrap();
        let x = Array2::from_shape_simple_fn((6, 4), || rng.gen_range(-1.0..1.0));
        let (z, _) = m.forward(x.view()).unwrap();
        for b in 0..6 {
            let mut act: Vec<f64> = x.row(b).to_vec();
            for layer in &m.layers {
                let mut next = vec![0.0; layer.weights.ncols()];
                for (o, n) in next.iter_mut().enumerate() {
                    let mut s = layer.bias[o];
                    for (i, a) in act.iter().enumerate() {
                        s += a * layer.weights[[i, o]];
                    }
                    *n = if s > 0.0 { s } else { 0.01 * s };
                }
                act = next;
            }
            for (o, a) in act.iter().enumerate() {
                assert!((z[[b, o]] - a).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let m = MlpEmbedding::new(&[2, 3], &mut rng).unwrap();
        assert!(matches!(
            m.forward(array![[f64::NAN, 0.0]].view()),
            Err(Error::NonFinite(_))
        ));
        assert!(m.forward(array![[0.0, 0.0, 0.0]].view()).is_err());
        assert!(MlpEmbedding::new(&[2], &mut rng).is_err());
        assert_eq!(m.parameter_count(), 9);
    }

    #[test]
    fn glorot_bounds_respected() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = MlpEmbedding::new(&[10, 20], &mut rng).unwrap();
        let b = glorot_bound(10, 20);
        assert!(m.layers[0].weights.iter().all(|w| w.abs() <= b));
        assert!(m.layers[0].bias.iter().all(|&v| v == 0.0));
    }
}

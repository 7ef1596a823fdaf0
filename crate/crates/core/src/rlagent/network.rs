//! Small fully connected Q-network with ReLU hidden layers and a linear head,
//! trained by hand-written backpropagation.
//!
//! Parameters live in one flat vector, layer by layer: a row-major
//! `out x in` weight block followed by `out` biases.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const LAYER_SIZES: [usize; 4] = [super::encoding::INPUT_SIZE, 32, 32, 3];

#[derive(Debug, Error, PartialEq)]
pub enum ShapeError {
    #[error("expected {expected} values, got {got}")]
    Length { expected: usize, got: usize },
    #[error("layer sizes {0:?} do not describe a network")]
    Layers(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    params: Vec<f64>,
}

/// Per-layer view used for checkpoints: `weights[out][in]` and `bias[out]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[1] * (w[0] + 1)).sum()
}

impl Mlp {
    pub fn zeros(sizes: &[usize]) -> Result<Self, ShapeError> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(ShapeError::Layers(sizes.to_vec()));
        }
        Ok(Self {
            sizes: sizes.to_vec(),
            params: vec![0.0; param_count(sizes)],
        })
    }

    /// Glorot-uniform weights, zero biases.
    pub fn glorot<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Result<Self, ShapeError> {
        let mut net = Self::zeros(sizes)?;
        let mut offset = 0;
        for w in sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for p in &mut net.params[offset..offset + fan_in * fan_out] {
                *p = rng.random_range(-limit..limit);
            }
            offset += fan_out * (fan_in + 1);
        }
        Ok(net)
    }

    pub fn from_params(sizes: &[usize], params: Vec<f64>) -> Result<Self, ShapeError> {
        let net = Self::zeros(sizes)?;
        if params.len() != net.params.len() {
            return Err(ShapeError::Length {
                expected: net.params.len(),
                got: params.len(),
            });
        }
        Ok(Self {
            sizes: net.sizes,
            params,
        })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn num_outputs(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    fn layer_offsets(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        let mut offset = 0;
        self.sizes.windows(2).map(move |w| {
            let start = offset;
            offset += w[1] * (w[0] + 1);
            (start, w[0], w[1])
        })
    }

    /// Pre-activations of every layer for input `x`.
    fn forward_all(&self, x: &[f64]) -> Vec<Vec<f64>> {
        debug_assert_eq!(x.len(), self.sizes[0]);
        let last = self.sizes.len() - 2;
        let mut pre = Vec::with_capacity(self.sizes.len() - 1);
        let mut input: Vec<f64> = x.to_vec();
        for (l, (offset, n_in, n_out)) in self.layer_offsets().enumerate() {
            let w = &self.params[offset..offset + n_in * n_out];
            let b = &self.params[offset + n_in * n_out..offset + n_out * (n_in + 1)];
            let z: Vec<f64> = (0..n_out)
                .map(|o| {
                    let row = &w[o * n_in..(o + 1) * n_in];
                    b[o] + row.iter().zip(&input).map(|(a, b)| a * b).sum::<f64>()
                })
                .collect();
            input = if l == last {
                z.clone()
            } else {
                z.iter().map(|v| v.max(0.0)).collect()
            };
            pre.push(z);
        }
        pre
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.forward_all(x).pop().unwrap()
    }

    /// Adds `scale * d/dθ (y - Q(x, action))²` into `grads` and returns the
    /// unscaled squared error. Outputs other than `action` do not contribute.
    pub fn accumulate_gradient(
        &self,
        x: &[f64],
        action: usize,
        target: f64,
        scale: f64,
        grads: &mut [f64],
    ) -> f64 {
        let pre = self.forward_all(x);
        let layers: Vec<_> = self.layer_offsets().collect();
        let q = pre.last().unwrap()[action];
        let err = target - q;

        // dL/dz for the output layer
        let mut delta = vec![0.0; self.num_outputs()];
        delta[action] = -2.0 * err * scale;

        for l in (0..layers.len()).rev() {
            let (offset, n_in, n_out) = layers[l];
            let input: Vec<f64> = if l == 0 {
                x.to_vec()
            } else {
                pre[l - 1].iter().map(|v| v.max(0.0)).collect()
            };
            let bias_at = offset + n_in * n_out;
            for o in 0..n_out {
                if delta[o] == 0.0 {
                    continue;
                }
                let row = &mut grads[offset + o * n_in..offset + (o + 1) * n_in];
                for (g, a) in row.iter_mut().zip(&input) {
                    *g += delta[o] * a;
                }
                grads[bias_at + o] += delta[o];
            }
            if l == 0 {
                break;
            }
            let w = &self.params[offset..bias_at];
            delta = (0..n_in)
                .map(|i| {
                    if pre[l - 1][i] <= 0.0 {
                        return 0.0;
                    }
                    (0..n_out).map(|o| w[o * n_in + i] * delta[o]).sum()
                })
                .collect();
        }
        err * err
    }

    /// Gradient of the squared error at a single sample.
    pub fn gradient(&self, x: &[f64], action: usize, target: f64) -> Vec<f64> {
        let mut grads = vec![0.0; self.params.len()];
        self.accumulate_gradient(x, action, target, 1.0, &mut grads);
        grads
    }

    pub fn layers(&self) -> Vec<LayerParams> {
        self.layer_offsets()
            .map(|(offset, n_in, n_out)| LayerParams {
                weights: (0..n_out)
                    .map(|o| self.params[offset + o * n_in..offset + (o + 1) * n_in].to_vec())
                    .collect(),
                bias: self.params[offset + n_in * n_out..offset + n_out * (n_in + 1)].to_vec(),
            })
            .collect()
    }

    pub fn from_layers(sizes: &[usize], layers: &[LayerParams]) -> Result<Self, ShapeError> {
        let mut params = Vec::with_capacity(param_count(sizes));
        if layers.len() + 1 != sizes.len() {
            return Err(ShapeError::Length {
                expected: sizes.len().saturating_sub(1),
                got: layers.len(),
            });
        }
        for (layer, w) in layers.iter().zip(sizes.windows(2)) {
            if layer.weights.len() != w[1] || layer.bias.len() != w[1] {
                return Err(ShapeError::Length {
                    expected: w[1],
                    got: layer.weights.len(),
                });
            }
            for row in &layer.weights {
                if row.len() != w[0] {
                    return Err(ShapeError::Length {
                        expected: w[0],
                        got: row.len(),
                    });
                }
                params.extend_from_slice(row);
            }
            params.extend_from_slice(&layer.bias);
        }
        Self::from_params(sizes, params)
    }
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_net_outputs_zero() {
        let net = Mlp::zeros(&LAYER_SIZES).unwrap();
        assert_eq!(net.forward(&[1.0; 25]), vec![0.0; 3]);
        assert_eq!(net.params().len(), 25 * 32 + 32 + 32 * 32 + 32 + 32 * 3 + 3);
    }

    #[test]
    fn hand_built_net() {
        // 1 -> 1 -> 1: q = w2 * relu(w1 * x + b1) + b2
        let net = Mlp::from_params(&[1, 1, 1], vec![2.0, -1.0, 3.0, 0.5]).unwrap();
        assert_eq!(net.forward(&[2.0]), vec![3.0 * 3.0 + 0.5]);
        assert_eq!(net.forward(&[0.25]), vec![0.5]); // hidden unit clipped
                                                     // gradient of (y - q)^2 with y = 0 at x = 2: dq = -2 * (0 - 9.5) = 19
        let g = net.gradient(&[2.0], 0, 0.0);
        assert_eq!(g, vec![19.0 * 3.0 * 2.0, 19.0 * 3.0, 19.0 * 3.0, 19.0]);
    }

    #[test]
    fn output_layer_is_linear() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = Mlp::glorot(&LAYER_SIZES, &mut rng).unwrap();
        let x: Vec<f64> = (0..25).map(|i| (i % 2) as f64).collect();
        let base = net.forward(&x);
        let mut scaled = net.clone();
        let head = scaled.params().len() - (32 * 3 + 3);
        for p in &mut scaled.params_mut()[head..head + 96] {
            *p *= 2.5;
        }
        for (a, b) in scaled.forward(&x).iter().zip(&base) {
            assert!((a - 2.5 * b).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_error_zero_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let net = Mlp::glorot(&LAYER_SIZES, &mut rng).unwrap();
        let x = [1.0; 25];
        let q = net.forward(&x)[1];
        assert!(net.gradient(&x, 1, q).iter().all(|&g| g == 0.0));
    }

    #[test]
    fn dead_unit_passes_no_gradient() {
        // hidden unit 1 has a large negative bias and is always off
        let mut net = Mlp::zeros(&[2, 2, 1]).unwrap();
        net.params_mut()
            .copy_from_slice(&[1.0, 1.0, 1.0, 1.0, 0.0, -10.0, 1.0, 1.0, 0.0]);
        let g = net.gradient(&[1.0, 1.0], 0, 10.0);
        // weights and bias feeding unit 1, and head weight from it
        assert_eq!(&g[2..4], &[0.0, 0.0]);
        assert_eq!(g[5], 0.0);
        assert_eq!(g[7], 0.0);
        assert!(g[0] != 0.0);
    }

    #[test]
    fn layer_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = Mlp::glorot(&LAYER_SIZES, &mut rng).unwrap();
        let back = Mlp::from_layers(&LAYER_SIZES, &net.layers()).unwrap();
        assert_eq!(back, net);
        assert!(Mlp::from_layers(&[25, 32, 3], &net.layers()).is_err());
    }

    #[test]
    fn argmax_ties_low() {
        assert_eq!(argmax(&[1.0, 3.0, 2.0]), 1);
        assert_eq!(argmax(&[2.0, 2.0, 0.0]), 0);
    }
}

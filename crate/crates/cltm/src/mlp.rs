//! A small from-scratch feed-forward network producing one node potential
//! per tree node.
//!
//! Layout: 1 to 3 affine layers with a rectifier between hidden layers and a
//! linear output. Dropout (inverted: survivors scaled by `1/(1-p)`) applies
//! to hidden activations in train mode only; the mask drawn in the forward
//! pass is cached so the backward pass reuses it.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

/// One affine layer `W x + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    /// `out_dim x in_dim`.
    pub weights: DMatrix<f64>,
    pub bias: DVector<f64>,
}

impl DenseLayer {
    pub fn in_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.nrows()
    }
}

/// Parameters of the potential network.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParameters {
    pub layers: Vec<DenseLayer>,
    pub dropout_rate: f64,
}

/// Cached per-layer state from a forward pass, consumed by `backward`.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    input: DVector<f64>,
    /// Pre-activation values per layer.
    pre: Vec<DVector<f64>>,
    /// Post-activation (and post-dropout) values per hidden layer.
    hidden: Vec<DVector<f64>>,
    /// Dropout scale applied to each hidden unit (0 or 1/(1-p)).
    masks: Vec<DVector<f64>>,
}

/// Gradients aligned with [`MlpParameters::layers`].
#[derive(Debug, Clone)]
pub struct MlpGradients {
    pub weights: Vec<DMatrix<f64>>,
    pub bias: Vec<DVector<f64>>,
}

impl MlpGradients {
    pub fn zeros(params: &MlpParameters) -> Self {
        MlpGradients {
            weights: params
                .layers
                .iter()
                .map(|l| DMatrix::zeros(l.out_dim(), l.in_dim()))
                .collect(),
            bias: params.layers.iter().map(|l| DVector::zeros(l.out_dim())).collect(),
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for w in &mut self.weights {
            *w *= factor;
        }
        for b in &mut self.bias {
            *b *= factor;
        }
    }

    pub fn add(&mut self, other: &MlpGradients) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            *a += b;
        }
        for (a, b) in self.bias.iter_mut().zip(&other.bias) {
            *a += b;
        }
    }
}

/// Forward mode: training applies the dropout mask drawn from the supplied
/// RNG; evaluation applies none.
pub enum ForwardMode<'r, R: Rng> {
    Train(&'r mut R),
    Eval,
}

impl MlpParameters {
    /// Glorot-uniform initialization: weights in
    /// `±sqrt(6 / (fan_in + fan_out))`, biases zero.
    pub fn init<R: Rng>(dims: &[usize], dropout_rate: f64, rng: &mut R) -> Result<Self> {
        if dims.len() < 2 || dims.len() > 4 {
            return Err(Error::InvalidInput(
                "network must have 1 to 3 layers (2 to 4 dims)".into(),
            ));
        }
        if !(0.0..1.0).contains(&dropout_rate) {
            return Err(Error::InvalidInput("dropout rate must be in [0, 1)".into()));
        }
        let mut layers = Vec::with_capacity(dims.len() - 1);
        for w in dims.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            if fan_in == 0 || fan_out == 0 {
                return Err(Error::InvalidInput("zero-width layer".into()));
            }
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let weights =
                DMatrix::from_fn(fan_out, fan_in, |_, _| rng.random_range(-bound..bound));
            layers.push(DenseLayer {
                weights,
                bias: DVector::zeros(fan_out),
            });
        }
        Ok(MlpParameters {
            layers,
            dropout_rate,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().out_dim()
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.out_dim() * (l.in_dim() + 1))
            .sum()
    }

    fn validate_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::InvalidInput(format!(
                "input has {} dims, network expects {}",
                x.len(),
                self.input_dim()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite network input".into()));
        }
        Ok(())
    }

    /// Forward pass; returns the output potentials and the cache needed for
    /// backprop.
    pub fn forward<R: Rng>(&self, x: &[f64], mode: ForwardMode<'_, R>) -> Result<(Vec<f64>, ForwardCache)> {
        self.validate_input(x)?;
        let input = DVector::from_column_slice(x);
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut hidden = Vec::with_capacity(self.layers.len().saturating_sub(1));
        let mut masks = Vec::with_capacity(self.layers.len().saturating_sub(1));
        let mut rng = match mode {
            ForwardMode::Train(r) => Some(r),
            ForwardMode::Eval => None,
        };

        let mut current = input.clone();
        for (idx, layer) in self.layers.iter().enumerate() {
            let z = &layer.weights * &current + &layer.bias;
            pre.push(z.clone());
            if idx + 1 == self.layers.len() {
                current = z;
            } else {
                let mut a = z.map(|v| v.max(0.0));
                let mask = match rng.as_deref_mut() {
                    Some(r) if self.dropout_rate > 0.0 => {
                        let keep = 1.0 - self.dropout_rate;
                        DVector::from_fn(a.len(), |_, _| {
                            if r.random::<f64>() < keep {
                                1.0 / keep
                            } else {
                                0.0
                            }
                        })
                    }
                    _ => DVector::from_element(a.len(), 1.0),
                };
                a.component_mul_assign(&mask);
                masks.push(mask);
                hidden.push(a.clone());
                current = a;
            }
        }
        Ok((
            current.iter().copied().collect(),
            ForwardCache {
                input,
                pre,
                hidden,
                masks,
            },
        ))
    }

    /// Backpropagate a gradient with respect to the outputs through the
    /// cached forward pass (same dropout masks).
    pub fn backward(&self, cache: &ForwardCache, d_output: &[f64]) -> Result<MlpGradients> {
        if d_output.len() != self.output_dim() {
            return Err(Error::InvalidInput("output gradient length mismatch".into()));
        }
        let mut grads = MlpGradients::zeros(self);
        let mut delta = DVector::from_column_slice(d_output);
        for idx in (0..self.layers.len()).rev() {
            let layer_input = if idx == 0 {
                &cache.input
            } else {
                &cache.hidden[idx - 1]
            };
            grads.weights[idx] = &delta * layer_input.transpose();
            grads.bias[idx] = delta.clone();
            if idx > 0 {
                let mut upstream = self.layers[idx].weights.transpose() * &delta;
                // Through dropout, then through the rectifier.
                upstream.component_mul_assign(&cache.masks[idx - 1]);
                let relu_gate = cache.pre[idx - 1].map(|v| if v > 0.0 { 1.0 } else { 0.0 });
                upstream.component_mul_assign(&relu_gate);
                delta = upstream;
            }
        }
        Ok(grads)
    }

    /// SGD step: `theta -= lr * grad`.
    pub fn apply_gradients(&mut self, grads: &MlpGradients, lr: f64) {
        for (layer, (gw, gb)) in self
            .layers
            .iter_mut()
            .zip(grads.weights.iter().zip(&grads.bias))
        {
            layer.weights -= gw * lr;
            layer.bias -= gb * lr;
        }
    }
}

/// Convenience eval-mode forward that drops the cache.
pub fn eval_forward(params: &MlpParameters, x: &[f64]) -> Result<Vec<f64>> {
    let (out, _) = params.forward::<rand_chacha::ChaCha8Rng>(x, ForwardMode::Eval)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use approx::assert_abs_diff_eq;

    fn identity_params(d: usize) -> MlpParameters {
        MlpParameters {
            layers: vec![DenseLayer {
                weights: DMatrix::identity(d, d),
                bias: DVector::zeros(d),
            }],
            dropout_rate: 0.0,
        }
    }

    #[test]
    fn one_layer_identity() {
        let p = identity_params(3);
        let out = eval_forward(&p, &[1.0, -2.0, 0.5]).unwrap();
        assert_eq!(out, vec![1.0, -2.0, 0.5]);
    }

    #[test]
    fn zero_params_give_zero_potentials() {
        let mut rng = seed::rng(0);
        let mut p = MlpParameters::init(&[4, 5, 3], 0.0, &mut rng).unwrap();
        for layer in &mut p.layers {
            layer.weights.fill(0.0);
            layer.bias.fill(0.0);
        }
        let out = eval_forward(&p, &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dropout_zero_matches_eval() {
        let mut rng = seed::rng(1);
        let p = MlpParameters::init(&[3, 6, 4, 2], 0.0, &mut rng).unwrap();
        let x = [0.3, -1.0, 2.0];
        let mut train_rng = seed::rng(2);
        let (train_out, _) = p.forward(&x, ForwardMode::Train(&mut train_rng)).unwrap();
        let eval_out = eval_forward(&p, &x).unwrap();
        assert_eq!(train_out, eval_out);
    }

    #[test]
    fn dropout_mask_is_seeded() {
        let mut rng = seed::rng(1);
        let p = MlpParameters::init(&[3, 16, 2], 0.5, &mut rng).unwrap();
        let x = [0.3, -1.0, 2.0];
        let mut r1 = seed::rng(7);
        let mut r2 = seed::rng(7);
        let (o1, _) = p.forward(&x, ForwardMode::Train(&mut r1)).unwrap();
        let (o2, _) = p.forward(&x, ForwardMode::Train(&mut r2)).unwrap();
        assert_eq!(o1, o2);
    }

    #[test]
    fn rejects_dimension_mismatch() {
        let p = identity_params(3);
        assert!(eval_forward(&p, &[1.0, 2.0]).is_err());
        let mut rng = seed::rng(0);
        assert!(MlpParameters::init(&[3], 0.0, &mut rng).is_err());
        assert!(MlpParameters::init(&[3, 4, 4, 4, 4], 0.0, &mut rng).is_err());
        assert!(MlpParameters::init(&[3, 4], 1.0, &mut rng).is_err());
    }

    /// Central finite differences on a scalar loss `0.5 * ||f(x)||^2`
    /// validate the backward pass layer by layer.
    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = seed::rng(5);
        for dims in [vec![4, 3], vec![4, 6, 3], vec![4, 6, 5, 3]] {
            let mut p = MlpParameters::init(&dims, 0.0, &mut rng).unwrap();
            let x: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();

            let loss = |p: &MlpParameters| -> f64 {
                let out = eval_forward(p, &x).unwrap();
                0.5 * out.iter().map(|v| v * v).sum::<f64>()
            };
            let (out, cache) = p
                .forward::<rand_chacha::ChaCha8Rng>(&x, ForwardMode::Eval)
                .unwrap();
            let grads = p.backward(&cache, &out).unwrap();

            let h = 1e-6;
            for li in 0..p.layers.len() {
                for r in 0..p.layers[li].out_dim() {
                    for c in 0..p.layers[li].in_dim() {
                        let orig = p.layers[li].weights[(r, c)];
                        p.layers[li].weights[(r, c)] = orig + h;
                        let up = loss(&p);
                        p.layers[li].weights[(r, c)] = orig - h;
                        let down = loss(&p);
                        p.layers[li].weights[(r, c)] = orig;
                        let fd = (up - down) / (2.0 * h);
                        assert_abs_diff_eq!(grads.weights[li][(r, c)], fd, epsilon = 1e-6);
                    }
                    let orig = p.layers[li].bias[r];
                    p.layers[li].bias[r] = orig + h;
                    let up = loss(&p);
                    p.layers[li].bias[r] = orig - h;
                    let down = loss(&p);
                    p.layers[li].bias[r] = orig;
                    let fd = (up - down) / (2.0 * h);
                    assert_abs_diff_eq!(grads.bias[li][r], fd, epsilon = 1e-6);
                }
            }
        }
    }
}

//! Dense feed-forward networks with hand-derived reverse-mode gradients.
//!
//! Nets here are small (a few thousand parameters), so layers store plain
//! `ndarray` matrices and backprop walks them explicitly. Every gradient
//! rule is covered by the finite-difference gate in the loss module's tests.

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::Normal;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Linear,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Linear => z,
        }
    }

    /// Derivative expressed through the activation value.
    fn derivative_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
            Activation::Linear => 1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DenseLayer {
    /// (out, in).
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

/// Fully connected net: hidden layers share one activation, the output layer
/// is linear (heads apply their own nonlinearities downstream).
#[derive(Debug, Clone)]
pub struct DenseNet {
    pub layers: Vec<DenseLayer>,
}

/// Intermediate activations kept by [`DenseNet::forward_trace`] so backprop
/// can reuse them.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    /// Input to each layer; `inputs[0]` is the net input.
    inputs: Vec<Array1<f64>>,
    /// Activation output of each layer; the last is the net output.
    outputs: Vec<Array1<f64>>,
}

impl ForwardTrace {
    pub fn output(&self) -> &Array1<f64> {
        self.outputs.last().expect("net has at least one layer")
    }
}

/// Per-layer gradient accumulator mirroring a net's parameter shapes.
#[derive(Debug, Clone)]
pub struct NetGrads {
    pub weights: Vec<Array2<f64>>,
    pub bias: Vec<Array1<f64>>,
}

impl NetGrads {
    pub fn zeros_like(net: &DenseNet) -> Self {
        Self {
            weights: net.layers.iter().map(|l| Array2::zeros(l.weights.dim())).collect(),
            bias: net.layers.iter().map(|l| Array1::zeros(l.bias.len())).collect(),
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for w in &mut self.weights {
            w.mapv_inplace(|v| v * factor);
        }
        for b in &mut self.bias {
            b.mapv_inplace(|v| v * factor);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|w| w.iter().all(|v| v.is_finite()))
            && self.bias.iter().all(|b| b.iter().all(|v| v.is_finite()))
    }

    pub fn flatten_into(&self, out: &mut Vec<f64>) {
        for (w, b) in self.weights.iter().zip(&self.bias) {
            out.extend(w.iter());
            out.extend(b.iter());
        }
    }
}

impl DenseNet {
    /// Builds a net with the given layer widths; `dims` runs input first.
    /// Parameters are drawn from a normal with standard deviation
    /// `init_std`.
    pub fn random<R: Rng>(dims: &[usize], hidden: Activation, init_std: f64, rng: &mut R) -> Self {
        assert!(dims.len() >= 2);
        let dist = Normal::new(0.0, init_std).expect("valid std");
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let activation = if i + 2 == dims.len() { Activation::Linear } else { hidden };
                DenseLayer {
                    weights: Array2::from_shape_fn((fan_out, fan_in), |_| rng.sample(dist)),
                    bias: Array1::from_shape_fn(fan_out, |_| rng.sample(dist)),
                    activation,
                }
            })
            .collect();
        Self { layers }
    }

    /// All-zero parameters; useful for symmetry checks.
    pub fn zeros(dims: &[usize], hidden: Activation) -> Self {
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, w)| DenseLayer {
                weights: Array2::zeros((w[1], w[0])),
                bias: Array1::zeros(w[1]),
                activation: if i + 2 == dims.len() { Activation::Linear } else { hidden },
            })
            .collect();
        Self { layers }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weights.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().weights.nrows()
    }

    /// Total parameter count: sum over layers of `in*out + out`.
    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn forward(&self, input: &Array1<f64>) -> Array1<f64> {
        let mut x = input.clone();
        for layer in &self.layers {
            let z = layer.weights.dot(&x) + &layer.bias;
            x = z.mapv(|v| layer.activation.apply(v));
        }
        x
    }

    pub fn forward_trace(&self, input: &Array1<f64>) -> ForwardTrace {
        assert_eq!(input.len(), self.input_dim(), "input dimension mismatch");
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut outputs = Vec::with_capacity(self.layers.len());
        let mut x = input.clone();
        for layer in &self.layers {
            inputs.push(x.clone());
            let z = layer.weights.dot(&x) + &layer.bias;
            x = z.mapv(|v| layer.activation.apply(v));
            outputs.push(x.clone());
        }
        ForwardTrace { inputs, outputs }
    }

    /// Accumulates parameter gradients for one sample given the gradient of
    /// the loss with respect to the net output; returns the gradient with
    /// respect to the net input.
    pub fn backward(
        &self,
        trace: &ForwardTrace,
        grad_output: &Array1<f64>,
        grads: &mut NetGrads,
    ) -> Array1<f64> {
        let mut grad = grad_output.clone();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            // d loss / d pre-activation, using the stored activation output.
            let dz: Array1<f64> = grad
                .iter()
                .zip(trace.outputs[i].iter())
                .map(|(&g, &a)| g * layer.activation.derivative_from_output(a))
                .collect();
            let x = &trace.inputs[i];
            {
                let gw = &mut grads.weights[i];
                for (r, &dzr) in dz.iter().enumerate() {
                    if dzr != 0.0 {
                        for (c, &xc) in x.iter().enumerate() {
                            gw[(r, c)] += dzr * xc;
                        }
                    }
                }
            }
            grads.bias[i].iter_mut().zip(dz.iter()).for_each(|(b, &d)| *b += d);
            grad = layer.weights.t().dot(&dz);
        }
        grad
    }

    /// Copies all parameters, layer by layer, into one flat vector.
    pub fn flatten_into(&self, out: &mut Vec<f64>) {
        for layer in &self.layers {
            out.extend(layer.weights.iter());
            out.extend(layer.bias.iter());
        }
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        self.flatten_into(&mut out);
        out
    }

    /// Restores parameters from a flat vector produced by [`flatten`];
    /// returns how many values were consumed.
    ///
    /// [`flatten`]: DenseNet::flatten
    pub fn assign_flat(&mut self, flat: &[f64]) -> usize {
        let mut idx = 0;
        for layer in &mut self.layers {
            for w in layer.weights.iter_mut() {
                *w = flat[idx];
                idx += 1;
            }
            for b in layer.bias.iter_mut() {
                *b = flat[idx];
                idx += 1;
            }
        }
        idx
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn param_count_matches_layer_sum() {
        let net = DenseNet::zeros(&[5, 8, 6, 4], Activation::Tanh);
        assert_eq!(net.param_count(), 5 * 8 + 8 + 8 * 6 + 6 + 6 * 4 + 4);
    }

    #[test]
    fn forward_is_deterministic_and_finite() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let net = DenseNet::random(&[4, 16, 3], Activation::Tanh, 0.1, &mut rng);
        let x = Array1::from(vec![0.3, -1.2, 0.0, 2.5]);
        let a = net.forward(&x);
        let b = net.forward(&x);
        assert_eq!(a, b);
        assert!(a.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn flatten_round_trips() {
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let net = DenseNet::random(&[3, 7, 2], Activation::Tanh, 0.1, &mut rng);
        let flat = net.flatten();
        let mut other = DenseNet::zeros(&[3, 7, 2], Activation::Tanh);
        let used = other.assign_flat(&flat);
        assert_eq!(used, net.param_count());
        let x = Array1::from(vec![0.1, 0.2, 0.3]);
        assert_eq!(net.forward(&x), other.forward(&x));
    }

    /// Finite-difference check of the raw layer rules on a scalar composite
    /// of the outputs. The full loss gradients get their own gate in the
    /// loss module; this pins the layer algebra in isolation.
    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let net = DenseNet::random(&[4, 6, 5, 3], Activation::Tanh, 0.4, &mut rng);
        let x = Array1::from(vec![0.5, -0.3, 1.1, -0.8]);
        // Loss = sum of squares of outputs.
        let trace = net.forward_trace(&x);
        let grad_out = trace.output().mapv(|v| 2.0 * v);
        let mut grads = NetGrads::zeros_like(&net);
        net.backward(&trace, &grad_out, &mut grads);
        let mut flat_grads = Vec::new();
        grads.flatten_into(&mut flat_grads);

        let flat = net.flatten();
        let h = 1e-6;
        let loss = |flat: &[f64]| {
            let mut n = net.clone();
            n.assign_flat(flat);
            n.forward(&x).iter().map(|v| v * v).sum::<f64>()
        };
        for i in (0..flat.len()).step_by(7) {
            let mut plus = flat.clone();
            plus[i] += h;
            let mut minus = flat.clone();
            minus[i] -= h;
            let fd = (loss(&plus) - loss(&minus)) / (2.0 * h);
            assert_relative_eq!(flat_grads[i], fd, max_relative = 1e-5, epsilon = 1e-9);
        }
    }
}

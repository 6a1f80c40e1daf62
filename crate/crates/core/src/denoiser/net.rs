use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;

use crate::{Error, Result};

/// Fully connected layer; `weights` is `(outputs, inputs)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    fn init<R: Rng + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (inputs as f64).sqrt();
        let weights = Array2::from_shape_fn((outputs, inputs), |_| rng.random_range(-bound..bound));
        let bias = Array1::from_shape_fn(outputs, |_| rng.random_range(-bound..bound));
        Self { weights, bias }
    }

    fn apply(&self, input: ArrayView2<f64>) -> Array2<f64> {
        let mut out = input.dot(&self.weights.t());
        out += &self.bias;
        out
    }
}

/// Small multilayer perceptron: `tanh` on every hidden layer, linear output.
///
/// Inputs are rows of a batch matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct TinyNet {
    layers: Vec<Dense>,
}

/// Parameter gradients, laid out like the network.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Dense>,
}

pub struct ForwardCache {
    /// Input followed by every hidden activation.
    activations: Vec<Array2<f64>>,
    pub output: Array2<f64>,
}

impl TinyNet {
    /// Network with the given layer widths, `sizes = [inputs, hidden.., outputs]`.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::InvalidConfig(format!("bad layer sizes {sizes:?}")));
        }
        let layers = sizes.windows(2).map(|w| Dense::init(w[0], w[1], rng)).collect();
        Ok(Self { layers })
    }

    /// Denoiser network for `dim`-coordinate chunks: input `2 dim + 1`
    /// (scaled state, condition, noise feature), two hidden layers.
    pub fn for_chunk<R: Rng + ?Sized>(dim: usize, hidden: usize, rng: &mut R) -> Result<Self> {
        Self::new(&[2 * dim + 1, hidden, hidden, dim], rng)
    }

    pub fn from_layers(layers: Vec<Dense>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidConfig("network has no layers".into()));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.bias.len() != l.weights.nrows() {
                return Err(Error::InvalidConfig(format!("layer {i}: bias/weight mismatch")));
            }
            if i > 0 && layers[i - 1].weights.nrows() != l.weights.ncols() {
                return Err(Error::InvalidConfig(format!("layer {i}: input width mismatch")));
            }
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.input_dim()];
        sizes.extend(self.layers.iter().map(|l| l.weights.nrows()));
        sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weights.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].weights.nrows()
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn forward(&self, input: ArrayView2<f64>) -> Array2<f64> {
        let last = self.layers.len() - 1;
        let mut x = self.layers[0].apply(input);
        if last > 0 {
            x.mapv_inplace(f64::tanh);
        }
        for (i, layer) in self.layers.iter().enumerate().skip(1) {
            x = layer.apply(x.view());
            if i < last {
                x.mapv_inplace(f64::tanh);
            }
        }
        x
    }

    pub fn forward_cached(&self, input: ArrayView2<f64>) -> ForwardCache {
        let last = self.layers.len() - 1;
        let mut activations = Vec::with_capacity(self.layers.len());
        activations.push(input.to_owned());
        for (i, layer) in self.layers.iter().enumerate() {
            let mut x = layer.apply(activations[i].view());
            if i < last {
                x.mapv_inplace(f64::tanh);
                activations.push(x);
            } else {
                return ForwardCache { activations, output: x };
            }
        }
        unreachable!("network has at least one layer")
    }

    /// Backpropagates `d loss / d output` through the cached pass.
    pub fn backward(&self, cache: &ForwardCache, grad_output: ArrayView2<f64>) -> Gradients {
        let mut grads: Vec<Dense> = Vec::with_capacity(self.layers.len());
        let mut delta = grad_output.to_owned();
        for i in (0..self.layers.len()).rev() {
            let input = &cache.activations[i];
            let gw = delta.t().dot(input);
            let gb = delta.sum_axis(Axis(0));
            if i > 0 {
                let mut back = delta.dot(&self.layers[i].weights);
                // tanh' = 1 - tanh^2, and activations[i] is tanh of the
                // previous pre-activation
                back.zip_mut_with(input, |d, a| *d *= 1.0 - a * a);
                delta = back;
            }
            grads.push(Dense { weights: gw, bias: gb });
        }
        grads.reverse();
        Gradients { layers: grads }
    }

    /// Flattened parameters: each layer's weights (row-major) then bias.
    pub fn params(&self) -> Vec<f64> {
        flatten(&self.layers)
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.num_params() {
            return Err(Error::shape(params.len(), self.num_params()));
        }
        let mut it = params.iter().copied();
        for l in &mut self.layers {
            for w in l.weights.iter_mut().chain(l.bias.iter_mut()) {
                *w = it.next().expect("length checked");
            }
        }
        Ok(())
    }

    /// `params -= learning_rate * grads`.
    pub fn sgd_step(&mut self, grads: &Gradients, learning_rate: f64) {
        for (l, g) in self.layers.iter_mut().zip(&grads.layers) {
            l.weights.scaled_add(-learning_rate, &g.weights);
            l.bias.scaled_add(-learning_rate, &g.bias);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(l.bias.iter()).all(|w| w.is_finite()))
    }
}

impl Gradients {
    pub fn flatten(&self) -> Vec<f64> {
        flatten(&self.layers)
    }
}

fn flatten(layers: &[Dense]) -> Vec<f64> {
    layers
        .iter()
        .flat_map(|l| l.weights.iter().chain(l.bias.iter()).copied())
        .collect()
}

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::matrix::{gemm, DenseMatrix};
use super::NumError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
    Linear,
    /// Row-wise softmax; only valid on the output layer.
    Softmax,
}

impl Activation {
    pub(crate) fn code(self) -> u32 {
        match self {
            Activation::Relu => 0,
            Activation::Tanh => 1,
            Activation::Linear => 2,
            Activation::Softmax => 3,
        }
    }

    pub(crate) fn from_code(code: u32) -> Option<Self> {
        Some(match code {
            0 => Activation::Relu,
            1 => Activation::Tanh,
            2 => Activation::Linear,
            3 => Activation::Softmax,
            _ => return None,
        })
    }

    fn apply(self, z: &mut DenseMatrix) {
        match self {
            Activation::Relu => z.as_mut_slice().iter_mut().for_each(|v| *v = v.max(0.0)),
            Activation::Tanh => z.as_mut_slice().iter_mut().for_each(|v| *v = v.tanh()),
            Activation::Linear => {}
            Activation::Softmax => {
                for r in 0..z.rows() {
                    softmax_in_place(z.row_mut(r));
                }
            }
        }
    }
}

pub(crate) fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

/// Layer width and activation, used to describe a topology.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub width: usize,
    pub activation: Activation,
}

impl LayerSpec {
    pub const fn new(width: usize, activation: Activation) -> Self {
        Self { width, activation }
    }
}

/// Dense layer. Weights are stored `inputs x outputs` so a batch forward is
/// one `x * W` product.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: DenseMatrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn input_dim(&self) -> usize {
        self.weights.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.cols()
    }
}

#[derive(Debug, Clone)]
struct ForwardCache {
    /// `inputs[i]` is the input fed to layer `i`.
    inputs: Vec<DenseMatrix>,
    pre_activations: Vec<DenseMatrix>,
    outputs: Vec<DenseMatrix>,
}

/// Gradients with the same shapes as an [`Mlp`]'s parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGrad>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub weights: DenseMatrix,
    pub bias: Vec<f64>,
}

impl Gradients {
    pub fn zeros_like(net: &Mlp) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| LayerGrad {
                    weights: DenseMatrix::zeros(l.input_dim(), l.output_dim()),
                    bias: vec![0.0; l.output_dim()],
                })
                .collect(),
        }
    }

    pub fn slices(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weights.as_slice(), l.bias.as_slice()])
            .collect()
    }

    pub fn flat(&self) -> Vec<f64> {
        self.slices().concat()
    }

    pub fn is_finite(&self) -> bool {
        self.slices().iter().all(|s| s.iter().all(|v| v.is_finite()))
    }

    pub fn scale(&mut self, k: f64) {
        for l in &mut self.layers {
            l.weights.as_mut_slice().iter_mut().for_each(|v| *v *= k);
            l.bias.iter_mut().for_each(|v| *v *= k);
        }
    }

    /// Adds `lambda * theta`, the gradient of `(lambda / 2) * |theta|^2`.
    pub fn add_l2(&mut self, net: &Mlp, lambda: f64) {
        for (g, l) in self.layers.iter_mut().zip(&net.layers) {
            for (gv, pv) in g.weights.as_mut_slice().iter_mut().zip(l.weights.as_slice()) {
                *gv += lambda * pv;
            }
            for (gv, pv) in g.bias.iter_mut().zip(&l.bias) {
                *gv += lambda * pv;
            }
        }
    }
}

/// Fully connected feedforward network with a cached forward pass for
/// reverse-mode differentiation.
#[derive(Debug, Clone)]
pub struct Mlp {
    layers: Vec<Layer>,
    cache: Option<ForwardCache>,
}

impl PartialEq for Mlp {
    fn eq(&self, other: &Self) -> bool {
        self.layers == other.layers
    }
}

impl Mlp {
    /// Builds a network with weights and biases uniform in `±1/sqrt(fan_in)`.
    pub fn new<R: Rng + ?Sized>(
        input_dim: usize,
        layers: &[LayerSpec],
        rng: &mut R,
    ) -> Result<Self, NumError> {
        let mut built = Vec::with_capacity(layers.len());
        let mut fan_in = input_dim;
        for spec in layers {
            let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
            let weights = (0..fan_in * spec.width)
                .map(|_| rng.random_range(-bound..=bound))
                .collect();
            let bias = (0..spec.width)
                .map(|_| rng.random_range(-bound..=bound))
                .collect();
            built.push(Layer {
                weights: DenseMatrix::from_vec(fan_in, spec.width, weights)?,
                bias,
                activation: spec.activation,
            });
            fan_in = spec.width;
        }
        Self::from_layers(built)
    }

    /// Validates that layer shapes chain and only the output layer uses
    /// softmax.
    pub fn from_layers(layers: Vec<Layer>) -> Result<Self, NumError> {
        if layers.is_empty() {
            return Err(NumError::Shape("network needs at least one layer".into()));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.bias.len() != l.output_dim() {
                return Err(NumError::Shape(format!(
                    "layer {i}: bias length {} != output dim {}",
                    l.bias.len(),
                    l.output_dim()
                )));
            }
            if i + 1 < layers.len() {
                if !matches!(l.activation, Activation::Relu | Activation::Tanh) {
                    return Err(NumError::Shape(format!(
                        "hidden layer {i} must use relu or tanh, got {:?}",
                        l.activation
                    )));
                }
                if layers[i + 1].input_dim() != l.output_dim() {
                    return Err(NumError::Shape(format!(
                        "layer {} expects {} inputs but layer {i} produces {}",
                        i + 1,
                        layers[i + 1].input_dim(),
                        l.output_dim()
                    )));
                }
            }
        }
        Ok(Self {
            layers,
            cache: None,
        })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        self.cache = None;
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].output_dim()
    }

    pub fn topology(&self) -> Vec<LayerSpec> {
        self.layers
            .iter()
            .map(|l| LayerSpec::new(l.output_dim(), l.activation))
            .collect()
    }

    pub fn same_topology(&self, other: &Mlp) -> bool {
        self.input_dim() == other.input_dim() && self.topology() == other.topology()
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.as_slice().len() + l.bias.len())
            .sum()
    }

    pub fn param_slices(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weights.as_slice(), l.bias.as_slice()])
            .collect()
    }

    pub fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        self.cache = None;
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weights.as_mut_slice(), l.bias.as_mut_slice()])
            .collect()
    }

    pub fn params_flat(&self) -> Vec<f64> {
        self.param_slices().concat()
    }

    pub fn set_params_flat(&mut self, flat: &[f64]) -> Result<(), NumError> {
        if flat.len() != self.param_count() {
            return Err(NumError::Shape(format!(
                "expected {} parameters, got {}",
                self.param_count(),
                flat.len()
            )));
        }
        let mut offset = 0;
        for s in self.param_slices_mut() {
            let n = s.len();
            s.copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }

    pub fn sum_squares(&self) -> f64 {
        self.param_slices()
            .iter()
            .flat_map(|s| s.iter())
            .map(|v| v * v)
            .sum()
    }

    fn check_input(&self, cols: usize) -> Result<(), NumError> {
        if cols != self.input_dim() {
            return Err(NumError::Shape(format!(
                "network expects {} inputs, got {cols}",
                self.input_dim()
            )));
        }
        Ok(())
    }

    fn run(&self, x: &DenseMatrix, mut cache: Option<&mut ForwardCache>) -> Result<DenseMatrix, NumError> {
        self.check_input(x.cols())?;
        let mut a = x.clone();
        for layer in &self.layers {
            let mut z = DenseMatrix::zeros(a.rows(), layer.output_dim());
            gemm(1.0, &a, false, &layer.weights, false, 0.0, &mut z);
            for r in 0..z.rows() {
                for (v, b) in z.row_mut(r).iter_mut().zip(&layer.bias) {
                    *v += b;
                }
            }
            let mut out = z.clone();
            layer.activation.apply(&mut out);
            if let Some(c) = cache.as_deref_mut() {
                c.inputs.push(a);
                c.pre_activations.push(z);
                c.outputs.push(out.clone());
            }
            a = out;
        }
        if !a.is_finite() {
            return Err(NumError::NonFinite("forward pass produced a non-finite value".into()));
        }
        Ok(a)
    }

    /// Batch forward pass (one sample per row) that records the cache used
    /// by [`Mlp::backward_batch`].
    pub fn forward_batch(&mut self, x: &DenseMatrix) -> Result<DenseMatrix, NumError> {
        let mut cache = ForwardCache {
            inputs: Vec::with_capacity(self.layers.len()),
            pre_activations: Vec::with_capacity(self.layers.len()),
            outputs: Vec::with_capacity(self.layers.len()),
        };
        self.cache = None;
        let out = self.run(x, Some(&mut cache))?;
        self.cache = Some(cache);
        Ok(out)
    }

    pub fn forward(&mut self, input: &[f64]) -> Result<Vec<f64>, NumError> {
        let x = DenseMatrix::from_vec(1, input.len(), input.to_vec())?;
        Ok(self.forward_batch(&x)?.into_vec())
    }

    /// Forward pass without touching the cache.
    pub fn predict_batch(&self, x: &DenseMatrix) -> Result<DenseMatrix, NumError> {
        self.run(x, None)
    }

    pub fn predict(&self, input: &[f64]) -> Result<Vec<f64>, NumError> {
        let x = DenseMatrix::from_vec(1, input.len(), input.to_vec())?;
        Ok(self.predict_batch(&x)?.into_vec())
    }

    /// Reverse pass over the cached batch. Parameter gradients are summed over
    /// rows, so the caller folds any `1/N` into `output_grad`. Also returns
    /// the gradient with respect to the batch input.
    pub fn backward_batch(&self, output_grad: &DenseMatrix) -> Result<(Gradients, DenseMatrix), NumError> {
        let cache = self.cache.as_ref().ok_or(NumError::MissingCache)?;
        let batch = cache.inputs[0].rows();
        if output_grad.rows() != batch || output_grad.cols() != self.output_dim() {
            return Err(NumError::Shape(format!(
                "output gradient is {}x{}, cached batch output is {}x{}",
                output_grad.rows(),
                output_grad.cols(),
                batch,
                self.output_dim()
            )));
        }
        let mut grads = Gradients::zeros_like(self);
        let mut delta = output_grad.clone();
        for i in (0..self.layers.len()).rev() {
            let layer = &self.layers[i];
            let pre = &cache.pre_activations[i];
            let out = &cache.outputs[i];
            match layer.activation {
                Activation::Relu => {
                    for (d, z) in delta.as_mut_slice().iter_mut().zip(pre.as_slice()) {
                        if *z <= 0.0 {
                            *d = 0.0;
                        }
                    }
                }
                Activation::Tanh => {
                    for (d, y) in delta.as_mut_slice().iter_mut().zip(out.as_slice()) {
                        *d *= 1.0 - y * y;
                    }
                }
                Activation::Linear => {}
                Activation::Softmax => {
                    for r in 0..delta.rows() {
                        let y = out.row(r);
                        let d = delta.row_mut(r);
                        let dot: f64 = d.iter().zip(y).map(|(a, b)| a * b).sum();
                        for (dv, yv) in d.iter_mut().zip(y) {
                            *dv = yv * (*dv - dot);
                        }
                    }
                }
            }
            let g = &mut grads.layers[i];
            gemm(1.0, &cache.inputs[i], true, &delta, false, 0.0, &mut g.weights);
            for r in 0..delta.rows() {
                for (b, d) in g.bias.iter_mut().zip(delta.row(r)) {
                    *b += d;
                }
            }
            let mut prev = DenseMatrix::zeros(batch, layer.input_dim());
            gemm(1.0, &delta, false, &layer.weights, true, 0.0, &mut prev);
            delta = prev;
        }
        Ok((grads, delta))
    }

    pub fn backward(&self, output_grad: &[f64]) -> Result<Gradients, NumError> {
        let g = DenseMatrix::from_vec(1, output_grad.len(), output_grad.to_vec())?;
        Ok(self.backward_batch(&g)?.0)
    }
}

//! Dense feed-forward networks with reverse-mode gradients.
//!
//! A network is a chain of affine layers with element-wise activations,
//! stored as one flat `f64` parameter vector (row-major weights then biases,
//! layer by layer). [`MlpNetwork::forward`] records every pre-activation and
//! activation so [`MlpNetwork::backward`] can produce both parameter
//! gradients and input gradients in a single reverse sweep.
//!
//! All math is 64-bit and single-threaded, so results are bit-reproducible
//! for a given seed. Sigmoid outputs are clamped to `[SIGMOID_EPS, 1 -
//! SIGMOID_EPS]` so downstream log-likelihood terms stay finite.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::distributions::{Distribution, Uniform};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

/// Clamp bound for sigmoid outputs.
pub const SIGMOID_EPS: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation {
    Relu,
    /// Negative-side slope must lie in (0, 1).
    LeakyRelu(f64),
    Tanh,
    Sigmoid,
    Linear,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    z
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu(slope) => {
                if z > 0.0 {
                    z
                } else {
                    slope * z
                }
            }
            Activation::Tanh => z.tanh(),
            Activation::Sigmoid => {
                let s = 1.0 / (1.0 + (-z).exp());
                s.clamp(SIGMOID_EPS, 1.0 - SIGMOID_EPS)
            }
            Activation::Linear => z,
        }
    }

    /// Derivative at pre-activation `z` with activation value `a`.
    /// The subgradient of ReLU at exactly 0 is 0.
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu(slope) => {
                if z > 0.0 {
                    1.0
                } else {
                    slope
                }
            }
            Activation::Tanh => 1.0 - a * a,
            Activation::Sigmoid => a * (1.0 - a),
            Activation::Linear => 1.0,
        }
    }

    fn validate(self) -> Result<()> {
        if let Activation::LeakyRelu(slope) = self {
            if !(slope > 0.0 && slope < 1.0) {
                return Err(Error::Config(format!(
                    "leaky_relu slope must lie in (0, 1), got {slope}"
                )));
            }
        }
        Ok(())
    }
}

/// One dense layer: widths plus activation kind.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerSpec {
    pub input_width: usize,
    pub output_width: usize,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn new(input_width: usize, output_width: usize, activation: Activation) -> Result<Self> {
        if input_width == 0 || output_width == 0 {
            return Err(Error::Config(format!(
                "layer widths must be positive, got {input_width}x{output_width}"
            )));
        }
        activation.validate()?;
        Ok(Self {
            input_width,
            output_width,
            activation,
        })
    }

    /// Flat parameter count: `in * out` weights plus `out` biases.
    pub fn param_count(&self) -> usize {
        self.input_width * self.output_width + self.output_width
    }
}

/// Whether a network maps prior noise to data space or data to a realness score.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Generator,
    Discriminator,
}

/// Dense network with a flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpNetwork {
    layers: Vec<LayerSpec>,
    params: Vec<f64>,
    role: Role,
}

/// Recorded forward pass: the input batch plus per-layer pre-activations and
/// activations, each `(batch, width)`.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    input: Array2<f64>,
    pre: Vec<Array2<f64>>,
    post: Vec<Array2<f64>>,
}

impl ForwardTrace {
    /// Final activation matrix, shape `(batch, last output_width)`.
    pub fn output(&self) -> &Array2<f64> {
        self.post.last().expect("trace has at least one layer")
    }

    pub fn batch_size(&self) -> usize {
        self.input.nrows()
    }
}

/// Gradients from one reverse sweep.
#[derive(Debug, Clone)]
pub struct GradientBundle {
    /// Aligned with the network's flat parameter vector.
    pub param_grads: Vec<f64>,
    /// Gradient of the loss w.r.t. the input batch, `(batch, input_width)`.
    pub input_grads: Array2<f64>,
}

fn total_params(layers: &[LayerSpec]) -> usize {
    layers.iter().map(LayerSpec::param_count).sum()
}

impl MlpNetwork {
    /// Build a network with Glorot-uniform weights (`a = sqrt(6 / (fan_in +
    /// fan_out))`) and zero biases, deterministic for a given seed.
    ///
    /// Layer widths must chain, and the head must match the role:
    /// discriminators end in a sigmoid, generators in a linear layer.
    pub fn init(layers: Vec<LayerSpec>, role: Role, seed: u64) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Config("network must have at least one layer".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].output_width != pair[1].input_width {
                return Err(Error::Config(format!(
                    "layer widths do not chain: {} -> {}",
                    pair[0].output_width, pair[1].input_width
                )));
            }
        }
        let head = layers.last().unwrap().activation;
        match role {
            Role::Discriminator if head != Activation::Sigmoid => {
                return Err(Error::Config(
                    "discriminator head must use a sigmoid activation".into(),
                ));
            }
            Role::Generator if head != Activation::Linear => {
                return Err(Error::Config(
                    "generator head must use a linear activation".into(),
                ));
            }
            _ => {}
        }

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Vec::with_capacity(total_params(&layers));
        for layer in &layers {
            let bound = (6.0 / (layer.input_width + layer.output_width) as f64).sqrt();
            let dist = Uniform::new_inclusive(-bound, bound);
            for _ in 0..layer.input_width * layer.output_width {
                params.push(dist.sample(&mut rng));
            }
            params.extend(std::iter::repeat(0.0).take(layer.output_width));
        }
        Ok(Self {
            layers,
            params,
            role,
        })
    }

    /// Same structure with a replacement parameter vector.
    pub fn with_params(&self, params: Vec<f64>) -> Result<Self> {
        if params.len() != self.params.len() {
            return Err(Error::Config(format!(
                "parameter vector has length {}, network expects {}",
                params.len(),
                self.params.len()
            )));
        }
        Ok(Self {
            layers: self.layers.clone(),
            params,
            role: self.role,
        })
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].input_width
    }

    pub fn output_width(&self) -> usize {
        self.layers.last().unwrap().output_width
    }

    /// `(weights (out, in), biases)` views into the flat vector for layer `k`.
    fn layer_views(&self, k: usize) -> (ArrayView2<'_, f64>, &[f64]) {
        let mut offset = 0;
        for layer in &self.layers[..k] {
            offset += layer.param_count();
        }
        let spec = &self.layers[k];
        let w_len = spec.input_width * spec.output_width;
        let weights =
            ArrayView2::from_shape((spec.output_width, spec.input_width), &self.params[offset..offset + w_len])
                .expect("weight slice matches layer shape");
        let biases = &self.params[offset + w_len..offset + w_len + spec.output_width];
        (weights, biases)
    }

    /// Run the batch through every layer, recording the full trace.
    pub fn forward(&self, batch: &Array2<f64>) -> Result<ForwardTrace> {
        if batch.nrows() == 0 {
            return Err(Error::Input("batch must contain at least one row".into()));
        }
        if batch.ncols() != self.input_width() {
            return Err(Error::Input(format!(
                "batch has {} columns, network expects {}",
                batch.ncols(),
                self.input_width()
            )));
        }
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut post = Vec::with_capacity(self.layers.len());
        let mut current = batch.clone();
        for (k, spec) in self.layers.iter().enumerate() {
            let (weights, biases) = self.layer_views(k);
            let mut z = current.dot(&weights.t());
            let bias = Array1::from_iter(biases.iter().copied());
            z += &bias;
            let a = z.mapv(|v| spec.activation.apply(v));
            pre.push(z);
            post.push(a.clone());
            current = a;
        }
        Ok(ForwardTrace {
            input: batch.clone(),
            pre,
            post,
        })
    }

    /// Reverse sweep from `upstream = dL/d(output)` back to parameter and
    /// input gradients. Batch rows are summed, never averaged; callers fold
    /// any `1/batch` factors into `upstream`.
    pub fn backward(&self, trace: &ForwardTrace, upstream: &Array2<f64>) -> Result<GradientBundle> {
        if trace.pre.len() != self.layers.len() {
            return Err(Error::Input(format!(
                "trace has {} layers, network has {}",
                trace.pre.len(),
                self.layers.len()
            )));
        }
        let out = trace.output();
        if upstream.dim() != out.dim() {
            return Err(Error::Input(format!(
                "upstream shape {:?} does not match output shape {:?}",
                upstream.dim(),
                out.dim()
            )));
        }

        let mut param_grads = vec![0.0; self.params.len()];
        let mut offsets = Vec::with_capacity(self.layers.len());
        let mut acc = 0;
        for layer in &self.layers {
            offsets.push(acc);
            acc += layer.param_count();
        }

        let mut delta = upstream.clone();
        for k in (0..self.layers.len()).rev() {
            let spec = &self.layers[k];
            // delta currently holds dL/da_k; convert to dL/dz_k.
            let z = &trace.pre[k];
            let a = &trace.post[k];
            ndarray::Zip::from(&mut delta)
                .and(z)
                .and(a)
                .for_each(|d, &zv, &av| *d *= spec.activation.derivative(zv, av));

            let prev_act = if k == 0 { &trace.input } else { &trace.post[k - 1] };
            let dw = delta.t().dot(prev_act);
            let db = delta.sum_axis(Axis(0));

            let w_len = spec.input_width * spec.output_width;
            let base = offsets[k];
            param_grads[base..base + w_len].copy_from_slice(dw.as_standard_layout().as_slice().unwrap());
            param_grads[base + w_len..base + w_len + spec.output_width]
                .copy_from_slice(db.as_slice().unwrap());

            let (weights, _) = self.layer_views(k);
            delta = delta.dot(&weights);
        }

        Ok(GradientBundle {
            param_grads,
            input_grads: delta,
        })
    }

    /// Per-point Euclidean norm of the gradient of the scalar output with
    /// respect to the input point.
    pub fn input_gradient_norms(&self, points: &Array2<f64>) -> Result<Vec<f64>> {
        if self.output_width() != 1 {
            return Err(Error::Config(format!(
                "input gradient norms need a scalar head, network outputs {} values",
                self.output_width()
            )));
        }
        let trace = self.forward(points)?;
        let upstream = Array2::ones((points.nrows(), 1));
        let grads = self.backward(&trace, &upstream)?;
        Ok(grads
            .input_grads
            .rows()
            .into_iter()
            .map(|row| row.iter().map(|v| v * v).sum::<f64>().sqrt())
            .collect())
    }
}

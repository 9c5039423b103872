//! Minimal differentiable MLP core.
//!
//! A [`Network`] is a dense feed-forward net with tanh hidden layers and an
//! identity output layer, stored in double precision. `forward` records the
//! activations it needs so that `backward` can return exact reverse-mode
//! gradients of `upstream · output` with respect to every parameter.
//!
//! Everything downstream (policies, value heads, Q-functions, reward nets)
//! is built on this one container.

mod checkpoint;
mod gradcheck;

pub use checkpoint::{load_network, save_network};
pub use gradcheck::finite_diff_check;

use rand::distributions::{Distribution, Uniform};
use rand::Rng;

use crate::error::{Error, Result};

/// Weights and biases of one dense layer.
///
/// Weights are row-major with shape `(out_dim, in_dim)`:
/// `z_o = b_o + Σ_i w[o * in_dim + i] * x_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

/// Post-activation values recorded by the last `forward` call.
///
/// `acts[0]` is the input, `acts[l + 1]` the output of layer `l`
/// (tanh-activated for hidden layers, raw for the final layer).
#[derive(Debug, Clone, Default)]
struct ForwardTape {
    acts: Vec<Vec<f64>>,
    valid: bool,
}

/// Dense MLP: tanh hidden layers, identity output.
#[derive(Debug, Clone)]
pub struct Network {
    layer_sizes: Vec<usize>,
    layers: Vec<Layer>,
    tape: ForwardTape,
}

/// Per-parameter gradients, shaped exactly like the network.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrads {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl ParamGrads {
    pub fn zeros_like(net: &Network) -> Self {
        ParamGrads {
            weights: net.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            biases: net.layers.iter().map(|l| vec![0.0; l.biases.len()]).collect(),
        }
    }

    pub fn zero(&mut self) {
        for w in &mut self.weights {
            w.iter_mut().for_each(|x| *x = 0.0);
        }
        for b in &mut self.biases {
            b.iter_mut().for_each(|x| *x = 0.0);
        }
    }

    /// `self += scale * other`, shapes must match.
    pub fn add_scaled(&mut self, other: &ParamGrads, scale: f64) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += scale * y;
            }
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += scale * y;
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        for w in &mut self.weights {
            w.iter_mut().for_each(|x| *x *= s);
        }
        for b in &mut self.biases {
            b.iter_mut().for_each(|x| *x *= s);
        }
    }

    /// Flat parameter-order view, matching [`Network::param`] indexing.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w);
            out.extend_from_slice(b);
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.to_flat().iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

/// Builds a network with Glorot-uniform weights (`±sqrt(6 / (n_in + n_out))`)
/// and zero biases. Deterministic given the seed.
pub fn init_network(layer_sizes: &[usize], seed: u64) -> Result<Network> {
    Network::init(layer_sizes, &mut crate::rng::stream(seed, "nncore.init"))
}

impl Network {
    pub fn init<R: Rng + ?Sized>(layer_sizes: &[usize], rng: &mut R) -> Result<Network> {
        if layer_sizes.len() < 2 {
            return Err(Error::config(format!(
                "network needs at least 2 layer sizes, got {:?}",
                layer_sizes
            )));
        }
        if layer_sizes.iter().any(|&n| n == 0) {
            return Err(Error::config(format!(
                "layer sizes must be positive, got {:?}",
                layer_sizes
            )));
        }
        let mut layers = Vec::with_capacity(layer_sizes.len() - 1);
        for pair in layer_sizes.windows(2) {
            let (n_in, n_out) = (pair[0], pair[1]);
            let limit = (6.0 / (n_in as f64 + n_out as f64)).sqrt();
            let dist = Uniform::new(-limit, limit);
            let weights = (0..n_in * n_out).map(|_| dist.sample(rng)).collect();
            layers.push(Layer {
                in_dim: n_in,
                out_dim: n_out,
                weights,
                biases: vec![0.0; n_out],
            });
        }
        Ok(Network {
            layer_sizes: layer_sizes.to_vec(),
            layers,
            tape: ForwardTape::default(),
        })
    }

    /// Rebuilds a network from a flat parameter vector (layer-major,
    /// weights row-major then biases). Inverse of [`Network::to_flat`].
    pub fn from_flat(layer_sizes: &[usize], flat: &[f64]) -> Result<Network> {
        let mut net = Network::init(layer_sizes, &mut crate::rng::stream(0, "nncore.flat"))?;
        if flat.len() != net.param_count() {
            return Err(Error::shape(net.param_count(), flat.len(), "flat parameter vector"));
        }
        let mut k = 0;
        for layer in &mut net.layers {
            let nw = layer.weights.len();
            layer.weights.copy_from_slice(&flat[k..k + nw]);
            k += nw;
            let nb = layer.biases.len();
            layer.biases.copy_from_slice(&flat[k..k + nb]);
            k += nb;
        }
        Ok(net)
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for layer in &self.layers {
            out.extend_from_slice(&layer.weights);
            out.extend_from_slice(&layer.biases);
        }
        out
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        self.tape.valid = false;
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    /// Flat-indexed parameter read (layer-major, weights then biases).
    pub fn param(&self, mut idx: usize) -> f64 {
        for layer in &self.layers {
            if idx < layer.weights.len() {
                return layer.weights[idx];
            }
            idx -= layer.weights.len();
            if idx < layer.biases.len() {
                return layer.biases[idx];
            }
            idx -= layer.biases.len();
        }
        panic!("parameter index out of range");
    }

    /// Flat-indexed parameter write. Invalidates any recorded forward tape.
    pub fn set_param(&mut self, mut idx: usize, value: f64) {
        self.tape.valid = false;
        for layer in &mut self.layers {
            if idx < layer.weights.len() {
                layer.weights[idx] = value;
                return;
            }
            idx -= layer.weights.len();
            if idx < layer.biases.len() {
                layer.biases[idx] = value;
                return;
            }
            idx -= layer.biases.len();
        }
        panic!("parameter index out of range");
    }

    /// Forward pass recording activations for a subsequent [`Network::backward`].
    ///
    /// Hidden layers apply tanh; the final layer is identity (pre-activation
    /// output). Reuses internal buffers, so repeated calls do not allocate.
    pub fn forward(&mut self, x: &[f64]) -> Result<&[f64]> {
        if x.len() != self.input_dim() {
            return Err(Error::shape(self.input_dim(), x.len(), "forward input"));
        }
        if self.tape.acts.len() != self.layers.len() + 1 {
            self.tape.acts = std::iter::once(vec![0.0; self.layer_sizes[0]])
                .chain(self.layer_sizes[1..].iter().map(|&n| vec![0.0; n]))
                .collect();
        }
        self.tape.acts[0].copy_from_slice(x);
        let n_layers = self.layers.len();
        for (l, layer) in self.layers.iter().enumerate() {
            let (prev, rest) = self.tape.acts.split_at_mut(l + 1);
            let input = &prev[l];
            let out = &mut rest[0];
            let last = l + 1 == n_layers;
            for o in 0..layer.out_dim {
                let row = &layer.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
                let mut z = layer.biases[o];
                for (w, xi) in row.iter().zip(input.iter()) {
                    z = w.mul_add(*xi, z);
                }
                out[o] = if last { z } else { z.tanh() };
            }
        }
        self.tape.valid = true;
        Ok(self.tape.acts.last().unwrap())
    }

    /// Pure forward pass without recording; allocates the output.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::shape(self.input_dim(), x.len(), "apply input"));
        }
        let n_layers = self.layers.len();
        let mut cur = x.to_vec();
        for (l, layer) in self.layers.iter().enumerate() {
            let last = l + 1 == n_layers;
            let mut out = vec![0.0; layer.out_dim];
            for o in 0..layer.out_dim {
                let row = &layer.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
                let mut z = layer.biases[o];
                for (w, xi) in row.iter().zip(cur.iter()) {
                    z = w.mul_add(*xi, z);
                }
                out[o] = if last { z } else { z.tanh() };
            }
            cur = out;
        }
        Ok(cur)
    }

    /// Gradient of `upstream · output` with respect to every parameter,
    /// using the activations recorded by the last `forward`.
    pub fn backward(&self, upstream: &[f64]) -> Result<ParamGrads> {
        let mut grads = ParamGrads::zeros_like(self);
        self.backward_into(upstream, &mut grads)?;
        Ok(grads)
    }

    /// Like [`Network::backward`] but accumulates (`+=`) into `grads`,
    /// for summing over a batch without reallocating.
    pub fn backward_into(&self, upstream: &[f64], grads: &mut ParamGrads) -> Result<()> {
        if !self.tape.valid {
            return Err(Error::state("backward called before forward"));
        }
        if upstream.len() != self.output_dim() {
            return Err(Error::shape(self.output_dim(), upstream.len(), "upstream gradient"));
        }
        let mut delta = upstream.to_vec();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let input = &self.tape.acts[l];
            let output = &self.tape.acts[l + 1];
            let last = l + 1 == self.layers.len();
            // dz: gradient at the pre-activation of this layer.
            let dz: Vec<f64> = if last {
                delta.clone()
            } else {
                delta
                    .iter()
                    .zip(output.iter())
                    .map(|(d, y)| d * (1.0 - y * y))
                    .collect()
            };
            let gw = &mut grads.weights[l];
            let gb = &mut grads.biases[l];
            let mut next_delta = vec![0.0; layer.in_dim];
            for o in 0..layer.out_dim {
                let d = dz[o];
                gb[o] += d;
                let row = o * layer.in_dim;
                for i in 0..layer.in_dim {
                    gw[row + i] = d.mul_add(input[i], gw[row + i]);
                    next_delta[i] = layer.weights[row + i].mul_add(d, next_delta[i]);
                }
            }
            delta = next_delta;
        }
        Ok(())
    }
}

/// Adam moment accumulators and hyperparameters for one network.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: ParamGrads,
    v: ParamGrads,
    step: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(net: &Network, lr: f64) -> Self {
        AdamState {
            m: ParamGrads::zeros_like(net),
            v: ParamGrads::zeros_like(net),
            step: 0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// Standard Adam update with bias correction; increments the step counter.
pub fn adam_step(net: &mut Network, grads: &ParamGrads, state: &mut AdamState) -> Result<()> {
    if grads.weights.len() != net.layers.len() {
        return Err(Error::shape(net.layers.len(), grads.weights.len(), "gradient layers"));
    }
    for (l, layer) in net.layers.iter().enumerate() {
        if grads.weights[l].len() != layer.weights.len() || grads.biases[l].len() != layer.biases.len() {
            return Err(Error::shape(
                layer.weights.len(),
                grads.weights[l].len(),
                format!("gradient shape at layer {l}"),
            ));
        }
    }
    state.step += 1;
    let t = state.step as f64;
    let bc1 = 1.0 - state.beta1.powf(t);
    let bc2 = 1.0 - state.beta2.powf(t);
    net.tape.valid = false;
    for l in 0..net.layers.len() {
        let layer = &mut net.layers[l];
        adam_update_slice(
            &mut layer.weights,
            &grads.weights[l],
            &mut state.m.weights[l],
            &mut state.v.weights[l],
            state.lr,
            state.beta1,
            state.beta2,
            state.eps,
            bc1,
            bc2,
        );
        adam_update_slice(
            &mut layer.biases,
            &grads.biases[l],
            &mut state.m.biases[l],
            &mut state.v.biases[l],
            state.lr,
            state.beta1,
            state.beta2,
            state.eps,
            bc1,
            bc2,
        );
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn adam_update_slice(
    params: &mut [f64],
    grads: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    bc1: f64,
    bc2: f64,
) {
    for i in 0..params.len() {
        let g = grads[i];
        m[i] = beta1 * m[i] + (1.0 - beta1) * g;
        v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + eps);
    }
}

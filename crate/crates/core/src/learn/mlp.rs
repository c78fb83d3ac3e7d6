//! Dense feed-forward network with manual backpropagation.

use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use super::LearnError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Identity,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the activation output `y`.
    fn derivative(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Identity => 1.0,
        }
    }
}

/// One affine layer followed by an activation. `weights` is row-major
/// `outputs x inputs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
    pub activation: Activation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Layer>,
}

/// Per-layer outputs of a forward pass, input first.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub activations: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        self.activations.last().expect("cache holds at least the input")
    }
}

/// Gradients with the same layout as the network parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(net: &Mlp) -> Self {
        Self {
            weights: net.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            biases: net.layers.iter().map(|l| vec![0.0; l.biases.len()]).collect(),
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for g in self.weights.iter_mut().chain(self.biases.iter_mut()) {
            g.iter_mut().for_each(|x| *x *= factor);
        }
    }
}

impl Mlp {
    /// Builds a network with layer widths `sizes`, `hidden` activation on all
    /// but the last layer, and Xavier-uniform weights with zero biases.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], hidden: Activation, output: Activation, rng: &mut R) -> Self {
        assert!(sizes.len() >= 2, "a network needs input and output sizes");
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let (inputs, outputs) = (w[0], w[1]);
                let limit = (6.0 / (inputs + outputs) as f64).sqrt();
                let dist = Uniform::new_inclusive(-limit, limit).expect("finite limit");
                Layer {
                    inputs,
                    outputs,
                    weights: (0..inputs * outputs).map(|_| dist.sample(rng)).collect(),
                    biases: vec![0.0; outputs],
                    activation: if i + 2 == sizes.len() { output } else { hidden },
                }
            })
            .collect();
        Self { layers }
    }

    pub fn input_size(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_size(&self) -> usize {
        self.layers.last().expect("non-empty").outputs
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.biases).all(|x| x.is_finite()))
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>, LearnError> {
        self.forward_cached(input).map(|c| c.activations.into_iter().last().expect("non-empty"))
    }

    pub fn forward_cached(&self, input: &[f64]) -> Result<ForwardCache, LearnError> {
        if input.len() != self.input_size() {
            return Err(LearnError::DimensionMismatch {
                expected: self.input_size(),
                got: input.len(),
            });
        }
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(input.to_vec());
        for layer in &self.layers {
            let x = activations.last().expect("non-empty");
            let y: Vec<f64> = (0..layer.outputs)
                .map(|o| {
                    let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                    let z = row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + layer.biases[o];
                    layer.activation.apply(z)
                })
                .collect();
            activations.push(y);
        }
        Ok(ForwardCache { activations })
    }

    /// Backpropagates `grad_output` (dLoss/dOutput) through a cached pass,
    /// accumulating parameter gradients into `grads` and returning
    /// dLoss/dInput.
    pub fn backward(&self, cache: &ForwardCache, grad_output: &[f64], grads: &mut Gradients) -> Vec<f64> {
        let mut delta: Vec<f64> = grad_output.to_vec();
        for (li, layer) in self.layers.iter().enumerate().rev() {
            let y = &cache.activations[li + 1];
            let x = &cache.activations[li];
            for (d, yo) in delta.iter_mut().zip(y) {
                *d *= layer.activation.derivative(*yo);
            }
            let gw = &mut grads.weights[li];
            let gb = &mut grads.biases[li];
            let mut grad_in = vec![0.0; layer.inputs];
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                gb[o] += d;
                let row = o * layer.inputs;
                let w = &layer.weights[row..row + layer.inputs];
                let g = &mut gw[row..row + layer.inputs];
                for i in 0..layer.inputs {
                    g[i] += d * x[i];
                    grad_in[i] += d * w[i];
                }
            }
            delta = grad_in;
        }
        delta
    }

    /// dOutput/dInput contracted with `grad_output`, without touching
    /// parameter gradients.
    pub fn input_gradient(&self, cache: &ForwardCache, grad_output: &[f64]) -> Vec<f64> {
        let mut delta: Vec<f64> = grad_output.to_vec();
        for (li, layer) in self.layers.iter().enumerate().rev() {
            let y = &cache.activations[li + 1];
            for (d, yo) in delta.iter_mut().zip(y) {
                *d *= layer.activation.derivative(*yo);
            }
            let mut grad_in = vec![0.0; layer.inputs];
            for (o, &d) in delta.iter().enumerate() {
                let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                for (g, w) in grad_in.iter_mut().zip(row) {
                    *g += d * w;
                }
            }
            delta = grad_in;
        }
        delta
    }

    /// `self = (1 - tau) self + tau online`.
    pub fn soft_update(&mut self, online: &Mlp, tau: f64) {
        for (t, o) in self.layers.iter_mut().zip(&online.layers) {
            for (a, b) in t.weights.iter_mut().zip(&o.weights).chain(t.biases.iter_mut().zip(&o.biases)) {
                *a = (1.0 - tau) * *a + tau * b;
            }
        }
    }

    /// Flat parameter access (weights then biases, layer by layer), mainly
    /// for finite-difference checks.
    pub fn param_mut(&mut self, mut index: usize) -> &mut f64 {
        for layer in &mut self.layers {
            if index < layer.weights.len() {
                return &mut layer.weights[index];
            }
            index -= layer.weights.len();
            if index < layer.biases.len() {
                return &mut layer.biases[index];
            }
            index -= layer.biases.len();
        }
        panic!("parameter index out of range");
    }
}

impl Gradients {
    /// Flat view matching [`Mlp::param_mut`] ordering.
    pub fn get(&self, mut index: usize) -> f64 {
        for (w, b) in self.weights.iter().zip(&self.biases) {
            if index < w.len() {
                return w[index];
            }
            index -= w.len();
            if index < b.len() {
                return b[index];
            }
            index -= b.len();
        }
        panic!("gradient index out of range");
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn loss(net: &Mlp, x: &[f64], c: &[f64]) -> f64 {
        net.forward(x).unwrap().iter().zip(c).map(|(y, c)| y * c).sum()
    }

    #[test]
    fn zero_network_gives_zero() {
        let mut net = Mlp::new(&[3, 4, 2], Activation::Tanh, Activation::Tanh, &mut ChaCha8Rng::seed_from_u64(0));
        for l in &mut net.layers {
            l.weights.iter_mut().for_each(|w| *w = 0.0);
        }
        assert_eq!(net.forward(&[0.3, -1.0, 2.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn identity_layer_passes_input() {
        let net = Mlp {
            layers: vec![Layer {
                inputs: 3,
                outputs: 3,
                weights: vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
                biases: vec![0.0; 3],
                activation: Activation::Identity,
            }],
        };
        assert_eq!(net.forward(&[0.5, -2.0, 7.0]).unwrap(), vec![0.5, -2.0, 7.0]);
        assert!(net.forward(&[1.0]).is_err());
    }

    #[test]
    fn gradients_match_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for sizes in [vec![4, 6, 3], vec![5, 8, 8, 2], vec![3, 16, 16, 1]] {
            for out in [Activation::Tanh, Activation::Identity] {
                let mut net = Mlp::new(&sizes, Activation::Tanh, out, &mut rng);
                for l in &mut net.layers {
                    l.biases.iter_mut().for_each(|b| *b = rng.random_range(-0.5..0.5));
                }
                let x: Vec<f64> = (0..sizes[0]).map(|_| rng.random_range(-1.0..1.0)).collect();
                let c: Vec<f64> = (0..*sizes.last().unwrap()).map(|_| rng.random_range(-1.0..1.0)).collect();
                let cache = net.forward_cached(&x).unwrap();
                let mut g = Gradients::zeros_like(&net);
                let gx = net.backward(&cache, &c, &mut g);
                assert_eq!(gx, net.input_gradient(&cache, &c));
                let h = 1e-5;
                for p in 0..net.num_params() {
                    let orig = *net.param_mut(p);
                    *net.param_mut(p) = orig + h;
                    let up = loss(&net, &x, &c);
                    *net.param_mut(p) = orig - h;
                    let down = loss(&net, &x, &c);
                    *net.param_mut(p) = orig;
                    let fd = (up - down) / (2.0 * h);
                    let an = g.get(p);
                    assert!((fd - an).abs() <= 1e-4 * fd.abs().max(an.abs()).max(1e-3), "param {p}: {an} vs {fd}");
                }
                for i in 0..x.len() {
                    let mut xp = x.clone();
                    xp[i] += h;
                    let mut xm = x.clone();
                    xm[i] -= h;
                    let fd = (loss(&net, &xp, &c) - loss(&net, &xm, &c)) / (2.0 * h);
                    assert!((fd - gx[i]).abs() <= 1e-4 * fd.abs().max(gx[i].abs()).max(1e-3));
                }
            }
        }
    }

    #[test]
    fn soft_update_is_exact_blend() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let online = Mlp::new(&[2, 3, 1], Activation::Tanh, Activation::Identity, &mut rng);
        let mut target = Mlp::new(&[2, 3, 1], Activation::Tanh, Activation::Identity, &mut rng);
        let before = target.clone();
        target.soft_update(&online, 0.25);
        for ((t, b), o) in target.layers.iter().zip(&before.layers).zip(&online.layers) {
            for i in 0..t.weights.len() {
                assert_eq!(t.weights[i], 0.75 * b.weights[i] + 0.25 * o.weights[i]);
            }
        }
        target.soft_update(&online, 1.0);
        assert_eq!(target, online);
    }
}

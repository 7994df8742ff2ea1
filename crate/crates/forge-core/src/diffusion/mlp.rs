//! The noise-prediction network: a fully-connected net with tanh hidden
//! activations and a sinusoidal timestep embedding added to the input.

use rand::Rng;

pub(crate) const ARCH_DESCRIPTOR: &str = "mlp-tanh-sinusoidal-v1";

/// Noise-prediction MLP plus the corpus normalization scale it was trained
/// with. Inference is pure: output depends only on parameters and inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Denoiser {
    pub horizon: usize,
    pub hidden_width: usize,
    pub hidden_layers: usize,
    /// Flat parameter vector, layer by layer (weights row-major, then biases).
    pub params: Vec<f64>,
    /// Trajectories are divided by this before entering the net.
    pub norm_scale: f64,
    pub arch: String,
}

impl Denoiser {
    pub fn new(horizon: usize, hidden_width: usize, hidden_layers: usize) -> Self {
        let sizes = layer_sizes(horizon, hidden_width, hidden_layers);
        Self {
            horizon,
            hidden_width,
            hidden_layers,
            params: vec![0.0; param_count(&sizes)],
            norm_scale: 1.0,
            arch: ARCH_DESCRIPTOR.to_string(),
        }
    }

    /// Xavier-uniform initialization, deterministic in the rng stream.
    pub fn init_params<R: Rng>(&mut self, rng: &mut R) {
        let sizes = self.layer_sizes();
        let mut offset = 0;
        for l in 0..sizes.len() - 1 {
            let (n_in, n_out) = (sizes[l], sizes[l + 1]);
            let bound = (6.0 / (n_in + n_out) as f64).sqrt();
            for _ in 0..n_in * n_out {
                self.params[offset] = rng.random_range(-bound..bound);
                offset += 1;
            }
            offset += n_out; // biases stay zero
        }
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        layer_sizes(self.horizon, self.hidden_width, self.hidden_layers)
    }

    pub fn input_dim(&self) -> usize {
        2 * self.horizon
    }

    /// Predicted noise for a normalized noisy trajectory at diffusion step `t`.
    pub fn predict_noise(&self, noisy_flat: &[f64], t: usize) -> Vec<f64> {
        let input = embed_input(noisy_flat, t);
        forward(&self.params, &self.layer_sizes(), &input).output
    }
}

pub(crate) fn layer_sizes(horizon: usize, hidden_width: usize, hidden_layers: usize) -> Vec<usize> {
    let d = 2 * horizon;
    // The first layer sees the flattened trajectory with the timestep
    // embedding appended.
    let mut sizes = vec![2 * d];
    sizes.extend(std::iter::repeat_n(hidden_width, hidden_layers));
    sizes.push(d);
    sizes
}

pub(crate) fn param_count(sizes: &[usize]) -> usize {
    sizes
        .windows(2)
        .map(|w| w[0] * w[1] + w[1])
        .sum()
}

/// First-layer input: the flattened trajectory with a sinusoidal embedding of
/// the diffusion step appended.
pub(crate) fn embed_input(flat: &[f64], t: usize) -> Vec<f64> {
    let d = flat.len();
    let mut out = Vec::with_capacity(2 * d);
    out.extend_from_slice(flat);
    let t = t as f64;
    for i in 0..d {
        let freq = 1.0 / 10_000f64.powf(i as f64 / d as f64);
        let phase = t * freq;
        out.push(if i % 2 == 0 { phase.sin() } else { phase.cos() });
    }
    out
}

/// Per-layer activations retained for backprop.
pub(crate) struct ForwardPass {
    /// `acts[0]` is the input; `acts[l]` the post-activation of layer `l`.
    pub acts: Vec<Vec<f64>>,
    pub output: Vec<f64>,
}

pub(crate) fn forward(params: &[f64], sizes: &[usize], input: &[f64]) -> ForwardPass {
    assert_eq!(input.len(), sizes[0]);
    let last = sizes.len() - 2;
    let mut acts = vec![input.to_vec()];
    let mut offset = 0;
    for l in 0..sizes.len() - 1 {
        let (n_in, n_out) = (sizes[l], sizes[l + 1]);
        let weights = &params[offset..offset + n_in * n_out];
        let biases = &params[offset + n_in * n_out..offset + n_in * n_out + n_out];
        offset += n_in * n_out + n_out;
        let prev = &acts[l];
        let mut z = vec![0.0; n_out];
        for (o, zo) in z.iter_mut().enumerate() {
            let row = &weights[o * n_in..(o + 1) * n_in];
            let mut acc = biases[o];
            for (w, a) in row.iter().zip(prev.iter()) {
                acc += w * a;
            }
            *zo = if l < last { acc.tanh() } else { acc };
        }
        acts.push(z);
    }
    let output = acts.last().unwrap().clone();
    ForwardPass { acts, output }
}

/// Accumulate parameter gradients for `d(loss)/d(output) = grad_out`.
pub(crate) fn backward(
    params: &[f64],
    sizes: &[usize],
    pass: &ForwardPass,
    grad_out: &[f64],
    grad_params: &mut [f64],
) {
    let n_layers = sizes.len() - 1;
    let last = n_layers - 1;
    // Offsets of each layer's parameter block.
    let mut offsets = Vec::with_capacity(n_layers);
    let mut offset = 0;
    for l in 0..n_layers {
        offsets.push(offset);
        offset += sizes[l] * sizes[l + 1] + sizes[l + 1];
    }
    let mut delta = grad_out.to_vec();
    for l in (0..n_layers).rev() {
        let (n_in, n_out) = (sizes[l], sizes[l + 1]);
        let base = offsets[l];
        let act_out = &pass.acts[l + 1];
        // Hidden layers: push the gradient through tanh.
        if l < last {
            for (d, a) in delta.iter_mut().zip(act_out.iter()) {
                *d *= 1.0 - a * a;
            }
        }
        let act_in = &pass.acts[l];
        for o in 0..n_out {
            let row = &mut grad_params[base + o * n_in..base + (o + 1) * n_in];
            let d = delta[o];
            for (g, a) in row.iter_mut().zip(act_in.iter()) {
                *g += d * a;
            }
            grad_params[base + n_in * n_out + o] += d;
        }
        if l > 0 {
            let weights = &params[base..base + n_in * n_out];
            let mut next = vec![0.0; n_in];
            for (o, d) in delta.iter().enumerate() {
                let row = &weights[o * n_in..(o + 1) * n_in];
                for (n, w) in next.iter_mut().zip(row.iter()) {
                    *n += d * w;
                }
            }
            delta = next;
        }
    }
}

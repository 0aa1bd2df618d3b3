use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{features, CollisionError, Sample};
use crate::model::ReducedState;

/// Fully connected network with `tanh` hidden layers and a linear output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layer_sizes: Vec<usize>,
    /// Per layer, row-major `out x in`.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    pub activation: String,
}

impl Mlp {
    /// Xavier-uniform hidden layers and a zero output layer.
    pub fn new(layer_sizes: &[usize], seed: u64) -> Result<Self, CollisionError> {
        if layer_sizes.len() < 2 || layer_sizes.contains(&0) {
            return Err(CollisionError::InvalidNetwork(format!(
                "bad layer sizes {layer_sizes:?}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        let n_layers = layer_sizes.len() - 1;
        for (l, w) in layer_sizes.windows(2).enumerate() {
            let bound = if l + 1 == n_layers {
                0.0
            } else {
                (6.0 / (w[0] + w[1]) as f64).sqrt()
            };
            weights.push(
                (0..w[0] * w[1])
                    .map(|_| {
                        if bound > 0.0 {
                            rng.gen_range(-bound..bound)
                        } else {
                            0.0
                        }
                    })
                    .collect(),
            );
            biases.push(vec![0.0; w[1]]);
        }
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            weights,
            biases,
            activation: "tanh".into(),
        })
    }

    pub fn validate(&self) -> Result<(), CollisionError> {
        let n = self.layer_sizes.len();
        let bad = |m: String| Err(CollisionError::InvalidNetwork(m));
        if n < 2 || self.weights.len() != n - 1 || self.biases.len() != n - 1 {
            return bad("layer count mismatch".into());
        }
        if self.activation != "tanh" {
            return bad(format!("unsupported activation `{}`", self.activation));
        }
        for (l, w) in self.layer_sizes.windows(2).enumerate() {
            if self.weights[l].len() != w[0] * w[1] || self.biases[l].len() != w[1] {
                return bad(format!("layer {l} has inconsistent dimensions"));
            }
        }
        if self
            .weights
            .iter()
            .chain(&self.biases)
            .flatten()
            .any(|v| !v.is_finite())
        {
            return bad("non-finite parameter".into());
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    /// Activations of every layer (the input first, the output last).
    fn activations(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let last = self.weights.len() - 1;
        let mut acts = vec![x.to_vec()];
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut out = Vec::with_capacity(b.len());
            affine(w, b, &acts[l], &mut out);
            if l != last {
                out.iter_mut().for_each(|z| *z = tanh(*z));
            }
            acts.push(out);
        }
        acts
    }

    pub fn forward(&self, x: &[f64]) -> f64 {
        let last = self.weights.len() - 1;
        let mut a = x.to_vec();
        let mut next = Vec::new();
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            affine(w, b, &a, &mut next);
            if l != last {
                next.iter_mut().for_each(|z| *z = tanh(*z));
            }
            std::mem::swap(&mut a, &mut next);
        }
        a[0]
    }

    /// Output and its gradient with respect to the input.
    pub fn forward_with_grad(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let acts = self.activations(x);
        let last = self.weights.len() - 1;
        let mut delta = vec![1.0];
        for l in (0..=last).rev() {
            if l != last {
                for (d, a) in delta.iter_mut().zip(&acts[l + 1]) {
                    *d *= 1.0 - a * a;
                }
            }
            let n_in = acts[l].len();
            let mut prev = vec![0.0; n_in];
            for (j, d) in delta.iter().enumerate() {
                for (p, w) in prev
                    .iter_mut()
                    .zip(&self.weights[l][j * n_in..(j + 1) * n_in])
                {
                    *p += d * w;
                }
            }
            delta = prev;
        }
        (acts[last + 1][0], delta)
    }

    /// Folds `x -> (x - mean) / std` on the input and `y -> y * y_std + y_mean`
    /// on the output into the first and last layers.
    fn fold_normalization(&mut self, mean: &[f64], std: &[f64], y_mean: f64, y_std: f64) {
        let n_in = self.layer_sizes[0];
        let (w, b) = (&mut self.weights[0], &mut self.biases[0]);
        for j in 0..b.len() {
            for i in 0..n_in {
                let wi = w[j * n_in + i] / std[i];
                w[j * n_in + i] = wi;
                b[j] -= wi * mean[i];
            }
        }
        let last = self.weights.len() - 1;
        for v in &mut self.weights[last] {
            *v *= y_std;
        }
        for v in &mut self.biases[last] {
            *v = *v * y_std + y_mean;
        }
    }
}

/// `out = w * input + b` for row-major `w`.
fn affine(w: &[f64], b: &[f64], input: &[f64], out: &mut Vec<f64>) {
    let n_in = input.len();
    out.clear();
    out.extend(
        b.iter()
            .zip(w.chunks_exact(n_in))
            .map(|(bj, row)| bj + dot(row, input)),
    );
}

/// Dot product with four independent accumulators, so the additions do not
/// form one serial dependency chain.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(x, y)| x * y)
        .sum();
    for (x, y) in ca.zip(cb) {
        for i in 0..4 {
            acc[i] += x[i] * y[i];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `tanh` through `exp_m1`, accurate near zero and a few times faster than
/// the libm routine.
fn tanh(z: f64) -> f64 {
    if z.abs() > 20.0 {
        return z.signum();
    }
    let e = (2.0 * z).exp_m1();
    e / (e + 2.0)
}

/// Learned margin at `state` and its gradient with respect to the six
/// collision features.
pub fn mlp_margin(net: &Mlp, state: &ReducedState) -> (f64, [f64; 6]) {
    let (v, g) = net.forward_with_grad(&features(state));
    let mut out = [0.0; 6];
    out.copy_from_slice(&g[..6]);
    (v, out)
}

fn d_hidden() -> Vec<usize> {
    vec![32, 32]
}
fn d_epochs() -> usize {
    200
}
fn d_batch() -> usize {
    64
}
fn d_lr() -> f64 {
    0.01
}
fn d_momentum() -> f64 {
    0.9
}
fn d_samples() -> usize {
    50_000
}
fn d_seed() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(default = "d_hidden")]
    pub hidden: Vec<usize>,
    #[serde(default = "d_epochs")]
    pub epochs: usize,
    #[serde(default = "d_batch")]
    pub batch_size: usize,
    #[serde(default = "d_lr")]
    pub learning_rate: f64,
    #[serde(default = "d_momentum")]
    pub momentum: f64,
    #[serde(default = "d_samples")]
    pub samples: usize,
    #[serde(default = "d_seed")]
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden: d_hidden(),
            epochs: d_epochs(),
            batch_size: d_batch(),
            learning_rate: d_lr(),
            momentum: d_momentum(),
            samples: d_samples(),
            seed: d_seed(),
        }
    }
}

impl TrainConfig {
    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut l = vec![6];
        l.extend(&self.hidden);
        l.push(1);
        l
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Validation MSE in m^2 before the first epoch.
    pub initial_val_mse: f64,
    pub best_val_mse: f64,
    pub best_epoch: usize,
}

fn mse(net: &Mlp, x: &[[f64; 6]], y: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter()
        .zip(y)
        .map(|(xi, yi)| (net.forward(xi) - yi).powi(2))
        .sum::<f64>()
        / x.len() as f64
}

/// Trains a margin regressor by mini-batch gradient descent with momentum on
/// an 80/20 split of `data` (first 80% after a seeded shuffle). Returns the
/// parameters with the lowest validation loss, mapped back to raw units.
pub fn train_mlp(data: &[Sample], cfg: &TrainConfig) -> Result<(Mlp, TrainReport), CollisionError> {
    if data.is_empty() {
        return Err(CollisionError::EmptyDataset);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut idx: Vec<usize> = (0..data.len()).collect();
    idx.shuffle(&mut rng);
    let n_train = ((data.len() as f64 * 0.8).round() as usize).clamp(1, data.len());
    let (train_idx, val_idx) = idx.split_at(n_train);
    let val_idx = if val_idx.is_empty() {
        train_idx
    } else {
        val_idx
    };

    // normalization statistics from the training split
    let mut mean = [0.0; 6];
    let mut std = [0.0; 6];
    for &i in train_idx {
        for (m, f) in mean.iter_mut().zip(data[i].features) {
            *m += f / n_train as f64;
        }
    }
    for &i in train_idx {
        for k in 0..6 {
            std[k] += (data[i].features[k] - mean[k]).powi(2) / n_train as f64;
        }
    }
    for s in &mut std {
        *s = if *s > 1e-24 { s.sqrt() } else { 1.0 };
    }
    let y_mean = train_idx.iter().map(|&i| data[i].margin).sum::<f64>() / n_train as f64;
    let y_var = train_idx
        .iter()
        .map(|&i| (data[i].margin - y_mean).powi(2))
        .sum::<f64>()
        / n_train as f64;
    let y_std = if y_var > 1e-24 { y_var.sqrt() } else { 1.0 };

    let norm = |i: usize| {
        let mut x = [0.0; 6];
        for k in 0..6 {
            x[k] = (data[i].features[k] - mean[k]) / std[k];
        }
        (x, (data[i].margin - y_mean) / y_std)
    };
    let train: Vec<([f64; 6], f64)> = train_idx.iter().map(|&i| norm(i)).collect();
    let val_x: Vec<[f64; 6]> = val_idx.iter().map(|&i| norm(i).0).collect();
    let val_y: Vec<f64> = val_idx.iter().map(|&i| norm(i).1).collect();

    let mut net = Mlp::new(&cfg.layer_sizes(), rng.gen())?;
    let mut velocity: Vec<Vec<f64>> = net
        .weights
        .iter()
        .chain(&net.biases)
        .map(|v| vec![0.0; v.len()])
        .collect();
    let n_layers = net.weights.len();

    let initial = mse(&net, &val_x, &val_y);
    let mut best = (initial, net.clone(), 0);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let batch = cfg.batch_size.max(1);
    let mut grads: Vec<Vec<f64>> = velocity.clone();
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(batch) {
            for g in &mut grads {
                g.iter_mut().for_each(|v| *v = 0.0);
            }
            for &i in chunk {
                let (x, y) = &train[i];
                let acts = net.activations(x);
                let mut delta = vec![2.0 * (acts[n_layers][0] - y) / chunk.len() as f64];
                for l in (0..n_layers).rev() {
                    let n_in = acts[l].len();
                    for (j, d) in delta.iter().enumerate() {
                        grads[n_layers + l][j] += d;
                        for (g, a) in grads[l][j * n_in..(j + 1) * n_in].iter_mut().zip(&acts[l]) {
                            *g += d * a;
                        }
                    }
                    if l > 0 {
                        let mut prev = vec![0.0; n_in];
                        for (j, d) in delta.iter().enumerate() {
                            for (p, w) in prev
                                .iter_mut()
                                .zip(&net.weights[l][j * n_in..(j + 1) * n_in])
                            {
                                *p += d * w;
                            }
                        }
                        for (p, a) in prev.iter_mut().zip(&acts[l]) {
                            *p *= 1.0 - a * a;
                        }
                        delta = prev;
                    }
                }
            }
            for (k, (v, g)) in velocity.iter_mut().zip(&grads).enumerate() {
                let params = if k < n_layers {
                    &mut net.weights[k]
                } else {
                    &mut net.biases[k - n_layers]
                };
                for ((p, vi), gi) in params.iter_mut().zip(v.iter_mut()).zip(g) {
                    *vi = cfg.momentum * *vi - cfg.learning_rate * gi;
                    *p += *vi;
                }
            }
        }
        let loss = mse(&net, &val_x, &val_y);
        if loss < best.0 {
            best = (loss, net.clone(), epoch);
        }
    }
    let (best_loss, mut net, best_epoch) = best;
    if !(best_loss <= initial) {
        return Err(CollisionError::Diverged {
            initial_loss: initial * y_std * y_std,
            final_loss: best_loss * y_std * y_std,
        });
    }
    net.fold_normalization(&mean, &std, y_mean, y_std);
    Ok((
        net,
        TrainReport {
            initial_val_mse: initial * y_std * y_std,
            best_val_mse: best_loss * y_std * y_std,
            best_epoch,
        },
    ))
}

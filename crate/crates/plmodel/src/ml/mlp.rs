//! Fully connected regression network: sigmoid hidden layers, a linear
//! output, mean-squared-error loss, and mini-batch Adam. Everything is
//! deterministic for a fixed seed, and the analytic gradients can be
//! audited against finite differences with [`mlp_grad_check`].

use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Layer widths used for the path-loss feature schema: 8 inputs, four
/// hidden layers, one output.
pub const MLP_WIDTHS: [usize; 6] = [8, 128, 128, 64, 32, 1];

/// Training hyperparameters. A zero learning rate is legal and freezes
/// the parameters, which is occasionally useful for testing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig {
            learning_rate: 1e-3,
            epochs: 1000,
            batch_size: 256,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl MlpConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Training("learning rate must be finite and >= 0".into()));
        }
        if self.epochs < 1 {
            return Err(Error::Training("training needs at least one epoch".into()));
        }
        if self.batch_size < 1 {
            return Err(Error::Training("batch size must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Training("Adam betas must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

/// One dense layer; `weights` is row-major `[n_out][n_in]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub n_in: usize,
    pub n_out: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

/// The network. Every layer but the last applies a sigmoid; the last is
/// affine (linear output for regression in dB).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Layer>,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Initializes a network with Xavier-uniform weights
/// (`U(-sqrt(6/(n_in+n_out)), +...)`) and zero biases, deterministically
/// from the seed.
pub fn mlp_init(widths: &[usize], seed: u64) -> Result<Mlp> {
    if widths.len() < 2 {
        return Err(Error::Training(
            "a network needs an input and an output layer".into(),
        ));
    }
    if widths.iter().any(|&w| w == 0) {
        return Err(Error::Training("layer widths must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut layers = Vec::with_capacity(widths.len() - 1);
    for w in widths.windows(2) {
        let (n_in, n_out) = (w[0], w[1]);
        let limit = (6.0 / (n_in + n_out) as f64).sqrt();
        let weights = (0..n_in * n_out)
            .map(|_| rng.gen_range(-limit..limit))
            .collect();
        layers.push(Layer {
            n_in,
            n_out,
            weights,
            biases: vec![0.0; n_out],
        });
    }
    Ok(Mlp { layers })
}

impl Mlp {
    pub fn widths(&self) -> Vec<usize> {
        let mut w = vec![self.layers[0].n_in];
        w.extend(self.layers.iter().map(|l| l.n_out));
        w
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.biases.len())
            .sum()
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.layers[0].n_in {
            return Err(Error::Validation(format!(
                "input has {} values, network expects {}",
                x.len(),
                self.layers[0].n_in
            )));
        }
        Ok(())
    }

    /// Forward pass filling `acts`: `acts[0]` is the input, `acts[l+1]`
    /// the post-activation output of layer `l` (raw affine for the last).
    fn forward_into(&self, x: &[f64], acts: &mut [Vec<f64>]) {
        acts[0].clear();
        acts[0].extend_from_slice(x);
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            // Split-borrow: the input of this layer is acts[l], the
            // output buffer acts[l + 1].
            let (head, tail) = acts.split_at_mut(l + 1);
            let input = &head[l];
            let out = &mut tail[0];
            out.clear();
            for o in 0..layer.n_out {
                let row = &layer.weights[o * layer.n_in..(o + 1) * layer.n_in];
                let mut z = layer.biases[o];
                for (w, a) in row.iter().zip(input) {
                    z += w * a;
                }
                out.push(if l == last { z } else { sigmoid(z) });
            }
        }
    }

    fn new_workspace(&self) -> Vec<Vec<f64>> {
        let mut acts = vec![Vec::with_capacity(self.layers[0].n_in)];
        for l in &self.layers {
            acts.push(Vec::with_capacity(l.n_out));
        }
        acts
    }

    /// Single-row prediction. Fails if any intermediate value is
    /// non-finite, which signals a diverged model.
    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        self.check_input(x)?;
        let mut acts = self.new_workspace();
        self.forward_into(x, &mut acts);
        for (l, a) in acts.iter().enumerate().skip(1) {
            if a.iter().any(|v| !v.is_finite()) {
                return Err(Error::Training(format!(
                    "non-finite activation after layer {}: the model has diverged",
                    l - 1
                )));
            }
        }
        Ok(acts.last().unwrap()[0])
    }

    /// Batch prediction, parallel over rows. Rows are independent, so the
    /// result matches the serial loop for any thread count.
    pub fn predict(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
        use rayon::prelude::*;
        rows.par_iter().map(|r| self.forward(r)).collect()
    }

    /// Mean squared error over a set without gradient bookkeeping.
    /// Accumulates over fixed-width chunks in parallel and reduces them
    /// in chunk order, so the value is thread-count independent.
    pub fn mse(&self, xs: &[Vec<f64>], ys: &[f64]) -> Result<f64> {
        use rayon::prelude::*;
        if xs.is_empty() || xs.len() != ys.len() {
            return Err(Error::Training("loss needs matched non-empty inputs".into()));
        }
        let sums: Vec<f64> = xs
            .par_chunks(PAR_CHUNK)
            .zip(ys.par_chunks(PAR_CHUNK))
            .map(|(cx, cy)| -> Result<f64> {
                let mut acts = self.new_workspace();
                let mut s = 0.0;
                for (x, y) in cx.iter().zip(cy) {
                    self.check_input(x)?;
                    self.forward_into(x, &mut acts);
                    let pred = acts.last().unwrap()[0];
                    s += (pred - y) * (pred - y);
                }
                Ok(s)
            })
            .collect::<Result<_>>()?;
        Ok(sums.iter().sum::<f64>() / xs.len() as f64)
    }
}

/// Fixed chunk width for parallel loss accumulation. Constant chunk
/// boundaries plus an in-order serial reduction make every parallel sum
/// here reproduce exactly regardless of the rayon pool size.
const PAR_CHUNK: usize = 64;

/// Per-layer gradient buffers, shaped like the layers themselves.
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    fn zeros(net: &Mlp) -> Gradients {
        Gradients {
            weights: net.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            biases: net.layers.iter().map(|l| vec![0.0; l.biases.len()]).collect(),
        }
    }
}

/// Batch MSE loss and its analytic gradient by backpropagation. The loss
/// is the mean of squared errors over the batch, so gradients carry the
/// `2/B` factor. Work splits over fixed-width sample chunks in parallel;
/// chunk results reduce serially in chunk order, keeping the output
/// identical for any thread count.
pub fn mse_loss_and_gradient(net: &Mlp, xs: &[Vec<f64>], ys: &[f64]) -> Result<(f64, Gradients)> {
    use rayon::prelude::*;
    if xs.is_empty() || xs.len() != ys.len() {
        return Err(Error::Training("loss needs matched non-empty inputs".into()));
    }
    let b = xs.len() as f64;
    let parts: Vec<(f64, Gradients)> = xs
        .par_chunks(PAR_CHUNK)
        .zip(ys.par_chunks(PAR_CHUNK))
        .map(|(cx, cy)| chunk_loss_and_gradient(net, cx, cy, b))
        .collect::<Result<_>>()?;
    let mut loss = 0.0;
    let mut grads = Gradients::zeros(net);
    for (part_loss, part) in parts {
        loss += part_loss;
        for (dst, src) in grads.weights.iter_mut().zip(&part.weights) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += s;
            }
        }
        for (dst, src) in grads.biases.iter_mut().zip(&part.biases) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += s;
            }
        }
    }
    if !loss.is_finite() {
        return Err(Error::Training(
            "non-finite training loss: the model has diverged".into(),
        ));
    }
    Ok((loss, grads))
}

/// Serial accumulation over one sample chunk; `b` is the full batch size
/// so the per-sample loss terms already carry the final `1/B` scale.
fn chunk_loss_and_gradient(
    net: &Mlp,
    xs: &[Vec<f64>],
    ys: &[f64],
    b: f64,
) -> Result<(f64, Gradients)> {
    let n_layers = net.layers.len();
    let mut grads = Gradients::zeros(net);
    let mut acts = net.new_workspace();
    let mut deltas: Vec<Vec<f64>> = net.layers.iter().map(|l| vec![0.0; l.n_out]).collect();
    let mut loss = 0.0;

    for (x, y) in xs.iter().zip(ys) {
        net.check_input(x)?;
        net.forward_into(x, &mut acts);
        let pred = acts[n_layers][0];
        let err = pred - y;
        loss += err * err / b;

        // Output layer is linear: dL/dz = 2 (pred - y) / B.
        deltas[n_layers - 1][0] = 2.0 * err / b;
        // Hidden layers: propagate through the weights, then apply the
        // sigmoid derivative a(1-a) of the layer's own activation.
        for l in (0..n_layers - 1).rev() {
            let upper = &net.layers[l + 1];
            let (lower_d, upper_d) = deltas.split_at_mut(l + 1);
            let d_here = &mut lower_d[l];
            let d_up = &upper_d[0];
            for (i, d) in d_here.iter_mut().enumerate() {
                let mut s = 0.0;
                for o in 0..upper.n_out {
                    s += d_up[o] * upper.weights[o * upper.n_in + i];
                }
                let a = acts[l + 1][i];
                *d = s * a * (1.0 - a);
            }
        }
        for l in 0..n_layers {
            let layer = &net.layers[l];
            let d = &deltas[l];
            let input = &acts[l];
            let gw = &mut grads.weights[l];
            let gb = &mut grads.biases[l];
            for o in 0..layer.n_out {
                let row = &mut gw[o * layer.n_in..(o + 1) * layer.n_in];
                for (slot, a) in row.iter_mut().zip(input) {
                    *slot += d[o] * a;
                }
                gb[o] += d[o];
            }
        }
    }
    Ok((loss, grads))
}

/// Loss curve entry for one epoch. `train_mse` is the sample-weighted
/// mean of the epoch's batch losses, each measured on the parameters the
/// batch was trained from (the usual streaming training-loss curve);
/// `val_mse` is a full pass over the validation set after the epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_mse: f64,
    pub val_mse: Option<f64>,
}

/// Trains the network in place with mini-batch Adam and returns the loss
/// history (one entry per epoch). Batches reshuffle every epoch from a
/// generator seeded by `seed`, so training is reproducible to the bit.
/// A non-finite loss aborts with a diagnostic instead of continuing.
pub fn mlp_train(
    net: &mut Mlp,
    x_train: &[Vec<f64>],
    y_train: &[f64],
    validation: Option<(&[Vec<f64>], &[f64])>,
    cfg: &MlpConfig,
    seed: u64,
) -> Result<Vec<EpochStats>> {
    cfg.validate()?;
    if x_train.is_empty() || x_train.len() != y_train.len() {
        return Err(Error::Training("training needs matched non-empty inputs".into()));
    }
    let n = x_train.len();
    let mut m = Gradients::zeros(net);
    let mut v = Gradients::zeros(net);
    let mut t: u64 = 0;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut history = Vec::with_capacity(cfg.epochs);

    let mut bx: Vec<Vec<f64>> = Vec::new();
    let mut by: Vec<f64> = Vec::new();

    for epoch in 0..cfg.epochs {
        // Fisher-Yates reshuffle per epoch.
        for i in (1..n).rev() {
            let j = rng.gen_range(0..=i);
            order.swap(i, j);
        }
        let mut epoch_sq_sum = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            bx.clear();
            by.clear();
            for &i in chunk {
                bx.push(x_train[i].clone());
                by.push(y_train[i]);
            }
            let (loss, g) = mse_loss_and_gradient(net, &bx, &by)?;
            if !loss.is_finite() {
                return Err(Error::Training(format!(
                    "training diverged at epoch {epoch}"
                )));
            }
            epoch_sq_sum += loss * chunk.len() as f64;
            t += 1;
            let bc1 = 1.0 - cfg.beta1.powi(t as i32);
            let bc2 = 1.0 - cfg.beta2.powi(t as i32);
            for l in 0..net.layers.len() {
                let update = |p: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64]| {
                    for k in 0..p.len() {
                        m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g[k];
                        v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g[k] * g[k];
                        let m_hat = m[k] / bc1;
                        let v_hat = v[k] / bc2;
                        p[k] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
                    }
                };
                update(
                    &mut net.layers[l].weights,
                    &g.weights[l],
                    &mut m.weights[l],
                    &mut v.weights[l],
                );
                update(
                    &mut net.layers[l].biases,
                    &g.biases[l],
                    &mut m.biases[l],
                    &mut v.biases[l],
                );
            }
        }
        let train_mse = epoch_sq_sum / n as f64;
        let val_mse = match validation {
            Some((vx, vy)) => Some(net.mse(vx, vy)?),
            None => None,
        };
        history.push(EpochStats {
            epoch,
            train_mse,
            val_mse,
        });
    }
    Ok(history)
}

/// Audits the backpropagation gradients against central finite
/// differences (step `1e-6`) on up to `max_params` randomly chosen
/// parameters (seeded). Returns the maximum relative error
/// `|g_a - g_n| / max(|g_a| + |g_n|, 1e-12)`.
pub fn mlp_grad_check(
    net: &Mlp,
    xs: &[Vec<f64>],
    ys: &[f64],
    max_params: usize,
    seed: u64,
) -> Result<f64> {
    const H: f64 = 1e-6;
    let (_, analytic) = mse_loss_and_gradient(net, xs, ys)?;

    // Flat index space over (layer, weight|bias, offset).
    let mut slots: Vec<(usize, bool, usize)> = Vec::new();
    for (l, layer) in net.layers.iter().enumerate() {
        slots.extend((0..layer.weights.len()).map(|k| (l, false, k)));
        slots.extend((0..layer.biases.len()).map(|k| (l, true, k)));
    }
    let m = max_params.max(1).min(slots.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Partial Fisher-Yates: the first m entries become the sample.
    for i in 0..m {
        let j = rng.gen_range(i..slots.len());
        slots.swap(i, j);
    }

    let mut worst: f64 = 0.0;
    let mut probe = net.clone();
    for &(l, is_bias, k) in &slots[..m] {
        let read = |net: &Mlp| -> f64 {
            if is_bias {
                net.layers[l].biases[k]
            } else {
                net.layers[l].weights[k]
            }
        };
        let write = |net: &mut Mlp, val: f64| {
            if is_bias {
                net.layers[l].biases[k] = val;
            } else {
                net.layers[l].weights[k] = val;
            }
        };
        let orig = read(net);
        write(&mut probe, orig + H);
        let up = probe.mse(xs, ys)?;
        write(&mut probe, orig - H);
        let down = probe.mse(xs, ys)?;
        write(&mut probe, orig);
        let g_n = (up - down) / (2.0 * H);
        let g_a = if is_bias {
            analytic.biases[l][k]
        } else {
            analytic.weights[l][k]
        };
        let rel = (g_a - g_n).abs() / (g_a.abs() + g_n.abs()).max(1e-12);
        worst = worst.max(rel);
    }
    Ok(worst)
}

//! Denoiser regression: minimise `E[lambda(t) |x0_hat(t, x_t, x1) - x0|^2]`
//! with `lambda = 1 / c_out^2`, by plain stochastic gradient descent.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::bridge::{forward_with_noise, MomentStats};
use crate::rng::{fill_standard_normal, seeded};
use crate::schedule::BridgeSchedule;
use crate::{Error, Result};

use super::{Gradients, PreconditionedNet, TinyNet};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub steps: usize,
    pub t_min: f64,
    pub t_max: f64,
    pub seed: u64,
    pub hidden_width: usize,
    /// Coordinates per network chunk; `None` uses the whole data vector.
    pub chunk: Option<usize>,
    /// Random chunks drawn from each item per step; `None` uses all of them.
    pub chunks_per_item: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 5e-5,
            batch_size: 8,
            steps: 1000,
            t_min: 0.001,
            t_max: 0.999,
            seed: 0,
            hidden_width: 64,
            chunk: None,
            chunks_per_item: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.t_min && self.t_min < self.t_max && self.t_max < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "need 0 < t_min < t_max < 1, got [{}, {}]",
                self.t_min, self.t_max
            )));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "learning rate {} must be finite and non-negative",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 || self.hidden_width == 0 {
            return Err(Error::InvalidConfig("batch size and hidden width must be positive".into()));
        }
        if self.chunk == Some(0) || self.chunks_per_item == Some(0) {
            return Err(Error::InvalidConfig("chunk settings must be positive".into()));
        }
        Ok(())
    }
}

/// One minibatch flattened into network rows (one row per chunk).
#[derive(Debug, Clone)]
pub struct TrainingBatch {
    inputs: Array2<f64>,
    targets: Array2<f64>,
    skip: Array2<f64>,
    c_out: Vec<f64>,
    /// `lambda / (items * chunks in the item)`.
    weight: Vec<f64>,
}

impl TrainingBatch {
    pub fn rows(&self) -> usize {
        self.inputs.nrows()
    }
}

/// Draws `x_t` for each item at its time and assembles network rows.
pub fn draw_batch<R: Rng + ?Sized>(
    model: &PreconditionedNet,
    items: &[(&[f64], &[f64])],
    t_draws: &[f64],
    chunks_per_item: Option<usize>,
    rng: &mut R,
) -> Result<TrainingBatch> {
    if items.is_empty() || items.len() != t_draws.len() {
        return Err(Error::shape(items.len(), t_draws.len()));
    }
    let k = model.chunk();
    let mut rows: Vec<(usize, usize, f64)> = Vec::new();
    let mut batch_xt: Vec<Vec<f64>> = Vec::with_capacity(items.len());
    let mut coeffs = Vec::with_capacity(items.len());
    for (i, ((x0, x1), &t)) in items.iter().zip(t_draws).enumerate() {
        if x0.len() != x1.len() || x0.is_empty() || x0.len() % k != 0 {
            return Err(Error::shape(x0.len(), x1.len()));
        }
        let p = model.coeffs(t)?;
        let mut noise = vec![0.0; x0.len()];
        fill_standard_normal(rng, &mut noise);
        batch_xt.push(forward_with_noise(x0, x1, &noise, t, &model.schedule)?);
        let n_chunks = x0.len() / k;
        let picked: Vec<usize> = match chunks_per_item {
            Some(m) if m < n_chunks => (0..m).map(|_| rng.random_range(0..n_chunks)).collect(),
            _ => (0..n_chunks).collect(),
        };
        let w = p.loss_weight / (items.len() * picked.len()) as f64;
        rows.extend(picked.into_iter().map(|c| (i, c, w)));
        coeffs.push(p);
    }

    let n = rows.len();
    let mut inputs = Array2::zeros((n, 2 * k + 1));
    let mut targets = Array2::zeros((n, k));
    let mut skip = Array2::zeros((n, k));
    let mut c_out = Vec::with_capacity(n);
    let mut weight = Vec::with_capacity(n);
    for (r, &(i, c, w)) in rows.iter().enumerate() {
        let (x0, x1) = items[i];
        let xt = &batch_xt[i];
        let p = &coeffs[i];
        for j in 0..k {
            let idx = c * k + j;
            inputs[[r, j]] = p.c_in * xt[idx];
            inputs[[r, k + j]] = x1[idx];
            targets[[r, j]] = x0[idx];
            skip[[r, j]] = p.c_skip * xt[idx];
        }
        inputs[[r, 2 * k]] = p.c_noise;
        c_out.push(p.c_out);
        weight.push(w);
    }
    Ok(TrainingBatch {
        inputs,
        targets,
        skip,
        c_out,
        weight,
    })
}

/// Weighted loss of a drawn batch and its exact parameter gradient.
pub fn batch_loss(net: &TinyNet, batch: &TrainingBatch) -> (f64, Gradients) {
    let cache = net.forward_cached(batch.inputs.view());
    let mut grad = Array2::zeros(cache.output.raw_dim());
    let mut total = 0.0;
    for r in 0..batch.rows() {
        let (c_out, w) = (batch.c_out[r], batch.weight[r]);
        for j in 0..batch.targets.ncols() {
            let pred = batch.skip[[r, j]] + c_out * cache.output[[r, j]];
            let resid = pred - batch.targets[[r, j]];
            total += w * resid * resid;
            // d/dF of lambda |c_skip x_t + c_out F - x0|^2
            grad[[r, j]] = 2.0 * w * resid * c_out;
        }
    }
    (total, net.backward(&cache, grad.view()))
}

/// Loss over `batch` with fresh kernel draws at the given times.
pub fn loss<R: Rng + ?Sized>(
    model: &PreconditionedNet,
    batch: &[(&[f64], &[f64])],
    t_draws: &[f64],
    rng: &mut R,
) -> Result<(f64, Gradients)> {
    let drawn = draw_batch(model, batch, t_draws, None, rng)?;
    Ok(batch_loss(&model.net, &drawn))
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: PreconditionedNet,
    /// Minibatch loss before each update.
    pub losses: Vec<f64>,
}

/// Trains a fresh network on `dataset` (pairs of `(x0, x1)`).
///
/// Items are visited in a reshuffled order each epoch; times are uniform on
/// `[t_min, t_max]`. Reproducible given `config.seed`.
pub fn train<A, B>(
    dataset: &[(A, B)],
    config: &TrainConfig,
    sched: &BridgeSchedule,
    moments: &MomentStats,
) -> Result<TrainOutcome>
where
    A: AsRef<[f64]>,
    B: AsRef<[f64]>,
{
    train_with_progress(dataset, config, sched, moments, |_, _| {})
}

pub fn train_with_progress<A, B, F>(
    dataset: &[(A, B)],
    config: &TrainConfig,
    sched: &BridgeSchedule,
    moments: &MomentStats,
    mut progress: F,
) -> Result<TrainOutcome>
where
    A: AsRef<[f64]>,
    B: AsRef<[f64]>,
    F: FnMut(usize, f64),
{
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::InsufficientData("training set is empty".into()));
    }
    let dim = dataset[0].0.as_ref().len();
    let chunk = config.chunk.unwrap_or(dim);
    let mut rng = seeded(config.seed);
    let net = TinyNet::for_chunk(chunk, config.hidden_width, &mut rng)?;
    let mut model = PreconditionedNet::new(net, *sched, *moments)?;

    let mut order: Vec<usize> = (0..dataset.len()).collect();
    order.shuffle(&mut rng);
    let mut cursor = 0;
    let mut losses = Vec::with_capacity(config.steps);
    for step in 0..config.steps {
        let mut items = Vec::with_capacity(config.batch_size);
        for _ in 0..config.batch_size {
            if cursor == order.len() {
                order.shuffle(&mut rng);
                cursor = 0;
            }
            let (a, b) = &dataset[order[cursor]];
            items.push((a.as_ref(), b.as_ref()));
            cursor += 1;
        }
        let t_draws: Vec<f64> = (0..items.len())
            .map(|_| rng.random_range(config.t_min..=config.t_max))
            .collect();
        let batch = draw_batch(&model, &items, &t_draws, config.chunks_per_item, &mut rng)?;
        let (value, grads) = batch_loss(&model.net, &batch);
        if !value.is_finite() {
            return Err(Error::Divergence { step, loss: value });
        }
        losses.push(value);
        progress(step, value);
        model.net.sgd_step(&grads, config.learning_rate);
        if !model.net.is_finite() {
            return Err(Error::Divergence { step, loss: value });
        }
    }
    Ok(TrainOutcome { model, losses })
}

//! End-to-end training loop with freshly sampled mini-batches.

use std::fmt::Write as _;

use ndarray::Array2;

use super::layer::Binarization;
use super::loss::{batch_loss, batch_loss_and_gradients};
use super::model::{ArchMeta, Architecture, FeedbackModel};
use super::optim::{Optimizer, OptimizerState};
use crate::channel::{dft_pilot_matrix, ChannelModel, ChannelSpec, PilotSpec};
use crate::error::{Error, Result};
use crate::numerics::{Complex64, ComplexMatrix, RngStream};

// Stream ids under the training seed.
const STREAM_INIT: u64 = 1;
const STREAM_PROBE: u64 = 2;
const STREAM_BATCH: u64 = 3;
const STREAM_QUANT: u64 = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub iterations: usize,
    pub optimizer: Optimizer,
    pub seed: u64,
    /// Held-out probe cadence (iterations) and size (samples).
    pub probe_every: usize,
    pub probe_size: usize,
    /// Stop after this many probes without improvement; `None` runs all iterations.
    pub patience: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 2000,
            learning_rate: 1e-3,
            iterations: 20_000,
            optimizer: Optimizer::adam(),
            seed: 0,
            probe_every: 200,
            probe_size: 256,
            patience: Some(10),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size", "must be at least 1"));
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::invalid("learning_rate", "must be positive"));
        }
        if self.probe_every == 0 {
            return Err(Error::invalid("probe_every", "must be at least 1"));
        }
        if self.probe_size == 0 {
            return Err(Error::invalid("probe_size", "must be at least 1"));
        }
        if let Optimizer::Adam { beta1, beta2, eps } = self.optimizer {
            if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) || !(eps > 0.0) {
                return Err(Error::invalid(
                    "optimizer",
                    "adam needs beta1, beta2 in [0, 1) and eps > 0",
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    /// Mean stochastic training loss over the iterations since the previous row
    /// (NaN for the row at iteration 0).
    pub train_loss: f64,
    /// Mean effective gain on the held-out probe with deterministic bits.
    pub probe_gain: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters of the best probe evaluation.
    pub model: FeedbackModel,
    pub trace: Vec<TraceRow>,
    pub best_iteration: usize,
    pub iterations_run: usize,
}

/// `iteration,train_loss,probe_gain` with a header row.
pub fn trace_csv(trace: &[TraceRow]) -> String {
    let mut s = String::from("iteration,train_loss,probe_gain\n");
    for r in trace {
        let _ = writeln!(s, "{},{},{}", r.iteration, r.train_loss, r.probe_gain);
    }
    s
}

/// Draws `n` channel/observation pairs; returns encoder inputs (one row each) and channels.
pub fn synthesize_batch(
    channel: &ChannelModel,
    pilots: &PilotSpec,
    p: &ComplexMatrix,
    n: usize,
    rng: &mut RngStream,
) -> (Array2<f64>, Vec<ComplexMatrix>) {
    let nr = channel.spec().n_rx;
    let l = pilots.length;
    let half = nr * l;
    let gain = pilots.pilot_energy.sqrt();
    let sigma = pilots.noise_var.sqrt();
    let mut x = Array2::zeros((n, 2 * half));
    let mut hs = Vec::with_capacity(n);
    for k in 0..n {
        let ch = channel.sample(rng);
        let hp = &ch.h * p;
        let mut row = x.row_mut(k);
        // column-major vec(Y): entry (r, c) lands at c * N_r + r
        for c in 0..l {
            for r in 0..nr {
                let y: Complex64 = hp[(r, c)] * gain + rng.complex_normal() * sigma;
                row[c * nr + r] = y.re;
                row[half + c * nr + r] = y.im;
            }
        }
        hs.push(ch.h);
    }
    (x, hs)
}

/// Trains a fresh model for the given link; deterministic given `cfg.seed`.
pub fn train(
    spec: &ChannelSpec,
    pilots: &PilotSpec,
    arch: &Architecture,
    bits: usize,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    let meta = ArchMeta {
        n_tx: spec.n_tx,
        n_rx: spec.n_rx,
        pilot_len: pilots.length,
    };
    let model = FeedbackModel::new(meta, bits, arch, &mut RngStream::new(cfg.seed, STREAM_INIT))?;
    train_from(model, spec, pilots, cfg)
}

/// Continues training from an existing model.
pub fn train_from(
    mut model: FeedbackModel,
    spec: &ChannelSpec,
    pilots: &PilotSpec,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    pilots.validate()?;
    let meta = model.meta();
    if meta.n_tx != spec.n_tx || meta.n_rx != spec.n_rx || meta.pilot_len != pilots.length {
        return Err(Error::shape(
            "train",
            format!("{meta:?}"),
            format!("N_t={} N_r={} L={}", spec.n_tx, spec.n_rx, pilots.length),
        ));
    }
    let channel = ChannelModel::new(spec.clone())?;
    let p = dft_pilot_matrix(spec.n_tx, pilots.length);

    let (probe_x, probe_h) = synthesize_batch(
        &channel,
        pilots,
        &p,
        cfg.probe_size,
        &mut RngStream::new(cfg.seed, STREAM_PROBE),
    );
    let probe_refs: Vec<&ComplexMatrix> = probe_h.iter().collect();
    let mut unused = RngStream::new(cfg.seed, 0);
    let mut probe = |m: &FeedbackModel| -> Result<f64> {
        Ok(-batch_loss(
            m,
            probe_x.clone(),
            &probe_refs,
            &mut unused,
            Binarization::Deterministic,
        )?)
    };

    let mut optimizer = OptimizerState::new(cfg.optimizer, cfg.learning_rate, &model);
    let batch_root = RngStream::new(cfg.seed, STREAM_BATCH);
    let quant_root = RngStream::new(cfg.seed, STREAM_QUANT);

    let start = probe(&model)?;
    let mut trace = vec![TraceRow {
        iteration: 0,
        train_loss: f64::NAN,
        probe_gain: start,
    }];
    let mut best = (start, 0usize, model.flat_params());
    let mut stale = 0usize;
    let mut loss_acc = 0.0;
    let mut loss_count = 0usize;
    let mut iterations_run = 0;

    for it in 1..=cfg.iterations {
        let mut data_rng = batch_root.derive(it as u64);
        let mut quant_rng = quant_root.derive(it as u64);
        let (x, hs) = synthesize_batch(&channel, pilots, &p, cfg.batch_size, &mut data_rng);
        let refs: Vec<&ComplexMatrix> = hs.iter().collect();
        let (loss, grads) =
            batch_loss_and_gradients(&model, x, &refs, &mut quant_rng, Binarization::Stochastic)?;
        if !loss.is_finite() || !grads.is_finite() {
            return Err(Error::NonFiniteLoss {
                iteration: it,
                detail: format!("loss = {loss}, gradients finite = {}", grads.is_finite()),
            });
        }
        optimizer.apply(&mut model, &grads);
        loss_acc += loss;
        loss_count += 1;
        iterations_run = it;

        if it % cfg.probe_every == 0 || it == cfg.iterations {
            let gain = probe(&model)?;
            trace.push(TraceRow {
                iteration: it,
                train_loss: loss_acc / loss_count as f64,
                probe_gain: gain,
            });
            loss_acc = 0.0;
            loss_count = 0;
            if gain > best.0 {
                best = (gain, it, model.flat_params());
                stale = 0;
            } else {
                stale += 1;
                if cfg.patience.is_some_and(|p| stale >= p) {
                    break;
                }
            }
        }
    }

    model.set_flat_params(&best.2)?;
    Ok(TrainOutcome {
        model,
        trace,
        best_iteration: best.1,
        iterations_run,
    })
}

//! Negative average effective gain and its gradient with respect to every parameter.

use ndarray::{Array2, ArrayView1, ArrayViewMut1};

use super::layer::{backward, forward, Binarization, LayerGrad};
use super::model::FeedbackModel;
use crate::error::{Error, Result};
use crate::numerics::{Complex64, ComplexMatrix, RngStream};

/// One training tuple: the true channel (used by the loss) and the pilot observation
/// it produced (the only thing the receiver network sees).
#[derive(Debug, Clone)]
pub struct TrainingSample {
    pub h: ComplexMatrix,
    pub y: ComplexMatrix,
}

/// Gradients laid out like the model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub encoder: Vec<LayerGrad>,
    pub decoder: Vec<LayerGrad>,
}

impl Gradients {
    pub(crate) fn slices(&self) -> Vec<&[f64]> {
        self.encoder
            .iter()
            .chain(&self.decoder)
            .flat_map(|g| {
                [
                    g.weight.as_slice().expect("standard layout"),
                    g.bias.as_slice().expect("standard layout"),
                ]
            })
            .collect()
    }

    pub(crate) fn visit(&self, mut f: impl FnMut(&[f64])) {
        for s in self.slices() {
            f(s);
        }
    }

    /// Flattened in the same order as [`FeedbackModel::flat_params`].
    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        self.visit(|s| out.extend_from_slice(s));
        out
    }

    pub fn is_finite(&self) -> bool {
        let mut ok = true;
        self.visit(|s| ok &= s.iter().all(|v| v.is_finite()));
        ok
    }
}

/// `||H w||²` for the real beamformer layout `[Re w, Im w]`, plus `G w = H^H H w`.
fn gain_and_direction(h: &ComplexMatrix, w_real: ArrayView1<f64>) -> (f64, Vec<Complex64>) {
    let nt = h.cols();
    let w: Vec<Complex64> = (0..nt)
        .map(|k| Complex64::new(w_real[k], w_real[nt + k]))
        .collect();
    let mut gw = vec![Complex64::new(0.0, 0.0); nt];
    let mut gain = 0.0;
    for row in h.as_slice().chunks_exact(nt) {
        let u: Complex64 = row.iter().zip(&w).map(|(a, b)| a * b).sum();
        gain += u.norm_sqr();
        for (acc, a) in gw.iter_mut().zip(row) {
            *acc += a.conj() * u;
        }
    }
    (gain, gw)
}

fn check_batch(model: &FeedbackModel, hs: &[&ComplexMatrix]) -> Result<()> {
    if hs.is_empty() {
        return Err(Error::invalid("batch", "empty batch"));
    }
    let meta = model.meta();
    for h in hs {
        if h.shape() != (meta.n_rx, meta.n_tx) {
            return Err(Error::shape(
                "loss_and_gradients",
                format!("H {}x{}", meta.n_rx, meta.n_tx),
                format!("{}x{}", h.rows(), h.cols()),
            ));
        }
    }
    Ok(())
}

/// Loss `-(1/n) Σ ||H_k g_T(g_R(ỹ_k))||²` on stacked encoder inputs `x`.
pub(crate) fn batch_loss_and_gradients(
    model: &FeedbackModel,
    x: Array2<f64>,
    hs: &[&ComplexMatrix],
    rng: &mut RngStream,
    binarization: Binarization,
) -> Result<(f64, Gradients)> {
    check_batch(model, hs)?;
    let n = hs.len();
    let enc = forward(&model.encoder, x, binarization, rng)?;
    let dec = forward(&model.decoder, enc.output().clone(), binarization, rng)?;
    let w = dec.output();
    let nt = model.meta().n_tx;

    let mut total = 0.0;
    let mut grad_w = Array2::<f64>::zeros(w.raw_dim());
    let scale = -2.0 / n as f64;
    for (k, h) in hs.iter().enumerate() {
        let (gain, gw) = gain_and_direction(h, w.row(k));
        total += gain;
        let mut row: ArrayViewMut1<f64> = grad_w.row_mut(k);
        for j in 0..nt {
            row[j] = scale * gw[j].re;
            row[nt + j] = scale * gw[j].im;
        }
    }
    let (decoder, grad_b) = backward(&model.decoder, &dec, grad_w);
    let (encoder, _) = backward(&model.encoder, &enc, grad_b);
    Ok((-total / n as f64, Gradients { encoder, decoder }))
}

/// Forward-only version of [`batch_loss_and_gradients`].
pub(crate) fn batch_loss(
    model: &FeedbackModel,
    x: Array2<f64>,
    hs: &[&ComplexMatrix],
    rng: &mut RngStream,
    binarization: Binarization,
) -> Result<f64> {
    check_batch(model, hs)?;
    let enc = forward(&model.encoder, x, binarization, rng)?;
    let dec = forward(&model.decoder, enc.into_output(), binarization, rng)?;
    let w = dec.output();
    let total: f64 = hs
        .iter()
        .enumerate()
        .map(|(k, h)| gain_and_direction(h, w.row(k)).0)
        .sum();
    Ok(-total / hs.len() as f64)
}

/// Loss and straight-through gradients over a batch of `(H, Y)` tuples.
///
/// With [`Binarization::Stochastic`] the forward pass quantizes with fresh noise from
/// `rng`; the backward pass always treats the quantizer as the identity.
pub fn loss_and_gradients(
    model: &FeedbackModel,
    batch: &[TrainingSample],
    rng: &mut RngStream,
    binarization: Binarization,
) -> Result<(f64, Gradients)> {
    let ys: Vec<&ComplexMatrix> = batch.iter().map(|s| &s.y).collect();
    let hs: Vec<&ComplexMatrix> = batch.iter().map(|s| &s.h).collect();
    let x = model.encoder_batch(&ys)?;
    batch_loss_and_gradients(model, x, &hs, rng, binarization)
}

/// Loss only.
pub fn loss(
    model: &FeedbackModel,
    batch: &[TrainingSample],
    rng: &mut RngStream,
    binarization: Binarization,
) -> Result<f64> {
    let ys: Vec<&ComplexMatrix> = batch.iter().map(|s| &s.y).collect();
    let hs: Vec<&ComplexMatrix> = batch.iter().map(|s| &s.h).collect();
    let x = model.encoder_batch(&ys)?;
    batch_loss(model, x, &hs, rng, binarization)
}

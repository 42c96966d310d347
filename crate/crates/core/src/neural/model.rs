use ndarray::{Array1, Array2, ArrayView1};

use super::layer::{
    sign_binarize, stochastic_binarize, Activation, Binarization, Layer, MIN_NORMALIZE_NORM,
};
use crate::error::{Error, Result};
use crate::numerics::{join_real_imag, split_real_imag, Complex64, ComplexMatrix, RngStream};

/// Link dimensions a model was built for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ArchMeta {
    pub n_tx: usize,
    pub n_rx: usize,
    pub pilot_len: usize,
}

impl ArchMeta {
    /// Receiver network input width `2·L·N_r`.
    pub fn encoder_inputs(&self) -> usize {
        2 * self.pilot_len * self.n_rx
    }

    /// Transmitter network output width `2·N_t`.
    pub fn decoder_outputs(&self) -> usize {
        2 * self.n_tx
    }
}

/// Hidden-layer widths of both networks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Architecture {
    pub encoder_hidden: Vec<usize>,
    pub decoder_hidden: Vec<usize>,
}

impl Architecture {
    /// Receiver widths `(50, 30, 20)·N_t`, transmitter mirrored as `(20, 30, 50)·N_t`.
    pub fn default_for(n_tx: usize) -> Self {
        Self {
            encoder_hidden: vec![50 * n_tx, 30 * n_tx, 20 * n_tx],
            decoder_hidden: vec![20 * n_tx, 30 * n_tx, 50 * n_tx],
        }
    }
}

/// Receiver network `g_R` (pilot observation to `B` bipolar bits) and transmitter
/// network `g_T` (bits to a unit-norm beamformer).
#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackModel {
    meta: ArchMeta,
    bits: usize,
    pub(crate) encoder: Vec<Layer>,
    pub(crate) decoder: Vec<Layer>,
}

impl FeedbackModel {
    /// Glorot-initialized model with ReLU hidden layers.
    pub fn new(
        meta: ArchMeta,
        bits: usize,
        arch: &Architecture,
        rng: &mut RngStream,
    ) -> Result<Self> {
        if bits == 0 {
            return Err(Error::invalid("bits", "must be at least 1"));
        }
        if meta.n_tx == 0 || meta.n_rx == 0 || meta.pilot_len == 0 {
            return Err(Error::invalid(
                "arch",
                "antenna counts and pilot length must be positive",
            ));
        }
        if arch
            .encoder_hidden
            .iter()
            .chain(&arch.decoder_hidden)
            .any(|&w| w == 0)
        {
            return Err(Error::invalid("arch", "hidden widths must be positive"));
        }
        let encoder = build_stack(
            meta.encoder_inputs(),
            &arch.encoder_hidden,
            bits,
            Activation::StochasticBinarize,
            rng,
        );
        let decoder = build_stack(
            bits,
            &arch.decoder_hidden,
            meta.decoder_outputs(),
            Activation::L2Normalize,
            rng,
        );
        Self::from_layers(meta, bits, encoder, decoder)
    }

    /// Assembles a model from explicit layers, checking the structural invariants.
    pub fn from_layers(
        meta: ArchMeta,
        bits: usize,
        encoder: Vec<Layer>,
        decoder: Vec<Layer>,
    ) -> Result<Self> {
        let model = Self {
            meta,
            bits,
            encoder,
            decoder,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        check_stack(
            "encoder",
            &self.encoder,
            self.meta.encoder_inputs(),
            self.bits,
        )?;
        check_stack(
            "decoder",
            &self.decoder,
            self.bits,
            self.meta.decoder_outputs(),
        )?;
        if self.encoder.last().map(|l| l.activation) != Some(Activation::StochasticBinarize) {
            return Err(Error::invalid(
                "encoder",
                "final layer must be tanh + stochastic binarization",
            ));
        }
        if self.decoder.last().map(|l| l.activation) != Some(Activation::L2Normalize) {
            return Err(Error::invalid(
                "decoder",
                "final layer must be l2-normalize",
            ));
        }
        let misplaced = |layers: &[Layer]| {
            layers[..layers.len() - 1].iter().any(|l| {
                matches!(
                    l.activation,
                    Activation::StochasticBinarize | Activation::L2Normalize
                )
            })
        };
        if misplaced(&self.encoder) || misplaced(&self.decoder) {
            return Err(Error::invalid(
                "arch",
                "binarize/normalize are output-only activations",
            ));
        }
        if !self
            .encoder
            .iter()
            .chain(&self.decoder)
            .all(Layer::is_finite)
        {
            return Err(Error::invalid("parameters", "non-finite parameter"));
        }
        Ok(())
    }

    pub fn meta(&self) -> ArchMeta {
        self.meta
    }

    pub fn bits(&self) -> usize {
        self.bits
    }

    pub fn encoder_layers(&self) -> &[Layer] {
        &self.encoder
    }

    pub fn decoder_layers(&self) -> &[Layer] {
        &self.decoder
    }

    /// Output widths of every encoder layer, e.g. `[400, 240, 160, 6]`.
    pub fn encoder_widths(&self) -> Vec<usize> {
        self.encoder.iter().map(Layer::outputs).collect()
    }

    pub fn decoder_widths(&self) -> Vec<usize> {
        self.decoder.iter().map(Layer::outputs).collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.encoder
            .iter()
            .chain(&self.decoder)
            .map(Layer::parameter_count)
            .sum()
    }

    /// Real encoder input `[Re(vec Y), Im(vec Y)]`.
    pub fn encoder_input(&self, y: &ComplexMatrix) -> Result<Vec<f64>> {
        if y.shape() != (self.meta.n_rx, self.meta.pilot_len) {
            return Err(Error::shape(
                "encoder_input",
                format!("{}x{}", self.meta.n_rx, self.meta.pilot_len),
                format!("{}x{}", y.rows(), y.cols()),
            ));
        }
        Ok(split_real_imag(&y.vectorize()))
    }

    /// Receiver network: ReLU hidden layers, then `tanh` and binarization.
    pub fn encoder_forward(
        &self,
        y_real: &[f64],
        rng: &mut RngStream,
        mode: Binarization,
    ) -> Result<Vec<f64>> {
        if y_real.len() != self.meta.encoder_inputs() {
            return Err(Error::shape(
                "encoder_forward",
                self.meta.encoder_inputs(),
                y_real.len(),
            ));
        }
        let mut x = Array1::from(y_real.to_vec());
        for layer in &self.encoder {
            x = apply_single(layer, x.view())?;
        }
        Ok(match mode {
            Binarization::Stochastic => x.iter().map(|&a| stochastic_binarize(a, rng)).collect(),
            Binarization::Deterministic => x.iter().map(|&a| sign_binarize(a)).collect(),
            Binarization::Soft => x.to_vec(),
        })
    }

    /// Transmitter network: returns the complex unit-norm beamformer.
    pub fn decoder_forward(&self, b: &[f64]) -> Result<Vec<Complex64>> {
        if b.len() != self.bits {
            return Err(Error::shape("decoder_forward", self.bits, b.len()));
        }
        let mut x = ArrayView1::from(b).to_owned();
        for layer in &self.decoder {
            x = apply_single(layer, x.view())?;
        }
        join_real_imag(x.as_slice().expect("contiguous"))
    }

    /// Encoder then decoder, deterministic bits.
    pub fn beamformer(&self, y: &ComplexMatrix) -> Result<Vec<Complex64>> {
        let x = self.encoder_input(y)?;
        let mut unused = RngStream::new(0, 0);
        let b = self.encoder_forward(&x, &mut unused, Binarization::Deterministic)?;
        self.decoder_forward(&b)
    }

    /// Stacks encoder inputs for a batch of observations, one row each.
    pub fn encoder_batch(&self, ys: &[&ComplexMatrix]) -> Result<Array2<f64>> {
        let width = self.meta.encoder_inputs();
        let mut x = Array2::zeros((ys.len(), width));
        for (mut row, y) in x.rows_mut().into_iter().zip(ys) {
            let v = self.encoder_input(y)?;
            row.assign(&ArrayView1::from(&v[..]));
        }
        Ok(x)
    }

    pub(crate) fn visit_params_mut(&mut self, mut f: impl FnMut(&mut [f64])) {
        for layer in self.encoder.iter_mut().chain(self.decoder.iter_mut()) {
            f(layer.weight.as_slice_mut().expect("standard layout"));
            f(layer.bias.as_slice_mut().expect("standard layout"));
        }
    }

    pub(crate) fn visit_params(&self, mut f: impl FnMut(&[f64])) {
        for layer in self.encoder.iter().chain(self.decoder.iter()) {
            f(layer.weight.as_slice().expect("standard layout"));
            f(layer.bias.as_slice().expect("standard layout"));
        }
    }

    /// All parameters flattened in a fixed order (encoder then decoder; weight then bias).
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.parameter_count());
        self.visit_params(|s| out.extend_from_slice(s));
        out
    }

    pub fn set_flat_params(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.parameter_count() {
            return Err(Error::shape(
                "set_flat_params",
                self.parameter_count(),
                values.len(),
            ));
        }
        let mut offset = 0;
        self.visit_params_mut(|s| {
            s.copy_from_slice(&values[offset..offset + s.len()]);
            offset += s.len();
        });
        Ok(())
    }
}

fn build_stack(
    inputs: usize,
    hidden: &[usize],
    outputs: usize,
    out_act: Activation,
    rng: &mut RngStream,
) -> Vec<Layer> {
    let mut layers = Vec::with_capacity(hidden.len() + 1);
    let mut width = inputs;
    for &h in hidden {
        layers.push(Layer::glorot(width, h, Activation::Relu, rng));
        width = h;
    }
    layers.push(Layer::glorot(width, outputs, out_act, rng));
    layers
}

fn check_stack(name: &'static str, layers: &[Layer], inputs: usize, outputs: usize) -> Result<()> {
    if layers.is_empty() {
        return Err(Error::invalid(name, "needs at least one layer"));
    }
    let mut width = inputs;
    for (k, l) in layers.iter().enumerate() {
        if l.inputs() != width || l.bias.len() != l.outputs() {
            return Err(Error::shape(
                name,
                format!("layer {k} input width {width}"),
                l.inputs(),
            ));
        }
        width = l.outputs();
    }
    if width != outputs {
        return Err(Error::shape(name, format!("output width {outputs}"), width));
    }
    Ok(())
}

/// Single-sample layer; the binarization layer returns its soft `tanh` value.
fn apply_single(layer: &Layer, x: ArrayView1<f64>) -> Result<Array1<f64>> {
    let mut z = layer.affine(x);
    match layer.activation {
        Activation::Relu => z.mapv_inplace(|v| v.max(0.0)),
        Activation::Tanh | Activation::StochasticBinarize => z.mapv_inplace(f64::tanh),
        Activation::Identity => {}
        Activation::L2Normalize => {
            let n = z.dot(&z).sqrt();
            if !(n >= MIN_NORMALIZE_NORM) {
                return Err(Error::DegenerateOutput { norm: n });
            }
            z /= n;
        }
    }
    Ok(z)
}

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::Rng;

use crate::error::{Error, Result};
use crate::numerics::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Tanh,
    /// `tanh` followed by the ±1 quantizer (see [`Binarization`]).
    StochasticBinarize,
    /// `z / ||z||₂` over the whole layer output.
    L2Normalize,
    Identity,
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
            Activation::StochasticBinarize => "stochastic-binarize",
            Activation::L2Normalize => "l2-normalize",
            Activation::Identity => "identity",
        })
    }
}

impl FromStr for Activation {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Ok(match s {
            "relu" => Activation::Relu,
            "tanh" => Activation::Tanh,
            "stochastic-binarize" => Activation::StochasticBinarize,
            "l2-normalize" => Activation::L2Normalize,
            "identity" => Activation::Identity,
            other => return Err(format!("unknown activation `{other}`")),
        })
    }
}

/// How the binarization stage emits its output.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Binarization {
    /// `b = +1` with probability `(1 + a) / 2`, else `-1` (training forward pass).
    Stochastic,
    /// `b = sign(a)` with `sign(0) = +1` (inference).
    Deterministic,
    /// Pass the soft value `a` through unchanged. Only for gradient checking.
    Soft,
}

/// Noise-injected quantizer: returns `a + e` with `E[e | a] = 0`, i.e. `±1`.
#[inline]
pub fn stochastic_binarize(a: f64, rng: &mut RngStream) -> f64 {
    let p_plus = 0.5 * (1.0 + a);
    if rng.random::<f64>() < p_plus {
        1.0
    } else {
        -1.0
    }
}

#[inline]
pub fn sign_binarize(a: f64) -> f64 {
    if a >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// Fully connected layer `a(W x + o)` with `W` stored `out x in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

impl Layer {
    /// Glorot-uniform weights, zero bias.
    pub fn glorot(
        inputs: usize,
        outputs: usize,
        activation: Activation,
        rng: &mut RngStream,
    ) -> Self {
        let limit = (6.0 / (inputs + outputs) as f64).sqrt();
        let weight = Array2::from_shape_fn((outputs, inputs), |_| rng.random_range(-limit..limit));
        Self {
            weight,
            bias: Array1::zeros(outputs),
            activation,
        }
    }

    pub fn inputs(&self) -> usize {
        self.weight.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.weight.nrows()
    }

    pub fn is_finite(&self) -> bool {
        self.weight
            .iter()
            .chain(self.bias.iter())
            .all(|v| v.is_finite())
    }

    pub fn parameter_count(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    /// Single-sample affine map `W x + o`.
    pub fn affine(&self, x: ArrayView1<f64>) -> Array1<f64> {
        self.weight.dot(&x) + &self.bias
    }
}

/// Per-layer values kept from the forward pass for backpropagation.
#[derive(Debug)]
pub(crate) struct LayerCache {
    /// Post-activation. For the binarization layer this is the soft `tanh` value.
    pub activated: Array2<f64>,
    /// Quantized output of a binarization layer, when it differs from `activated`.
    pub emitted: Option<Array2<f64>>,
    /// Row norms of the pre-activation for `L2Normalize`.
    pub norms: Option<Array1<f64>>,
}

impl LayerCache {
    fn output(&self) -> &Array2<f64> {
        self.emitted.as_ref().unwrap_or(&self.activated)
    }
}

#[derive(Debug)]
pub(crate) struct Tape {
    pub input: Array2<f64>,
    pub caches: Vec<LayerCache>,
}

impl Tape {
    /// What the stack emits (quantized values for a binarization output).
    pub fn output(&self) -> &Array2<f64> {
        self.caches.last().map_or(&self.input, LayerCache::output)
    }

    fn layer_input(&self, k: usize) -> &Array2<f64> {
        if k == 0 {
            &self.input
        } else {
            self.caches[k - 1].output()
        }
    }

    pub fn into_output(mut self) -> Array2<f64> {
        match self.caches.pop() {
            Some(c) => c.emitted.unwrap_or(c.activated),
            None => self.input,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

/// Minimum pre-normalization norm accepted by the `L2Normalize` activation.
pub const MIN_NORMALIZE_NORM: f64 = 1e-30;

/// Batched forward pass; rows of `x` are samples.
pub(crate) fn forward(
    layers: &[Layer],
    x: Array2<f64>,
    binarization: Binarization,
    rng: &mut RngStream,
) -> Result<Tape> {
    let mut tape = Tape {
        input: x,
        caches: Vec::with_capacity(layers.len()),
    };
    for (k, layer) in layers.iter().enumerate() {
        let mut z = tape.layer_input(k).dot(&layer.weight.t());
        z += &layer.bias;
        let mut norms = None;
        let mut emitted = None;
        match layer.activation {
            Activation::Relu => z.mapv_inplace(|v| v.max(0.0)),
            Activation::Tanh => z.mapv_inplace(f64::tanh),
            Activation::Identity => {}
            Activation::StochasticBinarize => {
                z.mapv_inplace(f64::tanh);
                emitted = match binarization {
                    Binarization::Stochastic => Some(z.mapv(|a| stochastic_binarize(a, rng))),
                    Binarization::Deterministic => Some(z.mapv(sign_binarize)),
                    Binarization::Soft => None,
                };
            }
            Activation::L2Normalize => {
                let n = z.map_axis(Axis(1), |row| row.dot(&row).sqrt());
                if let Some(&bad) = n.iter().find(|&&v| !(v >= MIN_NORMALIZE_NORM)) {
                    return Err(Error::DegenerateOutput { norm: bad });
                }
                for (mut row, &nv) in z.axis_iter_mut(Axis(0)).zip(n.iter()) {
                    row /= nv;
                }
                norms = Some(n);
            }
        }
        tape.caches.push(LayerCache {
            activated: z,
            emitted,
            norms,
        });
    }
    Ok(tape)
}

/// Backpropagates `grad_out` (gradient w.r.t. the emitted output) through `layers`.
/// Returns per-layer parameter gradients and the gradient w.r.t. the stack input.
///
/// The binarization stage is treated as the identity (straight-through); only the
/// `tanh` in front of it contributes a derivative.
pub(crate) fn backward(
    layers: &[Layer],
    tape: &Tape,
    grad_out: Array2<f64>,
) -> (Vec<LayerGrad>, Array2<f64>) {
    let mut grads = Vec::with_capacity(layers.len());
    let mut g = grad_out;
    for (k, (layer, cache)) in layers.iter().zip(&tape.caches).enumerate().rev() {
        let a = &cache.activated;
        // g: dL/d(layer output) -> dL/dz
        match layer.activation {
            Activation::Relu => g.zip_mut_with(a, |gv, &av| {
                if av <= 0.0 {
                    *gv = 0.0
                }
            }),
            Activation::Tanh | Activation::StochasticBinarize => {
                g.zip_mut_with(a, |gv, &av| *gv *= 1.0 - av * av)
            }
            Activation::Identity => {}
            Activation::L2Normalize => {
                let norms = cache.norms.as_ref().expect("normalize layer caches norms");
                for ((mut grow, arow), &nv) in g
                    .axis_iter_mut(Axis(0))
                    .zip(a.axis_iter(Axis(0)))
                    .zip(norms)
                {
                    let proj = grow.dot(&arow);
                    grow.scaled_add(-proj, &arow);
                    grow /= nv;
                }
            }
        }
        let weight = g.t().dot(tape.layer_input(k));
        let bias = g.sum_axis(Axis(0));
        let g_in = g.dot(&layer.weight);
        grads.push(LayerGrad { weight, bias });
        g = g_in;
    }
    grads.reverse();
    (grads, g)
}

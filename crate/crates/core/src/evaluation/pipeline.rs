use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::channel::PhasePolicy;
use crate::channel::{dft_pilot_matrix, pilot_observation, ChannelModel, ChannelSample, PilotSpec};
use crate::codebook::{select_pmi, Codebook};
use crate::error::Result;
use crate::estimation::{lmmse_estimate, LmmseFilter};
use crate::neural::{index_of_word, Binarization, DecoderTable, FeedbackModel};
use crate::numerics::{principal_eigenvector, Complex64, ComplexMatrix, RngStream, DEFAULT_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    Dl,
    LmmseDft,
    LmmseLloyd,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Dl, Scheme::LmmseDft, Scheme::LmmseLloyd];
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Dl => "DL",
            Scheme::LmmseDft => "LMMSE+DFT",
            Scheme::LmmseLloyd => "LMMSE+Lloyd",
        })
    }
}

impl FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "DL" | "dl" => Ok(Scheme::Dl),
            "LMMSE+DFT" | "lmmse+dft" => Ok(Scheme::LmmseDft),
            "LMMSE+Lloyd" | "lmmse+lloyd" => Ok(Scheme::LmmseLloyd),
            other => Err(format!(
                "unknown scheme `{other}` (expected DL, LMMSE+DFT or LMMSE+Lloyd)"
            )),
        }
    }
}

/// Channel, pilots and pilot matrix of one link configuration.
#[derive(Debug, Clone)]
pub struct Link {
    pub channel: ChannelModel,
    pub pilots: PilotSpec,
    pub p: ComplexMatrix,
}

impl Link {
    pub fn new(channel: ChannelModel, pilots: PilotSpec) -> Self {
        let p = dft_pilot_matrix(channel.spec().n_tx, pilots.length);
        Self { channel, pilots, p }
    }

    /// `n` Lloyd training samples: LMMSE estimates at this link's operating point, or the
    /// true channels when `true_csi` is set. Sample `i` uses `rng.derive(i)`.
    pub fn lloyd_training_set(
        &self,
        n: usize,
        true_csi: bool,
        rng: &RngStream,
    ) -> Result<Vec<ComplexMatrix>> {
        (0..n)
            .into_par_iter()
            .map(|i| {
                let mut r = rng.derive(i as u64);
                let (ch, y) = self.draw(&mut r)?;
                if true_csi {
                    return Ok(ch.h);
                }
                let r_t = self.channel.transmit_correlation(ch.psi_used);
                Ok(lmmse_estimate(
                    &y,
                    &self.p,
                    self.pilots.pilot_energy,
                    self.pilots.noise_var,
                    &r_t,
                )?
                .h_hat)
            })
            .collect()
    }

    /// One channel realization and its pilot observation.
    pub fn draw(&self, rng: &mut RngStream) -> Result<(ChannelSample, ComplexMatrix)> {
        let ch = self.channel.sample(rng);
        let y = pilot_observation(&ch, &self.pilots, &self.p, rng)?;
        Ok((ch, y))
    }
}

/// What a feedback pipeline may look at for one realization.
///
/// Realistic pipelines use only `y` (plus channel statistics via `psi`); `h` is there
/// for genie references.
pub struct PilotContext<'a> {
    pub y: &'a ComplexMatrix,
    pub psi: f64,
    pub h: &'a ComplexMatrix,
}

/// Receiver + transmitter chain producing the beamformer for one realization.
pub trait Pipeline: Sync {
    fn label(&self) -> String;

    fn beamformer(&self, ctx: &PilotContext<'_>, rng: &mut RngStream) -> Result<Vec<Complex64>>;
}

/// Learned scheme: receiver network to bits, transmitter lookup table to beamformer.
#[derive(Debug, Clone)]
pub struct DlPipeline {
    model: FeedbackModel,
    table: DecoderTable,
    binarization: Binarization,
}

impl DlPipeline {
    pub fn new(model: FeedbackModel) -> Result<Self> {
        let table = DecoderTable::build(&model)?;
        Ok(Self {
            model,
            table,
            binarization: Binarization::Deterministic,
        })
    }

    /// Use stochastic bits at inference (ablation).
    pub fn with_binarization(mut self, b: Binarization) -> Self {
        self.binarization = b;
        self
    }

    pub fn model(&self) -> &FeedbackModel {
        &self.model
    }

    pub fn feedback_index(&self, y: &ComplexMatrix, rng: &mut RngStream) -> Result<usize> {
        let x = self.model.encoder_input(y)?;
        let b = self.model.encoder_forward(&x, rng, self.binarization)?;
        Ok(index_of_word(&b))
    }
}

impl Pipeline for DlPipeline {
    fn label(&self) -> String {
        Scheme::Dl.to_string()
    }

    fn beamformer(&self, ctx: &PilotContext<'_>, rng: &mut RngStream) -> Result<Vec<Complex64>> {
        let i = self.feedback_index(ctx.y, rng)?;
        Ok(self.table.entry(i).to_vec())
    }
}

/// LMMSE estimate with the realization's transmit correlation, then exhaustive PMI search.
#[derive(Debug, Clone)]
pub struct BaselinePipeline {
    link: Link,
    codebook: Codebook,
    /// Built once when the correlation phase is a fixed statistic of the channel.
    filter: Option<LmmseFilter>,
}

impl BaselinePipeline {
    pub fn new(link: Link, codebook: Codebook) -> Result<Self> {
        let filter = match link.channel.spec().phase {
            PhasePolicy::Fixed(psi) => {
                let r_t = link.channel.transmit_correlation(psi);
                Some(LmmseFilter::new(
                    &link.p,
                    link.pilots.pilot_energy,
                    link.pilots.noise_var,
                    &r_t,
                )?)
            }
            PhasePolicy::UniformRandom => None,
        };
        Ok(Self {
            link,
            codebook,
            filter,
        })
    }

    pub fn codebook(&self) -> &Codebook {
        &self.codebook
    }

    pub fn feedback_index(&self, y: &ComplexMatrix, psi: f64) -> Result<usize> {
        if let Some(f) = &self.filter {
            return select_pmi(&f.apply(y)?.h_hat, &self.codebook);
        }
        let r_t = self.link.channel.transmit_correlation(psi);
        let pilots = &self.link.pilots;
        let est = lmmse_estimate(y, &self.link.p, pilots.pilot_energy, pilots.noise_var, &r_t)?;
        select_pmi(&est.h_hat, &self.codebook)
    }
}

impl Pipeline for BaselinePipeline {
    fn label(&self) -> String {
        match self.codebook.provenance() {
            crate::codebook::Provenance::Dft => Scheme::LmmseDft.to_string(),
            crate::codebook::Provenance::Lloyd => Scheme::LmmseLloyd.to_string(),
        }
    }

    fn beamformer(&self, ctx: &PilotContext<'_>, _rng: &mut RngStream) -> Result<Vec<Complex64>> {
        let i = self.feedback_index(ctx.y, ctx.psi)?;
        Ok(self.codebook.word(i).to_vec())
    }
}

/// Genie: codebook search on the true channel.
#[derive(Debug, Clone)]
pub struct PerfectCsiPipeline {
    pub codebook: Codebook,
}

impl Pipeline for PerfectCsiPipeline {
    fn label(&self) -> String {
        format!("perfect-CSI+{}", self.codebook.provenance())
    }

    fn beamformer(&self, ctx: &PilotContext<'_>, _rng: &mut RngStream) -> Result<Vec<Complex64>> {
        let i = select_pmi(ctx.h, &self.codebook)?;
        Ok(self.codebook.word(i).to_vec())
    }
}

/// Genie: principal right singular vector of the true channel (unquantized optimum).
#[derive(Debug, Clone, Copy, Default)]
pub struct EigenBeamformer;

impl Pipeline for EigenBeamformer {
    fn label(&self) -> String {
        "eigen-beamforming".to_string()
    }

    fn beamformer(&self, ctx: &PilotContext<'_>, _rng: &mut RngStream) -> Result<Vec<Complex64>> {
        Ok(principal_eigenvector(&ctx.h.gram(), DEFAULT_TOL)?.1)
    }
}

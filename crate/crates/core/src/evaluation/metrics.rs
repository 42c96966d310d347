use std::fmt;
use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;

use super::pipeline::{Link, PilotContext, Pipeline};
use crate::codebook::effective_gain;
use crate::error::{Error, Result};
use crate::numerics::{
    largest_eigenvalue_hermitian, vec_norm_sqr, ComplexMatrix, RngStream, DEFAULT_TOL,
};

/// Slack on the Rayleigh-quotient bound `||Hw||² <= λ_max(H^H H)`.
pub const GAIN_BOUND_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    NormGain,
    Ser,
    CpuTime,
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::NormGain => "norm_gain",
            Metric::Ser => "ser",
            Metric::CpuTime => "cpu_time",
        })
    }
}

/// Configuration echoed on every CSV row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecordConfig {
    pub n_tx: usize,
    pub n_rx: usize,
    pub pilot_len: usize,
    pub bits: usize,
    pub t_mag: f64,
    /// Data SNR `E_s/σ²` for SER rows, pilot SNR `E_p/σ²` otherwise (dB).
    pub snr_db: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricRecord {
    pub scheme: String,
    pub config: RecordConfig,
    pub metric: Metric,
    pub value: f64,
    pub n_trials: usize,
    pub stderr: f64,
    pub seed: u64,
}

pub const CSV_HEADER: &str = "scheme,N_t,N_r,L,B,t_mag,snr_db,metric,value,stderr,n_trials,seed";

impl MetricRecord {
    pub fn csv_row(&self) -> String {
        let c = &self.config;
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.scheme,
            c.n_tx,
            c.n_rx,
            c.pilot_len,
            c.bits,
            c.t_mag,
            c.snr_db,
            self.metric,
            self.value,
            self.stderr,
            self.n_trials,
            self.seed
        )
    }
}

/// Sample mean and standard error of the mean.
pub fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Mean and standard error of the paired differences `a_i - b_i`.
pub fn paired_difference(a: &[f64], b: &[f64]) -> (f64, f64) {
    assert_eq!(a.len(), b.len(), "paired samples must align");
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    mean_and_stderr(&d)
}

/// `λ_max(H^H H)`, computed on the smaller of the two Gram matrices.
pub fn max_gram_eigenvalue(h: &ComplexMatrix) -> Result<f64> {
    let gram = if h.rows() < h.cols() {
        h.adjoint().gram()
    } else {
        h.gram()
    };
    largest_eigenvalue_hermitian(&gram, DEFAULT_TOL)
}

/// `||H w||² / λ_max(H^H H)` (0 for the all-zero channel).
pub fn normalized_gain_of(h: &ComplexMatrix, w: &[Complex64]) -> Result<f64> {
    let lambda = max_gram_eigenvalue(h)?;
    if lambda == 0.0 {
        return Ok(0.0);
    }
    Ok(effective_gain(h, w) / lambda)
}

#[derive(Debug, Clone)]
pub struct GainRun {
    pub record: MetricRecord,
    /// Per-trial normalized gains, in trial order.
    pub samples: Vec<f64>,
}

impl GainRun {
    /// Concatenates runs of one scheme (e.g. over several correlation phases) into a single record.
    pub fn pool(runs: Vec<GainRun>) -> Option<GainRun> {
        let mut it = runs.into_iter();
        let mut acc = it.next()?;
        for r in it {
            acc.samples.extend(r.samples);
        }
        let (mean, stderr) = mean_and_stderr(&acc.samples);
        acc.record.value = mean;
        acc.record.stderr = stderr;
        acc.record.n_trials = acc.samples.len();
        Some(acc)
    }
}

/// Average normalized effective gain over `n_trials` independent realizations.
///
/// Trial `i` draws everything from `RngStream::new(seed, 0).derive(i)`, so two pipelines
/// evaluated with the same seed see identical channels and noise.
pub fn normalized_gain(
    pipeline: &dyn Pipeline,
    link: &Link,
    n_trials: usize,
    seed: u64,
    bits: usize,
) -> Result<GainRun> {
    if n_trials == 0 {
        return Err(Error::invalid("n_trials", "must be at least 1"));
    }
    let root = RngStream::new(seed, 0);
    let samples: Vec<f64> = (0..n_trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = root.derive(i as u64);
            let (ch, y) = link.draw(&mut rng)?;
            let ctx = PilotContext {
                y: &y,
                psi: ch.psi_used,
                h: &ch.h,
            };
            let mut pipe_rng = rng.derive(1);
            let w = pipeline.beamformer(&ctx, &mut pipe_rng)?;
            let ratio = normalized_gain_of(&ch.h, &w)?;
            if !(ratio <= 1.0 + GAIN_BOUND_SLACK) || ratio < 0.0 {
                return Err(Error::BoundViolation { ratio });
            }
            Ok(ratio)
        })
        .collect::<Result<_>>()?;
    let (mean, stderr) = mean_and_stderr(&samples);
    let spec = link.channel.spec();
    Ok(GainRun {
        record: MetricRecord {
            scheme: pipeline.label(),
            config: RecordConfig {
                n_tx: spec.n_tx,
                n_rx: spec.n_rx,
                pilot_len: link.pilots.length,
                bits,
                t_mag: spec.t_mag,
                snr_db: link.pilots.snr_db(),
            },
            metric: Metric::NormGain,
            value: mean,
            n_trials,
            stderr,
            seed,
        },
        samples,
    })
}

/// Data-phase link: `y = sqrt(E_s)·H·w·x + n`, QPSK symbols of unit energy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DataLinkSpec {
    pub symbol_energy: f64,
    pub noise_var: f64,
}

impl DataLinkSpec {
    /// Unit noise variance with `E_s/σ²` given in dB.
    pub fn from_snr_db(snr_db: f64) -> Self {
        Self {
            symbol_energy: 10f64.powf(snr_db / 10.0),
            noise_var: 1.0,
        }
    }

    pub fn snr_db(&self) -> f64 {
        10.0 * (self.symbol_energy / self.noise_var).log10()
    }
}

/// Symbols transmitted per channel realization in [`qpsk_ser`].
pub const SYMBOLS_PER_BLOCK: usize = 100;

/// Gray-mapped QPSK over a fixed effective channel `h_eff = H w` with genie MRC.
/// Returns the number of symbol errors.
pub fn ser_fixed_channel(
    h_eff: &[Complex64],
    link: &DataLinkSpec,
    n_symbols: usize,
    rng: &mut RngStream,
) -> u64 {
    let energy = vec_norm_sqr(h_eff);
    let amp = link.symbol_energy.sqrt();
    let sigma = link.noise_var.sqrt();
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut errors = 0;
    for _ in 0..n_symbols {
        let bits = rng.next_u32_pair();
        let x = Complex64::new(if bits.0 { -s } else { s }, if bits.1 { -s } else { s });
        // z = h^H y / ||h||²
        let mut acc = Complex64::new(0.0, 0.0);
        for h in h_eff {
            let y = h * x * amp + rng.complex_normal() * sigma;
            acc += h.conj() * y;
        }
        let z = if energy > 0.0 {
            acc / energy
        } else {
            Complex64::new(0.0, 0.0)
        };
        let detected = (z.re < 0.0, z.im < 0.0);
        if detected != bits {
            errors += 1;
        }
    }
    errors
}

trait BitPair {
    fn next_u32_pair(&mut self) -> (bool, bool);
}

impl BitPair for RngStream {
    fn next_u32_pair(&mut self) -> (bool, bool) {
        let v = rand::RngCore::next_u32(self);
        (v & 1 == 1, v & 2 == 2)
    }
}

#[derive(Debug, Clone)]
pub struct SerRun {
    pub record: MetricRecord,
    pub errors: u64,
}

impl SerRun {
    /// Pools symbol errors of several runs of one scheme at one data SNR.
    pub fn pool(runs: Vec<SerRun>) -> Option<SerRun> {
        let mut it = runs.into_iter();
        let mut acc = it.next()?;
        for r in it {
            acc.errors += r.errors;
            acc.record.n_trials += r.record.n_trials;
        }
        let n = acc.record.n_trials as f64;
        let p = acc.errors as f64 / n;
        acc.record.value = p;
        acc.record.stderr = (p * (1.0 - p) / n).sqrt();
        Some(acc)
    }
}

/// Monte Carlo QPSK symbol error rate, one fresh channel per block of
/// [`SYMBOLS_PER_BLOCK`] symbols.
pub fn qpsk_ser(
    pipeline: &dyn Pipeline,
    link: &Link,
    data: &DataLinkSpec,
    n_symbols: usize,
    seed: u64,
    bits: usize,
) -> Result<SerRun> {
    qpsk_ser_blocked(
        pipeline,
        link,
        data,
        n_symbols,
        SYMBOLS_PER_BLOCK,
        seed,
        bits,
    )
}

/// [`qpsk_ser`] with `block_len` symbols per channel realization.
pub fn qpsk_ser_blocked(
    pipeline: &dyn Pipeline,
    link: &Link,
    data: &DataLinkSpec,
    n_symbols: usize,
    block_len: usize,
    seed: u64,
    bits: usize,
) -> Result<SerRun> {
    if n_symbols == 0 {
        return Err(Error::invalid("n_symbols", "must be at least 1"));
    }
    if block_len == 0 {
        return Err(Error::invalid("block_len", "must be at least 1"));
    }
    let blocks = n_symbols.div_ceil(block_len);
    let root = RngStream::new(seed, 0);
    let per_block: Vec<u64> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let count = block_len.min(n_symbols - b * block_len);
            let block = root.derive(b as u64);
            let mut rng = block.derive(0);
            let (ch, y) = link.draw(&mut rng)?;
            let ctx = PilotContext {
                y: &y,
                psi: ch.psi_used,
                h: &ch.h,
            };
            let w = pipeline.beamformer(&ctx, &mut block.derive(2))?;
            let h_eff = ch.h.mul_vec(&w)?;
            Ok(ser_fixed_channel(&h_eff, data, count, &mut block.derive(1)))
        })
        .collect::<Result<_>>()?;
    let errors: u64 = per_block.iter().sum();
    let p = errors as f64 / n_symbols as f64;
    let spec = link.channel.spec();
    Ok(SerRun {
        record: MetricRecord {
            scheme: pipeline.label(),
            config: RecordConfig {
                n_tx: spec.n_tx,
                n_rx: spec.n_rx,
                pilot_len: link.pilots.length,
                bits,
                t_mag: spec.t_mag,
                snr_db: data.snr_db(),
            },
            metric: Metric::Ser,
            value: p,
            n_trials: n_symbols,
            stderr: (p * (1.0 - p) / n_symbols as f64).sqrt(),
            seed,
        },
        errors,
    })
}

/// Warm-up calls before timed repetitions in [`time_online`].
pub const TIMING_WARMUP: usize = 100;
const TIMING_POOL: usize = 64;

/// Median wall-clock latency (milliseconds) of the pipeline's online receiver path.
///
/// Inputs are pre-generated so only the pipeline call is timed. Runs on the calling
/// thread; the reported stderr is the median absolute deviation.
pub fn time_online(
    pipeline: &dyn Pipeline,
    link: &Link,
    n_trials: usize,
    seed: u64,
    bits: usize,
) -> Result<MetricRecord> {
    if n_trials == 0 {
        return Err(Error::invalid("n_trials", "must be at least 1"));
    }
    let mut rng = RngStream::new(seed, 0);
    let pool: Vec<_> = (0..TIMING_POOL)
        .map(|_| link.draw(&mut rng))
        .collect::<Result<_>>()?;
    let mut pipe_rng = rng.derive(1);
    let mut sink = 0.0;
    let mut run = |k: usize, pipe_rng: &mut RngStream| -> Result<f64> {
        let (ch, y) = &pool[k % TIMING_POOL];
        let ctx = PilotContext {
            y,
            psi: ch.psi_used,
            h: &ch.h,
        };
        let start = Instant::now();
        let w = pipeline.beamformer(&ctx, pipe_rng)?;
        let elapsed = start.elapsed().as_secs_f64() * 1e3;
        sink += w[0].re;
        Ok(elapsed)
    };
    for k in 0..TIMING_WARMUP {
        run(k, &mut pipe_rng)?;
    }
    let mut times = (0..n_trials)
        .map(|k| run(k, &mut pipe_rng))
        .collect::<Result<Vec<f64>>>()?;
    std::hint::black_box(sink);
    let median = median(&mut times);
    let mut dev: Vec<f64> = times.iter().map(|t| (t - median).abs()).collect();
    let mad = median_of(&mut dev);
    let spec = link.channel.spec();
    Ok(MetricRecord {
        scheme: pipeline.label(),
        config: RecordConfig {
            n_tx: spec.n_tx,
            n_rx: spec.n_rx,
            pilot_len: link.pilots.length,
            bits,
            t_mag: spec.t_mag,
            snr_db: link.pilots.snr_db(),
        },
        metric: Metric::CpuTime,
        value: median,
        n_trials,
        stderr: mad,
        seed,
    })
}

fn median(xs: &mut [f64]) -> f64 {
    median_of(xs)
}

fn median_of(xs: &mut [f64]) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_and_stderr_small() {
        let (m, s) = mean_and_stderr(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        // sample variance 5/3, stderr sqrt(5/12)
        assert!((s - (5.0f64 / 12.0).sqrt()).abs() < 1e-15);
        assert_eq!(mean_and_stderr(&[7.0]), (7.0, 0.0));
    }

    #[test]
    fn noiseless_ser_is_zero() {
        let h = [Complex64::new(0.3, -0.2), Complex64::new(1.0, 0.5)];
        let link = DataLinkSpec {
            symbol_energy: 1.0,
            noise_var: 0.0,
        };
        assert_eq!(
            ser_fixed_channel(&h, &link, 10_000, &mut RngStream::new(0, 0)),
            0
        );
    }

    fn record(metric: Metric, n: usize) -> MetricRecord {
        MetricRecord {
            scheme: "x".into(),
            config: RecordConfig {
                n_tx: 2,
                n_rx: 1,
                pilot_len: 1,
                bits: 1,
                t_mag: 0.0,
                snr_db: 0.0,
            },
            metric,
            value: 0.0,
            n_trials: n,
            stderr: 0.0,
            seed: 3,
        }
    }

    #[test]
    fn pooled_gain_concatenates_trials() {
        let a = GainRun {
            record: record(Metric::NormGain, 2),
            samples: vec![0.1, 0.3],
        };
        let b = GainRun {
            record: record(Metric::NormGain, 2),
            samples: vec![0.5, 0.7],
        };
        let p = GainRun::pool(vec![a, b]).unwrap();
        assert_eq!(p.samples, vec![0.1, 0.3, 0.5, 0.7]);
        assert_eq!(p.record.n_trials, 4);
        assert!((p.record.value - 0.4).abs() < 1e-15);
        assert_eq!(p.record.stderr, mean_and_stderr(&p.samples).1);
        assert!(GainRun::pool(Vec::new()).is_none());
    }

    #[test]
    fn pooled_ser_sums_errors() {
        let run = |errors, n| SerRun {
            record: record(Metric::Ser, n),
            errors,
        };
        let p = SerRun::pool(vec![run(10, 1000), run(30, 3000)]).unwrap();
        assert_eq!((p.errors, p.record.n_trials), (40, 4000));
        assert!((p.record.value - 0.01).abs() < 1e-15);
        assert!((p.record.stderr - (0.01f64 * 0.99 / 4000.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn csv_row_has_header_arity() {
        let r = MetricRecord {
            scheme: "DL".into(),
            config: RecordConfig {
                n_tx: 8,
                n_rx: 4,
                pilot_len: 2,
                bits: 6,
                t_mag: 0.7,
                snr_db: 0.0,
            },
            metric: Metric::NormGain,
            value: 0.5,
            n_trials: 10,
            stderr: 0.01,
            seed: 1,
        };
        assert_eq!(
            r.csv_row().split(',').count(),
            CSV_HEADER.split(',').count()
        );
    }
}

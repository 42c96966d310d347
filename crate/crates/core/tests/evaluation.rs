use mimofb::channel::{ChannelModel, ChannelSpec, PhasePolicy, PilotSpec};
use mimofb::codebook::{dft_codebook, select_pmi, Codebook, Provenance};
use mimofb::estimation::lmmse_estimate;
use mimofb::evaluation::{
    normalized_gain, paired_difference, qpsk_ser, ser_fixed_channel, time_online, BaselinePipeline,
    DataLinkSpec, EigenBeamformer, Link, PerfectCsiPipeline, PilotContext, Pipeline, CSV_HEADER,
};
use mimofb::numerics::{vec_norm, Complex64, RngStream};
use mimofb::Result;
use statrs::distribution::{ContinuousCDF, Normal};

fn link(n_tx: usize, n_rx: usize, t: f64, l: usize) -> Link {
    let spec = ChannelSpec::new(n_tx, n_rx, t, PhasePolicy::UniformRandom).unwrap();
    Link::new(
        ChannelModel::new(spec).unwrap(),
        PilotSpec::from_snr_db(l, 0.0).unwrap(),
    )
}

struct RandomVector;

impl Pipeline for RandomVector {
    fn label(&self) -> String {
        "random".into()
    }

    fn beamformer(&self, ctx: &PilotContext<'_>, rng: &mut RngStream) -> Result<Vec<Complex64>> {
        let w: Vec<Complex64> = (0..ctx.h.cols()).map(|_| rng.complex_normal()).collect();
        let n = vec_norm(&w);
        Ok(w.into_iter().map(|z| z / n).collect())
    }
}

fn random_codebook(n_tx: usize, bits: usize, rng: &mut RngStream) -> Codebook {
    let words = (0..1usize << bits)
        .map(|_| {
            let w: Vec<Complex64> = (0..n_tx).map(|_| rng.complex_normal()).collect();
            let n = vec_norm(&w);
            w.into_iter().map(|z| z / n).collect()
        })
        .collect();
    Codebook::new(n_tx, bits, words, Provenance::Lloyd).unwrap()
}

#[test]
fn eigen_beamformer_reaches_bound() {
    let l = link(8, 4, 0.7, 4);
    let run = normalized_gain(&EigenBeamformer, &l, 500, 1, 0).unwrap();
    for g in &run.samples {
        assert!((g - 1.0).abs() < 1e-9, "{g}");
    }
}

#[test]
fn random_vector_gain_is_strictly_inside() {
    let l = link(8, 4, 0.0, 4);
    let run = normalized_gain(&RandomVector, &l, 2000, 2, 0).unwrap();
    assert!(
        run.record.value > 0.05 && run.record.value < 0.7,
        "{}",
        run.record.value
    );
    assert!(run.samples.iter().all(|g| (0.0..=1.0 + 1e-9).contains(g)));
}

#[test]
fn finer_codebook_beats_dft() {
    let l = link(8, 4, 0.0, 4);
    let fine = PerfectCsiPipeline {
        codebook: random_codebook(8, 12, &mut RngStream::new(3, 0)),
    };
    let coarse = PerfectCsiPipeline {
        codebook: dft_codebook(8, 6).unwrap(),
    };
    let a = normalized_gain(&fine, &l, 10_000, 4, 12).unwrap();
    let b = normalized_gain(&coarse, &l, 10_000, 4, 6).unwrap();
    let (d, se) = paired_difference(&a.samples, &b.samples);
    assert!(d > 3.0 * se, "difference {d} ± {se}");
}

#[test]
fn gain_is_reproducible() {
    let l = link(4, 2, 0.5, 2);
    let p = BaselinePipeline::new(l.clone(), dft_codebook(4, 3).unwrap()).unwrap();
    let a = normalized_gain(&p, &l, 300, 8, 3).unwrap();
    let b = normalized_gain(&p, &l, 300, 8, 3).unwrap();
    assert_eq!(a.samples, b.samples);
    assert_eq!(a.record.csv_row(), b.record.csv_row());
    assert_eq!(
        a.record.csv_row().split(',').count(),
        CSV_HEADER.split(',').count()
    );
}

fn q(x: f64) -> f64 {
    1.0 - Normal::standard().cdf(x)
}

#[test]
fn fixed_channel_ser_matches_gray_qpsk() {
    let h = vec![Complex64::new(0.6, -0.3), Complex64::new(-0.2, 0.5)];
    let energy: f64 = h.iter().map(|z| z.norm_sqr()).sum();
    let n = 200_000;
    for gamma_db in [0.0, 5.0] {
        let gamma = 10f64.powf(gamma_db / 10.0);
        let data = DataLinkSpec {
            symbol_energy: gamma / energy,
            noise_var: 1.0,
        };
        let errors = ser_fixed_channel(&h, &data, n, &mut RngStream::new(1, 0));
        let p = 2.0 * q(gamma.sqrt()) - q(gamma.sqrt()).powi(2);
        let measured = errors as f64 / n as f64;
        let sigma = (p * (1.0 - p) / n as f64).sqrt();
        assert!(
            (measured - p).abs() < 3.0 * sigma,
            "γ={gamma_db} dB: {measured} vs {p}"
        );
    }
}

#[test]
fn ser_stderr_scales_with_sample_count() {
    let l = link(4, 2, 0.5, 2);
    let p = BaselinePipeline::new(l.clone(), dft_codebook(4, 3).unwrap()).unwrap();
    let data = DataLinkSpec::from_snr_db(0.0);
    let a = qpsk_ser(&p, &l, &data, 50_000, 1, 3).unwrap();
    let b = qpsk_ser(&p, &l, &data, 100_000, 1, 3).unwrap();
    let ratio = a.record.stderr / b.record.stderr;
    assert!((ratio / 2f64.sqrt() - 1.0).abs() < 0.1, "ratio {ratio}");
}

#[test]
fn identical_beamformers_give_identical_ser() {
    let l = link(4, 2, 0.5, 2);
    let cb = dft_codebook(4, 3).unwrap();
    let a = BaselinePipeline::new(l.clone(), cb.clone()).unwrap();
    let b = BaselinePipeline::new(l.clone(), cb).unwrap();
    let data = DataLinkSpec::from_snr_db(3.0);
    let ra = qpsk_ser(&a, &l, &data, 20_000, 5, 3).unwrap();
    let rb = qpsk_ser(&b, &l, &data, 20_000, 5, 3).unwrap();
    assert_eq!(ra.errors, rb.errors);
}

#[test]
fn noiseless_ser_is_zero() {
    let l = link(4, 2, 0.5, 2);
    let p = BaselinePipeline::new(l.clone(), dft_codebook(4, 3).unwrap()).unwrap();
    let data = DataLinkSpec {
        symbol_energy: 1.0,
        noise_var: 1e-30,
    };
    assert_eq!(qpsk_ser(&p, &l, &data, 5_000, 2, 3).unwrap().errors, 0);
}

#[test]
fn single_timing_trial_is_positive() {
    let l = link(4, 2, 0.5, 2);
    let p = BaselinePipeline::new(l.clone(), dft_codebook(4, 3).unwrap()).unwrap();
    let r = time_online(&p, &l, 1, 0, 3).unwrap();
    assert!(r.value.is_finite() && r.value > 0.0);
}

#[test]
fn fixed_phase_baseline_matches_per_call_estimate() {
    let spec = ChannelSpec::new(8, 4, 0.7, PhasePolicy::Fixed(2.3)).unwrap();
    let l = Link::new(
        ChannelModel::new(spec).unwrap(),
        PilotSpec::from_snr_db(4, 0.0).unwrap(),
    );
    let cb = dft_codebook(8, 6).unwrap();
    let p = BaselinePipeline::new(l.clone(), cb.clone()).unwrap();
    let r_t = l.channel.transmit_correlation(2.3);
    for i in 0..200u64 {
        let (_, y) = l.draw(&mut RngStream::new(i, 3)).unwrap();
        let est =
            lmmse_estimate(&y, &l.p, l.pilots.pilot_energy, l.pilots.noise_var, &r_t).unwrap();
        assert_eq!(
            p.feedback_index(&y, 2.3).unwrap(),
            select_pmi(&est.h_hat, &cb).unwrap()
        );
    }
}

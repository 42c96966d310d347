use mimofb::channel::{
    correlation_matrix, dft_pilot_matrix, pilot_observation, ChannelModel, ChannelSpec,
    PhasePolicy, PilotSpec,
};
use mimofb::numerics::{Complex64, ComplexMatrix, RngStream};
use mimofb::Error;
use proptest::prelude::*;
use statrs::distribution::{ContinuousCDF, Uniform};

#[test]
fn transmit_covariance_matches_correlation() {
    // E[H^H H] = N_r R_t = R_H
    let spec = ChannelSpec::new(4, 2, 0.7, PhasePolicy::Fixed(0.8)).unwrap();
    let model = ChannelModel::new(spec.clone()).unwrap();
    let mut rng = RngStream::new(2024, 0);
    let n = 100_000;
    let mut acc = ComplexMatrix::zeros(4, 4);
    for _ in 0..n {
        let g = model.sample(&mut rng).h.gram();
        for (a, b) in acc.as_mut_slice().iter_mut().zip(g.as_slice()) {
            *a += b;
        }
    }
    let emp = acc.scale(1.0 / n as f64);
    let r_h = correlation_matrix(&spec, 0.8);
    for i in 0..4 {
        for j in 0..4 {
            let err = (emp[(i, j)] - r_h[(i, j)]).norm();
            assert!(
                err <= 0.03 * spec.n_rx as f64,
                "({i},{j}): {} vs {}",
                emp[(i, j)],
                r_h[(i, j)]
            );
        }
    }
}

#[test]
fn each_row_has_transmit_correlation() {
    let spec = ChannelSpec::new(3, 4, 0.9, PhasePolicy::Fixed(5.1)).unwrap();
    let model = ChannelModel::new(spec).unwrap();
    let r_t = model.transmit_correlation(5.1);
    let rng = RngStream::new(5, 0);
    let n = 50_000;
    for row in 0..4 {
        let mut acc = vec![Complex64::new(0.0, 0.0); 9];
        let mut rng_row = rng.derive(row as u64);
        for _ in 0..n {
            let h = model.sample(&mut rng_row).h;
            let r = h.row(row);
            for i in 0..3 {
                for j in 0..3 {
                    acc[i * 3 + j] += r[i].conj() * r[j];
                }
            }
        }
        for i in 0..3 {
            for j in 0..3 {
                let emp = acc[i * 3 + j] / n as f64;
                assert!((emp - r_t[(i, j)]).norm() < 0.03, "row {row} ({i},{j})");
            }
        }
    }
}

#[test]
fn random_phase_is_uniform() {
    let spec = ChannelSpec::new(2, 1, 0.5, PhasePolicy::UniformRandom).unwrap();
    let model = ChannelModel::new(spec).unwrap();
    let mut rng = RngStream::new(9, 0);
    let mut psi: Vec<f64> = (0..20_000)
        .map(|_| model.sample(&mut rng).psi_used)
        .collect();
    psi.sort_by(f64::total_cmp);
    let u = Uniform::new(0.0, std::f64::consts::TAU).unwrap();
    let n = psi.len() as f64;
    let d = psi
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = u.cdf(x);
            (f - i as f64 / n).abs().max((i as f64 + 1.0) / n - f)
        })
        .fold(0.0, f64::max);
    // 0.1% critical value
    assert!(d < 1.95 / n.sqrt(), "KS statistic {d}");
}

#[test]
fn fixed_phase_is_reported() {
    let spec = ChannelSpec::new(2, 2, 0.3, PhasePolicy::Fixed(0.25)).unwrap();
    let model = ChannelModel::new(spec).unwrap();
    assert_eq!(model.sample(&mut RngStream::new(1, 1)).psi_used, 0.25);
}

#[test]
fn invalid_magnitude_names_field() {
    let err = ChannelSpec::new(4, 2, 1.3, PhasePolicy::UniformRandom).unwrap_err();
    assert!(err.to_string().contains("t_mag"), "{err}");
}

#[test]
fn pilots_have_unit_norm_columns_and_orthogonal_rows() {
    let p = dft_pilot_matrix(4, 4);
    let ppt = p.matmul(&p.adjoint()).unwrap();
    for i in 0..4 {
        for j in 0..4 {
            let expect = if i == j { 1.0 } else { 0.0 };
            assert!((ppt[(i, j)] - Complex64::new(expect, 0.0)).norm() < 1e-12);
        }
    }
    let p = dft_pilot_matrix(8, 3);
    for c in 0..3 {
        let n: f64 = p.column(c).iter().map(|z| z.norm_sqr()).sum();
        assert!((n - 1.0).abs() < 1e-12);
    }
}

#[test]
fn observation_noise_variance() {
    let spec = ChannelSpec::new(2, 2, 0.0, PhasePolicy::Fixed(0.0)).unwrap();
    let model = ChannelModel::new(spec).unwrap();
    let mut rng = RngStream::new(4, 0);
    let mut ch = model.sample(&mut rng);
    ch.h = ComplexMatrix::zeros(2, 2);
    let pilots = PilotSpec::new(2, 1.0, 2.5).unwrap();
    let p = dft_pilot_matrix(2, 2);
    let n = 50_000;
    let mut power = 0.0;
    for _ in 0..n {
        let y = pilot_observation(&ch, &pilots, &p, &mut rng).unwrap();
        power += y.as_slice().iter().map(|z| z.norm_sqr()).sum::<f64>() / 4.0;
    }
    assert!((power / n as f64 - 2.5).abs() < 0.03);
}

#[test]
fn misshapen_pilots_rejected() {
    let spec = ChannelSpec::new(4, 2, 0.5, PhasePolicy::UniformRandom).unwrap();
    let model = ChannelModel::new(spec).unwrap();
    let ch = model.sample(&mut RngStream::new(0, 0));
    let pilots = PilotSpec::new(3, 1.0, 1.0).unwrap();
    let p = dft_pilot_matrix(3, 3);
    assert!(matches!(
        pilot_observation(&ch, &pilots, &p, &mut RngStream::new(0, 1)),
        Err(Error::ShapeMismatch { .. })
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn correlation_is_hermitian_with_constant_diagonal(n in 1usize..=10, nr in 1usize..=4, t in 0.0f64..0.999, psi in 0.0f64..6.28) {
        let spec = ChannelSpec::new(n, nr, t, PhasePolicy::Fixed(psi)).unwrap();
        let r = correlation_matrix(&spec, psi);
        prop_assert!(r.hermitian_defect() < 1e-14);
        for i in 0..n {
            prop_assert!((r[(i, i)] - Complex64::new(nr as f64, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn sampling_is_deterministic(seed in any::<u64>(), stream in any::<u64>()) {
        let spec = ChannelSpec::new(3, 2, 0.4, PhasePolicy::UniformRandom).unwrap();
        let model = ChannelModel::new(spec).unwrap();
        let a = model.sample(&mut RngStream::new(seed, stream));
        let b = model.sample(&mut RngStream::new(seed, stream));
        prop_assert_eq!(a.h, b.h);
        prop_assert_eq!(a.psi_used, b.psi_used);
    }
}

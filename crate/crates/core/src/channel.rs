//! Correlated Rayleigh channel, DFT pilots and the pilot-phase observation.
//!
//! The channel follows the one-sided Kronecker model `H = H_w · R_t^{1/2}` with
//! `H_w` i.i.d. CN(0, 1) and `R_t = R_H / N_r`, so that `E[H^H H] = R_H`. The transmit
//! correlation has entries `t^{|i-j|}` above the diagonal and `(t*)^{|i-j|}` below, with
//! `t = |t| e^{jψ}`.

use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};
use crate::numerics::{hermitian_sqrt, Complex64, ComplexMatrix, RngStream, DEFAULT_TOL};

/// How the phase ψ of the correlation coefficient is chosen per realization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PhasePolicy {
    Fixed(f64),
    /// ψ ~ U[0, 2π), drawn independently for every channel realization.
    UniformRandom,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSpec {
    pub n_tx: usize,
    pub n_rx: usize,
    /// |t|, in [0, 1).
    pub t_mag: f64,
    pub phase: PhasePolicy,
}

impl ChannelSpec {
    pub fn new(n_tx: usize, n_rx: usize, t_mag: f64, phase: PhasePolicy) -> Result<Self> {
        let spec = Self {
            n_tx,
            n_rx,
            t_mag,
            phase,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_tx == 0 {
            return Err(Error::invalid("n_tx", "must be at least 1"));
        }
        if self.n_rx == 0 {
            return Err(Error::invalid("n_rx", "must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.t_mag) {
            return Err(Error::invalid(
                "t_mag",
                format!("{} is outside [0, 1)", self.t_mag),
            ));
        }
        if let PhasePolicy::Fixed(psi) = self.phase {
            if !(0.0..TAU).contains(&psi) {
                return Err(Error::invalid("psi", format!("{psi} is outside [0, 2π)")));
            }
        }
        Ok(())
    }
}

/// One channel realization.
#[derive(Debug, Clone)]
pub struct ChannelSample {
    /// `N_r x N_t`.
    pub h: ComplexMatrix,
    pub psi_used: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PilotSpec {
    /// L
    pub length: usize,
    /// E_p
    pub pilot_energy: f64,
    /// σ_n²
    pub noise_var: f64,
}

impl PilotSpec {
    pub fn new(length: usize, pilot_energy: f64, noise_var: f64) -> Result<Self> {
        let p = Self {
            length,
            pilot_energy,
            noise_var,
        };
        p.validate()?;
        Ok(p)
    }

    /// Unit noise variance with `E_p / σ_n²` given in dB.
    pub fn from_snr_db(length: usize, snr_db: f64) -> Result<Self> {
        Self::new(length, 10f64.powf(snr_db / 10.0), 1.0)
    }

    pub fn snr_db(&self) -> f64 {
        10.0 * (self.pilot_energy / self.noise_var).log10()
    }

    pub fn validate(&self) -> Result<()> {
        if self.length == 0 {
            return Err(Error::invalid("length", "pilot length must be at least 1"));
        }
        if !(self.pilot_energy >= 0.0) || !self.pilot_energy.is_finite() {
            return Err(Error::invalid(
                "pilot_energy",
                "must be finite and non-negative",
            ));
        }
        if !(self.noise_var >= 0.0) || !self.noise_var.is_finite() {
            return Err(Error::invalid(
                "noise_var",
                "must be finite and non-negative",
            ));
        }
        Ok(())
    }
}

/// `R_H` for correlation coefficient `t = t_mag·e^{jψ}`.
pub fn correlation_matrix(spec: &ChannelSpec, psi: f64) -> ComplexMatrix {
    let nr = spec.n_rx as f64;
    let t = Complex64::from_polar(spec.t_mag, psi);
    ComplexMatrix::from_fn(spec.n_tx, spec.n_tx, |i, j| {
        let k = i.abs_diff(j) as i32;
        let v = if i < j { t.powi(k) } else { t.conj().powi(k) };
        v * nr
    })
}

/// Channel sampler with the square root of the ψ = 0 transmit correlation cached.
///
/// Rotating ψ is a diagonal unitary similarity, `R(ψ) = D R(0) D^H` with
/// `D = diag(e^{-jψ i})`, so the square root rotates the same way and the
/// eigendecomposition is needed only once.
#[derive(Debug, Clone)]
pub struct ChannelModel {
    spec: ChannelSpec,
    base_root: ComplexMatrix,
}

impl ChannelModel {
    pub fn new(spec: ChannelSpec) -> Result<Self> {
        spec.validate()?;
        let r0 = correlation_matrix(&spec, 0.0).scale(1.0 / spec.n_rx as f64);
        let base_root = hermitian_sqrt(&r0, DEFAULT_TOL)?;
        Ok(Self { spec, base_root })
    }

    pub fn spec(&self) -> &ChannelSpec {
        &self.spec
    }

    /// `R_t = R_H / N_r`, the per-row covariance of `H`.
    pub fn transmit_correlation(&self, psi: f64) -> ComplexMatrix {
        correlation_matrix(&self.spec, psi).scale(1.0 / self.spec.n_rx as f64)
    }

    /// `R_t^{1/2}` at phase ψ.
    pub fn transmit_root(&self, psi: f64) -> ComplexMatrix {
        let rot = phase_ramp(self.spec.n_tx, psi);
        let s0 = &self.base_root;
        ComplexMatrix::from_fn(self.spec.n_tx, self.spec.n_tx, |i, j| {
            rot[i] * s0[(i, j)] * rot[j].conj()
        })
    }

    pub fn draw_phase(&self, rng: &mut RngStream) -> f64 {
        match self.spec.phase {
            PhasePolicy::Fixed(psi) => psi,
            PhasePolicy::UniformRandom => TAU * rng.uniform(),
        }
    }

    pub fn sample(&self, rng: &mut RngStream) -> ChannelSample {
        let psi = self.draw_phase(rng);
        let (nr, nt) = (self.spec.n_rx, self.spec.n_tx);
        let rot = phase_ramp(nt, psi);
        // H = H_w D S0 D^H
        let hw = ComplexMatrix::from_fn(nr, nt, |_, j| rng.complex_normal() * rot[j]);
        let mut h = &hw * &self.base_root;
        for r in 0..nr {
            for j in 0..nt {
                h[(r, j)] *= rot[j].conj();
            }
        }
        ChannelSample { h, psi_used: psi }
    }
}

fn phase_ramp(n: usize, psi: f64) -> Vec<Complex64> {
    (0..n)
        .map(|i| Complex64::from_polar(1.0, -psi * i as f64))
        .collect()
}

/// Draws ψ according to the spec's policy, then `H` with `E[H^H H] = R_H(ψ)`.
pub fn sample_channel(spec: &ChannelSpec, rng: &mut RngStream) -> Result<ChannelSample> {
    Ok(ChannelModel::new(spec.clone())?.sample(rng))
}

/// Normalized DFT pilots: column `i` is `(1/√N_t)·[e^{j2π i k / L}]_{k=0..N_t}`.
pub fn dft_pilot_matrix(n_tx: usize, length: usize) -> ComplexMatrix {
    let scale = 1.0 / (n_tx as f64).sqrt();
    ComplexMatrix::from_fn(n_tx, length, |k, i| {
        // reduce the exponent first to keep the phase exact for large products
        let m = (i * k) % length;
        Complex64::from_polar(scale, 2.0 * PI * m as f64 / length as f64)
    })
}

/// `Y = sqrt(E_p)·H·P + N`, `N` i.i.d. CN(0, σ_n²).
pub fn pilot_observation(
    ch: &ChannelSample,
    pilots: &PilotSpec,
    p: &ComplexMatrix,
    rng: &mut RngStream,
) -> Result<ComplexMatrix> {
    let h = &ch.h;
    if p.rows() != h.cols() || p.cols() != pilots.length {
        return Err(Error::shape(
            "pilot_observation",
            format!("pilot matrix {}x{}", h.cols(), pilots.length),
            format!("{}x{}", p.rows(), p.cols()),
        ));
    }
    let gain = pilots.pilot_energy.sqrt();
    let sigma = pilots.noise_var.sqrt();
    let mut y = h.matmul(p)?;
    for z in y.as_mut_slice() {
        *z = *z * gain + rng.complex_normal() * sigma;
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn correlation_matrix_known_case() {
        let spec = ChannelSpec::new(3, 4, 0.5, PhasePolicy::Fixed(0.0)).unwrap();
        let r = correlation_matrix(&spec, 0.0);
        let expected = ComplexMatrix::from_rows(&[
            vec![c(4.0), c(2.0), c(1.0)],
            vec![c(2.0), c(4.0), c(2.0)],
            vec![c(1.0), c(2.0), c(4.0)],
        ]);
        assert!(r.sub(&expected).unwrap().frobenius_norm() < 1e-14);
    }

    #[test]
    fn uncorrelated_is_scaled_identity() {
        let spec = ChannelSpec::new(4, 3, 0.0, PhasePolicy::UniformRandom).unwrap();
        let r = correlation_matrix(&spec, 1.234);
        let expected = ComplexMatrix::identity(4).scale(3.0);
        assert!(r.sub(&expected).unwrap().frobenius_norm() < 1e-15);
    }

    #[test]
    fn correlation_is_hermitian_with_nr_diagonal() {
        let spec = ChannelSpec::new(5, 2, 0.8, PhasePolicy::Fixed(1.0)).unwrap();
        let r = correlation_matrix(&spec, 1.0);
        assert!(r.hermitian_defect() < 1e-15);
        for i in 0..5 {
            assert_eq!(r[(i, i)], c(2.0));
        }
        // above the diagonal carries t, below carries conj(t)
        let t = Complex64::from_polar(0.8, 1.0);
        assert!((r[(0, 1)] - t * 2.0).norm() < 1e-15);
        assert!((r[(1, 0)] - t.conj() * 2.0).norm() < 1e-15);
    }

    #[test]
    fn rotated_root_squares_to_rotated_correlation() {
        let spec = ChannelSpec::new(6, 2, 0.9, PhasePolicy::UniformRandom).unwrap();
        let model = ChannelModel::new(spec).unwrap();
        for psi in [0.0, 0.7, 3.0, 5.9] {
            let s = model.transmit_root(psi);
            let back = &s * &s.adjoint();
            let rt = model.transmit_correlation(psi);
            assert!(back.sub(&rt).unwrap().frobenius_norm() < 1e-12);
        }
    }

    #[test]
    fn validation_names_the_field() {
        let err = ChannelSpec::new(2, 2, 1.3, PhasePolicy::UniformRandom).unwrap_err();
        assert!(err.to_string().contains("t_mag"));
        assert!(ChannelSpec::new(0, 2, 0.1, PhasePolicy::UniformRandom).is_err());
        assert!(ChannelSpec::new(2, 2, 0.1, PhasePolicy::Fixed(7.0)).is_err());
        assert!(PilotSpec::new(0, 1.0, 1.0).is_err());
    }

    #[test]
    fn dft_pilots_two_by_two() {
        let p = dft_pilot_matrix(2, 2);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let expected = ComplexMatrix::from_rows(&[vec![c(s), c(s)], vec![c(s), c(-s)]]);
        assert!(p.sub(&expected).unwrap().frobenius_norm() < 1e-15);
    }

    #[test]
    fn dft_pilot_columns_unit_norm_and_first_column_flat() {
        for (nt, l) in [(8, 2), (8, 4), (4, 7), (3, 20)] {
            let p = dft_pilot_matrix(nt, l);
            for j in 0..l {
                let n: f64 = p.column(j).iter().map(|z| z.norm_sqr()).sum();
                assert!((n - 1.0).abs() < 1e-14);
            }
            for k in 0..nt {
                assert!((p[(k, 0)] - c(1.0 / (nt as f64).sqrt())).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn square_dft_pilots_are_unitary() {
        for n in 1..=8 {
            let p = dft_pilot_matrix(n, n);
            let g = &p.adjoint() * &p;
            assert!(g.sub(&ComplexMatrix::identity(n)).unwrap().frobenius_norm() < 1e-12);
        }
    }

    #[test]
    fn noiseless_observation_is_exact_and_shapes_checked() {
        let spec = ChannelSpec::new(4, 2, 0.3, PhasePolicy::Fixed(0.2)).unwrap();
        let ch = sample_channel(&spec, &mut RngStream::new(1, 0)).unwrap();
        let pilots = PilotSpec::new(3, 2.0, 0.0).unwrap();
        let p = dft_pilot_matrix(4, 3);
        let y = pilot_observation(&ch, &pilots, &p, &mut RngStream::new(2, 0)).unwrap();
        let expected = (&ch.h * &p).scale(2f64.sqrt());
        assert!(y.sub(&expected).unwrap().frobenius_norm() < 1e-14);
        let wrong = dft_pilot_matrix(4, 2);
        assert!(matches!(
            pilot_observation(&ch, &pilots, &wrong, &mut RngStream::new(2, 0)),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn observation_is_deterministic_per_seed() {
        let spec = ChannelSpec::new(4, 2, 0.3, PhasePolicy::UniformRandom).unwrap();
        let ch = sample_channel(&spec, &mut RngStream::new(1, 0)).unwrap();
        let pilots = PilotSpec::from_snr_db(4, 0.0).unwrap();
        let p = dft_pilot_matrix(4, 4);
        let a = pilot_observation(&ch, &pilots, &p, &mut RngStream::new(9, 1)).unwrap();
        let b = pilot_observation(&ch, &pilots, &p, &mut RngStream::new(9, 1)).unwrap();
        assert_eq!(a, b);
    }
}

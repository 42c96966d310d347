//! Least-squares and LMMSE channel estimation from the pilot observation.
//!
//! Each row `h` of `H` satisfies `y = sqrt(E_p)·h·P + n` with `E[h^H h] = R_t`, so the
//! row-wise LMMSE estimator is `ĥ = y·G` with
//! `G = (E_p P^H R_t P + σ² I_L)^{-1} · sqrt(E_p)·P^H R_t`, shared by every row.

use crate::error::{Error, Result};
use crate::numerics::{Cholesky, ComplexMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorKind {
    LeastSquares,
    Lmmse,
}

#[derive(Debug, Clone)]
pub struct ChannelEstimate {
    /// `N_r x N_t`.
    pub h_hat: ComplexMatrix,
    pub method: EstimatorKind,
}

fn check_shapes(y: &ComplexMatrix, p: &ComplexMatrix, context: &'static str) -> Result<()> {
    if y.cols() != p.cols() {
        return Err(Error::shape(
            context,
            format!("observation with {} columns", p.cols()),
            format!("{}x{}", y.rows(), y.cols()),
        ));
    }
    Ok(())
}

/// `Ĥ = (1/sqrt(E_p))·Y·P^H·(P·P^H)^{-1}`; needs `L >= N_t` and full-rank pilots.
pub fn ls_estimate(
    y: &ComplexMatrix,
    p: &ComplexMatrix,
    pilot_energy: f64,
) -> Result<ChannelEstimate> {
    check_shapes(y, p, "ls_estimate")?;
    let (n_tx, length) = p.shape();
    if length < n_tx {
        return Err(Error::RankDeficientPilots { length, n_tx });
    }
    if !(pilot_energy > 0.0) {
        return Err(Error::invalid(
            "pilot_energy",
            "least squares needs E_p > 0",
        ));
    }
    let ppt = &p.clone() * &p.adjoint();
    let chol = Cholesky::new(&ppt).map_err(|_| Error::RankDeficientPilots { length, n_tx })?;
    // X^H = (P P^H)^{-1} P Y^H
    let xh = chol.solve(&(p * &y.adjoint()))?;
    Ok(ChannelEstimate {
        h_hat: xh.adjoint().scale(1.0 / pilot_energy.sqrt()),
        method: EstimatorKind::LeastSquares,
    })
}

/// Precomputed LMMSE filter `G` (`L x N_t`) so that `Ĥ = Y·G`.
#[derive(Debug, Clone)]
pub struct LmmseFilter {
    g: ComplexMatrix,
}

impl LmmseFilter {
    pub fn new(
        p: &ComplexMatrix,
        pilot_energy: f64,
        noise_var: f64,
        r_t: &ComplexMatrix,
    ) -> Result<Self> {
        let (n_tx, length) = p.shape();
        if r_t.shape() != (n_tx, n_tx) {
            return Err(Error::shape(
                "lmmse_estimate",
                format!("R_t {n_tx}x{n_tx}"),
                format!("{}x{}", r_t.rows(), r_t.cols()),
            ));
        }
        let ph = p.adjoint();
        let ph_rt = &ph * r_t;
        let mut system = (&ph_rt * p).scale(pilot_energy);
        system.add_real_diag(noise_var);
        // symmetrize against round-off before factoring
        let system = ComplexMatrix::from_fn(length, length, |i, j| {
            (system[(i, j)] + system[(j, i)].conj()) * 0.5
        });
        let chol =
            Cholesky::new(&system).map_err(|_| Error::NumericalSingularity("lmmse_estimate"))?;
        let g = chol.solve(&ph_rt.scale(pilot_energy.sqrt()))?;
        if !g.is_finite() {
            return Err(Error::NumericalSingularity("lmmse_estimate"));
        }
        Ok(Self { g })
    }

    pub fn apply(&self, y: &ComplexMatrix) -> Result<ChannelEstimate> {
        if y.cols() != self.g.rows() {
            return Err(Error::shape("lmmse_estimate", self.g.rows(), y.cols()));
        }
        Ok(ChannelEstimate {
            h_hat: y * &self.g,
            method: EstimatorKind::Lmmse,
        })
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.g
    }
}

/// Row-wise LMMSE estimate of `H`; valid for any pilot length.
pub fn lmmse_estimate(
    y: &ComplexMatrix,
    p: &ComplexMatrix,
    pilot_energy: f64,
    noise_var: f64,
    r_t: &ComplexMatrix,
) -> Result<ChannelEstimate> {
    check_shapes(y, p, "lmmse_estimate")?;
    LmmseFilter::new(p, pilot_energy, noise_var, r_t)?.apply(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{
        dft_pilot_matrix, pilot_observation, ChannelModel, ChannelSpec, PhasePolicy, PilotSpec,
    };
    use crate::numerics::RngStream;

    fn setup(t_mag: f64) -> (ChannelModel, ComplexMatrix) {
        let spec = ChannelSpec::new(4, 3, t_mag, PhasePolicy::Fixed(0.4)).unwrap();
        (ChannelModel::new(spec).unwrap(), dft_pilot_matrix(4, 4))
    }

    #[test]
    fn ls_noiseless_recovers_channel() {
        let (model, p) = setup(0.6);
        let ch = model.sample(&mut RngStream::new(3, 0));
        let pilots = PilotSpec::new(4, 2.0, 0.0).unwrap();
        let y = pilot_observation(&ch, &pilots, &p, &mut RngStream::new(4, 0)).unwrap();
        let est = ls_estimate(&y, &p, 2.0).unwrap();
        assert_eq!(est.method, EstimatorKind::LeastSquares);
        assert!(est.h_hat.sub(&ch.h).unwrap().frobenius_norm() < 1e-9);
    }

    #[test]
    fn ls_rejects_short_pilots() {
        let p = dft_pilot_matrix(4, 2);
        let y = ComplexMatrix::zeros(3, 2);
        assert!(matches!(
            ls_estimate(&y, &p, 1.0),
            Err(Error::RankDeficientPilots { length: 2, n_tx: 4 })
        ));
    }

    #[test]
    fn lmmse_noiseless_limit() {
        let (model, p) = setup(0.6);
        let ch = model.sample(&mut RngStream::new(5, 0));
        // noise-free pilots, filter designed for a vanishing noise level
        let y = ch.h.matmul(&p).unwrap();
        let rt = model.transmit_correlation(ch.psi_used);
        let est = lmmse_estimate(&y, &p, 1.0, 1e-12, &rt).unwrap();
        assert!(est.h_hat.sub(&ch.h).unwrap().frobenius_norm() <= 1e-6);
    }

    #[test]
    fn lmmse_handles_short_pilots() {
        let (model, _) = setup(0.9);
        let p = dft_pilot_matrix(4, 1);
        let ch = model.sample(&mut RngStream::new(7, 0));
        let pilots = PilotSpec::new(1, 1.0, 1.0).unwrap();
        let y = pilot_observation(&ch, &pilots, &p, &mut RngStream::new(8, 0)).unwrap();
        let est = lmmse_estimate(&y, &p, 1.0, 1.0, &model.transmit_correlation(0.4)).unwrap();
        assert_eq!(est.h_hat.shape(), (3, 4));
        assert!(est.h_hat.is_finite());
    }

    #[test]
    fn lmmse_singular_system_reported() {
        let p = dft_pilot_matrix(2, 3);
        let y = ComplexMatrix::zeros(1, 3);
        // rank-2 system of size 3 with no noise loading
        let err = lmmse_estimate(&y, &p, 1.0, 0.0, &ComplexMatrix::identity(2)).unwrap_err();
        assert!(matches!(err, Error::NumericalSingularity(_)));
    }

    #[test]
    fn shape_mismatch_reported() {
        let p = dft_pilot_matrix(2, 3);
        let y = ComplexMatrix::zeros(1, 2);
        assert!(matches!(
            lmmse_estimate(&y, &p, 1.0, 1.0, &ComplexMatrix::identity(2)),
            Err(Error::ShapeMismatch { .. })
        ));
        let y = ComplexMatrix::zeros(1, 3);
        assert!(matches!(
            lmmse_estimate(&y, &p, 1.0, 1.0, &ComplexMatrix::identity(3)),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn estimators_are_deterministic() {
        let (model, p) = setup(0.5);
        let ch = model.sample(&mut RngStream::new(1, 1));
        let pilots = PilotSpec::new(4, 1.0, 0.5).unwrap();
        let y = pilot_observation(&ch, &pilots, &p, &mut RngStream::new(2, 2)).unwrap();
        let rt = model.transmit_correlation(ch.psi_used);
        let a = lmmse_estimate(&y, &p, 1.0, 0.5, &rt).unwrap().h_hat;
        let b = lmmse_estimate(&y, &p, 1.0, 0.5, &rt).unwrap().h_hat;
        assert_eq!(a, b);
    }
}

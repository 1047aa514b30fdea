//! Fisher information and Cramér-Rao bounds for the target angles.
//!
//! The echo mean is `μ = γ a aᴴ W v`, and with `A_ξ` Hermitian its angle
//! derivatives are `∂μ/∂ξ = γ A_ξ W v`. Two CRB flavours are reported:
//! the per-parameter form `1 / F_ii`, which is what the optimizer consumes,
//! and the diagonal of the full 2×2 inverse, which accounts for the
//! cross-information between the two angles.

use nalgebra::Matrix2;
use num_complex::Complex64;

use crate::error::{Angle, Error, Result};
use crate::geometry::SteeringBundle;
use crate::numerics::{ComplexMatrix, ComplexVector};

/// Quadratic forms at or below this value make an angle unobservable.
pub const UNOBSERVABLE_FLOOR: f64 = 1e-30;

#[derive(Debug, Clone, PartialEq)]
pub struct FimReport {
    pub fim: Matrix2<f64>,
    pub crb_theta_diag: f64,
    pub crb_phi_diag: f64,
    /// `+inf` when the 2×2 FIM is singular.
    pub crb_theta_full: f64,
    pub crb_phi_full: f64,
}

fn check_dims(bundle: &SteeringBundle, w: &ComplexMatrix, v: &ComplexVector) -> Result<()> {
    let m = bundle.elements();
    if w.nrows() != m || w.ncols() != v.len() {
        return Err(Error::DimensionMismatch {
            op: "fim",
            expected: (m, v.len()),
            found: w.shape(),
        });
    }
    Ok(())
}

/// `(A_θ W v, A_φ W v)`.
fn echo_gradients(
    bundle: &SteeringBundle,
    w: &ComplexMatrix,
    v: &ComplexVector,
) -> (ComplexVector, ComplexVector) {
    let x = w * v;
    (&bundle.a_theta * &x, &bundle.a_phi * &x)
}

pub fn fim_2x2(
    bundle: &SteeringBundle,
    w: &ComplexMatrix,
    v: &ComplexVector,
    gamma: Complex64,
    noise_var: f64,
) -> Result<Matrix2<f64>> {
    check_dims(bundle, w, v)?;
    if !(noise_var > 0.0) {
        return Err(Error::NonPositive("radar noise variance", noise_var));
    }
    let (gt, gp) = echo_gradients(bundle, w, v);
    let scale = 2.0 * gamma.norm_sqr() / noise_var;
    let tt = gt.norm_squared();
    let pp = gp.norm_squared();
    let tp = gt.dotc(&gp).re;
    Ok(Matrix2::new(tt, tp, tp, pp) * scale)
}

/// `vᴴ Wᴴ A_ξ A_ξ W v` for both angles.
pub fn sensing_forms(
    bundle: &SteeringBundle,
    w: &ComplexMatrix,
    v: &ComplexVector,
) -> Result<(f64, f64)> {
    check_dims(bundle, w, v)?;
    let (gt, gp) = echo_gradients(bundle, w, v);
    Ok((gt.norm_squared(), gp.norm_squared()))
}

pub fn crb(
    bundle: &SteeringBundle,
    w: &ComplexMatrix,
    v: &ComplexVector,
    gamma: Complex64,
    noise_var: f64,
) -> Result<FimReport> {
    let fim = fim_2x2(bundle, w, v, gamma, noise_var)?;
    let (qt, qp) = sensing_forms(bundle, w, v)?;
    if qt <= UNOBSERVABLE_FLOOR {
        return Err(Error::UnobservableAngle(Angle::Theta));
    }
    if qp <= UNOBSERVABLE_FLOOR {
        return Err(Error::UnobservableAngle(Angle::Phi));
    }
    let c = noise_var / (2.0 * gamma.norm_sqr());
    let (crb_theta_full, crb_phi_full) = match fim.try_inverse() {
        Some(inv) if inv[(0, 0)].is_finite() && inv[(0, 0)] > 0.0 && inv[(1, 1)] > 0.0 => {
            (inv[(0, 0)], inv[(1, 1)])
        }
        _ => (f64::INFINITY, f64::INFINITY),
    };
    Ok(FimReport {
        fim,
        crb_theta_diag: c / qt,
        crb_phi_diag: c / qp,
        crb_theta_full,
        crb_phi_full,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_geometry, SystemConfig};
    use crate::numerics::{complex_gaussian_vector, Rng};
    use core::f64::consts::PI;

    fn instance(
        seed: u64,
        elements: usize,
    ) -> (SystemConfig, SteeringBundle, ComplexMatrix, ComplexVector) {
        let cfg = SystemConfig {
            elements,
            rf_chains: 3,
            ..SystemConfig::default()
        };
        let geom = build_geometry(&cfg).unwrap();
        let mut rng = Rng::new(seed, 0);
        let w = geom.beamformer(&rng.unit_interval_vec(elements));
        let v = complex_gaussian_vector(3, &mut rng);
        (cfg.clone(), SteeringBundle::at_target(&cfg), w, v)
    }

    #[test]
    fn zero_beamformer_gives_zero_fim() {
        let (cfg, b, w, v) = instance(1, 16);
        let f = fim_2x2(&b, &(w * Complex64::new(0.0, 0.0)), &v, cfg.gamma, 1.0).unwrap();
        assert_eq!(f, Matrix2::zeros());
    }

    #[test]
    fn fim_scales_with_gamma_squared() {
        let (_, b, w, v) = instance(2, 16);
        let g = Complex64::new(0.3, -0.4);
        let f1 = fim_2x2(&b, &w, &v, g, 0.7).unwrap();
        let f2 = fim_2x2(&b, &w, &v, g * 2.0, 0.7).unwrap();
        assert_eq!(f2, f1 * 4.0);
    }

    #[test]
    fn fim_diagonal_matches_gradient_norm() {
        let (_, b, w, v) = instance(3, 16);
        let g = Complex64::new(1.0, 0.5);
        let f = fim_2x2(&b, &w, &v, g, 0.4).unwrap();
        let direct = 2.0 * g.norm_sqr() / 0.4 * (&b.a_theta * (&w * &v)).norm_squared();
        assert!((f[(0, 0)] - direct).abs() <= 1e-12 * direct);
    }

    #[test]
    fn diagonal_crb_inverts_fim_diagonal() {
        let (cfg, b, w, v) = instance(4, 36);
        let r = crb(&b, &w, &v, cfg.gamma, 0.5).unwrap();
        assert!((r.crb_theta_diag * r.fim[(0, 0)] - 1.0).abs() < 1e-12);
        assert!((r.crb_phi_diag * r.fim[(1, 1)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn crb_linear_in_noise() {
        let (cfg, b, w, v) = instance(5, 36);
        let r1 = crb(&b, &w, &v, cfg.gamma, 0.3).unwrap();
        let r2 = crb(&b, &w, &v, cfg.gamma, 0.6).unwrap();
        assert!((r2.crb_theta_diag / r1.crb_theta_diag - 2.0).abs() < 1e-12);
        assert!((r2.crb_phi_diag / r1.crb_phi_diag - 2.0).abs() < 1e-12);
    }

    #[test]
    fn endfire_theta_is_unobservable() {
        let cfg = SystemConfig {
            theta_t: PI / 2.0,
            elements: 16,
            rf_chains: 2,
            ..SystemConfig::default()
        };
        let geom = build_geometry(&cfg).unwrap();
        let b = SteeringBundle::at_target(&cfg);
        let w = geom.beamformer(&[1.0; 16]);
        let v = ComplexVector::from_element(2, Complex64::new(1.0, 0.0));
        assert_eq!(
            crb(&b, &w, &v, cfg.gamma, 1.0).unwrap_err(),
            Error::UnobservableAngle(Angle::Theta)
        );
    }

    #[test]
    fn full_crb_dominates_diagonal_crb() {
        for seed in 0..100 {
            let (cfg, b, w, v) = instance(100 + seed, 16);
            let r = crb(&b, &w, &v, cfg.gamma, 1.0).unwrap();
            assert!(r.crb_theta_full >= r.crb_theta_diag * (1.0 - 1e-12));
            assert!(r.crb_phi_full >= r.crb_phi_diag * (1.0 - 1e-12));
        }
    }

    #[test]
    fn crb_scales_inverse_with_beam_gain() {
        let (cfg, b, w, v) = instance(6, 36);
        let r1 = crb(&b, &w, &v, cfg.gamma, 1.0).unwrap();
        let r2 = crb(&b, &w, &(&v * Complex64::new(3.0, 0.0)), cfg.gamma, 1.0).unwrap();
        assert!((r1.crb_theta_diag / r2.crb_theta_diag - 9.0).abs() < 1e-12);
        assert!((r1.crb_phi_diag / r2.crb_phi_diag - 9.0).abs() < 1e-12);
    }

    #[test]
    fn fim_is_phase_invariant() {
        let (cfg, b, w, v) = instance(7, 16);
        let f1 = fim_2x2(&b, &w, &v, cfg.gamma, 1.0).unwrap();
        let rot = Complex64::from_polar(1.0, 1.234);
        let f2 = fim_2x2(&b, &w, &(&v * rot), cfg.gamma, 1.0).unwrap();
        assert!((f1 - f2).norm() <= 1e-12 * f1.norm());
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let (cfg, b, w, _) = instance(8, 16);
        let v = ComplexVector::zeros(5);
        assert!(matches!(
            fim_2x2(&b, &w, &v, cfg.gamma, 1.0),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}

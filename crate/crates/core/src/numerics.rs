//! Small complex linear-algebra layer shared by every other module.
//!
//! Dense storage comes from `nalgebra`; this module adds the handful of
//! operations the beamforming math needs on top of it: vector Kronecker
//! products, dimension-checked Hadamard products, a deterministic top
//! eigenpair for Hermitian matrices, and seeded complex Gaussian sampling.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};
use rand_distr::{Distribution, StandardNormal, Uniform};

use crate::error::{Error, Result};

pub type ComplexMatrix = DMatrix<Complex64>;
pub type ComplexVector = DVector<Complex64>;
pub type RealMatrix = DMatrix<f64>;
pub type RealVector = DVector<f64>;

/// Relative Hermitian tolerance accepted by [`hermitian_top_eig`].
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Relative eigenpair residual guaranteed by [`hermitian_top_eig`].
pub const EIG_RESIDUAL_TOL: f64 = 1e-9;
const EIG_MAX_SWEEPS: usize = 10_000;
const PHASE_FIX_FLOOR: f64 = 1e-12;

/// `result[i * q + j] = a[i] * b[j]`.
pub fn kron(a: &ComplexVector, b: &ComplexVector) -> ComplexVector {
    let q = b.len();
    ComplexVector::from_fn(a.len() * q, |k, _| a[k / q] * b[k % q])
}

pub fn hadamard(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    if a.shape() != b.shape() {
        return Err(Error::DimensionMismatch {
            op: "hadamard",
            expected: a.shape(),
            found: b.shape(),
        });
    }
    Ok(a.component_mul(b))
}

/// Largest eigenvalue of a Hermitian matrix with its unit eigenvector.
#[derive(Debug, Clone, PartialEq)]
pub struct TopEigen {
    pub value: f64,
    pub vector: ComplexVector,
}

/// Extracts the algebraically largest eigenpair of a Hermitian matrix.
///
/// The input is symmetrized before decomposition. The returned vector has
/// unit norm and its first entry of modulus above `1e-12` is rotated onto
/// the positive real axis, so repeated calls on the same matrix agree
/// bit-for-bit even when the top eigenvalue is degenerate.
pub fn hermitian_top_eig(a: &ComplexMatrix) -> Result<TopEigen> {
    let n = a.nrows();
    if n == 0 || a.ncols() != n {
        return Err(Error::DimensionMismatch {
            op: "hermitian_top_eig",
            expected: (n, n),
            found: a.shape(),
        });
    }
    if !all_finite(a) {
        return Err(Error::NonFinite);
    }
    let scale = a.norm();
    let deviation = (a - a.adjoint()).norm() / scale.max(1.0);
    if deviation > HERMITIAN_TOL {
        return Err(Error::NotHermitian { deviation });
    }
    let sym = (a + a.adjoint()).scale(0.5);

    let eig = SymmetricEigen::try_new(sym.clone(), f64::EPSILON, EIG_MAX_SWEEPS)
        .ok_or(Error::EigenNoConvergence { residual: f64::NAN })?;
    let (best, &value) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .fold(None, |acc: Option<(usize, &f64)>, (i, v)| match acc {
            Some((_, b)) if *b >= *v => acc,
            _ => Some((i, v)),
        })
        .expect("non-empty spectrum");

    let mut vector: ComplexVector = eig.eigenvectors.column(best).into_owned();
    let norm = vector.norm();
    vector.unscale_mut(norm);
    fix_phase(&mut vector);

    let residual = (&sym * &vector - vector.scale(value)).norm();
    if !residual.is_finite() || residual > EIG_RESIDUAL_TOL * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::EigenNoConvergence { residual });
    }
    Ok(TopEigen { value, vector })
}

/// Rotates `v` so its first non-negligible entry is real and positive.
pub fn fix_phase(v: &mut ComplexVector) {
    if let Some(pivot) = v.iter().find(|z| z.norm() > PHASE_FIX_FLOOR).copied() {
        let rot = pivot.conj() / pivot.norm();
        for z in v.iter_mut() {
            *z *= rot;
        }
        // exact zero imaginary part on the pivot
        if let Some(z) = v.iter_mut().find(|z| z.norm() > PHASE_FIX_FLOOR) {
            z.im = 0.0;
        }
    }
}

pub fn all_finite(a: &ComplexMatrix) -> bool {
    a.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Seeded, splittable random stream.
///
/// Backed by ChaCha20 with the 64-bit stream id mapped onto the cipher's
/// stream counter, so `(master_seed, stream_id)` fully determines the
/// sequence regardless of how trials are scheduled.
#[derive(Debug, Clone)]
pub struct Rng {
    master_seed: u64,
    stream_id: u64,
    inner: ChaCha20Rng,
}

impl Rng {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha20Rng::seed_from_u64(master_seed);
        inner.set_stream(stream_id);
        Self {
            master_seed,
            stream_id,
            inner,
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    /// Uniform sample on the closed interval `[0, 1]`.
    pub fn unit_interval(&mut self) -> f64 {
        Uniform::new_inclusive(0.0, 1.0)
            .expect("valid bounds")
            .sample(&mut self.inner)
    }

    pub fn unit_interval_vec(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.unit_interval()).collect()
    }
}

impl RngCore for Rng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// i.i.d. CN(0, 1) entries: real and imaginary parts each N(0, 1/2).
pub fn complex_gaussian_vector(n: usize, rng: &mut Rng) -> ComplexVector {
    let s = core::f64::consts::FRAC_1_SQRT_2;
    ComplexVector::from_fn(n, |_, _| {
        let re = rng.standard_normal();
        let im = rng.standard_normal();
        Complex64::new(re * s, im * s)
    })
}

/// `x^H A x` for Hermitian `A`, returned as a real number.
pub fn hermitian_form(a: &ComplexMatrix, x: &ComplexVector) -> f64 {
    x.dotc(&(a * x)).re
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn cvec(v: &[Complex64]) -> ComplexVector {
        ComplexVector::from_column_slice(v)
    }

    fn random_hermitian(n: usize, rng: &mut Rng) -> ComplexMatrix {
        let g =
            ComplexMatrix::from_fn(n, n, |_, _| c(rng.standard_normal(), rng.standard_normal()));
        &g + g.adjoint()
    }

    #[test]
    fn kron_examples() {
        let one = c(1.0, 0.0);
        let j = c(0.0, 1.0);
        assert_eq!(kron(&cvec(&[one]), &cvec(&[one, j])), cvec(&[one, j]));
        assert_eq!(
            kron(&cvec(&[one, j]), &cvec(&[one, one])),
            cvec(&[one, one, j, j])
        );
        let z = c(0.0, 0.0);
        assert_eq!(
            kron(&cvec(&[z, z]), &cvec(&[c(5.0, 0.0), c(7.0, 0.0)])),
            cvec(&[z; 4])
        );
    }

    #[test]
    fn hadamard_examples() {
        let eye = ComplexMatrix::identity(2, 2);
        let ones = ComplexMatrix::from_element(2, 2, c(1.0, 0.0));
        assert_eq!(hadamard(&eye, &ones).unwrap(), eye);

        let a =
            ComplexMatrix::from_row_slice(2, 2, &[c(1.0, 0.), c(2.0, 0.), c(3.0, 0.), c(4.0, 0.)]);
        let b =
            ComplexMatrix::from_row_slice(2, 2, &[c(2.0, 0.), c(0.0, 0.), c(0.0, 0.), c(2.0, 0.)]);
        let expected =
            ComplexMatrix::from_row_slice(2, 2, &[c(2.0, 0.), c(0.0, 0.), c(0.0, 0.), c(8.0, 0.)]);
        assert_eq!(hadamard(&a, &b).unwrap(), expected);

        let big = ComplexMatrix::identity(3, 3);
        assert!(matches!(
            hadamard(&eye, &big),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn top_eig_diagonal() {
        let a = ComplexMatrix::from_diagonal(&cvec(&[c(3.0, 0.0), c(1.0, 0.0)]));
        let e = hermitian_top_eig(&a).unwrap();
        assert!((e.value - 3.0).abs() < 1e-14);
        assert!((e.vector[0] - c(1.0, 0.0)).norm() < 1e-14);
        assert!(e.vector[1].norm() < 1e-14);
    }

    #[test]
    fn top_eig_swap_matrix() {
        let a = ComplexMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)]);
        let e = hermitian_top_eig(&a).unwrap();
        let s = core::f64::consts::FRAC_1_SQRT_2;
        assert!((e.value - 1.0).abs() < 1e-14);
        assert!((e.vector[0] - c(s, 0.0)).norm() < 1e-14);
        assert!((e.vector[1] - c(s, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn top_eig_identity_is_deterministic() {
        let a = ComplexMatrix::identity(5, 5);
        let first = hermitian_top_eig(&a).unwrap();
        let second = hermitian_top_eig(&a).unwrap();
        assert_eq!(first, second);
        assert!((first.value - 1.0).abs() < 1e-14);
        assert!((first.vector.norm() - 1.0).abs() < 1e-14);
        let lead = first.vector.iter().find(|z| z.norm() > 1e-12).unwrap();
        assert!(lead.re > 0.0 && lead.im == 0.0);
    }

    #[test]
    fn top_eig_rejects_non_hermitian() {
        let a = ComplexMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(0., 0.), c(0., 0.)]);
        assert!(matches!(
            hermitian_top_eig(&a),
            Err(Error::NotHermitian { .. })
        ));
    }

    #[test]
    fn top_eig_rejects_non_square() {
        let a = ComplexMatrix::zeros(2, 3);
        assert!(matches!(
            hermitian_top_eig(&a),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn top_eig_residual_and_rayleigh_bound() {
        let mut rng = Rng::new(11, 0);
        for trial in 0..100 {
            let n = 1 + (trial * 7) % 64;
            let a = random_hermitian(n, &mut rng);
            let e = hermitian_top_eig(&a).unwrap();
            let residual = (&a * &e.vector - e.vector.scale(e.value)).norm();
            assert!(
                residual <= EIG_RESIDUAL_TOL * a.norm(),
                "n={n} residual={residual}"
            );
            for _ in 0..100 {
                let x = complex_gaussian_vector(n, &mut rng);
                let rq = hermitian_form(&a, &x) / x.norm_squared();
                assert!(e.value >= rq - 1e-9 * a.norm());
            }
        }
    }

    #[test]
    fn gaussian_moments() {
        let mut rng = Rng::new(2024, 3);
        let n = 100_000;
        let v = complex_gaussian_vector(n, &mut rng);
        let mean = v.iter().sum::<Complex64>() / n as f64;
        let var = v.iter().map(|z| (z - mean).norm_sqr()).sum::<f64>() / n as f64;
        assert!(mean.norm() < 0.02, "mean {mean}");
        assert!((0.98..=1.02).contains(&var), "var {var}");
    }

    #[test]
    fn gaussian_is_reproducible() {
        let a = complex_gaussian_vector(32, &mut Rng::new(5, 9));
        let b = complex_gaussian_vector(32, &mut Rng::new(5, 9));
        let other = complex_gaussian_vector(32, &mut Rng::new(5, 10));
        assert_eq!(a, b);
        assert_ne!(a, other);
        let single = complex_gaussian_vector(1, &mut Rng::new(1, 1));
        assert_eq!(single.len(), 1);
        assert!(single[0].re.is_finite() && single[0].im.is_finite());
    }

    #[test]
    fn unit_interval_stays_closed() {
        let mut rng = Rng::new(1, 2);
        let v = rng.unit_interval_vec(10_000);
        assert!(v.iter().all(|x| (0.0..=1.0).contains(x)));
    }

    proptest::proptest! {
        #[test]
        fn kron_is_bilinear(seed in 0u64..1000, p in 1usize..6, q in 1usize..6, ar in -3.0f64..3.0, ai in -3.0f64..3.0) {
            let mut rng = Rng::new(seed, 0);
            let a = complex_gaussian_vector(p, &mut rng);
            let b = complex_gaussian_vector(q, &mut rng);
            let alpha = c(ar, ai);
            let lhs = kron(&a.map(|z| z * alpha), &b);
            let rhs = kron(&a, &b).map(|z| z * alpha);
            proptest::prop_assert!((&lhs - &rhs).norm() <= 1e-12 * rhs.norm().max(1e-300));
        }
    }
}

//! Aperture layout, feed placement, reference-wave phases and planar-array
//! steering vectors.
//!
//! Angle convention: `theta` is measured from the array normal (z axis), so
//! `theta = 0` is boresight; `phi` is the azimuth in the aperture plane.
//! Element `m = m_y * side + m_x` sits at `(m_x * d_x, m_y * d_y, 0)` and the
//! steering vector is ordered as `a_y ⊗ a_x` to match.

use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numerics::{kron, ComplexMatrix, ComplexVector};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Trig values this close to zero are snapped to exactly zero so that the
/// closed-form degenerate cases (`cos(pi/2)`, `sin(pi)`) vanish exactly.
const TRIG_SNAP: f64 = 1e-15;

/// Physical and algorithmic parameters of one holographic JCAS setup.
///
/// Angles are in radians, powers and noise variances in watts, spacings in
/// metres.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    pub frequency_hz: f64,
    pub spacing_x: f64,
    pub spacing_y: f64,
    /// Number of RHS elements `M`; must be a perfect square.
    pub elements: usize,
    /// Number of RF chains, equal to the number of feeds.
    pub rf_chains: usize,
    pub total_power: f64,
    pub noise_var_comm: f64,
    pub noise_var_radar: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Complex reflection coefficient of the target.
    pub gamma: Complex64,
    pub theta_t: f64,
    pub phi_t: f64,
    pub substrate_index: f64,
    /// PGA learning rate.
    pub step_size: f64,
    pub tolerance: f64,
    pub max_outer_iters: usize,
    pub max_pga_iters: usize,
    pub master_seed: u64,
}

impl Default for SystemConfig {
    /// 20 GHz, quarter-wavelength spacing, 6x6 aperture with 3 RF chains,
    /// unit transmit power at 0 dB SNR, target at (45°, 60°).
    fn default() -> Self {
        let frequency_hz = 20e9;
        let wavelength = SPEED_OF_LIGHT / frequency_hz;
        Self {
            frequency_hz,
            spacing_x: wavelength / 4.0,
            spacing_y: wavelength / 4.0,
            elements: 36,
            rf_chains: 3,
            total_power: 1.0,
            noise_var_comm: 1.0,
            noise_var_radar: 1.0,
            alpha: 1.0,
            beta: 1.0,
            gamma: Complex64::new(1.0, 0.0),
            theta_t: PI / 4.0,
            phi_t: PI / 3.0,
            substrate_index: libm::sqrt(3.0),
            step_size: 0.01,
            tolerance: 1e-5,
            max_outer_iters: 100,
            max_pga_iters: 100,
            master_seed: 1,
        }
    }
}

impl SystemConfig {
    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.frequency_hz
    }

    /// Free-space wavenumber `2π/λ`.
    pub fn wavenumber(&self) -> f64 {
        2.0 * PI / self.wavelength()
    }

    /// Magnitude of the guided reference-wave vector, `2π n_s f / c`.
    pub fn reference_wavenumber(&self) -> f64 {
        2.0 * PI * self.substrate_index * self.frequency_hz / SPEED_OF_LIGHT
    }

    /// Elements per side of the square aperture (`√M`), if `M` is a perfect
    /// square.
    pub fn side(&self) -> Option<usize> {
        let side = libm::round(libm::sqrt(self.elements as f64)) as usize;
        (side * side == self.elements).then_some(side)
    }

    /// Sets `σ_n² = σ_r² = P_total / 10^(snr/10)`.
    pub fn set_snr_db(&mut self, snr_db: f64) {
        let noise = self.total_power / libm::pow(10.0, snr_db / 10.0);
        self.noise_var_comm = noise;
        self.noise_var_radar = noise;
    }

    pub fn snr_db(&self) -> f64 {
        10.0 * libm::log10(self.total_power / self.noise_var_comm)
    }

    pub fn with_snr_db(mut self, snr_db: f64) -> Self {
        self.set_snr_db(snr_db);
        self
    }

    /// `β σ_r² / (2|γ|²)`, the weight every CRB term carries in the objective.
    pub fn sensing_weight(&self) -> f64 {
        self.beta * self.noise_var_radar / (2.0 * self.gamma.norm_sqr())
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.frequency_hz,
            self.spacing_x,
            self.spacing_y,
            self.total_power,
            self.noise_var_comm,
            self.noise_var_radar,
            self.alpha,
            self.beta,
            self.gamma.re,
            self.gamma.im,
            self.theta_t,
            self.phi_t,
            self.substrate_index,
            self.step_size,
            self.tolerance,
        ];
        if finite.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidConfig("all parameters must be finite"));
        }
        if self.frequency_hz <= 0.0 {
            return Err(Error::InvalidConfig("frequency must be positive"));
        }
        match self.side() {
            None => return Err(Error::InvalidConfig("M must be a perfect square")),
            Some(side) if side < 2 => {
                return Err(Error::InvalidConfig("sqrt(M) must be at least 2"))
            }
            Some(_) => {}
        }
        let half = self.wavelength() / 2.0;
        if !(self.spacing_x > 0.0 && self.spacing_x < half) {
            return Err(Error::InvalidConfig("d_x must lie in (0, lambda/2)"));
        }
        if !(self.spacing_y > 0.0 && self.spacing_y < half) {
            return Err(Error::InvalidConfig("d_y must lie in (0, lambda/2)"));
        }
        if self.rf_chains < 1 || self.rf_chains > self.elements {
            return Err(Error::InvalidConfig(
                "RF chain count K must satisfy 1 <= K <= M",
            ));
        }
        if self.total_power <= 0.0 {
            return Err(Error::InvalidConfig("P_total must be positive"));
        }
        if self.noise_var_comm <= 0.0 || self.noise_var_radar <= 0.0 {
            return Err(Error::InvalidConfig("noise variances must be positive"));
        }
        if self.alpha < 0.0 || self.beta < 0.0 {
            return Err(Error::InvalidConfig(
                "objective weights alpha, beta must be non-negative",
            ));
        }
        if self.gamma.norm() <= 0.0 {
            return Err(Error::InvalidConfig("|gamma| must be positive"));
        }
        if self.substrate_index <= 0.0 {
            return Err(Error::InvalidConfig("substrate index must be positive"));
        }
        if self.step_size <= 0.0 {
            return Err(Error::InvalidConfig("PGA step size eta must be positive"));
        }
        if self.tolerance <= 0.0 {
            return Err(Error::InvalidConfig("tolerance epsilon must be positive"));
        }
        if self.max_outer_iters < 1 || self.max_pga_iters < 1 {
            return Err(Error::InvalidConfig("iteration caps must be at least 1"));
        }
        Ok(())
    }
}

/// Element grid, feed positions and the fixed reference-wave phase matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayGeometry {
    pub side: usize,
    pub element_positions: Vec<[f64; 3]>,
    pub feed_positions: Vec<[f64; 3]>,
    /// `Φ`, `M × K`.
    pub phase_matrix: ComplexMatrix,
}

impl ArrayGeometry {
    pub fn elements(&self) -> usize {
        self.element_positions.len()
    }

    pub fn rf_chains(&self) -> usize {
        self.phase_matrix.ncols()
    }

    /// Replaces `Φ` with an arbitrary `M × K` matrix (ablations and tests).
    pub fn with_phase_matrix(mut self, phase_matrix: ComplexMatrix) -> Result<Self> {
        if phase_matrix.nrows() != self.elements() {
            return Err(Error::DimensionMismatch {
                op: "with_phase_matrix",
                expected: (self.elements(), phase_matrix.ncols()),
                found: phase_matrix.shape(),
            });
        }
        self.phase_matrix = phase_matrix;
        Ok(self)
    }

    /// `W = diag(w) Φ`.
    pub fn beamformer(&self, weights: &[f64]) -> ComplexMatrix {
        let mut w = self.phase_matrix.clone();
        for (mut row, &wm) in w.row_iter_mut().zip(weights) {
            row *= Complex64::new(wm, 0.0);
        }
        w
    }
}

fn distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    libm::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2])
}

/// Lays out the aperture and computes `Φ[m,k] = exp(-j |k_s| r_mk)`.
///
/// Feeds sit on the `y = 0` edge at `x = (k + 1/2) L_x / K`, with
/// `L_x = (√M − 1) d_x`.
pub fn build_geometry(config: &SystemConfig) -> Result<ArrayGeometry> {
    config.validate()?;
    let side = config.side().expect("validated");
    let k = config.rf_chains;

    let element_positions: Vec<[f64; 3]> = (0..config.elements)
        .map(|m| {
            let (my, mx) = (m / side, m % side);
            [
                mx as f64 * config.spacing_x,
                my as f64 * config.spacing_y,
                0.0,
            ]
        })
        .collect();

    let aperture_x = (side - 1) as f64 * config.spacing_x;
    let feed_positions: Vec<[f64; 3]> = (0..k)
        .map(|f| [(f as f64 + 0.5) * aperture_x / k as f64, 0.0, 0.0])
        .collect();

    let ks = config.reference_wavenumber();
    let phase_matrix = ComplexMatrix::from_fn(config.elements, k, |m, f| {
        let r = distance(&element_positions[m], &feed_positions[f]);
        unit_phasor(-ks * r)
    });

    Ok(ArrayGeometry {
        side,
        element_positions,
        feed_positions,
        phase_matrix,
    })
}

fn unit_phasor(phase: f64) -> Complex64 {
    Complex64::new(libm::cos(phase), libm::sin(phase))
}

fn snap(x: f64) -> f64 {
    if x.abs() < TRIG_SNAP {
        0.0
    } else {
        x
    }
}

/// Direction cosines and per-axis phase increments for one look direction.
#[derive(Debug, Clone, Copy)]
struct Look {
    sin_t: f64,
    cos_t: f64,
    sin_p: f64,
    cos_p: f64,
    kdx: f64,
    kdy: f64,
}

impl Look {
    fn new(theta: f64, phi: f64, config: &SystemConfig) -> Self {
        let kf = config.wavenumber();
        Self {
            sin_t: snap(libm::sin(theta)),
            cos_t: snap(libm::cos(theta)),
            sin_p: snap(libm::sin(phi)),
            cos_p: snap(libm::cos(phi)),
            kdx: kf * config.spacing_x,
            kdy: kf * config.spacing_y,
        }
    }

    fn axis_x(&self, side: usize) -> ComplexVector {
        let step = self.kdx * self.sin_t * self.cos_p;
        ComplexVector::from_fn(side, |n, _| unit_phasor(n as f64 * step))
    }

    fn axis_y(&self, side: usize) -> ComplexVector {
        let step = self.kdy * self.sin_t * self.sin_p;
        ComplexVector::from_fn(side, |n, _| unit_phasor(n as f64 * step))
    }
}

/// `j * scale * [0, 1·e^{c}, 2·e^{2c}, …]` given the axis response `e^{nc}`.
fn axis_derivative(axis: &ComplexVector, scale: f64) -> ComplexVector {
    let js = Complex64::new(0.0, scale);
    ComplexVector::from_fn(axis.len(), |n, _| js * (n as f64) * axis[n])
}

fn side_of(config: &SystemConfig) -> usize {
    config
        .side()
        .expect("steering requires a square aperture (validate the config)")
}

/// `a(θ, φ) = a_y ⊗ a_x`.
pub fn steering_vector(theta: f64, phi: f64, config: &SystemConfig) -> ComplexVector {
    let side = side_of(config);
    let look = Look::new(theta, phi, config);
    kron(&look.axis_y(side), &look.axis_x(side))
}

/// Analytic `(∂a/∂θ, ∂a/∂φ)` via the product rule on `a_y ⊗ a_x`.
pub fn steering_derivatives(
    theta: f64,
    phi: f64,
    config: &SystemConfig,
) -> (ComplexVector, ComplexVector) {
    let side = side_of(config);
    let look = Look::new(theta, phi, config);
    let ax = look.axis_x(side);
    let ay = look.axis_y(side);

    let dax_dt = axis_derivative(&ax, look.kdx * look.cos_t * look.cos_p);
    let day_dt = axis_derivative(&ay, look.kdy * look.cos_t * look.sin_p);
    let dax_dp = axis_derivative(&ax, -look.kdx * look.sin_t * look.sin_p);
    let day_dp = axis_derivative(&ay, look.kdy * look.sin_t * look.cos_p);

    let d_theta = kron(&day_dt, &ax) + kron(&ay, &dax_dt);
    let d_phi = kron(&day_dp, &ax) + kron(&ay, &dax_dp);
    (d_theta, d_phi)
}

/// `A = d a^H + a d^H`: Hermitian with rank at most two.
pub fn sensitivity_from(a: &ComplexVector, d: &ComplexVector) -> ComplexMatrix {
    let outer = d * a.adjoint();
    let adj = outer.adjoint();
    outer + adj
}

pub fn sensitivity_matrices(
    theta: f64,
    phi: f64,
    config: &SystemConfig,
) -> (ComplexMatrix, ComplexMatrix) {
    let a = steering_vector(theta, phi, config);
    let (dt, dp) = steering_derivatives(theta, phi, config);
    (sensitivity_from(&a, &dt), sensitivity_from(&a, &dp))
}

/// Steering vector at the target together with its derivatives and the
/// derived sensitivity matrices `A_θ`, `A_φ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SteeringBundle {
    pub theta: f64,
    pub phi: f64,
    pub a: ComplexVector,
    pub da_dtheta: ComplexVector,
    pub da_dphi: ComplexVector,
    pub a_theta: ComplexMatrix,
    pub a_phi: ComplexMatrix,
}

impl SteeringBundle {
    pub fn new(theta: f64, phi: f64, config: &SystemConfig) -> Self {
        let a = steering_vector(theta, phi, config);
        let (da_dtheta, da_dphi) = steering_derivatives(theta, phi, config);
        Self::from_parts(theta, phi, a, da_dtheta, da_dphi)
    }

    /// Bundle for the configured target direction.
    pub fn at_target(config: &SystemConfig) -> Self {
        Self::new(config.theta_t, config.phi_t, config)
    }

    /// Builds a bundle from externally supplied derivatives.
    pub fn from_parts(
        theta: f64,
        phi: f64,
        a: ComplexVector,
        da_dtheta: ComplexVector,
        da_dphi: ComplexVector,
    ) -> Self {
        let a_theta = sensitivity_from(&a, &da_dtheta);
        let a_phi = sensitivity_from(&a, &da_dphi);
        Self {
            theta,
            phi,
            a,
            da_dtheta,
            da_dphi,
            a_theta,
            a_phi,
        }
    }

    pub fn elements(&self) -> usize {
        self.a.len()
    }
}

//! Alternating MM optimization of the digital and holographic beamformers.
//!
//! Each outer iteration linearizes both inverse-quadratic CRB terms around
//! the current point with the tangent expansion
//! `1/x ≈ 2/x₀ − x/x₀²`, which turns the weighted rate/CRB objective into
//! a quadratic form. The digital beamformer then takes the dominant
//! eigenvector of the resulting `K × K` matrix, scaled to the power budget;
//! the holographic amplitudes run projected gradient ascent on the `M × M`
//! real quadratic over the box `[0, 1]^M`.
//!
//! The tangent expansion of the convex `1/x` lies *below* `1/x`, so the
//! surrogate over-estimates the objective instead of bounding it from below.
//! Monotone ascent of the true objective is therefore not guaranteed by
//! construction; convergence is monitored on the rate and CRB deltas.

use alloc::vec::Vec;

use num_complex::Complex64;

use crate::comms::{rate_from_power, received_power, tx_power, Channel};
use crate::error::{Angle, Error, Result};
use crate::geometry::{ArrayGeometry, SteeringBundle, SystemConfig};
use crate::numerics::{
    hermitian_form, hermitian_top_eig, ComplexMatrix, ComplexVector, RealMatrix,
};
use crate::sensing::{crb, UNOBSERVABLE_FLOOR};

/// Eigenvectors whose image `‖W e‖` falls below this are rejected.
pub const NULL_SPACE_FLOOR: f64 = 1e-14;
/// Backtracking never shrinks the PGA step below this value.
pub const MIN_STEP: f64 = 1e-6;
/// Initial holographic amplitude on every element.
pub const INITIAL_WEIGHT: f64 = 0.5;

/// Holographic amplitudes, digital beamformer and the derived `W = diag(w) Φ`.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformerState {
    pub weights: Vec<f64>,
    pub digital: ComplexVector,
    pub beamformer: ComplexMatrix,
}

impl BeamformerState {
    pub fn new(geometry: &ArrayGeometry, weights: Vec<f64>, digital: ComplexVector) -> Self {
        let beamformer = geometry.beamformer(&weights);
        Self {
            weights,
            digital,
            beamformer,
        }
    }

    pub fn tx_power(&self) -> f64 {
        (&self.beamformer * &self.digital).norm_squared()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveBreakdown {
    /// `|hᴴ W v|²`, watts.
    pub comm_term: f64,
    pub crb_theta: f64,
    pub crb_phi: f64,
    /// `α · comm_term − β · (crb_theta + crb_phi)`.
    pub weighted_objective: f64,
    pub rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    ToleranceMet,
    IterationCap,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub rate: f64,
    pub crb_theta: f64,
    pub crb_phi: f64,
    pub weighted_objective: f64,
    pub tx_power: f64,
    pub pga_iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTrace {
    pub records: Vec<IterationRecord>,
    pub termination: Termination,
}

impl ConvergenceTrace {
    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    pub fn converged(&self) -> bool {
        self.termination == Termination::ToleranceMet
    }
}

/// Tangent expansion of `1/x` at `x0`: `2/x0 − x/x0²`.
///
/// This is a global *lower* bound on `1/x` (it differs from `1/x` by
/// `(x − x0)² / (x x0²)`), touching it only at `x = x0`.
pub fn surrogate_inv_quadratic(x: f64, x0: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::NonPositive("x", x));
    }
    if !(x0 > 0.0) {
        return Err(Error::NonPositive("x0", x0));
    }
    Ok(2.0 / x0 - x / (x0 * x0))
}

fn check_problem(h: &Channel, w: &ComplexMatrix, bundle: &SteeringBundle) -> Result<()> {
    if h.len() != w.nrows() || bundle.elements() != w.nrows() {
        return Err(Error::DimensionMismatch {
            op: "optimizer",
            expected: (bundle.elements(), w.ncols()),
            found: (h.len(), w.nrows()),
        });
    }
    Ok(())
}

/// `B_ξ = Wᴴ A_ξ A_ξ W` for both angles.
pub fn sensing_blocks(
    bundle: &SteeringBundle,
    w: &ComplexMatrix,
) -> (ComplexMatrix, ComplexMatrix) {
    let at = &bundle.a_theta * w;
    let ap = &bundle.a_phi * w;
    (at.ad_mul(&at), ap.ad_mul(&ap))
}

fn expansion_point(value: f64, angle: Angle) -> Result<f64> {
    if value > UNOBSERVABLE_FLOOR {
        Ok(value)
    } else {
        Err(Error::DegenerateExpansionPoint(angle))
    }
}

/// Digital-step majorization matrix
/// `α Wᴴ h hᴴ W + (βσ_r²/2|γ|²) [B_θ/(v_tᴴ B_θ v_t)² + B_φ/(v_tᴴ B_φ v_t)²]`.
pub fn digital_majorizer(
    h: &Channel,
    geometry: &ArrayGeometry,
    weights: &[f64],
    bundle: &SteeringBundle,
    v_t: &ComplexVector,
    config: &SystemConfig,
) -> Result<ComplexMatrix> {
    let w = geometry.beamformer(weights);
    digital_majorizer_for(h, &w, bundle, v_t, config)
}

pub(crate) fn digital_majorizer_for(
    h: &Channel,
    w: &ComplexMatrix,
    bundle: &SteeringBundle,
    v_t: &ComplexVector,
    config: &SystemConfig,
) -> Result<ComplexMatrix> {
    check_problem(h, w, bundle)?;
    if v_t.len() != w.ncols() {
        return Err(Error::DimensionMismatch {
            op: "digital_majorizer",
            expected: (w.ncols(), 1),
            found: (v_t.len(), 1),
        });
    }
    let g = w.ad_mul(h.gains());
    let mut m = (&g * g.adjoint()) * Complex64::new(config.alpha, 0.0);
    if config.beta > 0.0 {
        let (bt, bp) = sensing_blocks(bundle, w);
        let xt = expansion_point(hermitian_form(&bt, v_t), Angle::Theta)?;
        let xp = expansion_point(hermitian_form(&bp, v_t), Angle::Phi)?;
        let c = config.sensing_weight();
        m += bt * Complex64::new(c / (xt * xt), 0.0);
        m += bp * Complex64::new(c / (xp * xp), 0.0);
    }
    Ok(m)
}

/// Surrogate objective `Q(v | v_t) = α|hᴴ W v|² − β (S_θ + S_φ)` where
/// `S_ξ = (σ_r²/2|γ|²) (2/x₀ − vᴴ B_ξ v / x₀²)`.
pub fn digital_surrogate(
    v: &ComplexVector,
    v_t: &ComplexVector,
    h: &Channel,
    w: &ComplexMatrix,
    bundle: &SteeringBundle,
    config: &SystemConfig,
) -> Result<f64> {
    check_problem(h, w, bundle)?;
    let (bt, bp) = sensing_blocks(bundle, w);
    let c = config.noise_var_radar / (2.0 * config.gamma.norm_sqr());
    let xt0 = expansion_point(hermitian_form(&bt, v_t), Angle::Theta)?;
    let xp0 = expansion_point(hermitian_form(&bp, v_t), Angle::Phi)?;
    let st = c * surrogate_inv_quadratic(hermitian_form(&bt, v), xt0)?;
    let sp = c * surrogate_inv_quadratic(hermitian_form(&bp, v), xp0)?;
    Ok(config.alpha * received_power(h, w, v)? - config.beta * (st + sp))
}

/// Dominant eigenvector of `M_t`, scaled so that `‖W v‖² = P_total`.
pub fn update_digital(
    m_t: &ComplexMatrix,
    w: &ComplexMatrix,
    total_power: f64,
) -> Result<ComplexVector> {
    if m_t.nrows() != w.ncols() {
        return Err(Error::DimensionMismatch {
            op: "update_digital",
            expected: (w.ncols(), w.ncols()),
            found: m_t.shape(),
        });
    }
    let top = hermitian_top_eig(m_t)?;
    let norm = (w * &top.vector).norm();
    if !(norm >= NULL_SPACE_FLOOR) {
        return Err(Error::NullSpaceEigenvector { norm });
    }
    Ok(top.vector * Complex64::new(libm::sqrt(total_power) / norm, 0.0))
}

/// Rescales `v` so that `‖W v‖² = P_total` after `W` has changed.
pub fn rescale_to_budget(
    v: &ComplexVector,
    w: &ComplexMatrix,
    total_power: f64,
) -> Result<ComplexVector> {
    let norm = (w * v).norm();
    if !(norm >= NULL_SPACE_FLOOR) {
        return Err(Error::NullSpaceEigenvector { norm });
    }
    Ok(v * Complex64::new(libm::sqrt(total_power) / norm, 0.0))
}

/// Hermitian `M × M` forms whose quadratic forms over real `w` give the
/// received power and the two CRB denominators.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticForms {
    /// `wᵀ Q_c w = |hᴴ diag(w) Φ v|²`.
    pub comm: ComplexMatrix,
    /// `wᵀ Q_θ w = vᴴ Wᴴ A_θ A_θ W v`.
    pub theta: ComplexMatrix,
    pub phi: ComplexMatrix,
}

/// `A_θ A_θ` and `A_φ A_φ`; fixed for a given target direction.
#[derive(Debug, Clone, PartialEq)]
pub struct SensingGrams {
    pub theta: ComplexMatrix,
    pub phi: ComplexMatrix,
}

impl SensingGrams {
    pub fn new(bundle: &SteeringBundle) -> Self {
        Self {
            theta: &bundle.a_theta * &bundle.a_theta,
            phi: &bundle.a_phi * &bundle.a_phi,
        }
    }
}

pub fn build_quadratic_forms(
    phase: &ComplexMatrix,
    v: &ComplexVector,
    h: &Channel,
    bundle: &SteeringBundle,
) -> Result<QuadraticForms> {
    quadratic_forms_with(phase, v, h, &SensingGrams::new(bundle))
}

pub fn quadratic_forms_with(
    phase: &ComplexMatrix,
    v: &ComplexVector,
    h: &Channel,
    grams: &SensingGrams,
) -> Result<QuadraticForms> {
    let m = phase.nrows();
    if phase.ncols() != v.len() || h.len() != m || grams.theta.nrows() != m {
        return Err(Error::DimensionMismatch {
            op: "build_quadratic_forms",
            expected: (m, v.len()),
            found: phase.shape(),
        });
    }
    let u = phase * v;
    let g = u.zip_map(h.gains(), |ui, hi| ui * hi.conj());
    let comm = &g * g.adjoint();
    let weigh = |gram: &ComplexMatrix| {
        ComplexMatrix::from_fn(m, m, |i, j| u[i].conj() * gram[(i, j)] * u[j])
    };
    Ok(QuadraticForms {
        comm,
        theta: weigh(&grams.theta),
        phi: weigh(&grams.phi),
    })
}

/// `wᵀ Re(Q) w`.
pub fn real_form(q: &ComplexMatrix, w: &[f64]) -> f64 {
    let n = w.len();
    let mut acc = 0.0;
    for j in 0..n {
        let mut col = 0.0;
        for i in 0..n {
            col += q[(i, j)].re * w[i];
        }
        acc += col * w[j];
    }
    acc
}

/// Holographic-step majorization matrix
/// `Re(α Q_c + (βσ_r²/2|γ|²)[Q_θ/(w_tᵀ Q_θ w_t)² + Q_φ/(w_tᵀ Q_φ w_t)²])`.
///
/// The sensing terms enter with a positive sign so that maximizing
/// `wᵀ M w` maximizes the linearized objective.
pub fn holo_majorizer(
    forms: &QuadraticForms,
    w_t: &[f64],
    config: &SystemConfig,
) -> Result<RealMatrix> {
    let m = w_t.len();
    if forms.comm.nrows() != m {
        return Err(Error::DimensionMismatch {
            op: "holo_majorizer",
            expected: (m, m),
            found: forms.comm.shape(),
        });
    }
    let mut out = forms.comm.map(|z| z.re * config.alpha);
    if config.beta > 0.0 {
        let xt = expansion_point(real_form(&forms.theta, w_t), Angle::Theta)?;
        let xp = expansion_point(real_form(&forms.phi, w_t), Angle::Phi)?;
        let c = config.sensing_weight();
        let (ct, cp) = (c / (xt * xt), c / (xp * xp));
        out.zip_zip_apply(&forms.theta, &forms.phi, |o, qt, qp| {
            *o += ct * qt.re + cp * qp.re;
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PgaOutcome {
    pub weights: Vec<f64>,
    pub iterations: usize,
    /// `wᵀ M w` at the start and after every accepted step.
    pub values: Vec<f64>,
}

fn mat_vec(m: &RealMatrix, w: &[f64]) -> Vec<f64> {
    let n = w.len();
    let mut out = alloc::vec![0.0; n];
    for (j, &wj) in w.iter().enumerate() {
        if wj == 0.0 {
            continue;
        }
        for (o, mij) in out.iter_mut().zip(m.column(j).iter()) {
            *o += mij * wj;
        }
    }
    out
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Projected gradient ascent on `wᵀ M w` over `[0, 1]^M`.
///
/// Each step is `w ← clamp(w + η · 2 M w, 0, 1)`. If a step would lower the
/// objective, η is halved for that step only (down to [`MIN_STEP`]); a step
/// that still fails at the floor ends the run. Stops once
/// `‖Δw‖ / max(1, ‖w‖) < tol` or after `max_iters` steps.
pub fn pga_update(
    w0: &[f64],
    m_w: &RealMatrix,
    step: f64,
    max_iters: usize,
    tol: f64,
) -> PgaOutcome {
    pga_update_observed(w0, m_w, step, max_iters, tol, |_, _, _| {})
}

/// [`pga_update`] with a callback on every accepted iterate
/// `(inner_index, w, wᵀ M w)`.
pub fn pga_update_observed<F>(
    w0: &[f64],
    m_w: &RealMatrix,
    step: f64,
    max_iters: usize,
    tol: f64,
    mut on_iterate: F,
) -> PgaOutcome
where
    F: FnMut(usize, &[f64], f64),
{
    let mut w: Vec<f64> = w0.iter().map(|x| x.clamp(0.0, 1.0)).collect();
    let mut mw = mat_vec(m_w, &w);
    let mut value = dot(&w, &mw);
    let mut values = alloc::vec![value];
    let mut iterations = 0;

    while iterations < max_iters {
        iterations += 1;
        let mut eta = step;
        let accepted = loop {
            let cand: Vec<f64> = w
                .iter()
                .zip(&mw)
                .map(|(wi, gi)| (wi + eta * 2.0 * gi).clamp(0.0, 1.0))
                .collect();
            let mc = mat_vec(m_w, &cand);
            let vc = dot(&cand, &mc);
            if vc >= value {
                break Some((cand, mc, vc));
            }
            eta *= 0.5;
            if eta < MIN_STEP {
                break None;
            }
        };
        let Some((cand, mc, vc)) = accepted else {
            break;
        };
        let diff = libm::sqrt(cand.iter().zip(&w).map(|(a, b)| (a - b) * (a - b)).sum());
        let scale = libm::sqrt(dot(&w, &w)).max(1.0);
        w = cand;
        mw = mc;
        value = vc;
        values.push(value);
        on_iterate(iterations, &w, value);
        if diff / scale < tol {
            break;
        }
    }
    PgaOutcome {
        weights: w,
        iterations,
        values,
    }
}

/// Rate, per-parameter CRBs and the weighted objective for one state.
pub fn evaluate_objective(
    state: &BeamformerState,
    h: &Channel,
    bundle: &SteeringBundle,
    config: &SystemConfig,
) -> Result<ObjectiveBreakdown> {
    check_problem(h, &state.beamformer, bundle)?;
    let comm_term = received_power(h, &state.beamformer, &state.digital)?;
    let report = crb(
        bundle,
        &state.beamformer,
        &state.digital,
        config.gamma,
        config.noise_var_radar,
    )?;
    let (crb_theta, crb_phi) = (report.crb_theta_diag, report.crb_phi_diag);
    Ok(ObjectiveBreakdown {
        comm_term,
        crb_theta,
        crb_phi,
        weighted_objective: config.alpha * comm_term - config.beta * (crb_theta + crb_phi),
        rate: rate_from_power(comm_term, config.noise_var_comm),
    })
}

/// Hooks into the alternating loop; every method defaults to a no-op.
pub trait Observer {
    /// Called right after each digital update.
    fn on_digital(
        &mut self,
        _iteration: usize,
        _digital: &ComplexVector,
        _beamformer: &ComplexMatrix,
    ) {
    }

    /// Called on every accepted PGA iterate.
    fn on_pga_iterate(&mut self, _iteration: usize, _inner: usize, _weights: &[f64], _value: f64) {}
}

impl Observer for () {}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct OptimizeOptions {
    /// Starting amplitudes; all [`INITIAL_WEIGHT`] when `None`.
    pub initial_weights: Option<Vec<f64>>,
    /// Skip the holographic step and keep the initial amplitudes.
    pub hold_weights: bool,
}

/// Rate-only initial digital beamformer: dominant eigenvector of
/// `Wᴴ h hᴴ W`, scaled to the power budget.
pub fn matched_digital(h: &Channel, w: &ComplexMatrix, total_power: f64) -> Result<ComplexVector> {
    if h.len() != w.nrows() {
        return Err(Error::DimensionMismatch {
            op: "matched_digital",
            expected: (w.nrows(), 1),
            found: (h.len(), 1),
        });
    }
    let g = w.ad_mul(h.gains());
    update_digital(&(&g * g.adjoint()), w, total_power)
}

/// Runs the alternating optimization from the default starting point.
pub fn optimize(
    config: &SystemConfig,
    h: &Channel,
    geometry: &ArrayGeometry,
) -> Result<(BeamformerState, ConvergenceTrace)> {
    optimize_with(config, h, geometry, &OptimizeOptions::default(), &mut ())
}

pub fn optimize_with<O: Observer + ?Sized>(
    config: &SystemConfig,
    h: &Channel,
    geometry: &ArrayGeometry,
    options: &OptimizeOptions,
    observer: &mut O,
) -> Result<(BeamformerState, ConvergenceTrace)> {
    config.validate()?;
    let m = geometry.elements();
    if h.len() != m || config.elements != m {
        return Err(Error::DimensionMismatch {
            op: "optimize",
            expected: (m, geometry.rf_chains()),
            found: (h.len(), config.elements),
        });
    }
    let bundle = SteeringBundle::at_target(config);
    let grams = SensingGrams::new(&bundle);

    let weights = match &options.initial_weights {
        Some(w) if w.len() == m => w.iter().map(|x| x.clamp(0.0, 1.0)).collect(),
        Some(w) => {
            return Err(Error::DimensionMismatch {
                op: "optimize",
                expected: (m, 1),
                found: (w.len(), 1),
            })
        }
        None => alloc::vec![INITIAL_WEIGHT; m],
    };
    let beamformer = geometry.beamformer(&weights);
    let digital = matched_digital(h, &beamformer, config.total_power)?;
    let mut state = BeamformerState {
        weights,
        digital,
        beamformer,
    };
    let mut previous = evaluate_objective(&state, h, &bundle, config)?;
    let mut records = Vec::new();
    let mut termination = Termination::IterationCap;

    for t in 0..config.max_outer_iters {
        let step = |e: Error| e.at_iteration(t);

        let m_t = digital_majorizer_for(h, &state.beamformer, &bundle, &state.digital, config)
            .map_err(step)?;
        state.digital =
            update_digital(&m_t, &state.beamformer, config.total_power).map_err(step)?;
        observer.on_digital(t, &state.digital, &state.beamformer);

        let mut pga_iterations = 0;
        if !options.hold_weights {
            let forms = quadratic_forms_with(&geometry.phase_matrix, &state.digital, h, &grams)
                .map_err(step)?;
            let m_w = holo_majorizer(&forms, &state.weights, config).map_err(step)?;
            let outcome = pga_update_observed(
                &state.weights,
                &m_w,
                config.step_size,
                config.max_pga_iters,
                config.tolerance,
                |inner, w, value| observer.on_pga_iterate(t, inner, w, value),
            );
            pga_iterations = outcome.iterations;
            state.weights = outcome.weights;
            state.beamformer = geometry.beamformer(&state.weights);
            state.digital =
                rescale_to_budget(&state.digital, &state.beamformer, config.total_power)
                    .map_err(step)?;
        }

        let current = evaluate_objective(&state, h, &bundle, config).map_err(step)?;
        records.push(IterationRecord {
            iteration: t + 1,
            rate: current.rate,
            crb_theta: current.crb_theta,
            crb_phi: current.crb_phi,
            weighted_objective: current.weighted_objective,
            tx_power: tx_power(&state.beamformer, &state.digital).map_err(step)?,
            pga_iterations,
        });
        let settled = (current.rate - previous.rate).abs() < config.tolerance
            && (current.crb_theta - previous.crb_theta).abs() < config.tolerance
            && (current.crb_phi - previous.crb_phi).abs() < config.tolerance;
        previous = current;
        if settled {
            termination = Termination::ToleranceMet;
            break;
        }
    }

    Ok((
        state,
        ConvergenceTrace {
            records,
            termination,
        },
    ))
}

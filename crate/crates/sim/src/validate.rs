//! Numerical self-checks run by `holo-jcas validate`.
//!
//! Each check compares a closed form against an independent numerical
//! evaluation (finite differences, direct products, brute-force grids).

use std::f64::consts::PI;
use std::time::Instant;

use holojcas_core::comms::{rayleigh_channel, received_power};
use holojcas_core::geometry::{
    build_geometry, steering_derivatives, steering_vector, SteeringBundle, SystemConfig,
};
use holojcas_core::numerics::{complex_gaussian_vector, ComplexMatrix, ComplexVector, Rng};
use holojcas_core::optimizer::{
    build_quadratic_forms, digital_surrogate, optimize_with, real_form, surrogate_inv_quadratic,
    Observer, OptimizeOptions,
};
use holojcas_core::sensing::{crb, fim_2x2, sensing_forms};
use num_complex::Complex64;

use crate::harness::{benchmark_solution, trial_channel};

const SEED: u64 = 0x5eed;

/// Deliberate defects used to confirm that the checks can fail.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Fault {
    /// Negates `∂a/∂θ` (and hence `A_θ`).
    FlipThetaDerivative,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    /// Worst observed error or the first violation.
    pub detail: String,
    pub seconds: f64,
}

struct Subject {
    fault: Option<Fault>,
}

impl Subject {
    fn derivatives(
        &self,
        theta: f64,
        phi: f64,
        cfg: &SystemConfig,
    ) -> (ComplexVector, ComplexVector) {
        let (dt, dp) = steering_derivatives(theta, phi, cfg);
        match self.fault {
            Some(Fault::FlipThetaDerivative) => (-dt, dp),
            None => (dt, dp),
        }
    }

    fn bundle(&self, cfg: &SystemConfig) -> SteeringBundle {
        let (dt, dp) = self.derivatives(cfg.theta_t, cfg.phi_t, cfg);
        let a = steering_vector(cfg.theta_t, cfg.phi_t, cfg);
        SteeringBundle::from_parts(cfg.theta_t, cfg.phi_t, a, dt, dp)
    }
}

type Outcome = std::result::Result<String, String>;
type Check = fn(&Subject) -> Outcome;

fn sized(elements: usize, rf_chains: usize) -> SystemConfig {
    SystemConfig {
        elements,
        rf_chains,
        ..SystemConfig::default()
    }
}

fn check_derivatives(s: &Subject) -> Outcome {
    let cfg = sized(100, 3);
    let mut rng = Rng::new(SEED, 1);
    let step = 1e-6;
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let theta = PI * rng.unit_interval();
        let phi = 2.0 * PI * rng.unit_interval();
        let (dt, dp) = s.derivatives(theta, phi, &cfg);
        let fd = |t: f64, p: f64| {
            (steering_vector(theta + t, phi + p, &cfg) - steering_vector(theta - t, phi - p, &cfg))
                / Complex64::new(2.0 * step, 0.0)
        };
        for (analytic, numeric) in [(dt, fd(step, 0.0)), (dp, fd(0.0, step))] {
            let err = (&analytic - &numeric).norm() / analytic.norm().max(1e-12);
            worst = worst.max(err);
            if !(err < 1e-6) {
                return Err(format!(
                    "relative error {err:e} at theta={theta:.4}, phi={phi:.4}"
                ));
            }
        }
    }
    Ok(format!("max relative error {worst:e}"))
}

fn echo_mean(cfg: &SystemConfig, theta: f64, phi: f64, x: &ComplexVector) -> ComplexVector {
    let a = steering_vector(theta, phi, cfg);
    &a * (a.dotc(x) * cfg.gamma)
}

fn check_fim(s: &Subject) -> Outcome {
    let mut rng = Rng::new(SEED, 2);
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let mut cfg = sized(16, 3);
        cfg.theta_t = 0.2 + 1.2 * rng.unit_interval();
        cfg.phi_t = 2.0 * PI * rng.unit_interval();
        cfg.gamma = Complex64::new(rng.standard_normal(), rng.standard_normal());
        let geometry = build_geometry(&cfg).map_err(|e| e.to_string())?;
        let w = geometry.beamformer(&rng.unit_interval_vec(16));
        let v = complex_gaussian_vector(3, &mut rng);
        let noise = 0.5 + rng.unit_interval();
        let f = fim_2x2(&s.bundle(&cfg), &w, &v, cfg.gamma, noise).map_err(|e| e.to_string())?;

        let x = &w * &v;
        let h = 1e-5;
        let grad = |t: f64, p: f64| {
            (echo_mean(&cfg, cfg.theta_t + t, cfg.phi_t + p, &x)
                - echo_mean(&cfg, cfg.theta_t - t, cfg.phi_t - p, &x))
                / Complex64::new(2.0 * h, 0.0)
        };
        let g = [grad(h, 0.0), grad(0.0, h)];
        for i in 0..2 {
            for j in 0..2 {
                let numeric = 2.0 / noise * g[i].dotc(&g[j]).re;
                let err = (f[(i, j)] - numeric).abs() / f.norm();
                worst = worst.max(err);
                if !(err < 1e-5) {
                    return Err(format!("F[{i},{j}] = {} vs numeric {numeric}", f[(i, j)]));
                }
            }
        }
    }
    Ok(format!("max relative error {worst:e}"))
}

fn check_quadratic_forms(s: &Subject) -> Outcome {
    let base = sized(36, 3);
    let geometry = build_geometry(&base).map_err(|e| e.to_string())?;
    let mut rng = Rng::new(SEED, 3);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let mut cfg = base.clone();
        cfg.theta_t = 0.1 + 1.3 * rng.unit_interval();
        cfg.phi_t = 2.0 * PI * rng.unit_interval();
        let bundle = s.bundle(&cfg);
        let h = rayleigh_channel(36, &mut rng);
        let v = complex_gaussian_vector(3, &mut rng);
        let w = rng.unit_interval_vec(36);
        let q = build_quadratic_forms(&geometry.phase_matrix, &v, &h, &bundle)
            .map_err(|e| e.to_string())?;
        let bf = ComplexMatrix::from_fn(36, 3, |m, k| geometry.phase_matrix[(m, k)] * w[m]);
        let x = &bf * &v;
        let direct = [
            received_power(&h, &bf, &v).map_err(|e| e.to_string())?,
            (&bundle.a_theta * &x).norm_squared(),
            (&bundle.a_phi * &x).norm_squared(),
        ];
        for (form, d) in [&q.comm, &q.theta, &q.phi].into_iter().zip(direct) {
            let err = (real_form(form, &w) - d).abs() / d.abs();
            worst = worst.max(err);
            if !(err < 1e-10) {
                return Err(format!("relative error {err:e}"));
            }
        }
    }
    Ok(format!("max relative error {worst:e}"))
}

fn check_tangent_bound(_: &Subject) -> Outcome {
    let n = 100;
    let grid: Vec<f64> = (0..n)
        .map(|i| 10f64.powf(-6.0 + 12.0 * i as f64 / (n - 1) as f64))
        .collect();
    for &x in &grid {
        for &x0 in &grid {
            let s = surrogate_inv_quadratic(x, x0).map_err(|e| e.to_string())?;
            let ok = if x == x0 {
                (s - 1.0 / x).abs() <= 1e-15 / x
            } else {
                s < 1.0 / x
            };
            if !ok {
                return Err(format!("bound violated at x={x:e}, x0={x0:e}"));
            }
        }
    }
    Ok(format!("{} grid points", n * n))
}

fn check_surrogate_tangency(s: &Subject) -> Outcome {
    let cfg = sized(36, 3);
    let geometry = build_geometry(&cfg).map_err(|e| e.to_string())?;
    let bundle = s.bundle(&cfg);
    let mut rng = Rng::new(SEED, 4);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let h = rayleigh_channel(36, &mut rng);
        let w = geometry.beamformer(&rng.unit_interval_vec(36));
        let v = complex_gaussian_vector(3, &mut rng);
        let q = digital_surrogate(&v, &v, &h, &w, &bundle, &cfg).map_err(|e| e.to_string())?;
        let (xt, xp) = sensing_forms(&bundle, &w, &v).map_err(|e| e.to_string())?;
        let c = cfg.noise_var_radar / (2.0 * cfg.gamma.norm_sqr());
        let truth = cfg.alpha * received_power(&h, &w, &v).map_err(|e| e.to_string())?
            - cfg.beta * (c / xt + c / xp);
        let err = (q - truth).abs() / truth.abs();
        worst = worst.max(err);
        if !(err < 1e-12) {
            return Err(format!("surrogate {q} vs objective {truth}"));
        }
    }
    Ok(format!("max relative error {worst:e}"))
}

#[derive(Default)]
struct ConstraintWatch {
    total_power: f64,
    worst_power: f64,
    box_violation: Option<String>,
    digital_steps: usize,
}

impl Observer for ConstraintWatch {
    fn on_digital(&mut self, _: usize, digital: &ComplexVector, beamformer: &ComplexMatrix) {
        let p = (beamformer * digital).norm_squared();
        let err = (p - self.total_power).abs() / self.total_power;
        self.worst_power = self.worst_power.max(err);
        self.digital_steps += 1;
    }

    fn on_pga_iterate(&mut self, iteration: usize, inner: usize, weights: &[f64], _: f64) {
        if self.box_violation.is_none() {
            if let Some(x) = weights.iter().find(|x| !(0.0..=1.0).contains(*x)) {
                self.box_violation = Some(format!("w = {x} at outer {iteration}, inner {inner}"));
            }
        }
    }
}

fn check_power_constraints(_: &Subject) -> Outcome {
    let cfg = SystemConfig::default();
    let geometry = build_geometry(&cfg).map_err(|e| e.to_string())?;
    let h = trial_channel(&cfg, 0);
    let mut watch = ConstraintWatch {
        total_power: cfg.total_power,
        ..ConstraintWatch::default()
    };
    let (state, _) = optimize_with(&cfg, &h, &geometry, &OptimizeOptions::default(), &mut watch)
        .map_err(|e| e.to_string())?;
    if let Some(v) = watch.box_violation {
        return Err(v);
    }
    let final_err = (state.tx_power() - cfg.total_power).abs() / cfg.total_power;
    let bench = benchmark_solution(&cfg, &h, &geometry, &mut Rng::new(SEED, 5))
        .map_err(|e| e.to_string())?;
    let bench_err = (bench.tx_power() - cfg.total_power).abs() / cfg.total_power;
    let worst = watch.worst_power.max(final_err).max(bench_err);
    if !(worst < 1e-9) {
        return Err(format!("power relative error {worst:e}"));
    }
    Ok(format!(
        "{} digital steps, max power relative error {worst:e}",
        watch.digital_steps
    ))
}

fn check_crb_noise_scaling(s: &Subject) -> Outcome {
    let cfg = sized(36, 3);
    let geometry = build_geometry(&cfg).map_err(|e| e.to_string())?;
    let bundle = s.bundle(&cfg);
    let mut rng = Rng::new(SEED, 6);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let w = geometry.beamformer(&rng.unit_interval_vec(36));
        let v = complex_gaussian_vector(3, &mut rng);
        let noise = 0.1 + rng.unit_interval();
        let one = crb(&bundle, &w, &v, cfg.gamma, noise).map_err(|e| e.to_string())?;
        let two = crb(&bundle, &w, &v, cfg.gamma, 2.0 * noise).map_err(|e| e.to_string())?;
        for (a, b) in [
            (one.crb_theta_diag, two.crb_theta_diag),
            (one.crb_phi_diag, two.crb_phi_diag),
        ] {
            let err = (b / a - 2.0).abs() / 2.0;
            worst = worst.max(err);
            if !(err < 1e-12) {
                return Err(format!("ratio {}", b / a));
            }
        }
    }
    Ok(format!("max relative error {worst:e}"))
}

const CHECKS: [(&str, Check); 7] = [
    (
        "steering derivatives vs finite differences",
        check_derivatives,
    ),
    ("fisher information vs numeric", check_fim),
    ("quadratic-form identities", check_quadratic_forms),
    ("tangent bound grid", check_tangent_bound),
    ("surrogate tangency", check_surrogate_tangency),
    ("power and box constraints", check_power_constraints),
    ("crb noise scaling", check_crb_noise_scaling),
];

pub fn run_checks(fault: Option<Fault>) -> Vec<CheckResult> {
    let subject = Subject { fault };
    CHECKS
        .iter()
        .map(|(name, check)| {
            let start = Instant::now();
            let outcome = check(&subject);
            let seconds = start.elapsed().as_secs_f64();
            let (passed, detail) = match outcome {
                Ok(d) => (true, d),
                Err(d) => (false, d),
            };
            CheckResult {
                name,
                passed,
                detail,
                seconds,
            }
        })
        .collect()
}

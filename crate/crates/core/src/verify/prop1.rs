//! Drag limit of the particle collision integral.
//!
//! For a Maxwellian gas and a particle density `F`, `(1/η) ∫ E₂ φ dv` should approach
//! `∫ F Γ·∇φ dv` with `Γ = −D(v−u) − (4π/3)(a³/m_g) ∇ₓp`. For uniform fields the
//! mean drag at finite `η` is `D/(1+η)`, so the gap shrinks like `η/(1+η)`.
//! The delocalized part of the integral carries the `a³` pressure term.

use super::{ConvergenceStudy, Parameter, VerifyError};
use crate::collision::density::{KineticDensity, SmoothField};
use crate::collision::enskog::{enskog_e2_split, Estimate, TestFunction};
use crate::kernels::{friction_force, LocalGasState, Vec3};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Prop1Params {
    pub a: f64,
    /// `αn` of the gas.
    pub gas_density: f64,
    /// `θ/m` of the gas.
    pub gas_temperature: f64,
    pub particle_density: f64,
    /// Velocity of the cold particle beam along `e₁`.
    pub slip: f64,
    pub etas: Vec<f64>,
    pub samples: usize,
    /// Relative amplitude of the gas density wave used for the pressure test.
    pub pressure_amplitude: f64,
    pub seed: u64,
}

impl Default for Prop1Params {
    fn default() -> Self {
        Prop1Params {
            a: 0.05,
            gas_density: 1.0,
            gas_temperature: 1.0,
            particle_density: 1.0,
            slip: 1.0,
            etas: vec![0.1, 0.05, 0.025],
            samples: 1_000_000,
            pressure_amplitude: 0.3,
            seed: 11,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prop1Report {
    pub params: Prop1Params,
    /// `(1/η) ∫E₂ v₁ dv` for each `η`.
    pub scaled_integrals: Vec<Estimate>,
    /// `∫ F Γ·e₁ dv`.
    pub weak_rhs: f64,
    pub gap: ConvergenceStudy,
    /// `(1/η) ∫E₂ v₁ dv` for particles moving with the gas, per `η`.
    pub comoving: Vec<Estimate>,
    pub comoving_pass: bool,
    /// Delocalized part at `a` over the same at `a/2`, at the inflection point of the gas density.
    pub pressure_ratio: Estimate,
    /// `(1/η)` times the delocalized part at radius `a`, and its kernel prediction `−(4π/3)a³ n_F ∂ₓ(αn θ/m)/(1+η)`.
    pub pressure_term: Estimate,
    pub pressure_prediction: f64,
    pub order_pass: bool,
    pub pressure_pass: bool,
    pub pass: bool,
}

fn cold_beam(density: f64, v: f64) -> KineticDensity {
    KineticDensity::uniform(density, Vec3::new(v, 0.0, 0.0), 0.0)
}

pub fn prop1_consistency(p: &Prop1Params) -> Result<Prop1Report, VerifyError> {
    if p.etas.is_empty() || !(p.a > 0.0) {
        return Err(VerifyError::InvalidStudy(
            "prop1 needs a > 0 and at least one eta".into(),
        ));
    }
    let gas = KineticDensity::uniform(p.gas_density, Vec3::ZERO, p.gas_temperature);
    let beam = cold_beam(p.particle_density, p.slip);
    let state = LocalGasState {
        alpha_n: p.gas_density,
        u: Vec3::ZERO,
        theta_over_m: p.gas_temperature,
    };
    let weak_rhs = -p.particle_density * friction_force(&state, Vec3::new(p.slip, 0.0, 0.0), p.a).x;

    let x = 0.0;
    let mut scaled = Vec::new();
    let mut gaps = Vec::new();
    for &eta in &p.etas {
        // One seed for every η: the estimates share their random numbers.
        let est = enskog_e2_split(
            &gas,
            &beam,
            TestFunction::Xi1,
            x,
            eta,
            &[p.a],
            p.samples,
            p.seed,
        )?[0]
            .full
            .scaled(1.0 / eta);
        let gap = (est.mean - weak_rhs).abs();
        if est.std_err > 0.5 * gap {
            return Err(VerifyError::InsufficientSamples(format!(
                "at eta = {eta} the standard error {} exceeds half the gap {gap}",
                est.std_err
            )));
        }
        scaled.push(est);
        gaps.push(gap);
    }
    let gap = ConvergenceStudy::fit(Parameter::Eta, p.etas.clone(), gaps)?;

    let still = cold_beam(p.particle_density, 0.0);
    let mut comoving = Vec::new();
    for (i, &eta) in p.etas.iter().enumerate() {
        let est = enskog_e2_split(
            &gas,
            &still,
            TestFunction::Xi1,
            x,
            eta,
            &[p.a],
            p.samples,
            p.seed + 1 + i as u64,
        )?[0]
            .full
            .scaled(1.0 / eta);
        comoving.push(est);
    }
    let comoving_pass = comoving.iter().all(|e| e.within_sigmas(0.0, 3.0));

    // Pressure term: particles at rest in a resting gas with density wave αn(1 + A sin 2πx), at x = 0.
    let eta = *p.etas.last().unwrap();
    let wave = KineticDensity {
        number: SmoothField::sine(p.gas_density, p.pressure_amplitude * p.gas_density, 1),
        velocity: [SmoothField::constant(0.0); 3],
        temperature: SmoothField::constant(p.gas_temperature),
    };
    let split = enskog_e2_split(
        &wave,
        &still,
        TestFunction::Xi1,
        x,
        eta,
        &[p.a, 0.5 * p.a],
        p.samples,
        p.seed + 100,
    )?;
    let pressure_ratio = ratio(&split[0].delocal, &split[1].delocal);
    let pressure_term = split[0].delocal.scaled(1.0 / eta);
    let grad_p = wave.number.derivative(x) * p.gas_temperature;
    let pressure_prediction =
        -4.0 * PI / 3.0 * p.a.powi(3) * p.particle_density * grad_p / (1.0 + eta);

    let order_pass = gap.order_within(0.8, 1.2);
    let pressure_pass = (pressure_ratio.mean - 8.0).abs() <= 0.8
        && (pressure_term.mean - pressure_prediction).abs()
            <= 3.0 * pressure_term.std_err + 0.05 * pressure_prediction.abs();
    let pass = order_pass && comoving_pass && pressure_pass;
    Ok(Prop1Report {
        params: p.clone(),
        scaled_integrals: scaled,
        weak_rhs,
        gap,
        comoving,
        comoving_pass,
        pressure_ratio,
        pressure_term,
        pressure_prediction,
        order_pass,
        pressure_pass,
        pass,
    })
}

/// Ratio of two estimates; the error treats them as independent, which overstates it
/// when they share random numbers.
fn ratio(num: &Estimate, den: &Estimate) -> Estimate {
    let r = num.mean / den.mean;
    let rel = ((num.std_err / num.mean).powi(2) + (den.std_err / den.mean).powi(2)).sqrt();
    Estimate {
        mean: r,
        std_err: r.abs() * rel,
        samples: num.samples,
    }
}

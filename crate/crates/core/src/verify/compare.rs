//! Stochastic kinetic ensemble against the continuum solver on uniform drag relaxation.
//!
//! Both start from a uniform Maxwellian gas (`αn`, `θ/m`, at rest) and a uniform cold particle
//! beam at `slip · e₁`. The ensemble resolves finite `η` and `δ`; the solver is their limit.
//! The discrepancy is `max_t |v̄_ensemble − v̄_solver| / slip` over the output times.

use super::VerifyError;
use crate::collision::density::KineticDensity;
use crate::collision::dsmc::{DsmcOptions, KineticEnsemble};
use crate::collision::ScalingParams;
use crate::kernels::Vec3;
use crate::spray_solver::{run::strang_step, Preset, PresetParams, SprayMode};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareParams {
    pub a: f64,
    /// `αn` of the gas.
    pub gas_density: f64,
    /// `θ/m` of the gas.
    pub gas_temperature: f64,
    pub particle_density: f64,
    pub slip: f64,
    /// `(η, δ)` pairs in the order they shrink.
    pub schedule: Vec<(f64, f64)>,
    /// The `(η, δ)` pair at which `tolerance` applies.
    pub reference: (f64, f64),
    pub tolerance: f64,
    pub gas_samples: usize,
    pub particle_samples: usize,
    pub cells: usize,
    pub t_final: f64,
    pub output_dt: f64,
    pub seed: u64,
}

impl Default for CompareParams {
    fn default() -> Self {
        CompareParams {
            a: 0.05,
            gas_density: 4.0,
            gas_temperature: 10.0,
            particle_density: 1.0,
            slip: 3.0,
            schedule: vec![(0.1, 0.1), (0.05, 0.05), (0.025, 0.025)],
            reference: (0.05, 0.05),
            tolerance: 0.1,
            gas_samples: 100_000,
            particle_samples: 20_000,
            cells: 50,
            t_final: 6.0,
            output_dt: 0.25,
            seed: 2024,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRun {
    pub eta: f64,
    pub delta: f64,
    pub times: Vec<f64>,
    pub ensemble_velocity: Vec<f64>,
    pub solver_velocity: Vec<f64>,
    pub ensemble_gas_velocity: Vec<f64>,
    pub solver_gas_velocity: Vec<f64>,
    /// Standard error of the ensemble particle mean velocity at the last output.
    pub noise_floor: f64,
    pub discrepancy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub params: CompareParams,
    pub runs: Vec<CompareRun>,
    pub reference_discrepancy: f64,
    pub within_tolerance: bool,
    pub monotone: bool,
    pub pass: bool,
}

/// Solver trajectory of the particle and gas bulk velocities at `times`.
fn solver_curve(p: &CompareParams, times: &[f64]) -> Result<(Vec<f64>, Vec<f64>), VerifyError> {
    let vol = 4.0 * PI / 3.0 * p.a.powi(3) * p.particle_density;
    let params = PresetParams {
        cells: 4,
        a: p.a,
        m_g: 1.0,
        particles: 16,
        gas_density: p.gas_density / (1.0 - vol),
        gas_temperature: p.gas_temperature,
        particle_density: p.particle_density,
        slip: p.slip,
        amplitude: 0.0,
    };
    let (mut gas, mut phase) = Preset::DragRelaxation.build(&params, SprayMode::Thick)?;
    let h = 1e-3f64;
    let mut t = 0.0;
    let mut v = Vec::with_capacity(times.len());
    let mut u = Vec::with_capacity(times.len());
    for &target in times {
        while t < target - 1e-12 {
            let dt = h.min(target - t);
            strang_step(&mut gas, &mut phase, dt, SprayMode::Thick)?;
            t += dt;
        }
        v.push(phase.bulk_velocity().x);
        let (m, mom, _) = gas.totals();
        u.push(mom.x / m);
    }
    Ok((v, u))
}

fn ensemble_run(
    p: &CompareParams,
    eta: f64,
    delta: f64,
    times: &[f64],
    seed: u64,
) -> Result<(Vec<f64>, Vec<f64>, f64), VerifyError> {
    let params = ScalingParams::with_unit_gas_mass(eta, delta, p.a)?;
    let gas = KineticDensity::uniform(p.gas_density, Vec3::ZERO, p.gas_temperature);
    let beam = KineticDensity::uniform(p.particle_density, Vec3::new(p.slip, 0.0, 0.0), 0.0);
    let mut ens = KineticEnsemble::from_densities(
        &gas,
        &beam,
        p.gas_samples,
        p.particle_samples,
        p.cells,
        params,
        seed,
    )?;
    let opts = DsmcOptions::default();
    let mut v = Vec::with_capacity(times.len());
    let mut u = Vec::with_capacity(times.len());
    for &target in times {
        while ens.time < target - 1e-12 {
            let dt = ens.max_dt().min(target - ens.time);
            ens.step_in_place(dt, opts)?;
        }
        v.push(ens.particle_bulk_velocity().x);
        let m = ens.moments();
        u.push(m.gas_momentum.x / m.gas_mass);
    }
    let wsum: f64 = ens.particles.iter().map(|q| q.weight).sum();
    let vbar = ens.particle_bulk_velocity();
    let var = ens
        .particles
        .iter()
        .map(|q| q.weight * (q.v.x - vbar.x).powi(2))
        .sum::<f64>()
        / wsum;
    let noise = (var / ens.particles.len() as f64).sqrt();
    Ok((v, u, noise))
}

pub fn dsmc_vs_solver_moments(p: &CompareParams) -> Result<CompareReport, VerifyError> {
    if p.schedule.is_empty() || !(p.t_final > 0.0 && p.output_dt > 0.0 && p.slip != 0.0) {
        return Err(VerifyError::InvalidStudy(
            "comparison needs a schedule, positive horizons and nonzero slip".into(),
        ));
    }
    let count = (p.t_final / p.output_dt).round() as usize;
    let times: Vec<f64> = (0..=count).map(|k| k as f64 * p.output_dt).collect();
    let (solver_v, solver_u) = solver_curve(p, &times)?;
    let mut runs = Vec::new();
    for (i, &(eta, delta)) in p.schedule.iter().enumerate() {
        let (ev, eu, noise_floor) = ensemble_run(p, eta, delta, &times, p.seed + i as u64)?;
        let discrepancy = ev
            .iter()
            .zip(&solver_v)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
            / p.slip.abs();
        runs.push(CompareRun {
            eta,
            delta,
            times: times.clone(),
            ensemble_velocity: ev,
            solver_velocity: solver_v.clone(),
            ensemble_gas_velocity: eu,
            solver_gas_velocity: solver_u.clone(),
            noise_floor,
            discrepancy,
        });
    }
    let reference = runs
        .iter()
        .find(|r| (r.eta - p.reference.0).abs() < 1e-12 && (r.delta - p.reference.1).abs() < 1e-12);
    let reference_discrepancy = reference.map(|r| r.discrepancy).unwrap_or(f64::NAN);
    let within_tolerance = reference_discrepancy <= p.tolerance;
    let monotone = runs.windows(2).all(|w| w[1].discrepancy < w[0].discrepancy);
    Ok(CompareReport {
        params: p.clone(),
        runs,
        reference_discrepancy,
        within_tolerance,
        monotone,
        pass: within_tolerance && monotone,
    })
}

//! Strang-split time loop and the monitored totals.

use super::gas::cfl_limit;
use super::{
    gas_step, remainder_diagnostics, vlasov_step, GasField, GasStepOptions, ParticlePhase, Preset,
    PresetParams, RemainderOptions, SolverError, SprayMode,
};
use serde::{Deserialize, Serialize};

/// One monitoring row; field order is the CSV column order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Totals {
    pub t: f64,
    pub total_gas_mass: f64,
    pub total_gas_momentum_x: f64,
    pub total_gas_momentum_y: f64,
    pub total_gas_momentum_z: f64,
    pub total_gas_energy: f64,
    pub total_particle_number: f64,
    pub total_particle_momentum_x: f64,
    pub total_particle_momentum_y: f64,
    pub total_particle_momentum_z: f64,
    pub total_particle_kinetic_energy: f64,
    pub min_alpha: f64,
    #[serde(rename = "P_norm")]
    pub p_norm: f64,
    #[serde(rename = "Q_norm")]
    pub q_norm: f64,
    #[serde(rename = "R_norm")]
    pub r_norm: f64,
}

impl Totals {
    pub const COLUMNS: [&'static str; 15] = [
        "t",
        "total_gas_mass",
        "total_gas_momentum_x",
        "total_gas_momentum_y",
        "total_gas_momentum_z",
        "total_gas_energy",
        "total_particle_number",
        "total_particle_momentum_x",
        "total_particle_momentum_y",
        "total_particle_momentum_z",
        "total_particle_kinetic_energy",
        "min_alpha",
        "P_norm",
        "Q_norm",
        "R_norm",
    ];

    /// Particle momentum and kinetic energy carry the factor `m_g`, so gas plus particle
    /// totals are the conserved quantities.
    pub fn measure(t: f64, gas: &GasField, phase: &ParticlePhase) -> Self {
        let (m, p, e) = gas.totals();
        let mut pp = crate::kernels::Vec3::ZERO;
        let mut ke = 0.0;
        for q in &phase.particles {
            pp += q.v * (gas.m_g * q.weight);
            ke += 0.5 * gas.m_g * q.weight * q.v.norm2();
        }
        Totals {
            t,
            total_gas_mass: m,
            total_gas_momentum_x: p.x,
            total_gas_momentum_y: p.y,
            total_gas_momentum_z: p.z,
            total_gas_energy: e,
            total_particle_number: phase.total_number(),
            total_particle_momentum_x: pp.x,
            total_particle_momentum_y: pp.y,
            total_particle_momentum_z: pp.z,
            total_particle_kinetic_energy: ke,
            min_alpha: gas.min_alpha(),
            p_norm: f64::NAN,
            q_norm: f64::NAN,
            r_norm: f64::NAN,
        }
    }

    pub fn values(&self) -> [f64; 15] {
        [
            self.t,
            self.total_gas_mass,
            self.total_gas_momentum_x,
            self.total_gas_momentum_y,
            self.total_gas_momentum_z,
            self.total_gas_energy,
            self.total_particle_number,
            self.total_particle_momentum_x,
            self.total_particle_momentum_y,
            self.total_particle_momentum_z,
            self.total_particle_kinetic_energy,
            self.min_alpha,
            self.p_norm,
            self.q_norm,
            self.r_norm,
        ]
    }

    pub fn total_momentum_x(&self) -> f64 {
        self.total_gas_momentum_x + self.total_particle_momentum_x
    }

    pub fn total_energy(&self) -> f64 {
        self.total_gas_energy + self.total_particle_kinetic_energy
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub preset: Preset,
    pub params: PresetParams,
    pub mode: SprayMode,
    pub t_final: f64,
    /// Fraction of the gas CFL bound used per full step, in `(0, 1]`.
    pub cfl: f64,
    /// Upper bound on the step; also limits particles to one cell per step.
    pub dt_max: f64,
    pub output_every: usize,
    pub remainder: Option<RemainderOptions>,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            preset: Preset::DragRelaxation,
            params: PresetParams::default(),
            mode: SprayMode::Thick,
            t_final: 0.5,
            cfl: 0.9,
            dt_max: 1e-2,
            output_every: 10,
            remainder: None,
        }
    }
}

impl SimulationConfig {
    pub fn violations(&self) -> Vec<String> {
        let mut v = self.params.violations();
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            v.push(format!("t_final = {} must be positive", self.t_final));
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            v.push(format!("cfl = {} must lie in (0, 1]", self.cfl));
        }
        if !(self.dt_max > 0.0) {
            v.push(format!("dt_max = {} must be positive", self.dt_max));
        }
        if self.output_every == 0 {
            v.push("output_every must be at least 1".into());
        }
        v
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub rows: Vec<Totals>,
    pub gas: GasField,
    pub phase: ParticlePhase,
    pub steps: usize,
}

/// Half gas step, full particle step with the drag exchange, half gas step.
pub fn strang_step(
    gas: &mut GasField,
    phase: &mut ParticlePhase,
    dt: f64,
    mode: SprayMode,
) -> Result<(), SolverError> {
    let opts = GasStepOptions {
        mode,
        drag_sources: false,
    };
    gas_step(gas, phase, 0.5 * dt, &opts)?;
    let ex = vlasov_step(phase, gas, dt, mode)?;
    ex.apply(gas)?;
    gas_step(gas, phase, 0.5 * dt, &opts)
}

/// Strang step of at most `dt`, halving `dt` whenever a gas half-step exceeds its CFL
/// limit (the second half-step sees the state after the first). Returns the step taken.
pub fn adaptive_strang_step(
    gas: &mut GasField,
    phase: &mut ParticlePhase,
    dt: f64,
    mode: SprayMode,
) -> Result<f64, SolverError> {
    let mut dt = dt;
    for _ in 0..MAX_HALVINGS {
        let (g0, p0) = (gas.clone(), phase.clone());
        match strang_step(gas, phase, dt, mode) {
            Err(SolverError::Cfl { .. }) => {
                *gas = g0;
                *phase = p0;
                dt *= 0.5;
            }
            other => return other.map(|_| dt),
        }
    }
    strang_step(gas, phase, dt, mode).map(|_| dt)
}

const MAX_HALVINGS: usize = 8;

/// Stable step for the current state under `cfl` and `dt_max`.
pub fn stable_dt(gas: &GasField, phase: &ParticlePhase, cfl: f64, dt_max: f64) -> f64 {
    let vmax = phase
        .particles
        .iter()
        .map(|p| p.v.x.abs())
        .fold(0.0f64, f64::max);
    let particle = if vmax > 0.0 {
        gas.dx / vmax
    } else {
        f64::INFINITY
    };
    (2.0 * cfl * cfl_limit(gas)).min(particle).min(dt_max)
}

fn record(
    t: f64,
    gas: &GasField,
    phase: &ParticlePhase,
    rem: &Option<RemainderOptions>,
) -> Result<Totals, SolverError> {
    let mut row = Totals::measure(t, gas, phase);
    if let Some(opts) = rem {
        let r = remainder_diagnostics(gas, phase, opts)?;
        row.p_norm = r.p_norm;
        row.q_norm = r.q_norm;
        row.r_norm = r.r_norm;
    }
    Ok(row)
}

/// Runs from an explicit state to `t_final`.
pub fn run_from(
    mut gas: GasField,
    mut phase: ParticlePhase,
    cfg: &SimulationConfig,
) -> Result<RunOutput, SolverError> {
    let problems = cfg.violations();
    if !problems.is_empty() {
        return Err(SolverError::InvalidState(problems.join("; ")));
    }
    let mut t = 0.0;
    let mut steps = 0;
    let mut rows = vec![record(t, &gas, &phase, &cfg.remainder)?];
    while t < cfg.t_final * (1.0 - 1e-14) {
        let dt = stable_dt(&gas, &phase, cfg.cfl, cfg.dt_max).min(cfg.t_final - t);
        t += adaptive_strang_step(&mut gas, &mut phase, dt, cfg.mode)?;
        steps += 1;
        if steps % cfg.output_every == 0 || t >= cfg.t_final * (1.0 - 1e-14) {
            rows.push(record(t, &gas, &phase, &cfg.remainder)?);
        }
    }
    Ok(RunOutput {
        rows,
        gas,
        phase,
        steps,
    })
}

pub fn run_simulation(cfg: &SimulationConfig) -> Result<RunOutput, SolverError> {
    let problems = cfg.violations();
    if !problems.is_empty() {
        return Err(SolverError::InvalidState(problems.join("; ")));
    }
    let (gas, phase) = cfg.preset.build(&cfg.params, cfg.mode)?;
    run_from(gas, phase, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::friction::QBAR_AT_ZERO;
    use std::f64::consts::PI;

    #[test]
    fn comoving_state_is_stationary() {
        let cfg = SimulationConfig {
            preset: Preset::CoMoving,
            params: PresetParams {
                cells: 20,
                particles: 200,
                a: 0.1,
                ..Default::default()
            },
            t_final: 1e9,
            ..Default::default()
        };
        let (mut gas, mut phase) = cfg.preset.build(&cfg.params, cfg.mode).unwrap();
        let g0 = gas.clone();
        for _ in 0..1000 {
            strang_step(&mut gas, &mut phase, 1e-3, cfg.mode).unwrap();
        }
        for (a, b) in gas.cells.iter().zip(&g0.cells) {
            assert!(
                (a.n - b.n).abs() < 1e-10
                    && (a.u - b.u).max_abs() < 1e-10
                    && (a.theta - b.theta).abs() < 1e-10
            );
            assert!((a.alpha - b.alpha).abs() < 1e-10);
        }
        assert!(phase.particles.iter().all(|p| (p.v.x - 0.4).abs() < 1e-10));
    }

    #[test]
    fn drag_relaxation_rate_matches_linearization() {
        // Small slip so the linear rate governs: d(v−u)/dt = −k (1 + m_g n_F / (m_g αn)) (v−u).
        let params = PresetParams {
            cells: 10,
            particles: 100,
            a: 0.1,
            slip: 0.02,
            ..Default::default()
        };
        let cfg = SimulationConfig {
            params,
            t_final: 2.0,
            dt_max: 2e-3,
            output_every: 50,
            ..Default::default()
        };
        let out = run_simulation(&cfg).unwrap();
        let alpha = 1.0 - 4.0 * PI / 3.0 * 1e-3;
        let k = PI * 0.01 * alpha * QBAR_AT_ZERO * (1.0 + 1.0 / alpha);
        let slip = |r: &Totals| {
            r.total_particle_momentum_x / r.total_particle_number
                - r.total_gas_momentum_x / r.total_gas_mass
        };
        let first = &out.rows[0];
        let last = out.rows.last().unwrap();
        let fitted = (slip(first) / slip(last)).ln() / (last.t - first.t);
        assert!(
            (fitted / k - 1.0).abs() < 0.02,
            "fitted {fitted}, linear {k}"
        );
        assert!((last.total_momentum_x() - first.total_momentum_x()).abs() < 1e-13);
        assert!((last.total_energy() - first.total_energy()).abs() < 1e-12);
    }

    #[test]
    fn gas_mass_is_conserved_with_particles() {
        let cfg = SimulationConfig {
            preset: Preset::SinusoidalF,
            params: PresetParams {
                cells: 50,
                particles: 1000,
                a: 0.08,
                ..Default::default()
            },
            t_final: 0.2,
            ..Default::default()
        };
        let out = run_simulation(&cfg).unwrap();
        let m0 = out.rows[0].total_gas_mass;
        assert!(out
            .rows
            .iter()
            .all(|r| (r.total_gas_mass - m0).abs() < 1e-13 * m0));
        assert!(out.rows.iter().all(|r| r.min_alpha > 0.99));
    }
}

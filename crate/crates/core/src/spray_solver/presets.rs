//! Initial states for the solver.

use super::{volume_fraction, GasField, Particle, ParticlePhase, SolverError, SprayMode};
use crate::kernels::Vec3;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// Uniform gas at rest, no particles.
    Uniform,
    /// Sod shock tube on `[0, 1/2) | [1/2, 1)`; the periodic seam at `x = 0` is a second,
    /// mirrored Riemann problem.
    Sod,
    /// Uniform gas and uniform particles moving together at `slip · e₁`.
    CoMoving,
    /// Uniform gas at rest, uniform cold particles at `slip · e₁`.
    DragRelaxation,
    /// Gas density `n₀(1 + A/2 sin 2πx)` at uniform temperature, cold particles of density
    /// `n_p(1 + A sin 2πx)` drifting at `slip · e₁`.
    SinusoidalF,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PresetParams {
    pub cells: usize,
    pub a: f64,
    pub m_g: f64,
    pub particles: usize,
    pub gas_density: f64,
    pub gas_temperature: f64,
    pub particle_density: f64,
    pub slip: f64,
    pub amplitude: f64,
}

impl Default for PresetParams {
    fn default() -> Self {
        PresetParams {
            cells: 100,
            a: 0.05,
            m_g: 1.0,
            particles: 2000,
            gas_density: 1.0,
            gas_temperature: 1.0,
            particle_density: 1.0,
            slip: 0.4,
            amplitude: 0.3,
        }
    }
}

impl PresetParams {
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.cells < 4 {
            v.push(format!("cells = {} must be at least 4", self.cells));
        }
        if !(self.a >= 0.0 && self.a < 0.5) {
            v.push(format!("a = {} must lie in [0, 0.5)", self.a));
        }
        if !(self.m_g > 0.0) {
            v.push(format!("m_g = {} must be positive", self.m_g));
        }
        if !(self.gas_density > 0.0) || !(self.gas_temperature > 0.0) {
            v.push("gas_density and gas_temperature must be positive".into());
        }
        if !(self.particle_density >= 0.0) {
            v.push(format!(
                "particle_density = {} must be non-negative",
                self.particle_density
            ));
        }
        if !(self.amplitude.abs() < 1.0) {
            v.push(format!(
                "amplitude = {} must satisfy |A| < 1",
                self.amplitude
            ));
        }
        if !self.slip.is_finite() {
            v.push("slip must be finite".into());
        }
        v
    }
}

/// Positions `x_i` with `∫₀^{x_i} (1 + A sin 2πy) dy = (i + 1/2)/N`.
pub fn quiet_positions(count: usize, amp: f64) -> Vec<f64> {
    (0..count)
        .map(|i| {
            let target = (i as f64 + 0.5) / count as f64;
            let mut x = target;
            for _ in 0..60 {
                let cdf = x + amp * (1.0 - (2.0 * PI * x).cos()) / (2.0 * PI);
                let step = (cdf - target) / (1.0 + amp * (2.0 * PI * x).sin());
                x -= step;
                if step.abs() < 1e-16 {
                    break;
                }
            }
            x.rem_euclid(1.0)
        })
        .collect()
}

fn beam(count: usize, density: f64, amp: f64, v: Vec3, a: f64) -> ParticlePhase {
    if count == 0 || density == 0.0 {
        return ParticlePhase::empty(a);
    }
    let w = density / count as f64;
    let particles = quiet_positions(count, amp)
        .into_iter()
        .map(|x| Particle { x, v, weight: w })
        .collect();
    ParticlePhase { particles, a }
}

impl Preset {
    pub fn build(
        &self,
        p: &PresetParams,
        mode: SprayMode,
    ) -> Result<(GasField, ParticlePhase), SolverError> {
        let problems = p.violations();
        if !problems.is_empty() {
            return Err(SolverError::InvalidState(problems.join("; ")));
        }
        let drift = Vec3::new(p.slip, 0.0, 0.0);
        let mut gas =
            GasField::uniform(p.cells, p.m_g, p.gas_density, Vec3::ZERO, p.gas_temperature);
        let phase = match self {
            Preset::Uniform => ParticlePhase::empty(p.a),
            Preset::Sod => {
                for c in 0..p.cells {
                    let (n, pr) = if gas.center(c) < 0.5 {
                        (1.0, 1.0)
                    } else {
                        (0.125, 0.1)
                    };
                    gas.cells[c].n = n / p.m_g;
                    gas.cells[c].theta = pr / gas.cells[c].n;
                }
                ParticlePhase::empty(p.a)
            }
            Preset::CoMoving => {
                for c in gas.cells.iter_mut() {
                    c.u = drift;
                }
                beam(p.particles, p.particle_density, 0.0, drift, p.a)
            }
            Preset::DragRelaxation => beam(p.particles, p.particle_density, 0.0, drift, p.a),
            Preset::SinusoidalF => {
                for c in 0..p.cells {
                    let x = gas.center(c);
                    gas.cells[c].n =
                        p.gas_density * (1.0 + 0.5 * p.amplitude * (2.0 * PI * x).sin());
                }
                beam(p.particles, p.particle_density, p.amplitude, drift, p.a)
            }
        };
        if mode == SprayMode::Thick {
            let alpha = volume_fraction(&phase, &gas)?;
            for (c, a) in gas.cells.iter_mut().zip(alpha) {
                c.alpha = a;
            }
        }
        gas.validate()?;
        Ok((gas, phase))
    }
}

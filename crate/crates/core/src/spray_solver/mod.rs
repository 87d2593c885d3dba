//! Thick-spray Vlasov–Euler system on a periodic 1D grid with 3D velocities.
//!
//! The gas is advanced in the conserved variables `(αρ, αρu, αρE)` with `ρ = m_g n`,
//! `p = nθ`, `E = |u|²/2 + 3θ/(2m_g)`. Particles are weighted macro-particles of the
//! scaled density `F`; the volume fraction is `α = 1 − (4π/3) a³ ∫F dv`.
//!
//! In scaled units the conserved totals are `Σ αρ u dx + m_g Σ W v` and
//! `Σ αρ E dx + m_g Σ W |v|²/2`, and a particle accelerates by
//! `−D(v−u) − (4π/3)(a³/m_g) ∇ₓp`.

pub mod gas;
pub mod presets;
pub mod remainder;
pub mod run;
pub mod vlasov;

pub use gas::{gas_step, GasStepOptions};
pub use presets::{Preset, PresetParams};
pub use remainder::{remainder_diagnostics, RemainderOptions, RemainderReport};
pub use run::{run_simulation, RunOutput, SimulationConfig, Totals};
pub use vlasov::{vlasov_step, DragExchange};

use crate::kernels::{GasGradients, KernelError, LocalGasState, Mat3, Vec3};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

/// Number density below which a cell is treated as vacuum.
pub const VACUUM_DENSITY: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("overpacked cell {cell}: alpha = {alpha} <= 0")]
    OverpackedCell { cell: usize, alpha: f64 },
    #[error("CFL violation: dt = {dt} exceeds {limit}")]
    Cfl { dt: f64, limit: f64 },
    #[error("negative temperature in cell {cell}: theta = {theta} (n = {n}, u = {u:?})")]
    NegativeTemperature {
        cell: usize,
        theta: f64,
        n: f64,
        u: [f64; 3],
    },
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GasCell {
    pub alpha: f64,
    pub n: f64,
    pub u: Vec3,
    pub theta: f64,
}

impl GasCell {
    pub fn pressure(&self) -> f64 {
        self.n * self.theta
    }
}

/// Per-cell gas state on the periodic unit interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GasField {
    pub cells: Vec<GasCell>,
    pub dx: f64,
    pub m_g: f64,
    /// Cells currently treated as vacuum (velocity and temperature frozen).
    #[serde(default)]
    pub vacuum: Vec<bool>,
}

impl GasField {
    pub fn uniform(cells: usize, m_g: f64, n: f64, u: Vec3, theta: f64) -> Self {
        let c = GasCell {
            alpha: 1.0,
            n,
            u,
            theta,
        };
        GasField {
            cells: vec![c; cells],
            dx: 1.0 / cells as f64,
            m_g,
            vacuum: vec![false; cells],
        }
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn center(&self, c: usize) -> f64 {
        (c as f64 + 0.5) * self.dx
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        if self.cells.is_empty() || !(self.dx > 0.0) || !(self.m_g > 0.0) {
            return Err(SolverError::InvalidState(
                "gas field needs cells, dx > 0 and m_g > 0".into(),
            ));
        }
        if ((self.dx * self.cells.len() as f64) - 1.0).abs() > 1e-12 {
            return Err(SolverError::InvalidState(
                "cells must tile the unit interval".into(),
            ));
        }
        for (i, c) in self.cells.iter().enumerate() {
            if !(c.alpha > 0.0 && c.alpha <= 1.0) {
                return Err(SolverError::OverpackedCell {
                    cell: i,
                    alpha: c.alpha,
                });
            }
            if !(c.n >= 0.0 && c.u.is_finite() && c.theta > 0.0 && c.theta.is_finite()) {
                return Err(SolverError::InvalidState(format!(
                    "cell {i} has n = {}, theta = {}",
                    c.n, c.theta
                )));
            }
        }
        Ok(())
    }

    /// `αρ`, `αρu`, `αρE` of cell `c`.
    pub fn conserved(&self, c: usize) -> (f64, Vec3, f64) {
        let s = &self.cells[c];
        let m = s.alpha * self.m_g * s.n;
        let e = 0.5 * s.u.norm2() + 1.5 * s.theta / self.m_g;
        (m, s.u * m, m * e)
    }

    pub fn totals(&self) -> (f64, Vec3, f64) {
        let mut m = 0.0;
        let mut p = Vec3::ZERO;
        let mut e = 0.0;
        for c in 0..self.len() {
            let (a, b, d) = self.conserved(c);
            m += a * self.dx;
            p += b * self.dx;
            e += d * self.dx;
        }
        (m, p, e)
    }

    pub fn local_state(&self, c: usize) -> LocalGasState {
        let s = &self.cells[c];
        LocalGasState {
            alpha_n: s.alpha * s.n,
            u: s.u,
            theta_over_m: s.theta / self.m_g,
        }
    }

    fn periodic(&self, c: isize) -> usize {
        c.rem_euclid(self.len() as isize) as usize
    }

    /// Central-difference gradients at cell `c`; `grad_p` is `∂ₓ(nθ)`.
    pub fn gradients(&self, c: usize) -> GasGradients {
        let l = &self.cells[self.periodic(c as isize - 1)];
        let r = &self.cells[self.periodic(c as isize + 1)];
        let h = 2.0 * self.dx;
        let du = (r.u - l.u) / h;
        let mut grad_u = Mat3::ZERO;
        grad_u.m[0][0] = du.x;
        grad_u.m[1][0] = du.y;
        grad_u.m[2][0] = du.z;
        GasGradients {
            grad_alpha_n: Vec3::new((r.alpha * r.n - l.alpha * l.n) / h, 0.0, 0.0),
            grad_u,
            div_u: du.x,
            grad_p: Vec3::new((r.pressure() - l.pressure()) / h, 0.0, 0.0),
            grad_alpha: Vec3::new((r.alpha - l.alpha) / h, 0.0, 0.0),
        }
    }

    pub fn min_alpha(&self) -> f64 {
        self.cells
            .iter()
            .map(|c| c.alpha)
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Particle {
    pub x: f64,
    pub v: Vec3,
    pub weight: f64,
}

/// Weighted macro-particles approximating `F`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticlePhase {
    pub particles: Vec<Particle>,
    pub a: f64,
}

impl ParticlePhase {
    pub fn empty(a: f64) -> Self {
        ParticlePhase {
            particles: Vec::new(),
            a,
        }
    }

    pub fn total_number(&self) -> f64 {
        self.particles.iter().map(|p| p.weight).sum()
    }

    pub fn bulk_velocity(&self) -> Vec3 {
        let w = self.total_number();
        if w == 0.0 {
            return Vec3::ZERO;
        }
        self.particles
            .iter()
            .fold(Vec3::ZERO, |a, p| a + p.v * p.weight)
            / w
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.a >= 0.0 && self.a < 0.5) {
            return Err(SolverError::InvalidState(format!(
                "a = {} must lie in [0, 0.5)",
                self.a
            )));
        }
        if self
            .particles
            .iter()
            .any(|p| !(0.0..1.0).contains(&p.x) || !(p.weight > 0.0) || !p.v.is_finite())
        {
            return Err(SolverError::InvalidState(
                "particles need x in [0,1), positive weight, finite velocity".into(),
            ));
        }
        Ok(())
    }
}

/// Cloud-in-cell stencil: the two cells sharing a particle at `x`, with weights summing to one.
#[inline]
pub fn cic(x: f64, cells: usize) -> [(usize, f64); 2] {
    let s = x * cells as f64 - 0.5;
    let i = s.floor();
    let f = s - i;
    let i = i as isize;
    let n = cells as isize;
    [
        ((i.rem_euclid(n)) as usize, 1.0 - f),
        (((i + 1).rem_euclid(n)) as usize, f),
    ]
}

/// Particle number density per cell by cloud-in-cell deposit.
pub fn number_density(phase: &ParticlePhase, cells: usize) -> Vec<f64> {
    let dx = 1.0 / cells as f64;
    let mut out = vec![0.0; cells];
    for p in &phase.particles {
        for (c, s) in cic(p.x, cells) {
            out[c] += p.weight * s / dx;
        }
    }
    out
}

/// `α = 1 − (4π/3) a³ n_F` per cell; an overpacked cell is an error.
pub fn volume_fraction(phase: &ParticlePhase, grid: &GasField) -> Result<Vec<f64>, SolverError> {
    let k = 4.0 * PI / 3.0 * phase.a.powi(3);
    let nf = number_density(phase, grid.len());
    nf.iter()
        .enumerate()
        .map(|(c, n)| {
            let alpha = 1.0 - k * n;
            if alpha <= 0.0 {
                Err(SolverError::OverpackedCell { cell: c, alpha })
            } else {
                Ok(alpha)
            }
        })
        .collect()
}

/// Thick spray or the thin-spray reduction (`α ≡ 1`, no buoyancy, friction-only drag).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SprayMode {
    Thick,
    Thin,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cic_weights_sum_to_one_and_wrap() {
        for x in [0.0, 0.01, 0.5, 0.999] {
            let w = cic(x, 10);
            assert!((w[0].1 + w[1].1 - 1.0).abs() < 1e-15);
        }
        let w = cic(0.01, 10);
        assert_eq!(w[0].0, 9);
        assert_eq!(w[1].0, 0);
        assert!((w[1].1 - 0.6).abs() < 1e-12);
    }

    #[test]
    fn empty_phase_leaves_alpha_at_one() {
        let gas = GasField::uniform(8, 1.0, 1.0, Vec3::ZERO, 1.0);
        let alpha = volume_fraction(&ParticlePhase::empty(0.1), &gas).unwrap();
        assert!(alpha.iter().all(|a| *a == 1.0));
    }

    #[test]
    fn volume_fraction_arithmetic() {
        let gas = GasField::uniform(10, 1.0, 1.0, Vec3::ZERO, 1.0);
        // One unit of weight per cell at the centres: number density 10.
        let particles = (0..10)
            .map(|c| Particle {
                x: (c as f64 + 0.5) / 10.0,
                v: Vec3::ZERO,
                weight: 1.0,
            })
            .collect();
        let phase = ParticlePhase { particles, a: 0.1 };
        let alpha = volume_fraction(&phase, &gas).unwrap();
        for a in &alpha {
            assert!((a - 0.958_112_1).abs() < 1e-6, "{a}");
        }
        let grads_flat = alpha.windows(3).all(|w| (w[2] - w[0]).abs() < 1e-15);
        assert!(grads_flat);
    }

    #[test]
    fn overpacked_cell_is_an_error() {
        let gas = GasField::uniform(10, 1.0, 1.0, Vec3::ZERO, 1.0);
        let phase = ParticlePhase {
            particles: vec![Particle {
                x: 0.05,
                v: Vec3::ZERO,
                weight: 100.0,
            }],
            a: 0.2,
        };
        assert!(matches!(
            volume_fraction(&phase, &gas),
            Err(SolverError::OverpackedCell { cell: 0, .. })
        ));
    }

    #[test]
    fn gradients_are_consistent() {
        let mut gas = GasField::uniform(16, 1.0, 1.0, Vec3::ZERO, 1.0);
        for c in 0..16 {
            let x = gas.center(c);
            gas.cells[c].u = Vec3::new((2.0 * PI * x).sin(), 0.0, 0.0);
        }
        let g = gas.gradients(3);
        assert!(g.validate().is_ok());
        assert!(g.grad_u.m[0][0] > 0.0);
    }
}

//! Particle push and the drag exchange with the gas.

use super::{cic, GasField, ParticlePhase, SolverError, SprayMode};
use crate::collision::density::wrap_unit;
use crate::kernels::{correction_divergence, friction_force, GasGradients, LocalGasState, Vec3};
use rayon::prelude::*;
use std::f64::consts::PI;

/// Gas state and gradients at every cell centre.
pub(crate) struct CellTable {
    pub states: Vec<LocalGasState>,
    pub grads: Vec<GasGradients>,
}

impl CellTable {
    pub fn build(gas: &GasField) -> Self {
        CellTable {
            states: (0..gas.len()).map(|c| gas.local_state(c)).collect(),
            grads: (0..gas.len()).map(|c| gas.gradients(c)).collect(),
        }
    }

    /// Cloud-in-cell interpolation at `x`, the adjoint of the particle deposit.
    pub fn at(&self, x: f64) -> (LocalGasState, GasGradients) {
        let mut s = LocalGasState {
            alpha_n: 0.0,
            u: Vec3::ZERO,
            theta_over_m: 0.0,
        };
        let mut g = GasGradients::zero();
        for (c, w) in cic(x, self.states.len()) {
            let cs = &self.states[c];
            let cg = &self.grads[c];
            s.alpha_n += w * cs.alpha_n;
            s.u += cs.u * w;
            s.theta_over_m += w * cs.theta_over_m;
            g.grad_alpha_n += cg.grad_alpha_n * w;
            g.grad_u = g.grad_u + cg.grad_u.scale(w);
            g.div_u += w * cg.div_u;
            g.grad_p += cg.grad_p * w;
            g.grad_alpha += cg.grad_alpha * w;
        }
        g.div_u = g.grad_u.trace();
        (s, g)
    }
}

/// Drag `D` on each particle; thin spray keeps only the friction term.
pub(crate) fn particle_drag(
    table: &CellTable,
    phase: &ParticlePhase,
    mode: SprayMode,
) -> Vec<Vec3> {
    let a = phase.a;
    phase
        .particles
        .par_iter()
        .map(|p| {
            let (s, g) = table.at(p.x);
            if s.alpha_n <= 0.0 {
                return Vec3::ZERO;
            }
            let f = friction_force(&s, p.v, a);
            match mode {
                SprayMode::Thin => f,
                SprayMode::Thick => f + correction_divergence(&s, &g, p.v, a),
            }
        })
        .collect()
}

/// Momentum and energy handed to the gas by one particle step, as per-cell densities.
#[derive(Debug, Clone, PartialEq)]
pub struct DragExchange {
    pub momentum: Vec<Vec3>,
    pub energy: Vec<f64>,
}

impl DragExchange {
    pub fn zero(cells: usize) -> Self {
        DragExchange {
            momentum: vec![Vec3::ZERO; cells],
            energy: vec![0.0; cells],
        }
    }

    /// Adds the exchange to the gas conserved variables at fixed `α`.
    pub fn apply(&self, gas: &mut GasField) -> Result<(), SolverError> {
        for c in 0..gas.len() {
            let (m, mom, e) = gas.conserved(c);
            if m <= 0.0 {
                continue;
            }
            let mom = mom + self.momentum[c];
            let e = e + self.energy[c];
            let u = mom / m;
            let theta = (e / m - 0.5 * u.norm2()) * 2.0 * gas.m_g / 3.0;
            let cell = &mut gas.cells[c];
            if gas.vacuum.get(c).copied().unwrap_or(false) {
                continue;
            }
            if !(theta > 0.0) {
                return Err(SolverError::NegativeTemperature {
                    cell: c,
                    theta,
                    n: cell.n,
                    u: u.to_array(),
                });
            }
            cell.u = u;
            cell.theta = theta;
        }
        Ok(())
    }
}

/// Symplectic Euler push `v ← v + dt Γ`, `x ← x + dt vₓ` with
/// `Γ = −D − (4π/3)(a³/m_g) ∇ₓp` (thin spray: `Γ = −D`).
///
/// The returned exchange carries `+m_g W D dt` of momentum and `m_g W D·v̄ dt` of
/// energy to the gas, where `v̄` is the mean of the old and new velocity; drag alone
/// then conserves momentum and energy up to rounding.
pub fn vlasov_step(
    phase: &mut ParticlePhase,
    gas: &GasField,
    dt: f64,
    mode: SprayMode,
) -> Result<DragExchange, SolverError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(SolverError::InvalidState(format!(
            "dt = {dt} must be positive"
        )));
    }
    let table = CellTable::build(gas);
    let drag = particle_drag(&table, phase, mode);
    let buoy = 4.0 * PI / 3.0 * phase.a.powi(3) / gas.m_g;
    let mut ex = DragExchange::zero(gas.len());
    for (p, d) in phase.particles.iter_mut().zip(&drag) {
        let mut acc = -*d;
        if mode == SprayMode::Thick {
            acc -= table.at(p.x).1.grad_p * buoy;
        }
        let v_new = p.v + acc * dt;
        let v_mid = (p.v + v_new) * 0.5;
        for (c, w) in cic(p.x, gas.len()) {
            let k = gas.m_g * p.weight * w * dt / gas.dx;
            ex.momentum[c] += *d * k;
            ex.energy[c] += k * d.dot(v_mid);
        }
        p.v = v_new;
        p.x = wrap_unit(p.x + dt * v_new.x);
    }
    Ok(ex)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spray_solver::Particle;

    #[test]
    fn free_streaming_without_gas() {
        let mut gas = GasField::uniform(10, 1.0, 0.0, Vec3::ZERO, 1.0);
        gas.vacuum = vec![true; 10];
        let mut phase = ParticlePhase {
            particles: vec![Particle {
                x: 0.95,
                v: Vec3::new(1.0, 0.5, 0.0),
                weight: 1.0,
            }],
            a: 0.1,
        };
        vlasov_step(&mut phase, &gas, 0.1, SprayMode::Thick).unwrap();
        assert!((phase.particles[0].x - 0.05).abs() < 1e-12);
        assert_eq!(phase.particles[0].v, Vec3::new(1.0, 0.5, 0.0));
    }

    #[test]
    fn drag_exchange_conserves_momentum_and_energy() {
        let mut gas = GasField::uniform(10, 1.0, 2.0, Vec3::ZERO, 1.0);
        let particles = (0..20)
            .map(|i| Particle {
                x: (i as f64 + 0.3) / 20.0,
                v: Vec3::new(0.5, 0.2, -0.1),
                weight: 0.05,
            })
            .collect();
        let mut phase = ParticlePhase { particles, a: 0.1 };
        let (_, p0, e0) = gas.totals();
        let pp0 = phase
            .particles
            .iter()
            .fold(Vec3::ZERO, |a, p| a + p.v * p.weight);
        let ke0: f64 = phase
            .particles
            .iter()
            .map(|p| 0.5 * p.weight * p.v.norm2())
            .sum();
        let ex = vlasov_step(&mut phase, &gas, 0.01, SprayMode::Thin).unwrap();
        ex.apply(&mut gas).unwrap();
        let (_, p1, e1) = gas.totals();
        let pp1 = phase
            .particles
            .iter()
            .fold(Vec3::ZERO, |a, p| a + p.v * p.weight);
        let ke1: f64 = phase
            .particles
            .iter()
            .map(|p| 0.5 * p.weight * p.v.norm2())
            .sum();
        assert!(((p1 + pp1) - (p0 + pp0)).max_abs() < 1e-14);
        assert!(((e1 + ke1) - (e0 + ke0)).abs() < 1e-14);
        assert!(pp1.x < pp0.x);
    }

    #[test]
    fn buoyancy_pushes_particles_down_the_pressure_gradient() {
        let cells = 64;
        let mut gas = GasField::uniform(cells, 1.0, 1.0, Vec3::ZERO, 1.0);
        for c in 0..cells {
            gas.cells[c].n = 1.0 + 0.3 * (2.0 * PI * gas.center(c)).sin();
        }
        let x0 = gas.center(0);
        let grad_p = (gas.cells[1].pressure() - gas.cells[cells - 1].pressure()) / (2.0 * gas.dx);
        assert!(grad_p > 0.0);
        let a = 0.05;
        let dt = 1e-3;
        let at_rest = || ParticlePhase {
            particles: vec![Particle {
                x: x0,
                v: Vec3::ZERO,
                weight: 1e-6,
            }],
            a,
        };
        let mut thick = at_rest();
        vlasov_step(&mut thick, &gas, dt, SprayMode::Thick).unwrap();
        let expected = -4.0 * PI / 3.0 * a.powi(3) * grad_p * dt;
        let v = thick.particles[0].v;
        assert!(v.x < 0.0);
        assert!(
            (v.x - expected).abs() < 1e-12 * expected.abs(),
            "{} vs {expected}",
            v.x
        );
        assert_eq!((v.y, v.z), (0.0, 0.0));
        let mut thin = at_rest();
        vlasov_step(&mut thin, &gas, dt, SprayMode::Thin).unwrap();
        assert_eq!(thin.particles[0].v, Vec3::ZERO);
    }
}

//! Finite-volume update of the gas in `(αρ, αρu, αρE)`.
//!
//! Face fluxes are Rusanov with speed `|uₓ| + √(5θ/(3m_g))`. The momentum flux is
//! convective only; pressure enters as the cell source `−α ∂ₓp` with a central
//! difference, which for `α ≡ 1` coincides with the centred pressure flux. The energy
//! flux carries `αp uₓ`, and a change of `α` between calls removes `p Δα` of energy.

use super::vlasov::{particle_drag, CellTable};
use super::{
    cic, volume_fraction, GasField, ParticlePhase, SolverError, SprayMode, VACUUM_DENSITY,
};
use crate::kernels::{q_tensor, Vec3};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GasStepOptions {
    pub mode: SprayMode,
    /// Include `m_g ∫F D dv` and its work as sources. The split solver moves drag into the
    /// particle stage instead, so the exchange is exactly balanced.
    pub drag_sources: bool,
}

impl Default for GasStepOptions {
    fn default() -> Self {
        GasStepOptions {
            mode: SprayMode::Thick,
            drag_sources: true,
        }
    }
}

/// Largest stable `dt` for the gas update.
pub fn cfl_limit(gas: &GasField) -> f64 {
    let smax = gas
        .cells
        .iter()
        .map(|c| c.u.x.abs() + (5.0 * c.theta / (3.0 * gas.m_g)).sqrt())
        .fold(0.0f64, f64::max);
    if smax > 0.0 {
        0.5 * gas.dx / smax
    } else {
        f64::INFINITY
    }
}

#[derive(Clone, Copy)]
struct Cons {
    m: f64,
    mom: Vec3,
    e: f64,
}

/// Advances the gas by `dt` with the particles frozen.
pub fn gas_step(
    gas: &mut GasField,
    phase: &ParticlePhase,
    dt: f64,
    opts: &GasStepOptions,
) -> Result<(), SolverError> {
    gas.validate()?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(SolverError::InvalidState(format!(
            "dt = {dt} must be positive"
        )));
    }
    let limit = cfl_limit(gas);
    if dt > limit * (1.0 + 1e-12) {
        return Err(SolverError::Cfl { dt, limit });
    }
    let n = gas.len();
    if gas.vacuum.len() != n {
        gas.vacuum = vec![false; n];
    }
    let thick = opts.mode == SprayMode::Thick;
    let alpha_new = if thick {
        volume_fraction(phase, gas)?
    } else {
        vec![1.0; n]
    };
    let m_g = gas.m_g;
    let dx = gas.dx;

    let cons: Vec<Cons> = (0..n)
        .map(|c| {
            let (m, mom, e) = gas.conserved(c);
            Cons { m, mom, e }
        })
        .collect();
    let flux = |c: usize| -> (Cons, f64) {
        let s = &gas.cells[c];
        let u = &cons[c];
        let ux = s.u.x;
        let f = Cons {
            m: u.m * ux,
            mom: u.mom * ux,
            e: (u.e + s.alpha * s.pressure()) * ux,
        };
        (f, ux.abs() + (5.0 * s.theta / (3.0 * m_g)).sqrt())
    };
    let mut face = Vec::with_capacity(n);
    for i in 0..n {
        let j = (i + 1) % n;
        let (fl, sl) = flux(i);
        let (fr, sr) = flux(j);
        let s = sl.max(sr);
        let (ul, ur) = (&cons[i], &cons[j]);
        face.push(Cons {
            m: 0.5 * (fl.m + fr.m) - 0.5 * s * (ur.m - ul.m),
            mom: (fl.mom + fr.mom) * 0.5 - (ur.mom - ul.mom) * (0.5 * s),
            e: 0.5 * (fl.e + fr.e) - 0.5 * s * (ur.e - ul.e),
        });
    }

    let mut src_mom = vec![Vec3::ZERO; n];
    let mut src_e = vec![0.0; n];
    for c in 0..n {
        let l = (c + n - 1) % n;
        let r = (c + 1) % n;
        let dp = (gas.cells[r].pressure() - gas.cells[l].pressure()) / (2.0 * dx);
        src_mom[c].x -= gas.cells[c].alpha * dp;
    }

    if thick && !phase.particles.is_empty() {
        // αρ ∫F Q(v−u) dv, its x-row and the x-component of ∫F Q(v−u) v dv, per cell.
        let mut row = vec![Vec3::ZERO; n];
        let mut work = vec![0.0; n];
        for p in &phase.particles {
            for (c, w) in cic(p.x, n) {
                let s = &gas.cells[c];
                let k = m_g * s.alpha * s.n * p.weight * w / dx;
                let q = q_tensor(p.v - s.u, phase.a);
                let qx = Vec3::new(q.get(0, 0), q.get(0, 1), q.get(0, 2));
                row[c] += qx * k;
                work[c] += k * qx.dot(p.v);
            }
        }
        for c in 0..n {
            let l = (c + n - 1) % n;
            let r = (c + 1) % n;
            src_mom[c] -= (row[r] - row[l]) / (2.0 * dx);
            src_e[c] -= (work[r] - work[l]) / (2.0 * dx);
        }
    }

    if opts.drag_sources && !phase.particles.is_empty() {
        let table = CellTable::build(gas);
        let drag = particle_drag(&table, phase, opts.mode);
        for (p, d) in phase.particles.iter().zip(&drag) {
            for (c, w) in cic(p.x, n) {
                let k = m_g * p.weight * w / dx;
                src_mom[c] += *d * k;
                src_e[c] += k * d.dot(p.v);
            }
        }
    }

    let old: Vec<_> = gas.cells.clone();
    for c in 0..n {
        let l = (c + n - 1) % n;
        let u = &cons[c];
        let m = u.m - dt / dx * (face[c].m - face[l].m);
        let mom = u.mom - (face[c].mom - face[l].mom) * (dt / dx) + src_mom[c] * dt;
        let e = u.e - dt / dx * (face[c].e - face[l].e) + dt * src_e[c]
            - old[c].pressure() * (alpha_new[c] - old[c].alpha);
        let alpha = alpha_new[c];
        let cell = &mut gas.cells[c];
        cell.alpha = alpha;
        cell.n = (m / (alpha * m_g)).max(0.0);
        if cell.n < VACUUM_DENSITY {
            gas.vacuum[c] = true;
            continue;
        }
        gas.vacuum[c] = false;
        let uu = mom / m;
        let theta = (e / m - 0.5 * uu.norm2()) * 2.0 * m_g / 3.0;
        if !(theta > 0.0) {
            return Err(SolverError::NegativeTemperature {
                cell: c,
                theta,
                n: cell.n,
                u: uu.to_array(),
            });
        }
        cell.u = uu;
        cell.theta = theta;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn wavy(cells: usize) -> GasField {
        let mut gas = GasField::uniform(cells, 1.0, 1.0, Vec3::ZERO, 1.0);
        for c in 0..cells {
            let x = gas.center(c);
            gas.cells[c].n = 1.0 + 0.3 * (2.0 * PI * x).sin();
            gas.cells[c].u = Vec3::new(0.2 * (2.0 * PI * x).cos(), 0.1, 0.0);
            gas.cells[c].theta = 1.0 + 0.2 * (4.0 * PI * x).cos();
        }
        gas
    }

    #[test]
    fn pure_gas_conserves_totals() {
        let mut gas = wavy(64);
        let phase = ParticlePhase::empty(0.0);
        let (m0, p0, e0) = gas.totals();
        for _ in 0..200 {
            let dt = 0.9 * cfl_limit(&gas);
            gas_step(&mut gas, &phase, dt, &GasStepOptions::default()).unwrap();
        }
        let (m1, p1, e1) = gas.totals();
        assert!((m1 - m0).abs() < 1e-13 * m0);
        assert!((p1 - p0).max_abs() < 1e-13);
        assert!((e1 - e0).abs() < 1e-13 * e0);
    }

    #[test]
    fn uniform_state_is_stationary() {
        let mut gas = GasField::uniform(16, 1.0, 2.0, Vec3::new(0.3, 0.0, 0.1), 0.7);
        let before = gas.clone();
        let phase = ParticlePhase::empty(0.0);
        for _ in 0..100 {
            gas_step(&mut gas, &phase, 0.01, &GasStepOptions::default()).unwrap();
        }
        for (a, b) in gas.cells.iter().zip(&before.cells) {
            assert!(
                (a.n - b.n).abs() < 1e-13
                    && (a.u - b.u).max_abs() < 1e-13
                    && (a.theta - b.theta).abs() < 1e-13
            );
        }
    }

    #[test]
    fn cfl_violation_is_reported() {
        let mut gas = GasField::uniform(16, 1.0, 1.0, Vec3::ZERO, 1.0);
        let err = gas_step(
            &mut gas,
            &ParticlePhase::empty(0.0),
            1.0,
            &GasStepOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, SolverError::Cfl { .. }));
    }

    #[test]
    fn negative_temperature_is_reported() {
        let mut gas = GasField::uniform(4, 1.0, 1.0, Vec3::ZERO, 1.0);
        let mut ex = crate::spray_solver::DragExchange::zero(4);
        ex.energy[2] = -10.0;
        let r = ex.apply(&mut gas);
        assert!(
            matches!(r, Err(SolverError::NegativeTemperature { cell: 2, .. })),
            "{r:?}"
        );
    }
}

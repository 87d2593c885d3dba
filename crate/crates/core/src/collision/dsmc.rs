//! Stochastic particle simulation of the scaled gas–particle kinetic system on the periodic
//! unit interval with three-dimensional velocities.
//!
//! One step is transport, then gas–gas collisions (no-time-counter sampling per cell at rate
//! `1/δ`), then delocalized gas–particle collisions. A particle at `x` meets gas samples at
//! `y = x + aσ₁` with `|y − x| < a`; for equal gas weights `W_g` the pair rate is
//! `(a W_g / η) (c·σ)⁺` per unit azimuth, with `σ₁ = (y − x)/a` and `c = v − w`.
//! The gas partner is updated with probability `η W_p / W_g`, which is one when `W_g = η W_p`;
//! in that case momentum `Σ W_p v + Σ W_g w` is conserved event by event, otherwise in expectation.

use super::density::{periodic_offset, sample_normal3, wrap_unit, KineticDensity, PhaseDensity};
use super::rng::stream_rng;
use super::{
    cross_collision_unchecked, same_species_unchecked, CollisionError, ScalingParams, VelocityPair,
};
use crate::kernels::Vec3;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

const PARTICLE_STREAM: u64 = 1 << 40;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GasSample {
    pub x: f64,
    pub w: Vec3,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParticleSample {
    pub x: f64,
    pub v: Vec3,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DsmcOptions {
    pub gas_gas: bool,
    pub gas_particle: bool,
}

impl Default for DsmcOptions {
    fn default() -> Self {
        DsmcOptions {
            gas_gas: true,
            gas_particle: true,
        }
    }
}

/// Sample-particle state of both species.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KineticEnsemble {
    pub gas: Vec<GasSample>,
    pub particles: Vec<ParticleSample>,
    pub cell_count: usize,
    pub params: ScalingParams,
    pub rng_seed: u64,
    pub step: u64,
    pub time: f64,
}

/// Totals of both species; momentum and energy carry the factor `m_g` of the scaled system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleMoments {
    pub gas_mass: f64,
    pub gas_momentum: Vec3,
    pub gas_energy: f64,
    pub particle_mass: f64,
    pub particle_momentum: Vec3,
    pub particle_energy: f64,
}

impl EnsembleMoments {
    pub fn total_momentum(&self) -> Vec3 {
        self.gas_momentum + self.particle_momentum
    }

    pub fn total_energy(&self) -> f64 {
        self.gas_energy + self.particle_energy
    }
}

/// Per-cell gas moments `(αn, u, θ/m)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellMoments {
    pub alpha_n: f64,
    pub u: Vec3,
    pub theta_over_m: f64,
}

fn cell_of(x: f64, cells: usize) -> usize {
    ((x * cells as f64) as usize).min(cells - 1)
}

/// Positions at the quantiles `(i + ½)/N` of the normalized profile of `number`.
fn quantile_positions(number: &crate::collision::density::SmoothField, n: usize) -> Vec<f64> {
    let grid = 4096;
    let mut cdf = vec![0.0; grid + 1];
    for k in 0..grid {
        let xm = (k as f64 + 0.5) / grid as f64;
        cdf[k + 1] = cdf[k] + number.value(xm).max(0.0) / grid as f64;
    }
    let total = cdf[grid];
    let mut out = Vec::with_capacity(n);
    let mut k = 0;
    for i in 0..n {
        let target = (i as f64 + 0.5) / n as f64 * total;
        while k < grid - 1 && cdf[k + 1] < target {
            k += 1;
        }
        let frac = if cdf[k + 1] > cdf[k] {
            (target - cdf[k]) / (cdf[k + 1] - cdf[k])
        } else {
            0.5
        };
        out.push(wrap_unit((k as f64 + frac) / grid as f64));
    }
    out
}

impl KineticEnsemble {
    /// Builds an ensemble whose gas samples have equal weights.
    pub fn new(
        gas: Vec<GasSample>,
        particles: Vec<ParticleSample>,
        cell_count: usize,
        params: ScalingParams,
        rng_seed: u64,
    ) -> Result<Self, CollisionError> {
        let e = KineticEnsemble {
            gas,
            particles,
            cell_count,
            params,
            rng_seed,
            step: 0,
            time: 0.0,
        };
        e.validate()?;
        Ok(e)
    }

    pub fn validate(&self) -> Result<(), CollisionError> {
        self.params.validate()?;
        if self.cell_count == 0 {
            return Err(CollisionError::InvalidInput(
                "cell_count must be positive".into(),
            ));
        }
        let bad_x = |x: f64| !(0.0..1.0).contains(&x);
        if self
            .gas
            .iter()
            .any(|g| bad_x(g.x) || !(g.weight > 0.0) || !g.w.is_finite())
            || self
                .particles
                .iter()
                .any(|p| bad_x(p.x) || !(p.weight > 0.0) || !p.v.is_finite())
        {
            return Err(CollisionError::InvalidInput(
                "samples need positions in [0,1), positive weights and finite velocities".into(),
            ));
        }
        if let Some(first) = self.gas.first() {
            if self
                .gas
                .iter()
                .any(|g| (g.weight - first.weight).abs() > 1e-12 * first.weight)
            {
                return Err(CollisionError::InvalidInput(
                    "gas samples must carry equal weights".into(),
                ));
            }
            let wg = first.weight;
            if let Some(p) = self
                .particles
                .iter()
                .find(|p| self.params.eta * p.weight > wg * (1.0 + 1e-12))
            {
                return Err(CollisionError::InvalidInput(format!(
                    "gas update probability eta*W_p/W_g = {} exceeds one",
                    self.params.eta * p.weight / wg
                )));
            }
        }
        Ok(())
    }

    /// Quiet-start ensemble from two local Maxwellian descriptions.
    ///
    /// Positions sit at the quantiles of the number profiles. Gas velocities are Gaussian draws
    /// shifted and rescaled per cell so that each cell reproduces the target mean and temperature
    /// of its centre. Weights are `∫n dx / N` for each species.
    pub fn from_densities(
        gas: &KineticDensity,
        particles: &KineticDensity,
        n_gas: usize,
        n_particles: usize,
        cell_count: usize,
        params: ScalingParams,
        seed: u64,
    ) -> Result<Self, CollisionError> {
        if !gas.is_valid() || !particles.is_valid() || gas.is_cold() {
            return Err(CollisionError::InvalidInput(
                "densities must be non-negative and the gas warm".into(),
            ));
        }
        let mut rng = stream_rng(seed, u64::MAX, 0);
        let gas_total = gas.number.mean;
        let xs = quantile_positions(&gas.number, n_gas);
        let mut g: Vec<GasSample> = xs
            .iter()
            .map(|&x| GasSample {
                x,
                w: sample_normal3(&mut rng),
                weight: gas_total / n_gas as f64,
            })
            .collect();
        let mut by_cell: Vec<Vec<usize>> = vec![Vec::new(); cell_count];
        for (i, s) in g.iter().enumerate() {
            by_cell[cell_of(s.x, cell_count)].push(i);
        }
        for (c, idx) in by_cell.iter().enumerate() {
            if idx.len() < 2 {
                continue;
            }
            let xc = (c as f64 + 0.5) / cell_count as f64;
            let mean = idx.iter().fold(Vec3::ZERO, |a, &i| a + g[i].w) / idx.len() as f64;
            let var = idx.iter().map(|&i| (g[i].w - mean).norm2()).sum::<f64>()
                / (3.0 * idx.len() as f64);
            let scale = (gas.temperature.value(xc) / var).sqrt();
            for &i in idx {
                let x = g[i].x;
                g[i].w = gas.bulk_velocity(x) + (g[i].w - mean) * scale;
            }
        }
        let part_total = particles.number.mean;
        let p: Vec<ParticleSample> = if n_particles == 0 || part_total == 0.0 {
            Vec::new()
        } else {
            quantile_positions(&particles.number, n_particles)
                .into_iter()
                .map(|x| ParticleSample {
                    x,
                    v: particles.sample_velocity(x, &mut rng),
                    weight: part_total / n_particles as f64,
                })
                .collect()
        };
        Self::new(g, p, cell_count, params, seed)
    }

    pub fn moments(&self) -> EnsembleMoments {
        let m = self.params.m_g;
        let mut out = EnsembleMoments {
            gas_mass: 0.0,
            gas_momentum: Vec3::ZERO,
            gas_energy: 0.0,
            particle_mass: 0.0,
            particle_momentum: Vec3::ZERO,
            particle_energy: 0.0,
        };
        for s in &self.gas {
            out.gas_mass += m * s.weight;
            out.gas_momentum += s.w * (m * s.weight);
            out.gas_energy += 0.5 * m * s.weight * s.w.norm2();
        }
        for s in &self.particles {
            out.particle_mass += m * s.weight;
            out.particle_momentum += s.v * (m * s.weight);
            out.particle_energy += 0.5 * m * s.weight * s.v.norm2();
        }
        out
    }

    /// Weighted mean particle velocity.
    pub fn particle_bulk_velocity(&self) -> Vec3 {
        let w: f64 = self.particles.iter().map(|p| p.weight).sum();
        self.particles
            .iter()
            .fold(Vec3::ZERO, |a, p| a + p.v * p.weight)
            / w
    }

    pub fn cell_moments(&self) -> Vec<CellMoments> {
        let dx = 1.0 / self.cell_count as f64;
        let mut sw = vec![0.0; self.cell_count];
        let mut sm = vec![Vec3::ZERO; self.cell_count];
        let mut se = vec![0.0; self.cell_count];
        for s in &self.gas {
            let c = cell_of(s.x, self.cell_count);
            sw[c] += s.weight;
            sm[c] += s.w * s.weight;
            se[c] += s.weight * s.w.norm2();
        }
        (0..self.cell_count)
            .map(|c| {
                if sw[c] == 0.0 {
                    return CellMoments {
                        alpha_n: 0.0,
                        u: Vec3::ZERO,
                        theta_over_m: 0.0,
                    };
                }
                let u = sm[c] / sw[c];
                CellMoments {
                    alpha_n: sw[c] / dx,
                    u,
                    theta_over_m: ((se[c] / sw[c]) - u.norm2()) / 3.0,
                }
            })
            .collect()
    }

    /// Largest admissible step when gas–gas collisions are active.
    pub fn max_dt(&self) -> f64 {
        0.2 * self.params.delta
    }

    /// Advances the ensemble by `dt`.
    pub fn step_in_place(&mut self, dt: f64, opts: DsmcOptions) -> Result<(), CollisionError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(CollisionError::InvalidInput(format!(
                "dt = {dt} must be positive"
            )));
        }
        if opts.gas_gas && dt > self.max_dt() * (1.0 + 1e-12) {
            return Err(CollisionError::TimeStepTooLarge {
                dt,
                bound: self.max_dt(),
            });
        }
        for s in &mut self.gas {
            s.x = wrap_unit(s.x + dt * s.w.x);
        }
        for p in &mut self.particles {
            p.x = wrap_unit(p.x + dt * p.v.x);
        }
        if opts.gas_gas && !self.gas.is_empty() {
            self.gas_gas_collisions(dt);
        }
        if opts.gas_particle && !self.gas.is_empty() && !self.particles.is_empty() {
            self.gas_particle_collisions(dt);
        }
        self.step += 1;
        self.time += dt;
        Ok(())
    }

    fn gas_gas_collisions(&mut self, dt: f64) {
        let cells = self.cell_count;
        let dx = 1.0 / cells as f64;
        let wg = self.gas[0].weight;
        let inv_delta = 1.0 / self.params.delta;
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); cells];
        for (i, s) in self.gas.iter().enumerate() {
            members[cell_of(s.x, cells)].push(i);
        }
        let (seed, step) = (self.rng_seed, self.step);
        let updates: Vec<Vec<(usize, Vec3)>> = members
            .par_iter()
            .enumerate()
            .map(|(c, idx)| {
                let n = idx.len();
                if n < 2 {
                    return Vec::new();
                }
                let mut w: Vec<Vec3> = idx.iter().map(|&i| self.gas[i].w).collect();
                let mean = w.iter().fold(Vec3::ZERO, |a, v| a + *v) / n as f64;
                let c_max = 2.0 * w.iter().map(|v| (*v - mean).norm()).fold(0.0, f64::max);
                if c_max == 0.0 {
                    return Vec::new();
                }
                let mut rng = stream_rng(seed, step, c as u64);
                let pairs = 0.5 * n as f64 * (n - 1) as f64;
                let lambda = pairs * inv_delta * wg / dx * PI * c_max * dt;
                let candidates = poisson(lambda, &mut rng);
                for _ in 0..candidates {
                    let i = rng.random_range(0..n);
                    let mut j = rng.random_range(0..n - 1);
                    if j >= i {
                        j += 1;
                    }
                    let rel = w[i] - w[j];
                    let speed = rel.norm();
                    if rng.random::<f64>() * c_max >= speed {
                        continue;
                    }
                    let sigma = sample_flux_weighted_direction(rel / speed, &mut rng);
                    let out = same_species_unchecked(VelocityPair::new(w[i], w[j]), sigma);
                    w[i] = out.v;
                    w[j] = out.w;
                }
                idx.iter().copied().zip(w).collect()
            })
            .collect();
        for cell in updates {
            for (i, w) in cell {
                self.gas[i].w = w;
            }
        }
    }

    fn gas_particle_collisions(&mut self, dt: f64) {
        let a = self.params.a;
        let eta = self.params.eta;
        let n_bins = (4.0 / a).ceil() as usize;
        let b = 1.0 / n_bins as f64;
        let mut bins: Vec<Vec<usize>> = vec![Vec::new(); n_bins];
        for (i, s) in self.gas.iter().enumerate() {
            bins[((s.x / b) as usize).min(n_bins - 1)].push(i);
        }
        let wg = self.gas[0].weight;
        let mut w_max = self.gas.iter().map(|s| s.w.norm()).fold(0.0, f64::max);
        let k_post = 2.0 / (1.0 + eta);
        for p_idx in 0..self.particles.len() {
            let mut rng = stream_rng(self.rng_seed, self.step, PARTICLE_STREAM + p_idx as u64);
            let p = self.particles[p_idx];
            let lo = ((p.x - a) / b).floor() as i64;
            let hi = ((p.x + a) / b).floor() as i64;
            let covered: Vec<usize> = (lo..=hi)
                .map(|k| k.rem_euclid(n_bins as i64) as usize)
                .collect();
            let count: usize = covered.iter().map(|&k| bins[k].len()).sum();
            if count == 0 {
                continue;
            }
            let mut v = p.v;
            let c_max = v.norm() + w_max;
            let lambda = (a / eta) * 2.0 * PI * c_max * wg * count as f64 * dt;
            let candidates = poisson(lambda, &mut rng);
            let update_prob = eta * p.weight / wg;
            for _ in 0..candidates {
                let mut r = rng.random_range(0..count);
                let mut j = usize::MAX;
                for &k in &covered {
                    if r < bins[k].len() {
                        j = bins[k][r];
                        break;
                    }
                    r -= bins[k].len();
                }
                let g = self.gas[j];
                let mu = periodic_offset(g.x, p.x) / a;
                if mu.abs() >= 1.0 {
                    continue;
                }
                let phi = 2.0 * PI * rng.random::<f64>();
                let st = (1.0 - mu * mu).sqrt();
                let sigma = Vec3::new(mu, st * phi.cos(), st * phi.sin());
                let cs = (v - g.w).dot(sigma);
                if rng.random::<f64>() * c_max >= cs {
                    continue;
                }
                let post = cross_collision_unchecked(VelocityPair::new(v, g.w), sigma, eta);
                v = post.v;
                let update = update_prob >= 1.0 - 1e-12 || rng.random::<f64>() < update_prob;
                if update {
                    debug_assert!((post.w - g.w - sigma * (k_post * cs)).max_abs() < 1e-9);
                    self.gas[j].w = post.w;
                    w_max = w_max.max(post.w.norm());
                }
            }
            self.particles[p_idx].v = v;
        }
    }
}

fn poisson(lambda: f64, rng: &mut ChaCha8Rng) -> u64 {
    if lambda <= 0.0 {
        return 0;
    }
    match Poisson::new(lambda) {
        Ok(d) => d.sample(rng) as u64,
        Err(_) => 0,
    }
}

/// Direction with density proportional to `(ĉ·σ)⁺` on the sphere.
fn sample_flux_weighted_direction(c_hat: Vec3, rng: &mut ChaCha8Rng) -> Vec3 {
    let (e1, e2, n) = c_hat.orthonormal_frame();
    let t = rng.random::<f64>().sqrt();
    let st = (1.0 - t * t).max(0.0).sqrt();
    let phi = 2.0 * PI * rng.random::<f64>();
    e1 * (st * phi.cos()) + e2 * (st * phi.sin()) + n * t
}

/// Functional form of one step: returns the advanced ensemble.
pub fn dsmc_step(
    state: &KineticEnsemble,
    dt: f64,
    opts: DsmcOptions,
) -> Result<KineticEnsemble, CollisionError> {
    let mut next = state.clone();
    next.step_in_place(dt, opts)?;
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collision::density::SmoothField;

    fn params(eta: f64, delta: f64, a: f64) -> ScalingParams {
        ScalingParams::with_unit_gas_mass(eta, delta, a).unwrap()
    }

    #[test]
    fn free_transport_is_exact() {
        let gas = vec![GasSample {
            x: 0.9,
            w: Vec3::new(0.3, 1.0, 0.0),
            weight: 1.0,
        }];
        let particles = vec![ParticleSample {
            x: 0.1,
            v: Vec3::new(-0.5, 0.0, 0.0),
            weight: 1.0,
        }];
        let e = KineticEnsemble::new(gas, particles, 4, params(0.5, 0.1, 0.05), 1).unwrap();
        let next = dsmc_step(
            &e,
            0.5,
            DsmcOptions {
                gas_gas: false,
                gas_particle: false,
            },
        )
        .unwrap();
        assert_eq!(next.gas[0].x, wrap_unit(0.9 + 0.5 * 0.3));
        assert_eq!(next.particles[0].x, wrap_unit(0.1 - 0.25));
        assert_eq!(next.gas[0].w, e.gas[0].w);
    }

    #[test]
    fn time_step_bound_is_enforced() {
        let gas = vec![GasSample {
            x: 0.5,
            w: Vec3::ZERO,
            weight: 1.0,
        }];
        let mut e = KineticEnsemble::new(gas, vec![], 4, params(0.5, 0.1, 0.05), 1).unwrap();
        assert!(matches!(
            e.step_in_place(0.05, DsmcOptions::default()),
            Err(CollisionError::TimeStepTooLarge { .. })
        ));
    }

    #[test]
    fn flux_weighted_direction_has_expected_mean() {
        // E[σ] = (2/3) ĉ for density ∝ (ĉ·σ)⁺.
        let mut rng = stream_rng(2, 0, 0);
        let c = Vec3::new(0.0, 0.6, 0.8);
        let n = 200_000;
        let mean = (0..n).fold(Vec3::ZERO, |a, _| {
            a + sample_flux_weighted_direction(c, &mut rng)
        }) / n as f64;
        assert!((mean - c * (2.0 / 3.0)).max_abs() < 5e-3);
    }

    #[test]
    fn exact_weight_mode_conserves_momentum_and_energy() {
        let eta = 0.25;
        let gas_d = KineticDensity::uniform(2.0, Vec3::ZERO, 1.0);
        let part_d = KineticDensity::uniform(0.5, Vec3::new(2.0, 0.0, 0.0), 0.1);
        // W_g = 2/4000 = 5e-4, W_p = 0.5/250 = 2e-3, η W_p = W_g.
        let mut e = KineticEnsemble::from_densities(
            &gas_d,
            &part_d,
            4000,
            250,
            8,
            params(eta, 0.1, 0.2),
            7,
        )
        .unwrap();
        let m0 = e.moments();
        for _ in 0..20 {
            e.step_in_place(0.01, DsmcOptions::default()).unwrap();
        }
        let m1 = e.moments();
        assert!(
            m1.particle_momentum.x < 0.95 * m0.particle_momentum.x,
            "no drag observed"
        );
        assert!((m1.total_momentum() - m0.total_momentum()).max_abs() < 1e-12);
        assert!((m1.total_energy() - m0.total_energy()).abs() < 1e-12 * m0.total_energy());
        assert_eq!(m1.gas_mass, m0.gas_mass);
        assert_eq!(m1.particle_mass, m0.particle_mass);
    }

    #[test]
    fn trajectories_do_not_depend_on_thread_count() {
        let gas_d = KineticDensity::uniform(1.0, Vec3::ZERO, 1.0);
        let part_d = KineticDensity::uniform(0.2, Vec3::new(1.0, 0.0, 0.0), 0.0);
        let e = KineticEnsemble::from_densities(
            &gas_d,
            &part_d,
            2000,
            100,
            4,
            params(0.1, 0.1, 0.05),
            3,
        )
        .unwrap();
        let run = |mut e: KineticEnsemble| {
            for _ in 0..5 {
                e.step_in_place(0.01, DsmcOptions::default()).unwrap();
            }
            e
        };
        let a = run(e.clone());
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let b = pool.install(|| run(e));
        assert_eq!(a, b);
    }

    #[test]
    fn quiet_start_reproduces_cell_moments() {
        let gas_d = KineticDensity {
            number: SmoothField::sine(2.0, 0.5, 1),
            velocity: [
                SmoothField::constant(0.3),
                SmoothField::constant(0.0),
                SmoothField::constant(0.0),
            ],
            temperature: SmoothField::constant(1.5),
        };
        let part_d = KineticDensity::uniform(0.0, Vec3::ZERO, 0.0);
        let e = KineticEnsemble::from_densities(
            &gas_d,
            &part_d,
            40_000,
            0,
            10,
            params(0.5, 0.1, 0.05),
            1,
        )
        .unwrap();
        for (c, m) in e.cell_moments().iter().enumerate() {
            let xc = (c as f64 + 0.5) / 10.0;
            assert!((m.u.x - 0.3).abs() < 1e-12);
            assert!((m.theta_over_m - 1.5).abs() < 1e-10);
            let avg = 2.0
                + 0.5 * ((2.0 * PI * (xc - 0.05)).cos() - (2.0 * PI * (xc + 0.05)).cos())
                    / (2.0 * PI * 0.1);
            assert!(
                (m.alpha_n - avg).abs() < 2e-3 * avg,
                "cell {c}: {} vs {avg}",
                m.alpha_n
            );
        }
    }
}

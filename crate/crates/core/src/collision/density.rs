//! Phase-space densities on the periodic unit interval with three-dimensional velocities.

use crate::kernels::Vec3;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Wraps `x` into `[0, 1)`.
#[inline]
pub fn wrap_unit(x: f64) -> f64 {
    let y = x - x.floor();
    if y >= 1.0 {
        0.0
    } else {
        y
    }
}

/// Signed periodic separation `x − y` in `[-1/2, 1/2)`.
#[inline]
pub fn periodic_offset(x: f64, y: f64) -> f64 {
    let d = x - y;
    d - (d + 0.5).floor()
}

pub fn sample_normal3(rng: &mut ChaCha8Rng) -> Vec3 {
    Vec3::new(
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
    )
}

pub fn gaussian3_pdf(d: Vec3, var: f64) -> f64 {
    (2.0 * PI * var).powf(-1.5) * (-d.norm2() / (2.0 * var)).exp()
}

/// `mean + amp · sin(2π k x + phase)` on the periodic unit interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothField {
    pub mean: f64,
    pub amp: f64,
    pub mode: u32,
    pub phase: f64,
}

impl SmoothField {
    pub fn constant(mean: f64) -> Self {
        SmoothField {
            mean,
            amp: 0.0,
            mode: 1,
            phase: 0.0,
        }
    }

    pub fn sine(mean: f64, amp: f64, mode: u32) -> Self {
        SmoothField {
            mean,
            amp,
            mode,
            phase: 0.0,
        }
    }

    fn arg(&self, x: f64) -> f64 {
        2.0 * PI * self.mode as f64 * x + self.phase
    }

    pub fn value(&self, x: f64) -> f64 {
        self.mean + self.amp * self.arg(x).sin()
    }

    pub fn derivative(&self, x: f64) -> f64 {
        self.amp * 2.0 * PI * self.mode as f64 * self.arg(x).cos()
    }

    pub fn second_derivative(&self, x: f64) -> f64 {
        let k = 2.0 * PI * self.mode as f64;
        -self.amp * k * k * self.arg(x).sin()
    }

    pub fn min_value(&self) -> f64 {
        self.mean - self.amp.abs()
    }
}

/// A phase-space density that can be sampled in velocity at fixed position.
pub trait PhaseDensity: Sync {
    /// `∫ F(x, v) dv`.
    fn number(&self, x: f64) -> f64;
    /// Pointwise value `F(x, v)`; only meaningful when `is_evaluable()`.
    fn eval(&self, x: f64, v: Vec3) -> f64;
    fn is_evaluable(&self) -> bool;
    /// Draws `v` from `F(x, ·) / number(x)`.
    fn sample_velocity(&self, x: f64, rng: &mut ChaCha8Rng) -> Vec3;
    /// Mean and variance of a Gaussian that covers `F(x, ·)`, used as an importance proposal.
    fn envelope(&self, x: f64) -> (Vec3, f64);
}

/// Local Maxwellian `n(x) · N(v; u(x), T(x) Id)`; a zero temperature field gives a cold beam.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KineticDensity {
    pub number: SmoothField,
    pub velocity: [SmoothField; 3],
    /// Velocity variance `θ/m`.
    pub temperature: SmoothField,
}

impl KineticDensity {
    pub fn uniform(number: f64, u: Vec3, temperature: f64) -> Self {
        KineticDensity {
            number: SmoothField::constant(number),
            velocity: [
                SmoothField::constant(u.x),
                SmoothField::constant(u.y),
                SmoothField::constant(u.z),
            ],
            temperature: SmoothField::constant(temperature),
        }
    }

    pub fn bulk_velocity(&self, x: f64) -> Vec3 {
        Vec3::new(
            self.velocity[0].value(x),
            self.velocity[1].value(x),
            self.velocity[2].value(x),
        )
    }

    pub fn bulk_velocity_derivative(&self, x: f64) -> Vec3 {
        Vec3::new(
            self.velocity[0].derivative(x),
            self.velocity[1].derivative(x),
            self.velocity[2].derivative(x),
        )
    }

    pub fn is_cold(&self) -> bool {
        self.temperature.mean == 0.0 && self.temperature.amp == 0.0
    }

    pub fn is_valid(&self) -> bool {
        self.number.min_value() >= 0.0 && (self.is_cold() || self.temperature.min_value() > 0.0)
    }
}

impl PhaseDensity for KineticDensity {
    fn number(&self, x: f64) -> f64 {
        self.number.value(x)
    }

    fn eval(&self, x: f64, v: Vec3) -> f64 {
        if self.is_cold() {
            return f64::NAN;
        }
        self.number.value(x) * gaussian3_pdf(v - self.bulk_velocity(x), self.temperature.value(x))
    }

    fn is_evaluable(&self) -> bool {
        !self.is_cold()
    }

    fn sample_velocity(&self, x: f64, rng: &mut ChaCha8Rng) -> Vec3 {
        let u = self.bulk_velocity(x);
        if self.is_cold() {
            return u;
        }
        u + sample_normal3(rng) * self.temperature.value(x).sqrt()
    }

    fn envelope(&self, x: f64) -> (Vec3, f64) {
        (self.bulk_velocity(x), self.temperature.value(x))
    }
}

/// Kernel density estimate of an ensemble: periodic Gaussian kernel in `x`, isotropic Gaussian in `v`.
#[derive(Debug, Clone)]
pub struct EnsembleKde {
    pub positions: Vec<f64>,
    pub velocities: Vec<Vec3>,
    pub weights: Vec<f64>,
    pub hx: f64,
    pub hv: f64,
}

impl EnsembleKde {
    /// Bandwidths from Silverman's rule `1.06 σ N^{-1/5}` in `x` and `(4/5)^{1/7} σ N^{-1/7}` in `v`.
    pub fn silverman(positions: Vec<f64>, velocities: Vec<Vec3>, weights: Vec<f64>) -> Self {
        let n = positions.len().max(1) as f64;
        let sx = std_dev(&positions).max(1e-3);
        let mut comps = Vec::with_capacity(velocities.len() * 3);
        let mean = velocities.iter().fold(Vec3::ZERO, |a, v| a + *v) / n;
        for v in &velocities {
            let d = *v - mean;
            comps.extend([d.x, d.y, d.z]);
        }
        let sv = (comps.iter().map(|c| c * c).sum::<f64>() / comps.len().max(1) as f64)
            .sqrt()
            .max(1e-6);
        let hx = (1.06 * sx * n.powf(-0.2)).min(0.25);
        let hv = (0.8f64).powf(1.0 / 7.0) * sv * n.powf(-1.0 / 7.0);
        EnsembleKde {
            positions,
            velocities,
            weights,
            hx,
            hv,
        }
    }

    fn kx(&self, d: f64) -> f64 {
        let mut acc = 0.0;
        for image in [-1.0, 0.0, 1.0] {
            let e = (d + image) / self.hx;
            acc += (-0.5 * e * e).exp();
        }
        acc / ((2.0 * PI).sqrt() * self.hx)
    }
}

fn std_dev(xs: &[f64]) -> f64 {
    let n = xs.len().max(1) as f64;
    let m = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n).sqrt()
}

impl PhaseDensity for EnsembleKde {
    fn number(&self, x: f64) -> f64 {
        self.positions
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| w * self.kx(periodic_offset(x, *p)))
            .sum()
    }

    fn eval(&self, x: f64, v: Vec3) -> f64 {
        let var = self.hv * self.hv;
        self.positions
            .iter()
            .zip(&self.velocities)
            .zip(&self.weights)
            .map(|((p, vi), w)| w * self.kx(periodic_offset(x, *p)) * gaussian3_pdf(v - *vi, var))
            .sum()
    }

    fn is_evaluable(&self) -> bool {
        true
    }

    fn sample_velocity(&self, x: f64, rng: &mut ChaCha8Rng) -> Vec3 {
        let ks: Vec<f64> = self
            .positions
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| w * self.kx(periodic_offset(x, *p)))
            .collect();
        let total: f64 = ks.iter().sum();
        let mut target = rng.random::<f64>() * total;
        let mut idx = ks.len() - 1;
        for (i, k) in ks.iter().enumerate() {
            if target < *k {
                idx = i;
                break;
            }
            target -= k;
        }
        self.velocities[idx] + sample_normal3(rng) * self.hv
    }

    fn envelope(&self, x: f64) -> (Vec3, f64) {
        let ks: Vec<f64> = self
            .positions
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| w * self.kx(periodic_offset(x, *p)))
            .collect();
        let total: f64 = ks.iter().sum::<f64>().max(1e-300);
        let mean = self
            .velocities
            .iter()
            .zip(&ks)
            .fold(Vec3::ZERO, |a, (v, k)| a + *v * *k)
            / total;
        let var = self
            .velocities
            .iter()
            .zip(&ks)
            .map(|(v, k)| k * (*v - mean).norm2())
            .sum::<f64>()
            / (3.0 * total);
        (mean, var + self.hv * self.hv)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collision::rng::stream_rng;
    use crate::kernels::quadrature::gauss_legendre_on;

    #[test]
    fn wrapping_and_offsets() {
        assert_eq!(wrap_unit(1.25), 0.25);
        assert_eq!(wrap_unit(-0.25), 0.75);
        assert!(wrap_unit(-1e-18) < 1.0);
        assert!((periodic_offset(0.05, 0.95) - 0.1).abs() < 1e-15);
        assert!((periodic_offset(0.95, 0.05) + 0.1).abs() < 1e-15);
    }

    #[test]
    fn smooth_field_derivatives() {
        let f = SmoothField {
            mean: 1.0,
            amp: 0.3,
            mode: 2,
            phase: 0.4,
        };
        let x = 0.37;
        let h = 1e-5;
        let fd = (f.value(x + h) - f.value(x - h)) / (2.0 * h);
        assert!((fd - f.derivative(x)).abs() < 1e-8);
        let fd2 = (f.value(x + h) - 2.0 * f.value(x) + f.value(x - h)) / (h * h);
        assert!((fd2 - f.second_derivative(x)).abs() < 1e-3);
    }

    #[test]
    fn kinetic_density_velocity_samples_match_moments() {
        let d = KineticDensity::uniform(2.0, Vec3::new(0.5, -1.0, 0.0), 0.7);
        let mut rng = stream_rng(1, 0, 0);
        let n = 200_000;
        let mut m = Vec3::ZERO;
        let mut m2 = 0.0;
        for _ in 0..n {
            let v = d.sample_velocity(0.3, &mut rng);
            m += v;
            m2 += (v - d.bulk_velocity(0.3)).norm2();
        }
        m = m / n as f64;
        assert!((m - Vec3::new(0.5, -1.0, 0.0)).max_abs() < 0.01);
        assert!((m2 / n as f64 / 3.0 - 0.7).abs() < 0.01);
    }

    #[test]
    fn kde_number_density_integrates_to_total_weight() {
        let positions: Vec<f64> = (0..200).map(|i| (i as f64 + 0.5) / 200.0).collect();
        let velocities = vec![Vec3::ZERO; 200];
        let weights = vec![0.01; 200];
        let kde = EnsembleKde::silverman(positions, velocities, weights);
        let (x, w) = gauss_legendre_on(200, 0.0, 1.0);
        let total: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * kde.number(*xi)).sum();
        assert!((total - 2.0).abs() < 1e-6, "{total}");
        assert!((kde.number(0.0) - 2.0).abs() < 1e-3);
    }
}

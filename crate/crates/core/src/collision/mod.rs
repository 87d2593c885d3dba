//! Microscopic layer: binary collision laws, Monte Carlo evaluation of the delocalized
//! gas–particle collision integrals, and a particle simulator of the scaled kinetic system.

pub mod density;
pub mod dsmc;
pub mod enskog;
pub mod rng;

pub use density::{EnsembleKde, KineticDensity, PhaseDensity, SmoothField};
pub use dsmc::{DsmcOptions, EnsembleMoments, GasSample, KineticEnsemble, ParticleSample};
pub use enskog::{
    enskog_e2_apply, weak_identity_residual, Estimate, IdentityResidual, TestFunction,
};

use crate::kernels::Vec3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CollisionError {
    #[error("direction is not a unit vector: |sigma| = {0}")]
    NonUnitDirection(f64),
    #[error("invalid scaling parameters: {0}")]
    InvalidParams(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("time step {dt} exceeds the stability bound {bound}")]
    TimeStepTooLarge { dt: f64, bound: f64 },
    #[error("too few Monte Carlo samples: {got} < {min}")]
    TooFewSamples { got: usize, min: usize },
    #[error("density cannot be evaluated pointwise: {0}")]
    NotEvaluable(String),
}

/// Dimensionless parameters of the scaled kinetic system.
///
/// `eta = m_g / m_p` is both the mass ratio and the particle-to-gas number ratio.
/// The gas-to-particle velocity scale ratio is fixed to one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingParams {
    pub eta: f64,
    pub delta: f64,
    pub a: f64,
    pub m_g: f64,
    pub m_p: f64,
}

impl ScalingParams {
    pub fn new(eta: f64, delta: f64, a: f64, m_g: f64, m_p: f64) -> Result<Self, CollisionError> {
        let p = ScalingParams {
            eta,
            delta,
            a,
            m_g,
            m_p,
        };
        p.validate()?;
        Ok(p)
    }

    /// Parameters with `m_g = 1`, `m_p = 1/eta`.
    pub fn with_unit_gas_mass(eta: f64, delta: f64, a: f64) -> Result<Self, CollisionError> {
        Self::new(eta, delta, a, 1.0, 1.0 / eta)
    }

    /// Every violated invariant, in a fixed order.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        let all = [self.eta, self.delta, self.a, self.m_g, self.m_p];
        if all.iter().any(|x| !x.is_finite()) {
            v.push("all scaling parameters must be finite".to_string());
            return v;
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            v.push(format!("eta = {} must lie in (0, 1]", self.eta));
        }
        if self.delta <= 0.0 {
            v.push(format!("delta = {} must be positive", self.delta));
        }
        if self.a <= 0.0 {
            v.push(format!("a = {} must be positive", self.a));
        }
        if self.a >= 0.5 {
            v.push(format!(
                "a = {} must be below 0.5 so the delocalization fits the periodic box",
                self.a
            ));
        }
        if self.m_g <= 0.0 {
            v.push(format!("m_g = {} must be positive", self.m_g));
        }
        if self.m_p <= 0.0 {
            v.push(format!("m_p = {} must be positive", self.m_p));
        }
        if self.m_g > 0.0
            && self.m_p > 0.0
            && (self.eta - self.m_g / self.m_p).abs() > 1e-12 * self.eta.abs().max(1.0)
        {
            v.push(format!(
                "eta = {} differs from m_g/m_p = {}",
                self.eta,
                self.m_g / self.m_p
            ));
        }
        v
    }

    pub fn validate(&self) -> Result<(), CollisionError> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(CollisionError::InvalidParams(v.join("; ")))
        }
    }
}

/// Particle velocity `v` and gas velocity `w` of a colliding pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VelocityPair {
    pub v: Vec3,
    pub w: Vec3,
}

impl VelocityPair {
    pub fn new(v: Vec3, w: Vec3) -> Self {
        VelocityPair { v, w }
    }
}

const UNIT_TOLERANCE: f64 = 1e-12;

fn check_unit(sigma: Vec3) -> Result<(), CollisionError> {
    let n = sigma.norm();
    if !n.is_finite() || (n - 1.0).abs() > UNIT_TOLERANCE {
        return Err(CollisionError::NonUnitDirection(n));
    }
    Ok(())
}

/// Gas–particle collision law with mass ratio `eta`.
///
/// `v' = v − (2η/(1+η)) ((v−w)·σ) σ`, `w' = w − (2/(1+η)) ((w−v)·σ) σ`.
pub fn cross_collision(
    pair: VelocityPair,
    sigma: Vec3,
    eta: f64,
) -> Result<VelocityPair, CollisionError> {
    check_unit(sigma)?;
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(CollisionError::InvalidInput(format!(
            "eta = {eta} must lie in (0, 1]"
        )));
    }
    if !(pair.v.is_finite() && pair.w.is_finite()) {
        return Err(CollisionError::InvalidInput(
            "velocities must be finite".into(),
        ));
    }
    Ok(cross_collision_unchecked(pair, sigma, eta))
}

#[inline]
pub fn cross_collision_unchecked(pair: VelocityPair, sigma: Vec3, eta: f64) -> VelocityPair {
    let cs = (pair.v - pair.w).dot(sigma);
    let k = 2.0 / (1.0 + eta);
    VelocityPair {
        v: pair.v - sigma * (k * eta * cs),
        w: pair.w + sigma * (k * cs),
    }
}

/// Same-species law `v° = v − ((v−v₁)·σ)σ`, `v₁° = v₁ − ((v₁−v)·σ)σ`, stored as `(v, w) = (v, v₁)`.
pub fn same_species_collision(
    pair: VelocityPair,
    sigma: Vec3,
) -> Result<VelocityPair, CollisionError> {
    check_unit(sigma)?;
    if !(pair.v.is_finite() && pair.w.is_finite()) {
        return Err(CollisionError::InvalidInput(
            "velocities must be finite".into(),
        ));
    }
    Ok(same_species_unchecked(pair, sigma))
}

#[inline]
pub fn same_species_unchecked(pair: VelocityPair, sigma: Vec3) -> VelocityPair {
    let cs = (pair.v - pair.w).dot(sigma);
    VelocityPair {
        v: pair.v - sigma * cs,
        w: pair.w + sigma * cs,
    }
}

/// Determinant of the map `(v, w) ↦ (v', w')` by central differences with step `h`.
pub fn collision_jacobian_det(
    pair: VelocityPair,
    sigma: Vec3,
    eta: f64,
    h: f64,
) -> Result<f64, CollisionError> {
    check_unit(sigma)?;
    let flat = |p: VelocityPair| [p.v.x, p.v.y, p.v.z, p.w.x, p.w.y, p.w.z];
    let unflat =
        |z: [f64; 6]| VelocityPair::new(Vec3::new(z[0], z[1], z[2]), Vec3::new(z[3], z[4], z[5]));
    let base = flat(pair);
    let mut jac = [[0.0f64; 6]; 6];
    for j in 0..6 {
        let mut plus = base;
        let mut minus = base;
        plus[j] += h;
        minus[j] -= h;
        let fp = flat(cross_collision_unchecked(unflat(plus), sigma, eta));
        let fm = flat(cross_collision_unchecked(unflat(minus), sigma, eta));
        for i in 0..6 {
            jac[i][j] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    Ok(determinant6(jac))
}

fn determinant6(mut m: [[f64; 6]; 6]) -> f64 {
    let mut det = 1.0;
    for col in 0..6 {
        let pivot = (col..6)
            .max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))
            .unwrap_or(col);
        if m[pivot][col] == 0.0 {
            return 0.0;
        }
        if pivot != col {
            m.swap(pivot, col);
            det = -det;
        }
        det *= m[col][col];
        for row in col + 1..6 {
            let f = m[row][col] / m[col][col];
            for k in col..6 {
                m[row][k] -= f * m[col][k];
            }
        }
    }
    det
}

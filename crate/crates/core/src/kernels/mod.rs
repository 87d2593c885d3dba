//! Analytic objects of the gas–particle interaction: the Maxwellian, the friction kernel `q`,
//! the correction tensor `Q`, hemisphere integrals, the drag force and its viscous-tensor form.
//!
//! All functions are pure. Velocities are dimensionless and `θ/m_g` is the squared thermal speed.

pub mod check;
pub mod friction;
pub mod quadrature;
pub mod tensor;

pub use check::{kernel_checks, CheckRow};
pub use friction::{q_kernel, qbar_profile, qbar_table, QbarTable, QBAR_AT_ZERO};
pub use quadrature::{gauss_hermite_normal, gauss_legendre, heaviside, SphereRule};
pub use tensor::{Mat3, SymTensor2, Vec3};

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

/// Lower bound applied to `θ/m_g` before it is used as a variance.
pub const THERMAL_FLOOR: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invalid quadrature spec: {0}")]
    InvalidSpec(String),
    #[error("quadrature for {what} did not converge: refinement difference {diff:e} exceeds tolerance {tol:e}")]
    QuadratureNonConvergence {
        what: &'static str,
        diff: f64,
        tol: f64,
    },
}

/// Parameters of the local Maxwellian `μ[αn, u, θ/m_g]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalGasState {
    pub alpha_n: f64,
    pub u: Vec3,
    pub theta_over_m: f64,
}

impl LocalGasState {
    pub fn new(alpha_n: f64, u: Vec3, theta_over_m: f64) -> Result<Self, KernelError> {
        let s = LocalGasState {
            alpha_n,
            u,
            theta_over_m,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), KernelError> {
        if !(self.alpha_n.is_finite() && self.u.is_finite() && self.theta_over_m.is_finite()) {
            return Err(KernelError::InvalidInput(
                "gas state has non-finite components".into(),
            ));
        }
        if self.alpha_n < 0.0 {
            return Err(KernelError::InvalidInput(format!(
                "alpha_n = {} < 0",
                self.alpha_n
            )));
        }
        if self.theta_over_m <= 0.0 {
            return Err(KernelError::InvalidInput(format!(
                "theta/m = {} <= 0",
                self.theta_over_m
            )));
        }
        Ok(())
    }

    /// `√(θ/m_g)` with the thermal floor applied.
    pub fn thermal_speed(&self) -> f64 {
        self.theta_over_m.max(THERMAL_FLOOR).sqrt()
    }

    /// True when the thermal floor is active for this state.
    pub fn is_thermally_clamped(&self) -> bool {
        self.theta_over_m < THERMAL_FLOOR
    }
}

/// Spatial derivatives of the gas fields at one point.
///
/// `grad_u.m[i][j] = ∂u_i/∂x_j`, so `grad_u · c` has components `Σ_j c_j ∂_j u_i`.
/// `grad_p` is the gradient of `p = nθ`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GasGradients {
    pub grad_alpha_n: Vec3,
    pub grad_u: Mat3,
    pub div_u: f64,
    pub grad_p: Vec3,
    pub grad_alpha: Vec3,
}

impl GasGradients {
    pub fn zero() -> Self {
        GasGradients::default()
    }

    pub fn validate(&self) -> Result<(), KernelError> {
        let finite = self.grad_alpha_n.is_finite()
            && self.grad_u.is_finite()
            && self.div_u.is_finite()
            && self.grad_p.is_finite()
            && self.grad_alpha.is_finite();
        if !finite {
            return Err(KernelError::InvalidInput(
                "gradients have non-finite components".into(),
            ));
        }
        let tr = self.grad_u.trace();
        if (tr - self.div_u).abs() > 1e-12 * tr.abs().max(1.0) {
            return Err(KernelError::InvalidInput(format!(
                "div_u = {} differs from trace(grad_u) = {}",
                self.div_u, tr
            )));
        }
        Ok(())
    }
}

/// Quadrature controls shared by the kernel routines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub sphere_rule: SphereRule,
    /// Gauss–Hermite order per dimension for Gaussian-weighted velocity integrals.
    pub hermite_order: usize,
    pub tolerance: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            sphere_rule: SphereRule::default(),
            hermite_order: 24,
            tolerance: 1e-10,
        }
    }
}

impl QuadratureSpec {
    pub const MIN_THETA: usize = 16;
    pub const MIN_HERMITE: usize = 20;

    pub fn validate(&self) -> Result<(), KernelError> {
        let mut problems = Vec::new();
        match self.sphere_rule {
            SphereRule::ProductGrid { n_theta, n_phi } => {
                if n_theta < Self::MIN_THETA {
                    problems.push(format!("n_theta = {n_theta} < {}", Self::MIN_THETA));
                }
                if n_phi < 4 {
                    problems.push(format!("n_phi = {n_phi} < 4"));
                }
            }
            SphereRule::MonteCarlo { n_samples, .. } => {
                if n_samples < 1000 {
                    problems.push(format!("n_samples = {n_samples} < 1000"));
                }
            }
        }
        if self.hermite_order < Self::MIN_HERMITE {
            problems.push(format!(
                "hermite_order = {} < {}",
                self.hermite_order,
                Self::MIN_HERMITE
            ));
        }
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            problems.push(format!("tolerance = {} must be positive", self.tolerance));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(KernelError::InvalidSpec(problems.join("; ")))
        }
    }
}

/// `μ[αn, u, θ/m](w) = αn (2π θ/m)^{-3/2} exp(−|w − u|² / (2 θ/m))`.
pub fn maxwellian_eval(state: &LocalGasState, w: Vec3) -> Result<f64, KernelError> {
    state.validate()?;
    if !w.is_finite() {
        return Err(KernelError::InvalidInput(
            "maxwellian_eval needs a finite velocity".into(),
        ));
    }
    Ok(maxwellian_unchecked(state, w))
}

/// Maxwellian without validation, for inner loops over already-validated states.
#[inline]
pub fn maxwellian_unchecked(state: &LocalGasState, w: Vec3) -> f64 {
    let t = state.theta_over_m.max(THERMAL_FLOOR);
    state.alpha_n * (2.0 * PI * t).powf(-1.5) * (-(w - state.u).norm2() / (2.0 * t)).exp()
}

/// `Q(ξ) = (4π/15) a³ [2 ξ⊗ξ + |ξ|² Id]`.
pub fn q_tensor(xi: Vec3, a: f64) -> SymTensor2 {
    let k = 4.0 * PI / 15.0 * a * a * a;
    (SymTensor2::outer_self(xi).scale(2.0) + SymTensor2::identity().scale(xi.norm2())).scale(k)
}

/// `(π/2) |ξ| ξ`.
pub fn k_closed_form(xi: Vec3) -> Vec3 {
    xi * (0.5 * PI * xi.norm())
}

/// `(2π/15)(|ξ|² Id + 2 ξ⊗ξ)`.
pub fn k4_closed_form(xi: Vec3) -> SymTensor2 {
    (SymTensor2::identity().scale(xi.norm2()) + SymTensor2::outer_self(xi).scale(2.0))
        .scale(2.0 * PI / 15.0)
}

fn refine(rule: SphereRule) -> Option<SphereRule> {
    match rule {
        SphereRule::ProductGrid { n_theta, n_phi } => Some(SphereRule::ProductGrid {
            n_theta: 2 * n_theta,
            n_phi: 2 * n_phi,
        }),
        SphereRule::MonteCarlo { .. } => None,
    }
}

fn k_with(rule: SphereRule, xi: Vec3) -> Vec3 {
    rule.nodes(xi).iter().fold(Vec3::ZERO, |acc, (om, w)| {
        let c = om.dot(xi);
        acc + *om * (w * c * c * heaviside(c))
    })
}

fn k4_with(rule: SphereRule, xi: Vec3) -> SymTensor2 {
    rule.nodes(xi)
        .iter()
        .fold(SymTensor2::ZERO, |acc, (om, w)| {
            let c = om.dot(xi);
            acc + SymTensor2::outer_self(*om).scale(w * c * c * heaviside(c))
        })
}

/// `K(ξ) = ∫_{S²} (ω·ξ)² ω H(ω·ξ) dω` by sphere quadrature.
///
/// Product-grid results are checked against a refined grid.
pub fn k_integral(xi: Vec3, quad: &QuadratureSpec) -> Result<Vec3, KernelError> {
    if !xi.is_finite() {
        return Err(KernelError::InvalidInput(
            "k_integral needs a finite argument".into(),
        ));
    }
    let coarse = k_with(quad.sphere_rule, xi);
    if let Some(fine_rule) = refine(quad.sphere_rule) {
        let fine = k_with(fine_rule, xi);
        let diff = (fine - coarse).max_abs();
        if diff > quad.tolerance * fine.norm().max(1.0) {
            return Err(KernelError::QuadratureNonConvergence {
                what: "K integral",
                diff,
                tol: quad.tolerance,
            });
        }
    }
    Ok(coarse)
}

/// `K₃(ξ) = ∫_{S²} ω⊗ω (ω·ξ)² H(ω·ξ) dω` by sphere quadrature.
pub fn k4_integral(xi: Vec3, quad: &QuadratureSpec) -> Result<SymTensor2, KernelError> {
    if !xi.is_finite() {
        return Err(KernelError::InvalidInput(
            "k4_integral needs a finite argument".into(),
        ));
    }
    let coarse = k4_with(quad.sphere_rule, xi);
    if let Some(fine_rule) = refine(quad.sphere_rule) {
        let fine = k4_with(fine_rule, xi);
        let diff = fine.max_abs_diff(&coarse);
        let scale = fine.components().iter().fold(1.0f64, |m, c| m.max(c.abs()));
        if diff > quad.tolerance * scale {
            return Err(KernelError::QuadratureNonConvergence {
                what: "K4 integral",
                diff,
                tol: quad.tolerance,
            });
        }
    }
    Ok(coarse)
}

/// Volume of the `d`-ball of radius `a`, `|S^{d-1}| a^d / d`.
pub fn ball_coefficient(d: usize, a: f64) -> Result<f64, KernelError> {
    if d < 1 {
        return Err(KernelError::InvalidInput(
            "ball_coefficient needs d >= 1".into(),
        ));
    }
    if !(a >= 0.0 && a.is_finite()) {
        return Err(KernelError::InvalidInput(format!(
            "ball_coefficient needs finite a >= 0, got {a}"
        )));
    }
    // V_d = V_{d-2} · 2π / d with V_0 = 1, V_1 = 2.
    let mut v = if d.is_multiple_of(2) { 1.0 } else { 2.0 };
    let mut k = if d.is_multiple_of(2) { 2 } else { 3 };
    while k <= d {
        v *= 2.0 * PI / k as f64;
        k += 2;
    }
    Ok(v * a.powi(d as i32))
}

/// Leading-order friction `π a² αn (θ/m) q((v − u)/√(θ/m))`.
pub fn friction_force(state: &LocalGasState, v: Vec3, a: f64) -> Vec3 {
    let c = state.thermal_speed();
    let xi = (v - state.u) / c;
    qbar_table().q(xi) * (PI * a * a * state.alpha_n * c * c)
}

/// `div_x[αn Q(v − u)]` with `v` frozen, expanded by the product and chain rules:
/// `Σ_i ∂_i(αn) Q_ij(c) + αn Σ_{i,k} (∂Q_ij/∂c_k)(−∂_i u_k)`, `c = v − u`.
pub fn correction_divergence(state: &LocalGasState, grads: &GasGradients, v: Vec3, a: f64) -> Vec3 {
    let kappa = 4.0 * PI / 15.0 * a * a * a;
    let c = (v - state.u).to_array();
    let g = grads.grad_alpha_n.to_array();
    let qt = q_tensor(v - state.u, a);
    let delta = |i: usize, j: usize| if i == j { 1.0 } else { 0.0 };
    let mut out = [0.0; 3];
    for (j, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for i in 0..3 {
            acc += g[i] * qt.get(i, j);
            for k in 0..3 {
                let dq =
                    kappa * 2.0 * (delta(i, k) * c[j] + c[i] * delta(j, k) + c[k] * delta(i, j));
                acc -= state.alpha_n * dq * grads.grad_u.m[k][i];
            }
        }
        *o = acc;
    }
    Vec3::from_array(out)
}

/// Drag force `D = π a² αn (θ/m) q((v−u)/√(θ/m)) + div_x[αn Q(v−u)]`.
pub fn drag_force_d(
    state: &LocalGasState,
    grads: &GasGradients,
    v: Vec3,
    a: f64,
    quad: &QuadratureSpec,
) -> Result<Vec3, KernelError> {
    state.validate()?;
    grads.validate()?;
    quad.validate()?;
    if !v.is_finite() || !(a >= 0.0) {
        return Err(KernelError::InvalidInput(
            "drag_force_d needs finite v and a >= 0".into(),
        ));
    }
    Ok(friction_force(state, v, a) + correction_divergence(state, grads, v, a))
}

/// Viscous tensor `D̄` with `D = D̄ (v − u)`, written with `αρ = m_g αn`:
///
/// `D̄ = π a² αn √(θ/m) q̄(|v−u|/√(θ/m)) Id
///     + (4π/15) (a³/m_g) [2(∇(αρ)·(v−u)) Id + ∇(αρ)⊗(v−u)]
///     − (8π/15) (a³/m_g) αρ [div u Id + ∇u + (∇u)ᵀ]`.
pub fn viscous_tensor_dbar(
    state: &LocalGasState,
    grads: &GasGradients,
    v: Vec3,
    a: f64,
    m_g: f64,
    quad: &QuadratureSpec,
) -> Result<Mat3, KernelError> {
    state.validate()?;
    grads.validate()?;
    quad.validate()?;
    if !(m_g > 0.0) {
        return Err(KernelError::InvalidInput(format!(
            "m_g = {m_g} must be positive"
        )));
    }
    let c = v - state.u;
    let th = state.thermal_speed();
    let a3 = a * a * a;
    let scalar = PI * a * a * state.alpha_n * th * qbar_table().eval(c.norm() / th);
    let grad_rho = grads.grad_alpha_n * m_g;
    let alpha_rho = state.alpha_n * m_g;
    let first = Mat3::scalar(scalar);
    let second =
        (Mat3::scalar(2.0 * grad_rho.dot(c)) + grad_rho.outer(c)).scale(4.0 * PI / 15.0 * a3 / m_g);
    let strain = Mat3::scalar(grads.div_u) + grads.grad_u + grads.grad_u.transpose();
    let third = strain.scale(8.0 * PI / 15.0 * a3 / m_g * alpha_rho);
    Ok(first + second - third)
}

/// `∫ (v − w)⊗² μ dw = αn (v−u)⊗² + αn (θ/m) Id`.
pub fn moment2_identity(state: &LocalGasState, v: Vec3) -> SymTensor2 {
    let c = v - state.u;
    (SymTensor2::outer_self(c) + SymTensor2::identity().scale(state.theta_over_m))
        .scale(state.alpha_n)
}

/// Tensor Gauss–Hermite quadrature of `∫ g(w) μ[αn,u,θ/m](w) dw`.
pub fn maxwellian_expectation<T, F>(state: &LocalGasState, order: usize, zero: T, g: F) -> T
where
    T: std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T> + Copy,
    F: Fn(Vec3) -> T,
{
    let (x, w) = gauss_hermite_normal(order);
    let th = state.thermal_speed();
    let mut acc = zero;
    for (xa, wa) in x.iter().zip(&w) {
        for (xb, wb) in x.iter().zip(&w) {
            for (xc, wc) in x.iter().zip(&w) {
                let vel = state.u + Vec3::new(*xa, *xb, *xc) * th;
                acc = acc + g(vel) * (wa * wb * wc);
            }
        }
    }
    acc * state.alpha_n
}

impl std::ops::Mul<f64> for SymTensor2 {
    type Output = SymTensor2;
    fn mul(self, s: f64) -> SymTensor2 {
        self.scale(s)
    }
}

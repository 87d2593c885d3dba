//! The friction kernel `q(ξ) = E[(ξ - Y)|ξ - Y|]`, `Y ~ N(0, I₃)`, and its radial profile.
//!
//! `q(ξ) = q̄(|ξ|) ξ`. The profile is computed from a one-dimensional radial integral
//! obtained by integrating out the polar angle in closed form:
//!
//! `q̄(s) = (2π)^{-1/2} ∫₀^∞ r⁵ e^{-(r²+s²)/2} h(rs) dr`, `h(b) = (2b cosh b − 2 sinh b) / b³`.

use super::quadrature::{composite_gauss_legendre, SphereRule};
use super::tensor::Vec3;
use super::{KernelError, QuadratureSpec};
use std::f64::consts::PI;
use std::sync::OnceLock;

/// `q̄(0) = (8/3) √(2/π)`.
pub const QBAR_AT_ZERO: f64 = 2.127_692_162_140_974;

const RADIAL_HALF_WIDTH: f64 = 10.0;
const PANEL_ORDER: usize = 16;

/// `e^{-(r²+s²)/2} h(rs)` without overflow.
fn weighted_h(r: f64, s: f64) -> f64 {
    let b = r * s;
    if b < 1.0 {
        // h(b) = Σ_{k≥1} 4k b^{2k-2} / (2k+1)!
        let b2 = b * b;
        let mut term_pow = 1.0;
        let mut fact = 6.0; // (2k+1)! at k = 1
        let mut sum = 0.0;
        for k in 1..=14 {
            sum += 4.0 * k as f64 * term_pow / fact;
            term_pow *= b2;
            fact *= ((2 * k + 2) * (2 * k + 3)) as f64;
        }
        (-(r * r + s * s) / 2.0).exp() * sum
    } else {
        let em = (-(r - s) * (r - s) / 2.0).exp();
        let ep = (-(r + s) * (r + s) / 2.0).exp();
        ((b - 1.0) * em + (b + 1.0) * ep) / (b * b * b)
    }
}

fn qbar_radial(s: f64, panels_per_unit: usize) -> f64 {
    let lo = (s - RADIAL_HALF_WIDTH).max(0.0);
    let hi = s + RADIAL_HALF_WIDTH;
    let panels = (((hi - lo) * panels_per_unit as f64).ceil() as usize).max(1);
    let (r, w) = composite_gauss_legendre(PANEL_ORDER, panels, lo, hi);
    let sum: f64 = r
        .iter()
        .zip(&w)
        .map(|(ri, wi)| wi * ri.powi(5) * weighted_h(*ri, s))
        .sum();
    sum / (2.0 * PI).sqrt()
}

/// Radial profile `q̄(s)` by adaptive radial quadrature.
pub fn qbar_profile(s: f64, quad: &QuadratureSpec) -> Result<f64, KernelError> {
    if !s.is_finite() || s < 0.0 {
        return Err(KernelError::InvalidInput(format!(
            "qbar_profile needs finite s >= 0, got {s}"
        )));
    }
    let mut ppu = 1;
    let mut prev = qbar_radial(s, ppu);
    let mut diff = f64::INFINITY;
    for _ in 0..6 {
        ppu *= 2;
        let next = qbar_radial(s, ppu);
        diff = (next - prev).abs();
        if diff <= quad.tolerance * next.abs().max(1.0) {
            return Ok(next);
        }
        prev = next;
    }
    Err(KernelError::QuadratureNonConvergence {
        what: "qbar radial integral",
        diff,
        tol: quad.tolerance,
    })
}

/// Three-dimensional quadrature of `q(ξ)` in spherical coordinates around the origin of `z = ξ − y`.
///
/// `q(ξ) = (2π)^{-3/2} ∫₀^∞ r⁴ ∫_{S²} ω e^{-|rω − ξ|²/2} dω dr`; the polar axis of the
/// angular rule is aligned with `ξ`, and the angular and radial resolutions are doubled
/// until two successive results agree to the tolerance.
pub fn q_kernel(xi: Vec3, quad: &QuadratureSpec) -> Result<Vec3, KernelError> {
    if !xi.is_finite() {
        return Err(KernelError::InvalidInput(
            "q_kernel needs a finite argument".into(),
        ));
    }
    let (n_theta0, n_phi) = match quad.sphere_rule {
        SphereRule::ProductGrid { n_theta, n_phi } => (n_theta, n_phi),
        SphereRule::MonteCarlo { .. } => {
            return Err(KernelError::InvalidSpec(
                "q_kernel requires a product-grid sphere rule".into(),
            ))
        }
    };
    let mut n_theta = n_theta0.max(16);
    let mut ppu = 1;
    let mut prev = q_kernel_fixed(xi, n_theta, n_phi, ppu);
    let mut last_diff = f64::INFINITY;
    while n_theta <= 1024 {
        n_theta *= 2;
        ppu *= 2;
        let next = q_kernel_fixed(xi, n_theta, n_phi, ppu);
        last_diff = (next - prev).max_abs();
        if last_diff <= quad.tolerance * next.norm().max(1.0) {
            return Ok(next);
        }
        prev = next;
    }
    Err(KernelError::QuadratureNonConvergence {
        what: "q kernel",
        diff: last_diff,
        tol: quad.tolerance,
    })
}

fn q_kernel_fixed(xi: Vec3, n_theta: usize, n_phi: usize, panels_per_unit: usize) -> Vec3 {
    let s = xi.norm();
    let nodes = SphereRule::ProductGrid { n_theta, n_phi }.nodes(xi);
    let lo = (s - RADIAL_HALF_WIDTH).max(0.0);
    let hi = s + RADIAL_HALF_WIDTH;
    let panels = (((hi - lo) * panels_per_unit as f64).ceil() as usize).max(1);
    let (r, w) = composite_gauss_legendre(PANEL_ORDER, panels, lo, hi);
    let norm = (2.0 * PI).powf(-1.5);
    let mut acc = Vec3::ZERO;
    for (ri, wi) in r.iter().zip(&w) {
        let radial = wi * ri.powi(4) * norm;
        let mut ang = Vec3::ZERO;
        for (om, wo) in &nodes {
            let d = *om * *ri - xi;
            ang += *om * (wo * (-0.5 * d.norm2()).exp());
        }
        acc += ang * radial;
    }
    acc
}

/// Tabulated `q̄` on a log-spaced grid with four-point Lagrange interpolation in `ln s`.
#[derive(Debug, Clone)]
pub struct QbarTable {
    log_s: Vec<f64>,
    values: Vec<f64>,
    s_min: f64,
    s_max: f64,
    q0: f64,
    max_interp_error: f64,
}

impl QbarTable {
    /// Builds the table, doubling the grid until the relative interpolation error at
    /// all cell midpoints is below `target`.
    pub fn build(target: f64) -> Result<Self, KernelError> {
        let quad = QuadratureSpec {
            tolerance: 1e-13,
            ..QuadratureSpec::default()
        };
        let s_min: f64 = 1e-3;
        let s_max: f64 = 1e3;
        let q0 = qbar_profile(0.0, &quad)?;
        let mut n = 128;
        loop {
            let (l0, l1) = (s_min.ln(), s_max.ln());
            let log_s: Vec<f64> = (0..n)
                .map(|k| l0 + (l1 - l0) * k as f64 / (n - 1) as f64)
                .collect();
            let values = log_s
                .iter()
                .map(|l| qbar_profile(l.exp(), &quad))
                .collect::<Result<Vec<_>, _>>()?;
            let mut table = QbarTable {
                log_s,
                values,
                s_min,
                s_max,
                q0,
                max_interp_error: 0.0,
            };
            let mut err: f64 = 0.0;
            for k in 0..n - 1 {
                let s = (0.5 * (table.log_s[k] + table.log_s[k + 1])).exp();
                let exact = qbar_profile(s, &quad)?;
                err = err.max((table.eval(s) - exact).abs() / exact);
            }
            table.max_interp_error = err;
            if err < target {
                return Ok(table);
            }
            if n > 1 << 14 {
                return Err(KernelError::QuadratureNonConvergence {
                    what: "qbar table",
                    diff: err,
                    tol: target,
                });
            }
            n *= 2;
        }
    }

    pub fn max_interp_error(&self) -> f64 {
        self.max_interp_error
    }

    /// `q̄(s)`; below the grid the even expansion `q̄(0) + c s²` is used, above it the
    /// radial quadrature is evaluated directly.
    pub fn eval(&self, s: f64) -> f64 {
        let s = s.abs();
        if s <= self.s_min {
            let r = s / self.s_min;
            return self.q0 + (self.values[0] - self.q0) * r * r;
        }
        if s >= self.s_max {
            return qbar_radial(s, 4);
        }
        let l = s.ln();
        let n = self.log_s.len();
        let h = self.log_s[1] - self.log_s[0];
        let pos = (l - self.log_s[0]) / h;
        let k = (pos.floor() as isize - 1).clamp(0, n as isize - 4) as usize;
        let mut sum = 0.0;
        for i in 0..4 {
            let mut basis = 1.0;
            for j in 0..4 {
                if i != j {
                    basis *= (l - self.log_s[k + j]) / (self.log_s[k + i] - self.log_s[k + j]);
                }
            }
            sum += basis * self.values[k + i];
        }
        sum
    }

    /// `q(ξ) = q̄(|ξ|) ξ`.
    pub fn q(&self, xi: Vec3) -> Vec3 {
        xi * self.eval(xi.norm())
    }
}

static QBAR_TABLE: OnceLock<QbarTable> = OnceLock::new();

/// Process-wide `q̄` table with relative interpolation error below `1e-7`.
pub fn qbar_table() -> &'static QbarTable {
    QBAR_TABLE.get_or_init(|| QbarTable::build(1e-7).expect("qbar table construction"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::quadrature::gauss_hermite_normal;

    #[test]
    fn profile_at_zero_matches_linearization() {
        let q = qbar_profile(0.0, &QuadratureSpec::default()).unwrap();
        assert!((q - QBAR_AT_ZERO).abs() < 1e-12, "{q}");
        assert!((QBAR_AT_ZERO - 8.0 / 3.0 * (2.0 / PI).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn profile_matches_frozen_adaptive_quadrature_values() {
        // Frozen from an independent adaptive (QUADPACK) evaluation of the radial integral.
        let quad = QuadratureSpec::default();
        for (s, expected) in [
            (0.5, 2.180416038724903),
            (1.0, 2.333261882350745),
            (2.0, 2.8791641575809397),
        ] {
            let q = qbar_profile(s, &quad).unwrap();
            assert!((q - expected).abs() < 1e-11, "s={s}: {q}");
        }
    }

    #[test]
    fn profile_follows_large_argument_expansion() {
        // s q̄(s) = E[Z·ê |Z|] with Z ~ N(s ê, I) equals s² + 2 − s⁻² up to exponentially small terms.
        let quad = QuadratureSpec::default();
        for s in [5.0, 10.0, 20.0] {
            let q = qbar_profile(s, &quad).unwrap();
            let asym = s + 2.0 / s - 1.0 / (s * s * s);
            assert!((q - asym).abs() < 1e-9 * s, "s={s}: {q} vs {asym}");
        }
    }

    #[test]
    fn series_and_closed_form_branches_agree_at_switch() {
        let s = 0.5;
        let r = 2.0;
        let below = weighted_h(r - 1e-12, s);
        let above = weighted_h(r + 1e-12, s);
        assert!((below - above).abs() < 1e-10 * above.abs());
    }

    #[test]
    fn profile_matches_brute_force_hermite_cube() {
        // Independent oracle: tensor Gauss–Hermite over y with |ξ − y| evaluated directly.
        // The kink at y = ξ limits accuracy, so the comparison is loose.
        let (x, w) = gauss_hermite_normal(60);
        for s in [0.5, 2.0] {
            let xi = Vec3::new(0.0, 0.0, s);
            let mut acc = 0.0;
            for (a, wa) in x.iter().zip(&w) {
                for (b, wb) in x.iter().zip(&w) {
                    for (c, wc) in x.iter().zip(&w) {
                        let d = xi - Vec3::new(*a, *b, *c);
                        acc += wa * wb * wc * d.z * d.norm();
                    }
                }
            }
            let q = qbar_profile(s, &QuadratureSpec::default()).unwrap() * s;
            assert!((acc - q).abs() < 2e-3 * q.abs(), "s={s}: {acc} vs {q}");
        }
    }

    #[test]
    fn kernel_is_radial_and_consistent_with_profile() {
        let quad = QuadratureSpec::default();
        for (xi, tol) in [
            (Vec3::new(0.3, -0.2, 0.4), 1e-9),
            (Vec3::new(-1.0, 2.0, 0.5), 1e-9),
        ] {
            let q = q_kernel(xi, &quad).unwrap();
            let qbar = qbar_profile(xi.norm(), &quad).unwrap();
            assert!((q - xi * qbar).max_abs() < tol * q.norm().max(1.0));
        }
    }

    #[test]
    fn table_interpolation_error_is_small() {
        let t = qbar_table();
        assert!(t.max_interp_error() < 1e-7);
        let quad = QuadratureSpec::default();
        for s in [0.0, 5e-4, 0.0137, 0.7, 3.3, 42.0, 2e3] {
            let exact = qbar_profile(s, &quad).unwrap();
            assert!((t.eval(s) - exact).abs() < 1e-6 * exact, "s={s}");
        }
    }
}

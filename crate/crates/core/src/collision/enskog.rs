//! Monte Carlo evaluation of the delocalized gas–particle collision integrals.
//!
//! With `c = v − w` and `σ` on the unit sphere, the scaled integrals are
//!
//! `E₁[f,F](x,w) = ∫ a² [f(x,w')F(x+aσ,v') − f(x,w)F(x−aσ,v)] (c·σ)⁺ dσ dv`,
//! `E₂[F,f](x,v) = ∫ a² [f(x−aσ,w')F(x,v') − f(x+aσ,w)F(x,v)] (c·σ)⁺ dσ dw`,
//!
//! where only the first coordinate of `aσ` moves the position on the periodic interval.

use super::density::{gaussian3_pdf, sample_normal3, PhaseDensity};
use super::rng::stream_rng;
use super::{cross_collision_unchecked, CollisionError, VelocityPair};
use crate::kernels::quadrature::{gauss_legendre_on, uniform_on_sphere};
use crate::kernels::Vec3;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

pub const MIN_SAMPLES: usize = 10_000;
const CHUNK: usize = 1 << 14;

/// Smooth test functions `φ(x, ξ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TestFunction {
    One,
    Xi1,
    HalfSquare,
    /// `exp(1 − 1/(1 − |ξ − center|²/r²))` inside the ball, zero outside.
    Bump {
        center: Vec3,
        radius: f64,
    },
    /// `cos(2π x) ξ₁`.
    CosXXi1,
}

impl TestFunction {
    pub fn eval(&self, x: f64, xi: Vec3) -> f64 {
        match *self {
            TestFunction::One => 1.0,
            TestFunction::Xi1 => xi.x,
            TestFunction::HalfSquare => 0.5 * xi.norm2(),
            TestFunction::Bump { center, radius } => {
                let r2 = (xi - center).norm2() / (radius * radius);
                if r2 < 1.0 {
                    (1.0 - 1.0 / (1.0 - r2)).exp()
                } else {
                    0.0
                }
            }
            TestFunction::CosXXi1 => (2.0 * PI * x).cos() * xi.x,
        }
    }

    pub fn grad_xi(&self, x: f64, xi: Vec3) -> Vec3 {
        match *self {
            TestFunction::One => Vec3::ZERO,
            TestFunction::Xi1 => Vec3::E1,
            TestFunction::HalfSquare => xi,
            TestFunction::Bump { center, radius } => {
                let d = xi - center;
                let r2 = d.norm2() / (radius * radius);
                if r2 < 1.0 {
                    let g = 1.0 - r2;
                    d * (-(2.0 / (radius * radius)) / (g * g) * self.eval(x, xi))
                } else {
                    Vec3::ZERO
                }
            }
            TestFunction::CosXXi1 => Vec3::E1 * (2.0 * PI * x).cos(),
        }
    }

    pub fn depends_on_x(&self) -> bool {
        matches!(self, TestFunction::CosXXi1)
    }

    pub fn name(&self) -> &'static str {
        match self {
            TestFunction::One => "one",
            TestFunction::Xi1 => "xi1",
            TestFunction::HalfSquare => "half-square",
            TestFunction::Bump { .. } => "bump",
            TestFunction::CosXXi1 => "cos-x-xi1",
        }
    }
}

/// Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_err: f64,
    pub samples: usize,
}

impl Estimate {
    pub fn scaled(&self, k: f64) -> Estimate {
        Estimate {
            mean: self.mean * k,
            std_err: self.std_err * k.abs(),
            samples: self.samples,
        }
    }

    pub fn within_sigmas(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.std_err
    }
}

/// Sample means and covariance of a vector-valued Monte Carlo integrand.
#[derive(Debug, Clone)]
pub struct McSummary {
    pub mean: Vec<f64>,
    pub cov: Vec<Vec<f64>>,
    pub samples: usize,
}

impl McSummary {
    pub fn estimate(&self, i: usize) -> Estimate {
        Estimate {
            mean: self.mean[i],
            std_err: (self.cov[i][i] / self.samples as f64).sqrt(),
            samples: self.samples,
        }
    }

    /// Estimate of `Σ c_i X_i` with the paired standard error.
    pub fn combination(&self, coeffs: &[(usize, f64)]) -> Estimate {
        let mean = coeffs.iter().map(|(i, c)| c * self.mean[*i]).sum();
        let mut var = 0.0;
        for (i, ci) in coeffs {
            for (j, cj) in coeffs {
                var += ci * cj * self.cov[*i][*j];
            }
        }
        Estimate {
            mean,
            std_err: (var.max(0.0) / self.samples as f64).sqrt(),
            samples: self.samples,
        }
    }

    /// Ratio `X_i / X_j` with a delta-method standard error.
    pub fn ratio(&self, i: usize, j: usize) -> Estimate {
        let r = self.mean[i] / self.mean[j];
        let e = self.combination(&[(i, 1.0), (j, -r)]);
        Estimate {
            mean: r,
            std_err: e.std_err / self.mean[j].abs(),
            samples: self.samples,
        }
    }
}

/// Runs `samples` draws of a `k`-component integrand in fixed-size chunks, each with its own
/// random stream, so the result is independent of the thread count.
pub fn monte_carlo<G>(samples: usize, k: usize, seed: u64, tag: u64, integrand: G) -> McSummary
where
    G: Fn(&mut ChaCha8Rng, &mut [f64]) + Sync,
{
    let chunks = samples.div_ceil(CHUNK);
    let partial: Vec<(Vec<f64>, Vec<f64>)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream_rng(seed, tag, c as u64);
            let n = CHUNK.min(samples - c * CHUNK);
            let mut s = vec![0.0; k];
            let mut s2 = vec![0.0; k * k];
            let mut buf = vec![0.0; k];
            for _ in 0..n {
                buf.iter_mut().for_each(|b| *b = 0.0);
                integrand(&mut rng, &mut buf);
                for i in 0..k {
                    s[i] += buf[i];
                    for j in 0..k {
                        s2[i * k + j] += buf[i] * buf[j];
                    }
                }
            }
            (s, s2)
        })
        .collect();
    let mut s = vec![0.0; k];
    let mut s2 = vec![0.0; k * k];
    for (ps, ps2) in &partial {
        s.iter_mut().zip(ps).for_each(|(a, b)| *a += b);
        s2.iter_mut().zip(ps2).for_each(|(a, b)| *a += b);
    }
    let n = samples as f64;
    let mean: Vec<f64> = s.iter().map(|x| x / n).collect();
    let denom = (n - 1.0).max(1.0);
    let cov = (0..k)
        .map(|i| {
            (0..k)
                .map(|j| (s2[i * k + j] - n * mean[i] * mean[j]) / denom)
                .collect()
        })
        .collect();
    McSummary { mean, cov, samples }
}

fn check_samples(samples: usize) -> Result<(), CollisionError> {
    if samples < MIN_SAMPLES {
        return Err(CollisionError::TooFewSamples {
            got: samples,
            min: MIN_SAMPLES,
        });
    }
    Ok(())
}

fn check_basic(eta: f64, radii: &[f64]) -> Result<(), CollisionError> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(CollisionError::InvalidInput(format!(
            "eta = {eta} must lie in (0, 1]"
        )));
    }
    if radii.is_empty() || radii.iter().any(|a| !(*a > 0.0 && *a < 0.5)) {
        return Err(CollisionError::InvalidInput(
            "radii must lie in (0, 0.5)".into(),
        ));
    }
    Ok(())
}

/// Pieces of `∫ E₂[F,f](x,v) φ(x,v) dv` for one radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct E2Split {
    pub a: f64,
    /// The full integral.
    pub full: Estimate,
    /// The same integral with `f(x+aσ, w)` replaced by `f(x, w)`.
    pub local: Estimate,
    /// `full − local`, the delocalization contribution.
    pub delocal: Estimate,
}

/// `∫ E₂ φ dv` in its weak form `∫ a² (φ(x,v') − φ(x,v)) f(x+aσ,w) F(x,v) (c·σ)⁺`, for several radii
/// with common random numbers.
///
/// `v` is drawn from `F(x,·)`, `w` from `f(x,·)` and `σ` uniformly; `F` may be a cold beam.
#[allow(clippy::too_many_arguments)]
pub fn enskog_e2_split(
    f: &dyn PhaseDensity,
    big_f: &dyn PhaseDensity,
    phi: TestFunction,
    x: f64,
    eta: f64,
    radii: &[f64],
    samples: usize,
    seed: u64,
) -> Result<Vec<E2Split>, CollisionError> {
    check_samples(samples)?;
    check_basic(eta, radii)?;
    if !f.is_evaluable() {
        return Err(CollisionError::NotEvaluable(
            "gas density must be evaluable pointwise".into(),
        ));
    }
    let n_f = f.number(x);
    let n_big = big_f.number(x);
    if !(n_f.is_finite() && n_big.is_finite()) || n_f < 0.0 || n_big < 0.0 {
        return Err(CollisionError::NotEvaluable(format!(
            "number densities at x = {x} are not finite and non-negative"
        )));
    }
    if n_f == 0.0 || n_big == 0.0 {
        let zero = Estimate {
            mean: 0.0,
            std_err: 0.0,
            samples,
        };
        return Ok(radii
            .iter()
            .map(|&a| E2Split {
                a,
                full: zero,
                local: zero,
                delocal: zero,
            })
            .collect());
    }
    let k = 2 * radii.len();
    let summary = monte_carlo(samples, k, seed, 0xE2, |rng, out| {
        let v = big_f.sample_velocity(x, rng);
        let w = f.sample_velocity(x, rng);
        let sigma = uniform_on_sphere(rng);
        let cs = (v - w).dot(sigma);
        if cs <= 0.0 {
            return;
        }
        let post = cross_collision_unchecked(VelocityPair::new(v, w), sigma, eta);
        let dphi = phi.eval(x, post.v) - phi.eval(x, v);
        let f_here = f.eval(x, w);
        for (r, &a) in radii.iter().enumerate() {
            let base = 4.0 * PI * n_f * n_big * a * a * cs * dphi;
            let ratio = f.eval(x + a * sigma.x, w) / f_here;
            out[2 * r] = base * ratio;
            out[2 * r + 1] = base * (ratio - 1.0);
        }
    });
    Ok(radii
        .iter()
        .enumerate()
        .map(|(r, &a)| {
            let full = summary.estimate(2 * r);
            let delocal = summary.estimate(2 * r + 1);
            let local = summary.combination(&[(2 * r, 1.0), (2 * r + 1, -1.0)]);
            E2Split {
                a,
                full,
                local,
                delocal,
            }
        })
        .collect())
}

/// Monte Carlo estimate of `∫ E₂[F,f](x,v) φ(v) dv` with its standard error.
#[allow(clippy::too_many_arguments)]
pub fn enskog_e2_apply(
    f: &dyn PhaseDensity,
    big_f: &dyn PhaseDensity,
    phi: TestFunction,
    x: f64,
    eta: f64,
    a: f64,
    samples: usize,
    seed: u64,
) -> Result<Estimate, CollisionError> {
    Ok(enskog_e2_split(f, big_f, phi, x, eta, &[a], samples, seed)?[0].full)
}

/// Both sides of the combined weak identity for the two collision integrals:
///
/// `η∫E₁φ(x,w)dw + ∫E₂φ(x,v)dv + η ∂ₓI₁`
/// `  = ∫ a² f(x+aσ,w) F(x,v) (c·σ)⁺ [φ(x,v') − φ(x,v) + η(φ(x+aσ,w') − φ(x+aσ,w))]`,
///
/// with the flux
/// `I = ∫∫₀^a a² σ (c·σ)⁺ (φ(x+sσ,w') − φ(x+sσ,w)) f(x+sσ,w) F(x−(a−s)σ,v) ds`.
///
/// `E₁` and `E₂` are integrated in their gain–loss form, so the left side does not use the
/// collision involution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityResidual {
    pub test_function: TestFunction,
    pub e1: Estimate,
    pub e2: Estimate,
    pub div_flux: Estimate,
    pub flux: Estimate,
    pub lhs: Estimate,
    pub rhs: Estimate,
    /// `lhs − rhs` with the paired standard error.
    pub residual: Estimate,
}

impl IdentityResidual {
    pub fn passes(&self, sigmas: f64) -> bool {
        self.residual.within_sigmas(0.0, sigmas)
    }
}

/// Settings of the flux evaluation inside [`weak_identity_residual`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluxQuadrature {
    /// Gauss–Legendre nodes for the `s ∈ [0, a]` integral.
    pub s_nodes: usize,
    /// Central-difference half step for `∂ₓ`.
    pub h: f64,
    /// Variance inflation of the Gaussian proposals.
    pub proposal_inflation: f64,
}

impl Default for FluxQuadrature {
    fn default() -> Self {
        FluxQuadrature {
            s_nodes: 8,
            h: 1e-3,
            proposal_inflation: 2.0,
        }
    }
}

#[allow(clippy::too_many_arguments)]
pub fn weak_identity_residual(
    f: &dyn PhaseDensity,
    big_f: &dyn PhaseDensity,
    phi: TestFunction,
    x: f64,
    eta: f64,
    a: f64,
    samples: usize,
    seed: u64,
    flux_quad: FluxQuadrature,
) -> Result<IdentityResidual, CollisionError> {
    check_samples(samples)?;
    check_basic(eta, &[a])?;
    if !(f.is_evaluable() && big_f.is_evaluable()) {
        return Err(CollisionError::NotEvaluable(
            "both densities must be evaluable pointwise".into(),
        ));
    }
    let (mw, vw) = f.envelope(x);
    let (mv, vv) = big_f.envelope(x);
    let var_w = flux_quad.proposal_inflation * vw;
    let var_v = flux_quad.proposal_inflation * vv;
    if !(var_w > 0.0 && var_v > 0.0) {
        return Err(CollisionError::NotEvaluable(
            "proposal variances must be positive".into(),
        ));
    }
    let (s_nodes, s_weights) = gauss_legendre_on(flux_quad.s_nodes, 0.0, a);
    let h = flux_quad.h;
    let a2 = a * a;

    let flux_at = |y: f64, sx: f64, cs: f64, pair: &VelocityPair, post: &VelocityPair| -> f64 {
        let mut acc = 0.0;
        for (s, ws) in s_nodes.iter().zip(&s_weights) {
            let ys = y + s * sx;
            let dphi = phi.eval(ys, post.w) - phi.eval(ys, pair.w);
            if dphi != 0.0 {
                acc += ws * dphi * f.eval(ys, pair.w) * big_f.eval(y - (a - s) * sx, pair.v);
            }
        }
        a2 * sx * cs * acc
    };

    // Components: E1, E2, div I, RHS, I(x).
    let summary = monte_carlo(samples, 5, seed, 0x13, |rng: &mut ChaCha8Rng, out| {
        let w = mw + sample_normal3(rng) * var_w.sqrt();
        let v = mv + sample_normal3(rng) * var_v.sqrt();
        let sigma = uniform_on_sphere(rng);
        let pair = VelocityPair::new(v, w);
        let cs = (v - w).dot(sigma);
        if cs <= 0.0 {
            return;
        }
        let weight = 4.0 * PI / (gaussian3_pdf(w - mw, var_w) * gaussian3_pdf(v - mv, var_v));
        let post = cross_collision_unchecked(pair, sigma, eta);
        let sx = sigma.x;
        let e1 = a2
            * (f.eval(x, post.w) * big_f.eval(x + a * sx, post.v)
                - f.eval(x, w) * big_f.eval(x - a * sx, v))
            * cs
            * phi.eval(x, w);
        let e2 = a2
            * (f.eval(x - a * sx, post.w) * big_f.eval(x, post.v)
                - f.eval(x + a * sx, w) * big_f.eval(x, v))
            * cs
            * phi.eval(x, v);
        let div = (flux_at(x + h, sx, cs, &pair, &post) - flux_at(x - h, sx, cs, &pair, &post))
            / (2.0 * h);
        let xs = x + a * sx;
        let bracket =
            phi.eval(x, post.v) - phi.eval(x, v) + eta * (phi.eval(xs, post.w) - phi.eval(xs, w));
        let rhs = a2 * f.eval(xs, w) * big_f.eval(x, v) * cs * bracket;
        out[0] = weight * e1;
        out[1] = weight * e2;
        out[2] = weight * div;
        out[3] = weight * rhs;
        out[4] = weight * flux_at(x, sx, cs, &pair, &post);
    });
    let lhs = summary.combination(&[(0, eta), (1, 1.0), (2, eta)]);
    let residual = summary.combination(&[(0, eta), (1, 1.0), (2, eta), (3, -1.0)]);
    Ok(IdentityResidual {
        test_function: phi,
        e1: summary.estimate(0),
        e2: summary.estimate(1),
        div_flux: summary.estimate(2),
        flux: summary.estimate(4),
        lhs,
        rhs: summary.estimate(3),
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collision::density::{KineticDensity, SmoothField};
    use crate::kernels::{qbar_profile, QuadratureSpec};

    #[test]
    fn monte_carlo_is_thread_count_independent() {
        let run = || {
            monte_carlo(50_000, 2, 9, 1, |rng, out| {
                let z = sample_normal3(rng);
                out[0] = z.x;
                out[1] = z.x * z.x;
            })
        };
        let a = run();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let b = pool.install(run);
        assert_eq!(a.mean, b.mean);
        assert!((a.mean[1] - 1.0).abs() < 0.02);
    }

    #[test]
    fn number_conservation_with_cold_comoving_beam() {
        let v0 = Vec3::new(0.4, 0.0, 0.0);
        let f = KineticDensity::uniform(1.0, v0, 1.0);
        let big_f = KineticDensity::uniform(1.0, v0, 0.0);
        let e = enskog_e2_apply(&f, &big_f, TestFunction::One, 0.3, 0.05, 0.05, 20_000, 1).unwrap();
        assert_eq!(e.mean, 0.0);
    }

    #[test]
    fn homogeneous_drag_limit() {
        // (1/η)∫E₂ v₁ = −(1/(1+η)) π a² αn (θ/m) q̄(s) s √(θ/m) for a cold beam in a uniform gas.
        let theta = 1.0;
        let v0 = Vec3::new(1.0, 0.0, 0.0);
        let f = KineticDensity::uniform(2.0, Vec3::ZERO, theta);
        let big_f = KineticDensity::uniform(1.0, v0, 0.0);
        let (eta, a) = (0.05, 0.1);
        let e = enskog_e2_apply(&f, &big_f, TestFunction::Xi1, 0.0, eta, a, 400_000, 2)
            .unwrap()
            .scaled(1.0 / eta);
        let qbar = qbar_profile(1.0, &QuadratureSpec::default()).unwrap();
        let expected = -PI * a * a * 2.0 * theta * qbar / (1.0 + eta);
        assert!(e.within_sigmas(expected, 4.0), "{e:?} vs {expected}");
        assert!(e.std_err < 0.02 * expected.abs());
    }

    #[test]
    fn rejects_small_sample_counts() {
        let f = KineticDensity::uniform(1.0, Vec3::ZERO, 1.0);
        assert!(matches!(
            enskog_e2_apply(&f, &f, TestFunction::One, 0.0, 0.1, 0.1, 100, 0),
            Err(CollisionError::TooFewSamples { .. })
        ));
    }

    #[test]
    fn bump_gradient_matches_finite_difference() {
        let phi = TestFunction::Bump {
            center: Vec3::new(0.2, 0.0, -0.1),
            radius: 1.5,
        };
        let xi = Vec3::new(0.5, 0.3, 0.2);
        let g = phi.grad_xi(0.0, xi);
        let h = 1e-6;
        for (k, e) in [Vec3::E1, Vec3::E2, Vec3::E3].into_iter().enumerate() {
            let fd = (phi.eval(0.0, xi + e * h) - phi.eval(0.0, xi - e * h)) / (2.0 * h);
            assert!((fd - g[k]).abs() < 1e-7);
        }
    }

    #[test]
    fn identity_holds_for_x_dependent_test_function() {
        let f = KineticDensity {
            number: SmoothField::sine(3.0, 0.6, 1),
            velocity: [
                SmoothField::sine(0.2, 0.3, 1),
                SmoothField::constant(0.0),
                SmoothField::constant(0.0),
            ],
            temperature: SmoothField::sine(1.0, 0.2, 1),
        };
        let big_f = KineticDensity {
            number: SmoothField::sine(1.0, 0.4, 1),
            velocity: [
                SmoothField::constant(0.8),
                SmoothField::constant(0.1),
                SmoothField::constant(0.0),
            ],
            temperature: SmoothField::constant(0.3),
        };
        let r = weak_identity_residual(
            &f,
            &big_f,
            TestFunction::CosXXi1,
            0.2,
            0.1,
            0.1,
            200_000,
            4,
            FluxQuadrature::default(),
        )
        .unwrap();
        assert!(r.passes(3.0), "{r:?}");
        assert!(r.rhs.mean.abs() > 5.0 * r.rhs.std_err, "{r:?}");
    }
}

//! Gauss rules on intervals, Gaussian-weighted lines and the unit sphere.

use super::tensor::Vec3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss-Legendre order must be positive");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            let (mut p1, mut p2) = (1.0, 0.0);
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2 * j + 1) as f64 * z * p2 - j as f64 * p3) / (j + 1) as f64;
            }
            pp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let dz = p1 / pp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
        w[n - 1 - i] = w[i];
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// Gauss–Legendre rule mapped to `[lo, hi]`.
pub fn gauss_legendre_on(n: usize, lo: f64, hi: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let half = 0.5 * (hi - lo);
    let mid = 0.5 * (hi + lo);
    (
        x.iter().map(|t| mid + half * t).collect(),
        w.iter().map(|wi| wi * half).collect(),
    )
}

/// Composite Gauss–Legendre on `[lo, hi]` with `panels` equal panels of `order` nodes.
pub fn composite_gauss_legendre(
    order: usize,
    panels: usize,
    lo: f64,
    hi: f64,
) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(order);
    let h = (hi - lo) / panels as f64;
    let mut nodes = Vec::with_capacity(order * panels);
    let mut weights = Vec::with_capacity(order * panels);
    for p in 0..panels {
        let mid = lo + (p as f64 + 0.5) * h;
        for (t, wt) in x.iter().zip(&w) {
            nodes.push(mid + 0.5 * h * t);
            weights.push(0.5 * h * wt);
        }
    }
    (nodes, weights)
}

/// Gauss–Hermite rule for the standard normal: `E[g(Z)] ≈ Σ w_i g(x_i)`, `Z ~ N(0, 1)`.
pub fn gauss_hermite_normal(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss-Hermite order must be positive");
    // Physicists' rule for weight e^{-t^2}, then t = x / sqrt(2).
    let pim4 = PI.powf(-0.25);
    let mut t = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    let nf = n as f64;
    let mut z = 0.0;
    for i in 0..m {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * t[0],
            3 => 1.91 * z - 0.91 * t[1],
            _ => 2.0 * z - t[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..200 {
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let dz = p1 / pp;
            z -= dz;
            if dz.abs() < 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        t[i] = z;
        t[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    if n % 2 == 1 {
        t[n / 2] = 0.0;
    }
    let norm = PI.sqrt();
    let x = t.iter().rev().map(|ti| ti * 2f64.sqrt()).collect();
    let w = w.iter().rev().map(|wi| wi / norm).collect();
    (x, w)
}

/// Heaviside step with the symmetric value 1/2 at the origin.
pub fn heaviside(s: f64) -> f64 {
    if s > 0.0 {
        1.0
    } else if s < 0.0 {
        0.0
    } else {
        0.5
    }
}

/// Angular integration rule on the unit sphere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SphereRule {
    /// Gauss–Legendre in `cos θ` (split at the equator) times a trapezoid rule in `φ`.
    ProductGrid { n_theta: usize, n_phi: usize },
    /// Uniform random directions with equal weights `4π / n_samples`.
    MonteCarlo { n_samples: usize, seed: u64 },
}

impl Default for SphereRule {
    fn default() -> Self {
        SphereRule::ProductGrid {
            n_theta: 32,
            n_phi: 64,
        }
    }
}

impl SphereRule {
    /// Nodes and weights; for the product grid the polar axis is `axis` (any nonzero vector).
    ///
    /// With the polar axis along `ξ`, integrands of the form `p(ω) H(ω·ξ)` with `p`
    /// polynomial of degree below `n_theta` in `ω·ξ` are integrated exactly.
    pub fn nodes(&self, axis: Vec3) -> Vec<(Vec3, f64)> {
        match *self {
            SphereRule::ProductGrid { n_theta, n_phi } => {
                let (e1, e2, n) = if axis.norm() > 0.0 {
                    axis.orthonormal_frame()
                } else {
                    (Vec3::E1, Vec3::E2, Vec3::E3)
                };
                let half = n_theta.div_ceil(2);
                let (lo_t, lo_w) = gauss_legendre_on(half, -1.0, 0.0);
                let (hi_t, hi_w) = gauss_legendre_on(half, 0.0, 1.0);
                let dphi = 2.0 * PI / n_phi as f64;
                let mut out = Vec::with_capacity(2 * half * n_phi);
                for (t, wt) in lo_t
                    .iter()
                    .chain(hi_t.iter())
                    .zip(lo_w.iter().chain(hi_w.iter()))
                {
                    let st = (1.0 - t * t).max(0.0).sqrt();
                    for k in 0..n_phi {
                        let phi = (k as f64 + 0.5) * dphi;
                        let w = e1 * (st * phi.cos()) + e2 * (st * phi.sin()) + n * *t;
                        out.push((w, wt * dphi));
                    }
                }
                out
            }
            SphereRule::MonteCarlo { n_samples, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let w = 4.0 * PI / n_samples as f64;
                (0..n_samples)
                    .map(|_| (uniform_on_sphere(&mut rng), w))
                    .collect()
            }
        }
    }

    pub fn point_count(&self) -> usize {
        match *self {
            SphereRule::ProductGrid { n_theta, n_phi } => 2 * n_theta.div_ceil(2) * n_phi,
            SphereRule::MonteCarlo { n_samples, .. } => n_samples,
        }
    }
}

/// Uniformly distributed unit vector.
pub fn uniform_on_sphere<R: Rng + ?Sized>(rng: &mut R) -> Vec3 {
    let t: f64 = 2.0 * rng.random::<f64>() - 1.0;
    let phi: f64 = 2.0 * PI * rng.random::<f64>();
    let s = (1.0 - t * t).max(0.0).sqrt();
    Vec3::new(s * phi.cos(), s * phi.sin(), t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(8);
        for k in 0..16 {
            let num: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(k)).sum();
            let exact = if k % 2 == 1 {
                0.0
            } else {
                2.0 / (k as f64 + 1.0)
            };
            assert!((num - exact).abs() < 1e-14, "k={k}: {num} vs {exact}");
        }
    }

    #[test]
    fn hermite_reproduces_normal_moments() {
        // E[Z^{2k}] = (2k-1)!!
        let (x, w) = gauss_hermite_normal(24);
        let mut dfact = 1.0;
        for k in 0..12 {
            if k > 0 {
                dfact *= (2 * k - 1) as f64;
            }
            let num: f64 = x
                .iter()
                .zip(&w)
                .map(|(xi, wi)| wi * xi.powi(2 * k))
                .sum();
            assert!(
                (num - dfact).abs() <= 1e-11 * dfact,
                "k={k}: {num} vs {dfact}"
            );
        }
        let odd: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(3)).sum();
        assert!(odd.abs() < 1e-13);
    }

    #[test]
    fn hermite_high_order_is_stable() {
        let (x, w) = gauss_hermite_normal(80);
        let total: f64 = w.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        let cosine: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.cos()).sum();
        assert!((cosine - (-0.5f64).exp()).abs() < 1e-13);
    }

    #[test]
    fn product_grid_area_and_first_moments() {
        let rule = SphereRule::ProductGrid {
            n_theta: 16,
            n_phi: 32,
        };
        let nodes = rule.nodes(Vec3::new(0.3, -0.2, 0.9));
        let area: f64 = nodes.iter().map(|(_, w)| w).sum();
        assert!((area - 4.0 * PI).abs() < 1e-12);
        let mean = nodes.iter().fold(Vec3::ZERO, |acc, (o, w)| acc + *o * *w);
        assert!(mean.max_abs() < 1e-12);
        assert_eq!(nodes.len(), rule.point_count());
    }

    #[test]
    fn heaviside_is_symmetric_at_zero() {
        assert_eq!(heaviside(0.0), 0.5);
        assert_eq!(heaviside(-0.0), 0.5);
        assert_eq!(heaviside(1e-300), 1.0);
        assert_eq!(heaviside(-1e-300), 0.0);
    }
}

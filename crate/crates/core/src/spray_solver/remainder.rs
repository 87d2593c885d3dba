//! Pointwise evaluation of the remainders `P`, `Q`, `R` of the thick-spray closure.
//!
//! The particle density is reconstructed with a periodic Gaussian kernel of width
//! `bandwidth_cells · dx` in `x` (and `velocity_bandwidth` in `v` where a pointwise `F`
//! is needed); gas fields use trigonometric interpolation of the cell values. For a
//! Maxwellian in `w` each `w`-integral reduces to a one-dimensional Gaussian moment
//! along `σ`:
//!
//! * `∫ μ(y,w) ((v−w)·σ)² H dw = αn E[z² H(z)]`,
//! * `∫ μ(y,w) (v−w)·σ H dw = αn E[z H(z)]`,
//! * `∫ μ(y, w + 2((v−w)·σ)σ) (v−w)·σ H dw = αn E[−z H(−z)]`,
//!
//! with `z ~ N((v − u(y))·σ, θ(y)/m_g)`.
//!
//! `R` and `P` use the second-order Taylor defect `F(x−aσ) − F(x) + aσ·∇F`.

use super::{GasField, ParticlePhase, SolverError};
use crate::collision::density::periodic_offset;
use crate::kernels::quadrature::gauss_legendre_on;
use crate::kernels::Vec3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RemainderOptions {
    /// Gauss–Legendre nodes in `σₓ` (split at zero) and trapezoid nodes in azimuth.
    pub n_theta: usize,
    pub n_phi: usize,
    pub bandwidth_cells: f64,
    /// Evaluate at every `probe_stride`-th cell centre.
    pub probe_stride: usize,
    /// Velocity kernel width; `None` uses `max(0.25 s_v, 0.05)` with `s_v` the rms velocity spread.
    pub velocity_bandwidth: Option<f64>,
    /// `Q` is probed on a cubic lattice of `lattice_points³` velocities centred at the mean
    /// particle velocity with spacing `max(s_v, h_v)`.
    pub lattice_points: usize,
    pub fd_step: f64,
}

impl Default for RemainderOptions {
    fn default() -> Self {
        RemainderOptions {
            n_theta: 16,
            n_phi: 32,
            bandwidth_cells: 2.0,
            probe_stride: 1,
            velocity_bandwidth: None,
            lattice_points: 3,
            fd_step: 1e-5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemainderReport {
    pub a: f64,
    pub probes: Vec<f64>,
    pub p: Vec<f64>,
    pub r: Vec<[f64; 3]>,
    /// `sup_v |Q(x, v)|` over the velocity lattice at each probe.
    pub q_sup: Vec<f64>,
    /// Largest collision-integral part of `Q` alone.
    pub q_collision_sup: f64,
    pub p_norm: f64,
    pub q_norm: f64,
    pub r_norm: f64,
}

fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// `E[z² H(z)]` for `z ~ N(m, s²)`.
pub fn half_second_moment(m: f64, s: f64) -> f64 {
    let r = m / s;
    (m * m + s * s) * normal_cdf(r) + m * s * normal_pdf(r)
}

/// `E[z H(z)]` for `z ~ N(m, s²)`.
pub fn half_first_moment(m: f64, s: f64) -> f64 {
    let r = m / s;
    m * normal_cdf(r) + s * normal_pdf(r)
}

/// Trigonometric interpolant of samples at cell centres `(j + 1/2)/N`.
#[derive(Debug, Clone)]
struct Trig {
    re: Vec<f64>,
    im: Vec<f64>,
    n: usize,
}

impl Trig {
    fn new(samples: &[f64]) -> Self {
        let n = samples.len();
        let kmax = n / 2;
        let mut re = vec![0.0; kmax + 1];
        let mut im = vec![0.0; kmax + 1];
        for k in 0..=kmax {
            for (j, f) in samples.iter().enumerate() {
                let ang = -2.0 * PI * k as f64 * (j as f64 + 0.5) / n as f64;
                re[k] += f * ang.cos() / n as f64;
                im[k] += f * ang.sin() / n as f64;
            }
        }
        Trig { re, im, n }
    }

    /// Value and derivative at `x`.
    fn eval(&self, x: f64) -> (f64, f64) {
        let mut v = self.re[0];
        let mut d = 0.0;
        let (s1, c1) = (2.0 * PI * x).sin_cos();
        let (mut c, mut s) = (1.0, 0.0);
        for k in 1..self.re.len() {
            let cn = c * c1 - s * s1;
            s = s * c1 + c * s1;
            c = cn;
            let weight = if 2 * k == self.n { 1.0 } else { 2.0 };
            let kk = 2.0 * PI * k as f64;
            v += weight * (self.re[k] * c - self.im[k] * s);
            d += weight * kk * (-self.re[k] * s - self.im[k] * c);
        }
        (v, d)
    }
}

struct GasRecon {
    alpha_n: Trig,
    u: [Trig; 3],
    t: Trig,
    p: Trig,
}

#[derive(Clone, Copy)]
struct GasAt {
    alpha_n: f64,
    u: Vec3,
    s: f64,
}

impl GasRecon {
    fn new(gas: &GasField) -> Self {
        let col = |f: &dyn Fn(usize) -> f64| Trig::new(&(0..gas.len()).map(f).collect::<Vec<_>>());
        GasRecon {
            alpha_n: col(&|c| gas.cells[c].alpha * gas.cells[c].n),
            u: [
                col(&|c| gas.cells[c].u.x),
                col(&|c| gas.cells[c].u.y),
                col(&|c| gas.cells[c].u.z),
            ],
            t: col(&|c| gas.cells[c].theta / gas.m_g),
            p: col(&|c| gas.cells[c].pressure()),
        }
    }

    fn at(&self, y: f64) -> GasAt {
        GasAt {
            alpha_n: self.alpha_n.eval(y).0,
            u: Vec3::new(
                self.u[0].eval(y).0,
                self.u[1].eval(y).0,
                self.u[2].eval(y).0,
            ),
            s: self.t.eval(y).0.max(1e-300).sqrt(),
        }
    }
}

/// Particles sharing one velocity, with a periodic Gaussian position kernel.
struct Group {
    v: Vec3,
    xs: Vec<f64>,
    ws: Vec<f64>,
}

struct ParticleRecon {
    groups: Vec<Group>,
    h: f64,
}

impl ParticleRecon {
    fn new(phase: &ParticlePhase, h: f64) -> Self {
        let mut index: HashMap<[u64; 3], usize> = HashMap::new();
        let mut groups: Vec<Group> = Vec::new();
        for p in &phase.particles {
            let key = [p.v.x.to_bits(), p.v.y.to_bits(), p.v.z.to_bits()];
            let g = *index.entry(key).or_insert_with(|| {
                groups.push(Group {
                    v: p.v,
                    xs: Vec::new(),
                    ws: Vec::new(),
                });
                groups.len() - 1
            });
            groups[g].xs.push(p.x);
            groups[g].ws.push(p.weight);
        }
        ParticleRecon { groups, h }
    }

    /// Group density and its first derivative at `y`.
    fn rho(&self, g: &Group, y: f64) -> (f64, f64) {
        let norm = 1.0 / ((2.0 * PI).sqrt() * self.h);
        let cut = 9.0 * self.h;
        let mut r = 0.0;
        let mut d = 0.0;
        for (x, w) in g.xs.iter().zip(&g.ws) {
            let e = periodic_offset(y, *x);
            if e.abs() > cut {
                continue;
            }
            let k = w * norm * (-0.5 * (e / self.h).powi(2)).exp();
            r += k;
            d -= k * e / (self.h * self.h);
        }
        (r, d)
    }

    fn near(&self, g: &Group, x: f64, reach: f64) -> bool {
        g.xs.iter().any(|p| periodic_offset(x, *p).abs() <= reach)
    }
}

struct SphereBand {
    t: f64,
    nodes: Vec<(Vec3, f64)>,
}

fn sphere_bands(n_theta: usize, n_phi: usize) -> Vec<SphereBand> {
    let half = n_theta.div_ceil(2);
    let (lo_t, lo_w) = gauss_legendre_on(half, -1.0, 0.0);
    let (hi_t, hi_w) = gauss_legendre_on(half, 0.0, 1.0);
    let dphi = 2.0 * PI / n_phi as f64;
    lo_t.iter()
        .chain(&hi_t)
        .zip(lo_w.iter().chain(&hi_w))
        .map(|(t, wt)| {
            let st = (1.0 - t * t).max(0.0).sqrt();
            let nodes = (0..n_phi)
                .map(|k| {
                    let phi = (k as f64 + 0.5) * dphi;
                    (Vec3::new(*t, st * phi.cos(), st * phi.sin()), wt * dphi)
                })
                .collect();
            SphereBand { t: *t, nodes }
        })
        .collect()
}

struct ProbeValue {
    p: f64,
    r: Vec3,
    q_sup: f64,
    q_coll: f64,
}

/// Evaluates `P`, `Q`, `R` on the current state.
pub fn remainder_diagnostics(
    gas: &GasField,
    phase: &ParticlePhase,
    opts: &RemainderOptions,
) -> Result<RemainderReport, SolverError> {
    gas.validate()?;
    phase.validate()?;
    if opts.n_theta < 2
        || opts.n_phi < 4
        || opts.probe_stride == 0
        || opts.lattice_points == 0
        || !(opts.bandwidth_cells > 0.0)
        || !(opts.fd_step > 0.0)
    {
        return Err(SolverError::InvalidState(format!(
            "invalid remainder options {opts:?}"
        )));
    }
    let a = phase.a;
    let m_g = gas.m_g;
    let vol = 4.0 * PI / 3.0 * a.powi(3);
    let h = opts.bandwidth_cells * gas.dx;
    let gr = GasRecon::new(gas);
    let pr = ParticleRecon::new(phase, h);
    let bands = sphere_bands(opts.n_theta, opts.n_phi);

    let total = phase.total_number();
    let vbar = phase.bulk_velocity();
    let spread = if total > 0.0 {
        (phase
            .particles
            .iter()
            .map(|p| p.weight * (p.v - vbar).norm2())
            .sum::<f64>()
            / (3.0 * total))
            .sqrt()
    } else {
        0.0
    };
    let hv = opts.velocity_bandwidth.unwrap_or((0.25 * spread).max(0.05));
    let spacing = spread.max(hv);
    let lp = opts.lattice_points as isize;
    let mut lattice = Vec::new();
    for i in 0..lp {
        for j in 0..lp {
            for k in 0..lp {
                let off = |q: isize| (q - (lp - 1) / 2) as f64 * spacing;
                lattice.push(vbar + Vec3::new(off(i), off(j), off(k)));
            }
        }
    }

    let probes: Vec<f64> = (0..gas.len())
        .step_by(opts.probe_stride)
        .map(|c| gas.center(c))
        .collect();
    let reach = a + 9.0 * h;
    let eps = opts.fd_step;

    let values: Vec<ProbeValue> = probes
        .par_iter()
        .map(|&x| {
            let g0 = gr.at(x);
            let (nth, dnth) = (gr.p.eval(x).0, gr.p.eval(x).1);
            let mut n_f = 0.0;
            let mut dn_f = 0.0;
            let mut djx = 0.0;
            let mut r_int = Vec3::ZERO;
            let mut p_int = 0.0;
            let mut rho_at_x = Vec::with_capacity(pr.groups.len());
            for g in &pr.groups {
                let (rx, drx) = pr.rho(g, x);
                rho_at_x.push(rx);
                n_f += rx;
                dn_f += drx;
                djx += g.v.x * drx;
                if !pr.near(g, x, reach) {
                    continue;
                }
                for band in &bands {
                    let s = a * band.t;
                    let defect = pr.rho(g, x - s).0 - rx + s * drx;
                    if defect == 0.0 {
                        continue;
                    }
                    for (sig, w) in &band.nodes {
                        let t2 = g0.alpha_n * half_second_moment((g.v - g0.u).dot(*sig), g0.s);
                        let k = w * defect * t2;
                        r_int += *sig * k;
                        p_int += k * g.v.dot(*sig);
                    }
                }
            }
            let one_minus_alpha = vol * n_f;
            let grad_alpha = -vol * dn_f;
            let dt_alpha = vol * djx;
            let r = r_int * (2.0 * a * a * m_g)
                + Vec3::new(one_minus_alpha * nth * grad_alpha, 0.0, 0.0);
            let p = 2.0 * a * a * m_g * p_int - one_minus_alpha * nth * dt_alpha;

            // Collision part of Q: gas states at the shifted and finite-difference points per band.
            let mut q_sup = 0.0f64;
            let mut q_coll = 0.0f64;
            let shifted: Vec<[GasAt; 4]> = bands
                .iter()
                .map(|b| {
                    let s = a * b.t;
                    [gr.at(x - s), gr.at(x + s), gr.at(x - eps), gr.at(x + eps)]
                })
                .collect();
            for v in &lattice {
                let g_plus = |st: &GasAt, sig: Vec3| {
                    st.alpha_n * half_first_moment((*v - st.u).dot(sig), st.s)
                };
                let g_star = |st: &GasAt, sig: Vec3| {
                    st.alpha_n * half_first_moment(-(*v - st.u).dot(sig), st.s)
                };
                let mut bracket = 0.0;
                for (band, sh) in bands.iter().zip(&shifted) {
                    let s = a * band.t;
                    for (sig, w) in &band.nodes {
                        let d_star = (g_star(&sh[3], *sig) - g_star(&sh[2], *sig)) / (2.0 * eps);
                        let d_plus = (g_plus(&sh[3], *sig) - g_plus(&sh[2], *sig)) / (2.0 * eps);
                        let first = g_star(&sh[0], *sig) - g_star(&g0, *sig) + s * d_star;
                        let second = g_plus(&sh[1], *sig) - g_plus(&g0, *sig) - s * d_plus;
                        bracket += w * (first - second);
                    }
                }
                let mut f = 0.0;
                let mut dfx = 0.0;
                let norm = (2.0 * PI * hv * hv).powf(-1.5);
                for (g, rx) in pr.groups.iter().zip(&rho_at_x) {
                    let dv = *v - g.v;
                    let k = rx * norm * (-dv.norm2() / (2.0 * hv * hv)).exp();
                    f += k;
                    dfx -= k * dv.x / (hv * hv);
                }
                let coll = a * a * f * bracket;
                let alg = vol / m_g * (nth * dfx * grad_alpha - one_minus_alpha * dfx * dnth);
                q_coll = q_coll.max(coll.abs());
                q_sup = q_sup.max((coll + alg).abs());
            }
            ProbeValue {
                p,
                r,
                q_sup,
                q_coll,
            }
        })
        .collect();

    let p: Vec<f64> = values.iter().map(|v| v.p).collect();
    let r: Vec<[f64; 3]> = values.iter().map(|v| v.r.to_array()).collect();
    let q_sup: Vec<f64> = values.iter().map(|v| v.q_sup).collect();
    let sup = |xs: &mut dyn Iterator<Item = f64>| xs.fold(0.0f64, |m, x| m.max(x.abs()));
    Ok(RemainderReport {
        a,
        probes,
        p_norm: sup(&mut p.iter().copied()),
        r_norm: sup(&mut r.iter().map(|v| Vec3::from_array(*v).norm())),
        q_norm: sup(&mut q_sup.iter().copied()),
        q_collision_sup: sup(&mut values.iter().map(|v| v.q_coll)),
        p,
        r,
        q_sup,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::quadrature::{composite_gauss_legendre, SphereRule};
    use crate::spray_solver::Particle;

    fn half_moment_quadrature(m: f64, s: f64, power: i32) -> f64 {
        let hi = m.abs() + 14.0 * s;
        let (z, w) = composite_gauss_legendre(20, 40, 0.0, hi);
        z.iter()
            .zip(&w)
            .map(|(z, w)| w * z.powi(power) * normal_pdf((z - m) / s) / s)
            .sum()
    }

    #[test]
    fn half_line_moments_match_quadrature() {
        for &(m, s) in &[(0.0, 1.0), (0.7, 0.3), (-1.2, 0.8), (3.0, 2.0), (-4.0, 1.0)] {
            assert!((half_second_moment(m, s) - half_moment_quadrature(m, s, 2)).abs() < 1e-11);
            assert!((half_first_moment(m, s) - half_moment_quadrature(m, s, 1)).abs() < 1e-11);
        }
    }

    #[test]
    fn trig_interpolant_reproduces_low_modes() {
        let n = 32;
        let f = |x: f64| 1.0 + 0.3 * (2.0 * PI * x).sin() - 0.1 * (6.0 * PI * x + 0.4).cos();
        let df = |x: f64| 0.6 * PI * (2.0 * PI * x).cos() + 0.6 * PI * (6.0 * PI * x + 0.4).sin();
        let t = Trig::new(
            &(0..n)
                .map(|j| f((j as f64 + 0.5) / n as f64))
                .collect::<Vec<_>>(),
        );
        for x in [0.0, 0.123, 0.5, 0.77] {
            let (v, d) = t.eval(x);
            assert!((v - f(x)).abs() < 1e-12 && (d - df(x)).abs() < 1e-10);
        }
    }

    /// Cold beam of density `1 + A sin 2πx` and velocity `v0`, quiet-start positions.
    fn beam(count: usize, amp: f64, v0: Vec3, a: f64) -> ParticlePhase {
        let total = 1.0;
        let mut particles = Vec::with_capacity(count);
        for i in 0..count {
            let target = (i as f64 + 0.5) / count as f64;
            // Invert the cumulative x − A cos(2πx)/(2π) + A/(2π) by Newton.
            let mut x = target;
            for _ in 0..50 {
                let cdf = x + amp * (1.0 - (2.0 * PI * x).cos()) / (2.0 * PI);
                x -= (cdf - target) / (1.0 + amp * (2.0 * PI * x).sin());
            }
            particles.push(Particle {
                x: x.rem_euclid(1.0),
                v: v0,
                weight: total / count as f64,
            });
        }
        ParticlePhase { particles, a }
    }

    /// Direct evaluation of `R` for the smoothed cold beam in a uniform gas, using a different
    /// sphere rule and half-line quadrature instead of the closed-form moments.
    fn r_oracle(
        x: f64,
        amp_smoothed: f64,
        v0: Vec3,
        a: f64,
        gas: (f64, Vec3, f64),
        m_g: f64,
        nth: f64,
    ) -> Vec3 {
        let (an, u, t) = gas;
        let n = |y: f64| 1.0 + amp_smoothed * (2.0 * PI * y).sin();
        let dn = |y: f64| amp_smoothed * 2.0 * PI * (2.0 * PI * y).cos();
        let rule = SphereRule::ProductGrid {
            n_theta: 40,
            n_phi: 80,
        };
        let mut acc = Vec3::ZERO;
        for (sig, w) in rule.nodes(Vec3::E3) {
            let defect = n(x - a * sig.x) - n(x) + a * sig.x * dn(x);
            acc += sig * (w * defect * an * half_moment_quadrature((v0 - u).dot(sig), t.sqrt(), 2));
        }
        let vol = 4.0 * PI / 3.0 * a.powi(3);
        acc * (2.0 * a * a * m_g) + Vec3::new(vol * n(x) * nth * (-vol * dn(x)), 0.0, 0.0)
    }

    #[test]
    fn r_matches_direct_quadrature_oracle() {
        let cells = 100;
        let gas = GasField::uniform(cells, 1.0, 3.0, Vec3::new(0.1, 0.0, 0.0), 1.5);
        let v0 = Vec3::new(0.6, 0.2, 0.0);
        let a = 0.08;
        let amp = 0.4;
        let phase = beam(4000, amp, v0, a);
        let opts = RemainderOptions {
            probe_stride: 10,
            ..Default::default()
        };
        let rep = remainder_diagnostics(&gas, &phase, &opts).unwrap();
        let h = opts.bandwidth_cells * gas.dx;
        let damped = amp * (-0.5 * (2.0 * PI * h).powi(2)).exp();
        let mut worst = 0.0f64;
        for (x, r) in rep.probes.iter().zip(&rep.r) {
            let o = r_oracle(
                *x,
                damped,
                v0,
                a,
                (3.0, Vec3::new(0.1, 0.0, 0.0), 1.5),
                1.0,
                4.5,
            );
            worst = worst.max((Vec3::from_array(*r) - o).norm());
        }
        assert!(
            worst < 1e-4 * rep.r_norm,
            "worst {worst}, norm {}",
            rep.r_norm
        );
    }

    #[test]
    fn q_collision_part_cancels_under_sigma_reversal() {
        let cells = 64;
        let mut gas = GasField::uniform(cells, 1.0, 2.0, Vec3::ZERO, 1.0);
        for c in 0..cells {
            let x = gas.center(c);
            gas.cells[c].n = 2.0 + 0.5 * (2.0 * PI * x).sin();
            gas.cells[c].u = Vec3::new(0.3 * (2.0 * PI * x).cos(), 0.0, 0.0);
        }
        let phase = beam(2000, 0.3, Vec3::new(0.5, 0.0, 0.0), 0.06);
        let rep = remainder_diagnostics(
            &gas,
            &phase,
            &RemainderOptions {
                probe_stride: 8,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(rep.q_collision_sup < 1e-9, "{}", rep.q_collision_sup);
        assert!(rep.q_norm > 0.0);
    }

    #[test]
    fn uniform_state_has_no_remainder() {
        let gas = GasField::uniform(40, 1.0, 2.0, Vec3::ZERO, 1.0);
        let phase = beam(800, 0.0, Vec3::new(0.5, 0.0, 0.0), 0.05);
        let rep = remainder_diagnostics(
            &gas,
            &phase,
            &RemainderOptions {
                probe_stride: 5,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(
            rep.r_norm < 1e-12 && rep.p_norm < 1e-12 && rep.q_norm < 1e-10,
            "{rep:?}"
        );
    }
}

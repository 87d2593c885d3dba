//! Identity suite for the pair of delocalized collision integrals, plus the leading-order
//! form of the flux `I` for small `a` and `η`: the `x`-row of
//! `∫ F(v) [αn Q(v−u) + (4π/3) a³ αn (θ/m) Id] dv`, paired with `e₁` for `φ = ξ₁`
//! and with `v` (inside the integral) for `φ = |ξ|²/2`.

use super::VerifyError;
use crate::collision::density::{KineticDensity, PhaseDensity, SmoothField};
use crate::collision::enskog::{
    weak_identity_residual, Estimate, FluxQuadrature, IdentityResidual, TestFunction,
};
use crate::kernels::{maxwellian_expectation, q_tensor, LocalGasState, Vec3};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Prop3Params {
    pub eta: f64,
    pub a: f64,
    pub x: f64,
    pub samples: usize,
    pub sigmas: f64,
    /// Radius and `η` for the flux check.
    pub flux_a: f64,
    pub flux_eta: f64,
    /// Allowed relative deviation of the flux from its leading-order form, on top of `sigmas` standard errors.
    pub flux_rel_tol: f64,
    pub seed: u64,
}

impl Default for Prop3Params {
    fn default() -> Self {
        Prop3Params {
            eta: 0.05,
            a: 0.1,
            x: 0.3,
            samples: 1_000_000,
            sigmas: 3.0,
            flux_a: 0.02,
            flux_eta: 0.01,
            flux_rel_tol: 0.1,
            seed: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityRow {
    pub family: String,
    pub residual: IdentityResidual,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluxCheck {
    pub test_function: TestFunction,
    pub flux: Estimate,
    pub leading_order: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prop3Report {
    pub params: Prop3Params,
    pub rows: Vec<IdentityRow>,
    pub flux_checks: Vec<FluxCheck>,
    pub pass: bool,
}

/// Two smooth gas/particle density pairs.
pub fn density_families() -> Vec<(&'static str, KineticDensity, KineticDensity)> {
    let gas_a = KineticDensity {
        number: SmoothField::sine(2.0, 0.5, 1),
        velocity: [SmoothField::constant(0.0); 3],
        temperature: SmoothField::constant(1.0),
    };
    let part_a = KineticDensity {
        number: SmoothField {
            mean: 1.0,
            amp: 0.3,
            mode: 1,
            phase: 0.7,
        },
        velocity: [
            SmoothField::constant(0.5),
            SmoothField::constant(0.0),
            SmoothField::constant(0.0),
        ],
        temperature: SmoothField::constant(0.5),
    };
    let gas_b = KineticDensity {
        number: SmoothField::constant(1.5),
        velocity: [
            SmoothField::sine(0.2, 0.3, 1),
            SmoothField::constant(0.0),
            SmoothField::constant(0.1),
        ],
        temperature: SmoothField::sine(1.0, 0.2, 1),
    };
    let part_b = KineticDensity {
        number: SmoothField::sine(0.8, 0.2, 2),
        velocity: [
            SmoothField::constant(-0.3),
            SmoothField::constant(0.2),
            SmoothField::constant(0.0),
        ],
        temperature: SmoothField::constant(0.8),
    };
    vec![
        ("density-wave", gas_a, part_a),
        ("velocity-wave", gas_b, part_b),
    ]
}

/// Leading-order flux for a Maxwellian gas and a Maxwellian particle density at `x`.
pub fn leading_order_flux(
    gas: &KineticDensity,
    particles: &KineticDensity,
    x: f64,
    a: f64,
    phi: TestFunction,
) -> f64 {
    let (u, t) = gas.envelope(x);
    let alpha_n = gas.number(x);
    let (vf, tf) = particles.envelope(x);
    let state = LocalGasState {
        alpha_n: particles.number(x),
        u: vf,
        theta_over_m: tf,
    };
    let iso = 4.0 * PI / 3.0 * a.powi(3) * t;
    maxwellian_expectation(&state, 24, 0.0, |v| {
        let q = q_tensor(v - u, a);
        let row = Vec3::new(q.get(0, 0) + iso, q.get(0, 1), q.get(0, 2)) * alpha_n;
        match phi {
            TestFunction::Xi1 => row.x,
            TestFunction::HalfSquare => row.dot(v),
            _ => 0.0,
        }
    })
}

pub fn prop3_identity_suite(p: &Prop3Params) -> Result<Prop3Report, VerifyError> {
    let phis = [
        TestFunction::One,
        TestFunction::Xi1,
        TestFunction::HalfSquare,
        TestFunction::CosXXi1,
    ];
    let fq = FluxQuadrature::default();
    let mut rows = Vec::new();
    for (fi, (name, gas, part)) in density_families().into_iter().enumerate() {
        for (pi, phi) in phis.iter().enumerate() {
            let seed = p.seed + 100 * fi as u64 + pi as u64;
            let residual =
                weak_identity_residual(&gas, &part, *phi, p.x, p.eta, p.a, p.samples, seed, fq)?;
            let pass = residual.passes(p.sigmas);
            rows.push(IdentityRow {
                family: name.to_string(),
                residual,
                pass,
            });
        }
    }
    let (_, gas, part) = density_families().remove(0);
    let mut flux_checks = Vec::new();
    for (i, phi) in [TestFunction::Xi1, TestFunction::HalfSquare]
        .into_iter()
        .enumerate()
    {
        let r = weak_identity_residual(
            &gas,
            &part,
            phi,
            p.x,
            p.flux_eta,
            p.flux_a,
            p.samples,
            p.seed + 1000 + i as u64,
            fq,
        )?;
        let leading_order = leading_order_flux(&gas, &part, p.x, p.flux_a, phi);
        let dev = (r.flux.mean - leading_order).abs();
        let pass = dev <= p.sigmas * r.flux.std_err + p.flux_rel_tol * leading_order.abs();
        flux_checks.push(FluxCheck {
            test_function: phi,
            flux: r.flux,
            leading_order,
            pass,
        });
    }
    let pass = rows.iter().all(|r| r.pass) && flux_checks.iter().all(|c| c.pass);
    Ok(Prop3Report {
        params: p.clone(),
        rows,
        flux_checks,
        pass,
    })
}

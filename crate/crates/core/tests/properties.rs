use proptest::prelude::*;
use spray_core::cli_io::output::format_number;
use spray_core::cli_io::{parse_config, print_config, ScenarioConfig};
use spray_core::collision::{cross_collision, same_species_collision, ScalingParams, VelocityPair};
use spray_core::kernels::{
    friction_force, k4_closed_form, k_closed_form, k_integral, q_kernel, q_tensor, qbar_table,
    LocalGasState, QuadratureSpec, Vec3,
};
use spray_core::spray_solver::gas::{gas_step, GasStepOptions};
use spray_core::spray_solver::{
    cic, volume_fraction, GasField, Particle, ParticlePhase, Preset, SprayMode,
};
use spray_core::verify::{ConvergenceStudy, Parameter, StudyStatus};
use std::f64::consts::PI;

fn vec3(r: f64) -> impl Strategy<Value = Vec3> {
    (-r..r, -r..r, -r..r).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

fn unit() -> impl Strategy<Value = Vec3> {
    (-1.0f64..1.0, 0.0..2.0 * PI).prop_map(|(c, phi)| {
        let s = (1.0 - c * c).sqrt();
        Vec3::new(s * phi.cos(), s * phi.sin(), c)
    })
}

/// `|ξ|` in `[0.1, 10]` with a uniform direction.
fn shell() -> impl Strategy<Value = Vec3> {
    (unit(), 0.1f64..10.0).prop_map(|(u, r)| u * r)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn k_quadrature_matches_closed_form(xi in shell()) {
        let q = k_integral(xi, &QuadratureSpec::default()).unwrap();
        prop_assert!((q - k_closed_form(xi)).max_abs() <= 1e-6);
    }

    #[test]
    fn q_tensor_is_twice_a_cubed_k4(xi in vec3(10.0), a in 0.001f64..0.49) {
        let q = q_tensor(xi, a);
        let k = k4_closed_form(xi).scale(2.0 * a.powi(3));
        prop_assert!(q.max_abs_diff(&k) <= 1e-12 * (1.0 + xi.norm2()));
        // Eigenvalues (4π/15)a³|ξ|² (twice) and (4π/5)a³|ξ|²: trace (4π/3)a³|ξ|².
        let tr = 4.0 * PI / 3.0 * a.powi(3) * xi.norm2();
        prop_assert!((q.trace() - tr).abs() <= 1e-12 * (1.0 + tr));
    }

    #[test]
    fn friction_is_odd_in_the_slip(u in vec3(2.0), c in vec3(5.0), n in 0.1f64..5.0, t in 0.1f64..5.0, a in 0.01f64..0.4) {
        let s = LocalGasState { alpha_n: n, u, theta_over_m: t };
        let plus = friction_force(&s, u + c, a);
        let minus = friction_force(&s, u - c, a);
        prop_assert!((plus + minus).max_abs() <= 1e-12 * (1.0 + plus.max_abs()));
        // D points along the slip; the particle feels -D.
        prop_assert!(plus.dot(c) >= 0.0);
    }

    #[test]
    fn cross_collision_is_an_involution_conserving_momentum_and_energy(v in vec3(5.0), w in vec3(5.0), sigma in unit(), eta in 0.01f64..=1.0) {
        let pair = VelocityPair::new(v, w);
        let post = cross_collision(pair, sigma, eta).unwrap();
        let back = cross_collision(post, sigma, eta).unwrap();
        prop_assert!((back.v - v).max_abs() <= 1e-12 && (back.w - w).max_abs() <= 1e-12);
        let m_p = 1.0 / eta;
        prop_assert!(((post.v * m_p + post.w) - (v * m_p + w)).max_abs() <= 1e-12 * m_p * 5.0);
        let e0 = m_p * v.norm2() + w.norm2();
        let e1 = m_p * post.v.norm2() + post.w.norm2();
        prop_assert!((e1 - e0).abs() <= 1e-12 * e0.max(1.0));
        let flip = cross_collision(pair, sigma * -1.0, eta).unwrap();
        prop_assert!((flip.v - post.v).max_abs() <= 1e-12 && (flip.w - post.w).max_abs() <= 1e-12);
    }

    #[test]
    fn same_species_collision_conserves(v in vec3(5.0), w in vec3(5.0), sigma in unit()) {
        let post = same_species_collision(VelocityPair::new(v, w), sigma).unwrap();
        prop_assert!(((post.v + post.w) - (v + w)).max_abs() <= 1e-12);
        prop_assert!((post.v.norm2() + post.w.norm2() - v.norm2() - w.norm2()).abs() <= 1e-12 * (1.0 + v.norm2() + w.norm2()));
    }

    #[test]
    fn non_unit_directions_are_rejected(v in vec3(5.0), w in vec3(5.0), sigma in unit(), s in 1.01f64..3.0) {
        prop_assert!(cross_collision(VelocityPair::new(v, w), sigma * s, 0.5).is_err());
    }

    #[test]
    fn scaling_params_require_the_mass_ratio(eta in 0.01f64..=1.0, m_g in 0.1f64..10.0, delta in 0.01f64..1.0, a in 0.001f64..0.49) {
        prop_assert!(ScalingParams::new(eta, delta, a, m_g, m_g / eta).is_ok());
        prop_assert!(ScalingParams::new(eta, delta, a, m_g, 1.1 * m_g / eta).is_err());
    }

    #[test]
    fn cic_weights_are_a_partition_of_unity(x in 0.0f64..1.0, cells in 4usize..200) {
        let w = cic(x, cells);
        prop_assert!(w.iter().all(|(c, f)| *c < cells && *f >= 0.0 && *f <= 1.0));
        prop_assert!((w[0].1 + w[1].1 - 1.0).abs() <= 1e-15);
    }

    #[test]
    fn volume_fraction_stays_in_unit_interval(xs in prop::collection::vec(0.0f64..1.0, 1..200), a in 0.001f64..0.1) {
        let gas = GasField::uniform(16, 1.0, 1.0, Vec3::ZERO, 1.0);
        let n = xs.len() as f64;
        let phase = ParticlePhase { particles: xs.iter().map(|&x| Particle { x, v: Vec3::ZERO, weight: 1.0 / n }).collect(), a };
        let alpha = volume_fraction(&phase, &gas).unwrap();
        prop_assert!(alpha.iter().all(|x| *x > 0.0 && *x <= 1.0));
        // The excluded volume integrates to (4π/3)a³ times the particle number.
        let excluded: f64 = alpha.iter().map(|x| (1.0 - x) * gas.dx).sum();
        prop_assert!((excluded - 4.0 * PI / 3.0 * a.powi(3)).abs() <= 1e-12);
    }

    #[test]
    fn gas_step_conserves_totals(amp in prop::collection::vec(-0.4f64..0.4, 3), drift in vec3(0.5)) {
        let cells = 32;
        let mut gas = GasField::uniform(cells, 1.0, 1.0, drift, 1.0);
        for c in 0..cells {
            let s = (2.0 * PI * gas.center(c)).sin();
            gas.cells[c].n *= 1.0 + amp[0] * s;
            gas.cells[c].u.x += amp[1] * s;
            gas.cells[c].theta *= 1.0 + amp[2] * s;
        }
        let phase = ParticlePhase::empty(0.0);
        let (m0, p0, e0) = gas.totals();
        let opts = GasStepOptions { mode: SprayMode::Thick, drag_sources: false };
        for _ in 0..20 {
            let dt = spray_core::spray_solver::gas::cfl_limit(&gas) * 0.9;
            gas_step(&mut gas, &phase, dt, &opts).unwrap();
        }
        let (m1, p1, e1) = gas.totals();
        prop_assert!((m1 - m0).abs() <= 1e-13 * m0);
        prop_assert!((p1 - p0).max_abs() <= 1e-13 * m0);
        prop_assert!((e1 - e0).abs() <= 1e-13 * e0);
    }

    #[test]
    fn csv_numbers_roundtrip_bit_exact(bits in any::<u64>()) {
        let x = f64::from_bits(bits);
        prop_assume!(x.is_finite());
        prop_assert_eq!(format_number(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
    }

    #[test]
    fn config_print_parse_roundtrip(
        cells in 4usize..500,
        t_final in 1e-3f64..10.0,
        cfl in 0.01f64..=1.0,
        slip in -3.0f64..3.0,
        amp in -0.9f64..0.9,
        seed in 0..=i64::MAX as u64,
        preset in prop::sample::select(vec![Preset::Uniform, Preset::Sod, Preset::CoMoving, Preset::DragRelaxation, Preset::SinusoidalF]),
    ) {
        let mut cfg = ScenarioConfig::default().with_seed(seed);
        cfg.grid.cells = cells;
        cfg.grid.t_final = t_final;
        cfg.grid.cfl = cfl;
        cfg.initial.slip = slip;
        cfg.initial.amplitude = amp;
        cfg.initial.preset = preset;
        let back = parse_config(&print_config(&cfg)).unwrap();
        prop_assert_eq!(back, cfg);
    }

    #[test]
    fn seeds_beyond_toml_range_are_violations(seed in (i64::MAX as u64 + 1)..=u64::MAX) {
        let cfg = ScenarioConfig::default().with_seed(seed);
        prop_assert!(cfg.violations().iter().any(|v| v.starts_with("seed:")));
    }

    #[test]
    fn power_laws_are_recovered(order in 0.5f64..6.0, c in 1e-3f64..1e3) {
        let values = vec![0.08, 0.04, 0.02];
        let metrics = values.iter().map(|a: &f64| c * a.powf(order)).collect();
        let s = ConvergenceStudy::fit(Parameter::A, values, metrics).unwrap();
        prop_assert_eq!(s.status, StudyStatus::Conclusive);
        prop_assert!((s.fitted_order - order).abs() <= 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn tabulated_q_matches_three_dimensional_quadrature(xi in shell()) {
        let direct = q_kernel(xi, &QuadratureSpec::default()).unwrap();
        let table = qbar_table().q(xi);
        prop_assert!((direct - table).max_abs() <= 1e-6 * (1.0 + direct.max_abs()));
    }
}

#[test]
fn thick_presets_satisfy_their_own_invariants() {
    let p = spray_core::spray_solver::PresetParams {
        cells: 32,
        particles: 256,
        ..Default::default()
    };
    for preset in [
        Preset::Uniform,
        Preset::Sod,
        Preset::CoMoving,
        Preset::DragRelaxation,
        Preset::SinusoidalF,
    ] {
        let (gas, phase) = preset.build(&p, SprayMode::Thick).unwrap();
        gas.validate().unwrap();
        phase.validate().unwrap();
    }
}

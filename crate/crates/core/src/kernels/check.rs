//! Closed form against quadrature for every kernel, as a pass/fail table.

use super::quadrature::uniform_on_sphere;
use super::{
    k4_closed_form, k4_integral, k_closed_form, k_integral, q_kernel, q_tensor, qbar_profile,
    KernelError, QuadratureSpec, Vec3, QBAR_AT_ZERO,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRow {
    pub name: String,
    pub max_abs_error: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl CheckRow {
    fn new(name: &str, max_abs_error: f64, tolerance: f64) -> Self {
        CheckRow {
            name: name.to_string(),
            max_abs_error,
            tolerance,
            pass: max_abs_error <= tolerance,
        }
    }
}

/// `count` arguments with uniform direction and `|ξ|` uniform in `[0.1, 10]`.
pub fn random_arguments(count: usize, seed: u64) -> Vec<Vec3> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let r = rng.random_range(0.1..=10.0);
            uniform_on_sphere(&mut rng) * r
        })
        .collect()
}

/// Runs every comparison on `count` random arguments.
pub fn kernel_checks(
    quad: &QuadratureSpec,
    count: usize,
    seed: u64,
) -> Result<Vec<CheckRow>, KernelError> {
    quad.validate()?;
    let quad = *quad;
    let xis = random_arguments(count, seed);
    let a = 0.05;
    let mut k_err: f64 = 0.0;
    let mut k4_err: f64 = 0.0;
    let mut q_closed: f64 = 0.0;
    let mut q_quad: f64 = 0.0;
    for &xi in &xis {
        k_err = k_err.max((k_integral(xi, &quad)? - k_closed_form(xi)).max_abs());
        let k4q = k4_integral(xi, &quad)?;
        k4_err = k4_err.max(k4q.max_abs_diff(&k4_closed_form(xi)));
        let q = q_tensor(xi, a);
        let two_a3 = 2.0 * a * a * a;
        q_closed = q_closed.max(k4_closed_form(xi).scale(two_a3).max_abs_diff(&q));
        q_quad = q_quad.max(k4q.scale(two_a3).max_abs_diff(&q));
    }

    let mut parallel: f64 = 0.0;
    for &xi in xis.iter().take(10) {
        let q = q_kernel(xi, &quad)?;
        let e = xi * (1.0 / xi.norm());
        parallel = parallel.max((q - e * q.dot(e)).max_abs());
    }
    let q_zero = q_kernel(Vec3::ZERO, &quad)?.max_abs();
    let q_small = qbar_profile(1e-6, &quad)?;
    let q_ten = qbar_profile(10.0, &quad)? / 10.0;
    let ten_dev = if (1.0..=1.03).contains(&q_ten) {
        0.0
    } else {
        (q_ten - 1.0).abs().min((q_ten - 1.03).abs())
    };

    Ok(vec![
        CheckRow::new("K closed form", k_err, 1e-6),
        CheckRow::new("K4 closed form", k4_err, 1e-6),
        CheckRow::new("2a^3 K4 = Q closed form", q_closed, 1e-10),
        CheckRow::new("2a^3 K4 = Q quadrature", q_quad, 1e-6),
        CheckRow::new("q(0) = 0", q_zero, 1e-12),
        CheckRow::new("q radial parallelism", parallel, quad.tolerance.max(1e-9)),
        CheckRow::new(
            "qbar(0+) = (8/3) sqrt(2/pi)",
            (q_small - QBAR_AT_ZERO).abs(),
            1e-3,
        ),
        CheckRow::new("qbar(10)/10 in [1, 1.03]", ten_dev, 0.0),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_table_passes() {
        let rows = kernel_checks(&QuadratureSpec::default(), 10, 3).unwrap();
        assert_eq!(rows.len(), 8);
        for r in &rows {
            assert!(r.pass, "{r:?}");
        }
    }

    #[test]
    fn arguments_lie_in_the_shell() {
        for xi in random_arguments(200, 1) {
            assert!((0.1..=10.0 + 1e-12).contains(&xi.norm()));
        }
    }
}

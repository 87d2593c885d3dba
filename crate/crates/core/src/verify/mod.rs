//! Consistency harness: drag-limit and identity checks, remainder and thin-limit order
//! fits, and the stochastic-vs-continuum moment comparison.
//!
//! Every routine takes its inputs by reference and returns a serializable report.

pub mod compare;
pub mod prop1;
pub mod prop3;
pub mod scaling;

pub use compare::{dsmc_vs_solver_moments, CompareParams, CompareReport, CompareRun};
pub use prop1::{prop1_consistency, Prop1Params, Prop1Report};
pub use prop3::{prop3_identity_suite, IdentityRow, Prop3Params, Prop3Report};
pub use scaling::{
    remainder_order_fit, thin_limit_study, RemainderStudy, ThinLimitParams, ThinLimitStudy,
};

use crate::collision::CollisionError;
use crate::kernels::KernelError;
use crate::spray_solver::SolverError;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),
    #[error("invalid study: {0}")]
    InvalidStudy(String),
    #[error(transparent)]
    Collision(#[from] CollisionError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parameter {
    Eta,
    Delta,
    A,
    Dx,
    Dt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StudyStatus {
    Conclusive,
    /// The log-log fit residual reached 20% of the metric range.
    Inconclusive,
    /// Every metric sits at the numerical floor.
    Degenerate,
}

/// Least-squares fit of `log metric` against `log value`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceStudy {
    pub parameter_name: Parameter,
    pub values: Vec<f64>,
    pub metrics: Vec<f64>,
    pub fitted_order: f64,
    /// Largest absolute residual of the fit in natural-log units.
    pub fit_residual: f64,
    pub status: StudyStatus,
}

/// Metrics at or below this are treated as exact zeros.
pub const METRIC_FLOOR: f64 = 1e-12;

impl ConvergenceStudy {
    pub fn fit(
        parameter_name: Parameter,
        values: Vec<f64>,
        metrics: Vec<f64>,
    ) -> Result<Self, VerifyError> {
        if values.len() < 2 || values.len() != metrics.len() {
            return Err(VerifyError::InvalidStudy(format!(
                "need at least two (value, metric) pairs, got {} and {}",
                values.len(),
                metrics.len()
            )));
        }
        if values.iter().any(|v| !(*v > 0.0 && v.is_finite()))
            || values.windows(2).any(|w| w[1] >= w[0])
        {
            return Err(VerifyError::InvalidStudy(format!(
                "values must be positive and strictly descending: {values:?}"
            )));
        }
        if metrics.iter().any(|m| !m.is_finite() || *m < 0.0) {
            return Err(VerifyError::InvalidStudy(format!(
                "metrics must be finite and non-negative: {metrics:?}"
            )));
        }
        if metrics.iter().all(|m| *m <= METRIC_FLOOR) {
            return Ok(ConvergenceStudy {
                parameter_name,
                values,
                metrics,
                fitted_order: f64::NAN,
                fit_residual: 0.0,
                status: StudyStatus::Degenerate,
            });
        }
        if metrics.iter().any(|m| *m <= 0.0) {
            return Ok(ConvergenceStudy {
                parameter_name,
                values,
                metrics,
                fitted_order: f64::NAN,
                fit_residual: f64::INFINITY,
                status: StudyStatus::Inconclusive,
            });
        }
        let xs: Vec<f64> = values.iter().map(|v| v.ln()).collect();
        let ys: Vec<f64> = metrics.iter().map(|m| m.ln()).collect();
        let n = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        let slope = sxy / sxx;
        let fit_residual = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| (y - (my + slope * (x - mx))).abs())
            .fold(0.0, f64::max);
        let range = ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - ys.iter().cloned().fold(f64::INFINITY, f64::min);
        let status = if range > 0.0 && fit_residual < 0.2 * range {
            StudyStatus::Conclusive
        } else {
            StudyStatus::Inconclusive
        };
        Ok(ConvergenceStudy {
            parameter_name,
            values,
            metrics,
            fitted_order: slope,
            fit_residual,
            status,
        })
    }

    pub fn order_at_least(&self, lo: f64) -> bool {
        self.status == StudyStatus::Conclusive && self.fitted_order >= lo
    }

    pub fn order_within(&self, lo: f64, hi: f64) -> bool {
        self.status == StudyStatus::Conclusive && self.fitted_order >= lo && self.fitted_order <= hi
    }

    /// Metrics strictly decrease along the (descending) values.
    pub fn is_monotone(&self) -> bool {
        self.metrics.windows(2).all(|w| w[1] < w[0])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law_is_recovered() {
        let values = vec![0.08, 0.04, 0.02];
        let metrics: Vec<f64> = values.iter().map(|a: &f64| 3.0 * a.powf(4.2)).collect();
        let s = ConvergenceStudy::fit(Parameter::A, values, metrics).unwrap();
        assert!((s.fitted_order - 4.2).abs() < 1e-12);
        assert_eq!(s.status, StudyStatus::Conclusive);
        assert!(s.order_at_least(3.5) && s.is_monotone());
    }

    #[test]
    fn scattered_data_is_inconclusive() {
        let s = ConvergenceStudy::fit(Parameter::Eta, vec![0.1, 0.05, 0.025], vec![1.0, 0.2, 1.0])
            .unwrap();
        assert_eq!(s.status, StudyStatus::Inconclusive);
        assert!(!s.order_at_least(0.0));
    }

    #[test]
    fn zero_metrics_are_degenerate() {
        let s = ConvergenceStudy::fit(Parameter::A, vec![0.2, 0.1], vec![0.0, 1e-14]).unwrap();
        assert_eq!(s.status, StudyStatus::Degenerate);
    }

    #[test]
    fn values_must_descend() {
        assert!(ConvergenceStudy::fit(Parameter::A, vec![0.1, 0.2], vec![1.0, 2.0]).is_err());
        assert!(ConvergenceStudy::fit(Parameter::A, vec![0.2, 0.1], vec![1.0, f64::NAN]).is_err());
    }
}

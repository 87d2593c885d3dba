//! Order studies in the particle radius `a`.

use super::{ConvergenceStudy, Parameter, StudyStatus, VerifyError};
use crate::spray_solver::{
    remainder_diagnostics, run::strang_step, Preset, PresetParams, RemainderOptions,
    RemainderReport, SprayMode,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemainderStudy {
    pub preset: Preset,
    pub base: PresetParams,
    pub reports: Vec<RemainderReport>,
    pub p: ConvergenceStudy,
    pub q: ConvergenceStudy,
    pub r: ConvergenceStudy,
    pub pass: bool,
}

fn passes(s: &ConvergenceStudy, min_order: f64) -> bool {
    match s.status {
        StudyStatus::Conclusive => s.is_monotone() && s.fitted_order >= min_order,
        StudyStatus::Degenerate => true,
        StudyStatus::Inconclusive => false,
    }
}

/// Remainder sup-norms of the initial state of `preset` for each radius in `a_list`.
///
/// Passes when every norm decreases monotonically with fitted order at least `min_order`;
/// a norm that is identically at the floor counts as degenerate.
pub fn remainder_order_fit(
    preset: Preset,
    base: &PresetParams,
    a_list: &[f64],
    opts: &RemainderOptions,
    min_order: f64,
) -> Result<RemainderStudy, VerifyError> {
    let reports: Vec<RemainderReport> = a_list
        .par_iter()
        .map(|&a| {
            let params = PresetParams { a, ..*base };
            let (gas, phase) = preset.build(&params, SprayMode::Thick)?;
            remainder_diagnostics(&gas, &phase, opts)
        })
        .collect::<Result<_, _>>()?;
    let col = |f: fn(&RemainderReport) -> f64| reports.iter().map(f).collect::<Vec<_>>();
    let p = ConvergenceStudy::fit(Parameter::A, a_list.to_vec(), col(|r| r.p_norm))?;
    let q = ConvergenceStudy::fit(Parameter::A, a_list.to_vec(), col(|r| r.q_norm))?;
    let r = ConvergenceStudy::fit(Parameter::A, a_list.to_vec(), col(|r| r.r_norm))?;
    let all_degenerate = [&p, &q, &r]
        .iter()
        .all(|s| s.status == StudyStatus::Degenerate);
    let pass =
        !all_degenerate && passes(&p, min_order) && passes(&q, min_order) && passes(&r, min_order);
    Ok(RemainderStudy {
        preset,
        base: *base,
        reports,
        p,
        q,
        r,
        pass,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThinLimitParams {
    pub base: PresetParams,
    pub a_list: Vec<f64>,
    pub t_final: f64,
    pub dt: f64,
}

impl Default for ThinLimitParams {
    fn default() -> Self {
        ThinLimitParams {
            base: PresetParams {
                cells: 8,
                particles: 64,
                slip: 1.0,
                particle_density: 2.0,
                ..Default::default()
            },
            a_list: vec![0.08, 0.04, 0.02],
            t_final: 2.0,
            dt: 1e-2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThinLimitStudy {
    pub params: ThinLimitParams,
    /// `max_t |v̄_thick − v̄_thin| + max_t |ū_thick − ū_thin|` per radius.
    pub discrepancy: ConvergenceStudy,
    pub pass: bool,
}

/// Paired thick/thin runs of the drag-relaxation preset from the same gas number density.
pub fn thin_limit_study(p: &ThinLimitParams) -> Result<ThinLimitStudy, VerifyError> {
    if !(p.t_final > 0.0 && p.dt > 0.0) {
        return Err(VerifyError::InvalidStudy(
            "t_final and dt must be positive".into(),
        ));
    }
    let metrics: Vec<f64> = p
        .a_list
        .par_iter()
        .map(|&a| -> Result<f64, VerifyError> {
            let params = PresetParams { a, ..p.base };
            let (mut g_thick, mut p_thick) =
                Preset::DragRelaxation.build(&params, SprayMode::Thick)?;
            let (mut g_thin, mut p_thin) =
                Preset::DragRelaxation.build(&params, SprayMode::Thin)?;
            let steps = (p.t_final / p.dt).round() as usize;
            let mut worst_v = 0.0f64;
            let mut worst_u = 0.0f64;
            for _ in 0..steps {
                strang_step(&mut g_thick, &mut p_thick, p.dt, SprayMode::Thick)?;
                strang_step(&mut g_thin, &mut p_thin, p.dt, SprayMode::Thin)?;
                worst_v = worst_v.max((p_thick.bulk_velocity() - p_thin.bulk_velocity()).norm());
                let u = |g: &crate::spray_solver::GasField| {
                    let (m, mom, _) = g.totals();
                    mom / m
                };
                worst_u = worst_u.max((u(&g_thick) - u(&g_thin)).norm());
            }
            Ok(worst_v + worst_u)
        })
        .collect::<Result<_, _>>()?;
    let discrepancy = ConvergenceStudy::fit(Parameter::A, p.a_list.clone(), metrics)?;
    let pass = discrepancy.is_monotone() && discrepancy.order_at_least(3.0);
    Ok(ThinLimitStudy {
        params: p.clone(),
        discrepancy,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_particles_give_degenerate_remainder_study() {
        let base = PresetParams {
            cells: 40,
            particles: 400,
            amplitude: 0.0,
            ..Default::default()
        };
        let mut params = base;
        params.gas_density = 1.0;
        let opts = RemainderOptions {
            probe_stride: 4,
            ..Default::default()
        };
        let s = remainder_order_fit(Preset::DragRelaxation, &params, &[0.08, 0.04], &opts, 3.5)
            .unwrap();
        assert_eq!(s.r.status, StudyStatus::Degenerate);
        assert_eq!(s.q.status, StudyStatus::Degenerate);
        assert!(!s.pass);
    }
}

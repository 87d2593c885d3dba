//! One function per subcommand; each writes its outputs under the output directory.

use super::config::{Mode, ScenarioConfig};
use super::output::{
    save_snapshot, write_dsmc_timeseries, write_report, write_timeseries, DsmcRow, Report,
    Snapshot, SnapshotState,
};
use super::{print_config, IoError};
use crate::collision::density::{KineticDensity, SmoothField};
use crate::collision::dsmc::{DsmcOptions, KineticEnsemble};
use crate::kernels::{kernel_checks, Vec3};
use crate::spray_solver::{run_simulation, Preset};
use crate::verify::{
    dsmc_vs_solver_moments, prop1_consistency, prop3_identity_suite, remainder_order_fit,
    thin_limit_study,
};
use serde::{Deserialize, Serialize};
use std::fmt::Write;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    KernelsCheck,
    Dsmc,
    SpraySim,
    VerifyProp1,
    VerifyProp3,
    RemainderScaling,
    CompareMoments,
}

impl Command {
    /// The mode this command runs; `spray-sim` keeps `thin-spray` when the config asks for it.
    pub fn mode(self, configured: Mode) -> Mode {
        match self {
            Command::KernelsCheck => Mode::VerifyKernels,
            Command::Dsmc => Mode::Dsmc,
            Command::SpraySim if configured == Mode::ThinSpray => Mode::ThinSpray,
            Command::SpraySim => Mode::Spray,
            Command::VerifyProp1 => Mode::VerifyProp1,
            Command::VerifyProp3 => Mode::VerifyProp3,
            Command::RemainderScaling => Mode::VerifyRemainder,
            Command::CompareMoments => Mode::VerifyCompare,
        }
    }

    pub fn for_mode(mode: Mode) -> Command {
        match mode {
            Mode::Dsmc => Command::Dsmc,
            Mode::Spray | Mode::ThinSpray => Command::SpraySim,
            Mode::VerifyKernels => Command::KernelsCheck,
            Mode::VerifyProp1 => Command::VerifyProp1,
            Mode::VerifyProp3 => Command::VerifyProp3,
            Mode::VerifyRemainder => Command::RemainderScaling,
            Mode::VerifyCompare => Command::CompareMoments,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub pass: bool,
    pub files: Vec<PathBuf>,
    /// Human-readable summary for the terminal.
    pub summary: String,
}

/// Runs the scenario selected by `cfg.mode`, writing files under `out`.
pub fn execute(cfg: &ScenarioConfig, out: &Path) -> Result<Outcome, IoError> {
    let problems = cfg.violations();
    if !problems.is_empty() {
        return Err(super::ConfigErrors(problems).into());
    }
    std::fs::create_dir_all(out).map_err(|e| IoError::Io {
        path: out.display().to_string(),
        source: e,
    })?;
    let echo = out.join("effective-config.toml");
    std::fs::write(&echo, print_config(cfg)).map_err(|e| IoError::Io {
        path: echo.display().to_string(),
        source: e,
    })?;
    let mut outcome = match Command::for_mode(cfg.mode) {
        Command::KernelsCheck => kernels_check(cfg, out)?,
        Command::Dsmc => dsmc(cfg, out)?,
        Command::SpraySim => spray_sim(cfg, out)?,
        Command::VerifyProp1 => {
            let r = prop1_consistency(&cfg.prop1)?;
            let summary = format!(
                "gap order {:.3} (want [0.8, 1.2]); pressure ratio {:.3} (want 8 +- 0.8); comoving {}",
                r.gap.fitted_order, r.pressure_ratio.mean, r.comoving_pass
            );
            report_outcome(
                out,
                "verify-prop1",
                &r.params,
                &r,
                Some(r.gap.fitted_order),
                r.pass,
                summary,
            )?
        }
        Command::VerifyProp3 => {
            let r = prop3_identity_suite(&cfg.prop3)?;
            let mut summary = String::new();
            for row in &r.rows {
                let res = &row.residual.residual;
                let _ = writeln!(
                    summary,
                    "{:<14} {:<12?} residual/SE {:>7.3} {}",
                    row.family,
                    row.residual.test_function,
                    res.mean / res.std_err,
                    verdict(row.pass)
                );
            }
            for c in &r.flux_checks {
                let _ = writeln!(
                    summary,
                    "flux {:<12?} {:.6e} vs {:.6e} {}",
                    c.test_function,
                    c.flux.mean,
                    c.leading_order,
                    verdict(c.pass)
                );
            }
            report_outcome(out, "verify-prop3", &r.params, &r, None, r.pass, summary)?
        }
        Command::RemainderScaling => {
            let rs = &cfg.remainder_scaling;
            let r = remainder_order_fit(
                rs.preset,
                &rs.base,
                &rs.a_list,
                &cfg.remainder.options(),
                rs.min_order,
            )?;
            let order = [&r.p, &r.q, &r.r]
                .iter()
                .map(|s| s.fitted_order)
                .filter(|x| x.is_finite())
                .fold(f64::INFINITY, f64::min);
            let summary = format!(
                "remainder orders P {:.3}, Q {:.3}, R {:.3}",
                r.p.fitted_order, r.q.fitted_order, r.r.fitted_order
            );
            let a = report_outcome(
                out,
                "remainder-scaling",
                rs,
                &r,
                order.is_finite().then_some(order),
                r.pass,
                summary,
            )?;
            let t = thin_limit_study(&cfg.thin_limit)?;
            let summary = format!(
                "thin/thick discrepancy order {:.3}",
                t.discrepancy.fitted_order
            );
            let b = report_outcome(
                out,
                "thin-limit",
                &t.params,
                &t,
                Some(t.discrepancy.fitted_order),
                t.pass,
                summary,
            )?;
            Outcome {
                pass: a.pass && b.pass,
                files: [a.files, b.files].concat(),
                summary: format!("{}\n{}", a.summary, b.summary),
            }
        }
        Command::CompareMoments => {
            let r = dsmc_vs_solver_moments(&cfg.compare)?;
            let mut summary = String::new();
            for run in &r.runs {
                let _ = writeln!(
                    summary,
                    "eta {:<6} delta {:<6} discrepancy {:.4} (noise {:.4})",
                    run.eta,
                    run.delta,
                    run.discrepancy,
                    run.noise_floor / cfg.compare.slip.abs()
                );
            }
            let _ = write!(
                summary,
                "reference within {}: {}; monotone: {}",
                cfg.compare.tolerance, r.within_tolerance, r.monotone
            );
            report_outcome(out, "compare-moments", &r.params, &r, None, r.pass, summary)?
        }
    };
    outcome.files.insert(0, echo);
    Ok(outcome)
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

fn report_outcome<I: Serialize, M: Serialize>(
    out: &Path,
    name: &str,
    inputs: &I,
    metrics: &M,
    fitted_order: Option<f64>,
    pass: bool,
    summary: String,
) -> Result<Outcome, IoError> {
    let path = out.join(format!("{name}.json"));
    write_report(
        &path,
        &Report::new(name, inputs, metrics, fitted_order, pass)?,
    )?;
    Ok(Outcome {
        pass,
        files: vec![path],
        summary: format!("{summary}\n{name}: {}", verdict(pass)),
    })
}

fn kernels_check(cfg: &ScenarioConfig, out: &Path) -> Result<Outcome, IoError> {
    let rows = kernel_checks(&cfg.quadrature.spec(), 100, cfg.seed)?;
    let pass = rows.iter().all(|r| r.pass);
    let mut summary = format!(
        "{:<30} {:>14} {:>10}  result\n",
        "check", "max abs error", "tolerance"
    );
    for r in &rows {
        let _ = writeln!(
            summary,
            "{:<30} {:>14.3e} {:>10.1e}  {}",
            r.name,
            r.max_abs_error,
            r.tolerance,
            verdict(r.pass)
        );
    }
    let inputs =
        serde_json::json!({ "quadrature": cfg.quadrature, "count": 100, "seed": cfg.seed });
    let metrics = serde_json::json!({ "rows": rows });
    report_outcome(
        out,
        "kernels-check",
        &inputs,
        &metrics,
        None,
        pass,
        summary.trim_end().to_string(),
    )
}

/// Kinetic densities matching a solver preset; `None` for presets without a kinetic form.
pub fn kinetic_initial(cfg: &ScenarioConfig) -> Option<(KineticDensity, KineticDensity)> {
    let i = &cfg.initial;
    let drift = Vec3::new(i.slip, 0.0, 0.0);
    let beam = |number: SmoothField| KineticDensity {
        number,
        ..KineticDensity::uniform(i.particle_density, drift, 0.0)
    };
    match i.preset {
        Preset::Sod => None,
        Preset::Uniform => Some((
            KineticDensity::uniform(i.gas_density, Vec3::ZERO, i.gas_temperature),
            KineticDensity::uniform(0.0, Vec3::ZERO, 0.0),
        )),
        Preset::CoMoving => Some((
            KineticDensity::uniform(i.gas_density, drift, i.gas_temperature),
            beam(SmoothField::constant(i.particle_density)),
        )),
        Preset::DragRelaxation => Some((
            KineticDensity::uniform(i.gas_density, Vec3::ZERO, i.gas_temperature),
            beam(SmoothField::constant(i.particle_density)),
        )),
        Preset::SinusoidalF => {
            let gas = KineticDensity {
                number: SmoothField::sine(i.gas_density, 0.5 * i.amplitude * i.gas_density, 1),
                ..KineticDensity::uniform(i.gas_density, Vec3::ZERO, i.gas_temperature)
            };
            Some((
                gas,
                beam(SmoothField::sine(
                    i.particle_density,
                    i.amplitude * i.particle_density,
                    1,
                )),
            ))
        }
    }
}

fn dsmc(cfg: &ScenarioConfig, out: &Path) -> Result<Outcome, IoError> {
    let (gas, particles) = kinetic_initial(cfg)
        .ok_or_else(|| IoError::Run("preset has no kinetic counterpart".into()))?;
    let d = &cfg.dsmc;
    let mut ens = KineticEnsemble::from_densities(
        &gas,
        &particles,
        d.gas_samples,
        d.particle_samples,
        cfg.grid.cells,
        cfg.params,
        cfg.seed,
    )?;
    let opts = DsmcOptions {
        gas_gas: d.gas_gas,
        gas_particle: d.gas_particle,
    };
    let mut rows: Vec<DsmcRow> = DsmcRow::pair(0.0, &ens.moments()).to_vec();
    let mut files = Vec::new();
    let mut outputs = 0usize;
    let mut steps = 0usize;
    let snapshot =
        |ens: &KineticEnsemble, outputs: usize, files: &mut Vec<PathBuf>| -> Result<(), IoError> {
            if d.snapshot_every > 0 && outputs.is_multiple_of(d.snapshot_every) {
                let path = out.join(format!("dsmc-snapshot-{outputs:05}.json"));
                save_snapshot(
                    &path,
                    &Snapshot::new(
                        ens.time,
                        SnapshotState::Ensemble {
                            ensemble: ens.clone(),
                        },
                    ),
                )?;
                files.push(path);
            }
            Ok(())
        };
    snapshot(&ens, 0, &mut files)?;
    while ens.time < cfg.grid.t_final - 1e-12 {
        let dt = cfg
            .grid
            .dt
            .min(ens.max_dt())
            .min(cfg.grid.t_final - ens.time);
        ens.step_in_place(dt, opts)?;
        steps += 1;
        let last = ens.time >= cfg.grid.t_final - 1e-12;
        if steps.is_multiple_of(cfg.grid.output_every) || last {
            outputs += 1;
            rows.extend(DsmcRow::pair(ens.time, &ens.moments()));
            snapshot(&ens, outputs, &mut files)?;
        }
    }
    let csv = out.join("dsmc.csv");
    write_dsmc_timeseries(&csv, &rows)?;
    files.insert(0, csv);
    let m = ens.moments();
    let summary = format!(
        "{steps} steps to t = {}; particle bulk velocity {:?}; total momentum {:?}; total energy {:.12e}",
        ens.time,
        ens.particle_bulk_velocity().to_array(),
        m.total_momentum().to_array(),
        m.total_energy()
    );
    Ok(Outcome {
        pass: true,
        files,
        summary,
    })
}

fn spray_sim(cfg: &ScenarioConfig, out: &Path) -> Result<Outcome, IoError> {
    let sim = cfg.simulation();
    let run = run_simulation(&sim)?;
    let csv = out.join("spray.csv");
    write_timeseries(&csv, &run.rows)?;
    let t = run.rows.last().map_or(0.0, |r| r.t);
    let snap = out.join("spray-final.json");
    save_snapshot(
        &snap,
        &Snapshot::new(
            t,
            SnapshotState::Spray {
                gas: run.gas.clone(),
                phase: run.phase.clone(),
            },
        ),
    )?;
    let summary = format!(
        "{} steps to t = {t}; {} output rows; min alpha {:.6}",
        run.steps,
        run.rows.len(),
        run.gas.min_alpha()
    );
    Ok(Outcome {
        pass: true,
        files: vec![csv, snap],
        summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cli_io::parse_config;

    #[test]
    fn spray_run_writes_csv_snapshot_and_echo() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = parse_config("[grid]\ncells = 16\nt_final = 0.05\n[initial]\nparticles = 64\n")
            .unwrap();
        let o = execute(&cfg, dir.path()).unwrap();
        assert!(o.pass);
        assert_eq!(o.files.len(), 3);
        let echo = std::fs::read_to_string(&o.files[0]).unwrap();
        assert_eq!(parse_config(&echo).unwrap(), cfg);
        let csv = std::fs::read_to_string(&o.files[1]).unwrap();
        assert!(csv.starts_with("t,total_gas_mass,"));
        assert!(csv.lines().count() >= 2);
    }

    #[test]
    fn dsmc_run_writes_two_rows_per_output() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = parse_config(
            "mode = \"dsmc\"\n[grid]\ncells = 8\nt_final = 0.02\noutput_every = 1\n[dsmc]\ngas_samples = 400\nparticle_samples = 100\nsnapshot_every = 2\n",
        )
        .unwrap();
        let o = execute(&cfg, dir.path()).unwrap();
        let csv = std::fs::read_to_string(dir.path().join("dsmc.csv")).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(
            lines[0],
            "t,species,mass,momentum_x,momentum_y,momentum_z,energy"
        );
        assert_eq!((lines.len() - 1) % 2, 0);
        assert!(lines[1].contains(",gas,") && lines[2].contains(",particle,"));
        assert!(o
            .files
            .iter()
            .any(|f| f.to_string_lossy().contains("dsmc-snapshot-00000")));
    }

    #[test]
    fn kernels_check_report_validates() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ScenarioConfig {
            mode: Mode::VerifyKernels,
            ..Default::default()
        };
        let o = execute(&cfg, dir.path()).unwrap();
        assert!(o.pass, "{}", o.summary);
        let v: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&o.files[1]).unwrap()).unwrap();
        assert!(crate::cli_io::validate_report(&v).is_empty());
    }

    #[test]
    fn command_modes_agree() {
        for c in [
            Command::KernelsCheck,
            Command::Dsmc,
            Command::SpraySim,
            Command::VerifyProp1,
            Command::VerifyProp3,
            Command::RemainderScaling,
            Command::CompareMoments,
        ] {
            assert_eq!(Command::for_mode(c.mode(Mode::Spray)), c);
        }
        assert_eq!(Command::SpraySim.mode(Mode::ThinSpray), Mode::ThinSpray);
    }
}

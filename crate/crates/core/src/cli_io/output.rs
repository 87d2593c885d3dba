//! CSV time series, JSON reports and state snapshots.
//!
//! CSV numbers carry 17 significant digits; JSON numbers use the shortest representation
//! that parses back to the same double. Either way a written value reads back bit-exact.

use super::IoError;
use crate::collision::dsmc::{EnsembleMoments, KineticEnsemble};
use crate::spray_solver::{GasField, ParticlePhase, Totals};
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::Write;
use std::path::Path;

pub const REPORT_SCHEMA_VERSION: u32 = 1;
pub const SNAPSHOT_FORMAT: &str = "spray-snapshot";
pub const SNAPSHOT_VERSION: u32 = 1;

/// JSON Schema of [`Report`].
pub const REPORT_SCHEMA: &str = include_str!("report.schema.json");

fn io_err(path: &Path, source: std::io::Error) -> IoError {
    IoError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| io_err(path, e))
}

/// `x` with 17 significant digits.
pub fn format_number(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_text<I: IntoIterator<Item = Vec<String>>>(header: &[&str], rows: I) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn timeseries_csv(rows: &[Totals]) -> String {
    csv_text(
        &Totals::COLUMNS,
        rows.iter()
            .map(|r| r.values().iter().map(|x| format_number(*x)).collect()),
    )
}

/// Writes solver totals with the fixed column order; an empty run gives a header-only file.
pub fn write_timeseries(path: &Path, rows: &[Totals]) -> Result<(), IoError> {
    write_file(path, timeseries_csv(rows).as_bytes())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Species {
    Gas,
    Particle,
}

/// One species' totals at one output time of a DSMC run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DsmcRow {
    pub t: f64,
    pub species: Species,
    pub mass: f64,
    pub momentum: [f64; 3],
    pub energy: f64,
}

impl DsmcRow {
    pub const COLUMNS: [&'static str; 7] = [
        "t",
        "species",
        "mass",
        "momentum_x",
        "momentum_y",
        "momentum_z",
        "energy",
    ];

    pub fn pair(t: f64, m: &EnsembleMoments) -> [DsmcRow; 2] {
        [
            DsmcRow {
                t,
                species: Species::Gas,
                mass: m.gas_mass,
                momentum: m.gas_momentum.to_array(),
                energy: m.gas_energy,
            },
            DsmcRow {
                t,
                species: Species::Particle,
                mass: m.particle_mass,
                momentum: m.particle_momentum.to_array(),
                energy: m.particle_energy,
            },
        ]
    }
}

pub fn dsmc_csv(rows: &[DsmcRow]) -> String {
    csv_text(
        &DsmcRow::COLUMNS,
        rows.iter().map(|r| {
            let species = match r.species {
                Species::Gas => "gas",
                Species::Particle => "particle",
            };
            let mut cells = vec![
                format_number(r.t),
                species.to_string(),
                format_number(r.mass),
            ];
            cells.extend(r.momentum.iter().map(|x| format_number(*x)));
            cells.push(format_number(r.energy));
            cells
        }),
    )
}

pub fn write_dsmc_timeseries(path: &Path, rows: &[DsmcRow]) -> Result<(), IoError> {
    write_file(path, dsmc_csv(rows).as_bytes())
}

/// Outcome of one subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Report {
    pub schema_version: u32,
    pub name: String,
    pub inputs: serde_json::Value,
    pub metrics: serde_json::Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fitted_order: Option<f64>,
    pub pass: bool,
}

impl Report {
    pub fn new<I: Serialize, M: Serialize>(
        name: &str,
        inputs: &I,
        metrics: &M,
        fitted_order: Option<f64>,
        pass: bool,
    ) -> Result<Self, IoError> {
        Ok(Report {
            schema_version: REPORT_SCHEMA_VERSION,
            name: name.to_string(),
            inputs: serde_json::to_value(inputs).map_err(|e| IoError::Format(e.to_string()))?,
            metrics: serde_json::to_value(metrics).map_err(|e| IoError::Format(e.to_string()))?,
            fitted_order: fitted_order.filter(|x| x.is_finite()),
            pass,
        })
    }
}

pub fn write_report(path: &Path, report: &Report) -> Result<(), IoError> {
    let text = serde_json::to_string_pretty(report).map_err(|e| IoError::Format(e.to_string()))?;
    write_file(path, text.as_bytes())
}

pub fn read_report(path: &Path) -> Result<Report, IoError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| IoError::Format(format!("{}: {e}", path.display())))
}

/// Checks a JSON value against [`REPORT_SCHEMA`]; returns every violation.
pub fn validate_report(value: &serde_json::Value) -> Vec<String> {
    let schema: serde_json::Value =
        serde_json::from_str(REPORT_SCHEMA).expect("embedded schema parses");
    let mut problems = Vec::new();
    let Some(obj) = value.as_object() else {
        return vec!["report must be an object".into()];
    };
    let props = schema["properties"].as_object().expect("schema properties");
    for req in schema["required"].as_array().expect("schema required") {
        let key = req.as_str().expect("required key");
        if !obj.contains_key(key) {
            problems.push(format!("missing `{key}`"));
        }
    }
    for (key, v) in obj {
        let Some(spec) = props.get(key) else {
            problems.push(format!("unexpected `{key}`"));
            continue;
        };
        let ok = match spec["type"].as_str().expect("property type") {
            "integer" => v.as_u64().is_some_and(|x| {
                spec.get("const")
                    .and_then(|c| c.as_u64())
                    .is_none_or(|c| c == x)
            }),
            "string" => v.as_str().is_some_and(|s| !s.is_empty()),
            "object" => v.is_object(),
            "number" => v.is_number(),
            "boolean" => v.is_boolean(),
            other => unreachable!("schema type {other}"),
        };
        if !ok {
            problems.push(format!("`{key}` does not match {spec}"));
        }
    }
    problems
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SnapshotState {
    Spray { gas: GasField, phase: ParticlePhase },
    Ensemble { ensemble: KineticEnsemble },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Snapshot {
    pub format: String,
    pub version: u32,
    pub t: f64,
    pub state: SnapshotState,
}

impl Snapshot {
    pub fn new(t: f64, state: SnapshotState) -> Self {
        Snapshot {
            format: SNAPSHOT_FORMAT.to_string(),
            version: SNAPSHOT_VERSION,
            t,
            state,
        }
    }
}

pub fn save_snapshot(path: &Path, snap: &Snapshot) -> Result<(), IoError> {
    let file = fs::File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    serde_json::to_writer(&mut w, snap)
        .map_err(|e| IoError::Format(format!("{}: {e}", path.display())))?;
    w.flush().map_err(|e| io_err(path, e))
}

pub fn load_snapshot(path: &Path) -> Result<Snapshot, IoError> {
    let file = fs::File::open(path).map_err(|e| io_err(path, e))?;
    let snap: Snapshot = serde_json::from_reader(std::io::BufReader::new(file))
        .map_err(|e| IoError::Format(format!("{}: {e}", path.display())))?;
    if snap.format != SNAPSHOT_FORMAT || snap.version != SNAPSHOT_VERSION {
        return Err(IoError::Format(format!(
            "{}: unsupported snapshot {} v{}",
            path.display(),
            snap.format,
            snap.version
        )));
    }
    Ok(snap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::Vec3;
    use crate::spray_solver::{Preset, PresetParams, SprayMode};

    #[test]
    fn empty_run_gives_header_only_csv() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("totals.csv");
        write_timeseries(&path, &[]).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text, format!("{}\n", Totals::COLUMNS.join(",")));
    }

    #[test]
    fn csv_numbers_roundtrip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02e23, f64::MIN_POSITIVE] {
            let s = format_number(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{s}");
        }
    }

    #[test]
    fn report_matches_schema() {
        let r = Report::new(
            "kernels-check",
            &serde_json::json!({"count": 100}),
            &serde_json::json!({"rows": []}),
            Some(1.0),
            true,
        )
        .unwrap();
        let v = serde_json::to_value(&r).unwrap();
        assert!(validate_report(&v).is_empty());
        let mut bad = v.clone();
        bad.as_object_mut().unwrap().remove("pass");
        bad["extra"] = serde_json::json!(1);
        assert_eq!(validate_report(&bad).len(), 2);
    }

    #[test]
    fn nan_order_is_omitted() {
        let r = Report::new("x", &0, &0, Some(f64::NAN), false).unwrap();
        assert!(r.fitted_order.is_none());
    }

    #[test]
    fn spray_snapshot_is_bit_identical() {
        let p = PresetParams {
            particles: 10_000,
            ..Default::default()
        };
        let (mut gas, mut phase) = Preset::SinusoidalF.build(&p, SprayMode::Thick).unwrap();
        gas.cells[3].u = Vec3::new(1.0 / 3.0, -0.0, 1e-310);
        phase.particles[7].v = Vec3::new(std::f64::consts::PI, 0.1 + 0.2, -1e300);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("snap.json");
        let snap = Snapshot::new(0.1 + 0.2, SnapshotState::Spray { gas, phase });
        save_snapshot(&path, &snap).unwrap();
        let back = load_snapshot(&path).unwrap();
        assert_eq!(back, snap);
        let (
            SnapshotState::Spray { gas: g0, phase: p0 },
            SnapshotState::Spray { gas: g1, phase: p1 },
        ) = (&snap.state, &back.state)
        else {
            panic!()
        };
        assert_eq!(g1.cells[3].u.y.to_bits(), g0.cells[3].u.y.to_bits());
        assert!(p0
            .particles
            .iter()
            .zip(&p1.particles)
            .all(|(a, b)| a.x.to_bits() == b.x.to_bits() && a.v.z.to_bits() == b.v.z.to_bits()));
    }

    #[test]
    fn snapshot_version_is_checked() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("snap.json");
        let mut snap = Snapshot::new(
            0.0,
            SnapshotState::Spray {
                gas: GasField::uniform(4, 1.0, 1.0, Vec3::ZERO, 1.0),
                phase: ParticlePhase::empty(0.1),
            },
        );
        snap.version = 99;
        save_snapshot(&path, &snap).unwrap();
        assert!(load_snapshot(&path).is_err());
    }

    #[test]
    fn io_errors_name_the_path() {
        let err = load_snapshot(Path::new("/nonexistent/dir/snap.json"))
            .unwrap_err()
            .to_string();
        assert!(err.contains("/nonexistent/dir/snap.json"), "{err}");
    }
}

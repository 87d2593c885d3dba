//! Scenario configuration: one TOML grammar for every subcommand.
//!
//! ```toml
//! # comments start with '#'
//! mode = "spray"            # dsmc | spray | thin-spray | verify-kernels | verify-prop1 | ...
//! seed = 1
//!
//! [params]                  # scaling parameters; eta must equal m_g / m_p
//! eta = 0.05
//!
//! [grid]
//! cells = 100
//!
//! [initial]
//! preset = "sinusoidal-f"   # uniform | sod | comoving | drag-relaxation | sinusoidal-f
//! ```
//!
//! Every key is optional; missing keys take the values of [`ScenarioConfig::default`].
//! Parsing reports every problem at once: unknown keys (with the nearest valid key),
//! type errors per section, and violated invariants.

use crate::collision::ScalingParams;
use crate::kernels::{QuadratureSpec, SphereRule};
use crate::spray_solver::{Preset, PresetParams, RemainderOptions, SimulationConfig, SprayMode};
use crate::verify::{CompareParams, Prop1Params, Prop3Params, ThinLimitParams};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Dsmc,
    Spray,
    ThinSpray,
    VerifyKernels,
    VerifyProp1,
    VerifyProp3,
    VerifyRemainder,
    VerifyCompare,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridConfig {
    pub cells: usize,
    pub t_final: f64,
    /// Largest time step; the solver also respects its CFL limit.
    pub dt: f64,
    pub cfl: f64,
    pub output_every: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            cells: 100,
            t_final: 0.5,
            dt: 1e-2,
            cfl: 0.9,
            output_every: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InitialConfig {
    pub preset: Preset,
    /// Solver particles; the DSMC sample counts live in `[dsmc]`.
    pub particles: usize,
    pub gas_density: f64,
    pub gas_temperature: f64,
    pub particle_density: f64,
    pub slip: f64,
    pub amplitude: f64,
}

impl Default for InitialConfig {
    fn default() -> Self {
        let p = PresetParams::default();
        InitialConfig {
            preset: Preset::DragRelaxation,
            particles: p.particles,
            gas_density: p.gas_density,
            gas_temperature: p.gas_temperature,
            particle_density: p.particle_density,
            slip: p.slip,
            amplitude: p.amplitude,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SphereRuleKind {
    ProductGrid,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadratureConfig {
    pub sphere_rule: SphereRuleKind,
    pub n_theta: usize,
    pub n_phi: usize,
    pub n_samples: usize,
    pub sphere_seed: u64,
    pub hermite_order: usize,
    pub tolerance: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        let q = QuadratureSpec::default();
        let SphereRule::ProductGrid { n_theta, n_phi } = q.sphere_rule else {
            unreachable!()
        };
        QuadratureConfig {
            sphere_rule: SphereRuleKind::ProductGrid,
            n_theta,
            n_phi,
            n_samples: 4096,
            sphere_seed: 0,
            hermite_order: q.hermite_order,
            tolerance: q.tolerance,
        }
    }
}

impl QuadratureConfig {
    pub fn spec(&self) -> QuadratureSpec {
        let sphere_rule = match self.sphere_rule {
            SphereRuleKind::ProductGrid => SphereRule::ProductGrid {
                n_theta: self.n_theta,
                n_phi: self.n_phi,
            },
            SphereRuleKind::MonteCarlo => SphereRule::MonteCarlo {
                n_samples: self.n_samples,
                seed: self.sphere_seed,
            },
        };
        QuadratureSpec {
            sphere_rule,
            hermite_order: self.hermite_order,
            tolerance: self.tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RemainderConfig {
    /// Evaluate `P`, `Q`, `R` at every output row of a spray run.
    pub enabled: bool,
    pub n_theta: usize,
    pub n_phi: usize,
    pub bandwidth_cells: f64,
    pub probe_stride: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub velocity_bandwidth: Option<f64>,
    pub lattice_points: usize,
    pub fd_step: f64,
}

impl Default for RemainderConfig {
    fn default() -> Self {
        let o = RemainderOptions::default();
        RemainderConfig {
            enabled: false,
            n_theta: o.n_theta,
            n_phi: o.n_phi,
            bandwidth_cells: o.bandwidth_cells,
            probe_stride: o.probe_stride,
            velocity_bandwidth: o.velocity_bandwidth,
            lattice_points: o.lattice_points,
            fd_step: o.fd_step,
        }
    }
}

impl RemainderConfig {
    pub fn options(&self) -> RemainderOptions {
        RemainderOptions {
            n_theta: self.n_theta,
            n_phi: self.n_phi,
            bandwidth_cells: self.bandwidth_cells,
            probe_stride: self.probe_stride,
            velocity_bandwidth: self.velocity_bandwidth,
            lattice_points: self.lattice_points,
            fd_step: self.fd_step,
        }
    }

    fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.n_theta < 2 || self.n_phi < 4 {
            v.push(format!(
                "n_theta = {} and n_phi = {} must be at least 2 and 4",
                self.n_theta, self.n_phi
            ));
        }
        if !(self.bandwidth_cells > 0.0) {
            v.push(format!(
                "bandwidth_cells = {} must be positive",
                self.bandwidth_cells
            ));
        }
        if self.probe_stride == 0 || self.lattice_points == 0 {
            v.push("probe_stride and lattice_points must be at least 1".into());
        }
        if let Some(h) = self.velocity_bandwidth {
            if !(h > 0.0) {
                v.push(format!("velocity_bandwidth = {h} must be positive"));
            }
        }
        if !(self.fd_step > 0.0) {
            v.push(format!("fd_step = {} must be positive", self.fd_step));
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DsmcConfig {
    pub gas_samples: usize,
    pub particle_samples: usize,
    pub gas_gas: bool,
    pub gas_particle: bool,
    /// Write an ensemble snapshot every this many output rows; 0 disables snapshots.
    pub snapshot_every: usize,
}

impl Default for DsmcConfig {
    fn default() -> Self {
        DsmcConfig {
            gas_samples: 20_000,
            particle_samples: 4_000,
            gas_gas: true,
            gas_particle: true,
            snapshot_every: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RemainderScalingConfig {
    pub preset: Preset,
    pub base: PresetParams,
    pub a_list: Vec<f64>,
    pub min_order: f64,
}

impl Default for RemainderScalingConfig {
    fn default() -> Self {
        RemainderScalingConfig {
            preset: Preset::SinusoidalF,
            base: PresetParams {
                cells: 64,
                particles: 4000,
                ..Default::default()
            },
            a_list: vec![0.08, 0.04, 0.02],
            min_order: 3.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub mode: Mode,
    pub seed: u64,
    pub params: ScalingParams,
    pub grid: GridConfig,
    pub initial: InitialConfig,
    pub quadrature: QuadratureConfig,
    pub remainder: RemainderConfig,
    pub dsmc: DsmcConfig,
    pub prop1: Prop1Params,
    pub prop3: Prop3Params,
    pub remainder_scaling: RemainderScalingConfig,
    pub thin_limit: ThinLimitParams,
    pub compare: CompareParams,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            mode: Mode::Spray,
            seed: 1,
            params: ScalingParams::with_unit_gas_mass(0.05, 0.05, 0.05)
                .expect("default scaling parameters"),
            grid: GridConfig::default(),
            initial: InitialConfig::default(),
            quadrature: QuadratureConfig::default(),
            remainder: RemainderConfig::default(),
            dsmc: DsmcConfig::default(),
            prop1: Prop1Params::default(),
            prop3: Prop3Params::default(),
            remainder_scaling: RemainderScalingConfig::default(),
            thin_limit: ThinLimitParams::default(),
            compare: CompareParams::default(),
        }
    }
}

/// Every problem found in a configuration text.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigErrors(pub Vec<String>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} configuration problem(s):", self.0.len())?;
        for e in &self.0 {
            write!(f, "\n  - {e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

/// Keys that are valid but absent from the serialized defaults.
const OPTIONAL_KEYS: &[&str] = &["remainder.velocity_bandwidth"];

fn nearest<'a>(key: &str, candidates: impl Iterator<Item = &'a String>) -> Option<&'a String> {
    candidates.min_by_key(|c| strsim::levenshtein(key, c))
}

/// Reports unknown keys and removes them from `user`.
fn check_keys(user: &mut toml::Table, schema: &toml::Table, path: &str, errors: &mut Vec<String>) {
    let mut unknown = Vec::new();
    for (key, value) in user.iter_mut() {
        let full = if path.is_empty() {
            key.clone()
        } else {
            format!("{path}.{key}")
        };
        match schema.get(key) {
            Some(toml::Value::Table(sub)) => match value {
                toml::Value::Table(u) => check_keys(u, sub, &full, errors),
                _ => {
                    errors.push(format!("`{full}` must be a section"));
                    unknown.push(key.clone());
                }
            },
            Some(_) => {}
            None if OPTIONAL_KEYS.contains(&full.as_str()) => {}
            None => {
                unknown.push(key.clone());
                let extra: Vec<String> = OPTIONAL_KEYS
                    .iter()
                    .filter_map(|k| k.strip_prefix(&format!("{path}.")).map(str::to_string))
                    .filter(|k| !k.contains('.'))
                    .collect();
                match nearest(key, schema.keys().chain(extra.iter())) {
                    Some(n) => {
                        let near = if path.is_empty() {
                            n.clone()
                        } else {
                            format!("{path}.{n}")
                        };
                        errors.push(format!("unknown key `{full}`; did you mean `{near}`?"))
                    }
                    None => errors.push(format!("unknown key `{full}`")),
                }
            }
        }
    }
    for key in unknown {
        user.remove(&key);
    }
}

fn section<T: DeserializeOwned>(
    table: &toml::Table,
    key: &str,
    slot: &mut T,
    errors: &mut Vec<String>,
) {
    if let Some(v) = table.get(key) {
        match v.clone().try_into::<T>() {
            Ok(parsed) => *slot = parsed,
            Err(e) => errors.push(format!("`{key}`: {}", e.message().trim())),
        }
    }
}

/// Parses and validates a scenario; on failure returns every problem found.
pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigErrors> {
    let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| {
        ConfigErrors(vec![format!("syntax: {}", e.message().trim())])
    })?;
    let schema =
        toml::Table::try_from(ScenarioConfig::default()).expect("default config serializes");
    let mut errors = Vec::new();
    check_keys(&mut table, &schema, "", &mut errors);

    let key_errors = errors.len();
    let mut cfg = ScenarioConfig::default();
    section(&table, "mode", &mut cfg.mode, &mut errors);
    section(&table, "seed", &mut cfg.seed, &mut errors);
    section(&table, "grid", &mut cfg.grid, &mut errors);
    section(&table, "initial", &mut cfg.initial, &mut errors);
    section(&table, "quadrature", &mut cfg.quadrature, &mut errors);
    section(&table, "remainder", &mut cfg.remainder, &mut errors);
    section(&table, "dsmc", &mut cfg.dsmc, &mut errors);
    section(&table, "prop1", &mut cfg.prop1, &mut errors);
    section(&table, "prop3", &mut cfg.prop3, &mut errors);
    section(
        &table,
        "remainder_scaling",
        &mut cfg.remainder_scaling,
        &mut errors,
    );
    section(&table, "thin_limit", &mut cfg.thin_limit, &mut errors);
    section(&table, "compare", &mut cfg.compare, &mut errors);
    if let Some(v) = table.get("params") {
        // Missing scaling keys default individually, so merge onto the defaults first.
        let mut merged = toml::Table::try_from(cfg.params).expect("scaling params serialize");
        if let toml::Value::Table(t) = v {
            for (k, x) in t {
                merged.insert(k.clone(), x.clone());
            }
        }
        section(
            &toml::Table::from_iter([("params".to_string(), toml::Value::Table(merged))]),
            "params",
            &mut cfg.params,
            &mut errors,
        );
    }
    // Invariants are only meaningful once every value has its intended type.
    if errors.len() == key_errors {
        errors.extend(cfg.violations());
    }
    if errors.is_empty() {
        Ok(cfg)
    } else {
        Err(ConfigErrors(errors))
    }
}

/// The effective configuration as TOML; `parse_config(&print_config(c)) == Ok(c)` for valid `c`.
pub fn print_config(cfg: &ScenarioConfig) -> String {
    toml::to_string(cfg).expect("config serializes")
}

fn tagged(section: &str, items: Vec<String>) -> impl Iterator<Item = String> + '_ {
    items.into_iter().map(move |m| format!("{section}: {m}"))
}

fn positive_descending(name: &str, xs: &[f64], upper: f64) -> Vec<String> {
    let ok = !xs.is_empty()
        && xs.iter().all(|x| *x > 0.0 && *x <= upper)
        && xs.windows(2).all(|w| w[1] < w[0]);
    if ok {
        Vec::new()
    } else {
        vec![format!(
            "{name} = {xs:?} must be non-empty, strictly descending and in (0, {upper}]"
        )]
    }
}

impl ScenarioConfig {
    /// Preset parameters of the spray solver, taking `a` and `m_g` from `[params]`.
    pub fn preset_params(&self) -> PresetParams {
        PresetParams {
            cells: self.grid.cells,
            a: self.params.a,
            m_g: self.params.m_g,
            particles: self.initial.particles,
            gas_density: self.initial.gas_density,
            gas_temperature: self.initial.gas_temperature,
            particle_density: self.initial.particle_density,
            slip: self.initial.slip,
            amplitude: self.initial.amplitude,
        }
    }

    pub fn spray_mode(&self) -> SprayMode {
        if self.mode == Mode::ThinSpray {
            SprayMode::Thin
        } else {
            SprayMode::Thick
        }
    }

    pub fn simulation(&self) -> SimulationConfig {
        SimulationConfig {
            preset: self.initial.preset,
            params: self.preset_params(),
            mode: self.spray_mode(),
            t_final: self.grid.t_final,
            cfl: self.grid.cfl,
            dt_max: self.grid.dt,
            output_every: self.grid.output_every,
            remainder: self.remainder.enabled.then(|| self.remainder.options()),
        }
    }

    /// Sets the top-level seed and the seed of every stochastic study.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.prop1.seed = seed;
        self.prop3.seed = seed;
        self.compare.seed = seed;
        self
    }

    /// Every violated invariant, each prefixed by its section.
    pub fn violations(&self) -> Vec<String> {
        let mut v: Vec<String> = tagged("params", self.params.violations()).collect();
        let seeds = [
            ("seed", self.seed),
            ("quadrature.sphere_seed", self.quadrature.sphere_seed),
            ("prop1.seed", self.prop1.seed),
            ("prop3.seed", self.prop3.seed),
            ("compare.seed", self.compare.seed),
        ];
        for (key, seed) in seeds {
            if i64::try_from(seed).is_err() {
                v.push(format!(
                    "{key}: {seed} exceeds the TOML integer range (at most {})",
                    i64::MAX
                ));
            }
        }
        let mut sim = self.simulation();
        let radius_ok = self.params.a >= 0.0 && self.params.a < 0.5;
        if !radius_ok {
            // Already reported under [params].
            sim.params.a = 0.0;
        }
        v.extend(tagged("grid/initial", sim.violations()));
        let peak = self.initial.particle_density * (1.0 + self.initial.amplitude.abs());
        let packed = 4.0 * PI / 3.0 * self.params.a.powi(3) * peak;
        if radius_ok
            && self.initial.preset != Preset::Uniform
            && self.initial.preset != Preset::Sod
            && packed >= 1.0
        {
            v.push(format!(
                "initial: peak particle volume fraction {packed} must be below 1"
            ));
        }
        if let Err(e) = self.quadrature.spec().validate() {
            v.push(format!("quadrature: {e}"));
        }
        v.extend(tagged("remainder", self.remainder.violations()));
        if self.mode == Mode::Dsmc {
            if self.dsmc.gas_samples == 0 {
                v.push("dsmc: gas_samples must be positive".into());
            }
            if self.initial.preset == Preset::Sod {
                v.push("dsmc: the sod preset has no kinetic counterpart".into());
            }
        }
        let p1 = &self.prop1;
        if !(p1.a > 0.0 && p1.a < 0.5) || p1.samples == 0 {
            v.push(format!(
                "prop1: a = {} must lie in (0, 0.5) and samples must be positive",
                p1.a
            ));
        }
        v.extend(tagged("prop1", positive_descending("etas", &p1.etas, 1.0)));
        let p3 = &self.prop3;
        if !(p3.a > 0.0 && p3.a < 0.5 && p3.flux_a > 0.0 && p3.flux_a < 0.5) || p3.samples == 0 {
            v.push(format!(
                "prop3: a = {} and flux_a = {} must lie in (0, 0.5); samples must be positive",
                p3.a, p3.flux_a
            ));
        }
        if !(p3.eta > 0.0 && p3.eta <= 1.0 && p3.flux_eta > 0.0 && p3.flux_eta <= 1.0) {
            v.push(format!(
                "prop3: eta = {} and flux_eta = {} must lie in (0, 1]",
                p3.eta, p3.flux_eta
            ));
        }
        let rs = &self.remainder_scaling;
        v.extend(tagged(
            "remainder_scaling",
            positive_descending("a_list", &rs.a_list, 0.5),
        ));
        v.extend(tagged(
            "remainder_scaling",
            PresetParams { a: 0.0, ..rs.base }.violations(),
        ));
        let tl = &self.thin_limit;
        v.extend(tagged(
            "thin_limit",
            positive_descending("a_list", &tl.a_list, 0.5),
        ));
        v.extend(tagged(
            "thin_limit",
            PresetParams { a: 0.0, ..tl.base }.violations(),
        ));
        if !(tl.t_final > 0.0 && tl.dt > 0.0) {
            v.push("thin_limit: t_final and dt must be positive".into());
        }
        let c = &self.compare;
        if c.schedule.is_empty()
            || c.schedule
                .iter()
                .any(|(e, d)| !(*e > 0.0 && *e <= 1.0 && *d > 0.0))
        {
            v.push(
                "compare: schedule needs (eta, delta) pairs with eta in (0, 1] and delta > 0"
                    .into(),
            );
        }
        if !(c.a > 0.0 && c.a < 0.5)
            || c.gas_samples == 0
            || c.cells == 0
            || !(c.t_final > 0.0 && c.output_dt > 0.0)
        {
            v.push(
                "compare: needs a in (0, 0.5), positive samples, cells, t_final and output_dt"
                    .into(),
            );
        }
        v
    }
}

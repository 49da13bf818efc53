//! Run configuration, CSV/JSON exporters and the mode drivers behind the
//! `opa-steer` binary.
//!
//! Configs are flat JSON objects. Unknown keys are rejected. Every omitted key
//! takes the default below, and [`RunConfig::to_json`] writes every key back
//! explicitly, so a parsed config survives a round trip unchanged.
//!
//! | key | default |
//! |---|---|
//! | `n`, `n_z` | 201, `n` |
//! | `pitch`, `pitch_z` | 0.5, `pitch` |
//! | `theta_s` or `m` | required (unless a sweep plan sets one) |
//! | `phi_s` | 0 |
//! | `window` | circular + Gaussian σ = 0.5 |
//! | `psi_max`, `strategy` | 360, `half-half` |
//! | `perturbation` | none |
//! | `element` | `{"kind": "dipole-z"}` |
//! | `resolution`, `span` | 0.01, `[-90, 90]` |
//! | `theta_resolution`, `phi_resolution` | 1, 1 |
//! | `group_by` | `["psi_max", "var", "p_d"]` |
//!
//! Intensities are written with 17 significant digits (`{:.16e}`), which
//! parses back to the identical `f64`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::array_model::{steering_from_m, ArraySpec, SteeringSpec};
use crate::excitation::{CompensationStrategy, PerturbationRequest, PhaseLimitSpec, PixelGrid, WindowSpec};
use crate::lobes::{LobeError, LobeReport};
use crate::radiation::{compute_3d, CutSpan, ElementPattern, Pattern3D, PatternCut};
use crate::sweep::{aggregate_partial, expand_plan, run_sweep, window_label, Axis, PartialGroupRow, PlanAxes, Scenario, ScenarioError, SweepError, SweepResult};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid '{field}': {message}")]
    Validation { field: String, message: String },
}

impl ConfigError {
    fn field(field: &str, message: impl ToString) -> Self {
        ConfigError::Validation {
            field: field.to_string(),
            message: message.to_string(),
        }
    }

    pub fn to_json(&self) -> Value {
        match self {
            ConfigError::Parse { line, column, message } => json!({
                "error": "parse",
                "line": line,
                "column": column,
                "message": message,
            }),
            ConfigError::Validation { field, message } => json!({
                "error": "validation",
                "field": field,
                "message": message,
            }),
        }
    }
}

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}, line {line}: {message}")]
    Csv {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Cut,
    Pattern3d,
    Analyze,
    Sweep,
}

impl Mode {
    pub fn name(&self) -> &'static str {
        match self {
            Mode::Cut => "cut",
            Mode::Pattern3d => "pattern3d",
            Mode::Analyze => "analyze",
            Mode::Sweep => "sweep",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [Mode::Cut, Mode::Pattern3d, Mode::Analyze, Mode::Sweep]
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown mode '{s}'"))
    }
}

/// Steering given either as an angle or as pixels per sawtooth period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SteeringInput {
    ThetaS(f64),
    M(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Exports {
    #[serde(default = "yes")]
    pub raw_cut: bool,
    #[serde(default)]
    pub phase_map: bool,
    #[serde(default = "yes")]
    pub report: bool,
    /// Sweep mode: JSON archive of every lobe report.
    #[serde(default)]
    pub reports_archive: bool,
}

fn yes() -> bool {
    true
}

impl Default for Exports {
    fn default() -> Self {
        Self {
            raw_cut: true,
            phase_map: false,
            report: true,
            reports_archive: false,
        }
    }
}

/// Validated run configuration with every default filled in.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    pub n: usize,
    pub n_z: usize,
    pub pitch: f64,
    pub pitch_z: f64,
    pub steering: Option<SteeringInput>,
    pub phi_s: f64,
    pub window: WindowSpec<f64>,
    pub psi_max: f64,
    pub strategy: CompensationStrategy,
    pub perturbation: Option<PerturbationRequest<f64>>,
    pub element: ElementPattern<f64>,
    pub resolution: f64,
    pub span: [f64; 2],
    pub fov: Option<f64>,
    pub theta_resolution: f64,
    pub phi_resolution: f64,
    pub plan: Option<PlanAxes<f64>>,
    pub group_by: Vec<Axis>,
    pub exports: Exports,
}

/// On-disk form: everything optional except the mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    mode: Mode,
    n: Option<usize>,
    n_z: Option<usize>,
    pitch: Option<f64>,
    pitch_z: Option<f64>,
    theta_s: Option<f64>,
    m: Option<f64>,
    phi_s: Option<f64>,
    window: Option<WindowSpec<f64>>,
    psi_max: Option<f64>,
    strategy: Option<CompensationStrategy>,
    perturbation: Option<PerturbationRequest<f64>>,
    element: Option<ElementPattern<f64>>,
    resolution: Option<f64>,
    span: Option<[f64; 2]>,
    fov: Option<f64>,
    theta_resolution: Option<f64>,
    phi_resolution: Option<f64>,
    plan: Option<PlanAxes<f64>>,
    group_by: Option<Vec<Axis>>,
    exports: Option<Exports>,
}

/// Parses and validates a JSON config.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let raw: RawConfig = serde_json::from_str(text).map_err(|e| ConfigError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let n = raw.n.unwrap_or(201);
    let pitch = raw.pitch.unwrap_or(0.5);
    let steering = match (raw.theta_s, raw.m) {
        (Some(_), Some(_)) => return Err(ConfigError::field("theta_s", "give theta_s or m, not both")),
        (Some(t), None) => Some(SteeringInput::ThetaS(t)),
        (None, Some(m)) => Some(SteeringInput::M(m)),
        (None, None) => None,
    };
    let cfg = RunConfig {
        mode: raw.mode,
        n,
        n_z: raw.n_z.unwrap_or(n),
        pitch,
        pitch_z: raw.pitch_z.unwrap_or(pitch),
        steering,
        phi_s: raw.phi_s.unwrap_or(0.0),
        window: raw.window.unwrap_or(WindowSpec::double(0.5)),
        psi_max: raw.psi_max.unwrap_or(360.0),
        strategy: raw.strategy.unwrap_or(CompensationStrategy::HalfHalf),
        perturbation: raw.perturbation,
        element: raw.element.unwrap_or_default(),
        resolution: raw.resolution.unwrap_or(0.01),
        span: raw.span.unwrap_or([-90.0, 90.0]),
        fov: raw.fov,
        theta_resolution: raw.theta_resolution.unwrap_or(1.0),
        phi_resolution: raw.phi_resolution.unwrap_or(1.0),
        plan: raw.plan,
        group_by: raw.group_by.unwrap_or_else(|| vec![Axis::PsiMax, Axis::Var, Axis::PD]),
        exports: raw.exports.unwrap_or_default(),
    };
    cfg.validate()?;
    Ok(cfg)
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        for (field, n) in [("n", self.n), ("n_z", self.n_z)] {
            if n % 2 == 0 {
                return Err(ConfigError::field(field, format!("{n} must be odd")));
            }
        }
        let positive = |field: &str, x: f64| {
            if x.is_finite() && x > 0.0 {
                Ok(())
            } else {
                Err(ConfigError::field(field, format!("{x} must be finite and > 0")))
            }
        };
        positive("pitch", self.pitch)?;
        positive("pitch_z", self.pitch_z)?;
        positive("resolution", self.resolution)?;
        positive("theta_resolution", self.theta_resolution)?;
        positive("phi_resolution", self.phi_resolution)?;
        if let Some(fov) = self.fov {
            positive("fov", fov)?;
        }
        if !(self.phi_s.is_finite() && (0.0..180.0).contains(&self.phi_s)) {
            return Err(ConfigError::field("phi_s", format!("{} must lie in [0, 180)", self.phi_s)));
        }
        PhaseLimitSpec::new(self.psi_max, self.strategy)
            .map_err(|_| ConfigError::field("psi_max", format!("{} must lie in (0, 360]", self.psi_max)))?;
        self.window.validate().map_err(|e| ConfigError::field("window", e))?;
        self.element.validate().map_err(|e| ConfigError::field("element", e))?;
        CutSpan {
            lo: self.span[0],
            hi: self.span[1],
        }
        .validate()
        .map_err(|e| ConfigError::field("span", e))?;
        if let Some(p) = &self.perturbation {
            positive("perturbation.p_d", p.p_d)?;
            if !(p.var.is_finite() && p.var >= 0.0) {
                return Err(ConfigError::field("perturbation.var", format!("{} must be finite and >= 0", p.var)));
            }
        }
        match (self.mode, &self.plan) {
            (Mode::Sweep, None) => return Err(ConfigError::field("plan", "sweep mode needs a plan")),
            (Mode::Sweep, Some(_)) => {}
            (_, Some(_)) => return Err(ConfigError::field("plan", "only valid in sweep mode")),
            _ => {}
        }
        let plan_steers = self.plan.as_ref().is_some_and(|p| p.theta_s.is_some() || p.m.is_some());
        match self.steering {
            None if !plan_steers => return Err(ConfigError::field("theta_s", "set theta_s or m")),
            _ => {}
        }
        self.steering_spec()?;
        if self.mode == Mode::Sweep {
            expand_plan(&self.base_scenario()?, self.plan.as_ref().expect("checked above")).map_err(|e| match e {
                SweepError::InvalidAxis { axis, value, reason } => {
                    ConfigError::field(&format!("plan.{axis}"), format!("{value}: {reason}"))
                }
                other => ConfigError::field("plan", other),
            })?;
        }
        Ok(())
    }

    pub fn array_spec(&self) -> Result<ArraySpec<f64>, ConfigError> {
        ArraySpec::new((self.n - 1) / 2, (self.n_z - 1) / 2, self.pitch, self.pitch_z)
            .map_err(|e| ConfigError::field("pitch", e))
    }

    /// The steering target; broadside in the configured plane when only a
    /// sweep plan sets the angle.
    pub fn steering_spec(&self) -> Result<SteeringSpec<f64>, ConfigError> {
        let theta = match self.steering {
            Some(SteeringInput::ThetaS(t)) => t,
            Some(SteeringInput::M(m)) => steering_from_m(m, self.pitch).map_err(|e| ConfigError::field("m", e))?,
            None => 0.0,
        };
        SteeringSpec::new(theta, self.phi_s).map_err(|e| ConfigError::field("theta_s", e))
    }

    pub fn base_scenario(&self) -> Result<Scenario<f64>, ConfigError> {
        Ok(Scenario {
            array: self.array_spec()?,
            steering: self.steering_spec()?,
            window: self.window,
            phase_limit: PhaseLimitSpec {
                psi_max: self.psi_max,
                strategy: self.strategy,
            },
            perturbation: self.perturbation,
            element: self.element.clone(),
            resolution: self.resolution,
            span: CutSpan {
                lo: self.span[0],
                hi: self.span[1],
            },
            fov: self.fov,
        })
    }

    fn to_raw(&self) -> RawConfig {
        let (theta_s, m) = match self.steering {
            Some(SteeringInput::ThetaS(t)) => (Some(t), None),
            Some(SteeringInput::M(m)) => (None, Some(m)),
            None => (None, None),
        };
        RawConfig {
            mode: self.mode,
            n: Some(self.n),
            n_z: Some(self.n_z),
            pitch: Some(self.pitch),
            pitch_z: Some(self.pitch_z),
            theta_s,
            m,
            phi_s: Some(self.phi_s),
            window: Some(self.window),
            psi_max: Some(self.psi_max),
            strategy: Some(self.strategy),
            perturbation: self.perturbation,
            element: Some(self.element.clone()),
            resolution: Some(self.resolution),
            span: Some(self.span),
            fov: self.fov,
            theta_resolution: Some(self.theta_resolution),
            phi_resolution: Some(self.phi_resolution),
            plan: self.plan.clone(),
            group_by: Some(self.group_by.clone()),
            exports: Some(self.exports),
        }
    }

    /// Every key written explicitly.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_raw()).expect("config serializes")
    }
}

/// `{:.16e}`: 17 significant digits, exact on re-parse.
pub fn format_real(x: f64) -> String {
    format!("{x:.16e}")
}

/// Fixed-point angle with at least two decimals, or the shortest round-trip
/// form when the sample grid is not decimal.
pub fn format_angle(x: f64, decimals: Option<u32>) -> String {
    match decimals {
        Some(k) => format!("{:.*}", k.max(2) as usize, x),
        None => format!("{x}"),
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), IoError> {
    fs::write(path, contents).map_err(io_err(path))
}

pub const CUT_HEADER: &str = "theta_s_deg,intensity";

pub fn cut_csv(cut: &PatternCut<f64>) -> String {
    let mut s = String::with_capacity(32 * (cut.len() + 1));
    s.push_str(CUT_HEADER);
    s.push('\n');
    for (a, v) in cut.samples() {
        let _ = writeln!(s, "{},{}", format_angle(a, cut.decimals), format_real(v));
    }
    s
}

pub fn emit_cut_csv(cut: &PatternCut<f64>, path: &Path) -> Result<(), IoError> {
    write_file(path, &cut_csv(cut))
}

/// Reads a CSV of numeric columns under an exact `header` line.
pub fn read_numeric_csv(path: &Path, header: &str) -> Result<Vec<Vec<f64>>, IoError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let csv_err = |line: usize, message: String| IoError::Csv {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == header => {}
        other => return Err(csv_err(1, format!("expected header '{header}', found {other:?}"))),
    }
    let width = header.split(',').count();
    lines
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, l)| {
            let row: Result<Vec<f64>, _> = l.split(',').map(str::parse::<f64>).collect();
            match row {
                Ok(r) if r.len() == width => Ok(r),
                Ok(r) => Err(csv_err(i + 2, format!("expected {width} fields, found {}", r.len()))),
                Err(e) => Err(csv_err(i + 2, e.to_string())),
            }
        })
        .collect()
}

/// Angles and intensities of an emitted cut.
pub fn read_cut_csv(path: &Path) -> Result<(Vec<f64>, Vec<f64>), IoError> {
    let rows = read_numeric_csv(path, CUT_HEADER)?;
    Ok(rows.into_iter().map(|r| (r[0], r[1])).unzip())
}

pub const PHASE_MAP_HEADER: &str = "p,q,amplitude,phase_deg";

pub fn emit_phase_map(grid: &PixelGrid<f64>, path: &Path) -> Result<(), IoError> {
    let mut s = String::from(PHASE_MAP_HEADER);
    s.push('\n');
    for (p, q, amp, phase) in grid.pixels() {
        let _ = writeln!(s, "{p},{q},{},{}", format_real(amp), format_real(phase.to_degrees()));
    }
    write_file(path, &s)
}

pub const PATTERN3D_HEADER: &str = "theta_deg,phi_deg,intensity";
pub const POINTS_HEADER: &str = "x,y,z";

/// Writes `<stem>.csv` (long format), `<stem>.json` (sidecar) and
/// `<stem>_points.csv` (intensity-scaled direction vectors, for plane
/// projections). Returns the paths written.
pub fn emit_pattern3d(
    p3d: &Pattern3D<f64>,
    steering: Option<&SteeringSpec<f64>>,
    dir: &Path,
    stem: &str,
) -> Result<Vec<PathBuf>, IoError> {
    let csv_path = dir.join(format!("{stem}.csv"));
    let mut s = String::from(PATTERN3D_HEADER);
    s.push('\n');
    for (i, &t) in p3d.theta.iter().enumerate() {
        for (j, &p) in p3d.phi.iter().enumerate() {
            let _ = writeln!(s, "{t},{p},{}", format_real(p3d.value(i, j)));
        }
    }
    write_file(&csv_path, &s)?;

    let points_path = dir.join(format!("{stem}_points.csv"));
    let proj = p3d.projections();
    let mut s = String::from(POINTS_HEADER);
    s.push('\n');
    for (xy, xz) in proj.xy.iter().zip(&proj.xz) {
        let _ = writeln!(s, "{},{},{}", format_real(xy[0]), format_real(xy[1]), format_real(xz[1]));
    }
    write_file(&points_path, &s)?;

    let json_path = dir.join(format!("{stem}.json"));
    let argmax = p3d.argmax().map(|(i, j, v)| {
        json!({"theta_deg": p3d.theta[i], "phi_deg": p3d.phi[j], "intensity": v})
    });
    let sidecar = json!({
        "data": csv_path.file_name().and_then(|n| n.to_str()),
        "points": points_path.file_name().and_then(|n| n.to_str()),
        "columns": ["theta_deg", "phi_deg", "intensity"],
        "layout": "theta-major",
        "coordinates": "theta from +z, phi from +x; array in the xz-plane, forward hemisphere y >= 0",
        "n_theta": p3d.theta.len(),
        "n_phi": p3d.phi.len(),
        "theta_resolution": p3d.theta_resolution,
        "phi_resolution": p3d.phi_resolution,
        "normalization": p3d.normalization,
        "steering": steering.map(|st| json!({"theta_s": st.theta_s, "phi_s": st.phi_s})),
        "max": argmax,
    });
    write_json(&json_path, &sidecar)?;
    Ok(vec![csv_path, json_path, points_path])
}

fn write_json(path: &Path, value: &Value) -> Result<(), IoError> {
    let text = serde_json::to_string_pretty(value).map_err(|source| IoError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    write_file(path, &text)
}

pub fn report_json(report: &LobeReport<f64>, excluded_scenarios: usize) -> Value {
    let main = report.main();
    json!({
        "steering": {"theta_s": report.steering.theta_s, "phi_s": report.steering.phi_s},
        "spr": report.spr,
        "fov_spr": report.fov_spr,
        "main": {
            "angle": main.angle,
            "intensity": main.intensity,
            "fwhm": report.main_lobe_fwhm,
            "angle_error": report.main_lobe_angle_error,
        },
        "lobes": report.lobes.iter().map(|l| json!({
            "angle": l.angle,
            "intensity": l.intensity,
            "kind": l.kind.name(),
            "order": l.kind.order(),
            "prediction_error": l.prediction_error,
        })).collect::<Vec<_>>(),
        "excluded_scenarios": excluded_scenarios,
    })
}

pub fn emit_report_json(report: &LobeReport<f64>, path: &Path) -> Result<(), IoError> {
    write_json(path, &report_json(report, 0))
}

pub const SWEEP_HEADER: &str = "id,psi_max,strategy,var,p_d,pitch,theta_s,window,spr,main_angle_error,status";

pub fn sweep_csv(results: &[SweepResult<f64>]) -> String {
    let mut s = String::from(SWEEP_HEADER);
    s.push('\n');
    for r in results {
        let axes: Vec<String> = Axis::ALL.iter().map(|a| a.value_of(&r.scenario)).collect();
        let (spr, err) = match &r.report {
            Some(rep) => (format_real(rep.spr), format_real(rep.main_lobe_angle_error)),
            None => (String::new(), String::new()),
        };
        let _ = writeln!(s, "{},{},{spr},{err},{}", r.id, axes.join(","), r.status.name());
    }
    s
}

/// Group table; the mean is left blank for groups with no successful scenario.
pub fn aggregate_csv(group_by: &[Axis], rows: &[PartialGroupRow<f64>]) -> String {
    let mut s: String = group_by.iter().map(|a| format!("{},", a.name())).collect();
    s.push_str("avg_spr,count,excluded\n");
    for row in rows {
        for (_, v) in &row.key {
            s.push_str(v);
            s.push(',');
        }
        let avg = row.avg_spr.map(format_real).unwrap_or_default();
        let _ = writeln!(s, "{avg},{},{}", row.count, row.excluded);
    }
    s
}

/// Anything that can stop a run.
#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Sweep(#[from] SweepError),
    #[error("config mode '{config}' does not match command '{command}'")]
    ModeMismatch { config: &'static str, command: &'static str },
}

impl RunError {
    /// Machine-readable form for stderr.
    pub fn to_json(&self) -> Value {
        match self {
            RunError::Config(c) => c.to_json(),
            RunError::Io(e) => json!({"error": "io", "message": e.to_string()}),
            RunError::Scenario(ScenarioError::Lobe(LobeError::Missteer { target, observed, ratio })) => json!({
                "error": "missteer",
                "target": target,
                "observed": observed,
                "ratio": ratio,
                "message": self.to_string(),
            }),
            RunError::Scenario(e) => json!({"error": "scenario", "message": e.to_string()}),
            RunError::Sweep(e) => json!({"error": "sweep", "message": e.to_string()}),
            RunError::ModeMismatch { .. } => json!({"error": "validation", "field": "mode", "message": self.to_string()}),
        }
    }

    /// Process exit code: 2 for invalid input, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) | RunError::ModeMismatch { .. } => 2,
            _ => 1,
        }
    }
}

/// Files written and a short machine-readable summary.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub files: Vec<PathBuf>,
    pub summary: Value,
}

/// Executes `config` in mode `mode`, writing outputs under `out`.
pub fn run(mode: Mode, config: &RunConfig, out: &Path, workers: usize) -> Result<RunSummary, RunError> {
    if mode != config.mode {
        return Err(RunError::ModeMismatch {
            config: config.mode.name(),
            command: mode.name(),
        });
    }
    fs::create_dir_all(out).map_err(io_err(out)).map_err(RunError::Io)?;
    let scenario = config.base_scenario()?;
    let mut files = Vec::new();
    let summary = match mode {
        Mode::Cut => {
            let grid = scenario.synthesize().map_err(ScenarioError::from)?;
            let cut = scenario.cut(&grid).map_err(ScenarioError::from)?;
            let path = out.join("cut.csv");
            emit_cut_csv(&cut, &path)?;
            files.push(path);
            if config.exports.phase_map {
                let path = out.join("phase_map.csv");
                emit_phase_map(&grid, &path)?;
                files.push(path);
            }
            let (i, v) = cut.argmax().expect("nonempty cut");
            json!({"mode": "cut", "samples": cut.len(), "max": {"theta_s": cut.angles[i], "intensity": v}})
        }
        Mode::Pattern3d => {
            let grid = scenario.synthesize().map_err(ScenarioError::from)?;
            let p3d = compute_3d(&grid, &scenario.element, config.theta_resolution, config.phi_resolution)
                .map_err(ScenarioError::from)?;
            files.extend(emit_pattern3d(&p3d, Some(&scenario.steering), out, "pattern3d")?);
            if config.exports.phase_map {
                let path = out.join("phase_map.csv");
                emit_phase_map(&grid, &path)?;
                files.push(path);
            }
            let (i, j, v) = p3d.argmax().expect("nonempty pattern");
            json!({"mode": "pattern3d", "max": {"theta_deg": p3d.theta[i], "phi_deg": p3d.phi[j], "intensity": v}})
        }
        Mode::Analyze => {
            let eval = scenario.evaluate_full()?;
            if config.exports.raw_cut {
                let path = out.join("cut.csv");
                emit_cut_csv(&eval.cut, &path)?;
                files.push(path);
            }
            if config.exports.phase_map {
                let path = out.join("phase_map.csv");
                emit_phase_map(&eval.grid, &path)?;
                files.push(path);
            }
            let report = eval.report.map_err(ScenarioError::from)?;
            if config.exports.report {
                let path = out.join("report.json");
                emit_report_json(&report, &path)?;
                files.push(path);
            }
            json!({
                "mode": "analyze",
                "spr": report.spr,
                "main_angle": report.main().angle,
                "lobes": report.lobes.len(),
            })
        }
        Mode::Sweep => {
            let plan = expand_plan(&scenario, config.plan.as_ref().expect("validated"))?;
            let results = run_sweep(&plan, workers)?;
            let path = out.join("sweep.csv");
            write_file(&path, &sweep_csv(&results))?;
            files.push(path);
            if config.exports.reports_archive {
                let path = out.join("reports.json");
                let archive: Vec<Value> = results
                    .iter()
                    .map(|r| {
                        json!({
                            "id": r.id,
                            "status": r.status.name(),
                            "message": r.message,
                            "window": window_label(&r.scenario.window),
                            "report": r.report.as_ref().map(|rep| report_json(rep, 0)),
                        })
                    })
                    .collect();
                write_json(&path, &Value::Array(archive))?;
                files.push(path);
            }
            let rows = aggregate_partial(&results, &config.group_by);
            let path = out.join("sweep_summary.csv");
            write_file(&path, &aggregate_csv(&config.group_by, &rows))?;
            files.push(path);
            let count = |s| results.iter().filter(|r| r.status == s).count();
            json!({
                "mode": "sweep",
                "scenarios": results.len(),
                "ok": count(crate::sweep::SweepStatus::Ok),
                "missteer": count(crate::sweep::SweepStatus::Missteer),
                "infeasible": count(crate::sweep::SweepStatus::Infeasible),
                "groups": rows.len(),
                "empty_groups": rows.iter().filter(|r| r.avg_spr.is_none()).count(),
            })
        }
    };
    Ok(RunSummary { files, summary })
}

/// Reads and parses a config file.
pub fn load_config(path: &Path) -> Result<RunConfig, RunError> {
    let text = fs::read_to_string(path).map_err(io_err(path)).map_err(RunError::Io)?;
    Ok(parse_config(&text)?)
}

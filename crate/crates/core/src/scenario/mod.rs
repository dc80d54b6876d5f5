//! Scenario documents, the figure preset registry, batch execution and
//! result comparison.
//!
//! A scenario is a JSON document. It either spells out every parameter group
//! or names a preset and overrides part of it:
//!
//! ```json
//! { "preset": "fig8", "time": { "t_end": 1.0 } }
//! ```
//!
//! Parsing fills defaults; [`dump`] echoes the normalized document, which
//! parses back to an identical [`Scenario`].

mod analysis;
mod compare;
mod presets;
mod run;
mod svg;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::error::{ParamError, PotentialError, SuperpositionError, TdseError, TrajectoryError};
use crate::integrator::IntegratorConfig;
use crate::superposition::Superposition;
use crate::tdse::{Boundary, StencilOrder, EDGE_AMPLITUDE_TOL};
use crate::trajectory::{BoundaryRule, SamplingStrategy};
use crate::wavepacket::{GaussianPacket, UnitSystem};

pub use analysis::{extrema, peak_offsets, Extremum, ExtremumKind, PeakComparison};
pub use compare::{compare_runs, load_bundle, CompareReport, Metric, RegionBreakdown};
pub use presets::{preset, preset_names, presets};
pub use run::{
    run_scenario, write_outputs, Analysis, BoundarySummary, DensityTable, FringeMetrics, InterferenceWindow,
    LineFit, NonCrossingSummary, ResultBundle, RunOutput, SeparatrixSummary, SinglePacketSummary, SlopeSummary,
    WallMetrics, XminSummary,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    AnalyticSuperposition,
    WallScattering,
    WellWallScattering,
    DynamicPotentialScattering,
}

impl Mode {
    pub fn uses_grid(self) -> bool {
        self != Mode::AnalyticSuperposition
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PacketSpec {
    pub x0: f64,
    pub p0: f64,
    pub sigma0: f64,
}

impl PacketSpec {
    pub fn packet(&self, units: UnitSystem) -> GaussianPacket {
        GaussianPacket {
            x0: self.x0,
            p0: self.p0,
            sigma0: self.sigma0,
            units,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSpec {
    pub t_end: f64,
    /// Number of output times, including `0` and `t_end`.
    #[serde(default = "default_samples")]
    pub samples: usize,
}

fn default_samples() -> usize {
    201
}

/// Grid overrides for the wave-function modes. Unset values follow the
/// packet-based defaults (`dx = sigma0/40`, `dt = 2e-4 tau`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSpec {
    pub dx: Option<f64>,
    pub dt: Option<f64>,
    pub x_lo: Option<f64>,
    pub boundary: Boundary,
    pub stencil: StencilOrder,
    /// Largest packet amplitude tolerated at the grid edges at `t = 0`.
    pub edge_tolerance: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            dx: None,
            dt: None,
            x_lo: None,
            boundary: Boundary::Dirichlet,
            stencil: StencilOrder::default(),
            edge_tolerance: EDGE_AMPLITUDE_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DensitySpec {
    /// Snapshot times written to the density table.
    pub times: Vec<f64>,
    /// Points per analytic profile (grid modes use the grid itself).
    pub points: usize,
    pub range: Option<[f64; 2]>,
}

impl Default for DensitySpec {
    fn default() -> Self {
        Self {
            times: Vec::new(),
            points: 801,
            range: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisSpec {
    /// Boundary used for transfer counting; `None` picks the analytic line
    /// when the pair has one and the centroid midpoint otherwise.
    pub boundary_rule: Option<BoundaryRule>,
    /// Counting time (defaults to `t_end`).
    pub transfer_time: Option<f64>,
    /// Fit window for the drift of the gap between the two swarms.
    pub gap_window: Option<[f64; 2]>,
    /// Fit window for the dividing trajectory launched at the probability
    /// split between the packets.
    pub separatrix_window: Option<[f64; 2]>,
    /// Fit window for asymptotic slopes and their clustering.
    pub slope_window: Option<[f64; 2]>,
    pub slope_orders: i32,
    /// Also integrate packet-1 starts through packet 1 alone.
    pub single_packet_reference: bool,
    /// Time of the peak comparison in the wall modes.
    pub compare_time: Option<f64>,
    /// Propagation velocities for tabulated first-minimum curves.
    pub xmin_velocities: Vec<f64>,
    pub noncrossing_tol: f64,
}

impl Default for AnalysisSpec {
    fn default() -> Self {
        Self {
            boundary_rule: None,
            transfer_time: None,
            gap_window: None,
            separatrix_window: None,
            slope_window: None,
            slope_orders: 2,
            single_packet_reference: false,
            compare_time: None,
            xmin_velocities: Vec::new(),
            noncrossing_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Outputs {
    pub trajectories: bool,
    pub density: bool,
    pub analysis: bool,
    pub plots: bool,
    pub potential: bool,
    pub snapshots_binary: bool,
}

impl Default for Outputs {
    fn default() -> Self {
        Self {
            trajectories: true,
            density: true,
            analysis: true,
            plots: true,
            potential: true,
            snapshots_binary: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub mode: Mode,
    #[serde(default)]
    pub units: UnitSystem,
    /// Two packets for the analytic mode; the single incoming packet (left
    /// of the wall at `x = 0`) for the wave-function modes.
    pub packets: Vec<PacketSpec>,
    #[serde(default = "one")]
    pub alpha: f64,
    #[serde(default = "yes")]
    pub normalized_packets: bool,
    /// Bound-state index in the well depth relation (`1` by default).
    #[serde(default = "one")]
    pub well_n: f64,
    #[serde(default)]
    pub sampling: SamplingStrategy,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    #[serde(default)]
    pub grid: GridSpec,
    pub time: TimeSpec,
    #[serde(default)]
    pub density: DensitySpec,
    #[serde(default)]
    pub analysis: AnalysisSpec,
    #[serde(default)]
    pub outputs: Outputs,
}

fn one() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToleranceProfile {
    Fast,
    Strict,
}

impl std::str::FromStr for ToleranceProfile {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "fast" => Ok(Self::Fast),
            "strict" => Ok(Self::Strict),
            other => Err(format!("unknown tolerance profile `{other}` (expected fast or strict)")),
        }
    }
}

#[derive(Debug, Error)]
pub enum NumericalError {
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
    #[error(transparent)]
    Tdse(#[from] TdseError),
    #[error(transparent)]
    Superposition(#[from] SuperpositionError),
    #[error(transparent)]
    Potential(#[from] PotentialError),
}

impl NumericalError {
    fn is_parameter_error(&self) -> bool {
        matches!(
            self,
            NumericalError::Trajectory(TrajectoryError::Param(_))
                | NumericalError::Tdse(TdseError::Param(_))
                | NumericalError::Superposition(SuperpositionError::Param(_))
                | NumericalError::Potential(PotentialError::Param(_))
        )
    }
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("parse error{}: {message}", position(*.line, *.column))]
    Parse {
        line: Option<usize>,
        column: Option<usize>,
        message: String,
    },
    #[error("invalid value for `{field}`: {message}")]
    Validation { field: String, message: String },
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error("incompatible sampling: {0}")]
    IncompatibleSampling(String),
    #[error("scenario `{scenario}` ({stage}): {source}")]
    Numerical {
        scenario: String,
        stage: &'static str,
        #[source]
        source: NumericalError,
    },
    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn position(line: Option<usize>, column: Option<usize>) -> String {
    match (line, column) {
        (Some(l), Some(c)) => format!(" at line {l}, column {c}"),
        (Some(l), None) => format!(" at line {l}"),
        _ => String::new(),
    }
}

impl From<ParamError> for ScenarioError {
    fn from(e: ParamError) -> Self {
        ScenarioError::Validation {
            field: e.field,
            message: e.message,
        }
    }
}

impl ScenarioError {
    /// Process exit status: 2 for invalid input, 3 for numerical failure,
    /// 1 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            ScenarioError::Parse { .. }
            | ScenarioError::Validation { .. }
            | ScenarioError::UnknownPreset(_)
            | ScenarioError::IncompatibleSampling(_) => 2,
            ScenarioError::Numerical { source, .. } if source.is_parameter_error() => 2,
            ScenarioError::Numerical { .. } => 3,
            ScenarioError::Io { .. } => 1,
        }
    }

    pub(crate) fn numerical(scenario: &str, stage: &'static str, source: impl Into<NumericalError>) -> Self {
        ScenarioError::Numerical {
            scenario: scenario.to_string(),
            stage,
            source: source.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        ScenarioError::Io {
            path: path.into(),
            source,
        }
    }
}

fn json_error(e: serde_json::Error, positioned: bool) -> ScenarioError {
    ScenarioError::Parse {
        line: positioned.then(|| e.line()),
        column: positioned.then(|| e.column()),
        message: strip_position(&e.to_string()),
    }
}

fn strip_position(msg: &str) -> String {
    match msg.rfind(" at line ") {
        Some(i) => msg[..i].to_string(),
        None => msg.to_string(),
    }
}

fn merge(base: &mut Value, overrides: Value) {
    match (base, overrides) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Parses and validates a scenario document.
pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let value: Value = serde_json::from_str(text).map_err(|e| json_error(e, true))?;
    let scenario = match value.get("preset") {
        Some(Value::String(name)) => {
            let base = preset(name).ok_or_else(|| ScenarioError::UnknownPreset(name.clone()))?;
            let mut doc = serde_json::to_value(&base).expect("scenario serializes");
            let mut overrides = value;
            if let Value::Object(map) = &mut overrides {
                map.remove("preset");
            }
            merge(&mut doc, overrides);
            serde_json::from_value::<Scenario>(doc).map_err(|e| json_error(e, false))?
        }
        Some(_) => {
            return Err(ScenarioError::Validation {
                field: "preset".into(),
                message: "must be a preset name".into(),
            })
        }
        None => serde_json::from_str::<Scenario>(text).map_err(|e| json_error(e, true))?,
    };
    scenario.validate()?;
    Ok(scenario)
}

/// Normalized document with every default spelled out.
pub fn dump(scenario: &Scenario) -> String {
    let mut s = serde_json::to_string_pretty(scenario).expect("scenario serializes");
    s.push('\n');
    s
}

fn check(ok: bool, field: impl Into<String>, message: &str) -> Result<(), ParamError> {
    if ok {
        Ok(())
    } else {
        Err(ParamError::new(field, message))
    }
}

fn check_window(w: Option<[f64; 2]>, field: &str) -> Result<(), ParamError> {
    if let Some([a, b]) = w {
        check(a.is_finite() && b.is_finite() && a < b, field, "must be an increasing pair of finite times")?;
    }
    Ok(())
}

impl Scenario {
    pub fn validate(&self) -> Result<(), ParamError> {
        check(!self.name.trim().is_empty(), "name", "must not be empty")?;
        check(
            self.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-'),
            "name",
            "may only contain ASCII letters, digits, '_' and '-'",
        )?;
        self.units.validate()?;
        let expected = if self.mode.uses_grid() { 1 } else { 2 };
        check(
            self.packets.len() == expected,
            "packets",
            if expected == 1 {
                "this mode takes exactly one packet"
            } else {
                "this mode takes exactly two packets"
            },
        )?;
        for (i, p) in self.packets.iter().enumerate() {
            check(p.x0.is_finite(), format!("packets[{i}].x0"), "must be finite")?;
            check(p.p0.is_finite(), format!("packets[{i}].p0"), "must be finite")?;
            check(p.sigma0.is_finite() && p.sigma0 > 0.0, format!("packets[{i}].sigma0"), "must be finite and > 0")?;
        }
        check(self.alpha.is_finite() && self.alpha > 0.0, "alpha", "must be finite and > 0")?;
        check(self.well_n.is_finite() && self.well_n > 0.0, "well_n", "must be finite and > 0")?;
        check(self.time.t_end.is_finite() && self.time.t_end > 0.0, "time.t_end", "must be finite and > 0")?;
        check(self.time.samples >= 2, "time.samples", "must be >= 2")?;
        self.sampling.validate()?;
        self.integrator.validate()?;
        for (i, &t) in self.density.times.iter().enumerate() {
            check(
                t.is_finite() && (0.0..=self.time.t_end).contains(&t),
                format!("density.times[{i}]"),
                "must lie within [0, t_end]",
            )?;
        }
        check(self.density.points >= 2, "density.points", "must be >= 2")?;
        if let Some([a, b]) = self.density.range {
            check(a.is_finite() && b.is_finite() && a < b, "density.range", "must be an increasing pair")?;
        }
        check_window(self.analysis.gap_window, "analysis.gap_window")?;
        check_window(self.analysis.separatrix_window, "analysis.separatrix_window")?;
        check_window(self.analysis.slope_window, "analysis.slope_window")?;
        check(
            (0..=50).contains(&self.analysis.slope_orders),
            "analysis.slope_orders",
            "must lie in 0..=50",
        )?;
        if let Some(t) = self.analysis.transfer_time {
            check(
                t.is_finite() && (0.0..=self.time.t_end).contains(&t),
                "analysis.transfer_time",
                "must lie within [0, t_end]",
            )?;
        }
        if let Some(t) = self.analysis.compare_time {
            check(
                t.is_finite() && (0.0..=self.time.t_end).contains(&t),
                "analysis.compare_time",
                "must lie within [0, t_end]",
            )?;
        }
        for (i, &v) in self.analysis.xmin_velocities.iter().enumerate() {
            check(v.is_finite() && v >= 0.0, format!("analysis.xmin_velocities[{i}]"), "must be finite and >= 0")?;
        }
        check(
            self.analysis.noncrossing_tol.is_finite() && self.analysis.noncrossing_tol >= 0.0,
            "analysis.noncrossing_tol",
            "must be finite and >= 0",
        )?;
        for (name, v) in [("grid.dx", self.grid.dx), ("grid.dt", self.grid.dt)] {
            if let Some(v) = v {
                check(v.is_finite() && v > 0.0, name, "must be finite and > 0")?;
            }
        }
        if let Some(x) = self.grid.x_lo {
            check(x.is_finite() && x < 0.0, "grid.x_lo", "must be finite and left of the wall at x = 0")?;
        }
        check(
            self.grid.edge_tolerance > 0.0 && self.grid.edge_tolerance <= 1.0,
            "grid.edge_tolerance",
            "must lie in (0, 1]",
        )?;
        if self.mode.uses_grid() {
            let p = &self.packets[0];
            check(p.x0 < 0.0, "packets[0].x0", "the packet must start left of the wall at x = 0")?;
            check(p.p0 >= 0.0, "packets[0].p0", "the packet must move toward the wall")?;
            if self.mode == Mode::WellWallScattering {
                check(p.p0 > 0.0, "packets[0].p0", "the static well needs a positive momentum")?;
            }
        } else {
            self.superposition().map_err(|e| match e {
                SuperpositionError::Param(p) => p,
                other => ParamError::new("packets", other.to_string()),
            })?;
        }
        Ok(())
    }

    pub fn superposition(&self) -> Result<Superposition, SuperpositionError> {
        let a = self.packets[0].packet(self.units);
        let b = self.packets[1].packet(self.units);
        let mut s = Superposition::from_alpha(a, b, self.alpha)?;
        s.normalized_packets = self.normalized_packets;
        Ok(s)
    }

    /// Integrator tolerances replaced by a named profile.
    pub fn with_profile(mut self, profile: ToleranceProfile) -> Self {
        let (rel, abs) = match profile {
            ToleranceProfile::Fast => (1e-6, 1e-8),
            ToleranceProfile::Strict => (1e-10, 1e-12),
        };
        let scale = self.packets.iter().map(|p| p.sigma0).fold(f64::INFINITY, f64::min);
        self.integrator.rel_tol = rel;
        self.integrator.abs_tol = abs * if scale.is_finite() { scale } else { 1.0 };
        self
    }
}

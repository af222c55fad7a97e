//! Flat-file configuration, dispatch, and output writers for the
//! command-line frontend.
//!
//! The configuration grammar is one `key = value` per line, `#` comments,
//! case-sensitive lower-snake keys, and unit suffixes on physical
//! quantities. Unknown keys and wrong units are errors carrying the line
//! number. Values are validated and converted at parse time; the canonical
//! serialization round-trips bit-exactly.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::physics::{
    angular, cyclic, trap_shift, BetaConvention, BlockedBranchModel, Order2Coeff, PhysicalParams,
    PhysicsError, ATOMIC_MASS, HBAR,
};
use crate::propagate::PropagateError;
use crate::protocol::{
    BlockadeModel, GateOptions, GateReport, ProtocolError, PulseTarget, Step2Duration,
    LOGICAL_LABELS,
};
use crate::sweep::{
    amplitude_traces, provenance_lines, run_sweep, SweepError, SweepResult, SweepSpec,
    SweepVariable, TraceResult,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Gate,
    SweepShift,
    SweepFidelity,
    Traces,
    Check,
}

impl Mode {
    pub fn parse(s: &str) -> Option<Mode> {
        match s {
            "gate" => Some(Mode::Gate),
            "sweep-shift" => Some(Mode::SweepShift),
            "sweep-fidelity" => Some(Mode::SweepFidelity),
            "traces" => Some(Mode::Traces),
            "check" => Some(Mode::Check),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Mode::Gate => "gate",
            Mode::SweepShift => "sweep-shift",
            Mode::SweepFidelity => "sweep-fidelity",
            Mode::Traces => "traces",
            Mode::Check => "check",
        }
    }
}

/// Two-photon detuning: either tied to the light-shift resonance
/// δ_r = V⁰/ħ at the working separation, or an explicit value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DeltaR {
    Auto,
    Mhz(f64),
}

/// Fully validated run configuration in canonical human units (MHz, μm,
/// μs, a.u.). SI conversion happens in [`RunConfig::resolve`].
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    pub mass_u: f64,
    pub omega_i_mhz: f64,
    pub omega_01_mhz: f64,
    pub c4_base_au: f64,
    pub c4_scale: f64,
    pub x_a_um: f64,
    pub eta: f64,
    pub rabi_i_mhz: f64,
    pub omega_a_mhz: f64,
    pub delta_r: DeltaR,
    pub phi_rad: f64,
    pub n_cutoff: usize,
    pub rydberg_lifetime_us: f64,
    pub expansion_order2_coeff: Order2Coeff,
    pub beta_convention: BetaConvention,
    pub step2_duration_mode: Step2Duration,
    pub step2_model: BlockedBranchModel,
    pub blockade: BlockadeModel,
    pub phase_search: bool,
    pub step_scale: f64,
    pub norm_tolerance: f64,
    pub out: PathBuf,
    pub dist_min_um: f64,
    pub dist_max_um: f64,
    pub dist_points: usize,
    pub omega_a_grid_ghz: Vec<f64>,
    pub trace_initial: String,
    pub trace_samples: usize,
}

impl Default for RunConfig {
    /// The published reference parameter set: Rb (n = 90) + Be⁺ with the
    /// trap at 2π × 11.2 MHz, separation 2.57 μm, η = 0.1, Ωᵢ = 2π × 1 MHz,
    /// Ω_a = 2π × 1 GHz.
    fn default() -> Self {
        Self {
            mode: Mode::Gate,
            mass_u: 9.0,
            omega_i_mhz: 11.2,
            omega_01_mhz: 0.0,
            c4_base_au: -160.0,
            c4_scale: 5.07e10,
            x_a_um: 2.57,
            eta: 0.1,
            rabi_i_mhz: 1.0,
            omega_a_mhz: 1000.0,
            delta_r: DeltaR::Auto,
            phi_rad: 0.0,
            n_cutoff: 10,
            rydberg_lifetime_us: 100.0,
            expansion_order2_coeff: Order2Coeff::Paper,
            beta_convention: BetaConvention::Paper,
            step2_duration_mode: Step2Duration::FullTransfer,
            step2_model: BlockedBranchModel::PaperEffective,
            blockade: BlockadeModel::FromTrapShift,
            phase_search: false,
            step_scale: 1.0,
            norm_tolerance: 1e-9,
            out: PathBuf::from("out"),
            dist_min_um: 1.5,
            dist_max_um: 5.0,
            dist_points: 200,
            omega_a_grid_ghz: vec![0.25, 0.5, 1.0, 1.5, 2.0],
            trace_initial: "00".to_string(),
            trace_samples: 300,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    At { line: usize, message: String },
    #[error("{message}")]
    General { message: String },
}

impl ConfigError {
    fn at(line: usize, message: impl Into<String>) -> Self {
        ConfigError::At { line, message: message.into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Dimension {
    Frequency, // canonical MHz
    Length,    // canonical um
    Time,      // canonical us
    C4Base,    // canonical a.u.
    Angle,     // canonical rad
    Plain,
}

/// Split "3.5 MHz" (or "3.5MHz", "1e-9") into the number and an optional
/// unit token: the unit is the longest alphabetic suffix, which keeps
/// scientific-notation exponents out of it.
fn split_unit(value: &str) -> Result<(f64, Option<&str>), String> {
    let value = value.trim();
    let tail_start = value
        .char_indices()
        .rev()
        .take_while(|(_, c)| c.is_ascii_alphabetic())
        .last()
        .map(|(i, _)| i)
        .unwrap_or(value.len());
    let (num_str, unit) = (value[..tail_start].trim(), value[tail_start..].trim());
    if num_str.is_empty() {
        return Err(format!("missing numeric value in '{value}'"));
    }
    let num: f64 = num_str.parse().map_err(|_| format!("malformed number '{num_str}'"))?;
    Ok((num, if unit.is_empty() { None } else { Some(unit) }))
}

fn convert(num: f64, unit: Option<&str>, dim: Dimension, key: &str) -> Result<f64, String> {
    match dim {
        Dimension::Frequency => match unit {
            Some("Hz") => Ok(num * 1e-6),
            Some("kHz") => Ok(num * 1e-3),
            Some("MHz") => Ok(num),
            Some("GHz") => Ok(num * 1e3),
            None => Err(format!("key '{key}' needs a frequency unit (Hz|kHz|MHz|GHz)")),
            Some(u) => Err(format!("key '{key}' expects a frequency unit, got '{u}'")),
        },
        Dimension::Length => match unit {
            Some("nm") => Ok(num * 1e-3),
            Some("um") => Ok(num),
            Some("m") => Ok(num * 1e6),
            None => Err(format!("key '{key}' needs a length unit (nm|um|m)")),
            Some(u) => Err(format!("key '{key}' expects a length unit, got '{u}'")),
        },
        Dimension::Time => match unit {
            Some("ns") => Ok(num * 1e-3),
            Some("us") => Ok(num),
            Some("ms") => Ok(num * 1e3),
            Some("s") => Ok(num * 1e6),
            None => Err(format!("key '{key}' needs a time unit (ns|us|ms|s)")),
            Some(u) => Err(format!("key '{key}' expects a time unit, got '{u}'")),
        },
        Dimension::C4Base => match unit {
            Some("au") | None => Ok(num),
            Some(u) => Err(format!("key '{key}' expects atomic units 'au', got '{u}'")),
        },
        Dimension::Angle => match unit {
            Some("rad") | None => Ok(num),
            Some(u) => Err(format!("key '{key}' expects radians, got '{u}'")),
        },
        Dimension::Plain => match unit {
            None => Ok(num),
            Some(u) => Err(format!("key '{key}' is dimensionless, got unit '{u}'")),
        },
    }
}

fn parse_bool(value: &str, key: &str) -> Result<bool, String> {
    match value {
        "on" | "true" => Ok(true),
        "off" | "false" => Ok(false),
        other => Err(format!("key '{key}' expects on|off, got '{other}'")),
    }
}

fn parse_usize(value: &str, key: &str) -> Result<usize, String> {
    value
        .trim()
        .parse()
        .map_err(|_| format!("key '{key}' expects a positive integer, got '{value}'"))
}

impl RunConfig {
    fn apply(&mut self, key: &str, value: &str) -> Result<(), String> {
        let quantity =
            |dim: Dimension| split_unit(value).and_then(|(n, u)| convert(n, u, dim, key));
        match key {
            "mode" => {
                self.mode = Mode::parse(value)
                    .ok_or_else(|| format!("unknown mode '{value}'"))?;
            }
            "mass_u" => self.mass_u = quantity(Dimension::Plain)?,
            "omega_i" => self.omega_i_mhz = quantity(Dimension::Frequency)?,
            "omega_01" => self.omega_01_mhz = quantity(Dimension::Frequency)?,
            "c4_base" => self.c4_base_au = quantity(Dimension::C4Base)?,
            "c4_scale" => self.c4_scale = quantity(Dimension::Plain)?,
            "x_a" => self.x_a_um = quantity(Dimension::Length)?,
            "eta" => self.eta = quantity(Dimension::Plain)?,
            "rabi_i" => self.rabi_i_mhz = quantity(Dimension::Frequency)?,
            "omega_a" => self.omega_a_mhz = quantity(Dimension::Frequency)?,
            "delta_r" => {
                self.delta_r = if value == "auto" {
                    DeltaR::Auto
                } else {
                    DeltaR::Mhz(quantity(Dimension::Frequency)?)
                };
            }
            "phi" => self.phi_rad = quantity(Dimension::Angle)?,
            "n_cutoff" => self.n_cutoff = parse_usize(value, key)?,
            "rydberg_lifetime" => self.rydberg_lifetime_us = quantity(Dimension::Time)?,
            "expansion_order2_coeff" => {
                self.expansion_order2_coeff = match value {
                    "paper" => Order2Coeff::Paper,
                    "taylor" => Order2Coeff::Taylor,
                    other => return Err(format!("key '{key}' expects paper|taylor, got '{other}'")),
                };
            }
            "beta_convention" => {
                self.beta_convention = match value {
                    "paper" => BetaConvention::Paper,
                    "substituted" => BetaConvention::Substituted,
                    other => {
                        return Err(format!("key '{key}' expects paper|substituted, got '{other}'"))
                    }
                };
            }
            "step2_duration_mode" => {
                self.step2_duration_mode = match value {
                    "full_transfer" => Step2Duration::FullTransfer,
                    "literal" => Step2Duration::Literal,
                    other => {
                        return Err(format!(
                            "key '{key}' expects full_transfer|literal, got '{other}'"
                        ))
                    }
                };
            }
            "step2_model" => {
                self.step2_model = match value {
                    "paper" => BlockedBranchModel::PaperEffective,
                    "microscopic" => BlockedBranchModel::Microscopic,
                    other => {
                        return Err(format!("key '{key}' expects paper|microscopic, got '{other}'"))
                    }
                };
            }
            "blockade" => {
                self.blockade = match value {
                    "trap_shift" => BlockadeModel::FromTrapShift,
                    "disabled" => BlockadeModel::Disabled,
                    other => {
                        return Err(format!("key '{key}' expects trap_shift|disabled, got '{other}'"))
                    }
                };
            }
            "phase_search" => self.phase_search = parse_bool(value, key)?,
            "step_scale" => self.step_scale = quantity(Dimension::Plain)?,
            "norm_tolerance" => self.norm_tolerance = quantity(Dimension::Plain)?,
            "out" => self.out = PathBuf::from(value),
            "dist_min" => self.dist_min_um = quantity(Dimension::Length)?,
            "dist_max" => self.dist_max_um = quantity(Dimension::Length)?,
            "dist_points" => self.dist_points = parse_usize(value, key)?,
            "omega_a_grid" => {
                // Comma-separated numbers with one shared unit at the end.
                let (last, unit) = split_unit(
                    value
                        .rsplit(',')
                        .next()
                        .ok_or_else(|| format!("key '{key}' expects a list of frequencies"))?,
                )?;
                let unit = unit
                    .ok_or_else(|| format!("key '{key}' needs a frequency unit on the last entry"))?;
                let mut grid = Vec::new();
                let entries: Vec<&str> = value.split(',').collect();
                for entry in &entries[..entries.len() - 1] {
                    let v: f64 = entry
                        .trim()
                        .parse()
                        .map_err(|_| format!("malformed number '{}' in '{key}'", entry.trim()))?;
                    grid.push(convert(v, Some(unit), Dimension::Frequency, key)? / 1e3);
                }
                grid.push(convert(last, Some(unit), Dimension::Frequency, key)? / 1e3);
                self.omega_a_grid_ghz = grid;
            }
            "trace_initial" => {
                if !LOGICAL_LABELS.contains(&value) {
                    return Err(format!("key '{key}' expects one of 00|01|10|11, got '{value}'"));
                }
                self.trace_initial = value.to_string();
            }
            "trace_samples" => self.trace_samples = parse_usize(value, key)?,
            unknown => return Err(format!("unknown key '{unknown}'")),
        }
        Ok(())
    }

    /// Canonical serialization; parsing it back yields an identical config.
    pub fn to_config_string(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "mode = {}", self.mode.name());
        let _ = writeln!(s, "mass_u = {:?}", self.mass_u);
        let _ = writeln!(s, "omega_i = {:?} MHz", self.omega_i_mhz);
        let _ = writeln!(s, "omega_01 = {:?} MHz", self.omega_01_mhz);
        let _ = writeln!(s, "c4_base = {:?} au", self.c4_base_au);
        let _ = writeln!(s, "c4_scale = {:?}", self.c4_scale);
        let _ = writeln!(s, "x_a = {:?} um", self.x_a_um);
        let _ = writeln!(s, "eta = {:?}", self.eta);
        let _ = writeln!(s, "rabi_i = {:?} MHz", self.rabi_i_mhz);
        let _ = writeln!(s, "omega_a = {:?} MHz", self.omega_a_mhz);
        match self.delta_r {
            DeltaR::Auto => {
                let _ = writeln!(s, "delta_r = auto");
            }
            DeltaR::Mhz(v) => {
                let _ = writeln!(s, "delta_r = {v:?} MHz");
            }
        }
        let _ = writeln!(s, "phi = {:?} rad", self.phi_rad);
        let _ = writeln!(s, "n_cutoff = {}", self.n_cutoff);
        let _ = writeln!(s, "rydberg_lifetime = {:?} us", self.rydberg_lifetime_us);
        let _ = writeln!(
            s,
            "expansion_order2_coeff = {}",
            match self.expansion_order2_coeff {
                Order2Coeff::Paper => "paper",
                Order2Coeff::Taylor => "taylor",
            }
        );
        let _ = writeln!(
            s,
            "beta_convention = {}",
            match self.beta_convention {
                BetaConvention::Paper => "paper",
                BetaConvention::Substituted => "substituted",
            }
        );
        let _ = writeln!(
            s,
            "step2_duration_mode = {}",
            match self.step2_duration_mode {
                Step2Duration::FullTransfer => "full_transfer",
                Step2Duration::Literal => "literal",
            }
        );
        let _ = writeln!(
            s,
            "step2_model = {}",
            match self.step2_model {
                BlockedBranchModel::PaperEffective => "paper",
                BlockedBranchModel::Microscopic => "microscopic",
            }
        );
        let _ = writeln!(
            s,
            "blockade = {}",
            match self.blockade {
                BlockadeModel::FromTrapShift => "trap_shift",
                BlockadeModel::Disabled => "disabled",
            }
        );
        let _ = writeln!(s, "phase_search = {}", if self.phase_search { "on" } else { "off" });
        let _ = writeln!(s, "step_scale = {:?}", self.step_scale);
        let _ = writeln!(s, "norm_tolerance = {:?}", self.norm_tolerance);
        let _ = writeln!(s, "out = {}", self.out.display());
        let _ = writeln!(s, "dist_min = {:?} um", self.dist_min_um);
        let _ = writeln!(s, "dist_max = {:?} um", self.dist_max_um);
        let _ = writeln!(s, "dist_points = {}", self.dist_points);
        let grid: Vec<String> = self.omega_a_grid_ghz.iter().map(|v| format!("{v:?}")).collect();
        let _ = writeln!(s, "omega_a_grid = {} GHz", grid.join(", "));
        let _ = writeln!(s, "trace_initial = {}", self.trace_initial);
        let _ = writeln!(s, "trace_samples = {}", self.trace_samples);
        s
    }

    /// Convert to SI and validate the physics.
    pub fn resolve(&self) -> Result<(PhysicalParams, GateOptions), RunError> {
        let c4 = crate::physics::convert_c4(self.c4_base_au, self.c4_scale);
        let separation = self.x_a_um * 1e-6;
        let detuning_r = match self.delta_r {
            DeltaR::Auto => c4.abs() / separation.powi(4) / HBAR,
            DeltaR::Mhz(v) => angular(v * 1e6),
        };
        let params = PhysicalParams {
            mass: self.mass_u * ATOMIC_MASS,
            omega_trap: angular(self.omega_i_mhz * 1e6),
            omega_qubit: angular(self.omega_01_mhz * 1e6),
            c4,
            separation,
            lamb_dicke: self.eta,
            rabi_ion: angular(self.rabi_i_mhz * 1e6),
            rabi_atom: angular(self.omega_a_mhz * 1e6),
            detuning_r,
            sideband_phase: self.phi_rad,
            cutoff: self.n_cutoff,
            rydberg_lifetime: self.rydberg_lifetime_us * 1e-6,
            order2: self.expansion_order2_coeff,
            beta_convention: self.beta_convention,
        };
        params.validate().map_err(RunError::Physics)?;
        let options = GateOptions {
            blockade: self.blockade,
            step2_duration: self.step2_duration_mode,
            step2_model: self.step2_model,
            tolerance: self.norm_tolerance,
            step_scale: self.step_scale,
            phase_search: self.phase_search,
        };
        Ok((params, options))
    }
}

/// Parse a flat key-value configuration. Empty input yields the reference
/// defaults.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut config = RunConfig::default();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim_end_matches('\r');
        let line = match line.find('#') {
            Some(pos) => &line[..pos],
            None => line,
        };
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| ConfigError::at(line_no, format!("expected 'key = value', got '{line}'")))?;
        let key = key.trim();
        let value = value.trim();
        if value.is_empty() {
            return Err(ConfigError::at(line_no, format!("empty value for key '{key}'")));
        }
        config
            .apply(key, value)
            .map_err(|message| ConfigError::at(line_no, message))?;
    }
    Ok(config)
}

/// Apply `--set key=value` overrides on top of a parsed config.
pub fn apply_overrides(config: &mut RunConfig, overrides: &[String]) -> Result<(), ConfigError> {
    for item in overrides {
        let (key, value) = item.split_once('=').ok_or_else(|| ConfigError::General {
            message: format!("override '{item}' must have the form key=value"),
        })?;
        config.apply(key.trim(), value.trim()).map_err(|message| ConfigError::General {
            message: format!("override '{item}': {message}"),
        })?;
    }
    Ok(())
}

/// Errors carrying the process exit class: 1 for physics/validation, 2 for
/// numeric failures, 3 for I/O.
#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Physics(#[from] PhysicsError),
    #[error("{0}")]
    Validation(String),
    #[error(transparent)]
    Numeric(#[from] PropagateError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{failed} of {total} checks failed")]
    ChecksFailed { failed: usize, total: usize },
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) | RunError::Physics(_) | RunError::Validation(_)
            | RunError::ChecksFailed { .. } => 1,
            RunError::Numeric(_) => 2,
            RunError::Io(_) => 3,
        }
    }
}

impl From<ProtocolError> for RunError {
    fn from(e: ProtocolError) -> Self {
        match e {
            ProtocolError::Physics(p) => RunError::Physics(p),
            ProtocolError::Propagate(p) => RunError::Numeric(p),
            ProtocolError::Step { source, input } => match source {
                PropagateError::NormDrift { .. } | PropagateError::NonFinite { .. } => {
                    RunError::Numeric(source)
                }
                other => RunError::Validation(format!("input |{input}⟩: {other}")),
            },
        }
    }
}

impl From<SweepError> for RunError {
    fn from(e: SweepError) -> Self {
        match e {
            SweepError::InvalidSpec(msg) => RunError::Validation(msg),
            SweepError::Physics(p) => RunError::Physics(p),
            SweepError::Protocol(p) => p.into(),
        }
    }
}

fn write_file(path: &Path, content: &str) -> Result<(), RunError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(path, content)?;
    Ok(())
}

fn sweep_csv(result: &SweepResult) -> String {
    let mut s = String::new();
    for line in result.provenance.lines() {
        let _ = writeln!(s, "# {line}");
    }
    let _ = writeln!(s, "{},valid,note", result.columns.join(","));
    for row in &result.rows {
        let _ = write!(s, "{:?}", row.input);
        for v in &row.values {
            let _ = write!(s, ",{v:?}");
        }
        let _ = writeln!(
            s,
            ",{},{}",
            if row.valid { 1 } else { 0 },
            row.note.as_deref().unwrap_or("")
        );
    }
    s
}

fn trace_csv(result: &TraceResult) -> String {
    let mut s = String::new();
    for line in result.provenance.lines() {
        let _ = writeln!(s, "# {line}");
    }
    let _ = writeln!(
        s,
        "# segment_durations_s = {:?}, {:?}, {:?}",
        result.segment_durations[0], result.segment_durations[1], result.segment_durations[2]
    );
    let _ = writeln!(s, "segment,t_frac,label,re,im");
    for row in &result.rows {
        let _ = writeln!(
            s,
            "{},{:?},{},{:?},{:?}",
            row.segment, row.t_frac, row.label, row.re, row.im
        );
    }
    s
}

fn gate_report_text(report: &GateReport, p: &PhysicalParams, opts: &GateOptions) -> String {
    let mut s = String::new();
    for line in provenance_lines(p, opts) {
        let _ = writeln!(s, "# {line}");
    }
    let _ = writeln!(s, "fidelity_avg = {:?}", report.fidelity_avg);
    let _ = writeln!(s, "fidelity_process = {:?}", report.fidelity_process);
    for (k, label) in LOGICAL_LABELS.iter().enumerate() {
        let _ = writeln!(s, "leakage_{label} = {:?}", report.leakage[k]);
        let _ = writeln!(s, "acquired_phase_{label}_rad = {:?}", report.acquired_phases[k]);
    }
    let _ = writeln!(s, "blocked_branch_phase_rad = {:?}", report.blocked_branch_phase);
    let _ = writeln!(s, "blocked_branch_transfer = {:?}", report.blocked_branch_transfer);
    let _ = writeln!(s, "omega_bar_mhz = {:?}", cyclic(report.trap_shift.omega_bar) / 1e6);
    let _ = writeln!(
        s,
        "equilibrium_offset_um = {:?}",
        report.trap_shift.equilibrium_offset * 1e6
    );
    let _ = writeln!(s, "delta_mhz = {:?}", cyclic(report.trap_shift.delta) / 1e6);
    let _ = writeln!(s, "separation_used_um = {:?}", report.separation_used * 1e6);
    let _ = writeln!(s, "norm_drift_max = {:?}", report.norm_drift_max);
    let _ = writeln!(s, "top_fock_population_max = {:?}", report.top_fock_max);
    for (k, pulse) in report.pulses.iter().enumerate() {
        let target = match pulse.target {
            PulseTarget::Atom => "atom",
            PulseTarget::Ion => "ion",
        };
        let _ = writeln!(
            s,
            "pulse_{k} = target {target}, rabi {:?} rad/s, duration {:?} s, phase {:?} rad, \
             detuning {:?} rad/s",
            pulse.rabi, pulse.duration, pulse.phase, pulse.detuning
        );
    }
    s
}

fn truth_table_csv(report: &GateReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "in_label,out_label,re,im");
    for (k, in_label) in LOGICAL_LABELS.iter().enumerate() {
        for (j, out_label) in LOGICAL_LABELS.iter().enumerate() {
            let amp = report.truth_table[(j, k)];
            let _ = writeln!(s, "{in_label},{out_label},{:?},{:?}", amp.re, amp.im);
        }
    }
    s
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect()
}

/// Execute one configured run, writing the mode's artifacts under the
/// output directory. Returns the written paths.
pub fn run(config: &RunConfig) -> Result<Vec<PathBuf>, RunError> {
    let (params, options) = config.resolve()?;
    let out = &config.out;
    match config.mode {
        Mode::Gate => {
            let report = crate::protocol::run_cnot_with(&params, &options)?;
            let report_path = out.join("gate_report.txt");
            write_file(&report_path, &gate_report_text(&report, &params, &options))?;
            let table_path = out.join("truth_table.csv");
            write_file(&table_path, &truth_table_csv(&report))?;
            Ok(vec![report_path, table_path])
        }
        Mode::SweepShift => {
            if config.dist_points < 1 || config.dist_max_um <= config.dist_min_um {
                return Err(RunError::Validation(format!(
                    "distance grid [{}, {}] um with {} points is not usable",
                    config.dist_min_um, config.dist_max_um, config.dist_points
                )));
            }
            let spec = SweepSpec {
                variable: SweepVariable::Distance,
                grid: linspace(
                    config.dist_min_um * 1e-6,
                    config.dist_max_um * 1e-6,
                    config.dist_points,
                ),
                params,
                options,
            };
            let result = crate::sweep::sweep_trap_shift(&spec)?;
            let path = out.join("trap_shift.csv");
            write_file(&path, &sweep_csv(&result))?;
            Ok(vec![path])
        }
        Mode::SweepFidelity => {
            let spec = SweepSpec {
                variable: SweepVariable::RabiAtom,
                grid: config.omega_a_grid_ghz.iter().map(|g| angular(g * 1e9)).collect(),
                params,
                options,
            };
            let result = run_sweep(&spec)?;
            let path = out.join("fidelity_vs_omega_a.csv");
            write_file(&path, &sweep_csv(&result))?;
            Ok(vec![path])
        }
        Mode::Traces => {
            let result =
                amplitude_traces(&params, &options, &config.trace_initial, config.trace_samples)?;
            let path = out.join("amplitude_traces.csv");
            write_file(&path, &trace_csv(&result))?;
            Ok(vec![path])
        }
        Mode::Check => {
            let (lines, failed, total) = run_checks(&params, &options);
            let mut body = String::new();
            for line in provenance_lines(&params, &options) {
                let _ = writeln!(body, "# {line}");
            }
            for line in &lines {
                println!("{line}");
                let _ = writeln!(body, "{line}");
            }
            let path = out.join("check_report.txt");
            write_file(&path, &body)?;
            if failed > 0 {
                return Err(RunError::ChecksFailed { failed, total });
            }
            Ok(vec![path])
        }
    }
}

/// Built-in oracle suite: analytic-vs-numeric agreement, convergence, and
/// the physical sanity bounds that must hold at any valid parameter set.
pub fn run_checks(p: &PhysicalParams, opts: &GateOptions) -> (Vec<String>, usize, usize) {
    use crate::hilbert::basis_state;
    use crate::propagate::{
        analytic_atom_unitary, analytic_sideband_unitary, evolve, hermitian_propagator,
        interaction_frame_check, PropagationPlan, Sampling, Segment,
    };
    use std::f64::consts::PI;

    let mut lines = Vec::new();
    let mut failed = 0usize;
    let mut check = |name: &str, pass: bool, detail: String| {
        lines.push(format!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" }));
        if !pass {
            failed += 1;
        }
    };

    // Closed-form sideband unitary against exponentiation of the effective
    // two-level Hamiltonian.
    {
        let shift = trap_shift(p, p.separation).ok();
        let rs = crate::physics::red_sideband(p, shift.as_ref()).value;
        let mut worst = 0.0f64;
        for n in 1..4usize {
            let omega_n = rs.coupling * (n as f64).sqrt();
            for &t in &[0.37e-6, 1.3e-6, 5.0e-6] {
                let direct = analytic_sideband_unitary(omega_n, rs.detuning, t);
                let via_exp = hermitian_propagator(&rs.effective_two_level(n), t);
                let defect =
                    (&direct - &via_exp).iter().map(|z| z.norm()).fold(0.0f64, f64::max);
                worst = worst.max(defect);
            }
        }
        check(
            "sideband-oracle",
            worst < 1e-12,
            format!("max |analytic - exponentiated| = {worst:.3e} (must be < 1e-12)"),
        );
    }

    // Closed-form atomic pulse against the numerical propagation.
    {
        let t_pulse = PI / p.rabi_atom;
        let psi0 = basis_state(0, 0, 1, p.cutoff).expect("cutoff >= 2");
        let seg = atom_segment(p, opts.step_scale);
        let plan = PropagationPlan::new(vec![seg]).with_tolerance(opts.tolerance);
        match evolve(&psi0, &plan) {
            Ok(numeric) => {
                let ua = analytic_atom_unitary(p, t_pulse).value;
                let analytic = ua.matrix() * psi0.amplitudes();
                let infidelity =
                    1.0 - analytic.dotc(numeric.final_state.amplitudes()).norm_sqr();
                check(
                    "atom-pulse-oracle",
                    infidelity < 1e-3,
                    format!("state infidelity analytic vs numeric = {infidelity:.3e} (< 1e-3)"),
                );
            }
            Err(e) => check("atom-pulse-oracle", false, format!("propagation failed: {e}")),
        }
    }

    // Step-halving self-convergence of the atomic pulse.
    {
        let psi0 = basis_state(0, 0, 1, p.cutoff).expect("cutoff >= 2");
        let coarse = PropagationPlan::new(vec![atom_segment(p, opts.step_scale)]);
        let fine = PropagationPlan::new(vec![atom_segment(p, opts.step_scale * 0.5)]);
        match (evolve(&psi0, &coarse), evolve(&psi0, &fine)) {
            (Ok(a), Ok(b)) => {
                let diff = (a.final_state.amplitudes() - b.final_state.amplitudes()).norm();
                check(
                    "step-halving",
                    diff < 1e-6,
                    format!("amplitude change on halving the step = {diff:.3e} (< 1e-6)"),
                );
            }
            _ => check("step-halving", false, "propagation failed".to_string()),
        }
    }

    // Truncation convergence of the gate fidelity.
    {
        let fid = |n: usize| {
            let mut q = p.clone();
            q.cutoff = n;
            crate::protocol::run_cnot_with(&q, opts).map(|r| r.fidelity_avg)
        };
        match (fid(8), fid(16)) {
            (Ok(f8), Ok(f16)) => {
                let delta = (f8 - f16).abs();
                check(
                    "cutoff-convergence",
                    delta < 1e-4,
                    format!("|fidelity(N=8) - fidelity(N=16)| = {delta:.3e} (< 1e-4)"),
                );
            }
            (Err(e), _) | (_, Err(e)) => {
                check("cutoff-convergence", false, format!("gate run failed: {e}"))
            }
        }
    }

    // Carrier and blue-sideband corrections to the red-sideband model. The
    // discrepancy is dominated by the carrier light shift (Ωᵢ/2ωᵢ)² acting
    // over the full pulse, orders of magnitude above the naive (ηΩᵢ/ωᵢ)²
    // estimate; the bound here is frozen from measurement at the reference
    // point (0.19) with margin.
    {
        let report = interaction_frame_check(p);
        check(
            "interaction-frame",
            report.max_population_discrepancy < 0.25,
            format!(
                "max population discrepancy = {:.3e} (< 0.25; sideband scale {:.1e}, \
                 carrier scale {:.1e})",
                report.max_population_discrepancy, report.sideband_scale, report.carrier_scale
            ),
        );
    }

    // Blocked-branch suppression against the Rabi bound.
    {
        match trap_shift(p, p.separation) {
            Ok(shift) => {
                let h = crate::physics::h_sideband_full(p, &shift, opts.step2_model);
                let duration = PI / p.sideband_coupling();
                let probe = basis_state(2, 0, 1, p.cutoff).expect("cutoff >= 2");
                let target = crate::hilbert::BasisIndex { atom: 2, ion: 1, phonon: 0 };
                let plan = PropagationPlan::new(vec![Segment::constant(h, duration)])
                    .with_sampling(Sampling {
                        indices: vec![target.flatten(p.cutoff)],
                        per_segment: 2000,
                    });
                match evolve(&probe, &plan) {
                    Ok(out) => {
                        let max_transfer = out
                            .samples
                            .iter()
                            .map(|s| s.amplitudes[0].norm_sqr())
                            .fold(0.0f64, f64::max);
                        let coupling = p.sideband_coupling();
                        let bound = coupling * coupling
                            / (coupling * coupling + shift.delta * shift.delta);
                        let pass = max_transfer <= 1.5 * bound && max_transfer <= 0.03;
                        check(
                            "blockade-suppression",
                            pass,
                            format!(
                                "max blocked transfer = {max_transfer:.4} vs Rabi bound \
                                 {bound:.4} (<= 1.5x bound and <= 0.03)"
                            ),
                        );
                    }
                    Err(e) => {
                        check("blockade-suppression", false, format!("propagation failed: {e}"))
                    }
                }
            }
            Err(e) => check("blockade-suppression", false, format!("no trap shift: {e}")),
        }
    }

    // The whole pulse sequence must fit far inside the Rydberg lifetime.
    {
        let duration = crate::protocol::protocol_duration(p, opts);
        check(
            "rydberg-time-budget",
            duration < p.rydberg_lifetime,
            format!(
                "protocol duration {:.3e} s vs Rydberg lifetime {:.3e} s",
                duration, p.rydberg_lifetime
            ),
        );
    }

    let total = lines.len();
    (lines, failed, total)
}

/// Atomic-pulse segment shared by the check suite (mirrors the protocol's
/// internal construction).
fn atom_segment(p: &PhysicalParams, step_scale: f64) -> crate::propagate::Segment {
    let drive = crate::physics::h_atom_drive(p).into_matrix();
    let duration = std::f64::consts::PI / p.rabi_atom;
    let fastest = 2.0 * p.rabi_atom;
    let p = p.clone();
    let f = move |t: f64| -> nalgebra::DMatrix<num_complex::Complex64> {
        &drive + crate::physics::h_ion_atom_coupling(&p, t).matrix()
    };
    crate::propagate::Segment::time_dependent(f, duration, fastest).scale_step(step_scale)
}

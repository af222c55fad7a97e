//! Parameter scans: trap shift against separation, gate fidelity against
//! drive strength or truncation, and amplitude traces across the pulse
//! sequence. Rows are computed in parallel but always returned in grid
//! order, so results are independent of worker count.

use rayon::prelude::*;
use thiserror::Error;

use crate::hilbert::BasisIndex;
use crate::physics::{cyclic, trap_shift, PhysicalParams, PhysicsError};
use crate::protocol::{
    protocol_duration, protocol_samples, run_cnot_with, GateOptions, LogicalEncoding,
    ProtocolError, Step2Duration,
};

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("invalid sweep spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Physics(#[from] PhysicsError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepVariable {
    /// Ion-atom separation (m).
    Distance,
    /// Atomic Rabi frequency Ω_a (rad/s).
    RabiAtom,
    /// Phonon truncation N.
    PhononCutoff,
    /// Second-order expansion coefficient (4 or 10).
    ExpansionCoeff,
}

pub struct SweepSpec {
    pub variable: SweepVariable,
    /// Grid values in the variable's native unit; strictly monotone.
    pub grid: Vec<f64>,
    pub params: PhysicalParams,
    pub options: GateOptions,
}

impl SweepSpec {
    fn validate(&self) -> Result<(), SweepError> {
        if self.grid.is_empty() {
            return Err(SweepError::InvalidSpec("empty grid".into()));
        }
        if !self.grid.iter().all(|v| v.is_finite()) {
            return Err(SweepError::InvalidSpec("non-finite grid value".into()));
        }
        let increasing = self.grid.windows(2).all(|w| w[1] > w[0]);
        let decreasing = self.grid.windows(2).all(|w| w[1] < w[0]);
        if self.grid.len() > 1 && !increasing && !decreasing {
            return Err(SweepError::InvalidSpec("grid must be strictly monotone".into()));
        }
        Ok(())
    }
}

/// One grid point: the input value, the computed columns (NaN on invalid
/// rows), a validity flag, and an optional note explaining invalid rows.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub input: f64,
    pub values: Vec<f64>,
    pub valid: bool,
    pub note: Option<String>,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    /// Column names, starting with the swept variable.
    pub columns: Vec<&'static str>,
    pub rows: Vec<SweepRow>,
    /// Full parameter echo plus artifact version.
    pub provenance: String,
}

/// Parameter echo sufficient to re-run bit-identically, one `key = value`
/// line per entry, full f64 precision.
pub fn provenance_lines(p: &PhysicalParams, opts: &GateOptions) -> Vec<String> {
    vec![
        format!("phonon-gate v{}", env!("CARGO_PKG_VERSION")),
        format!("mass_kg = {:?}", p.mass),
        format!("omega_trap_rad_s = {:?}", p.omega_trap),
        format!("omega_qubit_rad_s = {:?}", p.omega_qubit),
        format!("c4_J_m4 = {:?}", p.c4),
        format!("separation_m = {:?}", p.separation),
        format!("lamb_dicke = {:?}", p.lamb_dicke),
        format!("rabi_ion_rad_s = {:?}", p.rabi_ion),
        format!("rabi_atom_rad_s = {:?}", p.rabi_atom),
        format!("detuning_r_rad_s = {:?}", p.detuning_r),
        format!("sideband_phase_rad = {:?}", p.sideband_phase),
        format!("n_cutoff = {}", p.cutoff),
        format!("rydberg_lifetime_s = {:?}", p.rydberg_lifetime),
        format!("expansion_order2_coeff = {:?}", p.order2.value()),
        format!(
            "beta_convention = {}",
            match p.beta_convention {
                crate::physics::BetaConvention::Paper => "paper",
                crate::physics::BetaConvention::Substituted => "substituted",
            }
        ),
        format!(
            "blockade = {}",
            match opts.blockade {
                crate::protocol::BlockadeModel::FromTrapShift => "trap-shift",
                crate::protocol::BlockadeModel::Disabled => "disabled",
            }
        ),
        format!(
            "step2_duration = {}",
            match opts.step2_duration {
                Step2Duration::FullTransfer => "full-transfer",
                Step2Duration::Literal => "literal",
            }
        ),
        format!(
            "step2_model = {}",
            match opts.step2_model {
                crate::physics::BlockedBranchModel::PaperEffective => "paper",
                crate::physics::BlockedBranchModel::Microscopic => "microscopic",
            }
        ),
        format!("norm_tolerance = {:?}", opts.tolerance),
        format!("step_scale = {:?}", opts.step_scale),
        format!("phase_search = {}", opts.phase_search),
    ]
}

fn provenance(spec: &SweepSpec) -> String {
    provenance_lines(&spec.params, &spec.options).join("\n")
}

/// Trap renormalization against separation: ω̄ᵢ/2π (MHz), equilibrium
/// offset (μm), Δ/2π (MHz) per grid distance (m). Destabilized rows are
/// flagged, never dropped.
pub fn sweep_trap_shift(spec: &SweepSpec) -> Result<SweepResult, SweepError> {
    if spec.variable != SweepVariable::Distance {
        return Err(SweepError::InvalidSpec("trap-shift sweep needs the distance variable".into()));
    }
    spec.validate()?;
    let rows: Vec<SweepRow> = spec
        .grid
        .par_iter()
        .map(|&d| match trap_shift(&spec.params, d) {
            Ok(shift) => SweepRow {
                input: d,
                values: vec![
                    cyclic(shift.omega_bar) / 1e6,
                    shift.equilibrium_offset * 1e6,
                    cyclic(shift.delta) / 1e6,
                ],
                valid: true,
                note: None,
            },
            Err(e) => SweepRow {
                input: d,
                values: vec![f64::NAN, f64::NAN, f64::NAN],
                valid: false,
                note: Some(e.to_string()),
            },
        })
        .collect();
    Ok(SweepResult {
        columns: vec!["distance_um", "omega_bar_mhz", "equilibrium_offset_um", "delta_mhz"],
        rows,
        provenance: provenance(spec),
    })
}

fn gate_row(input: f64, params: &PhysicalParams, options: &GateOptions) -> SweepRow {
    match run_cnot_with(params, options) {
        Ok(report) => SweepRow {
            input,
            values: vec![
                report.fidelity_avg,
                report.fidelity_process,
                report.leakage.iter().copied().fold(0.0, f64::max),
                report.blocked_branch_phase,
            ],
            valid: true,
            note: None,
        },
        Err(e) => SweepRow {
            input,
            values: vec![f64::NAN; 4],
            valid: false,
            note: Some(e.to_string()),
        },
    }
}

const GATE_COLUMNS: [&str; 4] =
    ["fidelity_avg", "fidelity_process", "leakage_max", "blocked_phase_rad"];

/// Full gate fidelity per atomic Rabi frequency (rad/s grid).
pub fn sweep_fidelity_vs_omega_a(spec: &SweepSpec) -> Result<SweepResult, SweepError> {
    if spec.variable != SweepVariable::RabiAtom {
        return Err(SweepError::InvalidSpec("fidelity sweep needs the omega_a variable".into()));
    }
    spec.validate()?;
    let rows: Vec<SweepRow> = spec
        .grid
        .par_iter()
        .map(|&omega_a| {
            let mut p = spec.params.clone();
            p.rabi_atom = omega_a;
            gate_row(cyclic(omega_a) / 1e9, &p, &spec.options)
        })
        .collect();
    let mut columns = vec!["omega_a_ghz"];
    columns.extend(GATE_COLUMNS);
    Ok(SweepResult { columns, rows, provenance: provenance(spec) })
}

/// Dispatch on the swept variable; the cutoff and expansion-coefficient
/// scans feed the truncation and model-sensitivity checks.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult, SweepError> {
    match spec.variable {
        SweepVariable::Distance => sweep_trap_shift(spec),
        SweepVariable::RabiAtom => sweep_fidelity_vs_omega_a(spec),
        SweepVariable::PhononCutoff => {
            spec.validate()?;
            let rows: Vec<SweepRow> = spec
                .grid
                .par_iter()
                .map(|&n| {
                    let mut p = spec.params.clone();
                    p.cutoff = n.round() as usize;
                    gate_row(n.round(), &p, &spec.options)
                })
                .collect();
            let mut columns = vec!["n_cutoff"];
            columns.extend(GATE_COLUMNS);
            Ok(SweepResult { columns, rows, provenance: provenance(spec) })
        }
        SweepVariable::ExpansionCoeff => {
            spec.validate()?;
            let rows: Vec<SweepRow> = spec
                .grid
                .par_iter()
                .map(|&c| {
                    let mut p = spec.params.clone();
                    p.order2 = if c == 10.0 {
                        crate::physics::Order2Coeff::Taylor
                    } else {
                        crate::physics::Order2Coeff::Paper
                    };
                    gate_row(c, &p, &spec.options)
                })
                .collect();
            let mut columns = vec!["order2_coeff"];
            columns.extend(GATE_COLUMNS);
            Ok(SweepResult { columns, rows, provenance: provenance(spec) })
        }
    }
}

/// The states whose amplitudes the trace records, as (label, basis index):
/// both logical target pairs on each atomic level.
pub fn tracked_states() -> Vec<(String, BasisIndex)> {
    let atoms = [(0usize, "0"), (1, "1"), (2, "r")];
    let targets = [(0usize, 1usize), (1, 0)];
    let mut out = Vec::new();
    for (a, alabel) in atoms {
        for (ion, ph) in targets {
            out.push((format!("|{alabel},{ion}{ph}>"), BasisIndex { atom: a, ion, phonon: ph }));
        }
    }
    out
}

/// One amplitude sample of one tracked state.
#[derive(Debug, Clone)]
pub struct TraceRow {
    /// Pulse index: 0 and 2 are the atomic pulses, 1 the ion pulse.
    pub segment: usize,
    /// Time within the pulse divided by the pulse duration.
    pub t_frac: f64,
    pub label: String,
    pub re: f64,
    pub im: f64,
}

#[derive(Debug, Clone)]
pub struct TraceResult {
    pub rows: Vec<TraceRow>,
    /// Durations of the three pulses (s).
    pub segment_durations: [f64; 3],
    pub provenance: String,
}

/// Amplitude traces of the tracked states across the three pulses for one
/// logical input ("00", "01", "10", "11"). The published figure's
/// dimensionless-time axis is not defined anywhere, so each pulse is
/// normalized to [0, 1] here and the convention is recorded in the output
/// metadata.
pub fn amplitude_traces(
    p: &PhysicalParams,
    options: &GateOptions,
    initial: &str,
    samples_per_segment: usize,
) -> Result<TraceResult, SweepError> {
    let encoding = LogicalEncoding::new(p.cutoff);
    let input = match initial {
        "00" => encoding.logical_state(0, 0),
        "01" => encoding.logical_state(0, 1),
        "10" => encoding.logical_state(1, 0),
        "11" => encoding.logical_state(1, 1),
        other => {
            return Err(SweepError::InvalidSpec(format!(
                "unknown logical label '{other}' (expected 00, 01, 10, or 11)"
            )))
        }
    };
    let tracked = tracked_states();
    let indices: Vec<usize> = tracked.iter().map(|(_, idx)| idx.flatten(p.cutoff)).collect();
    let samples = protocol_samples(p, options, &input, &indices, samples_per_segment)?;
    let atom_t = std::f64::consts::PI / p.rabi_atom;
    let ion_t = protocol_duration(p, options) - 2.0 * atom_t;
    let durations = [atom_t, ion_t, atom_t];
    let mut rows = Vec::with_capacity(samples.len() * tracked.len());
    for s in &samples {
        for (k, (label, _)) in tracked.iter().enumerate() {
            rows.push(TraceRow {
                segment: s.segment,
                t_frac: s.time / durations[s.segment],
                label: label.clone(),
                re: s.amplitudes[k].re,
                im: s.amplitudes[k].im,
            });
        }
    }
    let mut provenance = provenance_lines(p, options).join("\n");
    provenance.push_str(&format!("\ninitial_logical_state = {initial}"));
    provenance.push_str("\ntime_axis = per-pulse fraction t / T_pulse");
    Ok(TraceResult { rows, segment_durations: durations, provenance })
}

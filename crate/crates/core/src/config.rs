//! Strict run-configuration schema: TOML sections `system` or `geometry`,
//! `sequence`, `errors`, `run`, `output`. Unknown keys are rejected with the
//! offending key and line; invariant violations name the key.

use std::path::PathBuf;

use serde::Deserialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::dynamics::InitialState;
use crate::sequence::{PulseErrorModel, Sequence, SequenceError};
use crate::system::{
    AnglePower, DetuningModel, DipolarParams, GeometrySpec, Placement, SpinSystem,
};

#[derive(Debug, Error)]
pub enum ConfigError {
    /// Malformed document, type mismatch, or unknown key. The detail string
    /// comes from the TOML parser and names the key and line.
    #[error("config parse error: {detail}")]
    Parse { detail: String },
    /// A well-formed value that violates a constraint.
    #[error("config key `{key}`: {detail}")]
    Invalid { key: String, detail: String },
}

fn invalid(key: &str, detail: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { key: key.into(), detail: detail.into() }
}

fn require<T>(v: Option<T>, key: &str) -> Result<T, ConfigError> {
    v.ok_or_else(|| invalid(key, "required but missing"))
}

fn forbid<T>(v: &Option<T>, key: &str, why: &str) -> Result<(), ConfigError> {
    if v.is_some() {
        return Err(invalid(key, why));
    }
    Ok(())
}

fn finite(v: f64, key: &str) -> Result<f64, ConfigError> {
    if !v.is_finite() {
        return Err(invalid(key, format!("must be finite, got {v}")));
    }
    Ok(v)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    system: Option<SystemSection>,
    geometry: Option<GeometrySection>,
    sequence: SequenceSection,
    errors: Option<ErrorsSection>,
    run: RunSection,
    output: Option<OutputSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemSection {
    detunings: Vec<f64>,
    couplings: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GeometrySection {
    placement: String,
    n_spins: Option<usize>,
    side: Option<f64>,
    min_separation: Option<f64>,
    dims: Option<[usize; 3]>,
    spacing: Option<f64>,
    n_occupied: Option<usize>,
    positions: Option<Vec<[f64; 3]>>,
    detuning_mean: Option<f64>,
    detuning_std: Option<f64>,
    detunings: Option<Vec<f64>>,
    dipolar_prefactor: Option<f64>,
    dipolar_angle_power: Option<i64>,
    field_axis: Option<[f64; 3]>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SequenceSection {
    kind: String,
    tau: f64,
    gap_frac: Option<f64>,
    include_closing_pulse: Option<bool>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ErrorsSection {
    flip_fraction: Option<f64>,
    phase_offset: Option<f64>,
    width: Option<f64>,
    include_internal_during_pulse: Option<bool>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunSection {
    kind: String,
    n_cycles: Option<u64>,
    n_realizations: Option<u64>,
    seed: Option<u64>,
    workers: Option<usize>,
    compare_with: Option<Vec<String>>,
    scan_parameter: Option<String>,
    scan_values: Option<Vec<f64>>,
    horizon: Option<f64>,
    initial_state: Option<String>,
    initial_site: Option<usize>,
    initial_bloch: Option<[f64; 3]>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutputSection {
    path: Option<String>,
    format: Option<String>,
}

/// Named pulse cycles available from the config file.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SequenceKind {
    Proposed,
    Cpmg,
    Wahuha,
    Mrev8,
    Free,
}

impl SequenceKind {
    pub const ALL: [SequenceKind; 5] = [
        SequenceKind::Proposed,
        SequenceKind::Cpmg,
        SequenceKind::Wahuha,
        SequenceKind::Mrev8,
        SequenceKind::Free,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SequenceKind::Proposed => "proposed",
            SequenceKind::Cpmg => "cpmg",
            SequenceKind::Wahuha => "wahuha",
            SequenceKind::Mrev8 => "mrev8",
            SequenceKind::Free => "free",
        }
    }

    fn parse(s: &str, key: &str) -> Result<Self, ConfigError> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| invalid(key, format!("unknown sequence `{s}`; allowed: proposed, cpmg, wahuha, mrev8, free")))
    }

    /// Builds the cycle at the given tau. `gap_frac` and dropping the closing
    /// pulse only apply to the proposed cycle; callers validate that.
    pub fn build(
        self,
        tau: f64,
        gap_frac: f64,
        include_closing: bool,
    ) -> Result<Sequence, SequenceError> {
        let seq = match self {
            SequenceKind::Proposed => Sequence::proposed_with_gap(tau, gap_frac)?,
            SequenceKind::Cpmg => Sequence::cpmg(tau)?,
            SequenceKind::Wahuha => Sequence::wahuha(tau)?,
            SequenceKind::Mrev8 => Sequence::mrev8(tau)?,
            SequenceKind::Free => Sequence::free(tau)?,
        };
        Ok(if include_closing { seq } else { seq.without_closing_pulse() })
    }
}

/// Where realizations come from: one fixed system, or a geometry recipe drawn
/// per realization index.
#[derive(Clone, Debug)]
pub enum SystemSource {
    Explicit(SpinSystem),
    Ensemble(GeometrySpec),
}

impl SystemSource {
    pub fn n_spins(&self) -> usize {
        match self {
            SystemSource::Explicit(sys) => sys.n_spins(),
            SystemSource::Ensemble(geo) => geo.n_spins(),
        }
    }

    pub fn realize(
        &self,
        master_seed: u64,
        index: u64,
    ) -> Result<SpinSystem, crate::system::SystemError> {
        match self {
            SystemSource::Explicit(sys) => Ok(sys.clone()),
            SystemSource::Ensemble(geo) => geo.realize(master_seed, index),
        }
    }
}

/// The parameter axis of a `scan` run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScanParameter {
    FlipFraction,
    PhaseOffset,
    Width,
    Tau,
    GapFrac,
}

impl ScanParameter {
    pub fn name(self) -> &'static str {
        match self {
            ScanParameter::FlipFraction => "flip_fraction",
            ScanParameter::PhaseOffset => "phase_offset",
            ScanParameter::Width => "width",
            ScanParameter::Tau => "tau",
            ScanParameter::GapFrac => "gap_frac",
        }
    }

    fn parse(s: &str, key: &str) -> Result<Self, ConfigError> {
        [
            ScanParameter::FlipFraction,
            ScanParameter::PhaseOffset,
            ScanParameter::Width,
            ScanParameter::Tau,
            ScanParameter::GapFrac,
        ]
        .into_iter()
        .find(|p| p.name() == s)
        .ok_or_else(|| {
            invalid(
                key,
                format!("unknown parameter `{s}`; allowed: flip_fraction, phase_offset, width, tau, gap_frac"),
            )
        })
    }
}

#[derive(Clone, Debug)]
pub enum RunKind {
    Toggling,
    Evolve,
    Compare { baselines: Vec<SequenceKind> },
    Scan { parameter: ScanParameter, values: Vec<f64> },
    Fid,
}

impl RunKind {
    pub fn name(&self) -> &'static str {
        match self {
            RunKind::Toggling => "toggling",
            RunKind::Evolve => "evolve",
            RunKind::Compare { .. } => "compare",
            RunKind::Scan { .. } => "scan",
            RunKind::Fid => "fid",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Structured,
    Json,
}

impl OutputFormat {
    pub fn name(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Structured => "structured",
            OutputFormat::Json => "json",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "csv" => Some(OutputFormat::Csv),
            "structured" => Some(OutputFormat::Structured),
            "json" => Some(OutputFormat::Json),
            _ => None,
        }
    }

    fn parse(s: &str, key: &str) -> Result<Self, ConfigError> {
        Self::from_name(s).ok_or_else(|| {
            invalid(key, format!("unknown format `{s}`; allowed: csv, structured, json"))
        })
    }
}

/// A fully validated run configuration.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub kind: RunKind,
    pub source: SystemSource,
    pub main_kind: SequenceKind,
    pub sequence: Sequence,
    pub errors: PulseErrorModel,
    /// Cycles of the main sequence; 0 for toggling and fid runs.
    pub n_cycles: u64,
    pub n_realizations: u64,
    pub master_seed: u64,
    pub workers: Option<usize>,
    pub initial: InitialState,
    /// Decay-time search horizon for fid runs.
    pub horizon: Option<f64>,
    pub output_path: Option<PathBuf>,
    pub format: OutputFormat,
    /// SHA-256 of the raw config text, for provenance headers.
    pub digest: String,
}

/// Hex SHA-256 of the raw config text.
pub fn config_digest(text: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(text.as_bytes());
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Command-line overrides applied before validation, so for example `--seed`
/// satisfies the seed requirement of an ensemble config. The digest still
/// covers the raw file; the effective seed is recorded separately in the
/// result header.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub format: Option<OutputFormat>,
    pub path: Option<PathBuf>,
}

/// Parses and validates a config document.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    parse_config_with(text, &Overrides::default())
}

/// [`parse_config`] with command-line overrides folded in.
pub fn parse_config_with(text: &str, overrides: &Overrides) -> Result<RunConfig, ConfigError> {
    let raw: RawConfig =
        toml::from_str(text).map_err(|e| ConfigError::Parse { detail: e.to_string() })?;

    let source = parse_source(&raw)?;
    let n_spins = source.n_spins();
    let (main_kind, sequence) = parse_sequence(&raw.sequence)?;
    let errors = parse_errors(raw.errors.as_ref())?;
    let (file_format, file_path) = parse_output(raw.output.as_ref())?;
    let requested_format = overrides.format.or(file_format);
    let output_path = overrides.path.clone().or(file_path);

    let run = &raw.run;
    let kind = match run.kind.as_str() {
        "toggling" => RunKind::Toggling,
        "evolve" => RunKind::Evolve,
        "compare" => RunKind::Compare { baselines: Vec::new() },
        "scan" => RunKind::Scan { parameter: ScanParameter::FlipFraction, values: Vec::new() },
        "fid" => RunKind::Fid,
        other => {
            return Err(invalid(
                "run.kind",
                format!("unknown kind `{other}`; allowed: toggling, evolve, compare, scan, fid"),
            ));
        }
    };

    if matches!(kind, RunKind::Toggling) && !errors.is_ideal() {
        return Err(invalid(
            "errors",
            "toggling analyzes the ideal sequence; remove the pulse error settings",
        ));
    }

    let n_realizations = run.n_realizations.unwrap_or(1);
    if n_realizations == 0 {
        return Err(invalid("run.n_realizations", "must be at least 1"));
    }
    if let SystemSource::Explicit(_) = source {
        if n_realizations > 1 {
            return Err(invalid(
                "run.n_realizations",
                "multiple realizations need [geometry]; an explicit [system] is identical in every realization",
            ));
        }
    }
    let master_seed = match (&source, overrides.seed.or(run.seed)) {
        (SystemSource::Ensemble(_), None) => {
            return Err(invalid("run.seed", "required when [geometry] is present"));
        }
        (_, seed) => seed.unwrap_or(0),
    };
    if let Some(w) = run.workers {
        if w == 0 {
            return Err(invalid("run.workers", "must be at least 1"));
        }
    }

    let needs_cycles = matches!(kind, RunKind::Evolve | RunKind::Compare { .. } | RunKind::Scan { .. });
    let n_cycles = if needs_cycles {
        let n = require(run.n_cycles, "run.n_cycles")?;
        if n == 0 {
            return Err(invalid("run.n_cycles", "must be at least 1"));
        }
        n
    } else {
        let why = format!("not used by {} runs", kind.name());
        forbid(&run.n_cycles, "run.n_cycles", &why)?;
        0
    };

    let kind = match kind {
        RunKind::Compare { .. } => {
            let names = require(run.compare_with.clone(), "run.compare_with")?;
            if names.is_empty() {
                return Err(invalid("run.compare_with", "must list at least one sequence"));
            }
            let mut baselines = Vec::new();
            for name in &names {
                let k = SequenceKind::parse(name, "run.compare_with")?;
                if k == main_kind || baselines.contains(&k) {
                    return Err(invalid(
                        "run.compare_with",
                        format!("sequence `{name}` listed more than once in the comparison"),
                    ));
                }
                baselines.push(k);
            }
            RunKind::Compare { baselines }
        }
        other => {
            forbid(&run.compare_with, "run.compare_with", "only used by compare runs")?;
            other
        }
    };

    let kind = match kind {
        RunKind::Scan { .. } => {
            let name = require(run.scan_parameter.clone(), "run.scan_parameter")?;
            let parameter = ScanParameter::parse(&name, "run.scan_parameter")?;
            let values = require(run.scan_values.clone(), "run.scan_values")?;
            if values.is_empty() {
                return Err(invalid("run.scan_values", "must list at least one value"));
            }
            for &v in &values {
                finite(v, "run.scan_values")?;
                match parameter {
                    ScanParameter::Width if v < 0.0 => {
                        return Err(invalid("run.scan_values", format!("width {v} must be >= 0")));
                    }
                    ScanParameter::Tau if v <= 0.0 => {
                        return Err(invalid("run.scan_values", format!("tau {v} must be > 0")));
                    }
                    ScanParameter::GapFrac if !(0.0..1.0).contains(&v) => {
                        return Err(invalid(
                            "run.scan_values",
                            format!("gap fraction {v} must lie in [0, 1)"),
                        ));
                    }
                    _ => {}
                }
            }
            if parameter == ScanParameter::GapFrac && main_kind != SequenceKind::Proposed {
                return Err(invalid(
                    "run.scan_parameter",
                    "gap_frac only applies to the proposed sequence",
                ));
            }
            RunKind::Scan { parameter, values }
        }
        other => {
            forbid(&run.scan_parameter, "run.scan_parameter", "only used by scan runs")?;
            forbid(&run.scan_values, "run.scan_values", "only used by scan runs")?;
            other
        }
    };

    let horizon = match kind {
        RunKind::Fid => match run.horizon {
            Some(h) => {
                finite(h, "run.horizon")?;
                if h <= 0.0 {
                    return Err(invalid("run.horizon", format!("must be > 0, got {h}")));
                }
                Some(h)
            }
            None => None,
        },
        _ => {
            forbid(&run.horizon, "run.horizon", "only used by fid runs")?;
            None
        }
    };

    let initial = parse_initial(run, &kind, n_spins)?;

    let format = match kind {
        RunKind::Toggling => {
            let f = requested_format.unwrap_or(OutputFormat::Structured);
            if f == OutputFormat::Csv {
                return Err(invalid(
                    "output.format",
                    "toggling runs emit operator dumps; use `structured` or `json`",
                ));
            }
            f
        }
        _ => {
            let f = requested_format.unwrap_or(OutputFormat::Csv);
            if f == OutputFormat::Json {
                return Err(invalid(
                    "output.format",
                    format!("`json` is only available for toggling runs, not {}", kind.name()),
                ));
            }
            f
        }
    };

    Ok(RunConfig {
        kind,
        source,
        main_kind,
        sequence,
        errors,
        n_cycles,
        n_realizations,
        master_seed,
        workers: run.workers,
        initial,
        horizon,
        output_path,
        format,
        digest: config_digest(text),
    })
}

fn parse_source(raw: &RawConfig) -> Result<SystemSource, ConfigError> {
    match (&raw.system, &raw.geometry) {
        (Some(_), Some(_)) => {
            Err(invalid("system", "provide either [system] or [geometry], not both"))
        }
        (None, None) => Err(invalid("system", "one of [system] or [geometry] is required")),
        (Some(sys), None) => {
            for &d in &sys.detunings {
                finite(d, "system.detunings")?;
            }
            for &c in &sys.couplings {
                finite(c, "system.couplings")?;
            }
            let system = SpinSystem::new(sys.detunings.clone(), sys.couplings.clone())
                .map_err(|e| invalid("system.couplings", e.to_string()))?;
            Ok(SystemSource::Explicit(system))
        }
        (None, Some(geo)) => Ok(SystemSource::Ensemble(parse_geometry(geo)?)),
    }
}

fn parse_geometry(geo: &GeometrySection) -> Result<GeometrySpec, ConfigError> {
    let placement = match geo.placement.as_str() {
        "box" => {
            forbid(&geo.dims, "geometry.dims", "only used by lattice placement")?;
            forbid(&geo.spacing, "geometry.spacing", "only used by lattice placement")?;
            forbid(&geo.n_occupied, "geometry.n_occupied", "only used by lattice placement")?;
            forbid(&geo.positions, "geometry.positions", "only used by explicit placement")?;
            Placement::BoxUniform {
                n_spins: require(geo.n_spins, "geometry.n_spins")?,
                side: finite(require(geo.side, "geometry.side")?, "geometry.side")?,
                min_separation: finite(
                    require(geo.min_separation, "geometry.min_separation")?,
                    "geometry.min_separation",
                )?,
            }
        }
        "lattice" => {
            forbid(&geo.n_spins, "geometry.n_spins", "only used by box placement")?;
            forbid(&geo.side, "geometry.side", "only used by box placement")?;
            forbid(&geo.min_separation, "geometry.min_separation", "only used by box placement")?;
            forbid(&geo.positions, "geometry.positions", "only used by explicit placement")?;
            Placement::Lattice {
                dims: require(geo.dims, "geometry.dims")?,
                spacing: finite(require(geo.spacing, "geometry.spacing")?, "geometry.spacing")?,
                n_occupied: require(geo.n_occupied, "geometry.n_occupied")?,
            }
        }
        "explicit" => {
            forbid(&geo.n_spins, "geometry.n_spins", "only used by box placement")?;
            forbid(&geo.side, "geometry.side", "only used by box placement")?;
            forbid(&geo.min_separation, "geometry.min_separation", "only used by box placement")?;
            forbid(&geo.dims, "geometry.dims", "only used by lattice placement")?;
            forbid(&geo.spacing, "geometry.spacing", "only used by lattice placement")?;
            forbid(&geo.n_occupied, "geometry.n_occupied", "only used by lattice placement")?;
            Placement::Explicit { positions: require(geo.positions.clone(), "geometry.positions")? }
        }
        other => {
            return Err(invalid(
                "geometry.placement",
                format!("unknown placement `{other}`; allowed: box, lattice, explicit"),
            ));
        }
    };

    let detunings = match (&geo.detunings, geo.detuning_mean, geo.detuning_std) {
        (Some(vals), None, None) => {
            for &d in vals {
                finite(d, "geometry.detunings")?;
            }
            DetuningModel::Explicit(vals.clone())
        }
        (Some(_), _, _) => {
            return Err(invalid(
                "geometry.detunings",
                "give either an explicit list or detuning_mean/detuning_std, not both",
            ));
        }
        (None, mean, Some(std_dev)) => {
            let std_dev = finite(std_dev, "geometry.detuning_std")?;
            if std_dev < 0.0 {
                return Err(invalid("geometry.detuning_std", format!("must be >= 0, got {std_dev}")));
            }
            DetuningModel::Normal { mean: finite(mean.unwrap_or(0.0), "geometry.detuning_mean")?, std_dev }
        }
        (None, _, None) => {
            return Err(invalid(
                "geometry.detuning_std",
                "required unless an explicit `detunings` list is given",
            ));
        }
    };

    let angle_power = match geo.dipolar_angle_power.unwrap_or(2) {
        1 => AnglePower::One,
        2 => AnglePower::Two,
        other => {
            return Err(invalid(
                "geometry.dipolar_angle_power",
                format!("allowed values: 1, 2; got {other}"),
            ));
        }
    };
    let prefactor = finite(geo.dipolar_prefactor.unwrap_or(1.0), "geometry.dipolar_prefactor")?;
    let axis = geo.field_axis.unwrap_or([0.0, 0.0, 1.0]);
    let dipolar = DipolarParams::new(prefactor, angle_power, axis)
        .map_err(|e| invalid("geometry.field_axis", e.to_string()))?;

    let spec = GeometrySpec { placement, detunings, dipolar };
    spec.validate().map_err(|e| invalid("geometry", e.to_string()))?;
    Ok(spec)
}

fn parse_sequence(seq: &SequenceSection) -> Result<(SequenceKind, Sequence), ConfigError> {
    let kind = SequenceKind::parse(&seq.kind, "sequence.kind")?;
    finite(seq.tau, "sequence.tau")?;
    if seq.tau <= 0.0 {
        return Err(invalid("sequence.tau", format!("must be > 0, got {}", seq.tau)));
    }
    if kind != SequenceKind::Proposed {
        forbid(&seq.gap_frac, "sequence.gap_frac", "only applies to the proposed sequence")?;
        forbid(
            &seq.include_closing_pulse,
            "sequence.include_closing_pulse",
            "only applies to the proposed sequence",
        )?;
    }
    let gap = seq.gap_frac.unwrap_or(0.0);
    finite(gap, "sequence.gap_frac")?;
    if !(0.0..1.0).contains(&gap) {
        return Err(invalid("sequence.gap_frac", format!("must lie in [0, 1), got {gap}")));
    }
    let built = kind
        .build(seq.tau, gap, seq.include_closing_pulse.unwrap_or(true))
        .map_err(|e| invalid("sequence", e.to_string()))?;
    Ok((kind, built))
}

fn parse_errors(errors: Option<&ErrorsSection>) -> Result<PulseErrorModel, ConfigError> {
    let Some(e) = errors else {
        return Ok(PulseErrorModel::ideal());
    };
    let model = PulseErrorModel {
        flip_fraction: finite(e.flip_fraction.unwrap_or(0.0), "errors.flip_fraction")?,
        phase_offset: finite(e.phase_offset.unwrap_or(0.0), "errors.phase_offset")?,
        width: finite(e.width.unwrap_or(0.0), "errors.width")?,
        include_internal_during_pulse: e.include_internal_during_pulse.unwrap_or(false),
    };
    if model.width < 0.0 {
        return Err(invalid("errors.width", format!("must be >= 0, got {}", model.width)));
    }
    Ok(model)
}

fn parse_initial(
    run: &RunSection,
    kind: &RunKind,
    n_spins: usize,
) -> Result<InitialState, ConfigError> {
    if matches!(kind, RunKind::Toggling | RunKind::Fid) {
        let why = format!("not used by {} runs", kind.name());
        forbid(&run.initial_state, "run.initial_state", &why)?;
        forbid(&run.initial_site, "run.initial_site", &why)?;
        forbid(&run.initial_bloch, "run.initial_bloch", &why)?;
        return Ok(InitialState::AllTransverseX);
    }
    match run.initial_state.as_deref().unwrap_or("all_transverse_x") {
        "all_transverse_x" => {
            forbid(&run.initial_site, "run.initial_site", "only used with single_qubit")?;
            forbid(&run.initial_bloch, "run.initial_bloch", "only used with single_qubit")?;
            Ok(InitialState::AllTransverseX)
        }
        "single_qubit" => {
            let site = require(run.initial_site, "run.initial_site")?;
            if site >= n_spins {
                return Err(invalid(
                    "run.initial_site",
                    format!("site {site} out of range for {n_spins} spins"),
                ));
            }
            let bloch = require(run.initial_bloch, "run.initial_bloch")?;
            let norm2: f64 = bloch.iter().map(|c| c * c).sum();
            if !norm2.is_finite() || norm2 > 1.0 + 1e-12 {
                return Err(invalid("run.initial_bloch", "Bloch vector must have length <= 1"));
            }
            Ok(InitialState::SingleQubit { site, bloch })
        }
        other => Err(invalid(
            "run.initial_state",
            format!("unknown state `{other}`; allowed: all_transverse_x, single_qubit"),
        )),
    }
}

fn parse_output(
    output: Option<&OutputSection>,
) -> Result<(Option<OutputFormat>, Option<PathBuf>), ConfigError> {
    let Some(o) = output else {
        return Ok((None, None));
    };
    let format = match o.format.as_deref() {
        Some(s) => Some(OutputFormat::parse(s, "output.format")?),
        None => None,
    };
    Ok((format, o.path.as_ref().map(PathBuf::from)))
}

/// The generated schema reference: every key, its type, default, and
/// constraints, printed by the `config-reference` subcommand.
pub fn config_reference() -> String {
    struct Key {
        name: &'static str,
        ty: &'static str,
        default: &'static str,
        doc: &'static str,
    }
    struct Section {
        header: &'static str,
        intro: &'static str,
        keys: &'static [Key],
    }
    const SECTIONS: &[Section] = &[
        Section {
            header: "[system]",
            intro: "A fixed spin system. Exactly one of [system] or [geometry] is required.",
            keys: &[
                Key {
                    name: "detunings",
                    ty: "array of float",
                    default: "required",
                    doc: "per-spin frequency offsets; the array length sets the spin count",
                },
                Key {
                    name: "couplings",
                    ty: "array of float",
                    default: "required",
                    doc: "pair couplings, upper triangle row by row, length n(n-1)/2",
                },
            ],
        },
        Section {
            header: "[geometry]",
            intro: "A recipe drawing one system per realization (requires run.seed).",
            keys: &[
                Key {
                    name: "placement",
                    ty: "string",
                    default: "required",
                    doc: "one of `box`, `lattice`, `explicit`",
                },
                Key {
                    name: "n_spins",
                    ty: "integer",
                    default: "required for box",
                    doc: "spins drawn uniformly in the box",
                },
                Key { name: "side", ty: "float", default: "required for box", doc: "box edge length" },
                Key {
                    name: "min_separation",
                    ty: "float",
                    default: "required for box",
                    doc: "minimum pair distance; draws violating it are rejected",
                },
                Key {
                    name: "dims",
                    ty: "array of 3 integers",
                    default: "required for lattice",
                    doc: "lattice extent per axis",
                },
                Key {
                    name: "spacing",
                    ty: "float",
                    default: "required for lattice",
                    doc: "lattice constant",
                },
                Key {
                    name: "n_occupied",
                    ty: "integer",
                    default: "required for lattice",
                    doc: "occupied sites, chosen at random without replacement",
                },
                Key {
                    name: "positions",
                    ty: "array of [x, y, z]",
                    default: "required for explicit",
                    doc: "fixed positions, identical across realizations",
                },
                Key {
                    name: "detuning_mean",
                    ty: "float",
                    default: "0.0",
                    doc: "mean of the normal detuning draw",
                },
                Key {
                    name: "detuning_std",
                    ty: "float",
                    default: "required unless `detunings` is given",
                    doc: "standard deviation of the normal detuning draw (>= 0)",
                },
                Key {
                    name: "detunings",
                    ty: "array of float",
                    default: "unset",
                    doc: "explicit per-spin detunings instead of a normal draw",
                },
                Key {
                    name: "dipolar_prefactor",
                    ty: "float",
                    default: "1.0",
                    doc: "overall coupling strength a_ij = prefactor * (1 - 3 cos^p) / r^3",
                },
                Key {
                    name: "dipolar_angle_power",
                    ty: "integer",
                    default: "2",
                    doc: "the power p of cos(theta) in the coupling law; allowed: 1, 2",
                },
                Key {
                    name: "field_axis",
                    ty: "[x, y, z]",
                    default: "[0.0, 0.0, 1.0]",
                    doc: "quantization axis used for the pair angle theta",
                },
            ],
        },
        Section {
            header: "[sequence]",
            intro: "The pulse cycle under test.",
            keys: &[
                Key {
                    name: "kind",
                    ty: "string",
                    default: "required",
                    doc: "one of `proposed`, `cpmg`, `wahuha`, `mrev8`, `free`",
                },
                Key {
                    name: "tau",
                    ty: "float",
                    default: "required",
                    doc: "inter-pulse delay (> 0); for `free`, the sampling period",
                },
                Key {
                    name: "gap_frac",
                    ty: "float",
                    default: "0.0",
                    doc: "delay of the second back-to-back pulse, as a fraction of tau in [0, 1); proposed only",
                },
                Key {
                    name: "include_closing_pulse",
                    ty: "bool",
                    default: "true",
                    doc: "drop the cycle-end pulse when false; proposed only",
                },
            ],
        },
        Section {
            header: "[errors]",
            intro: "Systematic pulse imperfections; omit the section for ideal pulses.",
            keys: &[
                Key {
                    name: "flip_fraction",
                    ty: "float",
                    default: "0.0",
                    doc: "fractional flip-angle error; the applied angle is angle * (1 + value)",
                },
                Key {
                    name: "phase_offset",
                    ty: "float",
                    default: "0.0",
                    doc: "azimuth offset in radians added to every pulse",
                },
                Key {
                    name: "width",
                    ty: "float",
                    default: "0.0",
                    doc: "pulse duration (>= 0); 0 means ideal delta pulses",
                },
                Key {
                    name: "include_internal_during_pulse",
                    ty: "bool",
                    default: "false",
                    doc: "let the internal Hamiltonian act during finite-width pulses",
                },
            ],
        },
        Section {
            header: "[run]",
            intro: "What to compute.",
            keys: &[
                Key {
                    name: "kind",
                    ty: "string",
                    default: "required",
                    doc: "one of `toggling`, `evolve`, `compare`, `scan`, `fid`",
                },
                Key {
                    name: "n_cycles",
                    ty: "integer",
                    default: "required for evolve/compare/scan",
                    doc: "cycles of the main sequence; other kinds reject it",
                },
                Key {
                    name: "n_realizations",
                    ty: "integer",
                    default: "1",
                    doc: "disorder realizations; > 1 requires [geometry]",
                },
                Key {
                    name: "seed",
                    ty: "integer",
                    default: "0 (explicit system only)",
                    doc: "master seed; required when [geometry] is present",
                },
                Key {
                    name: "workers",
                    ty: "integer",
                    default: "unset (global pool)",
                    doc: "worker threads for realizations; results are identical for any count",
                },
                Key {
                    name: "compare_with",
                    ty: "array of string",
                    default: "required for compare",
                    doc: "baseline sequences run on the same realizations, same total time",
                },
                Key {
                    name: "scan_parameter",
                    ty: "string",
                    default: "required for scan",
                    doc: "one of `flip_fraction`, `phase_offset`, `width`, `tau`, `gap_frac`",
                },
                Key {
                    name: "scan_values",
                    ty: "array of float",
                    default: "required for scan",
                    doc: "grid values; total time is held fixed when scanning tau",
                },
                Key {
                    name: "horizon",
                    ty: "float",
                    default: "1e3 / ||H||",
                    doc: "decay-time search horizon (fid only)",
                },
                Key {
                    name: "initial_state",
                    ty: "string",
                    default: "all_transverse_x",
                    doc: "`all_transverse_x` or `single_qubit` (evolve/compare/scan)",
                },
                Key {
                    name: "initial_site",
                    ty: "integer",
                    default: "required for single_qubit",
                    doc: "which spin carries the Bloch vector",
                },
                Key {
                    name: "initial_bloch",
                    ty: "[x, y, z]",
                    default: "required for single_qubit",
                    doc: "Bloch vector of that spin, length <= 1; the rest start along +z",
                },
            ],
        },
        Section {
            header: "[output]",
            intro: "Where and how results are written.",
            keys: &[
                Key {
                    name: "path",
                    ty: "string",
                    default: "unset (stdout)",
                    doc: "output file path; `--out` overrides",
                },
                Key {
                    name: "format",
                    ty: "string",
                    default: "csv (structured for toggling)",
                    doc: "`csv` or `structured`; toggling also accepts `json` but not `csv`",
                },
            ],
        },
    ];

    let mut out = String::from(
        "Configuration reference\n\
         =======================\n\
         TOML document with sections [system] or [geometry], [sequence], [errors],\n\
         [run], [output]. Unknown keys are rejected. All durations are in the same\n\
         arbitrary units as the Hamiltonian's inverse frequencies.\n",
    );
    for s in SECTIONS {
        out.push('\n');
        out.push_str(s.header);
        out.push('\n');
        out.push_str(s.intro);
        out.push('\n');
        for k in s.keys {
            out.push_str(&format!(
                "  {:<28} {:<22} default: {}\n      {}\n",
                k.name, k.ty, k.default, k.doc
            ));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::Path;

    const MINIMAL_EVOLVE: &str = r#"
[system]
detunings = [1.0, -1.0]
couplings = [0.5]

[sequence]
kind = "proposed"
tau = 0.01

[run]
kind = "evolve"
n_cycles = 100
seed = 1
"#;

    #[test]
    fn minimal_evolve_config_is_valid() {
        let cfg = parse_config(MINIMAL_EVOLVE).unwrap();
        assert!(matches!(cfg.kind, RunKind::Evolve));
        assert_eq!(cfg.main_kind, SequenceKind::Proposed);
        assert_eq!(cfg.n_cycles, 100);
        assert_eq!(cfg.n_realizations, 1);
        assert_eq!(cfg.master_seed, 1);
        assert_eq!(cfg.format, OutputFormat::Csv);
        assert!(cfg.errors.is_ideal());
        assert!(matches!(cfg.source, SystemSource::Explicit(ref s) if s.n_spins() == 2));
        assert!((cfg.sequence.tau() - 0.01).abs() < 1e-15);
    }

    #[test]
    fn negative_tau_names_the_key() {
        let text = MINIMAL_EVOLVE.replace("tau = 0.01", "tau = -1.0");
        let err = parse_config(&text).unwrap_err();
        assert!(err.to_string().contains("sequence.tau"), "{err}");
    }

    #[test]
    fn bad_angle_power_names_the_key() {
        let text = r#"
[geometry]
placement = "box"
n_spins = 3
side = 2.0
min_separation = 0.5
detuning_std = 0.5
dipolar_angle_power = 3

[sequence]
kind = "proposed"
tau = 0.01

[run]
kind = "evolve"
n_cycles = 10
seed = 7
"#;
        let err = parse_config(text).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("geometry.dipolar_angle_power"), "{msg}");
        assert!(msg.contains("1, 2"), "{msg}");
    }

    #[test]
    fn unknown_key_reports_name_and_line() {
        let text = MINIMAL_EVOLVE.replace("n_cycles = 100", "n_cycles = 100\nbogus_key = 3");
        let err = parse_config(&text).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("bogus_key"), "{msg}");
        assert!(msg.contains("line"), "{msg}");
    }

    #[test]
    fn missing_sections_are_reported() {
        let err = parse_config("[run]\nkind = \"evolve\"\n").unwrap_err();
        assert!(err.to_string().contains("sequence"), "{err}");

        let text = MINIMAL_EVOLVE.replace("[system]\ndetunings = [1.0, -1.0]\ncouplings = [0.5]\n", "");
        let err = parse_config(&text).unwrap_err();
        assert!(err.to_string().contains("system"), "{err}");
    }

    #[test]
    fn geometry_requires_seed() {
        let text = r#"
[geometry]
placement = "box"
n_spins = 3
side = 2.0
min_separation = 0.5
detuning_std = 0.5

[sequence]
kind = "proposed"
tau = 0.01

[run]
kind = "evolve"
n_cycles = 10
"#;
        let err = parse_config(text).unwrap_err();
        assert!(err.to_string().contains("run.seed"), "{err}");
    }

    #[test]
    fn explicit_system_rejects_multiple_realizations() {
        let text = MINIMAL_EVOLVE.replace("n_cycles = 100", "n_cycles = 100\nn_realizations = 2");
        let err = parse_config(&text).unwrap_err();
        assert!(err.to_string().contains("run.n_realizations"), "{err}");
    }

    #[test]
    fn compare_keys_are_validated() {
        let with = |extra: &str| {
            MINIMAL_EVOLVE.replace("kind = \"evolve\"", &format!("kind = \"compare\"{extra}"))
        };
        let err = parse_config(&with("")).unwrap_err();
        assert!(err.to_string().contains("run.compare_with"), "{err}");

        let ok = parse_config(&with("\ncompare_with = [\"free\", \"cpmg\"]")).unwrap();
        match ok.kind {
            RunKind::Compare { baselines } => {
                assert_eq!(baselines, vec![SequenceKind::Free, SequenceKind::Cpmg]);
            }
            other => panic!("expected compare, got {other:?}"),
        }

        let err = parse_config(&with("\ncompare_with = [\"proposed\"]")).unwrap_err();
        assert!(err.to_string().contains("more than once"), "{err}");

        let err = parse_config(
            &MINIMAL_EVOLVE.replace("n_cycles = 100", "n_cycles = 100\ncompare_with = [\"free\"]"),
        )
        .unwrap_err();
        assert!(err.to_string().contains("only used by compare"), "{err}");
    }

    #[test]
    fn scan_keys_are_validated() {
        let base = MINIMAL_EVOLVE.replace("kind = \"evolve\"", "kind = \"scan\"");
        let err = parse_config(&base).unwrap_err();
        assert!(err.to_string().contains("run.scan_parameter"), "{err}");

        let ok = parse_config(&format!(
            "{base}scan_parameter = \"flip_fraction\"\nscan_values = [0.0, 0.01, 0.02, 0.05]\n"
        ))
        .unwrap();
        match ok.kind {
            RunKind::Scan { parameter, values } => {
                assert_eq!(parameter, ScanParameter::FlipFraction);
                assert_eq!(values.len(), 4);
            }
            other => panic!("expected scan, got {other:?}"),
        }

        let err = parse_config(&format!(
            "{base}scan_parameter = \"tau\"\nscan_values = [0.01, -0.02]\n"
        ))
        .unwrap_err();
        assert!(err.to_string().contains("run.scan_values"), "{err}");

        let cpmg = base.replace("kind = \"proposed\"", "kind = \"cpmg\"");
        let err = parse_config(&format!(
            "{cpmg}scan_parameter = \"gap_frac\"\nscan_values = [0.0, 0.1]\n"
        ))
        .unwrap_err();
        assert!(err.to_string().contains("proposed"), "{err}");
    }

    #[test]
    fn format_compatibility_per_kind() {
        let toggling = MINIMAL_EVOLVE
            .replace("kind = \"evolve\"", "kind = \"toggling\"")
            .replace("n_cycles = 100\n", "");
        let cfg = parse_config(&toggling).unwrap();
        assert_eq!(cfg.format, OutputFormat::Structured);

        let err = parse_config(&format!("{toggling}\n[output]\nformat = \"csv\"\n")).unwrap_err();
        assert!(err.to_string().contains("output.format"), "{err}");

        let ok = parse_config(&format!("{toggling}\n[output]\nformat = \"json\"\n")).unwrap();
        assert_eq!(ok.format, OutputFormat::Json);

        let err =
            parse_config(&format!("{MINIMAL_EVOLVE}\n[output]\nformat = \"json\"\n")).unwrap_err();
        assert!(err.to_string().contains("only available for toggling"), "{err}");
    }

    #[test]
    fn fid_and_toggling_reject_cycle_counts() {
        let fid = MINIMAL_EVOLVE.replace("kind = \"evolve\"", "kind = \"fid\"");
        let err = parse_config(&fid).unwrap_err();
        assert!(err.to_string().contains("run.n_cycles"), "{err}");

        let ok = parse_config(&fid.replace("n_cycles = 100\n", "")).unwrap();
        assert!(matches!(ok.kind, RunKind::Fid));
        assert_eq!(ok.n_cycles, 0);
    }

    #[test]
    fn single_qubit_initial_state_is_checked() {
        let with = |extra: &str| format!("{MINIMAL_EVOLVE}{extra}");
        let ok = parse_config(&with(
            "initial_state = \"single_qubit\"\ninitial_site = 1\ninitial_bloch = [1.0, 0.0, 0.0]\n",
        ))
        .unwrap();
        assert!(matches!(ok.initial, InitialState::SingleQubit { site: 1, .. }));

        let err = parse_config(&with(
            "initial_state = \"single_qubit\"\ninitial_site = 5\ninitial_bloch = [1.0, 0.0, 0.0]\n",
        ))
        .unwrap_err();
        assert!(err.to_string().contains("run.initial_site"), "{err}");

        let err = parse_config(&with("initial_site = 0\n")).unwrap_err();
        assert!(err.to_string().contains("single_qubit"), "{err}");
    }

    #[test]
    fn digest_tracks_text() {
        let a = parse_config(MINIMAL_EVOLVE).unwrap();
        let b = parse_config(MINIMAL_EVOLVE).unwrap();
        assert_eq!(a.digest, b.digest);
        assert_eq!(a.digest.len(), 64);
        let c = parse_config(&MINIMAL_EVOLVE.replace("seed = 1", "seed = 2")).unwrap();
        assert_ne!(a.digest, c.digest);
    }

    #[test]
    fn reference_doc_covers_all_sections_and_keys() {
        let doc = config_reference();
        for section in ["[system]", "[geometry]", "[sequence]", "[errors]", "[run]", "[output]"] {
            assert!(doc.contains(section), "missing {section}");
        }
        for key in [
            "detunings",
            "couplings",
            "placement",
            "dipolar_angle_power",
            "tau",
            "gap_frac",
            "flip_fraction",
            "n_cycles",
            "compare_with",
            "scan_parameter",
            "horizon",
            "initial_bloch",
            "workers",
            "format",
        ] {
            assert!(doc.contains(key), "missing {key}");
        }
    }

    #[test]
    fn overrides_apply_before_validation() {
        let text = r#"
[geometry]
placement = "box"
n_spins = 3
side = 2.0
min_separation = 0.5
detuning_std = 0.5

[sequence]
kind = "proposed"
tau = 0.01

[run]
kind = "evolve"
n_cycles = 10
"#;
        parse_config(text).unwrap_err();
        let ok =
            parse_config_with(text, &Overrides { seed: Some(9), ..Default::default() }).unwrap();
        assert_eq!(ok.master_seed, 9);
        assert_eq!(ok.digest, config_digest(text));

        let toggling = MINIMAL_EVOLVE
            .replace("kind = \"evolve\"", "kind = \"toggling\"")
            .replace("n_cycles = 100\n", "");
        let err = parse_config_with(
            &toggling,
            &Overrides { format: Some(OutputFormat::Csv), ..Default::default() },
        )
        .unwrap_err();
        assert!(err.to_string().contains("output.format"), "{err}");

        let out = parse_config_with(
            MINIMAL_EVOLVE,
            &Overrides { path: Some(PathBuf::from("results.csv")), ..Default::default() },
        )
        .unwrap();
        assert_eq!(out.output_path.as_deref(), Some(Path::new("results.csv")));
    }

    #[test]
    fn toggling_rejects_pulse_errors() {
        let toggling = MINIMAL_EVOLVE
            .replace("kind = \"evolve\"", "kind = \"toggling\"")
            .replace("n_cycles = 100\n", "");
        let err = parse_config(&format!("{toggling}\n[errors]\nflip_fraction = 0.01\n"))
            .unwrap_err();
        assert!(err.to_string().contains("ideal sequence"), "{err}");

        let ok = parse_config(&format!("{toggling}\n[errors]\nflip_fraction = 0.0\n")).unwrap();
        assert!(ok.errors.is_ideal());
    }

    #[test]
    fn workers_zero_rejected() {
        let text = MINIMAL_EVOLVE.replace("n_cycles = 100", "n_cycles = 100\nworkers = 0");
        let err = parse_config(&text).unwrap_err();
        assert!(err.to_string().contains("run.workers"), "{err}");
    }
}

//! Executes a validated run configuration and renders the result file.
//!
//! Comparison fairness: every sequence in a `compare` run sees the identical
//! realization (same seed, same index) and runs for the cycle count that
//! best matches the main sequence's total time. `scan` holds total time
//! fixed the same way when the scanned parameter changes the cycle length.

use std::f64::consts::FRAC_PI_2;
use std::fmt::Write as _;

use serde_json::json;
use thiserror::Error;

use crate::averaging::{toggled_symbolic, AveragingError};
use crate::config::{OutputFormat, RunConfig, RunKind, ScanParameter, SequenceKind};
use crate::dynamics::{
    cycle_propagator, fid_decay_time, initial_state, run_realizations, stroboscopic_evolution,
    DecayTime, DynamicsError, InitialState, ObservableSeries, RealizationSet,
    DEFAULT_FID_SAMPLES,
};
use crate::output::{fmt_f64, CsvBody, ResultFile};
use crate::sequence::{PulseErrorModel, PulseEvent, Sequence, SequenceError};
use crate::system::SpinSystem;

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Averaging(#[from] AveragingError),
    #[error(transparent)]
    Sequence(#[from] SequenceError),
}

/// Runs the experiment described by the config.
pub fn run(config: &RunConfig) -> Result<ResultFile, RunnerError> {
    match config.kind.clone() {
        RunKind::Toggling => run_toggling(config),
        RunKind::Evolve => run_evolve(config),
        RunKind::Compare { baselines } => run_compare(config, &baselines),
        RunKind::Scan { parameter, values } => run_scan(config, parameter, &values),
        RunKind::Fid => run_fid(config),
    }
}

fn base_file(config: &RunConfig) -> ResultFile {
    let mut file = ResultFile::new(&config.digest, config.master_seed);
    file.push_header(format!("kind {}", config.kind.name()));
    file.push_header(format!(
        "sequence {} tau {}",
        config.sequence.name(),
        fmt_f64(config.sequence.tau())
    ));
    file
}

/// Angles print as multiples of pi when they sit on the quarter-pi grid, and
/// in radians otherwise.
fn angle_label(radians: f64) -> String {
    let quarters = radians / FRAC_PI_2;
    let snapped = quarters.round();
    if (quarters - snapped).abs() < 1e-9 {
        format!("{} pi", fmt_f64(snapped * 0.5))
    } else {
        format!("{} rad", fmt_f64(radians))
    }
}

fn pulse_label(event: &PulseEvent) -> String {
    format!(
        "t/tau {}: azimuth {}, angle {}",
        event.time_mult(),
        angle_label(event.azimuth()),
        angle_label(event.angle())
    )
}

fn indented(text: &str, pad: &str) -> String {
    let mut out = String::new();
    for line in text.lines() {
        out.push_str(pad);
        out.push_str(line);
        out.push('\n');
    }
    out
}

fn run_toggling(config: &RunConfig) -> Result<ResultFile, RunnerError> {
    let n = config.source.n_spins();
    let h = SpinSystem::hamiltonian_symbolic(n);
    let seq = &config.sequence;
    let frame = toggled_symbolic(seq, &h)?;
    let magnus = frame.magnus();
    let intervals = seq.frame_intervals();
    let segments = frame.segments();

    let mut file = base_file(config);
    let mut fired_so_far = 0usize;
    if config.format == OutputFormat::Json {
        let mut interval_docs = Vec::new();
        for (interval, segment) in intervals.iter().zip(segments) {
            let fired: Vec<String> =
                interval.pulses_applied[fired_so_far..].iter().map(pulse_label).collect();
            fired_so_far = interval.pulses_applied.len();
            interval_docs.push(json!({
                "start_mult": interval.start.to_string(),
                "end_mult": interval.end.to_string(),
                "weight": segment.weight.to_string(),
                "pulses_before": fired,
                "hamiltonian": segment.hamiltonian.to_string(),
            }));
        }
        let closing: Vec<String> =
            seq.events()[fired_so_far..].iter().map(pulse_label).collect();
        let doc = json!({
            "sequence": seq.name(),
            "spins": n,
            "cycle_time_mult": frame.cycle_mult().to_string(),
            "intervals": interval_docs,
            "closing_pulses": closing,
            "zeroth_average": magnus.zeroth.to_string(),
            "first_magnus": magnus.first.to_string(),
        });
        let rendered = serde_json::to_string_pretty(&doc).expect("json value serializes");
        file.body = format!("{rendered}\n");
        return Ok(file);
    }

    let mut out = String::new();
    let _ = writeln!(out, "sequence {}", seq.name());
    let _ = writeln!(out, "spins {n}");
    let _ = writeln!(out, "cycle_time {}*tau", frame.cycle_mult());
    let _ = writeln!(out);
    for (i, (interval, segment)) in intervals.iter().zip(segments).enumerate() {
        for event in &interval.pulses_applied[fired_so_far..] {
            let _ = writeln!(out, "pulse at {}", pulse_label(event));
        }
        fired_so_far = interval.pulses_applied.len();
        let _ = writeln!(
            out,
            "interval {}: t/tau in [{}, {}], weight {}",
            i + 1,
            interval.start,
            interval.end,
            segment.weight
        );
        out.push_str(&indented(&segment.hamiltonian.to_string(), "  "));
    }
    for event in &seq.events()[fired_so_far..] {
        let _ = writeln!(out, "pulse at {}", pulse_label(event));
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "zeroth_average:");
    let _ = writeln!(out, "{}", magnus.zeroth);
    let _ = writeln!(out);
    let _ = writeln!(out, "first_magnus:");
    let _ = writeln!(out, "{}", magnus.first);
    file.body = out;
    Ok(file)
}

fn evolve_once(
    seq: &Sequence,
    errors: &PulseErrorModel,
    initial: &InitialState,
    n_cycles: u64,
    sys: &SpinSystem,
) -> Result<ObservableSeries, DynamicsError> {
    let u = cycle_propagator(seq, sys, errors)?;
    let rho0 = initial_state(initial, sys.n_spins())?;
    stroboscopic_evolution(&rho0, &u, seq.cycle_time(), n_cycles)
}

fn failure_comments(csv: &mut CsvBody, failures: &[(u64, String)]) {
    for (idx, msg) in failures {
        csv.comment(&format!("realization {idx} failed: {msg}"));
    }
}

fn series_rows(csv: &mut CsvBody, idx: u64, series: &ObservableSeries) {
    let label = idx.to_string();
    for k in 0..series.len() {
        csv.row(
            series.times[k],
            &label,
            series.fidelity[k],
            [series.mx[k], series.my[k], series.mz[k]],
        );
    }
}

fn series_table(out: &mut String, pad: &str, series: &ObservableSeries) {
    let _ = writeln!(out, "{pad}columns time fidelity mx my mz");
    for k in 0..series.len() {
        let _ = writeln!(
            out,
            "{pad}{} {} {} {} {}",
            fmt_f64(series.times[k]),
            fmt_f64(series.fidelity[k]),
            fmt_f64(series.mx[k]),
            fmt_f64(series.my[k]),
            fmt_f64(series.mz[k]),
        );
    }
}

fn structured_failures(out: &mut String, failures: &[(u64, String)]) {
    for (idx, msg) in failures {
        let _ = writeln!(out, "realization {idx} failed: {msg}");
    }
}

fn run_evolve(config: &RunConfig) -> Result<ResultFile, RunnerError> {
    let set: RealizationSet<(SpinSystem, ObservableSeries)> =
        run_realizations(config.n_realizations, config.workers, |idx| {
            let sys = config.source.realize(config.master_seed, idx)?;
            let series = evolve_once(
                &config.sequence,
                &config.errors,
                &config.initial,
                config.n_cycles,
                &sys,
            )?;
            Ok((sys, series))
        })?;

    let mut file = base_file(config);
    file.push_header(format!(
        "cycle_time {} n_cycles {} n_realizations {}",
        fmt_f64(config.sequence.cycle_time()),
        config.n_cycles,
        config.n_realizations
    ));
    file.body = match config.format {
        OutputFormat::Csv => {
            let mut csv = CsvBody::new();
            failure_comments(&mut csv, &set.failures);
            for (idx, (_, series)) in &set.outcomes {
                series_rows(&mut csv, *idx, series);
            }
            csv.finish()
        }
        _ => {
            let mut out = String::new();
            let _ = writeln!(out, "sequence {}", config.sequence.name());
            let _ = writeln!(out, "cycle_time {}", fmt_f64(config.sequence.cycle_time()));
            let _ = writeln!(out, "n_cycles {}", config.n_cycles);
            structured_failures(&mut out, &set.failures);
            for (idx, (sys, series)) in &set.outcomes {
                let _ = writeln!(out);
                let _ = writeln!(out, "realization {idx}");
                out.push_str(&indented(&sys.to_text(), "  "));
                series_table(&mut out, "  ", series);
            }
            out
        }
    };
    Ok(file)
}

/// One sequence of a comparison, with its equal-total-time cycle count.
struct SequencePlan {
    seq: Sequence,
    n_cycles: u64,
}

fn cycles_for_total(total_time: f64, cycle_time: f64) -> u64 {
    ((total_time / cycle_time).round() as u64).max(1)
}

fn compare_plans(
    config: &RunConfig,
    baselines: &[SequenceKind],
) -> Result<Vec<SequencePlan>, RunnerError> {
    let total = config.sequence.cycle_time() * config.n_cycles as f64;
    let mut plans =
        vec![SequencePlan { seq: config.sequence.clone(), n_cycles: config.n_cycles }];
    for &kind in baselines {
        let seq = kind.build(config.sequence.tau(), 0.0, true)?;
        let n_cycles = cycles_for_total(total, seq.cycle_time());
        plans.push(SequencePlan { seq, n_cycles });
    }
    Ok(plans)
}

fn run_compare(
    config: &RunConfig,
    baselines: &[SequenceKind],
) -> Result<ResultFile, RunnerError> {
    let plans = compare_plans(config, baselines)?;
    let set: RealizationSet<(SpinSystem, Vec<ObservableSeries>)> =
        run_realizations(config.n_realizations, config.workers, |idx| {
            let sys = config.source.realize(config.master_seed, idx)?;
            let mut all = Vec::with_capacity(plans.len());
            for plan in &plans {
                all.push(evolve_once(
                    &plan.seq,
                    &config.errors,
                    &config.initial,
                    plan.n_cycles,
                    &sys,
                )?);
            }
            Ok((sys, all))
        })?;

    let mut file = base_file(config);
    file.push_header(format!(
        "total_time {} n_realizations {}",
        fmt_f64(config.sequence.cycle_time() * config.n_cycles as f64),
        config.n_realizations
    ));
    file.body = match config.format {
        OutputFormat::Csv => {
            let mut csv = CsvBody::new();
            failure_comments(&mut csv, &set.failures);
            for (p, plan) in plans.iter().enumerate() {
                csv.comment(&format!(
                    "sequence {} cycle_time {} n_cycles {}",
                    plan.seq.name(),
                    fmt_f64(plan.seq.cycle_time()),
                    plan.n_cycles
                ));
                for (idx, (_, all)) in &set.outcomes {
                    series_rows(&mut csv, *idx, &all[p]);
                }
            }
            csv.finish()
        }
        _ => {
            let mut out = String::new();
            structured_failures(&mut out, &set.failures);
            for (idx, (sys, _)) in &set.outcomes {
                let _ = writeln!(out, "realization {idx}");
                out.push_str(&indented(&sys.to_text(), "  "));
            }
            for (p, plan) in plans.iter().enumerate() {
                let _ = writeln!(out);
                let _ = writeln!(out, "sequence {}", plan.seq.name());
                let _ = writeln!(out, "  cycle_time {}", fmt_f64(plan.seq.cycle_time()));
                let _ = writeln!(out, "  n_cycles {}", plan.n_cycles);
                for (idx, (_, all)) in &set.outcomes {
                    let _ = writeln!(out, "  realization {idx}");
                    series_table(&mut out, "    ", &all[p]);
                }
            }
            out
        }
    };
    Ok(file)
}

/// One grid point of a scan: the sequence, error model, and cycle count in
/// effect at that value.
struct ScanPoint {
    value: f64,
    seq: Sequence,
    errors: PulseErrorModel,
    n_cycles: u64,
}

fn scan_points(
    config: &RunConfig,
    parameter: ScanParameter,
    values: &[f64],
) -> Result<Vec<ScanPoint>, RunnerError> {
    let total = config.sequence.cycle_time() * config.n_cycles as f64;
    let mut points = Vec::with_capacity(values.len());
    for &value in values {
        let point = match parameter {
            ScanParameter::FlipFraction => ScanPoint {
                value,
                seq: config.sequence.clone(),
                errors: PulseErrorModel { flip_fraction: value, ..config.errors },
                n_cycles: config.n_cycles,
            },
            ScanParameter::PhaseOffset => ScanPoint {
                value,
                seq: config.sequence.clone(),
                errors: PulseErrorModel { phase_offset: value, ..config.errors },
                n_cycles: config.n_cycles,
            },
            ScanParameter::Width => ScanPoint {
                value,
                seq: config.sequence.clone(),
                errors: PulseErrorModel { width: value, ..config.errors },
                n_cycles: config.n_cycles,
            },
            ScanParameter::Tau => {
                let seq = config.sequence.with_tau(value)?;
                let n_cycles = cycles_for_total(total, seq.cycle_time());
                ScanPoint { value, seq, errors: config.errors, n_cycles }
            }
            ScanParameter::GapFrac => {
                let seq = SequenceKind::Proposed.build(
                    config.sequence.tau(),
                    value,
                    config.sequence.includes_closing_pulse(),
                )?;
                ScanPoint { value, seq, errors: config.errors, n_cycles: config.n_cycles }
            }
        };
        points.push(point);
    }
    Ok(points)
}

/// Endpoint observables of one evolution.
struct FinalSample {
    time: f64,
    fidelity: f64,
    m: [f64; 3],
}

fn final_sample(series: &ObservableSeries) -> FinalSample {
    let k = series.len() - 1;
    FinalSample {
        time: series.times[k],
        fidelity: series.fidelity[k],
        m: [series.mx[k], series.my[k], series.mz[k]],
    }
}

fn run_scan(
    config: &RunConfig,
    parameter: ScanParameter,
    values: &[f64],
) -> Result<ResultFile, RunnerError> {
    let points = scan_points(config, parameter, values)?;
    let set: RealizationSet<Vec<FinalSample>> =
        run_realizations(config.n_realizations, config.workers, |idx| {
            let sys = config.source.realize(config.master_seed, idx)?;
            let mut finals = Vec::with_capacity(points.len());
            for point in &points {
                let series =
                    evolve_once(&point.seq, &point.errors, &config.initial, point.n_cycles, &sys)?;
                finals.push(final_sample(&series));
            }
            Ok(finals)
        })?;

    let n_ok = set.outcomes.len() as f64;
    let mean_at = |p: usize, f: &dyn Fn(&FinalSample) -> f64| -> f64 {
        set.outcomes.iter().map(|(_, finals)| f(&finals[p])).sum::<f64>() / n_ok
    };

    let mut file = base_file(config);
    file.push_header(format!(
        "scan {} n_realizations {}",
        parameter.name(),
        config.n_realizations
    ));
    file.body = match config.format {
        OutputFormat::Csv => {
            let mut csv = CsvBody::new();
            failure_comments(&mut csv, &set.failures);
            for (p, point) in points.iter().enumerate() {
                csv.comment(&format!("scan {} = {}", parameter.name(), fmt_f64(point.value)));
                csv.row(
                    mean_at(p, &|s| s.time),
                    "mean",
                    mean_at(p, &|s| s.fidelity),
                    [
                        mean_at(p, &|s| s.m[0]),
                        mean_at(p, &|s| s.m[1]),
                        mean_at(p, &|s| s.m[2]),
                    ],
                );
            }
            csv.finish()
        }
        _ => {
            let mut out = String::new();
            let _ = writeln!(out, "scan {}", parameter.name());
            structured_failures(&mut out, &set.failures);
            for (p, point) in points.iter().enumerate() {
                let _ = writeln!(out);
                let _ = writeln!(out, "value {}", fmt_f64(point.value));
                let _ = writeln!(out, "  cycle_time {}", fmt_f64(point.seq.cycle_time()));
                let _ = writeln!(out, "  n_cycles {}", point.n_cycles);
                let _ = writeln!(out, "  columns realization time fidelity mx my mz");
                for (idx, finals) in &set.outcomes {
                    let s = &finals[p];
                    let _ = writeln!(
                        out,
                        "  {idx} {} {} {} {} {}",
                        fmt_f64(s.time),
                        fmt_f64(s.fidelity),
                        fmt_f64(s.m[0]),
                        fmt_f64(s.m[1]),
                        fmt_f64(s.m[2]),
                    );
                }
                let _ = writeln!(
                    out,
                    "  mean {} {} {} {} {}",
                    fmt_f64(mean_at(p, &|s| s.time)),
                    fmt_f64(mean_at(p, &|s| s.fidelity)),
                    fmt_f64(mean_at(p, &|s| s.m[0])),
                    fmt_f64(mean_at(p, &|s| s.m[1])),
                    fmt_f64(mean_at(p, &|s| s.m[2])),
                );
            }
            out
        }
    };
    Ok(file)
}

fn run_fid(config: &RunConfig) -> Result<ResultFile, RunnerError> {
    let set: RealizationSet<(SpinSystem, DecayTime)> =
        run_realizations(config.n_realizations, config.workers, |idx| {
            let sys = config.source.realize(config.master_seed, idx)?;
            let decay = fid_decay_time(&sys, config.horizon, DEFAULT_FID_SAMPLES)?;
            Ok((sys, decay))
        })?;

    let threshold = (-1.0f64).exp();
    let mut file = base_file(config);
    file.push_header(format!("n_realizations {}", config.n_realizations));
    file.body = match config.format {
        OutputFormat::Csv => {
            let mut csv = CsvBody::new();
            failure_comments(&mut csv, &set.failures);
            for (idx, (_, decay)) in &set.outcomes {
                match decay {
                    DecayTime::Crossing(t) => {
                        csv.row(*t, &idx.to_string(), threshold, [0.0; 3]);
                    }
                    DecayTime::ExceedsHorizon { horizon } => {
                        csv.comment(&format!(
                            "realization {idx}: no crossing within horizon {}",
                            fmt_f64(*horizon)
                        ));
                        csv.row(*horizon, &idx.to_string(), f64::NAN, [0.0; 3]);
                    }
                }
            }
            csv.finish()
        }
        _ => {
            let mut out = String::new();
            structured_failures(&mut out, &set.failures);
            for (idx, (sys, decay)) in &set.outcomes {
                let _ = writeln!(out, "realization {idx}");
                out.push_str(&indented(&sys.to_text(), "  "));
                match decay {
                    DecayTime::Crossing(t) => {
                        let _ = writeln!(out, "  decay_time {}", fmt_f64(*t));
                    }
                    DecayTime::ExceedsHorizon { horizon } => {
                        let _ = writeln!(
                            out,
                            "  decay_time none within horizon {}",
                            fmt_f64(*horizon)
                        );
                    }
                }
            }
            out
        }
    };
    Ok(file)
}

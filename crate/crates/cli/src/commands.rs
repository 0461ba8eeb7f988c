use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Args;
use lambda_raman::magnus::{constraints, Order};
use lambda_raman::optimizer::solve;
use lambda_raman::robustness::{delta_max, robustness_sweep, RobustnessConfig};
use lambda_raman::simulator::{fidelity_windows, propagate, IntegratorOptions, TargetFrame};
use lambda_raman::{mc_pulse, DrivingConfig, Error, OptimizationResult, Pulse, SolverOptions};
use serde::{Deserialize, Serialize};

use crate::manifest::RunManifest;
use crate::output::{fmt_f64, sidecar, write_csv, write_json};
use crate::CliError;

fn input(e: impl std::fmt::Display) -> CliError {
    CliError::Input(e.to_string())
}

fn numerical(e: impl std::fmt::Display) -> CliError {
    CliError::Numerical(e.to_string())
}

fn parse_frame(s: &str) -> Result<TargetFrame, String> {
    match s {
        "light-shifted" => Ok(TargetFrame::LightShifted),
        "bare" => Ok(TargetFrame::Bare),
        other => Err(format!(
            "unknown frame '{other}', expected 'light-shifted' or 'bare'"
        )),
    }
}

/// `mc` or a path to a pulse JSON file.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(into = "String")]
pub enum PulseSource {
    Mc,
    File(PathBuf),
}

impl FromStr for PulseSource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(if s == "mc" {
            PulseSource::Mc
        } else {
            PulseSource::File(PathBuf::from(s))
        })
    }
}

impl From<PulseSource> for String {
    fn from(p: PulseSource) -> String {
        match p {
            PulseSource::Mc => "mc".to_owned(),
            PulseSource::File(path) => path.display().to_string(),
        }
    }
}

/// Reads `[f_1, ..]` or an object with a `pulse` array (the `optimize` output).
pub fn load_pulse(path: &Path) -> Result<Pulse, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| input(format!("cannot read pulse file {}: {e}", path.display())))?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| {
        input(format!(
            "pulse file {} is not valid JSON: {e}",
            path.display()
        ))
    })?;
    let array = match &value {
        serde_json::Value::Object(map) => map.get("pulse").cloned(),
        serde_json::Value::Array(_) => Some(value.clone()),
        _ => None,
    }
    .ok_or_else(|| {
        input(format!(
            "pulse file {} has no 'pulse' array",
            path.display()
        ))
    })?;
    let amplitudes: Vec<f64> = serde_json::from_value(array)
        .map_err(|e| input(format!("bad pulse array in {}: {e}", path.display())))?;
    Pulse::new(amplitudes).map_err(input)
}

/// Config plus pulse; `--n` defaults to the pulse file's length, or 10 for `mc`.
fn resolve_pulse(
    source: &PulseSource,
    n: Option<usize>,
    n0: u32,
    omega_tg: f64,
) -> Result<(DrivingConfig, Pulse), CliError> {
    match source {
        PulseSource::Mc => {
            let config = DrivingConfig::new(n.unwrap_or(10), n0, omega_tg).map_err(input)?;
            Ok((config, mc_pulse(&config)))
        }
        PulseSource::File(path) => {
            let pulse = load_pulse(path)?;
            let config =
                DrivingConfig::new(n.unwrap_or(pulse.len()), n0, omega_tg).map_err(input)?;
            pulse.check(&config).map_err(input)?;
            Ok((config, pulse))
        }
    }
}

// ---------------------------------------------------------------- optimize

#[derive(Debug, Clone, Args, Serialize)]
pub struct OptimizeArgs {
    /// Target Raman rate in units of ω.
    #[arg(long = "omega-tg", default_value_t = 0.05)]
    pub omega_tg: f64,
    /// Number of Fourier components N.
    #[arg(long, default_value_t = 10)]
    pub n: usize,
    /// Counter-rotating index n₀.
    #[arg(long, default_value_t = 4)]
    pub n0: u32,
    /// Constraint order, 2 or 3.
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u8).range(2..=3))]
    pub order: u8,
    /// Output JSON path.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
    #[arg(long = "max-iter", default_value_t = 100)]
    pub max_iter: usize,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct OptimizeOutput {
    pub pulse: Vec<f64>,
    pub lambda1: f64,
    pub lambda2: f64,
    pub order: u8,
    pub residual_norm: f64,
    pub predicted_f2: f64,
    pub iterations: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub manifest: RunManifest,
}

pub fn optimize(args: &OptimizeArgs, argv: &[String]) -> Result<(), CliError> {
    let config = DrivingConfig::new(args.n, args.n0, args.omega_tg).map_err(input)?;
    let order = Order::try_from(args.order).map_err(input)?;
    let options = SolverOptions {
        tol: args.tol,
        max_iter: args.max_iter,
        ..SolverOptions::default()
    };
    let manifest = RunManifest::new("optimize", args, argv);

    let write = |result: &OptimizationResult, error: Option<String>| -> Result<(), CliError> {
        let report = constraints(&result.pulse, &config, order).map_err(numerical)?;
        let out = OptimizeOutput {
            pulse: result.pulse.amplitudes().to_vec(),
            lambda1: result.lambda1,
            lambda2: result.lambda2,
            order: result.order,
            residual_norm: result.residual_norm,
            predicted_f2: report.predicted_f2,
            iterations: result.iterations,
            error,
            manifest: manifest.clone(),
        };
        write_json(&args.out, &out)
    };

    match solve(&config, order, &options) {
        Ok(result) => write(&result, None),
        Err(Error::NonConvergence { iterate, .. }) => {
            let message = format!(
                "third-order solver did not converge (residual {:e})",
                iterate.residual_norm
            );
            write(&iterate, Some(message.clone()))?;
            Err(CliError::Numerical(message))
        }
        Err(e @ Error::InvalidConfig(_)) => Err(input(e)),
        Err(e) => Err(numerical(e)),
    }
}

// ---------------------------------------------------------------- simulate

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    /// Pulse JSON file, or `mc` for the monochromatic baseline.
    #[arg(long)]
    pub pulse: PulseSource,
    #[arg(long = "omega-tg", default_value_t = 0.05)]
    pub omega_tg: f64,
    /// Number of Fourier components; defaults to the pulse length (10 for `mc`).
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, default_value_t = 4)]
    pub n0: u32,
    #[arg(long, default_value_t = 1)]
    pub periods: usize,
    /// Samples per period (even, >= 64).
    #[arg(long, default_value_t = 256)]
    pub samples: usize,
    /// Integration steps per cycle of the fastest frequency.
    #[arg(long = "steps-per-cycle", default_value_t = IntegratorOptions::default().steps_per_cycle)]
    pub steps_per_cycle: usize,
    /// Reference dynamics: `light-shifted` or `bare`.
    #[arg(long, default_value = "light-shifted", value_parser = parse_frame)]
    pub frame: TargetFrame,
    /// Output CSV path; the JSON summary goes next to it.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SimulateSummary {
    pub max_p3: f64,
    #[serde(rename = "F_n")]
    pub f_n: Vec<f64>,
    pub predicted_f2: f64,
    pub unitarity_drift: f64,
    pub frame: TargetFrame,
    pub manifest: RunManifest,
}

pub const SIMULATE_HEADER: [&str; 6] =
    ["t_over_T", "P2", "P3", "P2_target", "F_window_index", "F_n"];

pub fn simulate(args: &SimulateArgs, argv: &[String]) -> Result<(), CliError> {
    let (config, pulse) = resolve_pulse(&args.pulse, args.n, args.n0, args.omega_tg)?;
    let options = IntegratorOptions {
        steps_per_cycle: args.steps_per_cycle,
        ..IntegratorOptions::default()
    };
    let trajectory =
        propagate(&pulse, &config, args.periods, args.samples, &options).map_err(input)?;
    let report = fidelity_windows(&trajectory, args.frame).map_err(input)?;

    let samples = args.samples;
    let rows = (0..report.times.len()).map(|j| {
        let window = if j == 0 { 1 } else { (j - 1) / samples + 1 };
        vec![
            fmt_f64(report.times[j]),
            fmt_f64(report.p2[j]),
            fmt_f64(report.p3[j]),
            fmt_f64(report.p2_target[j]),
            window.to_string(),
            fmt_f64(report.window_fidelities[window - 1]),
        ]
    });
    write_csv(&args.out, &SIMULATE_HEADER, rows)?;
    let summary = SimulateSummary {
        max_p3: report.max_p3,
        f_n: report.window_fidelities.clone(),
        predicted_f2: report.predicted_f2,
        unitarity_drift: trajectory.unitarity_drift(),
        frame: args.frame,
        manifest: RunManifest::new("simulate", args, argv),
    };
    write_json(&sidecar(&args.out), &summary)
}

// ---------------------------------------------------------------- sweep-n

#[derive(Debug, Clone, Args, Serialize)]
pub struct SweepArgs {
    #[arg(long = "omega-tg", default_value_t = 0.05)]
    pub omega_tg: f64,
    #[arg(long, default_value_t = 4)]
    pub n0: u32,
    #[arg(long = "n-min", default_value_t = 2, value_parser = clap::value_parser!(u64).range(1..))]
    pub n_min: u64,
    #[arg(long = "n-max", default_value_t = 20, value_parser = clap::value_parser!(u64).range(1..))]
    pub n_max: u64,
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u8).range(2..=3))]
    pub order: u8,
    /// Output CSV path; failures and the manifest go to the JSON sidecar.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SweepFailure {
    pub n: usize,
    pub error: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SweepSummary {
    pub failures: Vec<SweepFailure>,
    pub manifest: RunManifest,
}

pub const SWEEP_HEADER: [&str; 3] = ["N", "lambda1", "predicted_f2"];

pub fn sweep_n(args: &SweepArgs, argv: &[String]) -> Result<(), CliError> {
    if args.n_min > args.n_max {
        return Err(input(format!(
            "--n-min {} exceeds --n-max {}",
            args.n_min, args.n_max
        )));
    }
    let order = Order::try_from(args.order).map_err(input)?;
    let options = SolverOptions::default();
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for n in args.n_min as usize..=args.n_max as usize {
        let config = DrivingConfig::new(n, args.n0, args.omega_tg).map_err(input)?;
        let solved = solve(&config, order, &options).and_then(|r| {
            Ok((
                r.lambda1,
                constraints(&r.pulse, &config, order)?.predicted_f2,
            ))
        });
        match solved {
            Ok((lambda1, f2)) => rows.push(vec![n.to_string(), fmt_f64(lambda1), fmt_f64(f2)]),
            Err(e) => {
                rows.push(vec![n.to_string(), fmt_f64(f64::NAN), fmt_f64(f64::NAN)]);
                failures.push(SweepFailure {
                    n,
                    error: e.to_string(),
                });
            }
        }
    }
    write_csv(&args.out, &SWEEP_HEADER, rows)?;
    let failed = failures.len();
    write_json(
        &sidecar(&args.out),
        &SweepSummary {
            failures,
            manifest: RunManifest::new("sweep-n", args, argv),
        },
    )?;
    if failed > 0 {
        return Err(CliError::Numerical(format!(
            "{failed} harmonic count(s) failed; see sidecar JSON"
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------- robustness

/// Fixed δ or a quarter of the computed uncertainty scale δ_max.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(into = "String")]
pub enum DeltaSpec {
    AutoQuarter,
    Value(f64),
}

impl FromStr for DeltaSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "auto-quarter" {
            return Ok(DeltaSpec::AutoQuarter);
        }
        let v: f64 = s
            .parse()
            .map_err(|_| format!("expected a number or 'auto-quarter', got '{s}'"))?;
        if !(v.is_finite() && v >= 0.0) {
            return Err(format!("delta must be a non-negative number, got {v}"));
        }
        Ok(DeltaSpec::Value(v))
    }
}

impl From<DeltaSpec> for String {
    fn from(d: DeltaSpec) -> String {
        match d {
            DeltaSpec::AutoQuarter => "auto-quarter".to_owned(),
            DeltaSpec::Value(v) => v.to_string(),
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct RobustnessArgs {
    /// Pulse JSON file, or `mc`.
    #[arg(long)]
    pub pulse: PulseSource,
    /// Perturbation half-width in units of ω, or `auto-quarter` for δ_max/4.
    #[arg(long)]
    pub delta: DeltaSpec,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, default_value_t = 50)]
    pub periods: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long = "omega-tg", default_value_t = 0.05)]
    pub omega_tg: f64,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, default_value_t = 4)]
    pub n0: u32,
    #[arg(long, default_value_t = 256)]
    pub samples: usize,
    #[arg(long = "steps-per-cycle", default_value_t = IntegratorOptions::default().steps_per_cycle)]
    pub steps_per_cycle: usize,
    #[arg(long, default_value = "light-shifted", value_parser = parse_frame)]
    pub frame: TargetFrame,
    /// Output CSV path; metadata goes to the JSON sidecar.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RobustnessMetadata {
    pub delta: f64,
    pub delta_max: Option<f64>,
    pub seed: u64,
    pub trials: usize,
    pub periods: usize,
    pub frame: TargetFrame,
    pub manifest: RunManifest,
}

pub const ROBUSTNESS_HEADER: [&str; 3] = ["n", "Fn_mean", "Fn_stderr"];

pub fn robustness(args: &RobustnessArgs, argv: &[String]) -> Result<(), CliError> {
    let (config, pulse) = resolve_pulse(&args.pulse, args.n, args.n0, args.omega_tg)?;
    let scale = if config.n_harmonics() >= 2 {
        Some(delta_max(&config, &SolverOptions::default()).map_err(numerical)?)
    } else {
        None
    };
    let delta = match args.delta {
        DeltaSpec::Value(v) => v,
        DeltaSpec::AutoQuarter => {
            scale.ok_or_else(|| input("auto-quarter needs N >= 2 to compute delta_max"))? / 4.0
        }
    };
    let rc = RobustnessConfig {
        samples_per_period: args.samples,
        frame: args.frame,
        integrator: IntegratorOptions {
            steps_per_cycle: args.steps_per_cycle,
            ..IntegratorOptions::default()
        },
        ..RobustnessConfig::new(delta, args.trials, args.periods, args.seed)
    };
    let summary = robustness_sweep(&pulse, &config, &rc).map_err(|e| match e {
        Error::InvalidConfig(_) => input(e),
        other => numerical(other),
    })?;
    let rows = summary
        .mean
        .iter()
        .zip(&summary.stderr)
        .enumerate()
        .map(|(i, (m, s))| vec![(i + 1).to_string(), fmt_f64(*m), fmt_f64(*s)]);
    write_csv(&args.out, &ROBUSTNESS_HEADER, rows)?;
    write_json(
        &sidecar(&args.out),
        &RobustnessMetadata {
            delta,
            delta_max: scale,
            seed: args.seed,
            trials: args.trials,
            periods: args.periods,
            frame: args.frame,
            manifest: RunManifest::new("robustness", args, argv),
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delta_spec_parsing() {
        assert_eq!(
            "auto-quarter".parse::<DeltaSpec>(),
            Ok(DeltaSpec::AutoQuarter)
        );
        assert_eq!("0.002".parse::<DeltaSpec>(), Ok(DeltaSpec::Value(0.002)));
        assert!("-1".parse::<DeltaSpec>().is_err());
        assert!("lots".parse::<DeltaSpec>().is_err());
    }

    #[test]
    fn pulse_source_parsing() {
        assert_eq!("mc".parse::<PulseSource>(), Ok(PulseSource::Mc));
        assert_eq!(
            "a.json".parse::<PulseSource>(),
            Ok(PulseSource::File("a.json".into()))
        );
    }

    #[test]
    fn frame_parsing() {
        assert_eq!(parse_frame("bare"), Ok(TargetFrame::Bare));
        assert!(parse_frame("rotating").is_err());
    }
}

//! Monte Carlo robustness of a pulse against uniform amplitude errors.
//!
//! Every component receives an independent draw `δf_n ~ U[−δ, δ]`. Trial `k`
//! draws from ChaCha stream `k` of the configured seed, so the outcome does
//! not depend on how trials are scheduled across threads.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimizer::{solve_second_order, solve_third_order, SolverOptions};
use crate::problem::{DrivingConfig, Pulse};
use crate::simulator::{fidelity_windows, propagate, IntegratorOptions, TargetFrame};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobustnessConfig {
    /// Half-width δ of the uniform perturbation, in units of ω.
    pub delta: f64,
    pub trials: usize,
    pub n_periods: usize,
    pub seed: u64,
    pub samples_per_period: usize,
    pub frame: TargetFrame,
    pub integrator: IntegratorOptions,
}

impl RobustnessConfig {
    pub fn new(delta: f64, trials: usize, n_periods: usize, seed: u64) -> Self {
        Self {
            delta,
            trials,
            n_periods,
            seed,
            samples_per_period: 256,
            frame: TargetFrame::default(),
            integrator: IntegratorOptions::default(),
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.delta.is_finite() && self.delta >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "delta must be >= 0, got {}",
                self.delta
            )));
        }
        if self.trials == 0 || self.n_periods == 0 {
            return Err(Error::InvalidConfig(
                "trials and n_periods must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// How independent trials are scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// Rayon work-stealing; identical to `Sequential` without the `parallel` feature.
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

/// Trial-averaged window fidelities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessSummary {
    pub delta: f64,
    pub seed: u64,
    /// Mean `F_n` across trials, n = 1..n_periods.
    pub mean: Vec<f64>,
    /// Standard error of the mean (0 for a single trial).
    pub stderr: Vec<f64>,
    /// `F_n` of every trial, in trial order.
    pub per_trial: Vec<Vec<f64>>,
}

/// Random stream of trial `trial`.
pub fn trial_stream(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

/// `f_n → f_n + δf_n` with independent `δf_n ~ U[−δ, δ]`.
pub fn perturb<R: Rng + ?Sized>(pulse: &Pulse, delta: f64, rng: &mut R) -> Result<Pulse> {
    if !(delta.is_finite() && delta >= 0.0) {
        return Err(Error::Domain(format!("delta must be >= 0, got {delta}")));
    }
    if delta == 0.0 {
        return Ok(pulse.clone());
    }
    Pulse::new(
        pulse
            .amplitudes()
            .iter()
            .map(|f| f + rng.random_range(-delta..=delta))
            .collect(),
    )
}

/// Uncertainty scale `δ_max = max_n |f_n⁽³⁾ − f_n⁽²⁾|`.
pub fn delta_max(config: &DrivingConfig, options: &SolverOptions) -> Result<f64> {
    let second = solve_second_order(config, options)?;
    let third = solve_third_order(config, options, None)?;
    Ok(third.pulse.max_abs_difference(&second.pulse))
}

fn run_trial(
    pulse: &Pulse,
    config: &DrivingConfig,
    rc: &RobustnessConfig,
    trial: usize,
) -> Result<Vec<f64>> {
    let wrap = |e: Error| Error::Trial {
        trial,
        source: Box::new(e),
    };
    let mut rng = trial_stream(rc.seed, trial);
    let perturbed = perturb(pulse, rc.delta, &mut rng).map_err(wrap)?;
    let trajectory = propagate(
        &perturbed,
        config,
        rc.n_periods,
        rc.samples_per_period,
        &rc.integrator,
    )
    .map_err(wrap)?;
    Ok(fidelity_windows(&trajectory, rc.frame)
        .map_err(wrap)?
        .window_fidelities)
}

fn run_trials(
    pulse: &Pulse,
    config: &DrivingConfig,
    rc: &RobustnessConfig,
    execution: Execution,
) -> Result<Vec<Vec<f64>>> {
    match execution {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            (0..rc.trials)
                .into_par_iter()
                .map(|k| run_trial(pulse, config, rc, k))
                .collect()
        }
        _ => (0..rc.trials)
            .map(|k| run_trial(pulse, config, rc, k))
            .collect(),
    }
}

/// Averages the per-period fidelity of `trials` perturbed copies of `pulse`.
pub fn robustness_sweep(
    pulse: &Pulse,
    config: &DrivingConfig,
    rc: &RobustnessConfig,
) -> Result<RobustnessSummary> {
    robustness_sweep_with(pulse, config, rc, Execution::default())
}

pub fn robustness_sweep_with(
    pulse: &Pulse,
    config: &DrivingConfig,
    rc: &RobustnessConfig,
    execution: Execution,
) -> Result<RobustnessSummary> {
    pulse.check(config)?;
    rc.validate()?;
    let per_trial = run_trials(pulse, config, rc, execution)?;
    let (mean, stderr) = aggregate(&per_trial, rc.n_periods);
    Ok(RobustnessSummary {
        delta: rc.delta,
        seed: rc.seed,
        mean,
        stderr,
        per_trial,
    })
}

/// Welford mean and standard error per period, in trial order.
fn aggregate(per_trial: &[Vec<f64>], n_periods: usize) -> (Vec<f64>, Vec<f64>) {
    let mut mean = vec![0.0; n_periods];
    let mut m2 = vec![0.0; n_periods];
    for (k, series) in per_trial.iter().enumerate() {
        let count = (k + 1) as f64;
        for (i, &x) in series.iter().enumerate() {
            let d = x - mean[i];
            mean[i] += d / count;
            m2[i] += d * (x - mean[i]);
        }
    }
    let trials = per_trial.len();
    let stderr = m2
        .iter()
        .map(|&m| {
            if trials > 1 {
                (m / (trials - 1) as f64 / trials as f64).sqrt()
            } else {
                0.0
            }
        })
        .collect();
    (mean, stderr)
}

//! Problem statement and shared value types.
//!
//! All frequencies are measured in units of the fundamental driving
//! frequency ω (so ω = 1 internally) and all times in units of ω⁻¹, which
//! makes the driving period `T = 2π`. External interfaces convert times to
//! units of `T`.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest admissible expansion parameter ε = Ω_tg/ω.
pub const EPSILON_LIMIT: f64 = 0.5;
/// Above this ε the low-order constraint sets lose accuracy and a warning is logged.
pub const EPSILON_WARN: f64 = 0.2;

/// Physical problem: a degenerate Lambda system driven by an N-tone pulse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DrivingConfig {
    n_harmonics: usize,
    n0: u32,
    omega_tg: f64,
}

impl DrivingConfig {
    /// `omega_tg` is the target Raman rate in units of ω.
    pub fn new(n_harmonics: usize, n0: u32, omega_tg: f64) -> Result<Self> {
        if n_harmonics == 0 {
            return Err(Error::InvalidConfig("n_harmonics must be >= 1".into()));
        }
        if n0 == 0 {
            return Err(Error::InvalidConfig("n0 must be >= 1".into()));
        }
        if !(omega_tg.is_finite() && omega_tg > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "omega_tg must be positive and finite, got {omega_tg}"
            )));
        }
        if omega_tg >= EPSILON_LIMIT {
            return Err(Error::InvalidConfig(format!(
                "expansion parameter omega_tg/omega = {omega_tg} must be below {EPSILON_LIMIT}"
            )));
        }
        if omega_tg > EPSILON_WARN {
            log::warn!(
                "omega_tg/omega = {omega_tg} exceeds {EPSILON_WARN}; low-order Magnus constraints become inaccurate"
            );
        }
        Ok(Self {
            n_harmonics,
            n0,
            omega_tg,
        })
    }

    /// Fundamental driving frequency; the unit of all frequencies.
    pub fn omega(&self) -> f64 {
        1.0
    }

    pub fn period(&self) -> f64 {
        TAU / self.omega()
    }

    pub fn n_harmonics(&self) -> usize {
        self.n_harmonics
    }

    pub fn n0(&self) -> u32 {
        self.n0
    }

    pub fn omega_tg(&self) -> f64 {
        self.omega_tg
    }

    /// Detuning Δ = Nω.
    pub fn detuning(&self) -> f64 {
        self.n_harmonics as f64 * self.omega()
    }

    /// Expansion parameter ε = Ω_tg/ω.
    pub fn epsilon(&self) -> f64 {
        self.omega_tg / self.omega()
    }

    /// Harmonic index of the counter-rotating shift, N·n₀.
    pub fn counter_shift(&self) -> usize {
        self.n_harmonics * self.n0 as usize
    }

    /// Highest frequency present in H(t), (N + N·n₀)ω.
    pub fn max_frequency(&self) -> f64 {
        (self.n_harmonics + self.counter_shift()) as f64 * self.omega()
    }

    /// Same drive with a different target rate.
    pub fn with_omega_tg(&self, omega_tg: f64) -> Result<Self> {
        Self::new(self.n_harmonics, self.n0, omega_tg)
    }

    /// Same drive with a different number of harmonics.
    pub fn with_harmonics(&self, n_harmonics: usize) -> Result<Self> {
        Self::new(n_harmonics, self.n0, self.omega_tg)
    }
}

/// Real Fourier amplitudes `f_1..f_N` of the driving envelope, in units of ω.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Pulse {
    amplitudes: Vec<f64>,
}

impl Pulse {
    pub fn new(amplitudes: Vec<f64>) -> Result<Self> {
        if let Some(i) = amplitudes.iter().position(|f| !f.is_finite()) {
            return Err(Error::NonFinitePulse { index: i + 1 });
        }
        Ok(Self { amplitudes })
    }

    pub fn zeros(n_harmonics: usize) -> Self {
        Self {
            amplitudes: vec![0.0; n_harmonics],
        }
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.amplitudes
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    /// Component `f_n` with the 1-based harmonic index used throughout.
    pub fn component(&self, n: usize) -> f64 {
        self.amplitudes[n - 1]
    }

    /// `(n, f_n)` pairs, n starting at 1.
    pub fn harmonics(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.amplitudes.iter().enumerate().map(|(i, &f)| (i + 1, f))
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.amplitudes.iter().map(|f| f * factor).collect())
    }

    pub fn max_abs_difference(&self, other: &Pulse) -> f64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Checks that the pulse has one component per harmonic of `config`.
    pub fn check(&self, config: &DrivingConfig) -> Result<()> {
        if self.len() != config.n_harmonics() {
            return Err(Error::PulseLength {
                expected: config.n_harmonics(),
                got: self.len(),
            });
        }
        Ok(())
    }
}

impl TryFrom<Vec<f64>> for Pulse {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Pulse::new(v)
    }
}

impl From<Pulse> for Vec<f64> {
    fn from(p: Pulse) -> Self {
        p.amplitudes
    }
}

/// Optimal pulse together with its Lagrange multipliers and solver diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub pulse: Pulse,
    /// Multiplier of the rate constraint (dimensionless).
    pub lambda1: f64,
    /// Multiplier of the vanishing second-order coupling (units of ω).
    pub lambda2: f64,
    /// Magnus order of the constraint set, 2 or 3.
    pub order: u8,
    /// Max-norm of all constraint and stationarity residuals.
    pub residual_norm: f64,
    /// Newton iterations; 0 for the closed-form second-order solution.
    pub iterations: usize,
}

/// Monochromatic baseline: a single tone at the detuning Δ whose amplitude
/// satisfies the first-order rate constraint,
/// `f_N² = Ω_tg Δ (1 + n₀)/(2 + n₀)`.
pub fn mc_pulse(config: &DrivingConfig) -> Pulse {
    let n0 = config.n0() as f64;
    let amplitude = (config.omega_tg() * config.detuning() * (1.0 + n0) / (2.0 + n0)).sqrt();
    let mut amplitudes = vec![0.0; config.n_harmonics()];
    amplitudes[config.n_harmonics() - 1] = amplitude / config.omega();
    Pulse { amplitudes }
}

//! Numerical propagation of the driven Lambda system and fidelity functionals.
//!
//! The interaction-picture Hamiltonian is
//! `H(t) = c(t)(|1⟩⟨3| + |2⟩⟨3|) + h.c.` with `c(t) = f(t)(1 + e^{−i N n₀ t})`
//! and `f(t) = Σ f_n e^{−i n t}`. Propagation uses a fixed fourth-order
//! Magnus step aligned with the sampling grid. Each step is an exact unitary,
//! and every period applies the same sequence of step maps, so `U(nT)` equals
//! `U(T)ⁿ` up to rounding.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    exp_hermitian, hs_distance_sq, identity, unitarity_defect, unitary_generator, Mat3, C64,
};
use crate::magnus::moment_a;
use crate::problem::{DrivingConfig, Pulse};

/// Minimum sampling density accepted for fidelity quadrature.
pub const MIN_SAMPLES_PER_PERIOD: usize = 64;
/// Integration steps per cycle of the fastest frequency in H(t), at least.
pub const MIN_STEPS_PER_CYCLE: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorOptions {
    /// Integration steps per cycle of the fastest frequency `(N + N n₀)ω`.
    pub steps_per_cycle: usize,
    /// Largest accepted `max |U†U − 𝟙|` on the sampled grid.
    pub unitarity_budget: f64,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self {
            steps_per_cycle: 40,
            unitarity_budget: 1e-9,
        }
    }
}

impl IntegratorOptions {
    fn validate(&self) -> Result<()> {
        if self.steps_per_cycle < MIN_STEPS_PER_CYCLE {
            return Err(Error::InvalidConfig(format!(
                "steps_per_cycle must be >= {MIN_STEPS_PER_CYCLE}, got {}",
                self.steps_per_cycle
            )));
        }
        if self.unitarity_budget.is_nan() || self.unitarity_budget <= 0.0 {
            return Err(Error::InvalidConfig(
                "unitarity_budget must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Same options with the step halved.
    pub fn refined(&self) -> Self {
        Self {
            steps_per_cycle: 2 * self.steps_per_cycle,
            ..*self
        }
    }
}

/// Reference evolution that measured dynamics are compared against.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TargetFrame {
    /// `exp(−i H_tg t)` with `H_tg = −Ω_tg(|1⟩⟨2| + |2⟩⟨1|)`.
    Bare,
    /// Target dynamics dressed with the leading-order light shifts,
    /// `−Ω_tg(|1⟩⟨1| + |2⟩⟨2|) + 2Ω_tg|3⟩⟨3|`, that every drive satisfying
    /// the rate constraint carries. The ground-state shift is a common phase
    /// of the ground manifold and does not alter the Raman dynamics.
    #[default]
    LightShifted,
}

/// Off-diagonal coupling `c(t) = f(t)(1 + e^{−i N n₀ t})`.
fn coupling(amplitudes: &[f64], counter_shift: usize, t: f64) -> C64 {
    let z = C64::cis(-t);
    let envelope = amplitudes
        .iter()
        .rev()
        .fold(C64::new(0.0, 0.0), |acc, &f| acc * z + f)
        * z;
    envelope * (C64::new(1.0, 0.0) + C64::cis(-(counter_shift as f64) * t))
}

fn hamiltonian_from_coupling(c: C64) -> Mat3 {
    let mut h = Mat3::zeros();
    h[(0, 2)] = c;
    h[(1, 2)] = c;
    h[(2, 0)] = c.conj();
    h[(2, 1)] = c.conj();
    h
}

/// `H(t)` with `t` in units of ω⁻¹.
pub fn hamiltonian_at(pulse: &Pulse, config: &DrivingConfig, t: f64) -> Result<Mat3> {
    pulse.check(config)?;
    Ok(hamiltonian_from_coupling(coupling(
        pulse.amplitudes(),
        config.counter_shift(),
        t,
    )))
}

/// Gauss–Legendre nodes of the fourth-order Magnus step.
const GAUSS_NODES: [f64; 2] = [0.5 - 0.288_675_134_594_812_9, 0.5 + 0.288_675_134_594_812_9];

/// One fourth-order Magnus step `exp(−iK)` with
/// `K = (h/2)(H₁ + H₂) − i(√3h²/12)[H₂, H₁]`, `H_k = H(t + c_k h)`.
///
/// For `H = cV + c̄V†` the commutator is `2i Im(c₂c̄₁)[V, V†]`, and `K` only
/// acts on the bright state `(|1⟩ + |2⟩)/√2` and `|3⟩`. The dark state
/// `(|1⟩ − |2⟩)/√2` is untouched, and on the 2×2 block
/// `exp(−iK) = cos θ − i (sin θ/θ) K` with θ the block's positive eigenvalue.
fn magnus_step(c1: C64, c2: C64, h: f64) -> Mat3 {
    let sum = c1 + c2;
    let mu = 3f64.sqrt() * h * h / 6.0 * (c2 * c1.conj()).im;
    let half = 0.5 * h;
    let theta = (4.0 * mu * mu + 0.5 * h * h * sum.norm_sqr()).sqrt();
    let (sin, cos) = theta.sin_cos();
    let sinc = if theta == 0.0 { 1.0 } else { sin / theta };
    let i = C64::i();
    let mut m = Mat3::zeros();
    let diag = C64::from(0.5 * (1.0 + cos)) - i * (sinc * mu);
    let off = C64::from(0.5 * (cos - 1.0)) - i * (sinc * mu);
    m[(0, 0)] = diag;
    m[(1, 1)] = diag;
    m[(0, 1)] = off;
    m[(1, 0)] = off;
    let to_ground = -i * (sinc * half) * sum;
    m[(0, 2)] = to_ground;
    m[(1, 2)] = to_ground;
    let to_excited = -i * (sinc * half) * sum.conj();
    m[(2, 0)] = to_excited;
    m[(2, 1)] = to_excited;
    m[(2, 2)] = C64::from(cos) + i * (2.0 * sinc * mu);
    m
}

/// Step propagators for one period; H(t) is T-periodic, so every period
/// reuses the same maps.
struct PeriodStepper {
    maps: Vec<Mat3>,
}

impl PeriodStepper {
    fn new(pulse: &Pulse, config: &DrivingConfig, steps: usize) -> Self {
        let h = config.period() / steps as f64;
        let amps = pulse.amplitudes();
        let shift = config.counter_shift();
        let maps = (0..steps)
            .map(|k| {
                let t = k as f64 * h;
                let c1 = coupling(amps, shift, t + GAUSS_NODES[0] * h);
                let c2 = coupling(amps, shift, t + GAUSS_NODES[1] * h);
                magnus_step(c1, c2, h)
            })
            .collect();
        Self { maps }
    }

    #[inline]
    fn advance(&self, k: usize, u: &Mat3) -> Mat3 {
        self.maps[k] * u
    }
}

fn steps_per_period(config: &DrivingConfig, samples: usize, options: &IntegratorOptions) -> usize {
    let min_steps = options.steps_per_cycle * (config.n_harmonics() + config.counter_shift());
    samples * min_steps.div_ceil(samples)
}

/// Sampled propagator `U(t)` over an integer number of periods.
#[derive(Debug, Clone)]
pub struct UnitaryTrajectory {
    config: DrivingConfig,
    pulse: Pulse,
    samples_per_period: usize,
    /// Sample times in units of T.
    times: Vec<f64>,
    unitaries: Vec<Mat3>,
    unitarity_drift: f64,
}

impl UnitaryTrajectory {
    /// Wraps externally produced samples on the uniform grid
    /// `t_j = j/samples_per_period` (units of T).
    pub fn from_samples(
        config: DrivingConfig,
        pulse: Pulse,
        samples_per_period: usize,
        unitaries: Vec<Mat3>,
    ) -> Result<Self> {
        pulse.check(&config)?;
        if samples_per_period == 0
            || unitaries.is_empty()
            || !(unitaries.len() - 1).is_multiple_of(samples_per_period)
        {
            return Err(Error::Domain(format!(
                "{} samples do not cover whole periods of {samples_per_period} samples",
                unitaries.len()
            )));
        }
        let times = (0..unitaries.len())
            .map(|j| j as f64 / samples_per_period as f64)
            .collect();
        let unitarity_drift = unitaries.iter().map(unitarity_defect).fold(0.0, f64::max);
        Ok(Self {
            config,
            pulse,
            samples_per_period,
            times,
            unitaries,
            unitarity_drift,
        })
    }

    pub fn config(&self) -> &DrivingConfig {
        &self.config
    }

    pub fn pulse(&self) -> &Pulse {
        &self.pulse
    }

    pub fn samples_per_period(&self) -> usize {
        self.samples_per_period
    }

    pub fn n_periods(&self) -> usize {
        (self.unitaries.len() - 1) / self.samples_per_period
    }

    /// Sample times in units of T.
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn unitaries(&self) -> &[Mat3] {
        &self.unitaries
    }

    pub fn unitarity_drift(&self) -> f64 {
        self.unitarity_drift
    }

    /// `U(nT)`
    pub fn at_period(&self, n: usize) -> &Mat3 {
        &self.unitaries[n * self.samples_per_period]
    }

    /// `H_eff = (i/T) log U(T)` from this trajectory's first period.
    pub fn effective_hamiltonian(&self) -> Result<Mat3> {
        Ok(unitary_generator(self.at_period(1))? / C64::from(self.config.period()))
    }
}

/// Integrates `i dU/dt = H(t) U` from `U(0) = 𝟙` over `n_periods` periods and
/// records `U` at `samples_per_period` points per period (plus `t = 0`).
pub fn propagate(
    pulse: &Pulse,
    config: &DrivingConfig,
    n_periods: usize,
    samples_per_period: usize,
    options: &IntegratorOptions,
) -> Result<UnitaryTrajectory> {
    pulse.check(config)?;
    options.validate()?;
    if n_periods == 0 {
        return Err(Error::Domain("n_periods must be >= 1".into()));
    }
    if samples_per_period < MIN_SAMPLES_PER_PERIOD {
        return Err(Error::GridTooCoarse {
            samples: samples_per_period,
            min: MIN_SAMPLES_PER_PERIOD,
        });
    }
    let steps = steps_per_period(config, samples_per_period, options);
    let stride = steps / samples_per_period;
    let stepper = PeriodStepper::new(pulse, config, steps);

    let mut unitaries = Vec::with_capacity(n_periods * samples_per_period + 1);
    unitaries.push(identity());
    let mut u = identity();
    let mut drift = 0.0f64;
    for period in 0..n_periods {
        for k in 0..steps {
            u = stepper.advance(k, &u);
            if (k + 1) % stride == 0 {
                let defect = unitarity_defect(&u);
                if defect > options.unitarity_budget {
                    let time = period as f64 + (k + 1) as f64 / steps as f64;
                    return Err(Error::UnitarityViolation {
                        time,
                        drift: defect,
                    });
                }
                drift = drift.max(defect);
                unitaries.push(u);
            }
        }
    }
    let times = (0..unitaries.len())
        .map(|j| j as f64 / samples_per_period as f64)
        .collect();
    Ok(UnitaryTrajectory {
        config: *config,
        pulse: pulse.clone(),
        samples_per_period,
        times,
        unitaries,
        unitarity_drift: drift,
    })
}

/// `U(T)` alone, without storing intermediate samples.
pub fn one_period_propagator(
    pulse: &Pulse,
    config: &DrivingConfig,
    options: &IntegratorOptions,
) -> Result<Mat3> {
    pulse.check(config)?;
    options.validate()?;
    let steps = steps_per_period(config, MIN_SAMPLES_PER_PERIOD, options);
    let stepper = PeriodStepper::new(pulse, config, steps);
    let u = (0..steps).fold(identity(), |u, k| stepper.advance(k, &u));
    let defect = unitarity_defect(&u);
    if defect > options.unitarity_budget {
        return Err(Error::UnitarityViolation {
            time: 1.0,
            drift: defect,
        });
    }
    Ok(u)
}

/// `exp(−i H_tg t)` in closed form, `t` in units of ω⁻¹.
pub fn target_propagator(config: &DrivingConfig, t: f64) -> Mat3 {
    let theta = config.omega_tg() * t;
    let (s, c) = theta.sin_cos();
    let mut u = Mat3::zeros();
    u[(0, 0)] = C64::from(c);
    u[(1, 1)] = C64::from(c);
    u[(0, 1)] = C64::new(0.0, s);
    u[(1, 0)] = C64::new(0.0, s);
    u[(2, 2)] = C64::from(1.0);
    u
}

/// Reference propagator in the requested frame, `t` in units of ω⁻¹.
pub fn reference_propagator(config: &DrivingConfig, t: f64, frame: TargetFrame) -> Mat3 {
    match frame {
        TargetFrame::Bare => target_propagator(config, t),
        TargetFrame::LightShifted => {
            let theta = config.omega_tg() * t;
            let mut u = target_propagator(config, t) * C64::cis(theta);
            u[(2, 2)] = C64::cis(-2.0 * theta);
            u
        }
    }
}

/// Fidelity functional per driving period together with population traces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    pub frame: TargetFrame,
    pub predicted_f2: f64,
    /// `F_n`, n = 1..n_periods.
    pub window_fidelities: Vec<f64>,
    /// Sample times in units of T.
    pub times: Vec<f64>,
    /// `|⟨2|U(t)|1⟩|²`
    pub p2: Vec<f64>,
    /// `|⟨3|U(t)|1⟩|²`
    pub p3: Vec<f64>,
    /// `sin²(Ω_tg t)`
    pub p2_target: Vec<f64>,
    pub max_p3: f64,
}

/// `F_n = (1/T) ∫_{(n−1)T}^{nT} ‖U(t) − U_ref(t)‖² dt` by composite Simpson
/// quadrature on the trajectory's sample grid.
pub fn fidelity_windows(
    trajectory: &UnitaryTrajectory,
    frame: TargetFrame,
) -> Result<FidelityReport> {
    let samples = trajectory.samples_per_period;
    if samples < MIN_SAMPLES_PER_PERIOD || !samples.is_multiple_of(2) {
        return Err(Error::GridTooCoarse {
            samples,
            min: MIN_SAMPLES_PER_PERIOD,
        });
    }
    let config = &trajectory.config;
    let period = config.period();
    let distances: Vec<f64> = trajectory
        .times
        .iter()
        .zip(&trajectory.unitaries)
        .map(|(&tau, u)| hs_distance_sq(u, &reference_propagator(config, tau * period, frame)))
        .collect();

    let window_fidelities = distances
        .windows(samples + 1)
        .step_by(samples)
        .map(simpson_mean)
        .collect();

    let p2: Vec<f64> = trajectory
        .unitaries
        .iter()
        .map(|u| u[(1, 0)].norm_sqr())
        .collect();
    let p3: Vec<f64> = trajectory
        .unitaries
        .iter()
        .map(|u| u[(2, 0)].norm_sqr())
        .collect();
    let p2_target = trajectory
        .times
        .iter()
        .map(|&tau| (config.omega_tg() * tau * period).sin().powi(2))
        .collect();
    let max_p3 = p3.iter().copied().fold(0.0, f64::max);
    Ok(FidelityReport {
        frame,
        predicted_f2: 4.0 * moment_a(&trajectory.pulse, config, 2)?,
        window_fidelities,
        times: trajectory.times.clone(),
        p2,
        p3,
        p2_target,
        max_p3,
    })
}

/// Mean over the window of an evenly sampled integrand (even interval count).
fn simpson_mean(values: &[f64]) -> f64 {
    let intervals = values.len() - 1;
    let last = intervals;
    let sum: f64 = values
        .iter()
        .enumerate()
        .map(|(j, &v)| {
            let w = if j == 0 || j == last {
                1.0
            } else if j % 2 == 1 {
                4.0
            } else {
                2.0
            };
            w * v
        })
        .sum();
    sum / (3.0 * intervals as f64)
}

/// Micromotion `Ũ(t) = U(t) exp(+i H_eff t)` at sample `t_index`, with
/// `H_eff` taken from the trajectory's own one-period propagator.
pub fn fluctuation_operator(trajectory: &UnitaryTrajectory, t_index: usize) -> Result<Mat3> {
    let u = trajectory
        .unitaries
        .get(t_index)
        .ok_or_else(|| Error::Domain(format!("sample index {t_index} out of range")))?;
    let h_eff = trajectory.effective_hamiltonian()?;
    let t = trajectory.times[t_index] * trajectory.config.period();
    Ok(u * exp_hermitian(&h_eff, -t))
}

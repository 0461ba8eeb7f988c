//! Closed-form Magnus-derived quantities of the Lambda drive.
//!
//! Every effective-Hamiltonian constraint reduces to sums over the harmonics
//! weighted by `ñ(p)⁻¹ = n⁻ᵖ + (n + N n₀)⁻ᵖ`, where the second term is the
//! counter-rotating partner of harmonic `n`. In the rotating-wave limit
//! `n₀ → ∞` the weight reduces to `nᵖ`.
//!
//! [`effective_hamiltonian_numeric`] is an independent check on these
//! formulas: it takes the principal logarithm of the numerically propagated
//! one-period propagator.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{unitary_generator, Mat3};
use crate::problem::{DrivingConfig, Pulse};
use crate::simulator::{one_period_propagator, IntegratorOptions};

/// Magnus order of a constraint set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Order {
    /// Rate constraint at first order plus vanishing second-order coupling.
    Second,
    /// Rate constraint through third order plus vanishing second-order coupling.
    Third,
}

impl TryFrom<u8> for Order {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        match v {
            2 => Ok(Order::Second),
            3 => Ok(Order::Third),
            other => Err(Error::Domain(format!("order must be 2 or 3, got {other}"))),
        }
    }
}

impl From<Order> for u8 {
    fn from(o: Order) -> u8 {
        match o {
            Order::Second => 2,
            Order::Third => 3,
        }
    }
}

/// Which residuals a [`ConstraintReport`] treats as the active set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Constraint {
    C1,
    C2,
    C3,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintReport {
    /// `A₁ − Ω_tg/ω`
    pub c1: f64,
    /// `Σ f_n/ñ(1)`
    pub c2: f64,
    /// `A₁ + 2B₃ − 4A₁A₂ − Ω_tg/ω`
    pub c3: f64,
    /// Leading fluctuation estimate `F⁽²⁾ = 4A₂`.
    pub predicted_f2: f64,
    pub order: Order,
}

impl ConstraintReport {
    pub fn active(&self) -> [Constraint; 2] {
        match self.order {
            Order::Second => [Constraint::C1, Constraint::C2],
            Order::Third => [Constraint::C2, Constraint::C3],
        }
    }

    pub fn residual(&self, c: Constraint) -> f64 {
        match c {
            Constraint::C1 => self.c1,
            Constraint::C2 => self.c2,
            Constraint::C3 => self.c3,
        }
    }

    /// Max-norm over the active set.
    pub fn active_norm(&self) -> f64 {
        self.active()
            .iter()
            .map(|&c| self.residual(c).abs())
            .fold(0.0, f64::max)
    }
}

/// Combined harmonic weight `ñ(p) = 1/(n⁻ᵖ + (n + N n₀)⁻ᵖ)`.
pub fn harmonic_weight(n: usize, p: i32, config: &DrivingConfig) -> Result<f64> {
    if n == 0 || n > config.n_harmonics() {
        return Err(Error::Domain(format!(
            "harmonic index {n} outside 1..={}",
            config.n_harmonics()
        )));
    }
    if p < 1 {
        return Err(Error::Domain(format!("weight power must be >= 1, got {p}")));
    }
    Ok(1.0 / inverse_weight(n, p, config))
}

fn inverse_weight(n: usize, p: i32, config: &DrivingConfig) -> f64 {
    let co = n as f64;
    let counter = (n + config.counter_shift()) as f64;
    co.powi(-p) + counter.powi(-p)
}

/// `[1/ñ(1,p), …, 1/ñ(N,p)]`
pub fn inverse_weights(config: &DrivingConfig, p: i32) -> Vec<f64> {
    (1..=config.n_harmonics())
        .map(|n| inverse_weight(n, p, config))
        .collect()
}

/// Ratio `g_n = ñ(n,1)/ñ(n,2)`, the pole locations of the second-order
/// multiplier equation.
pub fn pole_locations(config: &DrivingConfig) -> Vec<f64> {
    (1..=config.n_harmonics())
        .map(|n| inverse_weight(n, 2, config) / inverse_weight(n, 1, config))
        .collect()
}

/// `A_p = Σ (f_n/ω)² / ñ(p)`
pub fn moment_a(pulse: &Pulse, config: &DrivingConfig, p: i32) -> Result<f64> {
    moment(pulse, config, p, 2)
}

/// `B_p = Σ (f_n/ω)⁴ / ñ(p)`
pub fn moment_b(pulse: &Pulse, config: &DrivingConfig, p: i32) -> Result<f64> {
    moment(pulse, config, p, 4)
}

fn moment(pulse: &Pulse, config: &DrivingConfig, p: i32, power: i32) -> Result<f64> {
    pulse.check(config)?;
    if p < 1 {
        return Err(Error::Domain(format!("weight power must be >= 1, got {p}")));
    }
    let w = config.omega();
    Ok(pulse
        .harmonics()
        .map(|(n, f)| (f / w).powi(power) * inverse_weight(n, p, config))
        .sum())
}

/// Evaluates every constraint residual regardless of `order`; `order` only
/// selects the active set reported by [`ConstraintReport::active`].
pub fn constraints(
    pulse: &Pulse,
    config: &DrivingConfig,
    order: Order,
) -> Result<ConstraintReport> {
    let a1 = moment_a(pulse, config, 1)?;
    let a2 = moment_a(pulse, config, 2)?;
    let b3 = moment_b(pulse, config, 3)?;
    let target = config.omega_tg() / config.omega();
    let c2 = pulse
        .harmonics()
        .map(|(n, f)| f / config.omega() * inverse_weight(n, 1, config))
        .sum();
    Ok(ConstraintReport {
        c1: a1 - target,
        c2,
        c3: a1 + 2.0 * b3 - 4.0 * a1 * a2 - target,
        predicted_f2: 4.0 * a2,
        order,
    })
}

/// Effective Hamiltonian `H_eff = (i/T)·log U(T)` from the numerically
/// propagated one-period propagator (principal branch).
pub fn effective_hamiltonian_numeric(
    pulse: &Pulse,
    config: &DrivingConfig,
    options: &IntegratorOptions,
) -> Result<Mat3> {
    let u_period = one_period_propagator(pulse, config, options)?;
    Ok(unitary_generator(&u_period)? / num_complex::Complex64::from(config.period()))
}

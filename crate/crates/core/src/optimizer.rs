//! Optimal pulse components under the second- and third-order constraint sets.
//!
//! Second order: minimise `F⁽²⁾ = 4A₂` subject to `A₁ = Ω_tg/ω` and
//! `Σ f_n/ñ(1) = 0`. Stationarity gives `f_n = λ₂/(g_n − λ₁)` with
//! `g_n = ñ(n,1)/ñ(n,2)`; the second constraint becomes the secular equation
//! `S(λ₁) = Σ ñ(n,1)⁻¹ (g_n − λ₁)⁻¹ = 0`, whose minimal root lies between the
//! two smallest poles `g_N < g_{N−1}` and minimises `F⁽²⁾ = 4λ₁Ω_tg/ω`.
//!
//! Third order: the rate constraint gains the terms `2B₃ − 4A₁A₂`, and the
//! N + 2 stationarity/constraint equations are solved by damped Newton with
//! an analytic Jacobian, warm-started from the second-order optimum.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::magnus::{constraints, inverse_weights, pole_locations, Order};
use crate::problem::{DrivingConfig, OptimizationResult, Pulse};

/// Residual above which Newton is considered to have diverged.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Convergence tolerance on the residual max-norm.
    pub tol: f64,
    pub max_iter: usize,
    /// Relative bracket width at which bisection for λ₁ stops.
    pub bisect_tol: f64,
    /// Initial Newton step scale in (0, 1].
    pub damping: f64,
    /// Smallest step scale tried during backtracking.
    pub min_damping: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 100,
            bisect_tol: 1e-14,
            damping: 1.0,
            min_damping: 2f64.powi(-20),
        }
    }
}

impl SolverOptions {
    fn validate(&self) -> Result<()> {
        let positive = [self.tol, self.bisect_tol, self.damping, self.min_damping]
            .iter()
            .all(|&v| v.is_finite() && v > 0.0);
        if !positive || self.max_iter == 0 || self.damping > 1.0 || self.min_damping > self.damping
        {
            return Err(Error::InvalidConfig(format!(
                "invalid solver options {self:?}"
            )));
        }
        Ok(())
    }
}

fn require_polychromatic(config: &DrivingConfig) -> Result<()> {
    if config.n_harmonics() < 2 {
        return Err(Error::InfeasibleHarmonics {
            n_harmonics: config.n_harmonics(),
        });
    }
    Ok(())
}

/// Secular function of the second-order problem.
fn secular(a1: &[f64], g: &[f64], lambda: f64) -> f64 {
    a1.iter().zip(g).map(|(a, g)| a / (g - lambda)).sum()
}

fn secular_derivative(a1: &[f64], g: &[f64], lambda: f64) -> f64 {
    a1.iter()
        .zip(g)
        .map(|(a, g)| a / (g - lambda).powi(2))
        .sum()
}

/// Minimal root of the secular equation inside `(g_N, g_{N−1})`.
fn minimal_root(a1: &[f64], g: &[f64], options: &SolverOptions) -> Result<f64> {
    let n = g.len();
    let (mut lo, mut hi) = (g[n - 1], g[n - 2]);
    let inset = (hi - lo) * 1e-9;
    let (s_lo, s_hi) = (secular(a1, g, lo + inset), secular(a1, g, hi - inset));
    if !(hi > lo && s_lo < 0.0 && s_hi > 0.0) {
        return Err(Error::Bracketing { lo, hi, s_lo, s_hi });
    }
    loop {
        let mid = lo + 0.5 * (hi - lo);
        if mid <= lo || mid >= hi || hi - lo <= options.bisect_tol * mid.abs() {
            break;
        }
        if secular(a1, g, mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // Newton polish, kept only while it stays inside the bracket and improves |S|.
    let mut root = lo + 0.5 * (hi - lo);
    for _ in 0..3 {
        let s = secular(a1, g, root);
        let next = root - s / secular_derivative(a1, g, root);
        if !(next > g[n - 1] && next < g[n - 2]) || secular(a1, g, next).abs() >= s.abs() {
            break;
        }
        root = next;
    }
    Ok(root)
}

/// Closed-form second-order optimum.
///
/// The global sign is fixed by `f_N > 0`, which makes `λ₂ < 0` and every
/// lower harmonic negative.
pub fn solve_second_order(
    config: &DrivingConfig,
    options: &SolverOptions,
) -> Result<OptimizationResult> {
    require_polychromatic(config)?;
    options.validate()?;
    let a1 = inverse_weights(config, 1);
    let g = pole_locations(config);
    let lambda1 = minimal_root(&a1, &g, options)?;

    let target = config.omega_tg() / config.omega();
    let lambda2 = -(target / secular_derivative(&a1, &g, lambda1)).sqrt();
    let amplitudes: Vec<f64> = g.iter().map(|g| lambda2 / (g - lambda1)).collect();
    let pulse = Pulse::new(amplitudes)?;

    let report = constraints(&pulse, config, Order::Second)?;
    let stationarity = pulse
        .amplitudes()
        .iter()
        .zip(&g)
        .map(|(f, g)| (f * (g - lambda1) - lambda2).abs())
        .fold(0.0, f64::max);
    Ok(OptimizationResult {
        pulse,
        lambda1,
        lambda2: lambda2 * config.omega(),
        order: 2,
        residual_norm: report.active_norm().max(stationarity),
        iterations: 0,
    })
}

/// Third-order stationarity system in the variables `(f_1..f_N, λ₁, λ₂)`.
struct ThirdOrderSystem {
    a1: Vec<f64>,
    a2: Vec<f64>,
    a3: Vec<f64>,
    target: f64,
}

impl ThirdOrderSystem {
    fn new(config: &DrivingConfig) -> Self {
        Self {
            a1: inverse_weights(config, 1),
            a2: inverse_weights(config, 2),
            a3: inverse_weights(config, 3),
            target: config.omega_tg() / config.omega(),
        }
    }

    fn n(&self) -> usize {
        self.a1.len()
    }

    fn moments(&self, f: &[f64]) -> (f64, f64, f64) {
        let mut sums = (0.0, 0.0, 0.0);
        for (n, &x) in f.iter().enumerate() {
            let x2 = x * x;
            sums.0 += self.a1[n] * x2;
            sums.1 += self.a2[n] * x2;
            sums.2 += self.a3[n] * x2 * x2;
        }
        sums
    }

    /// Stationarity rows for each harmonic, then `c2`, then `c3`.
    fn residual(&self, x: &DVector<f64>) -> DVector<f64> {
        let n = self.n();
        let f = &x.as_slice()[..n];
        let (l1, l2) = (x[n], x[n + 1]);
        let (big_a1, big_a2, big_b3) = self.moments(f);
        let mut r = DVector::zeros(n + 2);
        for i in 0..n {
            let fi = f[i];
            r[i] = fi
                * ((1.0 + 4.0 * big_a1 * l1) * self.a2[i] - l1 * (1.0 - 4.0 * big_a2) * self.a1[i])
                - 4.0 * l1 * self.a3[i] * fi.powi(3)
                - l2 * self.a1[i];
        }
        r[n] = f.iter().zip(&self.a1).map(|(f, a)| f * a).sum();
        r[n + 1] = big_a1 + 2.0 * big_b3 - 4.0 * big_a1 * big_a2 - self.target;
        r
    }

    fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let n = self.n();
        let f = &x.as_slice()[..n];
        let l1 = x[n];
        let (big_a1, big_a2, _) = self.moments(f);
        let mut j = DMatrix::zeros(n + 2, n + 2);
        for i in 0..n {
            let fi = f[i];
            let bracket =
                (1.0 + 4.0 * big_a1 * l1) * self.a2[i] - l1 * (1.0 - 4.0 * big_a2) * self.a1[i];
            for m in 0..n {
                // ∂A₁/∂f_m = 2a₁f_m, ∂A₂/∂f_m = 2a₂f_m
                let coupling =
                    8.0 * l1 * fi * f[m] * (self.a2[i] * self.a1[m] + self.a1[i] * self.a2[m]);
                j[(i, m)] = coupling;
            }
            j[(i, i)] += bracket - 12.0 * l1 * self.a3[i] * fi * fi;
            j[(i, n)] = fi * (4.0 * big_a1 * self.a2[i] - (1.0 - 4.0 * big_a2) * self.a1[i])
                - 4.0 * self.a3[i] * fi.powi(3);
            j[(i, n + 1)] = -self.a1[i];
        }
        for m in 0..n {
            let fm = f[m];
            j[(n, m)] = self.a1[m];
            j[(n + 1, m)] = 2.0 * self.a1[m] * fm + 8.0 * self.a3[m] * fm.powi(3)
                - 8.0 * fm * (self.a1[m] * big_a2 + big_a1 * self.a2[m]);
        }
        j
    }

    /// Least-squares multipliers for a given pulse (stationarity is linear in λ).
    fn fit_multipliers(&self, f: &[f64]) -> (f64, f64) {
        let n = self.n();
        let (big_a1, big_a2, _) = self.moments(f);
        let mut design = DMatrix::zeros(n, 2);
        let mut rhs = DVector::zeros(n);
        for i in 0..n {
            let fi = f[i];
            design[(i, 0)] = fi * (4.0 * big_a1 * self.a2[i] - (1.0 - 4.0 * big_a2) * self.a1[i])
                - 4.0 * self.a3[i] * fi.powi(3);
            design[(i, 1)] = -self.a1[i];
            rhs[i] = -fi * self.a2[i];
        }
        let normal = design.transpose() * &design;
        let proj = design.transpose() * rhs;
        match normal.lu().solve(&proj) {
            Some(sol) => (sol[0], sol[1]),
            None => (0.0, 0.0),
        }
    }
}

fn max_norm(v: &DVector<f64>) -> f64 {
    v.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

/// Damped Newton solution of the third-order system.
///
/// Starts from `initial` (multipliers fitted by least squares) or, when
/// absent, from the second-order optimum and its multipliers.
pub fn solve_third_order(
    config: &DrivingConfig,
    options: &SolverOptions,
    initial: Option<&Pulse>,
) -> Result<OptimizationResult> {
    require_polychromatic(config)?;
    options.validate()?;
    let system = ThirdOrderSystem::new(config);
    let n = config.n_harmonics();
    let w = config.omega();

    let mut x = DVector::zeros(n + 2);
    match initial {
        Some(pulse) => {
            pulse.check(config)?;
            let f: Vec<f64> = pulse.amplitudes().iter().map(|f| f / w).collect();
            let (l1, l2) = system.fit_multipliers(&f);
            x.rows_mut(0, n).copy_from_slice(&f);
            x[n] = l1;
            x[n + 1] = l2;
        }
        None => {
            let start = solve_second_order(config, options)?;
            x.rows_mut(0, n).copy_from_slice(start.pulse.amplitudes());
            x[n] = start.lambda1;
            x[n + 1] = start.lambda2 / w;
        }
    }

    let mut r = system.residual(&x);
    let mut norm = max_norm(&r);
    let mut iterations = 0;
    while norm > options.tol && iterations < options.max_iter {
        iterations += 1;
        let step = system
            .jacobian(&x)
            .lu()
            .solve(&(-&r))
            .ok_or(Error::SingularJacobian {
                iteration: iterations,
            })?;
        let mut scale = options.damping;
        let accepted = loop {
            let trial = &x + &step * scale;
            let r_trial = system.residual(&trial);
            let n_trial = max_norm(&r_trial);
            if n_trial.is_finite() && n_trial < norm {
                break Some((trial, r_trial, n_trial));
            }
            scale *= 0.5;
            if scale < options.min_damping {
                break None;
            }
        };
        match accepted {
            Some((trial, r_trial, n_trial)) => {
                x = trial;
                r = r_trial;
                norm = n_trial;
            }
            // no descent left: rounding floor or a bad basin
            None => break,
        }
        if norm > DIVERGENCE_LIMIT {
            return Err(Error::Divergence {
                iteration: iterations,
                residual: norm,
            });
        }
    }

    if x[n - 1] < 0.0 {
        for i in 0..n {
            x[i] = -x[i];
        }
        x[n + 1] = -x[n + 1];
    }
    let pulse = Pulse::new(x.rows(0, n).iter().map(|f| f * w).collect())?;
    let report = constraints(&pulse, config, Order::Third)?;
    let stationarity = max_norm(&system.residual(&x).rows(0, n).into_owned());
    let result = OptimizationResult {
        pulse,
        lambda1: x[n],
        lambda2: x[n + 1] * w,
        order: 3,
        residual_norm: report.active_norm().max(stationarity),
        iterations,
    };
    if result.residual_norm > options.tol {
        return Err(Error::NonConvergence {
            iterations,
            residual: result.residual_norm,
            iterate: Box::new(result),
        });
    }
    Ok(result)
}

/// Optimal pulse for the requested constraint order.
pub fn solve(
    config: &DrivingConfig,
    order: Order,
    options: &SolverOptions,
) -> Result<OptimizationResult> {
    match order {
        Order::Second => solve_second_order(config, options),
        Order::Third => solve_third_order(config, options, None),
    }
}

//! Optimal drought allocation sequences.
//!
//! The maximizer of `T_N` is interior, leaves `B^(N) = w·ξ_N` unspent and
//! satisfies, for consecutive terms,
//!
//! ```text
//! (1-p)/(1 + γ ξ_{j+1}) = 1/(1 + γ ξ_j) - p/(1 + (γ/w)(B - Σ_{i≤j} ξ_i)).
//! ```
//!
//! Read forwards this map is unstable (the linearization has one eigenvalue
//! above 1), so long horizons cannot be shot from `ξ_1` in double precision.
//! Read backwards it is explicit and monotone: fix the unspent residual `ρ`,
//! place the last term from the terminal condition, and unroll to `j = 1`.
//! The total that comes out grows strictly with `ρ`, so bisection on `ρ`
//! against `Σ ξ + ρ = B` finds the unique solution.
//!
//! For the infinite problem the last stored term is put on the decaying
//! eigen-direction of the linearized map (`ξ_K = s·R_K`, `s < 1/w`), so the
//! stored prefix is a truncation of the infinite optimum rather than of a
//! finite-horizon one.

mod oracle;
mod structure;

pub use oracle::{brute_force_oracle, ORACLE_MAX_N};
pub use structure::{verify_structure, StructureReport, STRUCTURE_TOL};

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::model::{shrink, AllocationSequence, SystemParams};
use crate::objective::{epsilon_index, eval_t_infinity, eval_t_n, kkt_residuals};
use crate::sum::CompensatedSum;
use crate::{Error, Result};

/// Default solver tolerance.
pub const DEFAULT_TOL: f64 = 1e-12;

/// Iteration cap for the bisection. The log-space bracket resolves to full
/// double precision in about 62 halvings.
pub const MAX_BISECTIONS: usize = 200;

/// Longest horizon the infinite solver will try.
pub const MAX_HORIZON: usize = 1 << 20;

/// Smallest residual the bracket considers, relative to `B`.
const RHO_FLOOR: f64 = 1e-300;

/// Which side of the solution a trial trajectory landed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ShootingSignal {
    /// The trajectory dies out (a non-positive next term).
    TooSmall,
    /// The trajectory overspends the battery or has no positive next term.
    TooLarge,
}

/// Horizon of a solver result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Horizon {
    /// Maximizer of `T_N`.
    Finite(usize),
    /// Prefix of the infinite maximizer, stored up to this index.
    Truncated(usize),
}

impl Horizon {
    pub fn len(&self) -> usize {
        match *self {
            Horizon::Finite(n) | Horizon::Truncated(n) => n,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, Horizon::Finite(_))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    pub xi: AllocationSequence,
    pub horizon: Horizon,
    /// `T_N` for a finite horizon, `T_∞` for the infinite problem.
    pub objective: f64,
    pub bisection_iterations: usize,
    /// Final bracket width on the unspent residual, relative to `B`.
    pub bracket_width_final: f64,
    /// Largest KKT stationarity row relative to the gradient scale at `ξ = 0`.
    pub max_kkt_residual: f64,
    /// Largest violation of the consecutive-term relation.
    pub max_recursion_residual: f64,
    pub truncation_index: Option<usize>,
    pub tolerance: f64,
}

/// Next term of the forward recursion from `ξ_j` and `consumed = Σ_{i≤j} ξ_i`.
///
/// Returns `TooLarge` when the battery is already overspent or the
/// right-hand side has no positive solution, and `TooSmall` when the next
/// term would be non-positive.
pub fn recursion_step(
    params: &SystemParams,
    xi_j: f64,
    consumed: f64,
) -> core::result::Result<f64, ShootingSignal> {
    let (p, q, g, b) = (
        params.p(),
        params.q(),
        params.gamma(),
        params.battery_capacity(),
    );
    let w = params.window() as f64;
    if xi_j.is_nan() || xi_j <= 0.0 {
        return Err(ShootingSignal::TooSmall);
    }
    if consumed > b {
        return Err(ShootingSignal::TooLarge);
    }
    // With c = γξ/(1+γξ) and d = (γR/w)/(1+γR/w) the relation reads
    // (1-p)(1 - c') = (1 - c) - p(1 - d), i.e. c' = (c - p·d)/(1-p).
    // 1 - c' is formed the same way so that ξ' = c'/(γ(1 - c')) never
    // divides by a difference taken near 1.
    let x = g * xi_j;
    let y = g * (b - consumed) / w;
    let next = (shrink(x) - p * shrink(y)) / q;
    let next_complement = (1.0 / (1.0 + x) - p / (1.0 + y)) / q;
    if next_complement <= 0.0 {
        Err(ShootingSignal::TooLarge)
    } else if next <= 0.0 {
        Err(ShootingSignal::TooSmall)
    } else {
        Ok(next / (g * next_complement))
    }
}

/// `(1-p)/(1+γξ_{j+1}) - 1/(1+γξ_j) + p/(1+γR_j/w)`; zero on an optimal pair.
pub fn recursion_residual(params: &SystemParams, xi_j: f64, xi_next: f64, residual_j: f64) -> f64 {
    let (p, q, g) = (params.p(), params.q(), params.gamma());
    let w = params.window() as f64;
    q / (1.0 + g * xi_next) - 1.0 / (1.0 + g * xi_j) + p / (1.0 + g * residual_j / w)
}

/// `ξ_j` from `ξ_{j+1}` and `R_j = B - Σ_{i≤j} ξ_i`. Always positive.
fn step_back(params: &SystemParams, xi_next: f64, residual_j: f64) -> f64 {
    let (p, q, g) = (params.p(), params.q(), params.gamma());
    let w = params.window() as f64;
    let (x, y) = (g * xi_next, g * residual_j / w);
    // c and 1 - c are both sums of positive terms, so each keeps full
    // relative precision whichever end of (0, 1) c sits at.
    let c = q * shrink(x) + p * shrink(y);
    let complement = q / (1.0 + x) + p / (1.0 + y);
    c / (g * complement)
}

/// Ratio `ξ_K / R_K` of the decaying eigen-direction of the linearized
/// recursion: the positive root of `s² + (p - p/w)s - p/w = 0`.
pub fn stable_ratio(params: &SystemParams) -> f64 {
    let p = params.p();
    let a = p / params.window() as f64;
    let h = 0.5 * (p - a);
    // Written as a/(h + sqrt(h² + a)) to avoid cancelling when h > 0.
    a / (h + libm::sqrt(h * h + a))
}

/// Unrolls `n` terms backwards from residual `rho` with `ξ_n = ratio·rho`.
/// Returns `None` as soon as the partial total exceeds `B`.
fn roll_back(params: &SystemParams, n: usize, rho: f64, ratio: f64) -> Option<(Vec<f64>, f64)> {
    let b = params.battery_capacity();
    let mut values = alloc::vec![0.0; n];
    let mut residual = CompensatedSum::default();
    residual.add(rho);
    let mut next = ratio * rho;
    values[n - 1] = next;
    for j in (0..n - 1).rev() {
        residual.add(next); // R_{j+1} in 1-based terms
        if residual.value().is_nan() || residual.value() > b {
            return None;
        }
        next = step_back(params, next, residual.value());
        values[j] = next;
    }
    residual.add(next);
    let total = residual.value();
    if total <= b {
        Some((values, total))
    } else {
        None
    }
}

struct Shot {
    values: Vec<f64>,
    rho: f64,
    iterations: usize,
    bracket_width: f64,
}

/// Bisection on `ln ρ` over `[ln(B·1e-300), ln B]`.
fn shoot(params: &SystemParams, n: usize, ratio: f64) -> Result<Shot> {
    let b = params.battery_capacity();
    let mut lo = libm::log(b * RHO_FLOOR);
    let mut hi = libm::log(b);
    let mut best = roll_back(params, n, libm::exp(lo), ratio).ok_or(Error::HorizonTooLong(n))?;
    let mut iterations = 0;
    while iterations < MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if !(mid > lo && mid < hi) {
            break;
        }
        iterations += 1;
        match roll_back(params, n, libm::exp(mid), ratio) {
            Some(fit) => {
                lo = mid;
                best = fit;
            }
            None => hi = mid,
        }
    }
    if iterations == MAX_BISECTIONS && hi - lo > f64::EPSILON * hi.abs().max(1.0) {
        return Err(Error::NonConvergence {
            iterations,
            reason: "bracket on the unspent residual did not close",
        });
    }
    let (values, _) = best;
    let rho = libm::exp(lo);
    Ok(Shot {
        values,
        rho,
        iterations,
        bracket_width: (libm::exp(hi) - rho) / b,
    })
}

fn check_tol(tol: f64) -> Result<()> {
    if tol > 0.0 && tol.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidTolerance(tol))
    }
}

/// Smallest recursion residual that double precision can certify.
///
/// Residuals are evaluated against `R_j = B - Σ ξ_i`, which carries an
/// absolute error of a few ulps of `B`; the relation amplifies that by up to
/// `pγ/w`.
pub fn recursion_floor(params: &SystemParams) -> f64 {
    let w = params.window() as f64;
    1024.0 * f64::EPSILON * (1.0 + params.p() * params.gamma() * params.battery_capacity() / w)
}

fn max_recursion_residual(params: &SystemParams, xi: &AllocationSequence) -> f64 {
    let residuals = xi.residuals();
    xi.values()
        .windows(2)
        .zip(&residuals)
        .map(|(pair, &r)| recursion_residual(params, pair[0], pair[1], r).abs())
        .fold(0.0, f64::max)
}

/// Maximizer of `T_N`.
pub fn solve_finite(params: &SystemParams, n: usize, tol: f64) -> Result<SolverReport> {
    check_tol(tol)?;
    if n == 0 {
        return Err(Error::EmptyHorizon);
    }
    let w = params.window() as f64;
    let b = params.battery_capacity();
    let shot = shoot(params, n, 1.0 / w)?;
    let xi = AllocationSequence::new(shot.values, b)?;

    let recursion = max_recursion_residual(params, &xi);
    let last = xi.values()[n - 1];
    let terminal_gap = (last - xi.residual() / w).abs();
    if recursion > tol.max(recursion_floor(params)) || terminal_gap > tol * b {
        return Err(Error::NonConvergence {
            iterations: shot.iterations,
            reason: "finite-horizon sequence misses the optimality conditions",
        });
    }
    let kkt = kkt_residuals(params, &xi)?;
    Ok(SolverReport {
        objective: eval_t_n(params, &xi)?,
        horizon: Horizon::Finite(n),
        bisection_iterations: shot.iterations,
        bracket_width_final: shot.bracket_width,
        max_kkt_residual: kkt.relative_max(),
        max_recursion_residual: recursion,
        truncation_index: None,
        tolerance: tol,
        xi,
    })
}

/// Prefix of the unique maximizer of `T_∞`, long enough that the unspent
/// battery is below `tol·B`.
///
/// The first attempt stores twice the smallest `N` with `ε_N < tol`; the
/// horizon doubles until the residual target is met.
pub fn solve_infinite(params: &SystemParams, tol: f64) -> Result<SolverReport> {
    check_tol(tol)?;
    let b = params.battery_capacity();
    let ratio = stable_ratio(params);
    let mut horizon = 2 * epsilon_index(params, tol).max(1);
    let mut total_iterations = 0;
    let shot = loop {
        if horizon > MAX_HORIZON {
            return Err(Error::HorizonTooLong(horizon));
        }
        let shot = shoot(params, horizon, ratio)?;
        total_iterations += shot.iterations;
        if shot.rho < tol * b {
            break shot;
        }
        horizon *= 2;
    };
    let xi = AllocationSequence::new(shot.values, b)?;
    let recursion = max_recursion_residual(params, &xi);
    if recursion > tol.max(recursion_floor(params)) {
        return Err(Error::NonConvergence {
            iterations: total_iterations,
            reason: "infinite-horizon prefix misses the consecutive-term relation",
        });
    }
    let kkt = kkt_residuals(params, &xi)?;
    Ok(SolverReport {
        objective: eval_t_infinity(params, &xi, tol)?,
        horizon: Horizon::Truncated(horizon),
        bisection_iterations: total_iterations,
        bracket_width_final: shot.bracket_width,
        max_kkt_residual: kkt.relative_max(),
        max_recursion_residual: recursion,
        truncation_index: Some(horizon),
        tolerance: tol,
        xi,
    })
}

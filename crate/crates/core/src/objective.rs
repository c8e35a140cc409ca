//! Throughput functionals.
//!
//! For an admissible drought sequence `x`, the long-run throughput of the
//! look-ahead policy splits by cycle length `k`:
//!
//! ```text
//! T_∞(x) = Σ_{k=1}^{w} p²(1-p)^{k-1} (k/2) log2(1 + γB/k)
//!        + Σ_{j≥1}     p (1-p)^{j+w-1} (1/2) log2(1 + γ x_j)
//!        + Σ_{k≥1}     p²(1-p)^{k+w-1} (w/2) log2(1 + γ (B - Σ_{j≤k} x_j)/w)
//! ```
//!
//! `T_N` is `T_∞` with `x_j = 0` beyond `N`, which folds the third tail into a
//! single closed-form term. Infinite series are always cut with an analytic
//! geometric tail bound, never by watching terms get small.

use alloc::vec::Vec;
use core::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::model::{half_log2_1p, AllocationSequence, SystemParams};
use crate::sum::CompensatedSum;
use crate::{Error, Result};

/// Default truncation tolerance for infinite series.
pub const DEFAULT_TAIL_TOL: f64 = 1e-12;

fn check_tolerance(tol: f64) -> Result<()> {
    if tol > 0.0 && tol.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidTolerance(tol))
    }
}

pub(crate) fn check_capacity(params: &SystemParams, xi: &AllocationSequence) -> Result<()> {
    if xi.capacity() == params.battery_capacity() {
        Ok(())
    } else {
        Err(Error::CapacityMismatch {
            expected: params.battery_capacity(),
            got: xi.capacity(),
        })
    }
}

/// Contribution of cycles short enough to be seen from their first slot
/// (`k ≤ w`): the whole battery is spread uniformly over the cycle.
fn short_cycle_term(params: &SystemParams) -> f64 {
    let (p, q, g, b) = (
        params.p(),
        params.q(),
        params.gamma(),
        params.battery_capacity(),
    );
    let mut weight = p * p;
    let mut acc = CompensatedSum::default();
    for k in 1..=params.window() {
        let kf = k as f64;
        acc.add(weight * kf * half_log2_1p(g * b / kf));
        weight *= q;
    }
    acc.value()
}

/// `ε_N = ((1-p)^{w+N}/2)·[log2(1+γB) + p·w·log2(1+γB/w)]`, the bound on how
/// much throughput is lost by restricting the drought sequence to `N` terms.
pub fn epsilon_n(params: &SystemParams, n: usize) -> f64 {
    let (p, q, g, b) = (
        params.p(),
        params.q(),
        params.gamma(),
        params.battery_capacity(),
    );
    let w = params.window() as f64;
    let bracket = 2.0 * (half_log2_1p(g * b) + p * w * half_log2_1p(g * b / w));
    0.5 * libm::pow(q, w + n as f64) * bracket
}

/// Smallest `K ≥ 0` with `ε_K < tol`.
pub(crate) fn epsilon_index(params: &SystemParams, tol: f64) -> usize {
    let eps0 = epsilon_n(params, 0);
    if eps0 < tol {
        return 0;
    }
    // ε_K = ε_0 · q^K; start from the closed-form estimate and settle exactly.
    let estimate = libm::ceil(libm::log(tol / eps0) / libm::log(params.q()));
    let mut k = if estimate.is_finite() && estimate > 0.0 {
        estimate as usize
    } else {
        0
    };
    while k > 0 && epsilon_n(params, k - 1) < tol {
        k -= 1;
    }
    while epsilon_n(params, k) >= tol {
        k += 1;
    }
    k
}

/// `T_∞` of an admissible sequence whose stored prefix is continued by zeros.
///
/// Both infinite sums run to `K = max(N, K_tol)` where `K_tol` is the first
/// index whose geometric tail bound (each log factor replaced by its value at
/// the full battery) drops below `tail_tol`; the result is within `tail_tol`
/// of the untruncated series.
pub fn eval_t_infinity(
    params: &SystemParams,
    xi: &AllocationSequence,
    tail_tol: f64,
) -> Result<f64> {
    check_tolerance(tail_tol)?;
    check_capacity(params, xi)?;
    let (p, q, g, b) = (
        params.p(),
        params.q(),
        params.gamma(),
        params.battery_capacity(),
    );
    let w = params.window() as f64;
    let horizon = xi.len().max(epsilon_index(params, tail_tol));
    let values = xi.values();

    let mut acc = CompensatedSum::default();
    acc.add(short_cycle_term(params));

    let mut weight = p * libm::pow(q, w); // p(1-p)^{j+w-1} at j = 1
    let mut spent = CompensatedSum::default();
    for j in 0..horizon {
        let x = values.get(j).copied().unwrap_or(0.0);
        spent.add(x);
        let residual = (b - spent.value()).max(0.0);
        acc.add(weight * half_log2_1p(g * x));
        acc.add(p * weight * w * half_log2_1p(g * residual / w));
        weight *= q;
    }
    Ok(acc.value())
}

/// `T_N` in closed form: the first `N` drought terms plus the exact geometric
/// tail for cycles that outlast them.
pub fn eval_t_n(params: &SystemParams, xi: &AllocationSequence) -> Result<f64> {
    check_capacity(params, xi)?;
    let (p, q, g, b) = (
        params.p(),
        params.q(),
        params.gamma(),
        params.battery_capacity(),
    );
    let w = params.window() as f64;

    let mut acc = CompensatedSum::default();
    acc.add(short_cycle_term(params));

    let mut weight = p * libm::pow(q, w);
    let mut spent = CompensatedSum::default();
    let mut residual = b;
    for &x in xi.values() {
        spent.add(x);
        residual = (b - spent.value()).max(0.0);
        acc.add(weight * half_log2_1p(g * x));
        acc.add(p * weight * w * half_log2_1p(g * residual / w));
        weight *= q;
    }
    // `weight` is now p(1-p)^{w+N}.
    acc.add(weight * w * half_log2_1p(g * residual / w));
    Ok(acc.value())
}

/// Throughput with unlimited look-ahead:
/// `Σ_k p²(1-p)^{k-1} (k/2) log2(1 + γB/k)`.
///
/// Since `k·log2(1 + γB/k) ≤ γB/ln 2`, stopping after `K` terms leaves at most
/// `p(1-p)^K γB/(2 ln 2)`.
pub fn offline_bound(params: &SystemParams, tail_tol: f64) -> Result<f64> {
    check_tolerance(tail_tol)?;
    let (p, q, g, b) = (
        params.p(),
        params.q(),
        params.gamma(),
        params.battery_capacity(),
    );
    let tail_scale = p * g * b / (2.0 * LN_2);

    let mut acc = CompensatedSum::default();
    let mut weight = p * p;
    let mut q_pow = 1.0; // (1-p)^{k-1}
    let mut k = 1usize;
    loop {
        let kf = k as f64;
        acc.add(weight * kf * half_log2_1p(g * b / kf));
        weight *= q;
        q_pow *= q;
        if tail_scale * q_pow < tail_tol {
            break;
        }
        k += 1;
    }
    Ok(acc.value())
}

/// First-order optimality residuals of a finite candidate.
///
/// The energy and positivity multipliers vanish at the optimum (the optimum is
/// interior and leaves battery unspent), so the residuals are evaluated with
/// both set to zero: row `j` is `∂T_N/∂ξ_j`, the slackness entries are zero,
/// and an interior candidate is optimal iff every row vanishes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KktResidualReport {
    pub stationarity: Vec<f64>,
    pub complementary_slackness_mu: Vec<f64>,
    pub energy_slack: f64,
    pub max_abs_residual: f64,
    /// `|∂T_N/∂ξ_1|` at `ξ = 0`, the natural scale for the residuals.
    pub gradient_scale: f64,
}

impl KktResidualReport {
    /// `max_abs_residual / gradient_scale`.
    pub fn relative_max(&self) -> f64 {
        self.max_abs_residual / self.gradient_scale
    }
}

fn interior_check(xi: &AllocationSequence) -> Result<()> {
    if xi.is_empty() {
        return Err(Error::EmptyHorizon);
    }
    match xi.values().iter().position(|&x| x <= 0.0) {
        Some(index) => Err(Error::NotInterior { index }),
        None => Ok(()),
    }
}

/// Gradient row 1 at `ξ = 0`: `p(1-p)^w (γ/(2 ln 2)) (γB/w)/(1 + γB/w)`.
pub fn gradient_scale(params: &SystemParams) -> f64 {
    let (p, q, g, b) = (
        params.p(),
        params.q(),
        params.gamma(),
        params.battery_capacity(),
    );
    let w = params.window() as f64;
    let x = g * b / w;
    p * libm::pow(q, w) * g / (2.0 * LN_2) * x / (1.0 + x)
}

/// `∂T_N/∂ξ_j` for every `j`, each row summed directly.
pub fn kkt_residuals(params: &SystemParams, xi: &AllocationSequence) -> Result<KktResidualReport> {
    check_capacity(params, xi)?;
    interior_check(xi)?;
    let (p, q, g) = (params.p(), params.q(), params.gamma());
    let w = params.window() as f64;
    let n = xi.len();
    let residuals = xi.residuals();
    let c = g / (2.0 * LN_2);
    let base = libm::pow(q, w); // (1-p)^w

    // Marginal loss from the uniform phase of cycles of length k + w.
    let uniform: Vec<f64> = residuals.iter().map(|&r| c / (1.0 + g * r / w)).collect();

    let mut stationarity = Vec::with_capacity(n);
    for (j, &x) in xi.values().iter().enumerate() {
        let mut row = CompensatedSum::default();
        row.add(p * base * libm::pow(q, j as f64) * c / (1.0 + g * x));
        for (k, &u) in uniform.iter().enumerate().take(n - 1).skip(j) {
            row.add(-p * p * base * libm::pow(q, k as f64) * u);
        }
        row.add(-p * base * libm::pow(q, (n - 1) as f64) * uniform[n - 1]);
        stationarity.push(row.value());
    }

    let max_abs_residual = stationarity.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    Ok(KktResidualReport {
        complementary_slackness_mu: alloc::vec![0.0; n],
        energy_slack: 0.0,
        max_abs_residual,
        gradient_scale: gradient_scale(params),
        stationarity,
    })
}

/// The same rows as [`kkt_residuals`], computed by telescoping: the last row
/// directly, then `row_j = row_{j+1} - Δ_j` where `Δ_j` is the difference of
/// consecutive rows (the relation that yields the forward recursion).
pub fn kkt_stationarity_telescoped(
    params: &SystemParams,
    xi: &AllocationSequence,
) -> Result<Vec<f64>> {
    check_capacity(params, xi)?;
    interior_check(xi)?;
    let (p, q, g) = (params.p(), params.q(), params.gamma());
    let w = params.window() as f64;
    let n = xi.len();
    let values = xi.values();
    let residuals = xi.residuals();
    let c = g / (2.0 * LN_2);
    let weight = |j: usize| p * libm::pow(q, w + j as f64); // p(1-p)^{w+j}, 0-based j

    let mut rows = alloc::vec![0.0; n];
    let last = n - 1;
    rows[last] =
        weight(last) * c * (1.0 / (1.0 + g * values[last]) - 1.0 / (1.0 + g * residuals[last] / w));
    for j in (0..last).rev() {
        let delta = weight(j + 1) * c / (1.0 + g * values[j + 1])
            - weight(j) * c / (1.0 + g * values[j])
            + p * weight(j) * c / (1.0 + g * residuals[j] / w);
        rows[j] = rows[j + 1] - delta;
    }
    Ok(rows)
}

//! Independent maximizer of `T_N` for small `N`: cyclic coordinate ascent
//! with a golden-section line search on each coordinate. It only evaluates
//! `T_N`, so it shares nothing with the shooting solver.

use alloc::vec::Vec;

use crate::model::{AllocationSequence, SystemParams};
use crate::objective::eval_t_n;
use crate::{Error, Result};

pub const ORACLE_MAX_N: usize = 4;

const MAX_SWEEPS: usize = 200_000;

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Maximizes a unimodal `f` on `[lo, hi]` to an interval width of `tol`.
fn golden_section_max(mut f: impl FnMut(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        }
    }
    let mid = 0.5 * (lo + hi);
    // The endpoints may beat the interior when the optimum sits on a bound.
    [lo, mid, hi]
        .into_iter()
        .map(|x| (x, f(x)))
        .fold((mid, f64::NEG_INFINITY), |best, cand| {
            if cand.1 > best.1 {
                cand
            } else {
                best
            }
        })
        .0
}

/// Maximizer of `T_N` over `{ξ ≥ 0, Σξ ≤ B}` for `N ≤ 4`, iterated until a
/// full sweep moves no coordinate by more than `tol·B`.
pub fn brute_force_oracle(params: &SystemParams, n: usize, tol: f64) -> Result<AllocationSequence> {
    if n == 0 {
        return Err(Error::EmptyHorizon);
    }
    if n > ORACLE_MAX_N {
        return Err(Error::OracleTooLarge {
            n,
            max: ORACLE_MAX_N,
        });
    }
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::InvalidTolerance(tol));
    }
    let b = params.battery_capacity();
    let w = params.window() as f64;
    let line_tol = (tol * b * 1e-3).max(b * 1e-14);

    let objective = |x: &[f64]| -> f64 {
        AllocationSequence::new(x.to_vec(), b)
            .and_then(|seq| eval_t_n(params, &seq))
            .unwrap_or(f64::NEG_INFINITY)
    };

    let mut x: Vec<f64> = alloc::vec![b / (n as f64 + w); n];
    for _ in 0..MAX_SWEEPS {
        let mut largest_move = 0.0f64;
        for j in 0..n {
            let others: f64 = x
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != j)
                .map(|(_, v)| v)
                .sum();
            let room = (b - others).max(0.0);
            let mut trial = x.clone();
            let best = golden_section_max(
                |t| {
                    trial[j] = t;
                    objective(&trial)
                },
                0.0,
                room,
                line_tol,
            );
            largest_move = largest_move.max((best - x[j]).abs());
            x[j] = best;
        }
        if largest_move <= tol * b {
            return AllocationSequence::new(x, b);
        }
    }
    Err(Error::NonConvergence {
        iterations: MAX_SWEEPS,
        reason: "coordinate ascent did not settle",
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_section_finds_parabola_peak() {
        let x = golden_section_max(|t| -(t - 0.3) * (t - 0.3), 0.0, 1.0, 1e-12);
        assert!((x - 0.3).abs() < 1e-9);
        let edge = golden_section_max(|t| t, 0.0, 2.0, 1e-12);
        assert_eq!(edge, 2.0);
    }

    #[test]
    fn single_coordinate_matches_closed_form() {
        let params = SystemParams::new(0.3, 0.5, 100.0, 4).unwrap();
        let xi = brute_force_oracle(&params, 1, 1e-9).unwrap();
        assert!((xi.values()[0] - 20.0).abs() < 1e-5);
    }

    #[test]
    fn refuses_large_horizons() {
        let params = SystemParams::new(0.3, 0.5, 100.0, 4).unwrap();
        assert_eq!(
            brute_force_oracle(&params, 5, 1e-6),
            Err(Error::OracleTooLarge { n: 5, max: 4 })
        );
    }
}

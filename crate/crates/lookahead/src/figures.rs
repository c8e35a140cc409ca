//! Data behind the window sweep and the per-horizon allocation table.

use lookahead_core::{offline_bound, solve_finite, solve_infinite, SystemParams};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub w: usize,
    pub gamma_star: f64,
    pub offline: f64,
    /// `(offline - gamma_star) / offline`.
    pub relative_gap: f64,
}

/// Optimal average throughput for each window in `w_min..=w_max`, next to the
/// window-free offline bound. Rows are solved in parallel and returned in order.
pub fn sweep_window(
    params: &SystemParams,
    w_min: usize,
    w_max: usize,
    tol: f64,
) -> Result<Vec<SweepRow>> {
    if w_min == 0 || w_min > w_max {
        return Err(Error::Input(format!(
            "empty window range {w_min}..={w_max}"
        )));
    }
    let offline = offline_bound(params, tol)?;
    (w_min..=w_max)
        .into_par_iter()
        .map(|w| {
            let row = || -> Result<SweepRow> {
                let gamma_star = solve_infinite(&params.with_window(w)?, tol)?.objective;
                Ok(SweepRow {
                    w,
                    gamma_star,
                    offline,
                    relative_gap: (offline - gamma_star) / offline,
                })
            };
            row().map_err(|e| e.context(format!("window {w}")))
        })
        .collect()
}

/// Finite-horizon optimal sequences for several horizons plus the
/// infinite-horizon one, truncated to the longest horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XiTable {
    pub horizons: Vec<usize>,
    pub finite: Vec<Vec<f64>>,
    pub infinite: Vec<f64>,
}

impl XiTable {
    pub fn rows(&self) -> usize {
        self.horizons.iter().copied().max().unwrap_or(0)
    }
}

pub fn xi_table(params: &SystemParams, horizons: &[usize], tol: f64) -> Result<XiTable> {
    if horizons.is_empty() {
        return Err(Error::Input("no horizons given".into()));
    }
    let finite = horizons
        .par_iter()
        .map(|&n| {
            solve_finite(params, n, tol)
                .map(|r| r.xi.into_values())
                .map_err(|e| Error::from(e).context(format!("horizon {n}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let rows = horizons.iter().copied().max().unwrap_or(0);
    let mut infinite = solve_infinite(params, tol)
        .map_err(|e| Error::from(e).context("infinite horizon"))?
        .xi
        .into_values();
    infinite.truncate(rows);
    Ok(XiTable {
        horizons: horizons.to_vec(),
        finite,
        infinite,
    })
}

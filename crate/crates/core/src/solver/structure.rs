use serde::{Deserialize, Serialize};

use super::Horizon;
use crate::model::{AllocationSequence, SystemParams};

/// Tolerance, relative to `B`, for the terminal equality `ξ_N = R_N/w`.
pub const STRUCTURE_TOL: f64 = 1e-9;

/// Structural properties an optimal drought sequence must have, with the
/// worst margin observed for each. Margins are positive when the property holds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureReport {
    pub all_positive: bool,
    pub strictly_decreasing: bool,
    /// `ξ_j < R_j/w` for every `j < N` (every stored `j` for the infinite case).
    pub below_residual_share: bool,
    /// `ξ_N = R_N/w` (finite horizon only).
    pub terminal_identity: Option<bool>,
    /// `R_N < wB/N` (finite horizon only).
    pub residual_envelope: Option<bool>,
    pub min_value: f64,
    pub min_decrease: f64,
    pub min_share_margin: f64,
    pub terminal_gap: Option<f64>,
    pub envelope_margin: Option<f64>,
}

impl StructureReport {
    pub fn all_hold(&self) -> bool {
        self.all_positive
            && self.strictly_decreasing
            && self.below_residual_share
            && self.terminal_identity.unwrap_or(true)
            && self.residual_envelope.unwrap_or(true)
    }
}

/// Pure diagnostic; never fails.
pub fn verify_structure(
    params: &SystemParams,
    xi: &AllocationSequence,
    horizon: Horizon,
) -> StructureReport {
    let w = params.window() as f64;
    let b = params.battery_capacity();
    let values = xi.values();
    let residuals = xi.residuals();
    let n = values.len();

    let min_value = values.iter().copied().fold(f64::INFINITY, f64::min);
    let min_decrease = values
        .windows(2)
        .map(|pair| pair[0] - pair[1])
        .fold(f64::INFINITY, f64::min);
    let share_terms = if horizon.is_finite() {
        n.saturating_sub(1)
    } else {
        n
    };
    let min_share_margin = values
        .iter()
        .zip(&residuals)
        .take(share_terms)
        .map(|(&x, &r)| r / w - x)
        .fold(f64::INFINITY, f64::min);

    let (terminal_gap, envelope_margin) = match (horizon, values.last()) {
        (Horizon::Finite(_), Some(&last)) => (
            Some((last - xi.residual() / w).abs()),
            Some(w * b / n as f64 - xi.residual()),
        ),
        _ => (None, None),
    };

    StructureReport {
        all_positive: min_value > 0.0,
        strictly_decreasing: min_decrease > 0.0,
        below_residual_share: min_share_margin > 0.0,
        terminal_identity: terminal_gap.map(|gap| gap <= STRUCTURE_TOL * b),
        residual_envelope: envelope_margin.map(|m| m > 0.0),
        min_value,
        min_decrease,
        min_share_margin,
        terminal_gap,
        envelope_margin,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{solve_finite, solve_infinite, DEFAULT_TOL};

    fn base() -> SystemParams {
        SystemParams::new(0.3, 0.5, 100.0, 4).unwrap()
    }

    #[test]
    fn finite_solution_has_every_property() {
        let report = solve_finite(&base(), 10, DEFAULT_TOL).unwrap();
        let structure = verify_structure(&base(), &report.xi, report.horizon);
        assert!(structure.all_hold(), "{structure:?}");
        assert_eq!(structure.terminal_identity, Some(true));
        assert!(report.xi.residual() < 4.0 * 100.0 / 10.0);
    }

    #[test]
    fn infinite_solution_has_every_property() {
        let report = solve_infinite(&base(), DEFAULT_TOL).unwrap();
        let structure = verify_structure(&base(), &report.xi, report.horizon);
        assert!(structure.all_hold(), "{structure:?}");
        assert_eq!(structure.terminal_identity, None);
    }

    #[test]
    fn constant_sequence_is_not_decreasing() {
        let n = 6;
        let xi = AllocationSequence::new(alloc::vec![100.0 / (2.0 * n as f64); n], 100.0).unwrap();
        let structure = verify_structure(&base(), &xi, Horizon::Finite(n));
        assert!(!structure.strictly_decreasing);
        assert!(structure.all_positive);
        assert!(!structure.all_hold());
    }
}

//! System parameters, the per-slot rate, battery dynamics and the value types
//! shared by the rest of the crate.

use alloc::vec::Vec;
use core::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::sum::CompensatedSum;
use crate::{Error, Result};

/// Unvalidated parameter tuple, as it comes from a CLI or a file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawParams {
    pub p: f64,
    pub gamma: f64,
    pub battery_capacity: f64,
    pub window: u64,
}

/// Channel, battery and look-ahead model: arrivals of size `B` with
/// probability `p` per slot, constant gain `γ`, and a window of `w` future slots.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct SystemParams {
    p: f64,
    gamma: f64,
    battery_capacity: f64,
    window: usize,
}

impl SystemParams {
    pub fn new(p: f64, gamma: f64, battery_capacity: f64, window: usize) -> Result<Self> {
        validate_params(RawParams {
            p,
            gamma,
            battery_capacity,
            window: window as u64,
        })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// `1 - p`, the per-slot probability of no arrival.
    pub fn q(&self) -> f64 {
        1.0 - self.p
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn battery_capacity(&self) -> f64 {
        self.battery_capacity
    }

    pub fn window(&self) -> usize {
        self.window
    }

    /// Same model with a different window size.
    pub fn with_window(&self, window: usize) -> Result<Self> {
        Self::new(self.p, self.gamma, self.battery_capacity, window)
    }
}

impl TryFrom<RawParams> for SystemParams {
    type Error = Error;

    fn try_from(raw: RawParams) -> Result<Self> {
        validate_params(raw)
    }
}

impl From<SystemParams> for RawParams {
    fn from(params: SystemParams) -> Self {
        RawParams {
            p: params.p,
            gamma: params.gamma,
            battery_capacity: params.battery_capacity,
            window: params.window as u64,
        }
    }
}

/// Checks every parameter invariant; each violation has its own error.
pub fn validate_params(raw: RawParams) -> Result<SystemParams> {
    // NaN fails every comparison, so the negated forms reject it too.
    if !(raw.p > 0.0 && raw.p < 1.0) {
        return Err(Error::ProbabilityOutOfRange(raw.p));
    }
    if !(raw.gamma > 0.0 && raw.gamma.is_finite()) {
        return Err(Error::GainNotPositive(raw.gamma));
    }
    if !(raw.battery_capacity > 0.0 && raw.battery_capacity.is_finite()) {
        return Err(Error::CapacityNotPositive(raw.battery_capacity));
    }
    let window = usize::try_from(raw.window).map_err(|_| Error::WindowTooSmall(raw.window))?;
    if window < 1 {
        return Err(Error::WindowTooSmall(raw.window));
    }
    Ok(SystemParams {
        p: raw.p,
        gamma: raw.gamma,
        battery_capacity: raw.battery_capacity,
        window,
    })
}

/// `½·log2(1 + x)`, evaluated through `log1p` so tiny arguments keep their
/// relative precision.
#[inline]
pub(crate) fn half_log2_1p(x: f64) -> f64 {
    libm::log1p(x) / (2.0 * LN_2)
}

/// `x / (1 + x)`, i.e. `1 - 1/(1 + x)` without the cancellation.
#[inline]
pub(crate) fn shrink(x: f64) -> f64 {
    x / (1.0 + x)
}

/// Throughput in bits per slot for spending `action` energy: `½·log2(1 + γ·action)`.
pub fn reward(action: f64, gamma: f64) -> Result<f64> {
    if action.is_nan() || action < 0.0 {
        return Err(Error::NegativeAction(action));
    }
    Ok(half_log2_1p(gamma * action))
}

/// Battery level after spending `action` and receiving `arrival` (either 0 or
/// the full capacity); overflow is clamped at the capacity.
pub fn battery_update(level: f64, action: f64, arrival: f64, capacity: f64) -> Result<f64> {
    if action.is_nan() || action < 0.0 {
        return Err(Error::NegativeAction(action));
    }
    if action > level {
        return Err(Error::CausalityViolation { action, level });
    }
    if arrival != 0.0 && arrival != capacity {
        return Err(Error::InvalidArrival { arrival, capacity });
    }
    let next = (level - action + arrival).min(capacity);
    Ok(next.max(0.0))
}

/// Relative slack allowed on `Σ ξ ≤ B` to absorb summation roundoff.
const ADMISSIBILITY_SLACK: f64 = 16.0 * f64::EPSILON;

/// A finite prefix `ξ_1..ξ_N` of a drought allocation sequence.
///
/// Construction enforces admissibility: every entry is finite and
/// non-negative and the entries sum to at most the battery capacity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "AllocationRecord")]
pub struct AllocationSequence {
    values: Vec<f64>,
    capacity: f64,
    residual: f64,
}

// Deserialization recomputes the residual instead of trusting the file.
#[derive(Deserialize)]
struct AllocationRecord {
    values: Vec<f64>,
    capacity: f64,
}

impl TryFrom<AllocationRecord> for AllocationSequence {
    type Error = Error;

    fn try_from(record: AllocationRecord) -> Result<Self> {
        AllocationSequence::new(record.values, record.capacity)
    }
}

impl AllocationSequence {
    pub fn new(values: Vec<f64>, capacity: f64) -> Result<Self> {
        if !(capacity > 0.0 && capacity.is_finite()) {
            return Err(Error::CapacityNotPositive(capacity));
        }
        for (index, &value) in values.iter().enumerate() {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(Error::InvalidEntry { index, value });
            }
        }
        let total = values.iter().copied().collect::<CompensatedSum>().value();
        if total > capacity * (1.0 + ADMISSIBILITY_SLACK) {
            return Err(Error::Inadmissible { total, capacity });
        }
        Ok(AllocationSequence {
            values,
            capacity,
            residual: (capacity - total).max(0.0),
        })
    }

    /// All-zero prefix of length `n`.
    pub fn zeros(n: usize, capacity: f64) -> Result<Self> {
        Self::new(alloc::vec![0.0; n], capacity)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn capacity(&self) -> f64 {
        self.capacity
    }

    /// `B - Σ ξ_j` over the whole prefix.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    /// Residual battery after each entry: `R_j = B - Σ_{i≤j} ξ_i`, clamped at 0.
    pub fn residuals(&self) -> Vec<f64> {
        let mut spent = CompensatedSum::default();
        self.values
            .iter()
            .map(|&x| {
                spent.add(x);
                (self.capacity - spent.value()).max(0.0)
            })
            .collect()
    }
}

/// A realized arrival sequence (`true` = a full-battery arrival in that slot)
/// together with the seed that produced it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArrivalTrace {
    arrivals: Vec<bool>,
    seed: u64,
}

impl ArrivalTrace {
    pub fn new(arrivals: Vec<bool>, seed: u64) -> Self {
        ArrivalTrace { arrivals, seed }
    }

    pub fn arrivals(&self) -> &[bool] {
        &self.arrivals
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.arrivals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arrivals.is_empty()
    }

    pub fn arrival_count(&self) -> usize {
        self.arrivals.iter().filter(|&&a| a).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn base() -> RawParams {
        RawParams {
            p: 0.3,
            gamma: 0.5,
            battery_capacity: 100.0,
            window: 4,
        }
    }

    #[test]
    fn accepts_reference_parameters() {
        let params = validate_params(base()).unwrap();
        assert_eq!(params.window(), 4);
        assert_eq!(params.q(), 0.7);
    }

    #[test]
    fn rejects_each_invariant_separately() {
        let bad_p = RawParams { p: 0.0, ..base() };
        assert_eq!(
            validate_params(bad_p),
            Err(Error::ProbabilityOutOfRange(0.0))
        );
        let bad_p = RawParams { p: 1.0, ..base() };
        assert_eq!(
            validate_params(bad_p),
            Err(Error::ProbabilityOutOfRange(1.0))
        );
        let nan_p = RawParams {
            p: f64::NAN,
            ..base()
        };
        assert!(matches!(
            validate_params(nan_p),
            Err(Error::ProbabilityOutOfRange(_))
        ));
        let bad_g = RawParams {
            gamma: 0.0,
            ..base()
        };
        assert_eq!(validate_params(bad_g), Err(Error::GainNotPositive(0.0)));
        let bad_b = RawParams {
            battery_capacity: -1.0,
            ..base()
        };
        assert_eq!(
            validate_params(bad_b),
            Err(Error::CapacityNotPositive(-1.0))
        );
        let bad_w = RawParams {
            window: 0,
            ..base()
        };
        assert_eq!(validate_params(bad_w), Err(Error::WindowTooSmall(0)));
    }

    #[test]
    fn reward_values() {
        assert_eq!(reward(0.0, 3.0).unwrap(), 0.0);
        assert!((reward(2.0, 0.5).unwrap() - 0.5).abs() < 1e-15);
        // ½·log2(51)
        assert!((reward(100.0, 0.5).unwrap() - 2.836_212_670_985_748).abs() < 1e-12);
        assert_eq!(reward(-1.0, 0.5), Err(Error::NegativeAction(-1.0)));
    }

    #[test]
    fn battery_update_cases() {
        assert_eq!(battery_update(100.0, 0.0, 100.0, 100.0).unwrap(), 100.0);
        assert_eq!(battery_update(40.0, 15.0, 0.0, 100.0).unwrap(), 25.0);
        assert_eq!(battery_update(40.0, 40.0, 0.0, 100.0).unwrap(), 0.0);
        assert_eq!(
            battery_update(40.0, 41.0, 0.0, 100.0),
            Err(Error::CausalityViolation {
                action: 41.0,
                level: 40.0
            })
        );
        assert!(matches!(
            battery_update(40.0, 1.0, 50.0, 100.0),
            Err(Error::InvalidArrival { .. })
        ));
    }

    #[test]
    fn allocation_admissibility() {
        let seq = AllocationSequence::new(vec![30.0, 20.0, 10.0], 100.0).unwrap();
        assert_eq!(seq.residual(), 40.0);
        assert_eq!(seq.residuals(), vec![70.0, 50.0, 40.0]);
        assert!(matches!(
            AllocationSequence::new(vec![60.0, 50.0], 100.0),
            Err(Error::Inadmissible { .. })
        ));
        assert_eq!(
            AllocationSequence::new(vec![1.0, -0.5], 100.0),
            Err(Error::InvalidEntry {
                index: 1,
                value: -0.5
            })
        );
    }

    #[test]
    fn params_deserialize_through_validation() {
        let params = SystemParams::new(0.3, 0.5, 100.0, 4).unwrap();
        let raw: RawParams = params.into();
        assert_eq!(SystemParams::try_from(raw).unwrap(), params);
        let bad = RawParams { window: 0, ..raw };
        assert!(SystemParams::try_from(bad).is_err());
    }
}

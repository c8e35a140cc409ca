//! The look-ahead policy as a deterministic state machine.
//!
//! At slot `τ` the policy sees arrivals in slots `τ+1..τ+w`; the arrival of
//! slot `τ` itself has already been added to the battery. If an arrival is
//! visible at distance `d`, the battery is split evenly over the `d` slots up
//! to it. Otherwise the policy spends the next term of the drought sequence.

use serde::{Deserialize, Serialize};

use crate::model::{battery_update, reward, AllocationSequence, SystemParams};
use crate::objective::check_capacity;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyState {
    pub battery: f64,
    /// Slots until the earliest observed arrival; 0 when none is observed.
    pub distance: usize,
    /// 1-based index of the next drought term.
    pub xi_index: usize,
    /// Window position where the last scan stopped.
    pub scan_cursor: usize,
}

impl PolicyState {
    pub fn new(battery: f64) -> Self {
        PolicyState {
            battery,
            distance: 0,
            xi_index: 1,
            scan_cursor: 1,
        }
    }
}

/// Result of one policy step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    /// State entering the next slot.
    pub state: PolicyState,
    pub action: f64,
    pub reward: f64,
    /// Distance the action was based on (0 = drought action).
    pub distance: usize,
}

/// Distance to the earliest arrival in the view, or 0 if there is none.
pub fn lookahead_distance(window_view: &[bool], window: usize) -> Result<usize> {
    if window_view.len() != window {
        return Err(Error::WrongViewLength {
            expected: window,
            got: window_view.len(),
        });
    }
    Ok(window_view.iter().position(|&a| a).map_or(0, |i| i + 1))
}

#[derive(Debug, Clone)]
pub struct Policy<'a> {
    params: SystemParams,
    xi: &'a AllocationSequence,
    drain_ratio: f64,
}

impl<'a> Policy<'a> {
    pub fn new(params: SystemParams, xi: &'a AllocationSequence) -> Result<Self> {
        check_capacity(&params, xi)?;
        // Past the stored prefix the policy keeps spending the fraction of the
        // battery that the last stored term spent.
        let drain_ratio = match xi.values().last() {
            Some(&last) if last + xi.residual() > 0.0 => last / (last + xi.residual()),
            _ => 0.0,
        };
        Ok(Policy {
            params,
            xi,
            drain_ratio,
        })
    }

    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    pub fn drain_ratio(&self) -> f64 {
        self.drain_ratio
    }

    /// Energy to spend in the current state; never exceeds the battery.
    pub fn action(&self, state: &PolicyState) -> Result<f64> {
        if state.distance != 0 {
            return Ok(state.battery / state.distance as f64);
        }
        if self.xi.is_empty() {
            return Err(Error::XiExhausted);
        }
        let planned = match self.xi.values().get(state.xi_index - 1) {
            Some(&x) => x,
            None => state.battery * self.drain_ratio,
        };
        Ok(planned.min(state.battery))
    }

    /// One slot: scan the window if no arrival is pending, act, then apply
    /// the next slot's arrival (`window_view[0]`) to the battery.
    pub fn step(&self, state: &PolicyState, window_view: &[bool]) -> Result<StepOutcome> {
        let w = self.params.window();
        if window_view.len() != w {
            return Err(Error::WrongViewLength {
                expected: w,
                got: window_view.len(),
            });
        }
        let mut next = *state;
        if next.distance == 0 {
            let d = lookahead_distance(window_view, w)?;
            if d != 0 {
                next.distance = d;
                next.xi_index = 1;
                next.scan_cursor = d;
            } else {
                next.scan_cursor = w;
            }
        }

        let action = self.action(&next)?;
        let distance = next.distance;
        if next.distance != 0 {
            next.distance -= 1;
        } else {
            next.xi_index += 1;
        }

        let capacity = self.params.battery_capacity();
        let arrival = if window_view[0] { capacity } else { 0.0 };
        next.battery = battery_update(next.battery, action, arrival, capacity)?;
        Ok(StepOutcome {
            state: next,
            action,
            reward: reward(action, self.params.gamma())?,
            distance,
        })
    }
}

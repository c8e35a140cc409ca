//! Seeded Monte Carlo runs of the look-ahead policy.

use lookahead_core::{
    eval_t_infinity, AllocationSequence, ArrivalTrace, Policy, PolicyState, SystemParams,
    DEFAULT_TAIL_TOL,
};
use rand::distr::{Bernoulli, Distribution};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};

pub const RNG_NAME: &str = "ChaCha8Rng";

/// Cycle lengths 1..=CHI_SQUARE_BINS get a bin each, longer ones share a tail bin.
pub const CHI_SQUARE_BINS: usize = 20;

/// Bernoulli(p) arrival flags for `slots` slots, reproducible from `seed`.
pub fn generate_arrivals(params: &SystemParams, slots: usize, seed: u64) -> Result<ArrivalTrace> {
    if slots == 0 {
        return Err(Error::NoSlots);
    }
    let coin = Bernoulli::new(params.p()).map_err(|e| Error::Input(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let arrivals = (0..slots).map(|_| coin.sample(&mut rng)).collect();
    Ok(ArrivalTrace::new(arrivals, seed))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThroughputReport {
    pub simulated_mean: f64,
    pub std_error: f64,
    pub slots: usize,
    pub analytic: f64,
    pub z_score: f64,
    pub cycle_count: usize,
    pub mean_cycle_length: f64,
    pub seed: u64,
    pub initial_battery: f64,
    pub rng: String,
    /// Cycle lengths against Geometric(p); absent with fewer than two cycles.
    pub cycle_length_test: Option<ChiSquareTest>,
}

/// One simulated slot, as written by the trace dump.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlotRecord {
    pub index: usize,
    pub arrival: bool,
    pub distance: usize,
    pub action: f64,
    pub battery: f64,
    pub reward: f64,
}

/// Runs the policy for `slots` slots. The battery starts at
/// `initial_battery`, or at `B` if slot 1 has an arrival.
pub fn simulate(
    params: &SystemParams,
    xi: &AllocationSequence,
    slots: usize,
    seed: u64,
    initial_battery: f64,
) -> Result<ThroughputReport> {
    run(params, xi, slots, seed, initial_battery, |_| {})
}

/// Same as [`simulate`] but also returns every slot record.
pub fn simulate_with_trace(
    params: &SystemParams,
    xi: &AllocationSequence,
    slots: usize,
    seed: u64,
    initial_battery: f64,
) -> Result<(ThroughputReport, Vec<SlotRecord>)> {
    let mut records = Vec::with_capacity(slots);
    let report = run(params, xi, slots, seed, initial_battery, |r| {
        records.push(r)
    })?;
    Ok((report, records))
}

fn run(
    params: &SystemParams,
    xi: &AllocationSequence,
    slots: usize,
    seed: u64,
    initial_battery: f64,
    mut record: impl FnMut(SlotRecord),
) -> Result<ThroughputReport> {
    let b = params.battery_capacity();
    if !(0.0..=b).contains(&initial_battery) {
        return Err(Error::InitialBattery {
            level: initial_battery,
            capacity: b,
        });
    }
    let trace = generate_arrivals(params, slots, seed)?;
    let policy = Policy::new(*params, xi)?;
    let w = params.window();
    let mut padded = trace.arrivals().to_vec();
    padded.extend(std::iter::repeat_n(false, w));

    let start = if padded[0] { b } else { initial_battery };
    let mut state = PolicyState::new(start);
    let mut cycles = CycleStats::default();
    // A full battery with a fresh counter is a renewal point even without an arrival.
    let mut in_cycle = start == b;
    let mut cycle_reward = 0.0;
    let mut cycle_len = 0usize;
    let mut total = 0.0;
    let mut total_sq = 0.0;

    for t in 0..slots {
        if t > 0 && padded[t] {
            if in_cycle {
                cycles.push(cycle_reward, cycle_len);
            }
            in_cycle = true;
            cycle_reward = 0.0;
            cycle_len = 0;
        }
        let battery = state.battery;
        let out = policy.step(&state, &padded[t + 1..t + 1 + w])?;
        if !(0.0..=b).contains(&out.state.battery) {
            return Err(Error::BatteryOutOfRange {
                slot: t + 1,
                level: out.state.battery,
            });
        }
        record(SlotRecord {
            index: t + 1,
            arrival: padded[t],
            distance: out.distance,
            action: out.action,
            battery,
            reward: out.reward,
        });
        total += out.reward;
        total_sq += out.reward * out.reward;
        cycle_reward += out.reward;
        cycle_len += 1;
        state = out.state;
    }

    let simulated_mean = total / slots as f64;
    let analytic = eval_t_infinity(params, xi, DEFAULT_TAIL_TOL)?;
    let std_error = cycles
        .ratio_std_error()
        .unwrap_or_else(|| slot_std_error(total, total_sq, slots));
    Ok(ThroughputReport {
        simulated_mean,
        std_error,
        slots,
        analytic,
        z_score: (simulated_mean - analytic) / std_error,
        cycle_count: cycles.lengths.len(),
        mean_cycle_length: cycles.mean_length(),
        seed,
        initial_battery,
        rng: RNG_NAME.to_string(),
        cycle_length_test: cycles.chi_square(params.p()),
    })
}

/// Per-slot standard error, used only when there are too few complete cycles
/// for the regenerative estimate. It ignores autocorrelation.
fn slot_std_error(sum: f64, sum_sq: f64, slots: usize) -> f64 {
    if slots < 2 {
        return f64::INFINITY;
    }
    let n = slots as f64;
    let mean = sum / n;
    let var = ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
    let se = (var / n).sqrt();
    if se > 0.0 {
        se
    } else {
        f64::INFINITY
    }
}

#[derive(Debug, Default)]
struct CycleStats {
    rewards: Vec<f64>,
    lengths: Vec<usize>,
}

impl CycleStats {
    fn push(&mut self, reward: f64, length: usize) {
        self.rewards.push(reward);
        self.lengths.push(length);
    }

    fn mean_length(&self) -> f64 {
        if self.lengths.is_empty() {
            return f64::NAN;
        }
        self.lengths.iter().sum::<usize>() as f64 / self.lengths.len() as f64
    }

    /// Ratio estimator `ΣY/ΣL` over i.i.d. cycles; its standard error is
    /// `sqrt(Σ(Y_i - r·L_i)² / (n(n-1))) / mean(L)`.
    fn ratio_std_error(&self) -> Option<f64> {
        let n = self.lengths.len();
        if n < 2 {
            return None;
        }
        let total_len: f64 = self.lengths.iter().map(|&l| l as f64).sum();
        let ratio = self.rewards.iter().sum::<f64>() / total_len;
        let ss: f64 = self
            .rewards
            .iter()
            .zip(&self.lengths)
            .map(|(y, &l)| (y - ratio * l as f64).powi(2))
            .sum();
        let nf = n as f64;
        let se = (ss / (nf * (nf - 1.0))).sqrt() / (total_len / nf);
        (se > 0.0).then_some(se)
    }

    fn chi_square(&self, p: f64) -> Option<ChiSquareTest> {
        let n = self.lengths.len();
        if n < 2 {
            return None;
        }
        let mut observed = [0usize; CHI_SQUARE_BINS + 1];
        for &l in &self.lengths {
            observed[(l - 1).min(CHI_SQUARE_BINS)] += 1;
        }
        let q = 1.0 - p;
        let nf = n as f64;
        let mut statistic = 0.0;
        for (k, &count) in observed.iter().enumerate() {
            let prob = if k < CHI_SQUARE_BINS {
                p * q.powi(k as i32)
            } else {
                q.powi(CHI_SQUARE_BINS as i32)
            };
            let expected = nf * prob;
            statistic += (count as f64 - expected).powi(2) / expected;
        }
        let dof = CHI_SQUARE_BINS;
        let dist = ChiSquared::new(dof as f64).ok()?;
        Some(ChiSquareTest {
            statistic,
            dof,
            p_value: dist.sf(statistic),
        })
    }
}

/// Replications over several seeds, pooled into one estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub runs: Vec<ThroughputReport>,
    pub pooled_mean: f64,
    pub pooled_std_error: f64,
    pub analytic: f64,
    pub pooled_z_score: f64,
}

/// Runs one replication per seed in parallel; results keep the seed order.
pub fn compare(
    params: &SystemParams,
    xi: &AllocationSequence,
    slots: usize,
    seeds: &[u64],
    initial_battery: f64,
) -> Result<Comparison> {
    if seeds.len() < 2 {
        return Err(Error::TooFewSeeds {
            min: 2,
            got: seeds.len(),
        });
    }
    let runs = seeds
        .par_iter()
        .map(|&seed| simulate(params, xi, slots, seed, initial_battery))
        .collect::<Result<Vec<_>>>()?;
    let n = runs.len() as f64;
    let pooled_mean = runs.iter().map(|r| r.simulated_mean).sum::<f64>() / n;
    let pooled_std_error = runs.iter().map(|r| r.std_error.powi(2)).sum::<f64>().sqrt() / n;
    let analytic = runs[0].analytic;
    Ok(Comparison {
        pooled_z_score: (pooled_mean - analytic) / pooled_std_error,
        runs,
        pooled_mean,
        pooled_std_error,
        analytic,
    })
}

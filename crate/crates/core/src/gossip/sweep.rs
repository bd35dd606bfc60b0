//! Monte Carlo sweeps over independent protocol runs.
//!
//! A node's X chain depends only on its own samples, so one overlay of two
//! classes of `m` nodes each, with every view filled from the opposite
//! class, carries `2m` independent chains that all start at `X = m`.

use crate::markov::expected_hitting_time;
use crate::overlay::{NodeId, TopologyState, UtilityConfig};
use crate::par::Execution;
use crate::rng::{derive_seed, Stream};
use crate::schedule::SamplingSchedule;

use super::{run_convergence, run_from, GossipError, GossipTrace};

/// Hitting times of `X = 1` for chains started at `X = m`.
#[derive(Debug, Clone, PartialEq)]
pub struct HittingSample {
    pub times: Vec<u64>,
    /// Chains that had not reached 1 by the sweep horizon.
    pub censored: usize,
}

impl HittingSample {
    pub fn mean(&self) -> f64 {
        self.times.iter().sum::<u64>() as f64 / self.times.len() as f64
    }
}

fn worst_case_pair(m: usize) -> Result<TopologyState, GossipError> {
    let config = UtilityConfig::new(vec![m, m])?;
    Ok(TopologyState::worst_case(&config)?)
}

/// Simulates at least `chains` single-node chains with constant `p`, each
/// from `X_0 = m`, and returns the first `chains` hitting times.
pub fn hitting_time_sample(
    m: usize,
    p: f64,
    chains: usize,
    seed: u64,
    exec: Execution,
) -> Result<HittingSample, GossipError> {
    let per_overlay = 2 * m;
    let overlays = chains.div_ceil(per_overlay);
    let schedule = SamplingSchedule::Constant(p);
    // An invalid p is reported by the schedule check inside `run_from`.
    let mean = expected_hitting_time(m, p).unwrap_or(1.0);
    let horizon = ((100.0 * mean).ceil() as u64).max(1);
    let runs = exec.try_map_range(overlays, |k| {
        let state = worst_case_pair(m)?;
        run_from(
            state,
            &schedule,
            derive_seed(seed, Stream::Sweep, k as u64),
            horizon,
        )
    })?;
    let all: Vec<Option<u64>> = runs
        .iter()
        .flat_map(|trace| trace.convergence_ticks().iter().copied())
        .take(chains)
        .collect();
    Ok(HittingSample {
        censored: all.iter().filter(|t| t.is_none()).count(),
        times: all.into_iter().flatten().collect(),
    })
}

/// Empirical distribution of X over `nodes` independent chains started at
/// `X_0 = m`, observed at each tick in `at`.
///
/// Entry `j` of every returned vector is the fraction of chains in state
/// `X = m - j`, matching the position convention of
/// [`Distribution`](crate::markov::Distribution).
pub fn empirical_state_distribution(
    m: usize,
    p: f64,
    nodes: usize,
    at: &[u64],
    seed: u64,
    exec: Execution,
) -> Result<Vec<Vec<f64>>, GossipError> {
    let per_overlay = 2 * m;
    let overlays = nodes.div_ceil(per_overlay);
    let schedule = SamplingSchedule::Constant(p);
    let horizon = at.iter().copied().max().unwrap_or(0).max(1);
    let counts = exec.try_map_range(overlays, |k| {
        let state = worst_case_pair(m)?;
        let trace = run_from(
            state,
            &schedule,
            derive_seed(seed, Stream::Sweep, k as u64),
            horizon,
        )?;
        let take = per_overlay.min(nodes - k * per_overlay);
        let mut counts = vec![vec![0u64; m]; at.len()];
        for i in 0..take {
            for (slot, &t) in at.iter().enumerate() {
                let x = trace.x_at(NodeId(i as u32), t) as usize;
                counts[slot][m - x] += 1;
            }
        }
        Ok::<_, GossipError>(counts)
    })?;
    let mut total = vec![vec![0u64; m]; at.len()];
    for c in counts {
        for (acc, row) in total.iter_mut().zip(c) {
            for (a, v) in acc.iter_mut().zip(row) {
                *a += v;
            }
        }
    }
    Ok(total
        .into_iter()
        .map(|row| row.into_iter().map(|c| c as f64 / nodes as f64).collect())
        .collect())
}

/// Independent convergence runs, one per seed, from uniformly initialised
/// overlays.
pub fn seed_sweep(
    config: &UtilityConfig,
    schedule: &SamplingSchedule,
    seeds: &[u64],
    horizon: u64,
    exec: Execution,
) -> Result<Vec<GossipTrace>, GossipError> {
    exec.try_map_range(seeds.len(), |k| {
        run_convergence(config, schedule, seeds[k], horizon)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_state_chain_is_geometric() {
        // m = 2: one step from X = 2 to X = 1 with probability p each tick.
        let sample = hitting_time_sample(2, 0.1, 4000, 9, Execution::default()).unwrap();
        assert_eq!(sample.times.len(), 4000);
        assert_eq!(sample.censored, 0);
        // mean 10, sd of the mean ≈ sqrt(90 / 4000) ≈ 0.15
        assert!((sample.mean() - 10.0).abs() < 0.6, "mean {}", sample.mean());
    }

    #[test]
    fn empirical_distribution_rows_sum_to_one() {
        let rows =
            empirical_state_distribution(4, 0.05, 1000, &[0, 5, 50], 1, Execution::default())
                .unwrap();
        for row in &rows {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert_eq!(rows[0][0], 1.0);
    }

    #[test]
    fn execution_modes_agree() {
        let a = hitting_time_sample(5, 0.01, 50, 3, Execution::Sequential).unwrap();
        let b = hitting_time_sample(5, 0.01, 50, 3, Execution::Parallel).unwrap();
        assert_eq!(a, b);
    }
}

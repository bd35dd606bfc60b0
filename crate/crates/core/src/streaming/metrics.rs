use crate::overlay::NodeId;

use super::config::{StreamConfig, US_PER_MS, US_PER_S};
use super::sim::{InvariantReport, RunStats};
use super::Sampler;

/// One playback opportunity: the player wanted `block` at `time_us` and
/// either played it or stalled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlaySlot {
    pub time_us: u64,
    pub block: u64,
    pub on_time: bool,
}

/// Lifetime and playback record of one non-source node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeLog {
    pub id: NodeId,
    pub class: u32,
    pub join_us: u64,
    pub fail_us: Option<u64>,
    /// When playback began.
    pub start_us: Option<u64>,
    pub slots: Vec<PlaySlot>,
}

impl NodeLog {
    fn live_at(&self, t: u64) -> bool {
        self.join_us <= t && self.fail_us.is_none_or(|f| f > t)
    }
}

/// Everything a run leaves behind for metric computation.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamTrace {
    pub sampler: Sampler,
    pub duration_us: u64,
    /// Start of the recovery period the time-to-target is measured from.
    pub settle_us: u64,
    pub block_period_us: u64,
    pub nodes: Vec<NodeLog>,
    pub invariants: InvariantReport,
    pub stats: RunStats,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeSummary {
    pub id: NodeId,
    pub class: u32,
    pub join_s: f64,
    pub fail_s: Option<f64>,
    pub start_s: Option<f64>,
    pub on_time: usize,
    pub missed: usize,
    /// Played slots over all slots, 0 for a node that never played.
    pub continuity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreamingMetrics {
    pub sampler: Sampler,
    /// `(time_s, fraction)`: share of live non-source nodes whose
    /// continuity over the sliding window exceeds the threshold.
    pub continuity_series: Vec<(f64, f64)>,
    /// `(time_s, mean latency_s)` over live nodes that have played a block.
    pub latency_series: Vec<(f64, f64)>,
    /// Seconds from the settle point until the target fraction is reached
    /// and held; the remaining run time if it never is.
    pub time_to_target_s: f64,
    pub target_reached: bool,
    /// Time average of the latency series.
    pub mean_latency_s: f64,
    pub nodes: Vec<NodeSummary>,
}

/// Continuity and latency series sampled every `sample_interval_ms`.
///
/// A node qualifies at time `t` when it is playing and more than
/// `continuity_threshold` of its playback slots in `(t - window, t]` were
/// on time. Its latency at `t` is `t` minus the production time of the
/// last block it played.
pub fn compute_metrics(trace: &StreamTrace, config: &StreamConfig) -> StreamingMetrics {
    let interval = config.sample_interval_ms * US_PER_MS;
    let window = config.continuity_window_s * US_PER_S;
    let to_s = |us: u64| us as f64 / US_PER_S as f64;

    // Per node: [lo, hi) is the slot range inside the current window and
    // `hits` the on-time count in it; `last` is one past the last slot <= t.
    let mut cursors = vec![(0usize, 0usize, 0usize); trace.nodes.len()];
    let mut continuity_series = Vec::new();
    let mut latency_series = Vec::new();

    let mut t = interval;
    while t <= trace.duration_us {
        let mut live = 0usize;
        let mut good = 0usize;
        let mut latency_sum = 0.0;
        let mut latency_count = 0usize;
        for (node, cur) in trace.nodes.iter().zip(cursors.iter_mut()) {
            let (lo, hi, hits) = cur;
            while *hi < node.slots.len() && node.slots[*hi].time_us <= t {
                *hits += node.slots[*hi].on_time as usize;
                *hi += 1;
            }
            while *lo < *hi && node.slots[*lo].time_us + window <= t {
                *hits -= node.slots[*lo].on_time as usize;
                *lo += 1;
            }
            if !node.live_at(t) {
                continue;
            }
            live += 1;
            let total = *hi - *lo;
            if node.start_us.is_some_and(|s| s <= t)
                && total > 0
                && *hits as f64 / total as f64 > config.continuity_threshold
            {
                good += 1;
            }
            if let Some(last) = node.slots[..*hi].iter().rev().find(|s| s.on_time) {
                latency_sum += to_s(t - last.block * trace.block_period_us);
                latency_count += 1;
            }
        }
        let fraction = if live == 0 {
            0.0
        } else {
            good as f64 / live as f64
        };
        continuity_series.push((to_s(t), fraction));
        if latency_count > 0 {
            latency_series.push((to_s(t), latency_sum / latency_count as f64));
        }
        t += interval;
    }

    let hold = config.target_hold_ms as f64 / 1000.0;
    let settle = to_s(trace.settle_us);
    let reached = continuity_series
        .iter()
        .enumerate()
        .filter(|(_, &(ts, _))| ts >= settle)
        .find(|&(k, &(ts, _))| {
            let mut rest = continuity_series[k..]
                .iter()
                .take_while(|&&(tt, _)| tt <= ts + hold + 1e-9)
                .peekable();
            rest.peek().is_some()
                && ts + hold <= to_s(trace.duration_us) + 1e-9
                && rest.all(|&(_, f)| f >= config.target_fraction)
        })
        .map(|(_, &(ts, _))| ts - settle);
    let (time_to_target_s, target_reached) = match reached {
        Some(dt) => (dt, true),
        None => (to_s(trace.duration_us) - settle, false),
    };

    let mean_latency_s = if latency_series.is_empty() {
        0.0
    } else {
        latency_series.iter().map(|&(_, l)| l).sum::<f64>() / latency_series.len() as f64
    };

    let nodes = trace
        .nodes
        .iter()
        .map(|n| {
            let on_time = n.slots.iter().filter(|s| s.on_time).count();
            let missed = n.slots.len() - on_time;
            NodeSummary {
                id: n.id,
                class: n.class,
                join_s: to_s(n.join_us),
                fail_s: n.fail_us.map(to_s),
                start_s: n.start_us.map(to_s),
                on_time,
                missed,
                continuity: if n.slots.is_empty() {
                    0.0
                } else {
                    on_time as f64 / n.slots.len() as f64
                },
            }
        })
        .collect();

    StreamingMetrics {
        sampler: trace.sampler,
        continuity_series,
        latency_series,
        time_to_target_s,
        target_reached,
        mean_latency_s,
        nodes,
    }
}

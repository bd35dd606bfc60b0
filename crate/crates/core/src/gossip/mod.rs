//! The view-improvement protocol.
//!
//! Each step, every node independently asks the peer sampling service for
//! one uniformly random node (or nothing, with probability `1 - N * p_t`)
//! and offers the sample to its similar view. Nodes are processed in
//! ascending id order; a node only writes its own view, so the order does
//! not influence any decision.
//!
//! Step `t` (counting from 0) draws from the streams `Sampling/t` and
//! `TieBreak/t` of the run seed, which makes a step a pure function of
//! `(state, t, schedule, seed)`.

mod sweep;
mod trace;

pub use sweep::{empirical_state_distribution, hitting_time_sample, seed_sweep, HittingSample};
pub use trace::GossipTrace;

use rand::Rng;
use thiserror::Error;

use crate::overlay::{build_initial_topology, NodeId, OverlayError, TopologyState, UtilityConfig};
use crate::rng::{stream_rng, Stream};
use crate::schedule::{SamplingSchedule, ScheduleError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GossipError {
    #[error(transparent)]
    Overlay(#[from] OverlayError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error("horizon must be at least one step")]
    ZeroHorizon,
}

/// One peer-sampling draw for step `t`: `Some(j)` with probability
/// `N * p_t`, each node equally likely, `None` otherwise.
///
/// A single uniform `u` decides both: `u < N * p_t` selects node
/// `floor(u / p_t)`, so every node is returned with probability exactly
/// `p_t`.
pub fn sample_peer<R: Rng + ?Sized>(
    t: u64,
    schedule: &SamplingSchedule,
    node_count: usize,
    rng: &mut R,
) -> Result<Option<NodeId>, ScheduleError> {
    let p = schedule.checked_p(t, node_count)?;
    Ok(draw_peer(p, node_count, rng))
}

#[inline]
fn draw_peer<R: Rng + ?Sized>(p: f64, node_count: usize, rng: &mut R) -> Option<NodeId> {
    let u: f64 = rng.random();
    if u < node_count as f64 * p {
        let idx = ((u / p) as usize).min(node_count - 1);
        Some(NodeId(idx as u32))
    } else {
        None
    }
}

/// Offers sampled node `j` to node `i`'s similar view. Returns whether the
/// view changed. Sampling `i` itself or a current member is a no-op.
pub fn improve_view<R: Rng + ?Sized>(
    state: &mut TopologyState,
    i: NodeId,
    j: NodeId,
    rng: &mut R,
) -> Result<bool, OverlayError> {
    if j.index() >= state.node_count() {
        return Err(OverlayError::UnknownNode(j));
    }
    let (view, nodes) = state.view_mut_and_nodes(i)?;
    let utilities = nodes.utilities();
    Ok(view.offer(j, |k| utilities[k.index()], rng))
}

/// Runs step `state.tick()` for every node and advances the tick. Returns
/// the nodes whose views changed, in id order.
pub fn tick(
    state: &mut TopologyState,
    schedule: &SamplingSchedule,
    seed: u64,
) -> Result<Vec<NodeId>, GossipError> {
    let t = state.tick();
    let n = state.node_count();
    let p = schedule.checked_p(t, n)?;
    let mut sampling = stream_rng(seed, Stream::Sampling, t);
    let mut tie_break = None;
    let mut changed = Vec::new();
    for i in 0..n {
        let i = NodeId(i as u32);
        if let Some(j) = draw_peer(p, n, &mut sampling) {
            let rng = tie_break.get_or_insert_with(|| stream_rng(seed, Stream::TieBreak, t));
            if improve_view(state, i, j, rng)? {
                changed.push(i);
            }
        }
    }
    state.advance_tick();
    Ok(changed)
}

/// Builds the initial topology from `seed` and iterates until the overlay
/// satisfies both gradient conditions or `horizon` steps have run.
pub fn run_convergence(
    config: &UtilityConfig,
    schedule: &SamplingSchedule,
    seed: u64,
    horizon: u64,
) -> Result<GossipTrace, GossipError> {
    let state = build_initial_topology(config, seed)?;
    run_from(state, schedule, seed, horizon)
}

/// As [`run_convergence`], from a caller-supplied state.
pub fn run_from(
    mut state: TopologyState,
    schedule: &SamplingSchedule,
    seed: u64,
    horizon: u64,
) -> Result<GossipTrace, GossipError> {
    if horizon == 0 {
        return Err(GossipError::ZeroHorizon);
    }
    schedule.validate_for(state.node_count(), horizon)?;

    let n = state.node_count();
    let mut trace = GossipTrace::start(&state, seed, horizon)?;
    let mut status = Vec::with_capacity(n);
    for i in 0..n {
        status.push(NodeStatus::of(&state, NodeId(i as u32))?);
    }
    let mut satisfied = status.iter().filter(|s| s.ok()).count();
    if satisfied == n {
        trace.mark_gradient(0);
        return Ok(trace);
    }

    while state.tick() < horizon {
        let changed = tick(&mut state, schedule, seed)?;
        let t = state.tick();
        for i in changed {
            trace.record(i, t, state.x_metric(i)? as u32);
            let next = NodeStatus::of(&state, i)?;
            let prev = std::mem::replace(&mut status[i.index()], next);
            match (prev.ok(), next.ok()) {
                (false, true) => satisfied += 1,
                (true, false) => satisfied -= 1,
                _ => {}
            }
        }
        if satisfied == n {
            trace.mark_gradient(t);
            break;
        }
    }
    trace.finish(state.tick());
    Ok(trace)
}

#[derive(Clone, Copy)]
struct NodeStatus {
    single: bool,
    upward: Option<bool>,
}

impl NodeStatus {
    fn of(state: &TopologyState, i: NodeId) -> Result<Self, OverlayError> {
        let (single, upward) = state.node_condition(i)?;
        Ok(Self { single, upward })
    }

    fn ok(self) -> bool {
        self.single && self.upward != Some(false)
    }
}

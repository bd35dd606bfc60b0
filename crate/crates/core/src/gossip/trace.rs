use crate::overlay::{NodeId, OverlayError, TopologyState};

/// Per-node X series of a convergence run.
///
/// The series are stored as change points `(tick, x)`; the first entry of
/// every node is its value at tick 0. After the last executed tick a series
/// is constant (a run only stops early once the overlay has converged).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GossipTrace {
    seed: u64,
    horizon: u64,
    ticks_run: u64,
    changes: Vec<Vec<(u64, u32)>>,
    convergence: Vec<Option<u64>>,
    gradient_tick: Option<u64>,
}

impl GossipTrace {
    pub(crate) fn start(
        state: &TopologyState,
        seed: u64,
        horizon: u64,
    ) -> Result<Self, OverlayError> {
        let n = state.node_count();
        let mut changes = Vec::with_capacity(n);
        let mut convergence = Vec::with_capacity(n);
        for i in 0..n {
            let x = state.x_metric(NodeId(i as u32))? as u32;
            changes.push(vec![(state.tick(), x)]);
            convergence.push((x == 1).then_some(state.tick()));
        }
        Ok(Self {
            seed,
            horizon,
            ticks_run: 0,
            changes,
            convergence,
            gradient_tick: None,
        })
    }

    pub(crate) fn record(&mut self, i: NodeId, t: u64, x: u32) {
        let series = &mut self.changes[i.index()];
        if series.last().map(|&(_, last)| last) != Some(x) {
            series.push((t, x));
        }
        if x == 1 && self.convergence[i.index()].is_none() {
            self.convergence[i.index()] = Some(t);
        }
    }

    pub(crate) fn mark_gradient(&mut self, t: u64) {
        self.gradient_tick = Some(t);
        self.ticks_run = t;
    }

    pub(crate) fn finish(&mut self, ticks_run: u64) {
        self.ticks_run = ticks_run;
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    /// Number of steps actually executed.
    pub fn ticks_run(&self) -> u64 {
        self.ticks_run
    }

    pub fn node_count(&self) -> usize {
        self.changes.len()
    }

    pub fn change_points(&self, i: NodeId) -> &[(u64, u32)] {
        &self.changes[i.index()]
    }

    /// `X_t` of node `i`. Ticks past the end of the run return the final
    /// value.
    pub fn x_at(&self, i: NodeId, t: u64) -> u32 {
        let series = &self.changes[i.index()];
        let pos = series.partition_point(|&(tick, _)| tick <= t);
        series[pos.saturating_sub(1)].1
    }

    pub fn final_x(&self, i: NodeId) -> u32 {
        self.changes[i.index()].last().map_or(0, |&(_, x)| x)
    }

    /// The full series `X_0, ..., X_{ticks_run}` of node `i`.
    pub fn series(&self, i: NodeId) -> Vec<u32> {
        let mut out = Vec::with_capacity(self.ticks_run as usize + 1);
        let points = &self.changes[i.index()];
        for (k, &(tick, x)) in points.iter().enumerate() {
            let until = points
                .get(k + 1)
                .map_or(self.ticks_run + 1, |&(next, _)| next);
            out.extend(std::iter::repeat_n(x, (until - tick) as usize));
        }
        out
    }

    /// First tick with `X = 1` for node `i`, if reached.
    pub fn convergence_tick(&self, i: NodeId) -> Option<u64> {
        self.convergence[i.index()]
    }

    pub fn convergence_ticks(&self) -> &[Option<u64>] {
        &self.convergence
    }

    /// First tick at which both gradient conditions held for every node.
    pub fn gradient_tick(&self) -> Option<u64> {
        self.gradient_tick
    }

    pub fn all_single_outsider(&self) -> bool {
        self.convergence.iter().all(Option::is_some)
    }

    pub fn is_non_increasing(&self) -> bool {
        self.changes
            .iter()
            .all(|s| s.windows(2).all(|w| w[1].1 <= w[0].1))
    }
}

//! The overlay graph: utility classes, per-node similar views, the X metric
//! and the gradient-convergence predicate.
//!
//! Node ids are dense (`0..N`). Utilities are assigned blockwise: the first
//! `m_1` ids carry utility 1, the next `m_2` carry utility 2 and so on.

use std::fmt;

use rand::seq::index;
use rand::Rng;
use thiserror::Error;

use crate::rng::{stream_rng, Stream};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OverlayError {
    #[error("no utility classes configured")]
    NoClasses,
    #[error("utility class {class} has {size} node(s); every class needs at least 2")]
    ClassTooSmall { class: u32, size: usize },
    #[error(
        "utility class {class} needs {size} view slots but only {available} other nodes exist"
    )]
    ClassTooLarge {
        class: u32,
        size: usize,
        available: usize,
    },
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("view of node {owner}: {reason}")]
    InvalidView { owner: NodeId, reason: String },
    #[error("worst-case start needs {needed} nodes outside class {class}, only {available} exist")]
    NoWorstCase {
        class: u32,
        needed: usize,
        available: usize,
    },
}

/// Class sizes `m_1..m_n` of the utility set `{1, ..., n}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UtilityConfig {
    class_sizes: Vec<usize>,
    node_count: usize,
}

impl UtilityConfig {
    pub fn new(class_sizes: Vec<usize>) -> Result<Self, OverlayError> {
        if class_sizes.is_empty() {
            return Err(OverlayError::NoClasses);
        }
        let node_count: usize = class_sizes.iter().sum();
        for (k, &size) in class_sizes.iter().enumerate() {
            let class = k as u32 + 1;
            if size < 2 {
                return Err(OverlayError::ClassTooSmall { class, size });
            }
            if size > node_count - 1 {
                return Err(OverlayError::ClassTooLarge {
                    class,
                    size,
                    available: node_count - 1,
                });
            }
        }
        Ok(Self {
            class_sizes,
            node_count,
        })
    }

    /// `levels` classes of `class_size` nodes each.
    pub fn uniform(levels: usize, class_size: usize) -> Result<Self, OverlayError> {
        Self::new(vec![class_size; levels])
    }

    /// `n`, the number of distinct utility values.
    pub fn levels(&self) -> u32 {
        self.class_sizes.len() as u32
    }

    pub fn class_sizes(&self) -> &[usize] {
        &self.class_sizes
    }

    /// `m_u`. Panics if `u` is outside `1..=n`.
    pub fn class_size(&self, u: u32) -> usize {
        self.class_sizes[u as usize - 1]
    }

    /// `N`.
    pub fn node_count(&self) -> usize {
        self.node_count
    }

    /// `m = max_u m_u`.
    pub fn max_class_size(&self) -> usize {
        self.class_sizes.iter().copied().max().unwrap_or(0)
    }
}

/// Utility value of every node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeTable {
    utilities: Vec<u32>,
}

impl NodeTable {
    pub fn blockwise(config: &UtilityConfig) -> Self {
        let utilities = config
            .class_sizes()
            .iter()
            .enumerate()
            .flat_map(|(k, &size)| std::iter::repeat_n(k as u32 + 1, size))
            .collect();
        Self { utilities }
    }

    pub fn len(&self) -> usize {
        self.utilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.utilities.is_empty()
    }

    pub fn utility(&self, id: NodeId) -> Option<u32> {
        self.utilities.get(id.index()).copied()
    }

    /// `d(i, j) = |U(i) - U(j)|`.
    pub fn distance(&self, i: NodeId, j: NodeId) -> Option<u32> {
        Some(self.utility(i)?.abs_diff(self.utility(j)?))
    }

    pub fn utilities(&self) -> &[u32] {
        &self.utilities
    }
}

/// A node's similar view: a set of exactly `capacity` peers, never
/// containing the owner. Members are kept sorted by id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimilarView {
    owner: NodeId,
    capacity: usize,
    members: Vec<NodeId>,
}

impl SimilarView {
    /// An empty view that fills up through [`offer`](Self::offer).
    pub fn empty(owner: NodeId, capacity: usize) -> Self {
        Self {
            owner,
            capacity,
            members: Vec::with_capacity(capacity),
        }
    }

    /// A full view holding exactly `members`.
    pub fn with_members(
        owner: NodeId,
        capacity: usize,
        mut members: Vec<NodeId>,
    ) -> Result<Self, OverlayError> {
        members.sort_unstable();
        let invalid = |reason: String| OverlayError::InvalidView { owner, reason };
        if members.len() != capacity {
            return Err(invalid(format!(
                "holds {} members, capacity is {capacity}",
                members.len()
            )));
        }
        if members.windows(2).any(|w| w[0] == w[1]) {
            return Err(invalid("duplicate member".into()));
        }
        if members.binary_search(&owner).is_ok() {
            return Err(invalid("contains its owner".into()));
        }
        Ok(Self {
            owner,
            capacity,
            members,
        })
    }

    /// Checks the view invariants: at most `capacity` distinct members,
    /// none of them the owner.
    pub fn validate(&self) -> Result<(), OverlayError> {
        let invalid = |reason: &str| {
            Err(OverlayError::InvalidView {
                owner: self.owner,
                reason: reason.into(),
            })
        };
        if self.members.len() > self.capacity {
            return invalid("over capacity");
        }
        if self.members.windows(2).any(|w| w[0] >= w[1]) {
            return invalid("duplicate or unsorted members");
        }
        if self.members.binary_search(&self.owner).is_ok() {
            return invalid("contains its owner");
        }
        Ok(())
    }

    pub fn owner(&self) -> NodeId {
        self.owner
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn members(&self) -> &[NodeId] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.members.len() >= self.capacity
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.members.binary_search(&id).is_ok()
    }

    /// Drops every member for which `keep` is false. Returns how many were
    /// removed.
    pub fn retain(&mut self, mut keep: impl FnMut(NodeId) -> bool) -> usize {
        let before = self.members.len();
        self.members.retain(|&m| keep(m));
        before - self.members.len()
    }

    /// Offers `candidate` to the view under the gradient preference.
    ///
    /// A view below capacity takes any new peer. A full view takes the
    /// candidate iff `U(j) >= U(i)` and `d(i, j) <= max_k d(i, k)`; the
    /// evicted member is one at maximum distance, the lower-utility side
    /// first, uniformly among equal utilities. `utility` must be defined for
    /// the owner, the candidate and every member.
    pub fn offer<R: Rng + ?Sized>(
        &mut self,
        candidate: NodeId,
        utility: impl Fn(NodeId) -> u32,
        rng: &mut R,
    ) -> bool {
        if candidate == self.owner {
            return false;
        }
        let slot = match self.members.binary_search(&candidate) {
            Ok(_) => return false,
            Err(slot) => slot,
        };
        if !self.is_full() {
            self.members.insert(slot, candidate);
            return true;
        }
        let own = utility(self.owner);
        let cand = utility(candidate);
        if cand < own {
            return false;
        }
        let cand_distance = cand - own;
        let max_distance = self
            .members
            .iter()
            .map(|&k| utility(k).abs_diff(own))
            .max()
            .unwrap_or(0);
        if cand_distance > max_distance {
            return false;
        }

        let victim_utility = if own >= max_distance
            && self
                .members
                .iter()
                .any(|&k| utility(k) == own - max_distance)
        {
            own - max_distance
        } else {
            own + max_distance
        };
        let victims: Vec<usize> = self
            .members
            .iter()
            .enumerate()
            .filter(|&(_, &k)| utility(k) == victim_utility)
            .map(|(pos, _)| pos)
            .collect();
        let pick = if victims.len() == 1 {
            victims[0]
        } else {
            victims[rng.random_range(0..victims.len())]
        };
        self.members.remove(pick);
        let slot = self.members.binary_search(&candidate).unwrap_err();
        self.members.insert(slot, candidate);
        true
    }
}

/// Per-node outcome of the gradient-convergence predicate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConvergenceReport {
    /// Condition (a): `X = 1`.
    pub single_outsider: Vec<bool>,
    /// Condition (b): the single different-utility member sits exactly one
    /// level up. `None` for top-utility nodes, which are exempt.
    pub upward_link: Vec<Option<bool>>,
    pub converged: bool,
}

impl ConvergenceReport {
    pub fn unconverged_nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.single_outsider
            .iter()
            .zip(&self.upward_link)
            .enumerate()
            .filter(|(_, (&a, b))| !a || **b == Some(false))
            .map(|(i, _)| NodeId(i as u32))
    }
}

/// The overlay at tick `t`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopologyState {
    config: UtilityConfig,
    nodes: NodeTable,
    views: Vec<SimilarView>,
    tick: u64,
}

/// Builds the starting overlay: every node's view is `m_{U(i)}` distinct
/// peers drawn uniformly without replacement from all other nodes.
pub fn build_initial_topology(
    config: &UtilityConfig,
    seed: u64,
) -> Result<TopologyState, OverlayError> {
    let nodes = NodeTable::blockwise(config);
    let n = nodes.len();
    let mut rng = stream_rng(seed, Stream::Topology, 0);
    let views = (0..n)
        .map(|i| {
            let owner = NodeId(i as u32);
            let capacity = config.class_size(nodes.utilities[i]);
            let members = index::sample(&mut rng, n - 1, capacity)
                .into_iter()
                .map(|k| NodeId(if k >= i { k + 1 } else { k } as u32))
                .collect();
            SimilarView::with_members(owner, capacity, members)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(TopologyState {
        config: config.clone(),
        nodes,
        views,
        tick: 0,
    })
}

impl TopologyState {
    /// A state with explicitly chosen views (`views[i]` belongs to node `i`).
    pub fn from_views(
        config: &UtilityConfig,
        views: Vec<Vec<NodeId>>,
    ) -> Result<Self, OverlayError> {
        let nodes = NodeTable::blockwise(config);
        if views.len() != nodes.len() {
            return Err(OverlayError::InvalidView {
                owner: NodeId(views.len().min(nodes.len()) as u32),
                reason: format!("{} views given for {} nodes", views.len(), nodes.len()),
            });
        }
        let views = views
            .into_iter()
            .enumerate()
            .map(|(i, members)| {
                let owner = NodeId(i as u32);
                if let Some(&bad) = members.iter().find(|m| m.index() >= nodes.len()) {
                    return Err(OverlayError::UnknownNode(bad));
                }
                let capacity = config.class_size(nodes.utilities[i]);
                SimilarView::with_members(owner, capacity, members)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            config: config.clone(),
            nodes,
            views,
            tick: 0,
        })
    }

    /// Every node starts with `X = m_{U(i)}`: its view is filled with peers
    /// from other classes, taken cyclically from the ids following its own
    /// class block.
    pub fn worst_case(config: &UtilityConfig) -> Result<Self, OverlayError> {
        let nodes = NodeTable::blockwise(config);
        let n = nodes.len();
        let mut views = Vec::with_capacity(n);
        let mut block_start = 0usize;
        for (k, &size) in config.class_sizes().iter().enumerate() {
            let outside = n - size;
            if outside < size {
                return Err(OverlayError::NoWorstCase {
                    class: k as u32 + 1,
                    needed: size,
                    available: outside,
                });
            }
            let first_outside = block_start + size;
            for _ in 0..size {
                views.push(
                    (0..size)
                        .map(|s| NodeId(((first_outside + s) % n) as u32))
                        .collect(),
                );
            }
            block_start += size;
        }
        Self::from_views(config, views)
    }

    pub fn config(&self) -> &UtilityConfig {
        &self.config
    }

    pub fn nodes(&self) -> &NodeTable {
        &self.nodes
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub(crate) fn advance_tick(&mut self) {
        self.tick += 1;
    }

    pub fn view(&self, i: NodeId) -> Result<&SimilarView, OverlayError> {
        self.views
            .get(i.index())
            .ok_or(OverlayError::UnknownNode(i))
    }

    pub(crate) fn view_mut_and_nodes(
        &mut self,
        i: NodeId,
    ) -> Result<(&mut SimilarView, &NodeTable), OverlayError> {
        let view = self
            .views
            .get_mut(i.index())
            .ok_or(OverlayError::UnknownNode(i))?;
        Ok((view, &self.nodes))
    }

    pub fn utility(&self, i: NodeId) -> Result<u32, OverlayError> {
        self.nodes.utility(i).ok_or(OverlayError::UnknownNode(i))
    }

    /// `X^{(i)}`: the number of view members whose utility differs from
    /// node `i`'s.
    pub fn x_metric(&self, i: NodeId) -> Result<usize, OverlayError> {
        let own = self.utility(i)?;
        let utilities = self.nodes.utilities();
        Ok(self
            .view(i)?
            .members()
            .iter()
            .filter(|m| utilities[m.index()] != own)
            .count())
    }

    /// Conditions (a) and (b) for a single node. (b) is `None` when the
    /// node has the top utility.
    pub fn node_condition(&self, i: NodeId) -> Result<(bool, Option<bool>), OverlayError> {
        let own = self.utility(i)?;
        let utilities = self.nodes.utilities();
        let mut outsiders = self
            .view(i)?
            .members()
            .iter()
            .map(|m| utilities[m.index()])
            .filter(|&u| u != own);
        let first = outsiders.next();
        let single = first.is_some() && outsiders.next().is_none();
        let upward = (own < self.config.levels()).then(|| single && first == Some(own + 1));
        Ok((single, upward))
    }

    pub fn check_gradient_converged(&self) -> ConvergenceReport {
        let (single_outsider, upward_link): (Vec<_>, Vec<_>) = (0..self.node_count())
            .map(|i| {
                self.node_condition(NodeId(i as u32))
                    .expect("node ids are dense")
            })
            .unzip();
        let converged =
            single_outsider.iter().all(|&a| a) && upward_link.iter().all(|b| *b != Some(false));
        ConvergenceReport {
            single_outsider,
            upward_link,
            converged,
        }
    }

    /// Re-checks every structural invariant. Cheap enough for tests and
    /// debug runs, not for inner loops.
    pub fn validate(&self) -> Result<(), OverlayError> {
        for (i, view) in self.views.iter().enumerate() {
            let owner = NodeId(i as u32);
            let capacity = self.config.class_size(self.nodes.utilities[i]);
            SimilarView::with_members(owner, capacity, view.members.clone())?;
            if let Some(&bad) = view.members.iter().find(|m| m.index() >= self.nodes.len()) {
                return Err(OverlayError::UnknownNode(bad));
            }
            let x = self.x_metric(owner)?;
            if x < 1 || x > capacity {
                return Err(OverlayError::InvalidView {
                    owner,
                    reason: format!("X = {x} outside 1..={capacity}"),
                });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ids(v: &[u32]) -> Vec<NodeId> {
        v.iter().copied().map(NodeId).collect()
    }

    #[test]
    fn small_topology_views_are_full_and_exclude_owner() {
        let config = UtilityConfig::new(vec![2, 2]).unwrap();
        for seed in 0..20 {
            let state = build_initial_topology(&config, seed).unwrap();
            for i in 0..4 {
                let view = state.view(NodeId(i)).unwrap();
                assert_eq!(view.len(), 2);
                assert!(!view.contains(NodeId(i)));
            }
            state.validate().unwrap();
        }
    }

    #[test]
    fn hundred_node_topology() {
        let config = UtilityConfig::uniform(10, 10).unwrap();
        assert_eq!(config.node_count(), 100);
        assert_eq!(config.max_class_size(), 10);
        let state = build_initial_topology(&config, 42).unwrap();
        for i in 0..100 {
            let id = NodeId(i);
            assert_eq!(state.view(id).unwrap().len(), 10);
            let x = state.x_metric(id).unwrap();
            assert!((1..=10).contains(&x), "node {i} has X = {x}");
        }
    }

    #[test]
    fn same_seed_same_topology() {
        let config = UtilityConfig::uniform(4, 5).unwrap();
        assert_eq!(
            build_initial_topology(&config, 9).unwrap(),
            build_initial_topology(&config, 9).unwrap()
        );
        assert_ne!(
            build_initial_topology(&config, 9).unwrap(),
            build_initial_topology(&config, 10).unwrap()
        );
    }

    #[test]
    fn config_errors_name_the_class() {
        assert_eq!(
            UtilityConfig::new(vec![1]),
            Err(OverlayError::ClassTooSmall { class: 1, size: 1 })
        );
        assert_eq!(
            UtilityConfig::new(vec![3, 1, 3]),
            Err(OverlayError::ClassTooSmall { class: 2, size: 1 })
        );
        assert_eq!(UtilityConfig::new(vec![]), Err(OverlayError::NoClasses));
        assert!(matches!(
            UtilityConfig::new(vec![2]),
            Err(OverlayError::ClassTooLarge { class: 1, .. })
        ));
    }

    #[test]
    fn x_metric_counts_different_utilities() {
        // Classes: u1 = {0,1}, u2 = {2,3,4}, u3 = {5,6}.
        let config = UtilityConfig::new(vec![2, 3, 2]).unwrap();
        let mut views = vec![ids(&[1, 2]), ids(&[0, 5])];
        views.push(ids(&[3, 4, 5])); // owner 2 (u2): one outsider
        views.push(ids(&[0, 1, 6])); // owner 3 (u2): three outsiders
        views.push(ids(&[2, 3, 0]));
        views.push(ids(&[6, 2]));
        views.push(ids(&[5, 4]));
        let state = TopologyState::from_views(&config, views).unwrap();
        assert_eq!(state.x_metric(NodeId(2)).unwrap(), 1);
        assert_eq!(state.x_metric(NodeId(3)).unwrap(), 3);
        assert_eq!(
            state.x_metric(NodeId(99)),
            Err(OverlayError::UnknownNode(NodeId(99)))
        );
    }

    #[test]
    fn converged_two_level_example() {
        let config = UtilityConfig::new(vec![2, 2]).unwrap();
        let state = TopologyState::from_views(
            &config,
            vec![ids(&[1, 2]), ids(&[0, 3]), ids(&[3, 0]), ids(&[2, 1])],
        )
        .unwrap();
        let report = state.check_gradient_converged();
        assert!(report.converged);
        assert_eq!(report.upward_link[2], None);
        assert_eq!(report.upward_link[0], Some(true));
        assert_eq!(report, state.check_gradient_converged());
    }

    #[test]
    fn two_outsiders_break_convergence() {
        let config = UtilityConfig::new(vec![2, 2, 2]).unwrap();
        let state = TopologyState::from_views(
            &config,
            vec![
                ids(&[2, 4]), // X = 2
                ids(&[0, 2]),
                ids(&[3, 4]),
                ids(&[2, 4]),
                ids(&[5, 0]),
                ids(&[4, 1]),
            ],
        )
        .unwrap();
        let report = state.check_gradient_converged();
        assert!(!report.converged);
        assert!(!report.single_outsider[0]);
        assert_eq!(report.unconverged_nodes().next(), Some(NodeId(0)));
    }

    #[test]
    fn skipped_level_fails_upward_condition() {
        // Five levels; a utility-3 node whose only outsider has utility 5.
        let config = UtilityConfig::uniform(5, 2).unwrap();
        let mut views: Vec<Vec<NodeId>> = (0..10u32)
            .map(|i| {
                let partner = i ^ 1;
                let up = if i >= 8 { 0 } else { (i / 2 + 1) * 2 };
                ids(&[partner, up])
            })
            .collect();
        views[4] = ids(&[5, 8]); // node 4 has utility 3; node 8 has utility 5
        let state = TopologyState::from_views(&config, views).unwrap();
        let report = state.check_gradient_converged();
        assert!(report.single_outsider[4]);
        assert_eq!(report.upward_link[4], Some(false));
        assert!(!report.converged);
    }

    #[test]
    fn worst_case_start_has_full_x() {
        let config = UtilityConfig::new(vec![3, 3, 4]).unwrap();
        let state = TopologyState::worst_case(&config).unwrap();
        for i in 0..10 {
            let id = NodeId(i);
            let cap = state.view(id).unwrap().capacity();
            assert_eq!(state.x_metric(id).unwrap(), cap);
        }
        assert!(matches!(
            TopologyState::worst_case(&UtilityConfig::new(vec![2, 5]).unwrap()),
            Err(OverlayError::NoWorstCase { class: 2, .. })
        ));
    }

    #[test]
    fn offer_applies_preference() {
        // Utilities by id: 0..2 → 1, 3..5 → 2, ..., blockwise classes of 3
        // over 9 levels; owner is node 12 (utility 5).
        let config = UtilityConfig::uniform(9, 3).unwrap();
        let nodes = NodeTable::blockwise(&config);
        let u = |id: NodeId| nodes.utility(id).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);

        // {5, 7, 7}: a same-utility peer evicts a utility-7 member, X 2 → 1.
        let mut view = SimilarView::with_members(NodeId(12), 3, ids(&[13, 18, 19])).unwrap();
        assert!(view.offer(NodeId(14), u, &mut rng));
        assert_eq!(view.members().iter().filter(|&&m| u(m) != 5).count(), 1);

        // {5, 5, 6}: a utility-4 candidate is rejected.
        let mut view = SimilarView::with_members(NodeId(12), 3, ids(&[13, 14, 15])).unwrap();
        assert!(!view.offer(NodeId(9), u, &mut rng));

        // {5, 5, 9}: a utility-6 candidate replaces the utility-9 member.
        let mut view = SimilarView::with_members(NodeId(12), 3, ids(&[13, 14, 24])).unwrap();
        assert!(view.offer(NodeId(15), u, &mut rng));
        assert_eq!(view.members(), &ids(&[13, 14, 15])[..]);

        // Owner and existing members are no-ops.
        assert!(!view.offer(NodeId(12), u, &mut rng));
        assert!(!view.offer(NodeId(13), u, &mut rng));
    }

    #[test]
    fn eviction_prefers_lower_side_at_equal_distance() {
        let config = UtilityConfig::uniform(9, 3).unwrap();
        let nodes = NodeTable::blockwise(&config);
        let u = |id: NodeId| nodes.utility(id).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        // Owner 12 (u5); 6 (u3) and 20 (u7) both sit at distance 2.
        let mut view = SimilarView::with_members(NodeId(12), 3, ids(&[13, 6, 20])).unwrap();
        assert!(view.offer(NodeId(16), u, &mut rng)); // u6, d = 1
        assert!(!view.contains(NodeId(6)));
        assert!(view.contains(NodeId(20)));
    }
}

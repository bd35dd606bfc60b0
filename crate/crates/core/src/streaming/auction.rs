use crate::overlay::NodeId;

/// One upload slot of a parent. `busy_until` is the end of the last
/// serialisation on the slot; a new occupant cannot start before it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Slot {
    pub occupant: Option<(NodeId, u32)>,
    pub busy_until: u64,
}

/// A parent's upload slots and the bids of their current children. A
/// child may hold several slots, one per download connection it won.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParentSlots {
    owner: NodeId,
    slots: Vec<Slot>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bid {
    pub child: NodeId,
    pub amount: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AuctionOutcome {
    pub accepted: Vec<NodeId>,
    /// Former occupants displaced by higher bids.
    pub evicted: Vec<NodeId>,
    pub rejected: Vec<NodeId>,
    /// Bids from dead nodes or the parent itself.
    pub ignored: Vec<NodeId>,
}

impl ParentSlots {
    pub fn new(owner: NodeId, capacity: usize) -> Self {
        Self {
            owner,
            slots: vec![
                Slot {
                    occupant: None,
                    busy_until: 0,
                };
                capacity
            ],
        }
    }

    pub fn owner(&self) -> NodeId {
        self.owner
    }

    pub fn capacity(&self) -> usize {
        self.slots.len()
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    pub fn occupied(&self) -> usize {
        self.slots.iter().filter(|s| s.occupant.is_some()).count()
    }

    /// Indices of the slots held by `child`.
    pub fn slots_of(&self, child: NodeId) -> impl Iterator<Item = usize> + '_ {
        self.slots
            .iter()
            .enumerate()
            .filter(move |(_, s)| s.occupant.is_some_and(|(c, _)| c == child))
            .map(|(k, _)| k)
    }

    /// Occupants of the slots, one entry per slot.
    pub fn children(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.slots.iter().filter_map(|s| s.occupant.map(|(c, _)| c))
    }

    /// Frees every slot held by `child` and returns how many there were.
    pub fn release(&mut self, child: NodeId) -> usize {
        let mut freed = 0;
        for s in &mut self.slots {
            if s.occupant.is_some_and(|(c, _)| c == child) {
                s.occupant = None;
                freed += 1;
            }
        }
        freed
    }

    pub(crate) fn slot_mut(&mut self, k: usize) -> &mut Slot {
        &mut self.slots[k]
    }
}

/// Ranking of bids: higher amount first, then lower id.
fn outranks(a: (NodeId, u32), b: (NodeId, u32)) -> bool {
    (a.1, std::cmp::Reverse(a.0)) > (b.1, std::cmp::Reverse(b.0))
}

/// Merges new bids into a parent's slots. Each bid asks for one slot.
/// Afterwards the slots hold the best-ranked bids among the previous
/// occupants and the valid new ones, ranked by amount and then by lower id.
pub fn auction_round(
    parent: &mut ParentSlots,
    bids: &[Bid],
    is_live: impl Fn(NodeId) -> bool,
) -> AuctionOutcome {
    let mut out = AuctionOutcome::default();
    let mut fresh: Vec<(NodeId, u32)> = Vec::with_capacity(bids.len());
    for bid in bids {
        if !is_live(bid.child) || bid.child == parent.owner {
            out.ignored.push(bid.child);
        } else {
            fresh.push((bid.child, bid.amount));
        }
    }
    fresh.sort_by(|&a, &b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));

    for cand in fresh {
        if let Some(k) = parent.slots.iter().position(|s| s.occupant.is_none()) {
            parent.slots[k].occupant = Some(cand);
            out.accepted.push(cand.0);
            continue;
        }
        // Weakest occupant, if the candidate beats it.
        let weakest = parent
            .slots
            .iter()
            .enumerate()
            .filter_map(|(k, s)| s.occupant.map(|o| (k, o)))
            .reduce(|w, x| if outranks(w.1, x.1) { x } else { w });
        match weakest {
            Some((k, occ)) if outranks(cand, occ) => {
                // New bids arrive best first, so the weakest occupant is
                // always a previous one.
                parent.slots[k].occupant = Some(cand);
                out.evicted.push(occ.0);
                out.accepted.push(cand.0);
            }
            _ => out.rejected.push(cand.0),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bids(list: &[(u32, u32)]) -> Vec<Bid> {
        list.iter()
            .map(|&(c, a)| Bid {
                child: NodeId(c),
                amount: a,
            })
            .collect()
    }

    fn amounts(p: &ParentSlots) -> Vec<u32> {
        let mut v: Vec<u32> = p
            .slots()
            .iter()
            .filter_map(|s| s.occupant.map(|o| o.1))
            .collect();
        v.sort_unstable();
        v
    }

    #[test]
    fn top_k_of_free_slots() {
        let mut p = ParentSlots::new(NodeId(0), 2);
        let out = auction_round(&mut p, &bids(&[(1, 10), (2, 6), (3, 4)]), |_| true);
        assert_eq!(out.accepted, vec![NodeId(1), NodeId(2)]);
        assert_eq!(out.rejected, vec![NodeId(3)]);
        assert_eq!(amounts(&p), vec![6, 10]);
    }

    #[test]
    fn higher_bid_evicts_lowest() {
        let mut p = ParentSlots::new(NodeId(0), 2);
        auction_round(&mut p, &bids(&[(1, 4), (2, 6)]), |_| true);
        let out = auction_round(&mut p, &bids(&[(3, 8)]), |_| true);
        assert_eq!(out.evicted, vec![NodeId(1)]);
        assert_eq!(out.accepted, vec![NodeId(3)]);
        assert_eq!(amounts(&p), vec![6, 8]);
    }

    #[test]
    fn low_bid_changes_nothing() {
        let mut p = ParentSlots::new(NodeId(0), 2);
        auction_round(&mut p, &bids(&[(1, 4), (2, 6)]), |_| true);
        let before = p.clone();
        let out = auction_round(&mut p, &bids(&[(3, 3)]), |_| true);
        assert_eq!(out.rejected, vec![NodeId(3)]);
        assert!(out.evicted.is_empty());
        assert_eq!(p, before);
    }

    #[test]
    fn ties_go_to_lower_id() {
        let mut p = ParentSlots::new(NodeId(0), 1);
        auction_round(&mut p, &bids(&[(7, 4)]), |_| true);
        let out = auction_round(&mut p, &bids(&[(9, 4), (5, 4)]), |_| true);
        assert_eq!(out.evicted, vec![NodeId(7)]);
        assert_eq!(out.accepted, vec![NodeId(5)]);
        assert_eq!(out.rejected, vec![NodeId(9)]);
    }

    #[test]
    fn invalid_bids_are_ignored() {
        let mut p = ParentSlots::new(NodeId(0), 3);
        let out = auction_round(&mut p, &bids(&[(0, 9), (2, 3), (4, 3)]), |c| c != NodeId(2));
        assert_eq!(out.ignored, vec![NodeId(0), NodeId(2)]);
        assert_eq!(out.accepted, vec![NodeId(4)]);
        assert_eq!(p.occupied(), 1);
    }

    #[test]
    fn a_child_can_win_several_slots() {
        let mut p = ParentSlots::new(NodeId(0), 3);
        auction_round(&mut p, &bids(&[(1, 2)]), |_| true);
        let out = auction_round(&mut p, &bids(&[(4, 6), (4, 6), (4, 6)]), |_| true);
        assert_eq!(out.accepted, vec![NodeId(4); 3]);
        assert_eq!(out.evicted, vec![NodeId(1)]);
        assert_eq!(p.slots_of(NodeId(4)).count(), 3);
        assert_eq!(p.release(NodeId(4)), 3);
        assert_eq!(p.occupied(), 0);
    }

    #[test]
    fn same_round_displacement_is_a_rejection() {
        let mut p = ParentSlots::new(NodeId(0), 1);
        let out = auction_round(&mut p, &bids(&[(1, 2), (2, 8)]), |_| true);
        assert_eq!(out.accepted, vec![NodeId(2)]);
        assert_eq!(out.rejected, vec![NodeId(1)]);
        assert!(out.evicted.is_empty());
    }
}

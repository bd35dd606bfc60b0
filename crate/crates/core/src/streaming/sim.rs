use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::seq::index;
use rand_chacha::ChaCha8Rng;

use crate::overlay::{NodeId, SimilarView};
use crate::rng::{hash_unit, stream_rng, Stream};

use super::auction::{auction_round, Bid, ParentSlots};
use super::config::{StreamConfig, US_PER_MS};
use super::metrics::{NodeLog, PlaySlot, StreamTrace};
use super::scenario::{generate_scenario_events, settle_time_us, Action, Scenario, SOURCE};
use super::window::{select_block, BlockBuffer, BlockWindow};
use super::{Sampler, StreamError};

/// Structural checks collected during a run.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct InvariantReport {
    pub steps_checked: u64,
    pub violations: Vec<String>,
}

impl InvariantReport {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }

    fn fail(&mut self, msg: String) {
        // Keep the report small when something breaks everywhere.
        if self.violations.len() < 100 {
            self.violations.push(msg);
        }
    }
}

/// Protocol activity counters of a run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunStats {
    pub transfers: u64,
    pub accepted: u64,
    pub rejected: u64,
    pub evicted: u64,
    /// Steps where a child's own slot was free but had nothing to send.
    pub idle_connection_steps: u64,
    /// Slot-steps spent serialising a block.
    pub busy_connection_steps: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Reply {
    Accepted,
    Rejected,
    Evicted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Message {
    Bid {
        child: NodeId,
        parent: NodeId,
        amount: u32,
    },
    Reply {
        parent: NodeId,
        child: NodeId,
        reply: Reply,
    },
    Block {
        parent: NodeId,
        child: NodeId,
        block: u64,
    },
}

impl Message {
    fn sender(self) -> NodeId {
        match self {
            Message::Bid { child, .. } => child,
            Message::Reply { parent, .. } | Message::Block { parent, .. } => parent,
        }
    }

    fn receiver(self) -> NodeId {
        match self {
            Message::Bid { parent, .. } => parent,
            Message::Reply { child, .. } | Message::Block { child, .. } => child,
        }
    }
}

#[derive(Debug, PartialEq, Eq)]
struct Pending {
    at: u64,
    seq: u64,
    msg: Message,
}

impl Ord for Pending {
    fn cmp(&self, other: &Self) -> Ordering {
        (other.at, other.seq).cmp(&(self.at, self.seq))
    }
}

impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct Player {
    started: bool,
    next_block: u64,
    next_slot_us: u64,
}

struct Peer {
    level: u32,
    alive: bool,
    slots: ParentSlots,
    buffer: BlockBuffer,
    in_flight: Vec<u64>,
    /// One entry per download connection won, so a parent may repeat.
    parents: Vec<NodeId>,
    /// One entry per outstanding bid.
    pending: Vec<NodeId>,
    /// Per parent, when it last delivered a block or accepted a bid.
    last_heard: Vec<(NodeId, u64)>,
    /// Parents dropped for not delivering, with the end of their ban.
    shunned: Vec<(NodeId, u64)>,
    candidates: Vec<NodeId>,
    next_candidate: usize,
    rebid: bool,
    view: Option<SimilarView>,
    next_refresh_us: u64,
    first_block: u64,
    player: Player,
    log: NodeLog,
}

struct Sim<'a> {
    cfg: &'a StreamConfig,
    sampler: Sampler,
    seed: u64,
    now: u64,
    peers: Vec<Peer>,
    live: Vec<NodeId>,
    queue: BinaryHeap<Pending>,
    seq: u64,
    /// Block selection.
    rng: ChaCha8Rng,
    /// Peer-sampling batches.
    sample_rng: ChaCha8Rng,
    /// Similar-view tie breaks.
    view_rng: ChaCha8Rng,
    report: InvariantReport,
    stats: RunStats,
}

/// Runs one scenario to completion and returns its trace.
pub fn run_streaming(
    config: &StreamConfig,
    scenario: &Scenario,
    sampler: Sampler,
    seed: u64,
) -> Result<StreamTrace, StreamError> {
    config.validate()?;
    let events = generate_scenario_events(scenario, config.upload_classes, seed)?;
    let duration = scenario.duration_us();
    let step = config.step_us();

    let mut sim = Sim {
        cfg: config,
        sampler,
        seed,
        now: 0,
        peers: Vec::with_capacity(events.len() + 1),
        live: Vec::new(),
        queue: BinaryHeap::new(),
        seq: 0,
        rng: stream_rng(seed, Stream::Streaming, 0),
        sample_rng: stream_rng(seed, Stream::Streaming, 1),
        view_rng: stream_rng(seed, Stream::Streaming, 2),
        report: InvariantReport::default(),
        stats: RunStats::default(),
    };
    sim.add_peer(SOURCE, 0);

    let mut next_event = 0;
    while sim.now <= duration {
        while next_event < events.len() && events[next_event].time_us <= sim.now {
            let e = events[next_event];
            match e.action {
                Action::Join { class } => sim.add_peer(e.node, class),
                Action::Fail => sim.fail(e.node),
            }
            next_event += 1;
        }
        sim.deliver();
        sim.refresh();
        sim.bid();
        sim.transfer();
        sim.play();
        if config.check_invariants {
            sim.check();
        }
        sim.now += step;
    }

    let nodes = sim.peers.drain(1..).map(|p| p.log).collect();
    Ok(StreamTrace {
        sampler,
        duration_us: duration,
        settle_us: settle_time_us(scenario.kind, &events),
        block_period_us: config.block_period_us(),
        nodes,
        invariants: sim.report,
        stats: sim.stats,
    })
}

impl Sim<'_> {
    fn ceil_step(&self, t: u64) -> u64 {
        let step = self.cfg.step_us();
        t.div_ceil(step) * step
    }

    /// One-way latency from `a` to `b`, fixed per ordered pair.
    fn latency_us(&self, a: NodeId, b: NodeId) -> u64 {
        let span = self.cfg.latency_max_ms - self.cfg.latency_min_ms + 1;
        let u = hash_unit(self.seed, Stream::Latency, a.0 as u64, b.0 as u64);
        let ms = self.cfg.latency_min_ms + ((u * span as f64) as u64).min(span - 1);
        ms * US_PER_MS
    }

    fn send(&mut self, msg: Message) {
        let at = self.ceil_step(self.now + self.latency_us(msg.sender(), msg.receiver()));
        self.push(at, msg);
    }

    fn push(&mut self, at: u64, msg: Message) {
        self.seq += 1;
        self.queue.push(Pending {
            at,
            seq: self.seq,
            msg,
        });
    }

    fn alive(&self, id: NodeId) -> bool {
        self.peers.get(id.index()).is_some_and(|p| p.alive)
    }

    /// Latest block produced by the source.
    fn live_edge(&self) -> u64 {
        self.now / self.cfg.block_period_us()
    }

    fn holds(&self, id: NodeId, block: u64) -> bool {
        if id == SOURCE {
            block <= self.live_edge()
        } else {
            self.peers[id.index()].buffer.contains(block)
        }
    }

    fn add_peer(&mut self, id: NodeId, class: u32) {
        debug_assert_eq!(id.index(), self.peers.len());
        let (level, capacity) = if id == SOURCE {
            (self.cfg.source_level(), self.cfg.source_slots)
        } else {
            (class, 2 * class as usize)
        };
        let view = (self.sampler == Sampler::Gradient && id != SOURCE)
            .then(|| SimilarView::empty(id, self.cfg.similar_view_size));
        let first_block = self.live_edge();
        self.peers.push(Peer {
            level,
            alive: true,
            slots: ParentSlots::new(id, capacity),
            buffer: BlockBuffer::new(),
            in_flight: Vec::new(),
            parents: Vec::new(),
            pending: Vec::new(),
            last_heard: Vec::new(),
            shunned: Vec::new(),
            candidates: Vec::new(),
            next_candidate: 0,
            rebid: false,
            view,
            next_refresh_us: self.now,
            first_block,
            player: Player {
                started: false,
                next_block: first_block,
                next_slot_us: 0,
            },
            log: NodeLog {
                id,
                class,
                join_us: self.now,
                fail_us: None,
                start_us: None,
                slots: Vec::new(),
            },
        });
        self.live.push(id);
    }

    fn fail(&mut self, id: NodeId) {
        let now = self.now;
        let peer = &mut self.peers[id.index()];
        if !peer.alive {
            return;
        }
        peer.alive = false;
        peer.log.fail_us = Some(now);
        peer.parents.clear();
        peer.pending.clear();
        peer.slots = ParentSlots::new(id, 0);
        for p in self.peers.iter_mut().filter(|p| p.alive) {
            p.slots.release(id);
            let before = p.parents.len() + p.pending.len();
            p.parents.retain(|&q| q != id);
            p.pending.retain(|&q| q != id);
            p.last_heard.retain(|e| e.0 != id);
            if p.parents.len() + p.pending.len() < before {
                p.rebid = true;
            }
        }
        let pos = self.live.iter().position(|&x| x == id).expect("live node");
        self.live.swap_remove(pos);
    }

    fn deliver(&mut self) {
        let mut bids: Vec<(NodeId, Bid)> = Vec::new();
        while self.queue.peek().is_some_and(|p| p.at <= self.now) {
            let msg = self.queue.pop().expect("peeked").msg;
            let receiver_alive = self.alive(msg.receiver());
            let sender_alive = self.alive(msg.sender());
            match msg {
                Message::Block {
                    parent,
                    child,
                    block,
                } => {
                    if !receiver_alive {
                        continue;
                    }
                    let now = self.now;
                    let c = &mut self.peers[child.index()];
                    c.in_flight.retain(|&b| b != block);
                    if sender_alive || parent == SOURCE {
                        c.buffer.insert(block);
                        heard(&mut c.last_heard, parent, now);
                    }
                }
                Message::Bid {
                    child,
                    parent,
                    amount,
                } => {
                    // A bid from a node that died in flight is filtered by
                    // the auction's liveness check.
                    if receiver_alive {
                        bids.push((parent, Bid { child, amount }));
                    }
                }
                Message::Reply {
                    parent,
                    child,
                    reply,
                } => {
                    if !(receiver_alive && sender_alive) {
                        continue;
                    }
                    let now = self.now;
                    let c = &mut self.peers[child.index()];
                    match reply {
                        Reply::Accepted => {
                            remove_one(&mut c.pending, parent);
                            c.parents.push(parent);
                            heard(&mut c.last_heard, parent, now);
                        }
                        Reply::Rejected => {
                            remove_one(&mut c.pending, parent);
                            c.rebid = true;
                        }
                        Reply::Evicted => {
                            remove_one(&mut c.parents, parent);
                            c.rebid = true;
                        }
                    }
                }
            }
        }

        bids.sort_by_key(|&(parent, _)| parent);
        let mut start = 0;
        while start < bids.len() {
            let parent = bids[start].0;
            let end = start + bids[start..].iter().take_while(|b| b.0 == parent).count();
            let round: Vec<Bid> = bids[start..end].iter().map(|b| b.1).collect();
            start = end;
            let peers = &mut self.peers;
            let mut slots = std::mem::replace(
                &mut peers[parent.index()].slots,
                ParentSlots::new(parent, 0),
            );
            let outcome = auction_round(&mut slots, &round, |c| peers[c.index()].alive);
            peers[parent.index()].slots = slots;
            self.stats.accepted += outcome.accepted.len() as u64;
            self.stats.rejected += outcome.rejected.len() as u64;
            self.stats.evicted += outcome.evicted.len() as u64;
            for (list, reply) in [
                (outcome.accepted, Reply::Accepted),
                (outcome.rejected, Reply::Rejected),
                (outcome.evicted, Reply::Evicted),
            ] {
                for child in list {
                    self.send(Message::Reply {
                        parent,
                        child,
                        reply,
                    });
                }
            }
        }
    }

    fn refresh(&mut self) {
        let refresh = self.cfg.refresh_ms * US_PER_MS;
        for k in 1..self.peers.len() {
            let id = NodeId(k as u32);
            if !self.peers[k].alive || self.peers[k].next_refresh_us > self.now {
                continue;
            }
            self.peers[k].next_refresh_us += refresh;
            self.drop_silent_parents(id);

            let others: Vec<NodeId> = self.live.iter().copied().filter(|&x| x != id).collect();
            let take = self.cfg.sample_size.min(others.len());
            let mut batch: Vec<NodeId> = index::sample(&mut self.sample_rng, others.len(), take)
                .into_iter()
                .map(|i| others[i])
                .collect();
            batch.sort_unstable();

            let peers = &mut self.peers;
            let mut candidates = batch.clone();
            if let Some(mut view) = peers[k].view.take() {
                view.retain(|m| peers[m.index()].alive);
                for &j in &batch {
                    view.offer(j, |x| peers[x.index()].level, &mut self.view_rng);
                }
                candidates.extend_from_slice(view.members());
                peers[k].view = Some(view);
            }
            candidates.sort_unstable_by(|&a, &b| {
                peers[b.index()]
                    .level
                    .cmp(&peers[a.index()].level)
                    .then(a.cmp(&b))
            });
            candidates.dedup();
            let now = self.now;
            let p = &mut peers[k];
            p.shunned.retain(|&(_, until)| until > now);
            candidates.retain(|c| !p.shunned.iter().any(|&(x, _)| x == *c));
            p.candidates = candidates;
            p.next_candidate = 0;
            p.rebid = true;
        }
    }

    /// Drops every connection to a parent that has sent nothing for
    /// `silent_parent_ms`, and avoids it for `shun_ms`.
    fn drop_silent_parents(&mut self, id: NodeId) {
        let now = self.now;
        let silent = self.cfg.silent_parent_ms * US_PER_MS;
        let ban = self.cfg.shun_ms * US_PER_MS;
        let p = &mut self.peers[id.index()];
        let mut dropped = Vec::new();
        for &q in &p.parents {
            let last = p.last_heard.iter().find(|e| e.0 == q).map_or(0, |e| e.1);
            if last + silent <= now && !dropped.contains(&q) {
                dropped.push(q);
            }
        }
        if dropped.is_empty() {
            return;
        }
        p.parents.retain(|q| !dropped.contains(q));
        p.last_heard.retain(|e| !dropped.contains(&e.0));
        p.shunned.extend(dropped.iter().map(|&q| (q, now + ban)));
        p.rebid = true;
        for q in dropped {
            self.peers[q.index()].slots.release(id);
        }
    }

    fn bid(&mut self) {
        let limit = self.cfg.download_connections;
        for k in 1..self.peers.len() {
            if !(self.peers[k].alive && self.peers[k].rebid) {
                continue;
            }
            let id = NodeId(k as u32);
            self.peers[k].rebid = false;
            let amount = self.peers[k].slots.capacity() as u32;
            // All free connections are bid at the best remaining candidate.
            loop {
                let p = &mut self.peers[k];
                let free = limit.saturating_sub(p.parents.len() + p.pending.len());
                if free == 0 {
                    break;
                }
                let Some(&q) = p.candidates.get(p.next_candidate) else {
                    break;
                };
                p.next_candidate += 1;
                if q == id || p.pending.contains(&q) || !self.alive(q) {
                    continue;
                }
                for _ in 0..free {
                    self.peers[k].pending.push(q);
                    self.send(Message::Bid {
                        child: id,
                        parent: q,
                        amount,
                    });
                }
            }
        }
    }

    /// The block `child` would request from `parent` now, if any.
    fn pick(&mut self, child: NodeId, parent: NodeId) -> Option<u64> {
        let c = &self.peers[child.index()];
        let base = c.player.next_block.max(c.first_block);
        let start = c.buffer.first_missing_from(base);
        let wanted: Vec<bool> = (start..start + self.cfg.window_blocks as u64)
            .map(|b| !c.buffer.contains(b) && !c.in_flight.contains(&b) && self.holds(parent, b))
            .collect();
        let window = BlockWindow { start, wanted };
        select_block(&window, self.cfg.in_order_probability, &mut self.rng)
    }

    fn start_transfer(&mut self, parent: NodeId, slot: usize, child: NodeId, block: u64) {
        if !self.holds(parent, block) {
            self.report
                .fail(format!("{parent} served block {block} it does not hold"));
        }
        let transfer = self.cfg.transfer_us();
        self.stats.transfers += 1;
        self.peers[parent.index()].slots.slot_mut(slot).busy_until = self.now + transfer;
        self.peers[child.index()].in_flight.push(block);
        let at = self.ceil_step(self.now + transfer + self.latency_us(parent, child));
        self.push(
            at,
            Message::Block {
                parent,
                child,
                block,
            },
        );
    }

    /// Starts block transfers on idle upload slots.
    ///
    /// Every child first uses the slots it won. Slots that are unallocated,
    /// or whose child has nothing to fetch, are then lent out one at a time
    /// to the parent's other children in bid order.
    fn transfer(&mut self) {
        let order = (1..self.peers.len()).chain(std::iter::once(0));
        for q in order {
            if !self.peers[q].alive {
                continue;
            }
            let parent = NodeId(q as u32);
            // (bid, child, slots the child knows it holds)
            let mut children: Vec<(u32, NodeId, Vec<usize>)> = Vec::new();
            for (k, slot) in self.peers[q].slots.slots().iter().enumerate() {
                let Some((c, bid)) = slot.occupant else {
                    continue;
                };
                match children.iter_mut().find(|e| e.1 == c) {
                    Some(e) => e.2.push(k),
                    None => children.push((bid, c, vec![k])),
                }
            }
            for e in &mut children {
                let known = self.peers[e.1.index()]
                    .parents
                    .iter()
                    .filter(|&&x| x == parent)
                    .count();
                e.2.truncate(known);
            }
            children.retain(|e| !e.2.is_empty());
            if children.is_empty() {
                continue;
            }
            children.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));

            let mut eager = Vec::with_capacity(children.len());
            for (_, child, own) in &children {
                let mut starved = false;
                for &k in own {
                    if self.peers[q].slots.slots()[k].busy_until > self.now {
                        continue;
                    }
                    match self.pick(*child, parent) {
                        Some(block) => self.start_transfer(parent, k, *child, block),
                        None => {
                            self.stats.idle_connection_steps += 1;
                            starved = true;
                            break;
                        }
                    }
                }
                if !starved {
                    eager.push(*child);
                }
            }

            let mut idle: Vec<usize> = (0..self.peers[q].slots.capacity())
                .rev()
                .filter(|&k| self.peers[q].slots.slots()[k].busy_until <= self.now)
                .collect();
            while !idle.is_empty() && !eager.is_empty() {
                let mut again = Vec::with_capacity(eager.len());
                for &child in &eager {
                    let Some(&k) = idle.last() else { break };
                    if let Some(block) = self.pick(child, parent) {
                        idle.pop();
                        self.start_transfer(parent, k, child, block);
                        again.push(child);
                    }
                }
                eager = again;
            }
            self.stats.busy_connection_steps += self.peers[q]
                .slots
                .slots()
                .iter()
                .filter(|s| s.busy_until > self.now)
                .count() as u64;
        }
    }

    fn play(&mut self) {
        let period = self.cfg.block_period_us();
        let buffer = self.cfg.buffer_blocks();
        let now = self.now;
        // A node still buffering moves its start up to the earliest block
        // every one of its parents can serve.
        for k in 1..self.peers.len() {
            let p = &self.peers[k];
            if !p.alive || p.player.started {
                continue;
            }
            let floor = p
                .parents
                .iter()
                .map(|&q| {
                    if q == SOURCE {
                        0
                    } else {
                        self.peers[q.index()].first_block
                    }
                })
                .min();
            if let Some(f) = floor.filter(|&f| f > p.first_block) {
                let p = &mut self.peers[k];
                p.first_block = f;
                p.player.next_block = f;
            }
        }
        for p in self.peers.iter_mut().skip(1).filter(|p| p.alive) {
            if !p.player.started {
                if p.buffer.holds_run(p.first_block, buffer) {
                    p.player.started = true;
                    p.player.next_slot_us = now;
                    p.log.start_us = Some(now);
                } else {
                    continue;
                }
            }
            while p.player.next_slot_us <= now {
                let block = p.player.next_block;
                let on_time = p.buffer.contains(block);
                p.log.slots.push(PlaySlot {
                    time_us: p.player.next_slot_us,
                    block,
                    on_time,
                });
                if on_time {
                    p.player.next_block += 1;
                }
                p.player.next_slot_us += period;
            }
        }
    }

    fn check(&mut self) {
        self.report.steps_checked += 1;
        let limit = self.cfg.download_connections;
        let mut problems = Vec::new();
        for (k, p) in self.peers.iter().enumerate().filter(|(_, p)| p.alive) {
            let id = NodeId(k as u32);
            let occupied = p.slots.occupied();
            let busy = p
                .slots
                .slots()
                .iter()
                .filter(|s| s.busy_until > self.now)
                .count();
            if occupied > p.slots.capacity() || busy > p.slots.capacity() {
                problems.push(format!(
                    "{id} uses more than {} upload slots",
                    p.slots.capacity()
                ));
            }
            let children: Vec<NodeId> = p.slots.children().collect();
            if children.contains(&id) {
                problems.push(format!("{id} is its own child"));
            }
            if children.iter().any(|&c| !self.peers[c.index()].alive) {
                problems.push(format!("{id} keeps a dead child"));
            }
            if k == 0 {
                if !p.parents.is_empty() || !p.buffer.is_empty() {
                    problems.push("the source downloads".into());
                }
                continue;
            }
            if p.parents.len() > limit || p.parents.len() + p.pending.len() > limit {
                problems.push(format!("{id} exceeds {limit} download connections"));
            }
            if p.parents.contains(&id) || p.pending.contains(&id) {
                problems.push(format!("{id} is its own parent"));
            }
            if let Some(view) = &p.view {
                if view.validate().is_err() {
                    problems.push(format!("{id} has an invalid similar view"));
                }
            }
        }
        for msg in problems {
            self.report.fail(format!("t={}us: {msg}", self.now));
        }
    }
}

fn remove_one(list: &mut Vec<NodeId>, x: NodeId) {
    if let Some(pos) = list.iter().position(|&y| y == x) {
        list.swap_remove(pos);
    }
}

fn heard(list: &mut Vec<(NodeId, u64)>, parent: NodeId, now: u64) {
    match list.iter_mut().find(|e| e.0 == parent) {
        Some(e) => e.1 = now,
        None => list.push((parent, now)),
    }
}

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution as _, Exp};

use crate::overlay::NodeId;
use crate::rng::{stream_rng, Stream};

use super::config::{US_PER_MS, US_PER_S};
use super::StreamError;

/// The id of the media source in every scenario.
pub const SOURCE: NodeId = NodeId(0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScenarioKind {
    /// Initial joins, then joins and failures side by side until the end.
    Churn,
    /// Initial joins, then a second, denser wave of joins.
    FlashCrowd,
    /// Initial joins, then a burst of failures.
    CatastrophicFailure,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 3] = [
        ScenarioKind::Churn,
        ScenarioKind::FlashCrowd,
        ScenarioKind::CatastrophicFailure,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioKind::Churn => "churn",
            ScenarioKind::FlashCrowd => "flash_crowd",
            ScenarioKind::CatastrophicFailure => "catastrophic_failure",
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioKind {
    type Err = StreamError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ScenarioKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| StreamError::Config(format!("unknown scenario {s:?}")))
    }
}

/// Arrival and failure processes of one run. Inter-arrival times are
/// exponential with the given means.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub kind: ScenarioKind,
    pub initial_joins: usize,
    pub initial_mean_ms: f64,
    /// Joins (flash crowd) or failures (catastrophic failure) in the second
    /// phase. Churn ignores it and keeps both processes running.
    pub second_count: usize,
    pub second_mean_ms: f64,
    pub duration_s: f64,
}

impl Scenario {
    /// Full-size populations.
    pub fn full(kind: ScenarioKind) -> Self {
        match kind {
            ScenarioKind::Churn => Self {
                kind,
                initial_joins: 500,
                initial_mean_ms: 100.0,
                second_count: 0,
                second_mean_ms: 1000.0,
                duration_s: 200.0,
            },
            ScenarioKind::FlashCrowd => Self {
                kind,
                initial_joins: 100,
                initial_mean_ms: 100.0,
                second_count: 1000,
                second_mean_ms: 10.0,
                duration_s: 100.0,
            },
            ScenarioKind::CatastrophicFailure => Self {
                kind,
                initial_joins: 1000,
                initial_mean_ms: 100.0,
                second_count: 500,
                second_mean_ms: 10.0,
                duration_s: 180.0,
            },
        }
    }

    /// Desk-scale populations: churn starts from 200 nodes, the other two
    /// scenarios are shrunk by a factor of 2.5.
    pub fn reduced(kind: ScenarioKind) -> Self {
        match kind {
            ScenarioKind::Churn => Self {
                initial_joins: 200,
                duration_s: 80.0,
                ..Self::full(kind)
            },
            ScenarioKind::FlashCrowd => Self {
                initial_joins: 40,
                second_count: 400,
                duration_s: 60.0,
                ..Self::full(kind)
            },
            ScenarioKind::CatastrophicFailure => Self {
                initial_joins: 400,
                second_count: 200,
                duration_s: 90.0,
                ..Self::full(kind)
            },
        }
    }

    pub fn validate(&self) -> Result<(), StreamError> {
        let positive = |x: f64| x.is_finite() && x > 0.0;
        if !positive(self.initial_mean_ms) || !positive(self.second_mean_ms) {
            return Err(StreamError::Config(
                "inter-arrival means must be positive".into(),
            ));
        }
        if !positive(self.duration_s) {
            return Err(StreamError::Config("duration must be positive".into()));
        }
        Ok(())
    }

    pub fn duration_us(&self) -> u64 {
        (self.duration_s * US_PER_S as f64).round() as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    /// A new node with upload class `class` (`2 * class` slots).
    Join {
        class: u32,
    },
    Fail,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Initial,
    Second,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScenarioEvent {
    pub time_us: u64,
    pub node: NodeId,
    pub action: Action,
    pub phase: Phase,
}

fn arrivals<R: Rng>(
    rng: &mut R,
    mean_ms: f64,
    start_us: u64,
    count: usize,
    until_us: u64,
) -> Vec<u64> {
    let exp = Exp::new(1.0 / mean_ms).expect("mean is positive");
    let mut t = start_us as f64;
    let mut out = Vec::new();
    while out.len() < count {
        t += exp.sample(rng) * US_PER_MS as f64;
        let at = t.round() as u64;
        if at > until_us {
            break;
        }
        out.push(at);
    }
    out
}

/// Time-ordered joins and failures. Joiners get ids `1, 2, ...` in arrival
/// order and a uniform upload class in `1..=upload_classes`; failures pick
/// uniformly among nodes live at that moment, never the source.
pub fn generate_scenario_events(
    scenario: &Scenario,
    upload_classes: u32,
    seed: u64,
) -> Result<Vec<ScenarioEvent>, StreamError> {
    scenario.validate()?;
    let mut rng = stream_rng(seed, Stream::Scenario, 0);
    let until = scenario.duration_us();
    let initial = arrivals(
        &mut rng,
        scenario.initial_mean_ms,
        0,
        scenario.initial_joins,
        until,
    );
    let phase2_start = initial.last().copied().unwrap_or(0);
    let (joins2, fails2) = match scenario.kind {
        ScenarioKind::Churn => (
            arrivals(
                &mut rng,
                scenario.second_mean_ms,
                phase2_start,
                usize::MAX,
                until,
            ),
            arrivals(
                &mut rng,
                scenario.second_mean_ms,
                phase2_start,
                usize::MAX,
                until,
            ),
        ),
        ScenarioKind::FlashCrowd => (
            arrivals(
                &mut rng,
                scenario.second_mean_ms,
                phase2_start,
                scenario.second_count,
                until,
            ),
            Vec::new(),
        ),
        ScenarioKind::CatastrophicFailure => (
            Vec::new(),
            arrivals(
                &mut rng,
                scenario.second_mean_ms,
                phase2_start,
                scenario.second_count,
                until,
            ),
        ),
    };

    let mut timeline: Vec<(u64, bool, Phase)> = initial
        .into_iter()
        .map(|t| (t, true, Phase::Initial))
        .chain(joins2.into_iter().map(|t| (t, true, Phase::Second)))
        .chain(fails2.into_iter().map(|t| (t, false, Phase::Second)))
        .collect();
    // Joins before failures at equal times; the sort is stable otherwise.
    timeline.sort_by_key(|&(t, join, _)| (t, !join));

    let mut live: Vec<NodeId> = Vec::new();
    let mut next_id = 1u32;
    let mut events = Vec::with_capacity(timeline.len());
    for (time_us, join, phase) in timeline {
        if join {
            let node = NodeId(next_id);
            next_id += 1;
            live.push(node);
            let class = rng.random_range(1..=upload_classes);
            events.push(ScenarioEvent {
                time_us,
                node,
                action: Action::Join { class },
                phase,
            });
        } else if !live.is_empty() {
            let node = live.swap_remove(rng.random_range(0..live.len()));
            events.push(ScenarioEvent {
                time_us,
                node,
                action: Action::Fail,
                phase,
            });
        }
    }
    Ok(events)
}

/// Start of the recovery period: the end of the initial joins for churn,
/// the last second-phase event otherwise.
pub fn settle_time_us(kind: ScenarioKind, events: &[ScenarioEvent]) -> u64 {
    let last = |phase: Phase| {
        events
            .iter()
            .filter(|e| e.phase == phase)
            .map(|e| e.time_us)
            .max()
    };
    let initial = last(Phase::Initial).unwrap_or(0);
    match kind {
        ScenarioKind::Churn => initial,
        _ => last(Phase::Second).unwrap_or(initial),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean_gap_ms(times: &[u64]) -> f64 {
        let gaps: Vec<f64> = std::iter::once(0)
            .chain(times.iter().copied())
            .collect::<Vec<_>>()
            .windows(2)
            .map(|w| (w[1] - w[0]) as f64 / 1000.0)
            .collect();
        gaps.iter().sum::<f64>() / gaps.len() as f64
    }

    #[test]
    fn churn_initial_phase() {
        let s = Scenario::full(ScenarioKind::Churn);
        let events = generate_scenario_events(&s, 10, 4).unwrap();
        let joins: Vec<u64> = events
            .iter()
            .filter(|e| e.phase == Phase::Initial)
            .map(|e| e.time_us)
            .collect();
        assert_eq!(joins.len(), 500);
        let mean = mean_gap_ms(&joins);
        assert!((mean - 100.0).abs() < 10.0, "mean inter-arrival {mean} ms");
        let second: Vec<_> = events.iter().filter(|e| e.phase == Phase::Second).collect();
        assert!(second.iter().any(|e| e.action == Action::Fail));
        assert!(second
            .iter()
            .any(|e| matches!(e.action, Action::Join { .. })));
    }

    #[test]
    fn catastrophic_failures_spare_the_source() {
        let s = Scenario::full(ScenarioKind::CatastrophicFailure);
        let events = generate_scenario_events(&s, 10, 8).unwrap();
        let fails: Vec<_> = events.iter().filter(|e| e.action == Action::Fail).collect();
        assert_eq!(fails.len(), 500);
        assert!(fails.iter().all(|e| e.node != SOURCE));
        let mut seen = std::collections::HashSet::new();
        assert!(fails.iter().all(|e| seen.insert(e.node)));
    }

    #[test]
    fn failures_target_live_nodes() {
        let s = Scenario::reduced(ScenarioKind::Churn);
        let events = generate_scenario_events(&s, 10, 2).unwrap();
        let mut live = std::collections::HashSet::new();
        for e in &events {
            match e.action {
                Action::Join { class } => {
                    assert!((1..=10).contains(&class));
                    assert!(live.insert(e.node));
                }
                Action::Fail => assert!(live.remove(&e.node)),
            }
        }
        assert!(events.windows(2).all(|w| w[0].time_us <= w[1].time_us));
    }

    #[test]
    fn deterministic_per_seed() {
        let s = Scenario::reduced(ScenarioKind::FlashCrowd);
        assert_eq!(
            generate_scenario_events(&s, 10, 1).unwrap(),
            generate_scenario_events(&s, 10, 1).unwrap()
        );
        assert_ne!(
            generate_scenario_events(&s, 10, 1).unwrap(),
            generate_scenario_events(&s, 10, 2).unwrap()
        );
    }

    #[test]
    fn settle_points() {
        let s = Scenario::reduced(ScenarioKind::FlashCrowd);
        let events = generate_scenario_events(&s, 10, 3).unwrap();
        assert_eq!(events.len(), 440);
        assert_eq!(
            settle_time_us(s.kind, &events),
            events.last().unwrap().time_us
        );
    }
}

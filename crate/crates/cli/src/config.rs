//! Experiment configuration: a TOML file with flat dotted keys, strict
//! about unknown keys, plus `--set key=value` overrides.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use gradient_core::markov::Distribution;
use gradient_core::streaming::{Sampler, Scenario, ScenarioKind, StreamConfig};
use gradient_core::{SamplingSchedule, UtilityConfig};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Converge,
    Analyze,
    Stream,
    Compare,
}

impl Kind {
    pub fn as_str(self) -> &'static str {
        match self {
            Kind::Converge => "converge",
            Kind::Analyze => "analyze",
            Kind::Stream => "stream",
            Kind::Compare => "compare",
        }
    }

    /// The config section holding this kind's parameters.
    fn section(self) -> &'static str {
        match self {
            Kind::Converge => "converge",
            Kind::Analyze => "analyze",
            Kind::Stream | Kind::Compare => "stream",
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config file {}: {source}", path.display())]
    Unreadable {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config is not valid TOML: {0}")]
    Syntax(String),
    #[error("unknown config key(s): {}", .0.join(", "))]
    UnknownKeys(Vec<String>),
    #[error("invalid config:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),
}

/// Top-level config. Parameters live in the section of the experiment
/// kind (`converge`, `analyze`, or `stream` for both stream and compare).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<Kind>,
    pub seed: u64,
    /// Number of runs; run 0 uses `seed`, later runs derived seeds.
    pub repeat: usize,
    /// Output directory, overridden by `--out`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
    /// Version of the tool that wrote a manifest.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub code_version: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub converge: Option<ConvergeParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub analyze: Option<AnalyzeParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stream: Option<StreamParams>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ConvergeParams {
    /// Number of utility levels, each of `class_size` nodes.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub levels: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub class_size: Option<usize>,
    /// Explicit `m_1, ..., m_n`; excludes `levels` and `class_size`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub class_sizes: Option<Vec<usize>>,
    /// `constant:P`, `decay:BASE,SCALE,EXPONENT`, `inverse_square:N` or
    /// `table:hold|cycle:P0,...`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub schedule: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalyzeParams {
    /// Chain size `m`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub states: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub schedule: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<u64>,
    /// Distribution rows are written every `every` ticks and at the horizon.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub every: Option<u64>,
    /// Start with all mass on this state (default `m`).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_state: Option<usize>,
    /// Start distribution as weights of the states `X = 1, ..., m`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_weights: Option<Vec<f64>>,
}

/// Scenario and protocol parameters. Unset keys take the values of the
/// chosen scenario and scale, or the protocol defaults.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct StreamParams {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scenario: Option<String>,
    /// `reduced` or `full`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scale: Option<String>,
    /// `random` or `gradient`; stream only, compare runs both.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sampler: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_joins: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_mean_ms: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub second_count: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub second_mean_ms: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub duration_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stream_rate_kbps: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub block_size_kb: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub buffer_seconds: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub similar_view_size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub download_connections: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub connection_kbps: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window_blocks: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub in_order_probability: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub upload_classes: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source_slots: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sample_size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub refresh_ms: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub silent_parent_ms: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shun_ms: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step_ms: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub latency_min_ms: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub latency_max_ms: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub continuity_window_s: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub continuity_threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_fraction: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_hold_ms: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sample_interval_ms: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub check_invariants: Option<bool>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            kind: None,
            seed: 1,
            repeat: 1,
            out: None,
            code_version: None,
            converge: None,
            analyze: None,
            stream: None,
        }
    }
}

/// An experiment with every parameter resolved and validated.
#[derive(Debug, Clone, PartialEq)]
pub enum Plan {
    Converge {
        utility: UtilityConfig,
        schedule: SamplingSchedule,
        horizon: u64,
    },
    Analyze {
        pi0: Distribution,
        schedule: SamplingSchedule,
        horizon: u64,
        every: u64,
    },
    Stream {
        config: StreamConfig,
        scenario: Scenario,
        scale: &'static str,
        samplers: Vec<Sampler>,
    },
}

const DEFAULT_SCHEDULE: &str = "constant:0.005";
const DEFAULT_OUT: &str = "results";

impl ExperimentConfig {
    pub fn kind(&self) -> Kind {
        self.kind.unwrap_or(Kind::Converge)
    }

    pub fn out_dir(&self) -> PathBuf {
        PathBuf::from(self.out.as_deref().unwrap_or(DEFAULT_OUT))
    }

    /// Resolves defaults and checks every value, collecting all problems.
    pub fn plan(&self) -> Result<Plan, ConfigError> {
        let kind = self.kind();
        let mut errors = Vec::new();
        if self.repeat == 0 {
            errors.push("repeat: must be at least 1".to_string());
        }
        for (name, present) in [
            ("converge", self.converge.is_some()),
            ("analyze", self.analyze.is_some()),
            ("stream", self.stream.is_some()),
        ] {
            if present && name != kind.section() {
                errors.push(format!("[{name}]: section is not used by {kind}"));
            }
        }
        let plan = match kind {
            Kind::Converge => {
                plan_converge(&self.converge.clone().unwrap_or_default(), &mut errors)
            }
            Kind::Analyze => plan_analyze(&self.analyze.clone().unwrap_or_default(), &mut errors),
            Kind::Stream | Kind::Compare => {
                plan_stream(kind, &self.stream.clone().unwrap_or_default(), &mut errors)
            }
        };
        match plan {
            Some(plan) if errors.is_empty() => Ok(plan),
            _ => Err(ConfigError::Invalid(errors)),
        }
    }

    /// The config with every defaulted value written out, as stored in a
    /// manifest.
    pub fn normalized(&self) -> Result<ExperimentConfig, ConfigError> {
        let plan = self.plan()?;
        let mut out = ExperimentConfig {
            kind: Some(self.kind()),
            seed: self.seed,
            repeat: self.repeat,
            out: self.out.clone(),
            code_version: Some(crate::CODE_VERSION.to_string()),
            converge: None,
            analyze: None,
            stream: None,
        };
        match plan {
            Plan::Converge {
                utility,
                schedule,
                horizon,
            } => {
                let given = self.converge.clone().unwrap_or_default();
                let sizes = utility.class_sizes();
                let uniform = given.class_sizes.is_none();
                out.converge = Some(ConvergeParams {
                    levels: uniform.then_some(sizes.len()),
                    class_size: uniform.then_some(sizes[0]),
                    class_sizes: (!uniform).then(|| sizes.to_vec()),
                    schedule: Some(schedule.to_string()),
                    horizon: Some(horizon),
                });
            }
            Plan::Analyze {
                pi0,
                schedule,
                horizon,
                every,
            } => {
                let given = self.analyze.clone().unwrap_or_default();
                let m = pi0.states();
                out.analyze = Some(AnalyzeParams {
                    states: Some(m),
                    schedule: Some(schedule.to_string()),
                    horizon: Some(horizon),
                    every: Some(every),
                    initial_state: match given.initial_weights {
                        Some(_) => None,
                        None => Some(given.initial_state.unwrap_or(m)),
                    },
                    initial_weights: given.initial_weights,
                });
            }
            Plan::Stream {
                config: c,
                scenario: s,
                scale,
                samplers,
            } => {
                out.stream = Some(StreamParams {
                    scenario: Some(s.kind.as_str().into()),
                    scale: Some(scale.into()),
                    sampler: (self.kind() == Kind::Stream).then(|| samplers[0].as_str().into()),
                    initial_joins: Some(s.initial_joins),
                    initial_mean_ms: Some(s.initial_mean_ms),
                    second_count: Some(s.second_count),
                    second_mean_ms: Some(s.second_mean_ms),
                    duration_s: Some(s.duration_s),
                    stream_rate_kbps: Some(c.stream_rate_kbps),
                    block_size_kb: Some(c.block_size_kb),
                    buffer_seconds: Some(c.buffer_seconds),
                    similar_view_size: Some(c.similar_view_size),
                    download_connections: Some(c.download_connections),
                    connection_kbps: Some(c.connection_kbps),
                    window_blocks: Some(c.window_blocks),
                    in_order_probability: Some(c.in_order_probability),
                    upload_classes: Some(c.upload_classes),
                    source_slots: Some(c.source_slots),
                    sample_size: Some(c.sample_size),
                    refresh_ms: Some(c.refresh_ms),
                    silent_parent_ms: Some(c.silent_parent_ms),
                    shun_ms: Some(c.shun_ms),
                    step_ms: Some(c.step_ms),
                    latency_min_ms: Some(c.latency_min_ms),
                    latency_max_ms: Some(c.latency_max_ms),
                    continuity_window_s: Some(c.continuity_window_s),
                    continuity_threshold: Some(c.continuity_threshold),
                    target_fraction: Some(c.target_fraction),
                    target_hold_ms: Some(c.target_hold_ms),
                    sample_interval_ms: Some(c.sample_interval_ms),
                    check_invariants: Some(c.check_invariants),
                });
            }
        }
        Ok(out)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }
}

fn parse_schedule(
    key: &str,
    text: Option<&str>,
    errors: &mut Vec<String>,
) -> Option<SamplingSchedule> {
    match SamplingSchedule::from_str(text.unwrap_or(DEFAULT_SCHEDULE)) {
        Ok(s) => Some(s),
        Err(e) => {
            errors.push(format!("{key}: {e}"));
            None
        }
    }
}

fn plan_converge(p: &ConvergeParams, errors: &mut Vec<String>) -> Option<Plan> {
    let sizes = match (&p.class_sizes, p.levels, p.class_size) {
        (Some(_), Some(_), _) | (Some(_), _, Some(_)) => {
            errors
                .push("converge.class_sizes: cannot be combined with levels or class_size".into());
            None
        }
        (Some(sizes), None, None) => Some(sizes.clone()),
        (None, levels, size) => Some(vec![size.unwrap_or(10); levels.unwrap_or(10)]),
    };
    let utility = sizes.and_then(|s| match UtilityConfig::new(s) {
        Ok(u) => Some(u),
        Err(e) => {
            errors.push(format!("converge.class_sizes: {e}"));
            None
        }
    });
    let horizon = p.horizon.unwrap_or(20_000);
    if horizon == 0 {
        errors.push("converge.horizon: must be at least 1".into());
    }
    let schedule = parse_schedule("converge.schedule", p.schedule.as_deref(), errors);
    if let (Some(u), Some(s)) = (&utility, &schedule) {
        if let Err(e) = s.validate_for(u.node_count(), horizon) {
            errors.push(format!("converge.schedule: {e}"));
        }
    }
    Some(Plan::Converge {
        utility: utility?,
        schedule: schedule?,
        horizon,
    })
}

fn plan_analyze(p: &AnalyzeParams, errors: &mut Vec<String>) -> Option<Plan> {
    let m = p.states.unwrap_or(10);
    if m < 2 {
        errors.push(format!("analyze.states: need at least 2 states, got {m}"));
    }
    let horizon = p.horizon.unwrap_or(2_000);
    let every = p.every.unwrap_or(10);
    if every == 0 {
        errors.push("analyze.every: must be at least 1".into());
    }
    let schedule = parse_schedule("analyze.schedule", p.schedule.as_deref(), errors);
    if let Some(s) = &schedule {
        // (m - 1) p_t < 1 is the `N p_t < 1` range check with N = m - 1.
        if m >= 2 {
            if let Err(e) = s.validate_for(m - 1, horizon) {
                errors.push(format!(
                    "analyze.schedule: {e} (the chain needs (m - 1) p_t < 1)"
                ));
            }
        }
    }
    let pi0 = match (&p.initial_weights, p.initial_state) {
        (Some(_), Some(_)) => {
            errors.push("analyze.initial_weights: cannot be combined with initial_state".into());
            None
        }
        (Some(w), None) if w.len() != m => {
            errors.push(format!(
                "analyze.initial_weights: {} weights for {m} states",
                w.len()
            ));
            None
        }
        (Some(w), None) => {
            // Weights are listed by state X = 1..m; positions run X = m..1.
            let by_position: Vec<f64> = w.iter().rev().copied().collect();
            Distribution::from_weights(&by_position)
                .map_err(|e| errors.push(format!("analyze.initial_weights: {e}")))
                .ok()
        }
        (None, x) => {
            let x = x.unwrap_or(m);
            if m >= 2 && !(1..=m).contains(&x) {
                errors.push(format!("analyze.initial_state: {x} outside 1..={m}"));
                None
            } else {
                Distribution::point(m, x).ok()
            }
        }
    };
    Some(Plan::Analyze {
        pi0: pi0?,
        schedule: schedule?,
        horizon,
        every,
    })
}

fn plan_stream(kind: Kind, p: &StreamParams, errors: &mut Vec<String>) -> Option<Plan> {
    let scenario_kind = match ScenarioKind::from_str(p.scenario.as_deref().unwrap_or("churn")) {
        Ok(k) => Some(k),
        Err(e) => {
            errors.push(format!("stream.scenario: {e}"));
            None
        }
    };
    let scale: Option<&'static str> = match p.scale.as_deref().unwrap_or("reduced") {
        "reduced" => Some("reduced"),
        "full" => Some("full"),
        other => {
            errors.push(format!(
                "stream.scale: {other:?} is neither reduced nor full"
            ));
            None
        }
    };
    let samplers = match (kind, p.sampler.as_deref()) {
        (Kind::Compare, Some(_)) => {
            errors.push("stream.sampler: compare always runs both samplers".into());
            None
        }
        (Kind::Compare, None) => Some(Sampler::ALL.to_vec()),
        (_, s) => match Sampler::from_str(s.unwrap_or("gradient")) {
            Ok(s) => Some(vec![s]),
            Err(e) => {
                errors.push(format!("stream.sampler: {e}"));
                None
            }
        },
    };

    let d = StreamConfig::default();
    let config = StreamConfig {
        stream_rate_kbps: p.stream_rate_kbps.unwrap_or(d.stream_rate_kbps),
        block_size_kb: p.block_size_kb.unwrap_or(d.block_size_kb),
        buffer_seconds: p.buffer_seconds.unwrap_or(d.buffer_seconds),
        similar_view_size: p.similar_view_size.unwrap_or(d.similar_view_size),
        download_connections: p.download_connections.unwrap_or(d.download_connections),
        connection_kbps: p.connection_kbps.unwrap_or(d.connection_kbps),
        window_blocks: p.window_blocks.unwrap_or(d.window_blocks),
        in_order_probability: p.in_order_probability.unwrap_or(d.in_order_probability),
        upload_classes: p.upload_classes.unwrap_or(d.upload_classes),
        source_slots: p.source_slots.unwrap_or(d.source_slots),
        sample_size: p.sample_size.unwrap_or(d.sample_size),
        refresh_ms: p.refresh_ms.unwrap_or(d.refresh_ms),
        silent_parent_ms: p.silent_parent_ms.unwrap_or(d.silent_parent_ms),
        shun_ms: p.shun_ms.unwrap_or(d.shun_ms),
        step_ms: p.step_ms.unwrap_or(d.step_ms),
        latency_min_ms: p.latency_min_ms.unwrap_or(d.latency_min_ms),
        latency_max_ms: p.latency_max_ms.unwrap_or(d.latency_max_ms),
        continuity_window_s: p.continuity_window_s.unwrap_or(d.continuity_window_s),
        continuity_threshold: p.continuity_threshold.unwrap_or(d.continuity_threshold),
        target_fraction: p.target_fraction.unwrap_or(d.target_fraction),
        target_hold_ms: p.target_hold_ms.unwrap_or(d.target_hold_ms),
        sample_interval_ms: p.sample_interval_ms.unwrap_or(d.sample_interval_ms),
        check_invariants: p.check_invariants.unwrap_or(d.check_invariants),
    };
    if let Err(e) = config.validate() {
        errors.push(format!("stream: {e}"));
    }

    let scenario = match (scenario_kind, scale) {
        (Some(k), Some(scale)) => {
            let base = if scale == "full" {
                Scenario::full(k)
            } else {
                Scenario::reduced(k)
            };
            let s = Scenario {
                initial_joins: p.initial_joins.unwrap_or(base.initial_joins),
                initial_mean_ms: p.initial_mean_ms.unwrap_or(base.initial_mean_ms),
                second_count: p.second_count.unwrap_or(base.second_count),
                second_mean_ms: p.second_mean_ms.unwrap_or(base.second_mean_ms),
                duration_s: p.duration_s.unwrap_or(base.duration_s),
                ..base
            };
            match s.validate() {
                Ok(()) => Some(s),
                Err(e) => {
                    errors.push(format!("stream: {e}"));
                    None
                }
            }
        }
        _ => None,
    };
    Some(Plan::Stream {
        config,
        scenario: scenario?,
        scale: scale?,
        samplers: samplers?,
    })
}

/// Command-line settings layered over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub repeat: Option<usize>,
    pub out: Option<String>,
    /// `dotted.key=value`; the value is read as TOML, or as a bare string.
    pub set: Vec<String>,
}

/// Reads and validates the config of a `kind` experiment. Without a file,
/// every parameter takes its default.
pub fn parse_config(
    kind: Kind,
    path: Option<&Path>,
    overrides: &Overrides,
) -> Result<ExperimentConfig, ConfigError> {
    let text = match path {
        Some(path) => std::fs::read_to_string(path).map_err(|source| ConfigError::Unreadable {
            path: path.to_path_buf(),
            source,
        })?,
        None => String::new(),
    };
    parse_config_str(kind, &text, overrides)
}

pub fn parse_config_str(
    kind: Kind,
    text: &str,
    overrides: &Overrides,
) -> Result<ExperimentConfig, ConfigError> {
    let mut table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| ConfigError::Syntax(e.message().to_string()))?;
    for item in &overrides.set {
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| ConfigError::Syntax(format!("override {item:?} is not key=value")))?;
        set_dotted(&mut table, key.trim(), parse_value(value.trim()))?;
    }

    let mut unknown = Vec::new();
    let parsed: Result<ExperimentConfig, _> =
        serde_ignored::deserialize(toml::Value::Table(table), |path| {
            // Option layers show up as `?` segments.
            let key: Vec<String> = path
                .to_string()
                .split('.')
                .filter(|s| *s != "?")
                .map(String::from)
                .collect();
            unknown.push(key.join("."));
        });
    if !unknown.is_empty() {
        unknown.sort();
        return Err(ConfigError::UnknownKeys(unknown));
    }
    let mut config =
        parsed.map_err(|e| ConfigError::Invalid(vec![e.to_string().trim().to_string()]))?;

    if let Some(seed) = overrides.seed {
        config.seed = seed;
    }
    if let Some(repeat) = overrides.repeat {
        config.repeat = repeat;
    }
    if let Some(out) = &overrides.out {
        config.out = Some(out.clone());
    }
    match config.kind {
        Some(k) if k != kind => {
            return Err(ConfigError::Invalid(vec![format!(
                "kind: config is for {k} but the command is {kind}"
            )]))
        }
        _ => config.kind = Some(kind),
    }
    config.plan()?;
    Ok(config)
}

fn parse_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

fn set_dotted(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<(), ConfigError> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().filter(|k| !k.is_empty());
    let Some(last) = last else {
        return Err(ConfigError::Syntax(format!("empty override key {key:?}")));
    };
    let mut cur = table;
    for part in parts {
        let entry = cur
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry.as_table_mut().ok_or_else(|| {
            ConfigError::Syntax(format!("override {key:?}: {part} is not a table"))
        })?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

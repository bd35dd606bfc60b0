//! Dispatch of a validated config to the simulation and analysis code.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use gradient_core::gossip::{seed_sweep, GossipTrace};
use gradient_core::markov::{
    classify_schedule, evolve_spectral, expected_hitting_time, hitting_time_bound,
    relative_sup_distance, Distribution, ExactEvolution,
};
use gradient_core::overlay::NodeId;
use gradient_core::rng::{derive_seed, Stream};
use gradient_core::streaming::{median, sweep, Sampler, Scenario, StreamConfig, StreamRun};
use gradient_core::{Execution, SamplingSchedule, UtilityConfig};

use crate::config::{ConfigError, ExperimentConfig, Kind, Plan};
use crate::CliError;

/// A file of the bundle, relative to the output directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputFile {
    pub path: PathBuf,
    pub contents: String,
}

/// Everything an experiment writes: the manifest, tables and summary.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultBundle {
    pub manifest: String,
    pub tables: Vec<OutputFile>,
    /// `key=value` lines of summary.txt, in order.
    pub summary: Vec<(String, String)>,
}

impl ResultBundle {
    pub fn summary_value(&self, key: &str) -> Option<&str> {
        self.summary
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn table(&self, path: &str) -> Option<&str> {
        self.tables
            .iter()
            .find(|f| f.path == Path::new(path))
            .map(|f| f.contents.as_str())
    }

    pub fn summary_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.summary {
            let _ = writeln!(s, "{k}={v}");
        }
        s
    }
}

/// Seeds of a repeated run: the root seed first, then derived ones.
pub fn run_seeds(root: u64, repeat: usize) -> Vec<u64> {
    (0..repeat as u64)
        .map(|k| {
            if k == 0 {
                root
            } else {
                derive_seed(root, Stream::Repeat, k)
            }
        })
        .collect()
}

struct Summary(Vec<(String, String)>);

impl Summary {
    fn put(&mut self, key: impl Into<String>, value: impl ToString) {
        self.0.push((key.into(), value.to_string()));
    }
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ResultBundle, CliError> {
    let normalized = config.normalized()?;
    let manifest = normalized.to_toml();
    let seeds = run_seeds(config.seed, config.repeat);
    let mut summary = Summary(Vec::new());
    summary.put("kind", config.kind());
    summary.put("code_version", crate::CODE_VERSION);
    summary.put("seed", config.seed);
    summary.put("repeat", config.repeat);
    let tables = match config.plan()? {
        Plan::Converge {
            utility,
            schedule,
            horizon,
        } => converge(&utility, &schedule, horizon, &seeds, &mut summary)?,
        Plan::Analyze {
            pi0,
            schedule,
            horizon,
            every,
        } => analyze(&pi0, &schedule, horizon, every, &mut summary)?,
        Plan::Stream {
            config: stream_config,
            scenario,
            scale,
            samplers,
        } => {
            summary.put("scenario", scenario.kind);
            summary.put("scale", scale);
            stream(
                config.kind(),
                &stream_config,
                &scenario,
                &samplers,
                &seeds,
                &mut summary,
            )?
        }
    };
    Ok(ResultBundle {
        manifest,
        tables,
        summary: summary.0,
    })
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

fn per_seed(seeds: &[u64], seed: u64, name: &str) -> PathBuf {
    if seeds.len() == 1 {
        PathBuf::from(name)
    } else {
        PathBuf::from(format!("seed_{seed}")).join(name)
    }
}

fn classification(schedule: &SamplingSchedule, horizon: u64, summary: &mut Summary) {
    let c = classify_schedule(schedule, horizon);
    summary.put("schedule", schedule);
    summary.put("verdict", c.verdict.as_str());
    summary.put("classification_horizon", c.horizon);
    summary.put("residual_product", c.residual_product);
    summary.put("sum_pt", c.sum_pt);
}

fn x_series(trace: &GossipTrace) -> String {
    let mut s = String::from("tick,node_id,x\n");
    for i in 0..trace.node_count() {
        let id = NodeId(i as u32);
        let points = trace.change_points(id);
        for &(t, x) in points {
            let _ = writeln!(s, "{t},{i},{x}");
        }
        let last = points.last().map_or(0, |p| p.0);
        if last < trace.ticks_run() {
            let _ = writeln!(s, "{},{i},{}", trace.ticks_run(), trace.final_x(id));
        }
    }
    s
}

fn converge(
    utility: &UtilityConfig,
    schedule: &SamplingSchedule,
    horizon: u64,
    seeds: &[u64],
    summary: &mut Summary,
) -> Result<Vec<OutputFile>, CliError> {
    let traces =
        seed_sweep(utility, schedule, seeds, horizon, Execution::default()).map_err(runtime)?;
    let mut tables = Vec::new();
    let mut runs = String::from("seed,gradient_tick,ticks_run,nodes_not_converged,max_final_x\n");
    let mut gradient_ticks = Vec::new();
    let mut runs_with_outsiders = 0;
    for (trace, &seed) in traces.iter().zip(seeds) {
        tables.push(OutputFile {
            path: per_seed(seeds, seed, "x_series.csv"),
            contents: x_series(trace),
        });
        let finals: Vec<u32> = (0..trace.node_count())
            .map(|i| trace.final_x(NodeId(i as u32)))
            .collect();
        let stuck = finals.iter().filter(|&&x| x > 1).count();
        runs_with_outsiders += (stuck > 0) as usize;
        let tick = trace.gradient_tick();
        if let Some(t) = tick {
            gradient_ticks.push(t as f64);
        }
        let _ = writeln!(
            runs,
            "{seed},{},{},{stuck},{}",
            tick.map_or("none".to_string(), |t| t.to_string()),
            trace.ticks_run(),
            finals.iter().max().copied().unwrap_or(0)
        );
    }
    tables.push(OutputFile {
        path: "convergence.csv".into(),
        contents: runs,
    });

    summary.put("nodes", utility.node_count());
    summary.put("levels", utility.levels());
    summary.put("horizon", horizon);
    classification(schedule, horizon, summary);
    if let SamplingSchedule::Constant(p) = schedule {
        let m = utility.max_class_size();
        if let Ok(mm) = expected_hitting_time(m, *p) {
            summary.put("expected_hitting_time_worst", mm);
        }
    }
    summary.put("runs_gradient_converged", gradient_ticks.len());
    summary.put("runs_with_unconverged_nodes", runs_with_outsiders);
    summary.put(
        "fraction_runs_with_unconverged_nodes",
        runs_with_outsiders as f64 / seeds.len() as f64,
    );
    summary.put(
        "median_gradient_tick",
        if gradient_ticks.is_empty() {
            "none".to_string()
        } else {
            median(&gradient_ticks).to_string()
        },
    );
    summary.put(
        "status",
        if gradient_ticks.len() == seeds.len() {
            "converged"
        } else {
            "not converged"
        },
    );
    Ok(tables)
}

fn analyze(
    pi0: &Distribution,
    schedule: &SamplingSchedule,
    horizon: u64,
    every: u64,
    summary: &mut Summary,
) -> Result<Vec<OutputFile>, CliError> {
    let m = pi0.states();
    let mut dist = String::from("tick,state,probability\n");
    let mut ev = ExactEvolution::new(pi0, schedule);
    let mut t = 0;
    loop {
        ev.advance_to(t).map_err(runtime)?;
        let d = ev.distribution().map_err(runtime)?;
        for x in 1..=m {
            let _ = writeln!(dist, "{t},{x},{}", d.state_probability(x));
        }
        if t == horizon {
            break;
        }
        t = (t + every).min(horizon);
    }
    let last = ev.distribution().map_err(runtime)?;

    let mut hitting = String::from("start_state,expected_ticks,bound_ticks\n");
    summary.put("states", m);
    summary.put("horizon", horizon);
    classification(schedule, horizon, summary);
    summary.put("absorbed_mass", last.absorbed_mass());
    if let SamplingSchedule::Constant(p) = schedule {
        for i in 2..=m {
            let mi = expected_hitting_time(i, *p).map_err(runtime)?;
            let bound = hitting_time_bound(i, *p).map_err(runtime)?;
            let _ = writeln!(hitting, "{i},{mi},{bound}");
        }
        summary.put(
            "expected_hitting_time",
            expected_hitting_time(m, *p).map_err(runtime)?,
        );
        summary.put(
            "hitting_time_bound",
            hitting_time_bound(m, *p).map_err(runtime)?,
        );
    } else {
        summary.put("expected_hitting_time", "constant schedules only");
    }
    if m <= 20 {
        let spectral = evolve_spectral(pi0, schedule, horizon).map_err(runtime)?;
        summary.put(
            "spectral_relative_difference",
            relative_sup_distance(spectral.probs(), last.probs()),
        );
    }
    Ok(vec![
        OutputFile {
            path: "distribution.csv".into(),
            contents: dist,
        },
        OutputFile {
            path: "hitting.csv".into(),
            contents: hitting,
        },
    ])
}

fn series_rows(out: &mut String, sampler: Sampler, series: &[(f64, f64)]) {
    for &(t, v) in series {
        let _ = writeln!(out, "{t},{sampler},{v}");
    }
}

/// Per-time median over runs. Times are keyed in whole milliseconds.
fn median_series(runs: &[&[(f64, f64)]]) -> Vec<(f64, f64)> {
    let mut points: Vec<(u64, f64)> = runs
        .iter()
        .flat_map(|s| s.iter().map(|&(t, v)| ((t * 1000.0).round() as u64, v)))
        .collect();
    points.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    points
        .chunk_by(|a, b| a.0 == b.0)
        .map(|group| {
            let values: Vec<f64> = group.iter().map(|p| p.1).collect();
            (group[0].0 as f64 / 1000.0, median(&values))
        })
        .collect()
}

fn stream(
    kind: Kind,
    config: &StreamConfig,
    scenario: &Scenario,
    samplers: &[Sampler],
    seeds: &[u64],
    summary: &mut Summary,
) -> Result<Vec<OutputFile>, CliError> {
    let results =
        sweep(config, scenario, samplers, seeds, Execution::default()).map_err(runtime)?;
    let continuity_header = "time_s,sampler,fraction_above_99\n";
    let latency_header = "time_s,sampler,mean_latency_s\n";
    let mut tables = Vec::new();
    let mut continuity = String::from(continuity_header);
    let mut latency = String::from(latency_header);
    let mut runs_csv = String::from(
        "seed,sampler,time_to_target_s,target_reached,mean_latency_s,invariant_violations\n",
    );
    let mut violations = 0usize;
    let mut steps_checked = 0u64;
    let mut medians = Vec::new();

    if seeds.len() > 1 {
        for (k, &seed) in seeds.iter().enumerate() {
            let mut c = String::from(continuity_header);
            let mut l = String::from(latency_header);
            for (runs, &sampler) in results.iter().zip(samplers) {
                series_rows(&mut c, sampler, &runs[k].metrics.continuity_series);
                series_rows(&mut l, sampler, &runs[k].metrics.latency_series);
            }
            tables.push(OutputFile {
                path: per_seed(seeds, seed, "continuity.csv"),
                contents: c,
            });
            tables.push(OutputFile {
                path: per_seed(seeds, seed, "latency.csv"),
                contents: l,
            });
        }
    }

    for (runs, &sampler) in results.iter().zip(samplers) {
        let cont: Vec<&[(f64, f64)]> = runs
            .iter()
            .map(|r| &r.metrics.continuity_series[..])
            .collect();
        let lat: Vec<&[(f64, f64)]> = runs.iter().map(|r| &r.metrics.latency_series[..]).collect();
        series_rows(&mut continuity, sampler, &median_series(&cont));
        series_rows(&mut latency, sampler, &median_series(&lat));
        for r in runs {
            let StreamRun {
                seed,
                metrics,
                invariants,
            } = r;
            violations += invariants.violations.len();
            steps_checked += invariants.steps_checked;
            let _ = writeln!(
                runs_csv,
                "{seed},{sampler},{},{},{},{}",
                metrics.time_to_target_s,
                metrics.target_reached,
                metrics.mean_latency_s,
                invariants.violations.len()
            );
        }
        let t: Vec<f64> = runs.iter().map(|r| r.metrics.time_to_target_s).collect();
        let l: Vec<f64> = runs.iter().map(|r| r.metrics.mean_latency_s).collect();
        let reached = runs.iter().filter(|r| r.metrics.target_reached).count();
        summary.put(format!("{sampler}.median_time_to_target_s"), median(&t));
        summary.put(format!("{sampler}.median_mean_latency_s"), median(&l));
        summary.put(format!("{sampler}.runs_target_reached"), reached);
        medians.push((sampler, median(&t), median(&l)));
    }
    tables.push(OutputFile {
        path: "continuity.csv".into(),
        contents: continuity,
    });
    tables.push(OutputFile {
        path: "latency.csv".into(),
        contents: latency,
    });
    tables.push(OutputFile {
        path: "runs.csv".into(),
        contents: runs_csv,
    });

    summary.put("invariants_checked", config.check_invariants);
    summary.put("invariant_steps_checked", steps_checked);
    summary.put("invariant_violations", violations);
    if kind == Kind::Compare {
        let get = |s: Sampler| medians.iter().find(|m| m.0 == s).copied();
        if let (Some(r), Some(g)) = (get(Sampler::Random), get(Sampler::Gradient)) {
            summary.put("gradient_time_to_target_le_random", g.1 <= r.1);
            summary.put("gradient_latency_minus_random_s", g.2 - r.2);
        }
    }
    Ok(tables)
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

//! Replications with confidence intervals, parameter sweeps and bottleneck detection.

mod path;
mod stability;
mod summary;
mod table;

use std::collections::BTreeMap;

use rayon::prelude::*;
use thiserror::Error;

pub use path::resolve_mut;
pub use stability::{ls_slope, queue_slope, stability, PlaceVerdict, DEFAULT_EPSILON};
pub use summary::{summarize, summarize_runs, t_quantile, MetricSummary, ReplicationSummary};
pub use table::{export_table, format_number, Cell, Format, Table};

use crate::engine::{simulate, EngineError, RunConfig, RunMetrics};
use crate::model::{ColorExpr, DelaySpec, QpnNet, TransitionKind};
use crate::parser::{load_net, spec_from_value, spec_to_value, json::number, LoadError, ParseError, SpecDocument};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("run {index}: {source}")]
    Run { index: usize, source: EngineError },
    #[error("parameter `{path}`: {message}")]
    Path { path: String, message: String },
    #[error("parameter `{path}` = {value}: {message}")]
    Value { path: String, value: f64, message: String },
    #[error("{0}")]
    Plan(String),
}

/// Runs `n` replications with seeds `cfg.seed + i`, in parallel; results are in run order.
pub fn replicate(net: &QpnNet, cfg: &RunConfig, n: usize) -> Result<Vec<RunMetrics>, AnalysisError> {
    if n == 0 {
        return Err(AnalysisError::Plan("at least one run is required".into()));
    }
    (0..n)
        .into_par_iter()
        .map(|i| {
            let c = cfg.clone().with_seed(cfg.seed.wrapping_add(i as u64));
            simulate(net, &c).map_err(|source| AnalysisError::Run { index: i, source })
        })
        .collect()
}

pub fn run_replications(net: &QpnNet, cfg: &RunConfig, n: usize) -> Result<ReplicationSummary, AnalysisError> {
    Ok(ReplicationSummary::from_runs(&replicate(net, cfg, n)?))
}

/// A one-parameter study over a specification document.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPlan {
    /// Path of a numeric leaf, e.g. `vnfs.cache.outputs.random[0].weight`.
    pub path: String,
    pub values: Vec<f64>,
    pub runs: usize,
    /// Replication `i` of every cell uses seed `base_seed + i`.
    pub base_seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub summary: ReplicationSummary,
}

/// Copy of `doc` with the leaf at `path` set to `value`.
pub fn with_parameter(doc: &SpecDocument, path: &str, value: f64) -> Result<SpecDocument, AnalysisError> {
    let mut tree = spec_to_value(doc);
    let leaf = resolve_mut(&mut tree, path).map_err(|message| AnalysisError::Path {
        path: path.to_string(),
        message,
    })?;
    *leaf = number(value);
    spec_from_value(&tree).map_err(|e: ParseError| AnalysisError::Value {
        path: path.to_string(),
        value,
        message: e.to_string(),
    })
}

fn load_with(doc: &SpecDocument, path: &str, value: f64) -> Result<QpnNet, AnalysisError> {
    let d = with_parameter(doc, path, value)?;
    load_net(&d).map_err(|e: LoadError| AnalysisError::Value {
        path: path.to_string(),
        value,
        message: e.to_string(),
    })
}

/// One replication summary per plan value, in plan order. All cells share the
/// seed sequence, so adding or removing a value leaves other rows unchanged.
pub fn sweep(plan: &SweepPlan, doc: &SpecDocument, cfg: &RunConfig) -> Result<Vec<SweepRow>, AnalysisError> {
    if plan.values.is_empty() {
        return Err(AnalysisError::Plan("sweep needs at least one value".into()));
    }
    let nets = plan
        .values
        .iter()
        .map(|&v| load_with(doc, &plan.path, v))
        .collect::<Result<Vec<_>, _>>()?;
    let cfg = cfg.clone().with_seed(plan.base_seed);
    nets.iter()
        .zip(&plan.values)
        .map(|(net, &value)| {
            Ok(SweepRow {
                value,
                summary: run_replications(net, &cfg, plan.runs)?,
            })
        })
        .collect()
}

fn scaled(e: &ColorExpr, k: f64) -> ColorExpr {
    ColorExpr::Number(e.constant_number().unwrap_or(1.0) * k)
}

/// `d` rescaled to have mean `mean` (shape kept; exponential and deterministic set directly).
pub fn with_mean(d: &DelaySpec, mean: f64) -> DelaySpec {
    let k = d.constant_mean().filter(|m| *m > 0.0).map(|m| mean / m);
    match d {
        DelaySpec::Deterministic { .. } => DelaySpec::deterministic(mean),
        DelaySpec::Exponential { .. } => DelaySpec::exponential(mean),
        DelaySpec::Uniform { low, high } => match k {
            Some(k) => DelaySpec::Uniform {
                low: scaled(low, k),
                high: scaled(high, k),
            },
            None => DelaySpec::deterministic(mean),
        },
        DelaySpec::Normal { sd, truncate_at_zero, .. } => DelaySpec::Normal {
            mean: ColorExpr::Number(mean),
            sd: k.map_or_else(|| sd.clone(), |k| scaled(sd, k)),
            truncate_at_zero: *truncate_at_zero,
        },
    }
}

/// Copy of `net` whose source transitions all have mean inter-arrival `1 / rate`.
pub fn with_source_rate(net: &QpnNet, rate: f64) -> QpnNet {
    let mut out = net.clone();
    let sources: Vec<String> = net.sources().map(|t| t.id.to_string()).collect();
    for id in sources {
        let t = out.transition_mut(&id).expect("source exists");
        if let TransitionKind::Timed { delay } = &mut t.kind {
            *delay = with_mean(delay, 1.0 / rate);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateVerdict {
    pub rate: f64,
    pub places: BTreeMap<String, PlaceVerdict>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BottleneckReport {
    pub epsilon: f64,
    pub rates: Vec<RateVerdict>,
    /// Place that turns unstable at the lowest rate (largest slope among ties).
    pub bottleneck: Option<String>,
}

/// Runs the net once per source rate and classifies every queuing place.
pub fn detect_bottleneck(
    net: &QpnNet,
    cfg: &RunConfig,
    rates: &[f64],
    epsilon: f64,
) -> Result<BottleneckReport, AnalysisError> {
    if rates.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
        return Err(AnalysisError::Plan("rates must be positive".into()));
    }
    if rates.windows(2).any(|w| w[0] >= w[1]) {
        return Err(AnalysisError::Plan("rates must be strictly ascending".into()));
    }
    let verdicts = rates
        .par_iter()
        .enumerate()
        .map(|(i, &rate)| {
            let m = simulate(&with_source_rate(net, rate), cfg)
                .map_err(|source| AnalysisError::Run { index: i, source })?;
            Ok(RateVerdict {
                rate,
                places: stability(&m, epsilon),
            })
        })
        .collect::<Result<Vec<_>, AnalysisError>>()?;
    let bottleneck = verdicts.iter().find_map(|v| {
        v.places
            .iter()
            .filter(|(_, p)| !p.stable)
            .max_by(|a, b| a.1.slope.total_cmp(&b.1.slope).then(b.0.cmp(a.0)))
            .map(|(p, _)| p.clone())
    });
    Ok(BottleneckReport {
        epsilon,
        rates: verdicts,
        bottleneck,
    })
}

/// Column names of [`summary_table`], [`sweep_table`] and [`bottleneck_table`].
pub const SUMMARY_COLUMNS: [&str; 5] = ["metric", "n", "mean", "sd", "ci95_half_width"];

fn summary_cells(name: String, s: &MetricSummary) -> Vec<Cell> {
    vec![
        name.into(),
        s.n.into(),
        if s.n == 0 { Cell::Empty } else { s.mean.into() },
        s.sd.into(),
        s.half_width.into(),
    ]
}

/// One row per metric: e2e, throughput, queue lengths, waits and busy fractions.
pub fn summary_table(s: &ReplicationSummary) -> Table {
    let mut t = Table::new(SUMMARY_COLUMNS);
    t.push(summary_cells("e2e_delay".into(), &s.e2e));
    t.push(summary_cells("throughput".into(), &s.throughput));
    for (p, m) in &s.queue_length {
        t.push(summary_cells(format!("queue_length[{p}]"), m));
    }
    for (p, m) in &s.queue_wait {
        t.push(summary_cells(format!("queue_wait[{p}]"), m));
    }
    for (p, m) in &s.busy {
        t.push(summary_cells(format!("busy[{p}]"), m));
    }
    t
}

pub fn sweep_table(rows: &[SweepRow], epsilon: f64) -> Table {
    let places: Vec<String> = rows
        .first()
        .map(|r| r.summary.queue_length.keys().cloned().collect())
        .unwrap_or_default();
    let mut cols: Vec<String> = [
        "value",
        "runs",
        "e2e_mean",
        "e2e_sd",
        "e2e_ci95",
        "throughput_mean",
        "throughput_ci95",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    cols.extend(places.iter().map(|p| format!("queue_length[{p}]")));
    cols.push("unstable".into());
    let mut t = Table::new(cols);
    for r in rows {
        let s = &r.summary;
        let mut row: Vec<Cell> = vec![
            r.value.into(),
            s.runs.into(),
            if s.e2e.n == 0 { Cell::Empty } else { s.e2e.mean.into() },
            s.e2e.sd.into(),
            s.e2e.half_width.into(),
            s.throughput.mean.into(),
            s.throughput.half_width.into(),
        ];
        for p in &places {
            row.push(s.queue_length.get(p).map(|m| m.mean).into());
        }
        row.push(s.unstable_places(epsilon).join(";").into());
        t.push(row);
    }
    t
}

pub fn bottleneck_table(report: &BottleneckReport) -> Table {
    let mut t = Table::new(["rate", "place", "slope", "verdict", "bottleneck"]);
    for v in &report.rates {
        for (p, pv) in &v.places {
            t.push(vec![
                v.rate.into(),
                p.as_str().into(),
                pv.slope.into(),
                if pv.stable { "stable" } else { "unstable" }.into(),
                (!pv.stable && report.bottleneck.as_deref() == Some(p)).to_string().into(),
            ]);
        }
    }
    t
}

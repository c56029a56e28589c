use std::collections::BTreeMap;
use std::time::Duration;

use serde_json::{json, Map, Value};

/// Per-sink observations.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SinkMetrics {
    /// End-to-end delays (arrival time minus origin time), in arrival order.
    pub e2e: Vec<f64>,
    pub count: u64,
    /// field -> symbol value -> count, over symbol-valued color fields.
    pub breakdown: BTreeMap<String, BTreeMap<String, u64>>,
}

impl SinkMetrics {
    pub fn mean_e2e(&self) -> Option<f64> {
        mean(&self.e2e)
    }
}

/// Per-queuing-place observations.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct QueueMetrics {
    /// Time-weighted mean number of waiting tokens.
    pub mean_length: f64,
    pub max_length: u64,
    /// Length sampled at `warmup + k * sample_interval`.
    pub series: Vec<u64>,
    /// Time from entering the place to being consumed, per token.
    pub waits: Vec<f64>,
    pub arrivals: u64,
}

impl QueueMetrics {
    pub fn mean_wait(&self) -> Option<f64> {
        mean(&self.waits)
    }
}

/// Per-transition observations.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TransitionMetrics {
    /// Completed firings.
    pub firings: u64,
    /// Fraction of the observation window spent in service; `None` for immediate transitions.
    pub busy_fraction: Option<f64>,
}

/// Everything a run observed inside `[warmup, horizon)`.
#[derive(Debug, Clone, Default)]
pub struct RunMetrics {
    pub seed: u64,
    pub warmup: f64,
    pub horizon: f64,
    pub sample_interval: f64,
    pub sinks: BTreeMap<String, SinkMetrics>,
    pub queues: BTreeMap<String, QueueMetrics>,
    pub transitions: BTreeMap<String, TransitionMetrics>,
    /// Tokens produced by source transitions.
    pub emitted: u64,
    /// Calendar events processed over the whole run.
    pub events: u64,
    /// Not part of equality or serialization.
    pub wall_clock: Duration,
}

impl PartialEq for RunMetrics {
    fn eq(&self, o: &Self) -> bool {
        self.seed == o.seed
            && self.warmup.to_bits() == o.warmup.to_bits()
            && self.horizon.to_bits() == o.horizon.to_bits()
            && self.sample_interval.to_bits() == o.sample_interval.to_bits()
            && self.sinks == o.sinks
            && self.queues == o.queues
            && self.transitions == o.transitions
            && self.emitted == o.emitted
            && self.events == o.events
    }
}

pub(crate) fn mean(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        None
    } else {
        Some(xs.iter().sum::<f64>() / xs.len() as f64)
    }
}

impl RunMetrics {
    pub fn window(&self) -> f64 {
        self.horizon - self.warmup
    }

    /// Tokens absorbed by all sinks per second of observation.
    pub fn throughput(&self) -> f64 {
        self.sinks.values().map(|s| s.count).sum::<u64>() as f64 / self.window()
    }

    /// Mean end-to-end delay pooled over all sinks.
    pub fn mean_e2e(&self) -> Option<f64> {
        let n: usize = self.sinks.values().map(|s| s.e2e.len()).sum();
        if n == 0 {
            return None;
        }
        Some(self.sinks.values().flat_map(|s| &s.e2e).sum::<f64>() / n as f64)
    }

    pub fn firings(&self, transition: &str) -> u64 {
        self.transitions.get(transition).map_or(0, |t| t.firings)
    }

    /// Deterministic JSON form, wall clock excluded. With `series` false the
    /// per-token samples and queue series are left out.
    pub fn to_value(&self, series: bool) -> Value {
        let sinks: Map<String, Value> = self
            .sinks
            .iter()
            .map(|(k, s)| {
                let mut m = Map::new();
                m.insert("count".into(), s.count.into());
                m.insert("mean_e2e".into(), opt(s.mean_e2e()));
                m.insert("breakdown".into(), json!(s.breakdown));
                if series {
                    m.insert("e2e".into(), json!(s.e2e));
                }
                (k.clone(), Value::Object(m))
            })
            .collect();
        let queues: Map<String, Value> = self
            .queues
            .iter()
            .map(|(k, q)| {
                let mut m = Map::new();
                m.insert("mean_length".into(), q.mean_length.into());
                m.insert("max_length".into(), q.max_length.into());
                m.insert("arrivals".into(), q.arrivals.into());
                m.insert("mean_wait".into(), opt(q.mean_wait()));
                if series {
                    m.insert("series".into(), json!(q.series));
                    m.insert("waits".into(), json!(q.waits));
                }
                (k.clone(), Value::Object(m))
            })
            .collect();
        let transitions: Map<String, Value> = self
            .transitions
            .iter()
            .map(|(k, t)| {
                (
                    k.clone(),
                    json!({"firings": t.firings, "busy_fraction": opt(t.busy_fraction)}),
                )
            })
            .collect();
        json!({
            "seed": self.seed,
            "warmup": self.warmup,
            "horizon": self.horizon,
            "sample_interval": self.sample_interval,
            "emitted": self.emitted,
            "events": self.events,
            "sinks": sinks,
            "queues": queues,
            "transitions": transitions,
        })
    }
}

fn opt(x: Option<f64>) -> Value {
    x.map_or(Value::Null, Value::from)
}

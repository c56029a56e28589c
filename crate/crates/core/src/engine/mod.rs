//! Seeded discrete-event execution of a [`QpnNet`].

mod calendar;
mod metrics;
mod rng;
mod sim;
mod token;

use std::io::{self, Write};

use sha2::{Digest, Sha256};
use thiserror::Error;

pub use calendar::{Event, EventCalendar};
pub use metrics::{QueueMetrics, RunMetrics, SinkMetrics, TransitionMetrics};
pub use rng::{rng_stream, selection_stream, Stream};
pub use sim::Simulator;
pub use token::{origin_propagation, TokenInstance};

use crate::model::{DelayError, EvalError, QpnNet, Violation};

/// Default limit on immediate firings at a single instant.
pub const DEFAULT_IMMEDIATE_CAP: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    /// End of the run in seconds; events at or after it are not processed.
    pub horizon: f64,
    /// Metrics ignore everything before this time.
    pub warmup: f64,
    /// Spacing of the queue-length series.
    pub sample_interval: f64,
    pub immediate_cap: u64,
}

impl RunConfig {
    pub fn new(seed: u64, horizon: f64) -> Self {
        RunConfig {
            seed,
            horizon,
            warmup: 0.0,
            sample_interval: 1.0,
            immediate_cap: DEFAULT_IMMEDIATE_CAP,
        }
    }

    pub fn with_warmup(mut self, warmup: f64) -> Self {
        self.warmup = warmup;
        self
    }

    pub fn with_sample_interval(mut self, dt: f64) -> Self {
        self.sample_interval = dt;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn check(&self) -> Result<(), EngineError> {
        let bad = |m: &str| Err(EngineError::Config(m.to_string()));
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return bad("horizon must be a positive number of seconds");
        }
        if !(self.warmup >= 0.0 && self.warmup < self.horizon) {
            return bad("warmup must satisfy 0 <= warmup < horizon");
        }
        if !(self.sample_interval > 0.0 && self.sample_interval.is_finite()) {
            return bad("sample interval must be > 0");
        }
        if self.immediate_cap == 0 {
            return bad("immediate cap must be >= 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("net is not valid: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    InvalidNet(Vec<Violation>),
    #[error("vanishing loop at t={time}: {firings} immediate firings without time advancing (cycling: {})", .transitions.join(", "))]
    VanishingLoop {
        time: f64,
        firings: u64,
        transitions: Vec<String>,
    },
    #[error("transition `{transition}` at t={time}: {source}")]
    Eval {
        transition: String,
        time: f64,
        source: EvalError,
    },
    #[error("transition `{transition}` at t={time}: {source}")]
    Delay {
        transition: String,
        time: f64,
        source: DelayError,
    },
    #[error("writing trace: {0}")]
    Trace(String),
}

pub fn simulate(net: &QpnNet, cfg: &RunConfig) -> Result<RunMetrics, EngineError> {
    Simulator::new(net, cfg.clone())?.run()
}

/// Runs with the event trace written to `out` as newline-delimited JSON.
pub fn simulate_traced(net: &QpnNet, cfg: &RunConfig, out: impl Write) -> Result<RunMetrics, EngineError> {
    let mut sim = Simulator::new(net, cfg.clone())?;
    sim.set_trace(out);
    sim.run()
}

/// `Write` adapter feeding SHA-256.
#[derive(Default)]
pub struct HashWriter(Sha256);

impl HashWriter {
    pub fn hex(self) -> String {
        self.0.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

impl Write for HashWriter {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        self.0.update(buf);
        Ok(buf.len())
    }

    fn flush(&mut self) -> io::Result<()> {
        Ok(())
    }
}

/// Hex SHA-256 of the run's event trace, with the metrics.
pub fn trace_hash(net: &QpnNet, cfg: &RunConfig) -> Result<(String, RunMetrics), EngineError> {
    let mut h = HashWriter::default();
    let m = simulate_traced(net, cfg, &mut h)?;
    Ok((h.hex(), m))
}

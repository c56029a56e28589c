use std::collections::BTreeMap;

use statrs::distribution::{ContinuousCDF, StudentsT};

use super::stability::queue_slope;
use crate::engine::RunMetrics;

/// Mean, sample standard deviation and 95% confidence half-width of one metric over runs.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSummary {
    pub n: usize,
    pub mean: f64,
    /// `None` when fewer than two observations.
    pub sd: Option<f64>,
    /// Student-t half-width with n - 1 degrees of freedom; `None` when n < 2.
    pub half_width: Option<f64>,
}

impl MetricSummary {
    /// Whether the confidence interval contains `x`. `false` without an interval.
    pub fn covers(&self, x: f64) -> bool {
        self.half_width.is_some_and(|h| (x - self.mean).abs() <= h)
    }

    pub fn interval(&self) -> Option<(f64, f64)> {
        self.half_width.map(|h| (self.mean - h, self.mean + h))
    }
}

/// Two-sided 97.5% quantile of Student's t.
pub fn t_quantile(dof: usize) -> f64 {
    StudentsT::new(0.0, 1.0, dof as f64)
        .expect("dof >= 1")
        .inverse_cdf(0.975)
}

/// Summary of the finite values in `xs`. An empty input yields n = 0 and a NaN mean.
pub fn summarize(xs: &[f64]) -> MetricSummary {
    let xs: Vec<f64> = xs.iter().copied().filter(|x| x.is_finite()).collect();
    let n = xs.len();
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return MetricSummary { n, mean, sd: None, half_width: None };
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let sd = var.sqrt();
    MetricSummary {
        n,
        mean,
        sd: Some(sd),
        half_width: Some(t_quantile(n - 1) * sd / (n as f64).sqrt()),
    }
}

/// Summary of a per-run statistic; runs where `f` gives `None` are skipped.
pub fn summarize_runs(runs: &[RunMetrics], f: impl Fn(&RunMetrics) -> Option<f64>) -> MetricSummary {
    summarize(&runs.iter().filter_map(f).collect::<Vec<_>>())
}

/// Aggregate over independent replications of one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationSummary {
    pub runs: usize,
    /// Per-run mean end-to-end delay over all sinks (runs without sink arrivals skipped).
    pub e2e: MetricSummary,
    /// Sink arrivals per second.
    pub throughput: MetricSummary,
    /// Per queuing place: time-weighted mean length.
    pub queue_length: BTreeMap<String, MetricSummary>,
    /// Per queuing place: mean waiting time.
    pub queue_wait: BTreeMap<String, MetricSummary>,
    /// Per queuing place: least-squares slope of the length over the second half of the run.
    pub queue_slope: BTreeMap<String, MetricSummary>,
    /// Per timed transition: busy fraction.
    pub busy: BTreeMap<String, MetricSummary>,
    /// Per transition: firings pooled over all runs.
    pub firings: BTreeMap<String, u64>,
}

impl ReplicationSummary {
    pub fn from_runs(runs: &[RunMetrics]) -> Self {
        let mut places: Vec<&String> = runs.iter().flat_map(|r| r.queues.keys()).collect();
        places.sort();
        places.dedup();
        let mut transitions: Vec<&String> = runs.iter().flat_map(|r| r.transitions.keys()).collect();
        transitions.sort();
        transitions.dedup();

        let per_place = |f: &dyn Fn(&RunMetrics, &str) -> Option<f64>| -> BTreeMap<String, MetricSummary> {
            places
                .iter()
                .map(|p| ((*p).clone(), summarize_runs(runs, |r| f(r, p))))
                .collect()
        };
        let queue_length = per_place(&|r, p| r.queues.get(p).map(|q| q.mean_length));
        let queue_wait = per_place(&|r, p| r.queues.get(p).and_then(|q| q.mean_wait()));
        let queue_slope = per_place(&|r, p| r.queues.get(p).map(|q| queue_slope(q, r.warmup, r.sample_interval)));
        let busy = transitions
            .iter()
            .filter_map(|t| {
                let s = summarize_runs(runs, |r| r.transitions.get(*t).and_then(|m| m.busy_fraction));
                (s.n > 0).then(|| ((*t).clone(), s))
            })
            .collect();
        let firings = transitions
            .iter()
            .map(|t| ((*t).clone(), runs.iter().map(|r| r.firings(t)).sum()))
            .collect();
        ReplicationSummary {
            runs: runs.len(),
            e2e: summarize_runs(runs, RunMetrics::mean_e2e),
            throughput: summarize_runs(runs, |r| Some(r.throughput())),
            queue_length,
            queue_wait,
            queue_slope,
            busy,
            firings,
        }
    }

    /// Queuing places whose mean slope exceeds `epsilon` tokens per second.
    pub fn unstable_places(&self, epsilon: f64) -> Vec<String> {
        self.queue_slope
            .iter()
            .filter(|(_, s)| s.mean > epsilon)
            .map(|(p, _)| p.clone())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_sample_has_zero_width() {
        let s = summarize(&[2.5; 5]);
        assert_eq!(s.mean, 2.5);
        assert_eq!(s.sd, Some(0.0));
        assert_eq!(s.half_width, Some(0.0));
    }

    #[test]
    fn single_value_has_no_interval() {
        let s = summarize(&[1.0]);
        assert_eq!((s.n, s.mean, s.sd, s.half_width), (1, 1.0, None, None));
        assert!(!s.covers(1.0));
    }

    #[test]
    fn t_quantiles_match_tables() {
        // two-sided 95% critical values
        for (dof, t) in [(1, 12.706), (4, 2.776), (10, 2.228), (29, 2.045), (100, 1.984)] {
            assert!((t_quantile(dof) - t).abs() < 1e-3, "dof {dof}");
        }
    }

    #[test]
    fn small_sample_by_hand() {
        // mean 2, sd 1, half-width 4.303 / sqrt(3)
        let s = summarize(&[1.0, 2.0, 3.0]);
        assert!((s.mean - 2.0).abs() < 1e-12);
        assert!((s.sd.unwrap() - 1.0).abs() < 1e-12);
        assert!((s.half_width.unwrap() - 4.302_653 / 3f64.sqrt()).abs() < 1e-5);
    }
}

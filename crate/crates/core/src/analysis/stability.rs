use std::collections::BTreeMap;

use crate::engine::{QueueMetrics, RunMetrics};

/// Default slope threshold in tokens per second.
pub const DEFAULT_EPSILON: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaceVerdict {
    pub slope: f64,
    pub stable: bool,
}

/// Least-squares slope of `ys` sampled at `x0 + k * dx`.
pub fn ls_slope(ys: &[u64], x0: f64, dx: f64) -> f64 {
    let n = ys.len();
    if n < 2 {
        return 0.0;
    }
    let xs: Vec<f64> = (0..n).map(|k| x0 + k as f64 * dx).collect();
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().map(|&y| y as f64).sum::<f64>() / n as f64;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, &y)| (x - mx) * (y as f64 - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Slope of the queue-length series over the second half of the observation window.
pub fn queue_slope(q: &QueueMetrics, warmup: f64, dt: f64) -> f64 {
    let half = q.series.len() / 2;
    ls_slope(&q.series[half..], warmup + half as f64 * dt, dt)
}

/// Verdict per queuing place: unstable iff its slope exceeds `epsilon`.
pub fn stability(m: &RunMetrics, epsilon: f64) -> BTreeMap<String, PlaceVerdict> {
    m.queues
        .iter()
        .map(|(p, q)| {
            let slope = queue_slope(q, m.warmup, m.sample_interval);
            (p.clone(), PlaceVerdict { slope, stable: slope <= epsilon })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_a_line() {
        let ys: Vec<u64> = (0..50).map(|k| 3 + 2 * k).collect();
        assert!((ls_slope(&ys, 10.0, 0.5) - 4.0).abs() < 1e-9);
        assert_eq!(ls_slope(&[7], 0.0, 1.0), 0.0);
        assert_eq!(ls_slope(&[5; 10], 0.0, 1.0), 0.0);
    }

    #[test]
    fn only_second_half_counts() {
        let mut series: Vec<u64> = (0..100).collect();
        series.extend([100; 100]);
        let q = QueueMetrics { series, ..Default::default() };
        assert_eq!(queue_slope(&q, 0.0, 1.0), 0.0);
    }
}

//! Summary statistics over replications.

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("cannot summarize an empty sample")]
pub struct EmptySample;

/// Mean, spread and order statistics of one metric.
///
/// Percentiles use the nearest-rank definition: the `ceil(p * n)`-th
/// smallest sample, 1-indexed. `stddev` is the sample deviation with an
/// `n - 1` denominator, zero for a single sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StatsSummary {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub stddev: f64,
    pub p50: f64,
    pub p90: f64,
    pub p95: f64,
    pub p99: f64,
    pub min: f64,
    pub max: f64,
}

impl StatsSummary {
    /// Standard error of the mean.
    pub fn std_error(&self) -> f64 {
        self.stddev / (self.count as f64).sqrt()
    }
}

/// Nearest-rank percentile of sorted data, `percent` in 1..=100.
fn nearest_rank(sorted: &[f64], percent: usize) -> f64 {
    let rank = (percent * sorted.len()).div_ceil(100).max(1);
    sorted[rank - 1]
}

pub fn summarize(samples: &[f64]) -> Result<StatsSummary, EmptySample> {
    if samples.is_empty() {
        return Err(EmptySample);
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = samples.len();
    let mean = samples.iter().sum::<f64>() / n as f64;
    let stddev = if n > 1 {
        let ss: f64 = samples.iter().map(|x| (x - mean) * (x - mean)).sum();
        (ss / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    let p50 = nearest_rank(&sorted, 50);
    Ok(StatsSummary {
        count: n,
        mean,
        median: p50,
        stddev,
        p50,
        p90: nearest_rank(&sorted, 90),
        p95: nearest_rank(&sorted, 95),
        p99: nearest_rank(&sorted, 99),
        min: sorted[0],
        max: sorted[n - 1],
    })
}

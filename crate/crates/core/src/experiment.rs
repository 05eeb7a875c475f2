//! One-way and two-way parameter sweeps with replications.
//!
//! Every `(cell, replication)` pair gets its own seed, derived from the
//! sweep's base seed and the cell index, so runs are independent of each
//! other and of the order they execute in. With the `parallel` feature the
//! runs fan out over rayon's pool; results are regrouped in cell order.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::{ConfigError, SimError};
use crate::kernel::derive_seed;
use crate::params::{ParamKey, SimParams};
use crate::sim::{run_simulation, RunResult};
use crate::stats::{summarize, StatsSummary};

/// Output metrics summarized per sweep cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Metric {
    TotalTime,
    FailuresTotal,
    FailuresRandom,
    FailuresSystematic,
    Preemptions,
    AutoRepairs,
    ManualRepairs,
    AvgRunDuration,
    Stalls,
}

impl Metric {
    pub const ALL: [Metric; 9] = [
        Metric::TotalTime,
        Metric::FailuresTotal,
        Metric::FailuresRandom,
        Metric::FailuresSystematic,
        Metric::Preemptions,
        Metric::AutoRepairs,
        Metric::ManualRepairs,
        Metric::AvgRunDuration,
        Metric::Stalls,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::TotalTime => "total_time",
            Metric::FailuresTotal => "failures_total",
            Metric::FailuresRandom => "failures_random",
            Metric::FailuresSystematic => "failures_systematic",
            Metric::Preemptions => "preemptions",
            Metric::AutoRepairs => "auto_repairs",
            Metric::ManualRepairs => "manual_repairs",
            Metric::AvgRunDuration => "avg_run_duration",
            Metric::Stalls => "stalls",
        }
    }

    pub fn value(self, run: &RunResult) -> f64 {
        match self {
            Metric::TotalTime => run.total_time,
            Metric::FailuresTotal => run.failures_total as f64,
            Metric::FailuresRandom => run.failures_random as f64,
            Metric::FailuresSystematic => run.failures_systematic as f64,
            Metric::Preemptions => run.preemptions as f64,
            Metric::AutoRepairs => run.auto_repairs as f64,
            Metric::ManualRepairs => run.manual_repairs as f64,
            Metric::AvgRunDuration => run.avg_run_duration,
            Metric::Stalls => run.stalls as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepAxis {
    pub key: ParamKey,
    pub values: Vec<f64>,
}

impl SweepAxis {
    pub fn new(key: ParamKey, values: Vec<f64>) -> Self {
        Self { key, values }
    }

    pub fn parse(key: &str, values: Vec<f64>) -> Result<Self, ConfigError> {
        Ok(Self::new(key.parse()?, values))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub display_name: String,
    pub primary: SweepAxis,
    pub secondary: Option<SweepAxis>,
    pub replications: u32,
    pub base_seed: u64,
}

impl SweepSpec {
    pub fn one_way(display_name: &str, axis: SweepAxis, replications: u32, base_seed: u64) -> Self {
        Self {
            display_name: display_name.to_owned(),
            primary: axis,
            secondary: None,
            replications,
            base_seed,
        }
    }

    pub fn two_way(
        display_name: &str,
        primary: SweepAxis,
        secondary: SweepAxis,
        replications: u32,
        base_seed: u64,
    ) -> Self {
        Self {
            secondary: Some(secondary),
            ..Self::one_way(display_name, primary, replications, base_seed)
        }
    }

    pub fn keys(&self) -> Vec<ParamKey> {
        std::iter::once(self.primary.key)
            .chain(self.secondary.as_ref().map(|a| a.key))
            .collect()
    }

    /// Parameter assignments of every cell; the second axis varies fastest.
    pub fn cells(&self) -> Vec<Vec<(ParamKey, f64)>> {
        let mut cells = Vec::new();
        for &v in &self.primary.values {
            match &self.secondary {
                None => cells.push(vec![(self.primary.key, v)]),
                Some(axis) => {
                    for &w in &axis.values {
                        cells.push(vec![(self.primary.key, v), (axis.key, w)]);
                    }
                }
            }
        }
        cells
    }

    /// Checks the sweep's shape and returns the fully validated parameters
    /// of every cell.
    pub fn cell_params(&self, base: &SimParams) -> Result<Vec<SimParams>, ConfigError> {
        if self.replications == 0 {
            return Err(ConfigError::Inconsistent("replications must be >= 1".into()));
        }
        for axis in std::iter::once(&self.primary).chain(&self.secondary) {
            if axis.values.is_empty() {
                return Err(ConfigError::Inconsistent(format!(
                    "sweep over `{}` has no values",
                    axis.key
                )));
            }
        }
        if let Some(axis) = &self.secondary {
            if axis.key == self.primary.key {
                return Err(ConfigError::Inconsistent(format!(
                    "two-way sweep uses `{}` twice",
                    axis.key
                )));
            }
        }
        self.cells()
            .into_iter()
            .enumerate()
            .map(|(cell, assignment)| {
                let mut params = base.clone();
                assignment
                    .iter()
                    .try_for_each(|&(key, value)| params.set(key, value))
                    .and_then(|()| params.validate())
                    .map_err(|e| ConfigError::Cell {
                        cell,
                        source: Box::new(e),
                    })?;
                Ok(params)
            })
            .collect()
    }
}

/// Seed shared by all replications of one cell.
pub fn cell_seed(base_seed: u64, cell: usize) -> u64 {
    derive_seed(base_seed, cell as u64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub index: usize,
    pub assignment: Vec<(ParamKey, f64)>,
    pub runs: Vec<RunResult>,
    pub summaries: Vec<(Metric, StatsSummary)>,
}

impl SweepCell {
    fn new(index: usize, assignment: Vec<(ParamKey, f64)>, runs: Vec<RunResult>) -> Self {
        let summaries = Metric::ALL
            .iter()
            .map(|&m| {
                let samples: Vec<f64> = runs.iter().map(|r| m.value(r)).collect();
                (m, summarize(&samples).expect("cells have at least one run"))
            })
            .collect();
        Self {
            index,
            assignment,
            runs,
            summaries,
        }
    }

    pub fn summary(&self, metric: Metric) -> &StatsSummary {
        &self
            .summaries
            .iter()
            .find(|(m, _)| *m == metric)
            .expect("every metric is summarized")
            .1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub spec: SweepSpec,
    pub cells: Vec<SweepCell>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    #[cfg(feature = "parallel")]
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        #[cfg(feature = "parallel")]
        return Execution::Parallel;
        #[cfg(not(feature = "parallel"))]
        return Execution::Sequential;
    }
}

fn run_tasks(
    tasks: &[(usize, u32)],
    params: &[SimParams],
    base_seed: u64,
    execution: Execution,
) -> Result<Vec<RunResult>, SimError> {
    let run = |&(cell, rep): &(usize, u32)| {
        run_simulation(&params[cell], cell_seed(base_seed, cell), u64::from(rep))
    };
    match execution {
        Execution::Sequential => tasks.iter().map(run).collect(),
        #[cfg(feature = "parallel")]
        Execution::Parallel => tasks.par_iter().map(run).collect(),
    }
}

pub fn run_sweep(spec: &SweepSpec, base: &SimParams) -> Result<SweepResult, SimError> {
    run_sweep_with(spec, base, Execution::default())
}

pub fn run_sweep_with(
    spec: &SweepSpec,
    base: &SimParams,
    execution: Execution,
) -> Result<SweepResult, SimError> {
    let params = spec.cell_params(base)?;
    let reps = spec.replications;
    let tasks: Vec<(usize, u32)> = (0..params.len())
        .flat_map(|cell| (0..reps).map(move |rep| (cell, rep)))
        .collect();
    let mut runs = run_tasks(&tasks, &params, spec.base_seed, execution)?.into_iter();
    let cells = spec
        .cells()
        .into_iter()
        .enumerate()
        .map(|(index, assignment)| {
            let cell_runs = runs.by_ref().take(reps as usize).collect();
            SweepCell::new(index, assignment, cell_runs)
        })
        .collect();
    Ok(SweepResult {
        spec: spec.clone(),
        cells,
    })
}

/// Runs a single cell of `spec` on its own. Produces exactly the cell that
/// [`run_sweep`] would.
pub fn run_cell(
    spec: &SweepSpec,
    base: &SimParams,
    index: usize,
    execution: Execution,
) -> Result<SweepCell, SimError> {
    let params = spec.cell_params(base)?;
    let assignment = spec.cells().swap_remove(index);
    let tasks: Vec<(usize, u32)> = (0..spec.replications).map(|rep| (index, rep)).collect();
    let runs = run_tasks(&tasks, &params, spec.base_seed, execution)?;
    Ok(SweepCell::new(index, assignment, runs))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SimParams {
        SimParams {
            job_size: 8,
            warm_standbys: 2,
            working_pool_size: 12,
            spare_pool_size: 4,
            job_length: 2000.0,
            random_failure_rate: 1e-4,
            ..SimParams::default()
        }
    }

    #[test]
    fn one_way_cell_count() {
        let spec = SweepSpec::one_way(
            "Systematic Failure Fraction",
            SweepAxis::parse("systematic_failure_fraction", vec![0.1, 0.15, 0.2]).unwrap(),
            10,
            1,
        );
        let result = run_sweep(&spec, &small()).unwrap();
        assert_eq!(result.cells.len(), 3);
        assert!(result.cells.iter().all(|c| c.runs.len() == 10));
        assert_eq!(result.cells[1].assignment, vec![(ParamKey::SystematicFailureFraction, 0.15)]);
    }

    #[test]
    fn two_way_grid_order() {
        let spec = SweepSpec::two_way(
            "grid",
            SweepAxis::new(ParamKey::RecoveryTime, vec![10.0, 20.0, 30.0]),
            SweepAxis::new(ParamKey::WorkingPoolSize, vec![12.0, 14.0, 16.0]),
            2,
            0,
        );
        let cells = spec.cells();
        assert_eq!(cells.len(), 9);
        assert_eq!(cells[1][1], (ParamKey::WorkingPoolSize, 14.0));
        assert_eq!(cells[3][0], (ParamKey::RecoveryTime, 20.0));
        assert_eq!(run_sweep(&spec, &small()).unwrap().cells.len(), 9);
    }

    #[test]
    fn single_run_cell_mean_is_the_run() {
        let spec = SweepSpec::one_way("one", SweepAxis::new(ParamKey::RecoveryTime, vec![20.0]), 1, 3);
        let result = run_sweep(&spec, &small()).unwrap();
        let cell = &result.cells[0];
        assert_eq!(cell.summary(Metric::TotalTime).mean, cell.runs[0].total_time);
        assert_eq!(cell.summary(Metric::TotalTime).stddev, 0.0);
    }

    #[test]
    fn unknown_key_is_rejected() {
        assert_eq!(
            SweepAxis::parse("no_such_knob", vec![1.0]),
            Err(ConfigError::UnknownKey("no_such_knob".into()))
        );
    }

    #[test]
    fn invalid_value_names_the_cell() {
        let spec = SweepSpec::one_way(
            "rates",
            SweepAxis::new(ParamKey::RandomFailureRate, vec![1e-4, -1.0]),
            1,
            0,
        );
        match run_sweep(&spec, &small()) {
            Err(SimError::Config(ConfigError::Cell { cell: 1, .. })) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn shape_errors() {
        let base = small();
        let empty = SweepSpec::one_way("e", SweepAxis::new(ParamKey::RecoveryTime, vec![]), 1, 0);
        assert!(empty.cell_params(&base).is_err());
        let dup = SweepSpec::two_way(
            "d",
            SweepAxis::new(ParamKey::RecoveryTime, vec![1.0]),
            SweepAxis::new(ParamKey::RecoveryTime, vec![2.0]),
            1,
            0,
        );
        assert!(dup.cell_params(&base).is_err());
        let zero = SweepSpec::one_way("z", SweepAxis::new(ParamKey::RecoveryTime, vec![1.0]), 0, 0);
        assert!(zero.cell_params(&base).is_err());
    }

    #[test]
    fn cell_run_alone_matches_sweep() {
        let spec = SweepSpec::one_way(
            "w",
            SweepAxis::new(ParamKey::WaitingTime, vec![10.0, 20.0, 30.0]),
            4,
            9,
        );
        let full = run_sweep(&spec, &small()).unwrap();
        for index in (0..3).rev() {
            let alone = run_cell(&spec, &small(), index, Execution::Sequential).unwrap();
            assert_eq!(alone, full.cells[index]);
        }
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn parallel_matches_sequential() {
        let spec = SweepSpec::one_way(
            "r",
            SweepAxis::new(ParamKey::RecoveryTime, vec![10.0, 30.0]),
            6,
            5,
        );
        let seq = run_sweep_with(&spec, &small(), Execution::Sequential).unwrap();
        let par = run_sweep_with(&spec, &small(), Execution::Parallel).unwrap();
        assert_eq!(seq, par);
    }
}

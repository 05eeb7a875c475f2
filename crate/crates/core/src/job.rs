//! The training job: its requirements, lifecycle state, and the scheduler
//! decisions that do not need the event loop.

use std::collections::{BTreeSet, VecDeque};

use thiserror::Error;

use crate::cluster::{PoolState, ServerId};
use crate::kernel::{JobId, SimTime};
use crate::params::SimParams;
use crate::repair::Destination;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JobSpec {
    pub job_size: u32,
    pub job_length: f64,
    pub warm_standbys: u32,
    pub recovery_time: f64,
    pub host_selection_time: f64,
    pub waiting_time: f64,
    pub preemption_cost_per_server: f64,
}

impl JobSpec {
    pub fn from_params(params: &SimParams) -> Self {
        Self {
            job_size: params.job_size,
            job_length: params.job_length,
            warm_standbys: params.warm_standbys,
            recovery_time: params.recovery_time,
            host_selection_time: params.host_selection_time,
            waiting_time: params.waiting_time,
            preemption_cost_per_server: params.preemption_cost_per_server,
        }
    }

    /// Servers requested at every host selection.
    pub fn allotment(&self) -> usize {
        self.job_size as usize + self.warm_standbys as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JobPhase {
    HostSelection,
    Computing,
    Recovering,
    AcquiringSpares,
    Stalled,
    Done,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct JobCounters {
    pub failures_random: u64,
    pub failures_systematic: u64,
    pub misdiagnoses: u64,
    pub standby_swaps: u64,
    pub host_selections: u64,
    pub preemptions: u64,
    pub stall_episodes: u64,
    pub compute_segments: u64,
}

impl JobCounters {
    pub fn failures_total(&self) -> u64 {
        self.failures_random + self.failures_systematic
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum JobError {
    #[error("no warm standby left to swap in")]
    NoStandby,
    #[error("{0} is not computing for the job")]
    NotComputing(ServerId),
    #[error("spare pool is empty")]
    EmptySparePool,
}

#[derive(Debug, Clone)]
pub struct JobState {
    pub id: JobId,
    pub phase: JobPhase,
    pub computing: BTreeSet<ServerId>,
    /// FIFO; repaired servers rejoin at the tail.
    pub standbys: VecDeque<ServerId>,
    /// Spare servers reserved by an acquisition still in flight.
    pub pending_spares: Vec<ServerId>,
    pub remaining_length: f64,
    /// Start of the current compute segment.
    pub segment_start: SimTime,
    pub counters: JobCounters,
}

impl JobState {
    pub fn new(id: JobId, spec: &JobSpec) -> Self {
        Self {
            id,
            phase: JobPhase::HostSelection,
            computing: BTreeSet::new(),
            standbys: VecDeque::new(),
            pending_spares: Vec::new(),
            remaining_length: spec.job_length,
            segment_start: SimTime::ZERO,
            counters: JobCounters::default(),
        }
    }

    pub fn is_running(&self) -> bool {
        self.phase != JobPhase::Done
    }

    /// Servers held by the job in any role.
    pub fn assigned_count(&self) -> usize {
        self.computing.len() + self.standbys.len() + self.pending_spares.len()
    }

    /// Computing servers in id order followed by standbys in FIFO order.
    pub fn assigned_servers(&self) -> Vec<ServerId> {
        self.computing
            .iter()
            .chain(self.standbys.iter())
            .copied()
            .collect()
    }

    /// Replaces `departing` with the first standby; returns the newcomer.
    pub fn swap_warm_standby(&mut self, departing: ServerId) -> Result<ServerId, JobError> {
        if !self.computing.contains(&departing) {
            return Err(JobError::NotComputing(departing));
        }
        let incoming = self.standbys.pop_front().ok_or(JobError::NoStandby)?;
        self.computing.remove(&departing);
        self.computing.insert(incoming);
        Ok(incoming)
    }
}

/// A batch of spare servers being preempted for the job.
#[derive(Debug, Clone, PartialEq)]
pub struct SpareAcquisition {
    /// One waiting time covers the whole batch.
    pub delay: f64,
    pub acquired: Vec<ServerId>,
    /// Reported cost only; never added to the clock.
    pub preemption_cost: f64,
}

/// Removes up to `n` servers from the spare pool.
pub fn acquire_from_spare(
    pools: &mut PoolState,
    n: usize,
    spec: &JobSpec,
) -> Result<SpareAcquisition, JobError> {
    if pools.spare.is_empty() {
        return Err(JobError::EmptySparePool);
    }
    let acquired = pools.take_spare(n);
    Ok(SpareAcquisition {
        delay: spec.waiting_time,
        preemption_cost: acquired.len() as f64 * spec.preemption_cost_per_server,
        acquired,
    })
}

/// Where a repaired server is placed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Placement {
    /// Appended to the job's standby tail.
    JobStandby,
    /// Appended to the standby tail, then the stalled job retries its start.
    JobStandbyAndRetry,
    WorkingPool,
    SparePool,
}

pub fn place_repaired(hint: Destination, job: &JobState, pools: &PoolState) -> Placement {
    match hint {
        Destination::ReturnToJob if job.phase == JobPhase::Stalled => Placement::JobStandbyAndRetry,
        Destination::ReturnToJob if job.is_running() => Placement::JobStandby,
        _ if pools.working.len() < pools.working_capacity as usize => Placement::WorkingPool,
        _ => Placement::SparePool,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(v: &[u32]) -> Vec<ServerId> {
        v.iter().copied().map(ServerId).collect()
    }

    fn spec() -> JobSpec {
        JobSpec::from_params(&SimParams::default())
    }

    fn job_with(computing: &[u32], standbys: &[u32]) -> JobState {
        let mut job = JobState::new(JobId(0), &spec());
        job.computing = ids(computing).into_iter().collect();
        job.standbys = ids(standbys).into_iter().collect();
        job.phase = JobPhase::Computing;
        job
    }

    fn pools(working: &[u32], spare: &[u32], capacity: u32) -> PoolState {
        PoolState {
            working: ids(working).into_iter().collect(),
            spare: ids(spare).into_iter().collect(),
            working_capacity: capacity,
            spare_capacity: spare.len() as u32,
            removed_count: 0,
        }
    }

    #[test]
    fn swap_is_fifo() {
        let mut job = job_with(&[10, 11], &[1, 2]);
        assert_eq!(job.swap_warm_standby(ServerId(10)), Ok(ServerId(1)));
        assert_eq!(job.computing, ids(&[1, 11]).into_iter().collect());
        assert_eq!(job.standbys, VecDeque::from(ids(&[2])));
    }

    #[test]
    fn returned_server_used_after_original_standbys() {
        let mut job = job_with(&[10, 11], &[1]);
        job.standbys.push_back(ServerId(99));
        assert_eq!(job.swap_warm_standby(ServerId(10)), Ok(ServerId(1)));
        assert_eq!(job.swap_warm_standby(ServerId(11)), Ok(ServerId(99)));
    }

    #[test]
    fn swap_without_standby_fails() {
        let mut job = job_with(&[10], &[]);
        assert_eq!(job.swap_warm_standby(ServerId(10)), Err(JobError::NoStandby));
        assert!(job.computing.contains(&ServerId(10)));
        assert_eq!(
            job.swap_warm_standby(ServerId(5)),
            Err(JobError::NotComputing(ServerId(5)))
        );
    }

    #[test]
    fn spare_acquisition_is_batched() {
        let spare: Vec<u32> = (1000..1200).collect();
        let mut p = pools(&[], &spare, 0);
        let s = JobSpec {
            preemption_cost_per_server: 2.0,
            ..spec()
        };
        let acq = acquire_from_spare(&mut p, 32, &s).unwrap();
        assert_eq!(acq.delay, 20.0);
        assert_eq!(acq.acquired.len(), 32);
        assert_eq!(acq.preemption_cost, 64.0);
        assert_eq!(p.spare.len(), 168);
    }

    #[test]
    fn spare_shortfall_takes_what_exists() {
        let spare: Vec<u32> = (0..10).collect();
        let mut p = pools(&[], &spare, 0);
        let acq = acquire_from_spare(&mut p, 50, &spec()).unwrap();
        assert_eq!(acq.acquired.len(), 10);
        assert!(p.spare.is_empty());
        assert_eq!(acq.preemption_cost, 0.0);
        assert_eq!(
            acquire_from_spare(&mut p, 1, &spec()),
            Err(JobError::EmptySparePool)
        );
    }

    #[test]
    fn placement_rules() {
        let mut job = job_with(&[1], &[]);
        let p = pools(&[5], &[], 2);
        assert_eq!(
            place_repaired(Destination::ReturnToJob, &job, &p),
            Placement::JobStandby
        );
        job.phase = JobPhase::Stalled;
        assert_eq!(
            place_repaired(Destination::ReturnToJob, &job, &p),
            Placement::JobStandbyAndRetry
        );
        job.phase = JobPhase::Done;
        assert_eq!(
            place_repaired(Destination::ReturnToWorking, &job, &p),
            Placement::WorkingPool
        );
        let full = pools(&[5, 6], &[], 2);
        assert_eq!(
            place_repaired(Destination::ReturnToWorking, &job, &full),
            Placement::SparePool
        );
    }
}

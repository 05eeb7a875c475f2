//! The event loop of one simulation run: coordinator and scheduler logic
//! driving the job through host selection, recovery, computing, failures,
//! spare acquisition and stalls.

use std::collections::HashMap;

use crate::cluster::{Cluster, FailureKind, FailureModel, FailureRecord, Health, ServerId, ServerStatus};
use crate::error::{ConfigError, SimError};
use crate::job::{acquire_from_spare, place_repaired, JobPhase, JobSpec, JobState, Placement};
use crate::kernel::{labels, EventHandle, EventQueue, JobId, RngStream, SimEvent, SimTime, TraceEntry};
use crate::params::SimParams;
use crate::repair::{
    begin_repair, complete_repair, diagnose, record_failure_and_check_removal, PlanId,
    RemovalDecision, RepairOutcome, RepairParams, RepairPlan, RepairStage,
};

/// Relative tolerance for the compute-conservation check.
const COMPUTE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Verify every structural invariant after each event.
    pub check_invariants: bool,
    /// Keep a copy of every delivered event.
    pub record_trace: bool,
}

impl RunOptions {
    pub fn checked() -> Self {
        Self {
            check_invariants: true,
            record_trace: false,
        }
    }
}

/// Counts and drawn durations of every repair plan started in a run.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RepairTally {
    pub plans: u64,
    pub auto_only: u64,
    pub auto_only_resolved: u64,
    pub escalated: u64,
    pub escalated_resolved: u64,
    pub auto_time_sum: f64,
    pub manual_time_sum: f64,
}

impl RepairTally {
    fn record(&mut self, plan: &RepairPlan) {
        self.plans += 1;
        let resolved = u64::from(plan.outcome == RepairOutcome::Resolved);
        self.auto_time_sum += plan.stage_duration(RepairStage::Auto).unwrap_or(0.0);
        if let Some(manual) = plan.stage_duration(RepairStage::Manual) {
            self.escalated += 1;
            self.escalated_resolved += resolved;
            self.manual_time_sum += manual;
        } else {
            self.auto_only += 1;
            self.auto_only_resolved += resolved;
        }
    }
}

/// Outputs of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    /// Clock at completion, including the initial host selection and recovery.
    pub total_time: f64,
    pub failures_total: u64,
    pub failures_random: u64,
    pub failures_systematic: u64,
    pub preemptions: u64,
    pub auto_repairs: u64,
    pub manual_repairs: u64,
    /// `job_length / (failures + 1)`.
    pub avg_run_duration: f64,
    pub stalls: u64,
    pub preemption_cost: f64,
    pub removed_servers: u64,
    pub misdiagnoses: u64,
    pub standby_swaps: u64,
    pub host_selections: u64,
    pub compute_segments: u64,
    /// Sum of all compute time credited to the job.
    pub compute_time: f64,
    /// Integral of the summed hazard of the computing servers over compute
    /// time; the expected failure count given the run's trajectory.
    pub hazard_exposure: f64,
    pub repairs: RepairTally,
}

pub struct Simulation {
    spec: JobSpec,
    model: FailureModel,
    repair: RepairParams,
    queue: EventQueue<SimEvent>,
    cluster: Cluster,
    job: JobState,
    plans: HashMap<PlanId, RepairPlan>,
    next_plan: u64,
    failure_rng: RngStream,
    diagnosis_rng: RngStream,
    repair_rng: RngStream,
    regeneration_rng: RngStream,
    /// The pending failure or completion of the current compute segment.
    segment_event: Option<EventHandle>,
    accrual_start: SimTime,
    computing_hazard: f64,
    compute_time: f64,
    hazard_exposure: f64,
    preemption_cost: f64,
    repairs: RepairTally,
    options: RunOptions,
    trace: Vec<TraceEntry>,
    last_remaining: f64,
    events_processed: u64,
    started: bool,
}

impl Simulation {
    pub fn new(
        params: &SimParams,
        seed: u64,
        replication: u64,
        options: RunOptions,
    ) -> Result<Self, SimError> {
        params.validate()?;
        if u64::from(params.job_size) > params.total_servers() {
            return Err(ConfigError::Inconsistent(format!(
                "job_size ({}) exceeds the {} servers in the cluster",
                params.job_size,
                params.total_servers()
            ))
            .into());
        }
        let stream = |label| RngStream::new(seed, replication, label);
        let cluster = Cluster::build(params, &mut stream(labels::TOPOLOGY))?;
        let spec = JobSpec::from_params(params);
        Ok(Self {
            spec,
            model: FailureModel::from_params(params),
            repair: RepairParams::from_params(params),
            queue: EventQueue::new(),
            cluster,
            job: JobState::new(JobId(0), &spec),
            plans: HashMap::new(),
            next_plan: 0,
            failure_rng: stream(labels::FAILURE),
            diagnosis_rng: stream(labels::DIAGNOSIS),
            repair_rng: stream(labels::REPAIR),
            regeneration_rng: stream(labels::REGENERATION),
            segment_event: None,
            accrual_start: SimTime::ZERO,
            computing_hazard: 0.0,
            compute_time: 0.0,
            hazard_exposure: 0.0,
            preemption_cost: 0.0,
            repairs: RepairTally::default(),
            options,
            trace: Vec::new(),
            last_remaining: spec.job_length,
            events_processed: 0,
            started: false,
        })
    }

    pub fn cluster(&self) -> &Cluster {
        &self.cluster
    }

    pub fn job(&self) -> &JobState {
        &self.job
    }

    pub fn now(&self) -> SimTime {
        self.queue.now()
    }

    pub fn trace(&self) -> &[TraceEntry] {
        &self.trace
    }

    pub fn events_processed(&self) -> u64 {
        self.events_processed
    }

    /// Schedules the first events: the initial host selection and, if
    /// enabled, the first regeneration tick. Called by [`Simulation::run`].
    pub fn start(&mut self) -> Result<(), SimError> {
        if self.started {
            return Ok(());
        }
        self.started = true;
        if let Some(period) = self.model.regeneration_period {
            self.queue.schedule_in(period, SimEvent::RegenerationTick);
        }
        self.start_job();
        self.after_event()
    }

    /// Delivers the next event. `None` once the job is done or nothing is
    /// left to deliver.
    pub fn step(&mut self) -> Result<Option<TraceEntry>, SimError> {
        self.start()?;
        if self.job.phase == JobPhase::Done {
            return Ok(None);
        }
        let Some((time, event)) = self.queue.next_event() else {
            return Ok(None);
        };
        self.events_processed += 1;
        let entry = TraceEntry { time, event };
        if self.options.record_trace {
            self.trace.push(entry);
        }
        self.dispatch(event)?;
        self.after_event()?;
        Ok(Some(entry))
    }

    /// Drives the run until the job completes.
    pub fn run(&mut self) -> Result<RunResult, SimError> {
        while self.step()?.is_some() {}
        if self.job.phase == JobPhase::Done {
            Ok(self.result())
        } else {
            Err(SimError::Deadlock {
                time: self.now().minutes(),
            })
        }
    }

    fn after_event(&mut self) -> Result<(), SimError> {
        if self.job.phase == JobPhase::Stalled && self.plans.is_empty() {
            return Err(SimError::Deadlock {
                time: self.now().minutes(),
            });
        }
        if self.options.check_invariants {
            self.check_invariants()?;
        }
        Ok(())
    }

    fn dispatch(&mut self, event: SimEvent) -> Result<(), SimError> {
        match event {
            SimEvent::ServerFailure { server, kind } => self.on_failure(server, kind)?,
            SimEvent::AutoRepairDone { plan, .. } => self.on_auto_repair_done(plan),
            SimEvent::ManualRepairDone { plan, .. } => self.finish_repair(plan),
            SimEvent::SpareAcquisitionDone { .. } => {
                let arrived = std::mem::take(&mut self.job.pending_spares);
                self.job.standbys.extend(arrived);
                self.begin_host_selection();
            }
            SimEvent::HostSelectionDone { .. } => {
                self.job.phase = JobPhase::Recovering;
                self.queue
                    .schedule_in(self.spec.recovery_time, SimEvent::RecoveryDone { job: self.job.id });
            }
            SimEvent::RecoveryDone { .. } => self.start_computing(),
            SimEvent::RegenerationTick => self.on_regeneration(),
            SimEvent::JobComplete { .. } => self.on_complete(),
        }
        Ok(())
    }

    /// Reserves servers up to the full allotment, working pool first, then
    /// the spare pool; stalls if even the job size cannot be met.
    fn start_job(&mut self) {
        let job_size = self.spec.job_size as usize;
        let pools = &self.cluster.pools;
        let available = self.job.assigned_count() + pools.working.len() + pools.spare.len();
        if available < job_size {
            if self.job.phase != JobPhase::Stalled {
                self.job.counters.stall_episodes += 1;
            }
            self.job.phase = JobPhase::Stalled;
            return;
        }

        let target = self.spec.allotment();
        let wanted = target.saturating_sub(self.job.assigned_count());
        for id in self.cluster.pools.take_working(wanted) {
            self.assign(id);
            self.job.standbys.push_back(id);
        }

        let need = target.saturating_sub(self.job.assigned_count());
        if need > 0 && !self.cluster.pools.spare.is_empty() {
            let acquisition = acquire_from_spare(&mut self.cluster.pools, need, &self.spec)
                .expect("spare pool is nonempty");
            for &id in &acquisition.acquired {
                self.assign(id);
            }
            self.job.counters.preemptions += acquisition.acquired.len() as u64;
            self.preemption_cost += acquisition.preemption_cost;
            self.job.pending_spares = acquisition.acquired;
            self.job.phase = JobPhase::AcquiringSpares;
            self.queue
                .schedule_in(acquisition.delay, SimEvent::SpareAcquisitionDone { job: self.job.id });
        } else {
            self.begin_host_selection();
        }
    }

    fn assign(&mut self, id: ServerId) {
        let job = self.job.id;
        let server = self.cluster.server_mut(id);
        server.set_status(ServerStatus::AssignedStandby);
        server.origin_job = Some(job);
    }

    fn begin_host_selection(&mut self) {
        self.job.phase = JobPhase::HostSelection;
        self.job.counters.host_selections += 1;
        self.queue.schedule_in(
            self.spec.host_selection_time,
            SimEvent::HostSelectionDone { job: self.job.id },
        );
    }

    fn begin_recovery(&mut self) {
        self.job.phase = JobPhase::Recovering;
        self.queue
            .schedule_in(self.spec.recovery_time, SimEvent::RecoveryDone { job: self.job.id });
    }

    fn start_computing(&mut self) {
        let job_size = self.spec.job_size as usize;
        while self.job.computing.len() < job_size {
            let id = self
                .job
                .standbys
                .pop_front()
                .expect("host selection reserved at least job_size servers");
            self.job.computing.insert(id);
        }
        for &id in &self.job.computing {
            self.cluster
                .server_mut(id)
                .set_status(ServerStatus::AssignedComputing);
        }
        debug_assert_eq!(self.job.computing.len(), job_size);
        self.job.phase = JobPhase::Computing;
        self.job.segment_start = self.now();
        self.job.counters.compute_segments += 1;
        self.begin_accrual();
    }

    /// Draws a fresh failure clock for every computing server and schedules
    /// whichever comes first: the earliest failure or job completion.
    /// Ties go to completion.
    fn begin_accrual(&mut self) {
        let now = self.now();
        self.accrual_start = now;
        let mut hazard = 0.0;
        let mut earliest: Option<(f64, ServerId, FailureKind)> = None;
        for &id in &self.job.computing {
            let server = self.cluster.server(id);
            hazard += self.model.hazard(server.health);
            let (delay, kind) = self.model.sample_time_to_failure(server, &mut self.failure_rng);
            if earliest.is_none_or(|(best, _, _)| delay < best) {
                earliest = Some((delay, id, kind));
            }
        }
        self.computing_hazard = hazard;

        let complete_at = now.minutes() + self.job.remaining_length;
        let event = match earliest {
            Some((delay, server, kind)) if now.minutes() + delay < complete_at => {
                self.queue.schedule(now + delay, SimEvent::ServerFailure { server, kind })
            }
            _ => self.queue.schedule(
                SimTime::from_minutes(complete_at),
                SimEvent::JobComplete { job: self.job.id },
            ),
        };
        self.segment_event = Some(event);
    }

    /// Credits compute time since the last accrual start.
    fn accrue(&mut self) {
        let elapsed = self.now() - self.accrual_start;
        self.compute_time += elapsed;
        self.hazard_exposure += self.computing_hazard * elapsed;
        self.job.remaining_length = (self.job.remaining_length - elapsed).max(0.0);
        self.accrual_start = self.now();
    }

    fn on_failure(&mut self, failed: ServerId, kind: FailureKind) -> Result<(), SimError> {
        debug_assert_eq!(self.job.phase, JobPhase::Computing);
        let now = self.now();
        self.segment_event = None;
        self.accrue();
        if self.job.remaining_length == 0.0 {
            // Rounding put the failure on the completion instant.
            self.finish_job();
            return Ok(());
        }

        let server = self.cluster.server_mut(failed);
        if kind == FailureKind::Systematic && server.health != Health::Bad {
            return Err(SimError::Invariant {
                time: now.minutes(),
                message: format!("systematic failure on good server {failed}"),
            });
        }
        server.failure_log.push(FailureRecord { time: now, kind });
        match kind {
            FailureKind::Random => self.job.counters.failures_random += 1,
            FailureKind::Systematic => self.job.counters.failures_systematic += 1,
        }

        let assigned = self.job.assigned_servers();
        let target = diagnose(
            failed,
            &assigned,
            self.repair.diagnosis_uncertainty,
            &mut self.diagnosis_rng,
        );
        if target != failed {
            self.job.counters.misdiagnoses += 1;
        }

        let was_computing = self.job.computing.contains(&target);
        let mut restart = false;
        if was_computing {
            match self.job.swap_warm_standby(target) {
                Ok(incoming) => {
                    self.job.counters.standby_swaps += 1;
                    self.cluster
                        .server_mut(incoming)
                        .set_status(ServerStatus::AssignedComputing);
                }
                Err(_) => {
                    self.job.computing.remove(&target);
                    restart = true;
                }
            }
        } else {
            self.job.standbys.retain(|&s| s != target);
        }

        let server = self.cluster.server_mut(target);
        match record_failure_and_check_removal(server, now, &self.repair) {
            RemovalDecision::Remove => {
                server.set_status(ServerStatus::Removed);
                server.origin_job = None;
                self.cluster.pools.removed_count += 1;
            }
            RemovalDecision::Keep => {
                let id = PlanId(self.next_plan);
                self.next_plan += 1;
                let plan = begin_repair(server, id, now, &self.repair, &mut self.repair_rng);
                self.repairs.record(&plan);
                self.queue.schedule_in(
                    plan.stages[0].1,
                    SimEvent::AutoRepairDone {
                        server: target,
                        plan: id,
                    },
                );
                self.plans.insert(id, plan);
            }
        }

        if restart {
            self.start_job();
        } else {
            self.begin_recovery();
        }
        Ok(())
    }

    fn on_auto_repair_done(&mut self, id: PlanId) {
        let plan = &self.plans[&id];
        match plan.stage_duration(RepairStage::Manual) {
            Some(duration) => {
                let server = plan.server;
                self.cluster
                    .server_mut(server)
                    .set_status(ServerStatus::InManualRepair);
                self.queue
                    .schedule_in(duration, SimEvent::ManualRepairDone { server, plan: id });
            }
            None => self.finish_repair(id),
        }
    }

    fn finish_repair(&mut self, id: PlanId) {
        let plan = self.plans.remove(&id).expect("repair plan in flight");
        let server = self.cluster.server_mut(plan.server);
        let hint = complete_repair(server, &plan, self.job.is_running());
        match place_repaired(hint, &self.job, &self.cluster.pools) {
            Placement::JobStandby => self.return_to_job(plan.server),
            Placement::JobStandbyAndRetry => {
                self.return_to_job(plan.server);
                self.start_job();
            }
            Placement::WorkingPool => {
                let server = self.cluster.server_mut(plan.server);
                server.set_status(ServerStatus::IdleInWorkingPool);
                server.origin_job = None;
                self.cluster.pools.working.insert(plan.server);
            }
            Placement::SparePool => {
                let server = self.cluster.server_mut(plan.server);
                server.set_status(ServerStatus::IdleInSparePool);
                server.origin_job = None;
                self.cluster.pools.spare.insert(plan.server);
            }
        }
    }

    fn return_to_job(&mut self, id: ServerId) {
        self.cluster
            .server_mut(id)
            .set_status(ServerStatus::AssignedStandby);
        self.job.standbys.push_back(id);
    }

    fn on_regeneration(&mut self) {
        let computing = self.job.phase == JobPhase::Computing;
        if computing {
            self.accrue();
            if let Some(handle) = self.segment_event.take() {
                self.queue.cancel(handle);
            }
        }
        self.cluster
            .regenerate_bad_set(self.model.systematic_fraction, &mut self.regeneration_rng);
        if computing {
            self.begin_accrual();
        }
        if let Some(period) = self.model.regeneration_period {
            self.queue.schedule_in(period, SimEvent::RegenerationTick);
        }
    }

    fn on_complete(&mut self) {
        self.segment_event = None;
        self.accrue();
        self.finish_job();
    }

    fn finish_job(&mut self) {
        self.job.remaining_length = 0.0;
        self.job.phase = JobPhase::Done;
    }

    fn result(&self) -> RunResult {
        let c = &self.job.counters;
        let failures = c.failures_total();
        RunResult {
            total_time: self.now().minutes(),
            failures_total: failures,
            failures_random: c.failures_random,
            failures_systematic: c.failures_systematic,
            preemptions: c.preemptions,
            auto_repairs: self.repairs.plans,
            manual_repairs: self.repairs.escalated,
            avg_run_duration: self.spec.job_length / (failures + 1) as f64,
            stalls: c.stall_episodes,
            preemption_cost: self.preemption_cost,
            removed_servers: u64::from(self.cluster.pools.removed_count),
            misdiagnoses: c.misdiagnoses,
            standby_swaps: c.standby_swaps,
            host_selections: c.host_selections,
            compute_segments: c.compute_segments,
            compute_time: self.compute_time,
            hazard_exposure: self.hazard_exposure,
            repairs: self.repairs,
        }
    }

    /// Verifies server conservation, job membership, the computing-size
    /// invariant, repair bookkeeping and compute conservation.
    pub fn check_invariants(&mut self) -> Result<(), SimError> {
        let fail = |message: String| SimError::Invariant {
            time: self.queue.now().minutes(),
            message,
        };
        let counts = self.cluster.check_conservation().map_err(fail)?;

        for &id in &self.job.computing {
            let status = self.cluster.server(id).status;
            if status != ServerStatus::AssignedComputing {
                return Err(fail(format!("{id} is in the computing set with status {status:?}")));
            }
        }
        for &id in self.job.standbys.iter().chain(&self.job.pending_spares) {
            let status = self.cluster.server(id).status;
            if status != ServerStatus::AssignedStandby {
                return Err(fail(format!("{id} is a standby with status {status:?}")));
            }
        }
        if counts.assigned() != self.job.assigned_count() {
            return Err(fail(format!(
                "{} servers assigned but the job holds {}",
                counts.assigned(),
                self.job.assigned_count()
            )));
        }
        if self.job.phase == JobPhase::Computing {
            let size = self.spec.job_size as usize;
            if self.job.computing.len() != size || counts.computing != size {
                return Err(fail(format!(
                    "computing with {} servers ({} by status), job size {size}",
                    self.job.computing.len(),
                    counts.computing
                )));
            }
        }
        if counts.in_repair() != self.plans.len() {
            return Err(fail(format!(
                "{} servers in repair but {} plans in flight",
                counts.in_repair(),
                self.plans.len()
            )));
        }
        if self.job.remaining_length > self.last_remaining {
            return Err(fail("remaining job length increased".into()));
        }
        self.last_remaining = self.job.remaining_length;
        if self.job.phase == JobPhase::Done {
            let drift = (self.compute_time - self.spec.job_length).abs();
            if drift > COMPUTE_TOLERANCE * self.spec.job_length {
                return Err(fail(format!(
                    "compute time {} differs from job length {}",
                    self.compute_time, self.spec.job_length
                )));
            }
        }
        Ok(())
    }
}

/// Runs one replication of `params` with default options.
pub fn run_simulation(params: &SimParams, seed: u64, replication: u64) -> Result<RunResult, SimError> {
    Simulation::new(params, seed, replication, RunOptions::default())?.run()
}

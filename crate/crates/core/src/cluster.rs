//! Servers, their health classes and failure processes, and the working and
//! spare pools.

use std::collections::BTreeSet;
use std::fmt;

use rand::seq::index;

use crate::error::ConfigError;
use crate::kernel::{JobId, RngStream, SimTime};
use crate::params::SimParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ServerId(pub u32);

impl fmt::Display for ServerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Health {
    Good,
    /// Carries a systematic failure process on top of the random one.
    Bad,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ServerStatus {
    IdleInWorkingPool,
    IdleInSparePool,
    AssignedComputing,
    AssignedStandby,
    InAutoRepair,
    InManualRepair,
    Removed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FailureKind {
    Random,
    Systematic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FailureRecord {
    pub time: SimTime,
    pub kind: FailureKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Server {
    pub id: ServerId,
    pub health: Health,
    pub status: ServerStatus,
    pub origin_job: Option<JobId>,
    /// Failures this server actually suffered.
    pub failure_log: Vec<FailureRecord>,
    /// Failures the operator blamed on this server. Differs from
    /// `failure_log` under misdiagnosis; drives the removal score.
    pub attributed_failures: Vec<SimTime>,
}

impl Server {
    fn new(id: ServerId, status: ServerStatus) -> Self {
        Self {
            id,
            health: Health::Good,
            status,
            origin_job: None,
            failure_log: Vec::new(),
            attributed_failures: Vec::new(),
        }
    }

    pub fn is_removed(&self) -> bool {
        self.status == ServerStatus::Removed
    }

    /// Moves the server to `status`. Panics when leaving `Removed`.
    pub fn set_status(&mut self, status: ServerStatus) {
        assert!(
            !self.is_removed() || status == ServerStatus::Removed,
            "{} cannot leave Removed",
            self.id
        );
        self.status = status;
    }
}

/// Idle membership of the working and spare pools.
#[derive(Debug, Clone, PartialEq)]
pub struct PoolState {
    pub working: BTreeSet<ServerId>,
    pub spare: BTreeSet<ServerId>,
    pub working_capacity: u32,
    pub spare_capacity: u32,
    pub removed_count: u32,
}

impl PoolState {
    /// Takes up to `n` idle working-pool servers, lowest ids first.
    pub fn take_working(&mut self, n: usize) -> Vec<ServerId> {
        take_lowest(&mut self.working, n)
    }

    /// Takes up to `n` idle spare-pool servers, lowest ids first.
    pub fn take_spare(&mut self, n: usize) -> Vec<ServerId> {
        take_lowest(&mut self.spare, n)
    }
}

fn take_lowest(set: &mut BTreeSet<ServerId>, n: usize) -> Vec<ServerId> {
    let mut taken = Vec::with_capacity(n.min(set.len()));
    while taken.len() < n {
        match set.pop_first() {
            Some(id) => taken.push(id),
            None => break,
        }
    }
    taken
}

/// Per-minute hazards of the two failure classes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FailureModel {
    pub random_rate: f64,
    /// Additional hazard carried by bad servers.
    pub systematic_rate: f64,
    pub systematic_fraction: f64,
    pub regeneration_period: Option<f64>,
}

impl FailureModel {
    pub fn from_params(params: &SimParams) -> Self {
        Self {
            random_rate: params.random_failure_rate,
            systematic_rate: params.systematic_failure_rate(),
            systematic_fraction: params.systematic_failure_fraction,
            regeneration_period: params.regeneration_period,
        }
    }

    pub fn hazard(&self, health: Health) -> f64 {
        match health {
            Health::Good => self.random_rate,
            Health::Bad => self.random_rate + self.systematic_rate,
        }
    }

    /// Compute time until `server` next fails, and the failure class.
    ///
    /// Bad servers race a random and a systematic clock; the earlier one
    /// wins. The delay is infinite when every applicable rate is zero.
    pub fn sample_time_to_failure(
        &self,
        server: &Server,
        rng: &mut RngStream,
    ) -> (f64, FailureKind) {
        debug_assert_eq!(server.status, ServerStatus::AssignedComputing);
        let random = rng.exponential(self.random_rate);
        match server.health {
            Health::Good => (random, FailureKind::Random),
            Health::Bad => {
                let systematic = rng.exponential(self.systematic_rate);
                if systematic < random {
                    (systematic, FailureKind::Systematic)
                } else {
                    (random, FailureKind::Random)
                }
            }
        }
    }
}

fn bad_count(fraction: f64, population: usize) -> usize {
    ((fraction * population as f64).round() as usize).min(population)
}

fn mark_bad(servers: &mut [Server], candidates: &[usize], fraction: f64, rng: &mut RngStream) {
    let count = bad_count(fraction, candidates.len());
    for pick in index::sample(rng.inner(), candidates.len(), count) {
        servers[candidates[pick]].health = Health::Bad;
    }
}

/// All servers of a run plus pool bookkeeping. `servers[i].id == ServerId(i)`.
#[derive(Debug, Clone)]
pub struct Cluster {
    pub servers: Vec<Server>,
    pub pools: PoolState,
}

impl Cluster {
    /// Creates `working_pool_size + spare_pool_size` idle servers, the first
    /// ones in the working pool, and marks `round(fraction * total)` of them
    /// bad uniformly at random.
    pub fn build(params: &SimParams, rng: &mut RngStream) -> Result<Self, ConfigError> {
        if params.working_pool_size < params.job_size {
            return Err(ConfigError::Inconsistent(format!(
                "working_pool_size ({}) is smaller than job_size ({}); the job can never start",
                params.working_pool_size, params.job_size
            )));
        }
        let working = params.working_pool_size;
        let total = working + params.spare_pool_size;
        let mut servers: Vec<Server> = (0..total)
            .map(|i| {
                let status = if i < working {
                    ServerStatus::IdleInWorkingPool
                } else {
                    ServerStatus::IdleInSparePool
                };
                Server::new(ServerId(i), status)
            })
            .collect();
        let all: Vec<usize> = (0..servers.len()).collect();
        mark_bad(&mut servers, &all, params.systematic_failure_fraction, rng);

        let pools = PoolState {
            working: (0..working).map(ServerId).collect(),
            spare: (working..total).map(ServerId).collect(),
            working_capacity: working,
            spare_capacity: params.spare_pool_size,
            removed_count: 0,
        };
        Ok(Self { servers, pools })
    }

    pub fn server(&self, id: ServerId) -> &Server {
        &self.servers[id.0 as usize]
    }

    pub fn server_mut(&mut self, id: ServerId) -> &mut Server {
        &mut self.servers[id.0 as usize]
    }

    pub fn bad_count(&self) -> usize {
        self.servers
            .iter()
            .filter(|s| s.health == Health::Bad)
            .count()
    }

    /// Re-draws the bad set among live servers. Statuses, assignments,
    /// repairs and failure logs are left alone.
    pub fn regenerate_bad_set(&mut self, fraction: f64, rng: &mut RngStream) {
        let mut live = Vec::with_capacity(self.servers.len());
        for (i, server) in self.servers.iter_mut().enumerate() {
            if !server.is_removed() {
                server.health = Health::Good;
                live.push(i);
            }
        }
        mark_bad(&mut self.servers, &live, fraction, rng);
    }

    /// Number of servers in each status, in declaration order of
    /// [`ServerStatus`].
    pub fn status_counts(&self) -> StatusCounts {
        let mut c = StatusCounts::default();
        for s in &self.servers {
            match s.status {
                ServerStatus::IdleInWorkingPool => c.idle_working += 1,
                ServerStatus::IdleInSparePool => c.idle_spare += 1,
                ServerStatus::AssignedComputing => c.computing += 1,
                ServerStatus::AssignedStandby => c.standby += 1,
                ServerStatus::InAutoRepair => c.auto_repair += 1,
                ServerStatus::InManualRepair => c.manual_repair += 1,
                ServerStatus::Removed => c.removed += 1,
            }
        }
        c
    }

    /// Checks that pool membership agrees with server statuses and that
    /// every server is accounted for exactly once.
    pub fn check_conservation(&self) -> Result<StatusCounts, String> {
        let c = self.status_counts();
        let pools = &self.pools;
        if !pools.working.is_disjoint(&pools.spare) {
            return Err("working and spare pools overlap".into());
        }
        for id in &pools.working {
            if self.server(*id).status != ServerStatus::IdleInWorkingPool {
                return Err(format!("{id} in working pool with status {:?}", self.server(*id).status));
            }
        }
        for id in &pools.spare {
            if self.server(*id).status != ServerStatus::IdleInSparePool {
                return Err(format!("{id} in spare pool with status {:?}", self.server(*id).status));
            }
        }
        if c.idle_working != pools.working.len() || c.idle_spare != pools.spare.len() {
            return Err(format!(
                "idle counts {}/{} disagree with pool sizes {}/{}",
                c.idle_working,
                c.idle_spare,
                pools.working.len(),
                pools.spare.len()
            ));
        }
        if c.removed != pools.removed_count as usize {
            return Err(format!(
                "{} removed servers but removed_count is {}",
                c.removed, pools.removed_count
            ));
        }
        let accounted = pools.working.len()
            + pools.spare.len()
            + c.assigned()
            + c.in_repair()
            + pools.removed_count as usize;
        if accounted != self.servers.len() {
            return Err(format!(
                "conservation broken: {accounted} accounted of {} servers",
                self.servers.len()
            ));
        }
        Ok(c)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StatusCounts {
    pub idle_working: usize,
    pub idle_spare: usize,
    pub computing: usize,
    pub standby: usize,
    pub auto_repair: usize,
    pub manual_repair: usize,
    pub removed: usize,
}

impl StatusCounts {
    pub fn assigned(&self) -> usize {
        self.computing + self.standby
    }

    pub fn in_repair(&self) -> usize {
        self.auto_repair + self.manual_repair
    }
}

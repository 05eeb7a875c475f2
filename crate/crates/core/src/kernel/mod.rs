//! Deterministic discrete-event engine: virtual clock, event queue and
//! seeded random streams.

mod queue;
mod rng;
mod time;

pub use queue::{EventHandle, EventQueue};
pub use rng::{derive_seed, labels, Exponential, Lifetime, RngStream};
pub use time::SimTime;

use crate::cluster::{FailureKind, ServerId};
use crate::repair::PlanId;

/// Identifier of a training job. The simulator runs exactly one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct JobId(pub u32);

/// Everything that can happen in a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SimEvent {
    ServerFailure { server: ServerId, kind: FailureKind },
    AutoRepairDone { server: ServerId, plan: PlanId },
    ManualRepairDone { server: ServerId, plan: PlanId },
    HostSelectionDone { job: JobId },
    RecoveryDone { job: JobId },
    SpareAcquisitionDone { job: JobId },
    RegenerationTick,
    JobComplete { job: JobId },
}

/// One delivered event, as recorded in a run trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEntry {
    pub time: SimTime,
    pub event: SimEvent,
}

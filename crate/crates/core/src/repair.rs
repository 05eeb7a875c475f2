//! Diagnosis, the two-stage repair process, and failure-score removal.
//!
//! Every failure produces exactly one [`RepairPlan`]. A plan always starts
//! with the automated stage; with probability `1 - auto_repair_probability`
//! it escalates to the manual stage once the automated stage has elapsed.
//! The outcome is decided by the last stage's failure probability. An
//! unresolved repair still reports success, so the server comes back with
//! its defect intact.

use crate::cluster::{Health, Server, ServerId, ServerStatus};
use crate::kernel::{RngStream, SimTime};
use crate::params::SimParams;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RepairParams {
    pub auto_repair_probability: f64,
    pub auto_fail_probability: f64,
    pub manual_fail_probability: f64,
    pub auto_mean_time: f64,
    pub manual_mean_time: f64,
    pub diagnosis_uncertainty: f64,
    pub removal_threshold: Option<u32>,
    pub removal_window: Option<f64>,
}

impl RepairParams {
    pub fn from_params(params: &SimParams) -> Self {
        Self {
            auto_repair_probability: params.auto_repair_probability,
            auto_fail_probability: params.auto_fail_probability,
            manual_fail_probability: params.manual_fail_probability,
            auto_mean_time: params.auto_repair_time,
            manual_mean_time: params.manual_repair_time,
            diagnosis_uncertainty: params.diagnosis_uncertainty,
            removal_threshold: params.removal_threshold,
            removal_window: params.removal_window,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PlanId(pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RepairStage {
    Auto,
    Manual,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RepairOutcome {
    Resolved,
    Unresolved,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepairPlan {
    pub id: PlanId,
    pub server: ServerId,
    /// `[Auto]` or `[Auto, Manual]`, with the drawn duration of each.
    pub stages: Vec<(RepairStage, f64)>,
    pub outcome: RepairOutcome,
    pub started_at: SimTime,
}

impl RepairPlan {
    pub fn escalated(&self) -> bool {
        self.stages.len() == 2
    }

    pub fn stage_duration(&self, stage: RepairStage) -> Option<f64> {
        self.stages
            .iter()
            .find(|(s, _)| *s == stage)
            .map(|(_, d)| *d)
    }
}

/// Where a repaired server should go next.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Destination {
    ReturnToJob,
    ReturnToWorking,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RemovalDecision {
    Keep,
    Remove,
}

/// Picks the server that will be sent to repair after `failed` failed.
///
/// `assigned` lists every server assigned to the job, including `failed`,
/// in a deterministic order. With probability `diagnosis_uncertainty` a
/// uniformly chosen other server is blamed instead; if there is no other
/// server the failed one is returned.
pub fn diagnose(
    failed: ServerId,
    assigned: &[ServerId],
    diagnosis_uncertainty: f64,
    rng: &mut RngStream,
) -> ServerId {
    debug_assert!(assigned.contains(&failed));
    if !rng.bernoulli(diagnosis_uncertainty) {
        return failed;
    }
    let others = assigned.len() - usize::from(assigned.contains(&failed));
    if others == 0 {
        return failed;
    }
    let pick = rng.choose_index(others);
    assigned
        .iter()
        .copied()
        .filter(|&s| s != failed)
        .nth(pick)
        .expect("pick is within the other servers")
}

/// Draws the stages, durations and outcome of a fresh repair and moves the
/// server into automated repair.
pub fn begin_repair(
    server: &mut Server,
    id: PlanId,
    now: SimTime,
    params: &RepairParams,
    rng: &mut RngStream,
) -> RepairPlan {
    let escalate = !rng.bernoulli(params.auto_repair_probability);
    let mut stages = vec![(RepairStage::Auto, rng.exponential(1.0 / params.auto_mean_time))];
    let fail_probability = if escalate {
        stages.push((
            RepairStage::Manual,
            rng.exponential(1.0 / params.manual_mean_time),
        ));
        params.manual_fail_probability
    } else {
        params.auto_fail_probability
    };
    let outcome = if rng.bernoulli(fail_probability) {
        RepairOutcome::Unresolved
    } else {
        RepairOutcome::Resolved
    };
    server.set_status(ServerStatus::InAutoRepair);
    RepairPlan {
        id,
        server: server.id,
        stages,
        outcome,
        started_at: now,
    }
}

/// Applies the outcome of a finished plan. A resolved repair fixes a bad
/// server; nothing else changes health.
pub fn complete_repair(server: &mut Server, plan: &RepairPlan, job_running: bool) -> Destination {
    debug_assert_eq!(server.id, plan.server);
    debug_assert!(matches!(
        server.status,
        ServerStatus::InAutoRepair | ServerStatus::InManualRepair
    ));
    if plan.outcome == RepairOutcome::Resolved {
        server.health = Health::Good;
    }
    if server.origin_job.is_some() && job_running {
        Destination::ReturnToJob
    } else {
        Destination::ReturnToWorking
    }
}

/// Records a failure blamed on `server` and decides whether it has failed
/// too often: more than `removal_threshold` times within the window
/// `(now - removal_window, now]`, counting this failure.
pub fn record_failure_and_check_removal(
    server: &mut Server,
    now: SimTime,
    params: &RepairParams,
) -> RemovalDecision {
    server.attributed_failures.push(now);
    let (Some(threshold), Some(window)) = (params.removal_threshold, params.removal_window) else {
        return RemovalDecision::Keep;
    };
    let recent = server
        .attributed_failures
        .iter()
        .rev()
        .take_while(|&&t| now.minutes() - t.minutes() < window)
        .count();
    if recent > threshold as usize {
        RemovalDecision::Remove
    } else {
        RemovalDecision::Keep
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{labels, JobId};

    fn reference() -> RepairParams {
        RepairParams::from_params(&SimParams::default())
    }

    fn server(health: Health) -> Server {
        Server {
            id: ServerId(3),
            health,
            status: ServerStatus::AssignedComputing,
            origin_job: Some(JobId(0)),
            failure_log: Vec::new(),
            attributed_failures: Vec::new(),
        }
    }

    fn t(m: f64) -> SimTime {
        SimTime::from_minutes(m)
    }

    #[test]
    fn certain_diagnosis_blames_failed() {
        let mut rng = RngStream::new(1, 0, labels::DIAGNOSIS);
        let assigned: Vec<_> = (0..4).map(ServerId).collect();
        for _ in 0..100 {
            assert_eq!(diagnose(ServerId(2), &assigned, 0.0, &mut rng), ServerId(2));
        }
    }

    #[test]
    fn misdiagnosis_is_uniform_over_others() {
        let mut rng = RngStream::new(2, 0, labels::DIAGNOSIS);
        let assigned: Vec<_> = (0..4).map(ServerId).collect();
        let trials = 100_000;
        let mut hits = [0u32; 4];
        for _ in 0..trials {
            hits[diagnose(ServerId(1), &assigned, 1.0, &mut rng).0 as usize] += 1;
        }
        assert_eq!(hits[1], 0);
        for i in [0, 2, 3] {
            let share = f64::from(hits[i]) / trials as f64;
            assert!((share - 1.0 / 3.0).abs() < 0.02, "server {i}: {share}");
        }
    }

    #[test]
    fn single_server_job_falls_back_to_failed() {
        let mut rng = RngStream::new(3, 0, labels::DIAGNOSIS);
        assert_eq!(diagnose(ServerId(7), &[ServerId(7)], 1.0, &mut rng), ServerId(7));
    }

    #[test]
    fn plan_proportions_and_durations() {
        let params = reference();
        let mut rng = RngStream::new(4, 0, labels::REPAIR);
        let n = 100_000;
        let (mut auto_only, mut auto_only_resolved, mut auto_sum) = (0u32, 0u32, 0.0);
        for i in 0..n {
            let mut s = server(Health::Bad);
            let plan = begin_repair(&mut s, PlanId(i), t(0.0), &params, &mut rng);
            assert_eq!(s.status, ServerStatus::InAutoRepair);
            assert_eq!(plan.stages[0].0, RepairStage::Auto);
            auto_sum += plan.stages[0].1;
            if !plan.escalated() {
                auto_only += 1;
                if plan.outcome == RepairOutcome::Resolved {
                    auto_only_resolved += 1;
                }
            }
        }
        let auto_share = f64::from(auto_only) / n as f64;
        assert!((auto_share - 0.80).abs() < 0.01, "{auto_share}");
        let resolved = f64::from(auto_only_resolved) / f64::from(auto_only);
        assert!((resolved - 0.60).abs() < 0.01, "{resolved}");
        let mean = auto_sum / n as f64;
        assert!((mean - 120.0).abs() / 120.0 < 0.01, "{mean}");
    }

    #[test]
    fn auto_stage_mean_over_a_million_draws() {
        let params = reference();
        let mut rng = RngStream::new(5, 0, labels::REPAIR);
        let n = 1_000_000;
        let sum: f64 = (0..n)
            .map(|i| {
                let mut s = server(Health::Good);
                begin_repair(&mut s, PlanId(i), t(0.0), &params, &mut rng).stages[0].1
            })
            .sum();
        let mean = sum / n as f64;
        assert!((mean - 120.0).abs() / 120.0 < 0.01, "{mean}");
    }

    fn plan(outcome: RepairOutcome) -> RepairPlan {
        RepairPlan {
            id: PlanId(0),
            server: ServerId(3),
            stages: vec![(RepairStage::Auto, 1.0)],
            outcome,
            started_at: t(0.0),
        }
    }

    #[test]
    fn resolved_fixes_bad_server() {
        let mut s = server(Health::Bad);
        s.status = ServerStatus::InAutoRepair;
        let dest = complete_repair(&mut s, &plan(RepairOutcome::Resolved), true);
        assert_eq!(s.health, Health::Good);
        assert_eq!(dest, Destination::ReturnToJob);
    }

    #[test]
    fn unresolved_keeps_bad_server_bad() {
        let mut s = server(Health::Bad);
        s.status = ServerStatus::InManualRepair;
        complete_repair(&mut s, &plan(RepairOutcome::Unresolved), true);
        assert_eq!(s.health, Health::Bad);
    }

    #[test]
    fn good_server_stays_good() {
        for outcome in [RepairOutcome::Resolved, RepairOutcome::Unresolved] {
            let mut s = server(Health::Good);
            s.status = ServerStatus::InAutoRepair;
            complete_repair(&mut s, &plan(outcome), false);
            assert_eq!(s.health, Health::Good);
        }
    }

    #[test]
    fn finished_job_sends_server_to_working_pool() {
        let mut s = server(Health::Good);
        s.status = ServerStatus::InAutoRepair;
        assert_eq!(
            complete_repair(&mut s, &plan(RepairOutcome::Resolved), false),
            Destination::ReturnToWorking
        );
    }

    #[test]
    fn removal_disabled_always_keeps() {
        let params = reference();
        let mut s = server(Health::Bad);
        for i in 0..100 {
            assert_eq!(
                record_failure_and_check_removal(&mut s, t(f64::from(i)), &params),
                RemovalDecision::Keep
            );
        }
        assert_eq!(s.attributed_failures.len(), 100);
    }

    #[test]
    fn removal_on_fourth_failure_in_window() {
        let params = RepairParams {
            removal_threshold: Some(3),
            removal_window: Some(1440.0),
            ..reference()
        };
        let mut s = server(Health::Bad);
        let decisions: Vec<_> = [100.0, 200.0, 300.0, 400.0]
            .into_iter()
            .map(|m| record_failure_and_check_removal(&mut s, t(m), &params))
            .collect();
        use RemovalDecision::*;
        assert_eq!(decisions, vec![Keep, Keep, Keep, Remove]);
    }

    #[test]
    fn window_excludes_old_failures() {
        let params = RepairParams {
            removal_threshold: Some(1),
            removal_window: Some(1440.0),
            ..reference()
        };
        let mut s = server(Health::Bad);
        assert_eq!(
            record_failure_and_check_removal(&mut s, t(0.0), &params),
            RemovalDecision::Keep
        );
        assert_eq!(
            record_failure_and_check_removal(&mut s, t(2000.0), &params),
            RemovalDecision::Keep
        );
        // Exactly one window apart falls outside the half-open window.
        assert_eq!(
            record_failure_and_check_removal(&mut s, t(3440.0), &params),
            RemovalDecision::Keep
        );
        assert_eq!(
            record_failure_and_check_removal(&mut s, t(3441.0), &params),
            RemovalDecision::Remove
        );
    }

    #[test]
    fn spec_window_example_k3() {
        let params = RepairParams {
            removal_threshold: Some(3),
            removal_window: Some(1440.0),
            ..reference()
        };
        let mut s = server(Health::Bad);
        record_failure_and_check_removal(&mut s, t(0.0), &params);
        assert_eq!(
            record_failure_and_check_removal(&mut s, t(2000.0), &params),
            RemovalDecision::Keep
        );
    }
}

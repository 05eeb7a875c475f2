//! The full simulation knob set.

use std::fmt;
use std::str::FromStr;

use crate::error::ConfigError;

const MINUTES_PER_DAY: f64 = 24.0 * 60.0;

/// Every input of a simulation run, with durations in minutes and rates per
/// minute. `Default` gives the reference capacity-planning configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct SimParams {
    /// Baseline failure rate of every server while computing.
    pub random_failure_rate: f64,
    /// Systematic rate as a multiple of the random rate; applies to bad
    /// servers in addition to the random rate.
    pub systematic_rate_multiplier: f64,
    /// Fraction of servers that are bad.
    pub systematic_failure_fraction: f64,
    pub recovery_time: f64,
    pub job_size: u32,
    /// Failure-free compute time the job needs.
    pub job_length: f64,
    pub warm_standbys: u32,
    pub host_selection_time: f64,
    /// Delay to preempt and provision servers from the spare pool.
    pub waiting_time: f64,
    pub working_pool_size: u32,
    pub spare_pool_size: u32,
    /// Probability the automated repair stage suffices without escalation.
    pub auto_repair_probability: f64,
    pub auto_fail_probability: f64,
    pub manual_fail_probability: f64,
    pub auto_repair_time: f64,
    pub manual_repair_time: f64,
    /// Probability the wrong server is sent to repair.
    pub diagnosis_uncertainty: f64,
    /// Accounting-only cost per preempted spare server.
    pub preemption_cost_per_server: f64,
    pub regeneration_period: Option<f64>,
    pub removal_threshold: Option<u32>,
    pub removal_window: Option<f64>,
    pub base_seed: u64,
    pub replications: u32,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            random_failure_rate: 0.01 / MINUTES_PER_DAY,
            systematic_rate_multiplier: 5.0,
            systematic_failure_fraction: 0.15,
            recovery_time: 20.0,
            job_size: 4096,
            job_length: 256.0 * MINUTES_PER_DAY,
            warm_standbys: 16,
            host_selection_time: 3.0,
            waiting_time: 20.0,
            working_pool_size: 4160,
            spare_pool_size: 200,
            auto_repair_probability: 0.80,
            auto_fail_probability: 0.40,
            manual_fail_probability: 0.20,
            auto_repair_time: 120.0,
            manual_repair_time: 2.0 * MINUTES_PER_DAY,
            diagnosis_uncertainty: 0.0,
            preemption_cost_per_server: 0.0,
            regeneration_period: None,
            removal_threshold: None,
            removal_window: None,
            base_seed: 0,
            replications: 10,
        }
    }
}

/// Names a single field of [`SimParams`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ParamKey {
    RandomFailureRate,
    SystematicRateMultiplier,
    SystematicFailureFraction,
    RecoveryTime,
    JobSize,
    JobLength,
    WarmStandbys,
    HostSelectionTime,
    WaitingTime,
    WorkingPoolSize,
    SparePoolSize,
    AutoRepairProbability,
    AutoFailProbability,
    ManualFailProbability,
    AutoRepairTime,
    ManualRepairTime,
    DiagnosisUncertainty,
    PreemptionCostPerServer,
    RegenerationPeriod,
    RemovalThreshold,
    RemovalWindow,
    BaseSeed,
    Replications,
}

#[derive(Clone, Copy)]
enum Domain {
    Probability,
    NonNegative,
    Positive,
    Count { min: u64, max: u64 },
}

impl ParamKey {
    pub const ALL: [ParamKey; 23] = [
        ParamKey::RandomFailureRate,
        ParamKey::SystematicRateMultiplier,
        ParamKey::SystematicFailureFraction,
        ParamKey::RecoveryTime,
        ParamKey::JobSize,
        ParamKey::JobLength,
        ParamKey::WarmStandbys,
        ParamKey::HostSelectionTime,
        ParamKey::WaitingTime,
        ParamKey::WorkingPoolSize,
        ParamKey::SparePoolSize,
        ParamKey::AutoRepairProbability,
        ParamKey::AutoFailProbability,
        ParamKey::ManualFailProbability,
        ParamKey::AutoRepairTime,
        ParamKey::ManualRepairTime,
        ParamKey::DiagnosisUncertainty,
        ParamKey::PreemptionCostPerServer,
        ParamKey::RegenerationPeriod,
        ParamKey::RemovalThreshold,
        ParamKey::RemovalWindow,
        ParamKey::BaseSeed,
        ParamKey::Replications,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ParamKey::RandomFailureRate => "random_failure_rate",
            ParamKey::SystematicRateMultiplier => "systematic_rate_multiplier",
            ParamKey::SystematicFailureFraction => "systematic_failure_fraction",
            ParamKey::RecoveryTime => "recovery_time",
            ParamKey::JobSize => "job_size",
            ParamKey::JobLength => "job_length",
            ParamKey::WarmStandbys => "warm_standbys",
            ParamKey::HostSelectionTime => "host_selection_time",
            ParamKey::WaitingTime => "waiting_time",
            ParamKey::WorkingPoolSize => "working_pool_size",
            ParamKey::SparePoolSize => "spare_pool_size",
            ParamKey::AutoRepairProbability => "auto_repair_probability",
            ParamKey::AutoFailProbability => "auto_fail_probability",
            ParamKey::ManualFailProbability => "manual_fail_probability",
            ParamKey::AutoRepairTime => "auto_repair_time",
            ParamKey::ManualRepairTime => "manual_repair_time",
            ParamKey::DiagnosisUncertainty => "diagnosis_uncertainty",
            ParamKey::PreemptionCostPerServer => "preemption_cost_per_server",
            ParamKey::RegenerationPeriod => "regeneration_period",
            ParamKey::RemovalThreshold => "removal_threshold",
            ParamKey::RemovalWindow => "removal_window",
            ParamKey::BaseSeed => "base_seed",
            ParamKey::Replications => "replications",
        }
    }

    pub fn is_optional(self) -> bool {
        matches!(
            self,
            ParamKey::RegenerationPeriod | ParamKey::RemovalThreshold | ParamKey::RemovalWindow
        )
    }

    fn domain(self) -> Domain {
        use ParamKey::*;
        match self {
            SystematicFailureFraction
            | AutoRepairProbability
            | AutoFailProbability
            | ManualFailProbability
            | DiagnosisUncertainty => Domain::Probability,
            RandomFailureRate
            | SystematicRateMultiplier
            | RecoveryTime
            | HostSelectionTime
            | WaitingTime
            | PreemptionCostPerServer => Domain::NonNegative,
            JobLength | AutoRepairTime | ManualRepairTime | RegenerationPeriod | RemovalWindow => {
                Domain::Positive
            }
            JobSize | Replications => Domain::Count {
                min: 1,
                max: u32::MAX as u64,
            },
            WarmStandbys | WorkingPoolSize | SparePoolSize | RemovalThreshold => Domain::Count {
                min: 0,
                max: u32::MAX as u64,
            },
            // Seeds above 2^53 cannot be written exactly as a decimal float.
            BaseSeed => Domain::Count {
                min: 0,
                max: 1 << 53,
            },
        }
    }

    fn check(self, value: f64) -> Result<f64, ConfigError> {
        let err = |constraint| ConfigError::OutOfRange {
            key: self.name(),
            value,
            constraint,
        };
        if !value.is_finite() {
            return Err(err("must be finite"));
        }
        match self.domain() {
            Domain::Probability if !(0.0..=1.0).contains(&value) => {
                Err(err("must be a probability in [0, 1]"))
            }
            Domain::NonNegative if value < 0.0 => Err(err("must be >= 0")),
            Domain::Positive if value <= 0.0 => Err(err("must be > 0")),
            Domain::Count { .. } if value.fract() != 0.0 => Err(err("must be an integer")),
            Domain::Count { min, .. } if value < min as f64 => {
                if min == 0 {
                    Err(err("must be >= 0"))
                } else {
                    Err(err("must be >= 1"))
                }
            }
            Domain::Count { max, .. } if value > max as f64 => Err(err("is too large")),
            _ => Ok(value),
        }
    }
}

impl FromStr for ParamKey {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ParamKey::ALL
            .iter()
            .copied()
            .find(|k| k.name() == s)
            .ok_or_else(|| ConfigError::UnknownKey(s.to_owned()))
    }
}

impl fmt::Display for ParamKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl SimParams {
    /// Bad-server hazard on top of the random rate.
    pub fn systematic_failure_rate(&self) -> f64 {
        self.systematic_rate_multiplier * self.random_failure_rate
    }

    pub fn total_servers(&self) -> u64 {
        u64::from(self.working_pool_size) + u64::from(self.spare_pool_size)
    }

    /// Reads a field as a number; `None` for an unset optional field.
    pub fn get(&self, key: ParamKey) -> Option<f64> {
        use ParamKey::*;
        Some(match key {
            RandomFailureRate => self.random_failure_rate,
            SystematicRateMultiplier => self.systematic_rate_multiplier,
            SystematicFailureFraction => self.systematic_failure_fraction,
            RecoveryTime => self.recovery_time,
            JobSize => f64::from(self.job_size),
            JobLength => self.job_length,
            WarmStandbys => f64::from(self.warm_standbys),
            HostSelectionTime => self.host_selection_time,
            WaitingTime => self.waiting_time,
            WorkingPoolSize => f64::from(self.working_pool_size),
            SparePoolSize => f64::from(self.spare_pool_size),
            AutoRepairProbability => self.auto_repair_probability,
            AutoFailProbability => self.auto_fail_probability,
            ManualFailProbability => self.manual_fail_probability,
            AutoRepairTime => self.auto_repair_time,
            ManualRepairTime => self.manual_repair_time,
            DiagnosisUncertainty => self.diagnosis_uncertainty,
            PreemptionCostPerServer => self.preemption_cost_per_server,
            RegenerationPeriod => return self.regeneration_period,
            RemovalThreshold => return self.removal_threshold.map(f64::from),
            RemovalWindow => return self.removal_window,
            BaseSeed => self.base_seed as f64,
            Replications => f64::from(self.replications),
        })
    }

    /// Overrides one field, checking the value against the field's domain.
    /// Cross-field consistency is left to [`SimParams::validate`].
    pub fn set(&mut self, key: ParamKey, value: f64) -> Result<(), ConfigError> {
        use ParamKey::*;
        let v = key.check(value)?;
        match key {
            RandomFailureRate => self.random_failure_rate = v,
            SystematicRateMultiplier => self.systematic_rate_multiplier = v,
            SystematicFailureFraction => self.systematic_failure_fraction = v,
            RecoveryTime => self.recovery_time = v,
            JobSize => self.job_size = v as u32,
            JobLength => self.job_length = v,
            WarmStandbys => self.warm_standbys = v as u32,
            HostSelectionTime => self.host_selection_time = v,
            WaitingTime => self.waiting_time = v,
            WorkingPoolSize => self.working_pool_size = v as u32,
            SparePoolSize => self.spare_pool_size = v as u32,
            AutoRepairProbability => self.auto_repair_probability = v,
            AutoFailProbability => self.auto_fail_probability = v,
            ManualFailProbability => self.manual_fail_probability = v,
            AutoRepairTime => self.auto_repair_time = v,
            ManualRepairTime => self.manual_repair_time = v,
            DiagnosisUncertainty => self.diagnosis_uncertainty = v,
            PreemptionCostPerServer => self.preemption_cost_per_server = v,
            RegenerationPeriod => self.regeneration_period = Some(v),
            RemovalThreshold => self.removal_threshold = Some(v as u32),
            RemovalWindow => self.removal_window = Some(v),
            BaseSeed => self.base_seed = v as u64,
            Replications => self.replications = v as u32,
        }
        Ok(())
    }

    /// Clears an optional field.
    pub fn unset(&mut self, key: ParamKey) -> Result<(), ConfigError> {
        match key {
            ParamKey::RegenerationPeriod => self.regeneration_period = None,
            ParamKey::RemovalThreshold => self.removal_threshold = None,
            ParamKey::RemovalWindow => self.removal_window = None,
            _ => return Err(ConfigError::NotOptional { key: key.name() }),
        }
        Ok(())
    }

    /// Checks every field domain plus the cross-field rules.
    pub fn validate(&self) -> Result<(), ConfigError> {
        for key in ParamKey::ALL {
            if let Some(v) = self.get(key) {
                key.check(v)?;
            }
        }
        if self.working_pool_size < self.job_size {
            return Err(ConfigError::Inconsistent(format!(
                "working_pool_size ({}) is smaller than job_size ({}); the job can never start",
                self.working_pool_size, self.job_size
            )));
        }
        if self.removal_threshold.is_some() != self.removal_window.is_some() {
            return Err(ConfigError::Inconsistent(
                "removal_threshold and removal_window must be set together".into(),
            ));
        }
        Ok(())
    }
}

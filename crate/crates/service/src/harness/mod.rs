//! Scenario driver and latency bench.

pub mod bench;
pub mod model;
pub mod scenario;

use std::fmt;

use quota_core::{AuthContext, DirSpec, LimitsPatch, QuotaError, QuotaLimits, RetentionPolicy};

use crate::service::{QuotaService, ServiceError};
use scenario::{Action, Outcome, Scenario};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepResult {
    pub line: usize,
    pub action: String,
    pub outcome: Outcome,
    pub expect: Option<Outcome>,
}

impl StepResult {
    pub fn passed(&self) -> bool {
        self.expect.is_none_or(|e| e == self.outcome)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Report {
    pub seed: u64,
    pub steps: Vec<StepResult>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.steps.iter().all(StepResult::passed)
    }

    pub fn outcomes(&self) -> Vec<Outcome> {
        self.steps.iter().map(|s| s.outcome).collect()
    }

    pub fn failures(&self) -> usize {
        self.steps.iter().filter(|s| !s.passed()).count()
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "seed {}", self.seed)?;
        for s in &self.steps {
            write!(f, "{:>4} {} -> {}", s.line, s.action, s.outcome)?;
            match s.expect {
                Some(e) if e == s.outcome => writeln!(f, "  PASS")?,
                Some(e) => writeln!(f, "  FAIL (expected {e})")?,
                None => writeln!(f)?,
            }
        }
        let checked = self.steps.iter().filter(|s| s.expect.is_some()).count();
        writeln!(f, "{} steps, {} assertions, {} failed", self.steps.len(), checked, self.failures())
    }
}

fn outcome_of<T>(r: Result<T, ServiceError>) -> Outcome {
    match r {
        Ok(_) => Outcome::Ok,
        Err(e) if e.is_quota_exceeded() => Outcome::Denied,
        Err(_) => Outcome::Error,
    }
}

/// Executes one action against the service as an admin caller.
pub fn apply(service: &QuotaService, action: &Action) -> Outcome {
    let admin = AuthContext::admin("harness", 0, 0);
    match action {
        Action::Mkdir { path, uid, gid, policy } => {
            let spec = DirSpec { uid: *uid, gid: *gid, default_retention_policy: *policy, default_access_latency: None };
            outcome_of(service.create_directory(path, spec, &admin))
        }
        Action::Create { path, uid, gid, policy, size } => {
            let created = service.create_entry(path, *uid, *gid, *policy, None, &admin);
            let created = match (created, size) {
                (Ok(f), Some(size)) => service.commit_size(f.id, *size),
                (other, _) => other,
            };
            match outcome_of(created) {
                Outcome::Ok => Outcome::Allowed,
                other => other,
            }
        }
        Action::Commit { path, size } => outcome_of(
            service
                .stat(path)
                .and_then(|e| service.commit_size(e.id(), *size)),
        ),
        Action::Remove { path } => outcome_of(service.remove_entry(path, &admin)),
        Action::Scan => outcome_of(service.run_scan_now()),
        Action::SetLimit { key, limits } => {
            let full = limits.iter().fold(QuotaLimits::UNLIMITED, |acc, (p, v)| acc.with(*p, *v));
            match service.put_quota(*key, full, &admin) {
                Err(ServiceError::Quota(QuotaError::AlreadyExists(_))) => {
                    let mut patch = LimitsPatch::default();
                    for (p, v) in limits {
                        match p {
                            RetentionPolicy::Custodial => patch.custodial = Some(*v),
                            RetentionPolicy::Replica => patch.replica = Some(*v),
                            RetentionPolicy::Output => patch.output = Some(*v),
                        }
                    }
                    outcome_of(service.modify_quota(*key, &patch, &admin))
                }
                other => outcome_of(other),
            }
        }
        Action::UnsetLimit { key } => outcome_of(service.remove_quota(*key, &admin)),
        Action::Check { uid, gid, policy } => {
            if service.check(*uid, *gid, *policy).is_allowed() { Outcome::Allowed } else { Outcome::Denied }
        }
    }
}

/// Runs every step on a fresh in-memory service.
pub fn run_scenario(scenario: &Scenario) -> Report {
    let service = QuotaService::in_memory();
    let steps = scenario
        .steps
        .iter()
        .map(|step| StepResult {
            line: step.line,
            action: step.action.to_string(),
            outcome: apply(&service, &step.action),
            expect: step.expect,
        })
        .collect();
    Report { seed: scenario.seed, steps }
}

/// The write-past-limit / remove-past-limit sequence, with expectations.
pub const LAG_SCENARIO: &str = include_str!("../../scenarios/lag.scn");

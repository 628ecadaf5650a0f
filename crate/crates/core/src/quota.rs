//! Quota limits, cached usage and the create-time check.
//!
//! A [`QuotaTable`] is one immutable generation of the quota cache: the
//! configured limits of every scope plus the usage produced by the scan
//! whose sequence number is the table's generation. Mutations return a new
//! table; the service publishes tables atomically so a reader always sees
//! limits and usage from exactly one generation.

use alloc::string::ToString;
use alloc::vec::Vec;
use core::fmt;

use hashbrown::HashMap;

use crate::policy::RetentionPolicy;
use crate::scan::ScanReport;

/// Whether a quota applies to a user or a group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum ScopeKind {
    /// Keyed by UID.
    User,
    /// Keyed by GID.
    Group,
}

impl ScopeKind {
    /// Lower-case name used on the wire.
    pub fn as_str(self) -> &'static str {
        match self {
            Self::User => "user",
            Self::Group => "group",
        }
    }
}

impl fmt::Display for ScopeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Identifies one quota scope.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct QuotaKey {
    /// User or group.
    #[cfg_attr(feature = "serde", serde(rename = "type"))]
    pub kind: ScopeKind,
    /// UID or GID.
    pub id: u32,
}

impl QuotaKey {
    /// Key for a user quota.
    pub const fn user(uid: u32) -> Self {
        Self { kind: ScopeKind::User, id: uid }
    }

    /// Key for a group quota.
    pub const fn group(gid: u32) -> Self {
        Self { kind: ScopeKind::Group, id: gid }
    }
}

impl fmt::Display for QuotaKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.kind, self.id)
    }
}

/// Byte ceilings per retention policy. `None` is unlimited.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "camelCase"))]
pub struct QuotaLimits {
    /// Ceiling for CUSTODIAL files.
    #[cfg_attr(feature = "serde", serde(rename = "custodialLimit"))]
    pub custodial: Option<u64>,
    /// Ceiling for REPLICA files.
    #[cfg_attr(feature = "serde", serde(rename = "replicaLimit"))]
    pub replica: Option<u64>,
    /// Ceiling for OUTPUT files.
    #[cfg_attr(feature = "serde", serde(rename = "outputLimit"))]
    pub output: Option<u64>,
}

impl QuotaLimits {
    /// No ceiling on any policy.
    pub const UNLIMITED: QuotaLimits = QuotaLimits { custodial: None, replica: None, output: None };

    /// Limit for one policy.
    pub fn limit(&self, policy: RetentionPolicy) -> Option<u64> {
        match policy {
            RetentionPolicy::Replica => self.replica,
            RetentionPolicy::Custodial => self.custodial,
            RetentionPolicy::Output => self.output,
        }
    }

    /// Returns a copy with one policy's limit replaced.
    pub fn with(mut self, policy: RetentionPolicy, limit: Option<u64>) -> Self {
        *self.slot(policy) = limit;
        self
    }

    fn slot(&mut self, policy: RetentionPolicy) -> &mut Option<u64> {
        match policy {
            RetentionPolicy::Replica => &mut self.replica,
            RetentionPolicy::Custodial => &mut self.custodial,
            RetentionPolicy::Output => &mut self.output,
        }
    }

    /// Validates signed input (as received over the wire).
    pub fn from_signed(
        custodial: Option<i64>,
        replica: Option<i64>,
        output: Option<i64>,
    ) -> Result<Self, QuotaError> {
        Ok(Self {
            custodial: non_negative(RetentionPolicy::Custodial, custodial)?,
            replica: non_negative(RetentionPolicy::Replica, replica)?,
            output: non_negative(RetentionPolicy::Output, output)?,
        })
    }
}

fn non_negative(policy: RetentionPolicy, value: Option<i64>) -> Result<Option<u64>, QuotaError> {
    match value {
        None => Ok(None),
        Some(v) => u64::try_from(v).map(Some).map_err(|_| QuotaError::InvalidLimit { policy, value: v }),
    }
}

/// Partial update of [`QuotaLimits`].
///
/// The outer `Option` says whether the field is being changed at all; the
/// inner one is the new value, `None` meaning unlimited.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LimitsPatch {
    /// New CUSTODIAL limit, if changing.
    pub custodial: Option<Option<u64>>,
    /// New REPLICA limit, if changing.
    pub replica: Option<Option<u64>>,
    /// New OUTPUT limit, if changing.
    pub output: Option<Option<u64>>,
}

impl LimitsPatch {
    /// Patch changing a single policy.
    pub fn set(policy: RetentionPolicy, limit: Option<u64>) -> Self {
        let mut patch = Self::default();
        match policy {
            RetentionPolicy::Replica => patch.replica = Some(limit),
            RetentionPolicy::Custodial => patch.custodial = Some(limit),
            RetentionPolicy::Output => patch.output = Some(limit),
        }
        patch
    }

    /// Overlays the supplied fields onto `limits`.
    pub fn apply(&self, limits: QuotaLimits) -> QuotaLimits {
        QuotaLimits {
            custodial: self.custodial.unwrap_or(limits.custodial),
            replica: self.replica.unwrap_or(limits.replica),
            output: self.output.unwrap_or(limits.output),
        }
    }

    /// Turns every supplied field into a full limit set, absent fields unlimited.
    pub fn into_limits(self) -> QuotaLimits {
        self.apply(QuotaLimits::UNLIMITED)
    }
}

/// Aggregated bytes per retention policy, as of one scan.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "camelCase"))]
pub struct QuotaUsage {
    /// Bytes in CUSTODIAL files.
    #[cfg_attr(feature = "serde", serde(rename = "custodialSpaceUsed"))]
    pub custodial_used: u64,
    /// Bytes in REPLICA files.
    #[cfg_attr(feature = "serde", serde(rename = "replicaSpaceUsed"))]
    pub replica_used: u64,
    /// Bytes in OUTPUT files.
    #[cfg_attr(feature = "serde", serde(rename = "outputSpaceUsed"))]
    pub output_used: u64,
    /// Sequence number of the scan that produced these numbers; 0 before any scan.
    pub as_of_scan: u64,
}

impl QuotaUsage {
    /// Zero usage stamped with a scan sequence.
    pub fn zero(as_of_scan: u64) -> Self {
        Self { as_of_scan, ..Self::default() }
    }

    /// Bytes used under one policy.
    pub fn used(&self, policy: RetentionPolicy) -> u64 {
        match policy {
            RetentionPolicy::Replica => self.replica_used,
            RetentionPolicy::Custodial => self.custodial_used,
            RetentionPolicy::Output => self.output_used,
        }
    }

    /// Adds bytes to one policy's total, saturating.
    pub fn add(&mut self, policy: RetentionPolicy, bytes: u64) {
        let slot = match policy {
            RetentionPolicy::Replica => &mut self.replica_used,
            RetentionPolicy::Custodial => &mut self.custodial_used,
            RetentionPolicy::Output => &mut self.output_used,
        };
        *slot = slot.saturating_add(bytes);
    }

    fn is_zero(&self) -> bool {
        self.custodial_used == 0 && self.replica_used == 0 && self.output_used == 0
    }
}

/// Limits and usage for one scope: the value type of the quota cache.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Quota {
    /// Scope this quota belongs to.
    pub key: QuotaKey,
    /// Configured limits; `None` when no quota was ever put for the key, in
    /// which case the entry only carries informational usage.
    pub limits: Option<QuotaLimits>,
    /// Last aggregated usage.
    pub usage: QuotaUsage,
}

impl Quota {
    // Scopes with neither limits nor usage are not cached.
    fn is_retained(&self) -> bool {
        self.limits.is_some() || !self.usage.is_zero()
    }

    /// The denial for a create under `policy`, if this scope is at or over its limit.
    pub fn exceeded(&self, policy: RetentionPolicy) -> Option<Denial> {
        let limit = self.limits?.limit(policy)?;
        let used = self.usage.used(policy);
        (used >= limit).then_some(Denial { key: self.key, policy, used, limit })
    }
}

/// Why a create was refused.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Denial {
    /// Scope that is full.
    pub key: QuotaKey,
    /// Policy of the attempted create.
    pub policy: RetentionPolicy,
    /// Cached usage at decision time.
    pub used: u64,
    /// Configured limit.
    pub limit: u64,
}

impl fmt::Display for Denial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} usage {} has reached limit {}", self.key, self.policy, self.used, self.limit)
    }
}

/// Outcome of [`QuotaTable::check`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    /// Create may proceed.
    Allow,
    /// Create must fail with "Quota exceeded".
    Deny(Denial),
}

impl Decision {
    /// True for `Allow`.
    pub fn is_allowed(&self) -> bool {
        matches!(self, Decision::Allow)
    }
}

/// Errors from quota administration.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum QuotaError {
    /// `put` on a key that already has limits.
    #[error("quota for {0} already exists")]
    AlreadyExists(QuotaKey),
    /// No such quota.
    #[error("quota for {0} not found")]
    NotFound(QuotaKey),
    /// A negative limit was supplied.
    #[error("invalid {policy} limit {value}: limits must be non-negative")]
    InvalidLimit {
        /// Offending policy.
        policy: RetentionPolicy,
        /// Offending value.
        value: i64,
    },
    /// A scan report not newer than the current generation.
    #[error("stale scan report {report}: current generation is {current}")]
    StaleReport {
        /// Report's sequence number.
        report: u64,
        /// Current generation.
        current: u64,
    },
}

/// One generation of the quota cache.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct QuotaTable {
    generation: u64,
    entries: HashMap<QuotaKey, Quota>,
}

impl QuotaTable {
    /// Empty table at generation 0.
    pub fn new() -> Self {
        Self::default()
    }

    /// Rebuilds a table from persisted limits and usage.
    pub fn restore(
        generation: u64,
        limits: impl IntoIterator<Item = (QuotaKey, QuotaLimits)>,
        usage: impl IntoIterator<Item = (QuotaKey, QuotaUsage)>,
    ) -> Self {
        let mut entries: HashMap<QuotaKey, Quota> = HashMap::new();
        for (key, usage) in usage {
            entries.insert(key, Quota { key, limits: None, usage });
        }
        for (key, limits) in limits {
            entries
                .entry(key)
                .or_insert(Quota { key, limits: None, usage: QuotaUsage::zero(generation) })
                .limits = Some(limits);
        }
        entries.retain(|_, q| q.is_retained());
        Self { generation, entries }
    }

    /// Sequence number of the scan whose usage this table holds.
    pub fn generation(&self) -> u64 {
        self.generation
    }

    /// Number of cached scopes.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    /// True when nothing is cached.
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Cached quota for a key, whether it carries limits, usage or both.
    pub fn get(&self, key: &QuotaKey) -> Option<&Quota> {
        self.entries.get(key)
    }

    /// Allow/deny for a new file owned by `uid`/`gid` under `policy`.
    ///
    /// Denies when either the user or the group scope has limits and its
    /// cached usage is at or above the limit for `policy`. The incoming
    /// file's size is not considered.
    pub fn check(&self, uid: u32, gid: u32, policy: RetentionPolicy) -> Decision {
        self.check_counted(uid, gid, policy).0
    }

    /// [`check`](Self::check) that also reports how many map lookups it made.
    pub fn check_counted(&self, uid: u32, gid: u32, policy: RetentionPolicy) -> (Decision, u32) {
        let user = self.entries.get(&QuotaKey::user(uid));
        let group = self.entries.get(&QuotaKey::group(gid));
        let denial = user
            .and_then(|q| q.exceeded(policy))
            .or_else(|| group.and_then(|q| q.exceeded(policy)));
        (denial.map_or(Decision::Allow, Decision::Deny), 2)
    }

    /// New table with limits added for a key that has none.
    pub fn put_limits(&self, key: QuotaKey, limits: QuotaLimits) -> Result<(Self, Quota), QuotaError> {
        if self.entries.get(&key).is_some_and(|q| q.limits.is_some()) {
            return Err(QuotaError::AlreadyExists(key));
        }
        let mut next = self.clone();
        let quota = next
            .entries
            .entry(key)
            .or_insert(Quota { key, limits: None, usage: QuotaUsage::zero(self.generation) });
        quota.limits = Some(limits);
        let quota = *quota;
        Ok((next, quota))
    }

    /// New table with the supplied fields of `patch` changed.
    pub fn modify_limits(&self, key: QuotaKey, patch: &LimitsPatch) -> Result<(Self, Quota), QuotaError> {
        let Some(current) = self.entries.get(&key).and_then(|q| q.limits) else {
            return Err(QuotaError::NotFound(key));
        };
        let mut next = self.clone();
        let quota = next.entries.get_mut(&key).expect("present in source table");
        quota.limits = Some(patch.apply(current));
        let quota = *quota;
        Ok((next, quota))
    }

    /// New table with the key's limits removed. Usage stays cached while non-zero.
    pub fn remove_limits(&self, key: QuotaKey) -> Result<(Self, Quota), QuotaError> {
        let Some(removed) = self.entries.get(&key).filter(|q| q.limits.is_some()).copied() else {
            return Err(QuotaError::NotFound(key));
        };
        let mut next = self.clone();
        let quota = next.entries.get_mut(&key).expect("present in source table");
        quota.limits = None;
        if !quota.is_retained() {
            next.entries.remove(&key);
        }
        Ok((next, removed))
    }

    /// New generation with usage replaced by `report`.
    ///
    /// Limits are carried over. Scopes with limits but absent from the report
    /// get zero usage; scopes with neither are dropped.
    pub fn apply_report(&self, report: &ScanReport) -> Result<Self, QuotaError> {
        if report.scan_seq <= self.generation {
            return Err(QuotaError::StaleReport { report: report.scan_seq, current: self.generation });
        }
        let seq = report.scan_seq;
        let mut entries: HashMap<QuotaKey, Quota> = HashMap::with_capacity(self.entries.len());
        for q in self.entries.values().filter(|q| q.limits.is_some()) {
            entries.insert(q.key, Quota { key: q.key, limits: q.limits, usage: QuotaUsage::zero(seq) });
        }
        for (&(key, policy), &bytes) in report.usage.iter() {
            entries
                .entry(key)
                .or_insert(Quota { key, limits: None, usage: QuotaUsage::zero(seq) })
                .usage
                .add(policy, bytes);
        }
        entries.retain(|_, q| q.is_retained());
        Ok(Self { generation: seq, entries })
    }

    /// All cached quotas of one kind, ordered by the decimal string form of the id.
    pub fn list(&self, kind: ScopeKind) -> Vec<Quota> {
        let mut out: Vec<Quota> = self.entries.values().filter(|q| q.key.kind == kind).copied().collect();
        out.sort_by_cached_key(|q| q.key.id.to_string());
        out
    }

    /// Configured limits, in key order.
    pub fn limits(&self) -> Vec<(QuotaKey, QuotaLimits)> {
        let mut out: Vec<_> = self.entries.values().filter_map(|q| Some((q.key, q.limits?))).collect();
        out.sort_unstable_by_key(|(k, _)| *k);
        out
    }

    /// Cached usage, in key order, for every scope that has any.
    pub fn usage(&self) -> Vec<(QuotaKey, QuotaUsage)> {
        let mut out: Vec<_> = self.entries.values().map(|q| (q.key, q.usage)).collect();
        out.sort_unstable_by_key(|(k, _)| *k);
        out
    }
}

//! JSON shapes shared by the REST API, the CLI and the journal.

use quota_core::{
    AccessLatency, Entry, EntryId, LimitsPatch, Quota, QuotaError, QuotaKey, QuotaLimits, QuotaUsage,
    RetentionPolicy, ScanReport, ScopeKind,
};
use serde::{Deserialize, Deserializer, Serialize};

/// One quota as returned by the REST API.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct QuotaJson {
    pub id: u32,
    #[serde(rename = "type")]
    pub kind: ScopeKind,
    pub custodial_limit: Option<u64>,
    pub replica_limit: Option<u64>,
    pub output_limit: Option<u64>,
    pub custodial_space_used: u64,
    pub replica_space_used: u64,
    pub output_space_used: u64,
    pub as_of_scan: u64,
}

impl From<&Quota> for QuotaJson {
    fn from(q: &Quota) -> Self {
        let limits = q.limits.unwrap_or_default();
        Self {
            id: q.key.id,
            kind: q.key.kind,
            custodial_limit: limits.custodial,
            replica_limit: limits.replica,
            output_limit: limits.output,
            custodial_space_used: q.usage.custodial_used,
            replica_space_used: q.usage.replica_used,
            output_space_used: q.usage.output_used,
            as_of_scan: q.usage.as_of_scan,
        }
    }
}

impl QuotaJson {
    pub fn limit(&self, policy: RetentionPolicy) -> Option<u64> {
        match policy {
            RetentionPolicy::Custodial => self.custodial_limit,
            RetentionPolicy::Replica => self.replica_limit,
            RetentionPolicy::Output => self.output_limit,
        }
    }

    pub fn used(&self, policy: RetentionPolicy) -> u64 {
        match policy {
            RetentionPolicy::Custodial => self.custodial_space_used,
            RetentionPolicy::Replica => self.replica_space_used,
            RetentionPolicy::Output => self.output_space_used,
        }
    }
}

/// Body of `POST /quota/{kind}/{id}`. Missing fields are unlimited.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct LimitsBody {
    #[serde(default)]
    pub custodial_limit: Option<i64>,
    #[serde(default)]
    pub replica_limit: Option<i64>,
    #[serde(default)]
    pub output_limit: Option<i64>,
}

impl LimitsBody {
    pub fn validate(&self) -> Result<QuotaLimits, QuotaError> {
        QuotaLimits::from_signed(self.custodial_limit, self.replica_limit, self.output_limit)
    }
}

fn present<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Option<i64>>, D::Error> {
    Option::<i64>::deserialize(d).map(Some)
}

/// Body of `PATCH /quota/{kind}/{id}`.
///
/// An absent field is left alone, `null` sets it to unlimited.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct PatchBody {
    #[serde(default, deserialize_with = "present", skip_serializing_if = "Option::is_none")]
    pub custodial_limit: Option<Option<i64>>,
    #[serde(default, deserialize_with = "present", skip_serializing_if = "Option::is_none")]
    pub replica_limit: Option<Option<i64>>,
    #[serde(default, deserialize_with = "present", skip_serializing_if = "Option::is_none")]
    pub output_limit: Option<Option<i64>>,
}

impl PatchBody {
    pub fn validate(&self) -> Result<LimitsPatch, QuotaError> {
        let field = |policy, v: Option<Option<i64>>| -> Result<Option<Option<u64>>, QuotaError> {
            match v {
                None => Ok(None),
                Some(inner) => {
                    let limits = QuotaLimits::from_signed(inner, None, None).map_err(|e| match e {
                        QuotaError::InvalidLimit { value, .. } => QuotaError::InvalidLimit { policy, value },
                        other => other,
                    })?;
                    Ok(Some(limits.custodial))
                }
            }
        };
        Ok(LimitsPatch {
            custodial: field(RetentionPolicy::Custodial, self.custodial_limit)?,
            replica: field(RetentionPolicy::Replica, self.replica_limit)?,
            output: field(RetentionPolicy::Output, self.output_limit)?,
        })
    }
}

/// One (scope, policy) bucket of a scan report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct UsageRow {
    #[serde(rename = "type")]
    pub kind: ScopeKind,
    pub id: u32,
    pub retention_policy: RetentionPolicy,
    pub bytes: u64,
}

/// A scan report as returned by `POST /admin/scan`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ScanReportJson {
    pub scan_seq: u64,
    pub started_at: u64,
    pub finished_at: u64,
    pub entries_scanned: u64,
    pub usage: Vec<UsageRow>,
}

impl From<&ScanReport> for ScanReportJson {
    fn from(r: &ScanReport) -> Self {
        Self {
            scan_seq: r.scan_seq,
            started_at: r.started_at,
            finished_at: r.finished_at,
            entries_scanned: r.entries_scanned,
            usage: r
                .usage
                .iter()
                .map(|(&(key, policy), &bytes)| UsageRow { kind: key.kind, id: key.id, retention_policy: policy, bytes })
                .collect(),
        }
    }
}

/// Completion marker of one scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ScanMark {
    pub scan_seq: u64,
    pub started_at: u64,
    pub finished_at: u64,
    pub entries_scanned: u64,
}

impl From<&ScanReport> for ScanMark {
    fn from(r: &ScanReport) -> Self {
        Self { scan_seq: r.scan_seq, started_at: r.started_at, finished_at: r.finished_at, entries_scanned: r.entries_scanned }
    }
}

/// Limits of one scope; `limits: null` records a removal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LimitRecord {
    #[serde(flatten)]
    pub key: QuotaKey,
    pub limits: Option<QuotaLimits>,
}

/// Cached usage of one scope.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UsageRecordRow {
    #[serde(flatten)]
    pub key: QuotaKey,
    #[serde(flatten)]
    pub usage: QuotaUsage,
}

/// Usage generation produced by one scan.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct UsageSnapshot {
    pub scan_seq: u64,
    pub usage: Vec<UsageRecordRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RemoveRecord {
    pub id: EntryId,
}

/// A namespace entry with its absolute path.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntryJson {
    pub path: String,
    #[serde(flatten)]
    pub entry: Entry,
}

/// Body of `PUT /ns/files/{path}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct CreateFileBody {
    pub uid: u32,
    pub gid: u32,
    #[serde(default, alias = "policy")]
    pub retention_policy: Option<RetentionPolicy>,
    #[serde(default)]
    pub access_latency: Option<AccessLatency>,
    #[serde(default)]
    pub size: Option<u64>,
}

/// Body of `PUT /ns/dirs/{path}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct CreateDirBody {
    pub uid: u32,
    pub gid: u32,
    #[serde(default)]
    pub default_retention_policy: Option<RetentionPolicy>,
    #[serde(default)]
    pub default_access_latency: Option<AccessLatency>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
}

//! Usage aggregation over namespace entries.

use alloc::collections::BTreeMap;
use core::time::Duration;

use crate::namespace::FileEntry;
use crate::policy::RetentionPolicy;
use crate::quota::QuotaKey;

/// Total bytes per (scope, retention policy).
pub type UsageMap = BTreeMap<(QuotaKey, RetentionPolicy), u64>;

/// Result of one full aggregation pass.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScanReport {
    /// Strictly increasing scan number.
    pub scan_seq: u64,
    /// Start time, milliseconds since the Unix epoch.
    pub started_at: u64,
    /// Finish time, milliseconds since the Unix epoch.
    pub finished_at: u64,
    /// Number of file entries folded into `usage`.
    pub entries_scanned: u64,
    /// Aggregated usage. Directories never appear.
    pub usage: UsageMap,
}

/// Accumulates file sizes into per-scope buckets.
///
/// Every file contributes its size twice: once to `(USER, uid, policy)` and
/// once to `(GROUP, gid, policy)`.
#[derive(Debug, Clone, Default)]
pub struct Aggregator {
    entries: u64,
    usage: UsageMap,
}

impl Aggregator {
    /// Empty accumulator.
    pub fn new() -> Self {
        Self::default()
    }

    /// Folds one file in.
    pub fn add(&mut self, file: &FileEntry) {
        self.entries += 1;
        for key in [QuotaKey::user(file.uid), QuotaKey::group(file.gid)] {
            let slot = self.usage.entry((key, file.retention_policy)).or_insert(0);
            *slot = slot.saturating_add(file.size_bytes);
        }
    }

    /// Files folded so far.
    pub fn entries(&self) -> u64 {
        self.entries
    }

    /// Seals the pass into a report.
    pub fn finish(self, scan_seq: u64, started_at: u64, finished_at: u64) -> ScanReport {
        ScanReport { scan_seq, started_at, finished_at, entries_scanned: self.entries, usage: self.usage }
    }
}

impl<'a> Extend<&'a FileEntry> for Aggregator {
    fn extend<I: IntoIterator<Item = &'a FileEntry>>(&mut self, iter: I) {
        iter.into_iter().for_each(|f| self.add(f));
    }
}

/// Errors from scan scheduling.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ScanError {
    /// Another scan holds the scan slot.
    #[error("a scan is already in progress")]
    InProgress,
    /// Zero interval.
    #[error("scan interval must be positive")]
    InvalidInterval,
}

/// How often periodic scans fire.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScanSchedule {
    interval: Duration,
    /// Whether the periodic scanner runs at all.
    pub enabled: bool,
}

impl ScanSchedule {
    /// Default interval between scan starts.
    pub const DEFAULT_INTERVAL: Duration = Duration::from_secs(60);

    /// Enabled schedule with the given interval.
    pub fn new(interval: Duration) -> Result<Self, ScanError> {
        if interval.is_zero() {
            return Err(ScanError::InvalidInterval);
        }
        Ok(Self { interval, enabled: true })
    }

    /// Time between scan starts.
    pub fn interval(&self) -> Duration {
        self.interval
    }
}

impl Default for ScanSchedule {
    fn default() -> Self {
        Self { interval: Self::DEFAULT_INTERVAL, enabled: true }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::namespace::EntryId;
    use crate::policy::AccessLatency;
    use alloc::string::String;

    fn file(id: u64, uid: u32, gid: u32, policy: RetentionPolicy, size: u64) -> FileEntry {
        FileEntry {
            id: EntryId(id),
            parent_id: EntryId::ROOT,
            name: String::from("f"),
            uid,
            gid,
            size_bytes: size,
            retention_policy: policy,
            access_latency: AccessLatency::Online,
            created_at: id,
        }
    }

    #[test]
    fn empty_pass() {
        let r = Aggregator::new().finish(1, 0, 0);
        assert_eq!(r.entries_scanned, 0);
        assert!(r.usage.is_empty());
    }

    #[test]
    fn same_owner_sums_into_user_and_group() {
        let files = [file(2, 1000, 2000, RetentionPolicy::Custodial, 5), file(3, 1000, 2000, RetentionPolicy::Custodial, 7)];
        let mut agg = Aggregator::new();
        agg.extend(files.iter());
        let r = agg.finish(1, 0, 0);
        assert_eq!(r.entries_scanned, 2);
        assert_eq!(r.usage[&(QuotaKey::user(1000), RetentionPolicy::Custodial)], 12);
        assert_eq!(r.usage[&(QuotaKey::group(2000), RetentionPolicy::Custodial)], 12);
        assert_eq!(r.usage.len(), 2);
    }

    #[test]
    fn policies_are_separate_buckets() {
        let files = [file(2, 1, 1, RetentionPolicy::Replica, 3), file(3, 1, 1, RetentionPolicy::Custodial, 5)];
        let mut agg = Aggregator::new();
        agg.extend(files.iter());
        let r = agg.finish(1, 0, 0);
        assert_eq!(r.usage[&(QuotaKey::user(1), RetentionPolicy::Replica)], 3);
        assert_eq!(r.usage[&(QuotaKey::user(1), RetentionPolicy::Custodial)], 5);
    }

    #[test]
    fn zero_interval_rejected() {
        assert_eq!(ScanSchedule::new(Duration::ZERO), Err(ScanError::InvalidInterval));
        assert_eq!(ScanSchedule::new(Duration::from_millis(100)).unwrap().interval(), Duration::from_millis(100));
    }
}

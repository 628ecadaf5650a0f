//! Storage namespace model with user- and group-based quota accounting.
//!
//! This crate holds the allocation-only parts of the quota system: the
//! single-rooted [`namespace::Namespace`] tree, the [`quota::QuotaTable`]
//! that answers allow/deny on file creation, and the [`scan::Aggregator`]
//! that sums file sizes by owner and retention policy. It has no IO, no
//! clock and no threads; the `quota-service` crate wraps it with
//! concurrency, persistence and the network surfaces.
//!
//! Usage numbers only change when a scan report is applied. Creating or
//! removing files never touches usage, so enforcement deliberately lags
//! behind the true state of the namespace by up to one scan interval.

#![no_std]
#![deny(missing_docs)]

extern crate alloc;

pub mod auth;
pub mod namespace;
pub mod policy;
pub mod quota;
pub mod scan;

pub use auth::{AuthContext, Role};
pub use namespace::{
    DirSpec, DirectoryEntry, Entry, EntryId, FileEntry, FileSpec, Namespace, NamespaceError,
    PlannedFile,
};
pub use policy::{AccessLatency, ParsePolicyError, RetentionPolicy};
pub use quota::{
    Decision, Denial, LimitsPatch, Quota, QuotaError, QuotaKey, QuotaLimits, QuotaTable,
    QuotaUsage, ScopeKind,
};
pub use scan::{Aggregator, ScanError, ScanReport, ScanSchedule, UsageMap};

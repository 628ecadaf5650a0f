//! The quota-enforcing namespace service.
//!
//! Wraps the core [`Namespace`] and the generation-swapped [`QuotaCache`]
//! with locking, authorization and journaling. Lock order is namespace,
//! then cache writer, then journal; every path that takes more than one
//! follows it.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, MutexGuard, PoisonError, RwLock, RwLockReadGuard, RwLockWriteGuard};
use std::time::{SystemTime, UNIX_EPOCH};

use quota_core::{
    AccessLatency, Aggregator, AuthContext, Decision, DirSpec, DirectoryEntry, Entry, EntryId, FileEntry,
    FileSpec, LimitsPatch, Namespace, NamespaceError, Quota, QuotaError, QuotaKey, QuotaLimits, QuotaTable,
    RetentionPolicy, ScanError, ScanReport, ScopeKind,
};

use crate::cache::QuotaCache;
use crate::store::{Journal, Mutation, StateDump, StoreError, StoreOptions};
use crate::wire::{LimitRecord, ScanMark, UsageRecordRow, UsageSnapshot};

/// Files copied out of the namespace per read-lock acquisition while iterating.
const ITER_CHUNK: usize = 256;

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("authentication required")]
    Unauthenticated,
    #[error("admin privileges required")]
    Forbidden,
    #[error(transparent)]
    Namespace(#[from] NamespaceError),
    #[error(transparent)]
    Quota(#[from] QuotaError),
    #[error(transparent)]
    Scan(#[from] ScanError),
    #[error(transparent)]
    Store(#[from] StoreError),
}

impl ServiceError {
    pub fn is_quota_exceeded(&self) -> bool {
        matches!(self, ServiceError::Namespace(NamespaceError::QuotaExceeded(_)))
    }
}

pub type Result<T, E = ServiceError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, Default)]
pub struct ServiceOptions {
    pub store: StoreOptions,
    /// Compact the journal after a scan once it holds this many records.
    pub compact_after: Option<u64>,
}

#[derive(Debug, Default)]
struct CreateProbes {
    creates: AtomicU64,
    cache_lookups: AtomicU64,
    traversals: AtomicU64,
    max_traversals: AtomicU64,
}

/// Counters instrumenting the create path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CreateStats {
    /// `create_entry` calls that reached the quota check.
    pub creates: u64,
    /// Quota cache lookups made by those calls.
    pub cache_lookups: u64,
    /// Namespace-wide traversals started by those calls.
    pub traversals: u64,
    /// Largest traversal count of a single call.
    pub max_traversals_per_create: u64,
}

fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(PoisonError::into_inner)
}

fn require_auth(caller: &AuthContext) -> Result<()> {
    if caller.is_authenticated() { Ok(()) } else { Err(ServiceError::Unauthenticated) }
}

fn require_admin(caller: &AuthContext) -> Result<()> {
    require_auth(caller)?;
    if caller.is_admin() { Ok(()) } else { Err(ServiceError::Forbidden) }
}

#[derive(Debug)]
pub struct QuotaService {
    namespace: RwLock<Namespace>,
    cache: QuotaCache,
    journal: Option<Mutex<Journal>>,
    scan_slot: Mutex<()>,
    last_scan: Mutex<Option<ScanMark>>,
    probes: CreateProbes,
    compact_after: Option<u64>,
}

impl QuotaService {
    /// A service with no persistence.
    pub fn in_memory() -> Self {
        Self::from_parts(Namespace::new(), QuotaTable::new(), None, None, None)
    }

    fn from_parts(
        namespace: Namespace,
        table: QuotaTable,
        last_scan: Option<ScanMark>,
        journal: Option<Journal>,
        compact_after: Option<u64>,
    ) -> Self {
        Self {
            namespace: RwLock::new(namespace),
            cache: QuotaCache::new(table),
            journal: journal.map(Mutex::new),
            scan_slot: Mutex::new(()),
            last_scan: Mutex::new(last_scan),
            probes: CreateProbes::default(),
            compact_after,
        }
    }

    /// Restores state from `dir` (created if missing) and journals to it.
    ///
    /// Usage is restored from the last persisted scan, so enforcement is in
    /// effect before any new scan runs.
    pub fn open(dir: &Path, options: ServiceOptions) -> Result<Self> {
        let (journal, replayed) = Journal::open(dir, options.store)?;
        let table = replayed.state.table();
        tracing::info!(
            dir = %dir.display(),
            snapshot = ?replayed.snapshot_seq,
            records = replayed.records,
            generation = table.generation(),
            files = replayed.state.namespace.file_count(),
            "store replayed"
        );
        let last_scan = replayed.state.last_scan;
        Ok(Self::from_parts(replayed.state.namespace, table, last_scan, Some(journal), options.compact_after))
    }

    fn ns_read(&self) -> RwLockReadGuard<'_, Namespace> {
        self.namespace.read().unwrap_or_else(PoisonError::into_inner)
    }

    fn ns_write(&self) -> RwLockWriteGuard<'_, Namespace> {
        self.namespace.write().unwrap_or_else(PoisonError::into_inner)
    }

    fn persist(&self, mutations: &[Mutation]) -> Result<(), StoreError> {
        match &self.journal {
            Some(j) => lock(j).append_all(mutations).map(|_| ()),
            None => Ok(()),
        }
    }

    // ---- namespace ----

    /// Creates a file entry if neither the owner's user nor group quota is full.
    ///
    /// The check reads one cached generation and nothing else; usage is not
    /// recomputed and the new file's size (unknown yet) is not considered.
    pub fn create_entry(
        &self,
        path: &str,
        uid: u32,
        gid: u32,
        retention_policy: Option<RetentionPolicy>,
        access_latency: Option<AccessLatency>,
        caller: &AuthContext,
    ) -> Result<FileEntry> {
        require_auth(caller)?;
        let mut ns = self.ns_write();
        let traversals_before = ns.traversals();
        let planned = ns.plan_file(path, FileSpec { uid, gid, retention_policy, access_latency })?;
        let (decision, lookups) = self.cache.check(uid, gid, planned.entry.retention_policy);
        let traversed = ns.traversals() - traversals_before;
        self.probes.creates.fetch_add(1, Ordering::Relaxed);
        self.probes.cache_lookups.fetch_add(u64::from(lookups), Ordering::Relaxed);
        self.probes.traversals.fetch_add(traversed, Ordering::Relaxed);
        self.probes.max_traversals.fetch_max(traversed, Ordering::Relaxed);
        if let Decision::Deny(denial) = decision {
            tracing::debug!(%path, %denial, "create refused");
            return Err(NamespaceError::QuotaExceeded(denial).into());
        }
        let entry = Entry::File(planned.entry);
        self.persist(std::slice::from_ref(&Mutation::NsEntry(entry.clone())))?;
        ns.insert(entry.clone())?;
        match entry {
            Entry::File(f) => Ok(f),
            Entry::Directory(_) => unreachable!(),
        }
    }

    pub fn create_directory(&self, path: &str, spec: DirSpec, caller: &AuthContext) -> Result<DirectoryEntry> {
        require_auth(caller)?;
        let mut ns = self.ns_write();
        let dir = ns.plan_directory(path, spec)?;
        let entry = Entry::Directory(dir.clone());
        self.persist(&[Mutation::NsEntry(entry.clone())])?;
        ns.insert(entry)?;
        Ok(dir)
    }

    /// Records a file's final size. Quota usage is untouched until the next scan.
    pub fn commit_size(&self, id: EntryId, size_bytes: u64) -> Result<FileEntry> {
        let mut ns = self.ns_write();
        let mut updated = match ns.file(id) {
            Some(f) => f.clone(),
            None if ns.get(id).is_some() => return Err(NamespaceError::NotAFile(id).into()),
            None => return Err(NamespaceError::NotFound(id.to_string()).into()),
        };
        updated.size_bytes = size_bytes;
        self.persist(&[Mutation::NsEntry(Entry::File(updated))])?;
        Ok(ns.commit_size(id, size_bytes)?)
    }

    /// Removes a file or empty directory. Quota usage is untouched until the next scan.
    pub fn remove_entry(&self, path: &str, caller: &AuthContext) -> Result<Entry> {
        require_auth(caller)?;
        let mut ns = self.ns_write();
        let id = ns.plan_remove(path)?.id();
        self.persist(&[Mutation::NsRemove(id)])?;
        Ok(ns.remove_id(id)?)
    }

    pub fn stat(&self, path: &str) -> Result<Entry> {
        Ok(self.ns_read().stat(path)?)
    }

    pub fn list(&self, path: &str) -> Result<Vec<Entry>> {
        Ok(self.ns_read().list(path)?)
    }

    pub fn path_of(&self, id: EntryId) -> Option<String> {
        self.ns_read().path_of(id)
    }

    /// Every file entry present when the call was made, read in chunks.
    ///
    /// Files created afterwards are not yielded; none is yielded twice.
    /// Writers are only blocked for the duration of one chunk copy.
    pub fn iterate_entries(&self) -> EntryStream<'_> {
        let upto = self.ns_read().high_water();
        EntryStream { service: self, upto, cursor: None, chunk: Vec::new().into_iter(), done: false }
    }

    // ---- quotas ----

    pub fn put_quota(&self, key: QuotaKey, limits: QuotaLimits, caller: &AuthContext) -> Result<Quota> {
        require_admin(caller)?;
        self.cache.update(
            |t| Ok(t.put_limits(key, limits)?),
            |_, q| Ok(self.persist(&[Mutation::Limit(LimitRecord { key, limits: q.limits })])?),
        )
    }

    pub fn modify_quota(&self, key: QuotaKey, patch: &LimitsPatch, caller: &AuthContext) -> Result<Quota> {
        require_admin(caller)?;
        self.cache.update(
            |t| Ok(t.modify_limits(key, patch)?),
            |_, q| Ok(self.persist(&[Mutation::Limit(LimitRecord { key, limits: q.limits })])?),
        )
    }

    /// Deletes a scope's limits. Its usage keeps being aggregated.
    pub fn remove_quota(&self, key: QuotaKey, caller: &AuthContext) -> Result<Quota> {
        require_admin(caller)?;
        self.cache.update(
            |t| Ok(t.remove_limits(key)?),
            |_, _| Ok(self.persist(&[Mutation::Limit(LimitRecord { key, limits: None })])?),
        )
    }

    pub fn get_quota(&self, key: QuotaKey, caller: &AuthContext) -> Result<Quota> {
        require_auth(caller)?;
        self.cache.snapshot().get(&key).copied().ok_or_else(|| QuotaError::NotFound(key).into())
    }

    /// All known quotas of a kind, ordered by decimal id string.
    pub fn list_quotas(&self, kind: ScopeKind, caller: &AuthContext) -> Result<Vec<Quota>> {
        require_auth(caller)?;
        Ok(self.cache.snapshot().list(kind))
    }

    pub fn check(&self, uid: u32, gid: u32, policy: RetentionPolicy) -> Decision {
        self.cache.check(uid, gid, policy).0
    }

    /// The current cache generation.
    pub fn cache_snapshot(&self) -> Arc<QuotaTable> {
        self.cache.snapshot()
    }

    // ---- scanning ----

    /// Replaces all cached usage with `report` and persists it. Returns the new generation.
    pub fn apply_scan(&self, report: &ScanReport) -> Result<u64> {
        let mark = ScanMark::from(report);
        self.cache.update(
            |t| Ok((t.apply_report(report)?, ())),
            |next, _| {
                let usage = next.usage().into_iter().map(|(key, usage)| UsageRecordRow { key, usage }).collect();
                self.persist(&[
                    Mutation::Usage(UsageSnapshot { scan_seq: report.scan_seq, usage }),
                    Mutation::ScanMark(mark),
                ])?;
                *lock(&self.last_scan) = Some(mark);
                Ok::<_, ServiceError>(())
            },
        )?;
        Ok(report.scan_seq)
    }

    /// One full aggregation pass, applied to the cache.
    pub fn run_scan_now(&self) -> Result<ScanReport> {
        let report = {
            let _slot = self.scan_slot.try_lock().map_err(|_| ScanError::InProgress)?;
            let seq = self.cache.generation() + 1;
            let started_at = now_ms();
            let mut agg = Aggregator::new();
            for file in self.iterate_entries() {
                agg.add(&file);
            }
            let report = agg.finish(seq, started_at, now_ms());
            self.apply_scan(&report)?;
            report
        };
        tracing::debug!(seq = report.scan_seq, entries = report.entries_scanned, "scan applied");
        self.maybe_compact()?;
        Ok(report)
    }

    pub fn last_scan(&self) -> Option<ScanMark> {
        *lock(&self.last_scan)
    }

    // ---- persistence ----

    /// Snapshots the full state and truncates the journal. No-op without a store.
    pub fn compact(&self) -> Result<()> {
        let Some(journal) = &self.journal else { return Ok(()) };
        let ns = self.ns_read();
        self.cache.with_writer_locked(|table| {
            let dump = StateDump::capture(&ns, table, *lock(&self.last_scan));
            lock(journal).compact(&dump).map(|_| ())
        })?;
        Ok(())
    }

    fn maybe_compact(&self) -> Result<()> {
        let (Some(threshold), Some(journal)) = (self.compact_after, &self.journal) else { return Ok(()) };
        if lock(journal).records() >= threshold {
            self.compact()?;
        }
        Ok(())
    }

    /// Consistent copy of the whole state.
    pub fn dump(&self) -> StateDump {
        let ns = self.ns_read();
        self.cache.with_writer_locked(|table| StateDump::capture(&ns, table, *lock(&self.last_scan)))
    }

    /// Hash of [`dump`](Self::dump); equal hashes mean equal state.
    pub fn state_hash(&self) -> u64 {
        let mut h = DefaultHasher::new();
        serde_json::to_vec(&self.dump()).expect("state serializes").hash(&mut h);
        h.finish()
    }

    pub fn create_stats(&self) -> CreateStats {
        CreateStats {
            creates: self.probes.creates.load(Ordering::Relaxed),
            cache_lookups: self.probes.cache_lookups.load(Ordering::Relaxed),
            traversals: self.probes.traversals.load(Ordering::Relaxed),
            max_traversals_per_create: self.probes.max_traversals.load(Ordering::Relaxed),
        }
    }

    pub fn file_count(&self) -> usize {
        self.ns_read().file_count()
    }
}

/// Chunked iterator returned by [`QuotaService::iterate_entries`].
pub struct EntryStream<'a> {
    service: &'a QuotaService,
    upto: EntryId,
    cursor: Option<EntryId>,
    chunk: std::vec::IntoIter<FileEntry>,
    done: bool,
}

impl Iterator for EntryStream<'_> {
    type Item = FileEntry;

    fn next(&mut self) -> Option<FileEntry> {
        loop {
            if let Some(f) = self.chunk.next() {
                return Some(f);
            }
            if self.done {
                return None;
            }
            let chunk = self.service.ns_read().files_between(self.cursor, self.upto, ITER_CHUNK);
            self.done = chunk.len() < ITER_CHUNK;
            if let Some(last) = chunk.last() {
                self.cursor = Some(last.id);
            }
            self.chunk = chunk.into_iter();
        }
    }
}

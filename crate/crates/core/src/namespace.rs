//! Single-rooted namespace of directories and file entries.
//!
//! File creation is split into a plan step and an insert step so the caller
//! can run the quota check (and anything else, such as journaling) between
//! validation and mutation. [`Namespace::create_file`] strings the two
//! together around a gate closure.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::sync::atomic::{AtomicU64, Ordering};

use crate::policy::{AccessLatency, RetentionPolicy};
use crate::quota::Denial;

/// Unique identifier of a namespace entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct EntryId(pub u64);

impl EntryId {
    /// The root directory. It is its own parent.
    pub const ROOT: EntryId = EntryId(1);
}

impl fmt::Display for EntryId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A file in the namespace.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "camelCase"))]
pub struct FileEntry {
    /// Entry id.
    pub id: EntryId,
    /// Containing directory.
    pub parent_id: EntryId,
    /// Path component.
    pub name: String,
    /// Owner UID.
    pub uid: u32,
    /// Owner GID.
    pub gid: u32,
    /// Logical size; 0 until committed.
    pub size_bytes: u64,
    /// Accounting class, fixed at creation.
    pub retention_policy: RetentionPolicy,
    /// Availability class, fixed at creation.
    pub access_latency: AccessLatency,
    /// Monotonic creation sequence number.
    pub created_at: u64,
}

/// A directory in the namespace. Directories have no size.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "camelCase"))]
pub struct DirectoryEntry {
    /// Entry id.
    pub id: EntryId,
    /// Containing directory; the root points at itself.
    pub parent_id: EntryId,
    /// Path component; empty for the root.
    pub name: String,
    /// Owner UID.
    pub uid: u32,
    /// Owner GID.
    pub gid: u32,
    /// Policy for children created without one.
    pub default_retention_policy: RetentionPolicy,
    /// Latency for children created without one.
    pub default_access_latency: AccessLatency,
    /// Monotonic creation sequence number.
    pub created_at: u64,
}

/// Either kind of namespace entry.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "lowercase"))]
pub enum Entry {
    /// A file.
    File(FileEntry),
    /// A directory.
    Directory(DirectoryEntry),
}

impl Entry {
    /// Entry id.
    pub fn id(&self) -> EntryId {
        match self {
            Entry::File(f) => f.id,
            Entry::Directory(d) => d.id,
        }
    }

    /// Containing directory.
    pub fn parent_id(&self) -> EntryId {
        match self {
            Entry::File(f) => f.parent_id,
            Entry::Directory(d) => d.parent_id,
        }
    }

    /// Path component.
    pub fn name(&self) -> &str {
        match self {
            Entry::File(f) => &f.name,
            Entry::Directory(d) => &d.name,
        }
    }

    fn created_at(&self) -> u64 {
        match self {
            Entry::File(f) => f.created_at,
            Entry::Directory(d) => d.created_at,
        }
    }

    /// The file, if this is one.
    pub fn as_file(&self) -> Option<&FileEntry> {
        match self {
            Entry::File(f) => Some(f),
            Entry::Directory(_) => None,
        }
    }
}

/// Parameters of a new file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FileSpec {
    /// Owner UID.
    pub uid: u32,
    /// Owner GID.
    pub gid: u32,
    /// Explicit policy; falls back to the parent directory's default.
    pub retention_policy: Option<RetentionPolicy>,
    /// Explicit latency; falls back to the parent directory's default.
    pub access_latency: Option<AccessLatency>,
}

impl FileSpec {
    /// Owner only, policy and latency from the directory.
    pub fn owned_by(uid: u32, gid: u32) -> Self {
        Self { uid, gid, retention_policy: None, access_latency: None }
    }

    /// Sets an explicit retention policy.
    pub fn policy(mut self, policy: RetentionPolicy) -> Self {
        self.retention_policy = Some(policy);
        self
    }
}

/// Parameters of a new directory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DirSpec {
    /// Owner UID.
    pub uid: u32,
    /// Owner GID.
    pub gid: u32,
    /// Default policy for children; inherited from the parent when absent.
    pub default_retention_policy: Option<RetentionPolicy>,
    /// Default latency for children; inherited from the parent when absent.
    pub default_access_latency: Option<AccessLatency>,
}

impl DirSpec {
    /// Owner only, defaults inherited.
    pub fn owned_by(uid: u32, gid: u32) -> Self {
        Self { uid, gid, default_retention_policy: None, default_access_latency: None }
    }
}

/// A validated create that has not been inserted yet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlannedFile {
    /// The entry as it will be inserted.
    pub entry: FileEntry,
}

/// Namespace errors.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum NamespaceError {
    /// Path is not absolute or has an empty, `.` or `..` component.
    #[error("invalid path: {0}")]
    InvalidPath(String),
    /// Path or id does not exist.
    #[error("not found: {0}")]
    NotFound(String),
    /// A child with that name already exists.
    #[error("already exists: {0}")]
    AlreadyExists(String),
    /// A path component that must be a directory is a file.
    #[error("not a directory: {0}")]
    NotADirectory(String),
    /// The id names a directory.
    #[error("not a file: {0}")]
    NotAFile(EntryId),
    /// Directory still has children.
    #[error("directory not empty: {0}")]
    DirectoryNotEmpty(String),
    /// The quota check refused the create.
    #[error("Quota exceeded")]
    QuotaExceeded(Denial),
    /// A replayed entry does not fit the tree.
    #[error("inconsistent entry {0}")]
    Inconsistent(EntryId),
}

#[derive(Debug, Clone)]
struct DirNode {
    meta: DirectoryEntry,
    children: BTreeMap<String, EntryId>,
}

/// The namespace tree.
#[derive(Debug)]
pub struct Namespace {
    dirs: BTreeMap<EntryId, DirNode>,
    files: BTreeMap<EntryId, FileEntry>,
    next_id: u64,
    clock: u64,
    traversals: AtomicU64,
}

impl Default for Namespace {
    fn default() -> Self {
        Self::new()
    }
}

impl Clone for Namespace {
    fn clone(&self) -> Self {
        Self {
            dirs: self.dirs.clone(),
            files: self.files.clone(),
            next_id: self.next_id,
            clock: self.clock,
            traversals: AtomicU64::new(self.traversals()),
        }
    }
}

fn split(path: &str) -> Result<Vec<&str>, NamespaceError> {
    let Some(rest) = path.strip_prefix('/') else {
        return Err(NamespaceError::InvalidPath(path.into()));
    };
    if rest.is_empty() {
        return Ok(Vec::new());
    }
    let parts: Vec<&str> = rest.split('/').collect();
    if parts.iter().any(|p| p.is_empty() || *p == "." || *p == "..") {
        return Err(NamespaceError::InvalidPath(path.into()));
    }
    Ok(parts)
}

impl Namespace {
    /// Namespace holding only the root, owned by 0:0 with REPLICA/ONLINE defaults.
    pub fn new() -> Self {
        let root = DirectoryEntry {
            id: EntryId::ROOT,
            parent_id: EntryId::ROOT,
            name: String::new(),
            uid: 0,
            gid: 0,
            default_retention_policy: RetentionPolicy::Replica,
            default_access_latency: AccessLatency::Online,
            created_at: 0,
        };
        let mut dirs = BTreeMap::new();
        dirs.insert(EntryId::ROOT, DirNode { meta: root, children: BTreeMap::new() });
        Self { dirs, files: BTreeMap::new(), next_id: EntryId::ROOT.0 + 1, clock: 0, traversals: AtomicU64::new(0) }
    }

    /// Rebuilds a namespace from entries in id order (as produced by [`entries`](Self::entries)).
    pub fn from_entries(entries: impl IntoIterator<Item = Entry>) -> Result<Self, NamespaceError> {
        let mut ns = Self::new();
        for entry in entries {
            ns.insert(entry)?;
        }
        Ok(ns)
    }

    fn dir_id_of(&self, parts: &[&str], path: &str) -> Result<EntryId, NamespaceError> {
        let mut cur = EntryId::ROOT;
        for part in parts {
            let node = &self.dirs[&cur];
            match node.children.get(*part) {
                Some(id) if self.dirs.contains_key(id) => cur = *id,
                Some(_) => return Err(NamespaceError::NotADirectory(path.into())),
                None => return Err(NamespaceError::NotFound(path.into())),
            }
        }
        Ok(cur)
    }

    /// Resolves a path to an entry id.
    pub fn resolve(&self, path: &str) -> Result<EntryId, NamespaceError> {
        let parts = split(path)?;
        let Some((last, parent)) = parts.split_last() else {
            return Ok(EntryId::ROOT);
        };
        let dir = self.dir_id_of(parent, path)?;
        self.dirs[&dir].children.get(*last).copied().ok_or_else(|| NamespaceError::NotFound(path.into()))
    }

    fn parent_and_name<'p>(&self, path: &'p str) -> Result<(&DirNode, &'p str), NamespaceError> {
        let parts = split(path)?;
        let Some((name, parent)) = parts.split_last() else {
            return Err(NamespaceError::AlreadyExists(path.into()));
        };
        let dir = &self.dirs[&self.dir_id_of(parent, path)?];
        if dir.children.contains_key(*name) {
            return Err(NamespaceError::AlreadyExists(path.into()));
        }
        Ok((dir, name))
    }

    /// Validates a file create and resolves its effective policy and latency.
    pub fn plan_file(&self, path: &str, spec: FileSpec) -> Result<PlannedFile, NamespaceError> {
        let (dir, name) = self.parent_and_name(path)?;
        Ok(PlannedFile {
            entry: FileEntry {
                id: EntryId(self.next_id),
                parent_id: dir.meta.id,
                name: name.to_string(),
                uid: spec.uid,
                gid: spec.gid,
                size_bytes: 0,
                retention_policy: spec.retention_policy.unwrap_or(dir.meta.default_retention_policy),
                access_latency: spec.access_latency.unwrap_or(dir.meta.default_access_latency),
                created_at: self.clock + 1,
            },
        })
    }

    /// Validates a directory create.
    pub fn plan_directory(&self, path: &str, spec: DirSpec) -> Result<DirectoryEntry, NamespaceError> {
        let (dir, name) = self.parent_and_name(path)?;
        Ok(DirectoryEntry {
            id: EntryId(self.next_id),
            parent_id: dir.meta.id,
            name: name.to_string(),
            uid: spec.uid,
            gid: spec.gid,
            default_retention_policy: spec.default_retention_policy.unwrap_or(dir.meta.default_retention_policy),
            default_access_latency: spec.default_access_latency.unwrap_or(dir.meta.default_access_latency),
            created_at: self.clock + 1,
        })
    }

    /// Inserts a planned or replayed entry under its parent.
    pub fn insert(&mut self, entry: Entry) -> Result<(), NamespaceError> {
        let id = entry.id();
        if id == EntryId::ROOT {
            return Ok(());
        }
        if self.dirs.contains_key(&id) || self.files.contains_key(&id) {
            return Err(NamespaceError::Inconsistent(id));
        }
        let parent = self.dirs.get_mut(&entry.parent_id()).ok_or(NamespaceError::Inconsistent(id))?;
        if parent.children.contains_key(entry.name()) || entry.name().is_empty() || entry.name().contains('/') {
            return Err(NamespaceError::Inconsistent(id));
        }
        parent.children.insert(entry.name().to_string(), id);
        self.next_id = self.next_id.max(id.0 + 1);
        self.clock = self.clock.max(entry.created_at());
        match entry {
            Entry::File(f) => {
                self.files.insert(id, f);
            }
            Entry::Directory(d) => {
                self.dirs.insert(id, DirNode { meta: d, children: BTreeMap::new() });
            }
        }
        Ok(())
    }

    /// Plans a file, passes it through `gate`, and inserts it if the gate allows.
    pub fn create_file(
        &mut self,
        path: &str,
        spec: FileSpec,
        gate: impl FnOnce(&FileEntry) -> Result<(), Denial>,
    ) -> Result<FileEntry, NamespaceError> {
        let planned = self.plan_file(path, spec)?;
        gate(&planned.entry).map_err(NamespaceError::QuotaExceeded)?;
        self.insert(Entry::File(planned.entry.clone()))?;
        Ok(planned.entry)
    }

    /// Creates a directory.
    pub fn create_directory(&mut self, path: &str, spec: DirSpec) -> Result<DirectoryEntry, NamespaceError> {
        let dir = self.plan_directory(path, spec)?;
        self.insert(Entry::Directory(dir.clone()))?;
        Ok(dir)
    }

    /// Records a file's size. Usage is not touched.
    pub fn commit_size(&mut self, id: EntryId, size_bytes: u64) -> Result<FileEntry, NamespaceError> {
        match self.files.get_mut(&id) {
            Some(f) => {
                f.size_bytes = size_bytes;
                Ok(f.clone())
            }
            None if self.dirs.contains_key(&id) => Err(NamespaceError::NotAFile(id)),
            None => Err(NamespaceError::NotFound(id.to_string())),
        }
    }

    /// Validates a removal without performing it.
    pub fn plan_remove(&self, path: &str) -> Result<Entry, NamespaceError> {
        let id = self.resolve(path)?;
        if id == EntryId::ROOT {
            return Err(NamespaceError::InvalidPath(path.into()));
        }
        if let Some(d) = self.dirs.get(&id) {
            if !d.children.is_empty() {
                return Err(NamespaceError::DirectoryNotEmpty(path.into()));
            }
            return Ok(Entry::Directory(d.meta.clone()));
        }
        Ok(Entry::File(self.files[&id].clone()))
    }

    /// Removes a file or empty directory by id.
    pub fn remove_id(&mut self, id: EntryId) -> Result<Entry, NamespaceError> {
        if id == EntryId::ROOT {
            return Err(NamespaceError::InvalidPath("/".into()));
        }
        let entry = if let Some(d) = self.dirs.get(&id) {
            if !d.children.is_empty() {
                return Err(NamespaceError::DirectoryNotEmpty(id.to_string()));
            }
            Entry::Directory(self.dirs.remove(&id).expect("checked").meta)
        } else {
            Entry::File(self.files.remove(&id).ok_or_else(|| NamespaceError::NotFound(id.to_string()))?)
        };
        if let Some(parent) = self.dirs.get_mut(&entry.parent_id()) {
            parent.children.remove(entry.name());
        }
        Ok(entry)
    }

    /// Removes a file or empty directory by path.
    pub fn remove(&mut self, path: &str) -> Result<Entry, NamespaceError> {
        let id = self.plan_remove(path)?.id();
        self.remove_id(id)
    }

    /// Entry by id.
    pub fn get(&self, id: EntryId) -> Option<Entry> {
        if let Some(f) = self.files.get(&id) {
            return Some(Entry::File(f.clone()));
        }
        self.dirs.get(&id).map(|d| Entry::Directory(d.meta.clone()))
    }

    /// File by id.
    pub fn file(&self, id: EntryId) -> Option<&FileEntry> {
        self.files.get(&id)
    }

    /// Metadata of the entry at `path`.
    pub fn stat(&self, path: &str) -> Result<Entry, NamespaceError> {
        let id = self.resolve(path)?;
        Ok(self.get(id).expect("resolved ids exist"))
    }

    /// Children of a directory, sorted by name.
    pub fn list(&self, path: &str) -> Result<Vec<Entry>, NamespaceError> {
        let id = self.resolve(path)?;
        let dir = self.dirs.get(&id).ok_or_else(|| NamespaceError::NotADirectory(path.into()))?;
        Ok(dir.children.values().map(|c| self.get(*c).expect("children exist")).collect())
    }

    /// Absolute path of an entry.
    pub fn path_of(&self, id: EntryId) -> Option<String> {
        let mut parts = Vec::new();
        let mut cur = self.get(id)?;
        while cur.id() != EntryId::ROOT {
            parts.push(cur.name().to_string());
            cur = self.get(cur.parent_id())?;
        }
        if parts.is_empty() {
            return Some("/".into());
        }
        let mut out = String::new();
        for p in parts.iter().rev() {
            out.push('/');
            out.push_str(p);
        }
        Some(out)
    }

    /// Every file, in id order. Counts as one namespace-wide traversal.
    pub fn files(&self) -> impl Iterator<Item = &FileEntry> {
        self.traversals.fetch_add(1, Ordering::Relaxed);
        self.files.values()
    }

    /// Up to `max` files with `after < id <= upto`, in id order.
    ///
    /// Chunked iteration: the first call of a pass (`after == None`) counts
    /// as one traversal. Because ids only grow, bounding a pass by the id
    /// high-water mark taken at its start excludes later creates and never
    /// yields an id twice.
    pub fn files_between(&self, after: Option<EntryId>, upto: EntryId, max: usize) -> Vec<FileEntry> {
        use core::ops::Bound::{Excluded, Included, Unbounded};
        if after.is_none() {
            self.traversals.fetch_add(1, Ordering::Relaxed);
        }
        let lower = after.map_or(Unbounded, Excluded);
        self.files.range((lower, Included(upto))).take(max).map(|(_, f)| f.clone()).collect()
    }

    /// Largest id handed out so far.
    pub fn high_water(&self) -> EntryId {
        EntryId(self.next_id - 1)
    }

    /// Number of namespace-wide traversals started.
    pub fn traversals(&self) -> u64 {
        self.traversals.load(Ordering::Relaxed)
    }

    /// Number of files.
    pub fn file_count(&self) -> usize {
        self.files.len()
    }

    /// Number of directories, including the root.
    pub fn dir_count(&self) -> usize {
        self.dirs.len()
    }

    /// Every entry except the root, in id order.
    pub fn entries(&self) -> Vec<Entry> {
        let mut out: Vec<Entry> = self
            .dirs
            .values()
            .filter(|d| d.meta.id != EntryId::ROOT)
            .map(|d| Entry::Directory(d.meta.clone()))
            .chain(self.files.values().cloned().map(Entry::File))
            .collect();
        out.sort_unstable_by_key(Entry::id);
        out
    }

    /// Checks that every entry's parent chain ends at the root without cycles
    /// and that parent/child links agree.
    pub fn is_well_formed(&self) -> bool {
        let limit = self.dirs.len() + 1;
        let reaches_root = |mut id: EntryId| {
            for _ in 0..limit {
                if id == EntryId::ROOT {
                    return true;
                }
                match self.dirs.get(&id) {
                    Some(d) => id = d.meta.parent_id,
                    None => return false,
                }
            }
            false
        };
        let linked = |e: &Entry| {
            self.dirs.get(&e.parent_id()).and_then(|p| p.children.get(e.name())) == Some(&e.id())
        };
        self.entries().iter().all(|e| linked(e) && reaches_root(e.parent_id()))
            && self.dirs.values().all(|d| d.children.values().all(|c| self.get(*c).is_some_and(|e| e.parent_id() == d.meta.id)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quota::QuotaKey;

    fn allow(_: &FileEntry) -> Result<(), Denial> {
        Ok(())
    }

    fn ns_with_data() -> Namespace {
        let mut ns = Namespace::new();
        ns.create_directory("/data", DirSpec::owned_by(0, 0)).unwrap();
        ns
    }

    #[test]
    fn stat_root() {
        let ns = Namespace::new();
        match ns.stat("/").unwrap() {
            Entry::Directory(d) => {
                assert_eq!(d.id, EntryId::ROOT);
                assert_eq!(d.parent_id, EntryId::ROOT);
                assert_eq!(d.default_retention_policy, RetentionPolicy::Replica);
            }
            Entry::File(_) => panic!("root is a directory"),
        }
    }

    #[test]
    fn create_starts_at_zero_size() {
        let mut ns = ns_with_data();
        let f = ns.create_file("/data/a.dat", FileSpec::owned_by(1000, 2000).policy(RetentionPolicy::Custodial), allow).unwrap();
        assert_eq!(f.size_bytes, 0);
        assert_eq!(f.retention_policy, RetentionPolicy::Custodial);
        assert_eq!(ns.path_of(f.id).as_deref(), Some("/data/a.dat"));
    }

    #[test]
    fn duplicate_create_is_already_exists() {
        let mut ns = ns_with_data();
        ns.create_file("/data/a.dat", FileSpec::owned_by(1, 1), allow).unwrap();
        let err = ns.create_file("/data/a.dat", FileSpec::owned_by(1, 1), allow).unwrap_err();
        assert!(matches!(err, NamespaceError::AlreadyExists(_)));
    }

    #[test]
    fn missing_parent_is_not_found() {
        let mut ns = Namespace::new();
        let err = ns.create_file("/nope/a", FileSpec::owned_by(1, 1), allow).unwrap_err();
        assert!(matches!(err, NamespaceError::NotFound(_)));
    }

    #[test]
    fn bad_paths_rejected() {
        let ns = Namespace::new();
        for p in ["", "a", "/a//b", "/a/", "/./a", "/.."] {
            assert!(matches!(ns.plan_file(p, FileSpec::owned_by(1, 1)), Err(NamespaceError::InvalidPath(_))), "{p}");
        }
    }

    #[test]
    fn gate_denial_inserts_nothing() {
        let mut ns = Namespace::new();
        let denial = Denial { key: QuotaKey::user(1), policy: RetentionPolicy::Replica, used: 1, limit: 1 };
        let err = ns.create_file("/a", FileSpec::owned_by(1, 1), |_| Err(denial)).unwrap_err();
        assert_eq!(err, NamespaceError::QuotaExceeded(denial));
        assert_eq!(err.to_string(), "Quota exceeded");
        assert_eq!(ns.file_count(), 0);
        assert!(matches!(ns.stat("/a"), Err(NamespaceError::NotFound(_))));
    }

    #[test]
    fn policy_falls_back_to_directory_default() {
        let mut ns = Namespace::new();
        let tape = DirSpec { default_retention_policy: Some(RetentionPolicy::Custodial), default_access_latency: Some(AccessLatency::Nearline), ..DirSpec::owned_by(0, 0) };
        ns.create_directory("/tape", tape).unwrap();
        ns.create_directory("/tape/sub", DirSpec::owned_by(0, 0)).unwrap();
        let f = ns.create_file("/tape/sub/f", FileSpec::owned_by(1, 1), allow).unwrap();
        assert_eq!((f.retention_policy, f.access_latency), (RetentionPolicy::Custodial, AccessLatency::Nearline));
        let g = ns.create_file("/tape/sub/g", FileSpec::owned_by(1, 1).policy(RetentionPolicy::Output), allow).unwrap();
        assert_eq!(g.retention_policy, RetentionPolicy::Output);
        let r = ns.create_file("/r", FileSpec::owned_by(1, 1), allow).unwrap();
        assert_eq!(r.retention_policy, RetentionPolicy::Replica);
    }

    #[test]
    fn commit_size_on_directory_is_not_a_file() {
        let mut ns = ns_with_data();
        let dir = ns.resolve("/data").unwrap();
        assert_eq!(ns.commit_size(dir, 5), Err(NamespaceError::NotAFile(dir)));
        assert!(matches!(ns.commit_size(EntryId(999), 5), Err(NamespaceError::NotFound(_))));
        let f = ns.create_file("/data/f", FileSpec::owned_by(1, 1), allow).unwrap();
        assert_eq!(ns.commit_size(f.id, 5_000_000).unwrap().size_bytes, 5_000_000);
    }

    #[test]
    fn list_sorted_by_name() {
        let mut ns = ns_with_data();
        assert!(ns.list("/data").unwrap().is_empty());
        ns.create_file("/data/b", FileSpec::owned_by(1, 1), allow).unwrap();
        ns.create_file("/data/a", FileSpec::owned_by(1, 1), allow).unwrap();
        let names: Vec<String> = ns.list("/data").unwrap().iter().map(|e| e.name().to_string()).collect();
        assert_eq!(names, ["a", "b"]);
    }

    #[test]
    fn remove_rules() {
        let mut ns = ns_with_data();
        ns.create_file("/data/a", FileSpec::owned_by(1, 1), allow).unwrap();
        assert!(matches!(ns.remove("/data"), Err(NamespaceError::DirectoryNotEmpty(_))));
        assert!(matches!(ns.remove("/missing"), Err(NamespaceError::NotFound(_))));
        assert!(matches!(ns.remove("/"), Err(NamespaceError::InvalidPath(_))));
        let removed = ns.remove("/data/a").unwrap();
        assert!(ns.files().all(|f| f.id != removed.id()));
        ns.remove("/data").unwrap();
        assert_eq!(ns.dir_count(), 1);
    }

    #[test]
    fn chunked_iteration_respects_bounds() {
        let mut ns = Namespace::new();
        for i in 0..10 {
            ns.create_file(&alloc::format!("/f{i}"), FileSpec::owned_by(1, 1), allow).unwrap();
        }
        let upto = ns.high_water();
        ns.create_file("/late", FileSpec::owned_by(1, 1), allow).unwrap();
        let mut seen = Vec::new();
        let mut cursor = None;
        loop {
            let chunk = ns.files_between(cursor, upto, 3);
            let Some(last) = chunk.last() else { break };
            cursor = Some(last.id);
            seen.extend(chunk.iter().map(|f| f.id));
        }
        assert_eq!(seen.len(), 10);
        assert_eq!(ns.traversals(), 1);
    }

    #[test]
    fn rebuild_from_entries() {
        let mut ns = ns_with_data();
        let f = ns.create_file("/data/x", FileSpec::owned_by(3, 4), allow).unwrap();
        ns.commit_size(f.id, 42).unwrap();
        let copy = Namespace::from_entries(ns.entries()).unwrap();
        assert_eq!(copy.entries(), ns.entries());
        assert_eq!(copy.high_water(), ns.high_water());
        assert!(copy.is_well_formed());
    }
}

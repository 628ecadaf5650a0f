//! Append-only journal with snapshot compaction.
//!
//! Layout of a data directory:
//!
//! ```text
//! <data-dir>/journal.log      records appended since the last compaction
//! <data-dir>/snapshot.<seq>   full state as of journal record <seq>
//! ```
//!
//! Each journal record is framed as
//!
//! ```text
//! u32 LE  body length
//! u32 LE  CRC-32 of body
//! body:   u64 LE seq | u8 kind | JSON payload
//! ```
//!
//! Replay stops at the first record that is short, fails its checksum, has
//! an unknown kind, a non-increasing sequence number or an undecodable
//! payload. Everything before it is applied; the tail is reported and, when
//! the journal is opened for writing, truncated away.
//!
//! A scan persists a `USAGE` record followed by a `SCAN_MARK` with the same
//! scan sequence. The usage only takes effect once its mark is replayed, so a
//! scan torn between the two leaves the previous usage in place.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use quota_core::{Entry, EntryId, Namespace, NamespaceError, QuotaKey, QuotaLimits, QuotaTable};
use serde::{Deserialize, Serialize};

use crate::wire::{LimitRecord, RemoveRecord, ScanMark, UsageRecordRow, UsageSnapshot};

pub const JOURNAL_FILE: &str = "journal.log";
const SNAPSHOT_PREFIX: &str = "snapshot.";
const HEADER_LEN: usize = 8;
const BODY_PREFIX_LEN: usize = 9;
const MAX_RECORD_LEN: u32 = 64 << 20;

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("store io: {0}")]
    Io(#[from] io::Error),
    #[error("corrupt record at offset {offset}: {reason}")]
    CorruptRecord { offset: u64, reason: String },
    #[error("store full: journal limit of {limit} bytes reached")]
    StoreFull { limit: u64 },
    #[error("encoding: {0}")]
    Encode(#[from] serde_json::Error),
    #[error("record {seq} does not apply: {source}")]
    Replay { seq: u64, source: NamespaceError },
}

/// Record kinds as stored on disk.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum RecordKind {
    Limit = 1,
    Usage = 2,
    NsEntry = 3,
    NsRemove = 4,
    ScanMark = 5,
}

impl RecordKind {
    fn from_u8(b: u8) -> Option<Self> {
        Some(match b {
            1 => Self::Limit,
            2 => Self::Usage,
            3 => Self::NsEntry,
            4 => Self::NsRemove,
            5 => Self::ScanMark,
            _ => return None,
        })
    }
}

/// A state change, as journaled.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Mutation {
    Limit(LimitRecord),
    Usage(UsageSnapshot),
    NsEntry(Entry),
    NsRemove(EntryId),
    ScanMark(ScanMark),
}

impl Mutation {
    pub fn kind(&self) -> RecordKind {
        match self {
            Mutation::Limit(_) => RecordKind::Limit,
            Mutation::Usage(_) => RecordKind::Usage,
            Mutation::NsEntry(_) => RecordKind::NsEntry,
            Mutation::NsRemove(_) => RecordKind::NsRemove,
            Mutation::ScanMark(_) => RecordKind::ScanMark,
        }
    }

    fn payload(&self) -> Result<Vec<u8>, serde_json::Error> {
        match self {
            Mutation::Limit(r) => serde_json::to_vec(r),
            Mutation::Usage(u) => serde_json::to_vec(u),
            Mutation::NsEntry(e) => serde_json::to_vec(e),
            Mutation::NsRemove(id) => serde_json::to_vec(&RemoveRecord { id: *id }),
            Mutation::ScanMark(m) => serde_json::to_vec(m),
        }
    }

    fn decode(kind: RecordKind, payload: &[u8]) -> Result<Self, serde_json::Error> {
        Ok(match kind {
            RecordKind::Limit => Mutation::Limit(serde_json::from_slice(payload)?),
            RecordKind::Usage => Mutation::Usage(serde_json::from_slice(payload)?),
            RecordKind::NsEntry => Mutation::NsEntry(serde_json::from_slice(payload)?),
            RecordKind::NsRemove => Mutation::NsRemove(serde_json::from_slice::<RemoveRecord>(payload)?.id),
            RecordKind::ScanMark => Mutation::ScanMark(serde_json::from_slice(payload)?),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StoreRecord {
    pub seq: u64,
    pub mutation: Mutation,
}

/// Frames one record.
pub fn encode_record(seq: u64, mutation: &Mutation) -> Result<Vec<u8>, serde_json::Error> {
    let payload = mutation.payload()?;
    let mut body = Vec::with_capacity(BODY_PREFIX_LEN + payload.len());
    body.extend_from_slice(&seq.to_le_bytes());
    body.push(mutation.kind() as u8);
    body.extend_from_slice(&payload);
    let mut out = Vec::with_capacity(HEADER_LEN + body.len());
    out.extend_from_slice(&(body.len() as u32).to_le_bytes());
    out.extend_from_slice(&crc32fast::hash(&body).to_le_bytes());
    out.extend_from_slice(&body);
    Ok(out)
}

/// Where and why decoding stopped early.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corruption {
    pub offset: u64,
    pub reason: String,
}

impl From<Corruption> for StoreError {
    fn from(c: Corruption) -> Self {
        StoreError::CorruptRecord { offset: c.offset, reason: c.reason }
    }
}

#[derive(Debug, Default)]
pub struct Decoded {
    /// Records with the byte offset just past each one.
    pub records: Vec<(StoreRecord, u64)>,
    pub valid_len: u64,
    pub corruption: Option<Corruption>,
}

/// Decodes framed records until the end of `bytes` or the first bad record.
pub fn decode_records(bytes: &[u8], min_seq: u64) -> Decoded {
    let mut out = Decoded::default();
    let mut pos = 0usize;
    let mut last_seq = min_seq;
    let fail = |out: &mut Decoded, pos: usize, reason: &str| {
        out.corruption = Some(Corruption { offset: pos as u64, reason: reason.into() });
    };
    while pos < bytes.len() {
        let rest = &bytes[pos..];
        if rest.len() < HEADER_LEN {
            fail(&mut out, pos, "torn header");
            break;
        }
        let len = u32::from_le_bytes(rest[0..4].try_into().unwrap());
        let crc = u32::from_le_bytes(rest[4..8].try_into().unwrap());
        if len > MAX_RECORD_LEN || (len as usize) < BODY_PREFIX_LEN {
            fail(&mut out, pos, "implausible length");
            break;
        }
        let Some(body) = rest.get(HEADER_LEN..HEADER_LEN + len as usize) else {
            fail(&mut out, pos, "torn body");
            break;
        };
        if crc32fast::hash(body) != crc {
            fail(&mut out, pos, "checksum mismatch");
            break;
        }
        let seq = u64::from_le_bytes(body[0..8].try_into().unwrap());
        let Some(kind) = RecordKind::from_u8(body[8]) else {
            fail(&mut out, pos, "unknown record kind");
            break;
        };
        if seq <= last_seq {
            fail(&mut out, pos, "non-increasing sequence number");
            break;
        }
        let mutation = match Mutation::decode(kind, &body[BODY_PREFIX_LEN..]) {
            Ok(m) => m,
            Err(_) => {
                fail(&mut out, pos, "undecodable payload");
                break;
            }
        };
        pos += HEADER_LEN + len as usize;
        last_seq = seq;
        out.records.push((StoreRecord { seq, mutation }, pos as u64));
        out.valid_len = pos as u64;
    }
    out
}

/// Full, comparable state: what a snapshot holds and what tests diff.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StateDump {
    pub generation: u64,
    pub entries: Vec<Entry>,
    pub limits: Vec<LimitRecord>,
    pub usage: Vec<UsageRecordRow>,
    pub last_scan: Option<ScanMark>,
}

impl StateDump {
    pub fn capture(namespace: &Namespace, table: &QuotaTable, last_scan: Option<ScanMark>) -> Self {
        Self {
            generation: table.generation(),
            entries: namespace.entries(),
            limits: table.limits().into_iter().map(|(key, l)| LimitRecord { key, limits: Some(l) }).collect(),
            usage: table.usage().into_iter().map(|(key, usage)| UsageRecordRow { key, usage }).collect(),
            last_scan,
        }
    }
}

/// State rebuilt by replay.
#[derive(Debug, Default)]
pub struct StoreState {
    pub namespace: Namespace,
    pub limits: BTreeMap<QuotaKey, QuotaLimits>,
    pub usage: Option<UsageSnapshot>,
    pub last_scan: Option<ScanMark>,
    pub last_seq: u64,
    pending_usage: Option<UsageSnapshot>,
}

impl StoreState {
    fn from_dump(seq: u64, dump: StateDump) -> Result<Self, StoreError> {
        let namespace = Namespace::from_entries(dump.entries).map_err(|source| StoreError::Replay { seq, source })?;
        Ok(Self {
            namespace,
            limits: dump.limits.into_iter().filter_map(|r| Some((r.key, r.limits?))).collect(),
            usage: Some(UsageSnapshot { scan_seq: dump.generation, usage: dump.usage }),
            last_scan: dump.last_scan,
            last_seq: seq,
            pending_usage: None,
        })
    }

    pub fn apply(&mut self, record: StoreRecord) -> Result<(), StoreError> {
        let seq = record.seq;
        let ns_err = |source| StoreError::Replay { seq, source };
        match record.mutation {
            Mutation::Limit(r) => match r.limits {
                Some(l) => {
                    self.limits.insert(r.key, l);
                }
                None => {
                    self.limits.remove(&r.key);
                }
            },
            Mutation::Usage(u) => self.pending_usage = Some(u),
            Mutation::ScanMark(mark) => {
                if let Some(u) = self.pending_usage.take().filter(|u| u.scan_seq == mark.scan_seq) {
                    self.usage = Some(u);
                    self.last_scan = Some(mark);
                }
            }
            Mutation::NsEntry(entry) => {
                let id = entry.id();
                match (&entry, self.namespace.file(id)) {
                    (Entry::File(f), Some(_)) => {
                        self.namespace.commit_size(id, f.size_bytes).map_err(ns_err)?;
                    }
                    _ => self.namespace.insert(entry).map_err(ns_err)?,
                }
            }
            Mutation::NsRemove(id) => {
                self.namespace.remove_id(id).map_err(ns_err)?;
            }
        }
        self.last_seq = seq;
        Ok(())
    }

    /// The quota cache generation this state describes.
    pub fn table(&self) -> QuotaTable {
        let (generation, usage) = match &self.usage {
            Some(u) => (u.scan_seq, u.usage.iter().map(|r| (r.key, r.usage)).collect()),
            None => (0, Vec::new()),
        };
        QuotaTable::restore(generation, self.limits.iter().map(|(k, l)| (*k, *l)), usage)
    }

    pub fn dump(&self) -> StateDump {
        StateDump::capture(&self.namespace, &self.table(), self.last_scan)
    }
}

#[derive(Debug)]
pub struct Replayed {
    pub state: StoreState,
    /// Journal records applied on top of the snapshot.
    pub records: u64,
    pub snapshot_seq: Option<u64>,
    /// Length of the valid journal prefix.
    pub valid_len: u64,
    pub truncated: Option<Corruption>,
}

#[derive(Debug, Serialize, Deserialize)]
struct SnapshotFile {
    seq: u64,
    state: StateDump,
}

fn snapshot_files(dir: &Path) -> io::Result<Vec<(u64, PathBuf)>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir)? {
        let entry = entry?;
        let name = entry.file_name();
        let Some(seq): Option<u64> = name.to_str().and_then(|n| n.strip_prefix(SNAPSHOT_PREFIX)).and_then(|s| s.parse().ok()) else {
            continue;
        };
        out.push((seq, entry.path()));
    }
    out.sort_unstable_by_key(|e| std::cmp::Reverse(e.0));
    Ok(out)
}

fn read_snapshot(path: &Path) -> Option<SnapshotFile> {
    let bytes = fs::read(path).ok()?;
    let (crc, json) = bytes.split_at_checked(4)?;
    if crc32fast::hash(json) != u32::from_le_bytes(crc.try_into().ok()?) {
        return None;
    }
    serde_json::from_slice(json).ok()
}

/// Rebuilds state from the newest readable snapshot plus the journal. Read-only.
pub fn replay(dir: &Path) -> Result<Replayed, StoreError> {
    let mut state = StoreState::default();
    let mut snapshot_seq = None;
    if dir.exists() {
        for (seq, path) in snapshot_files(dir)? {
            match read_snapshot(&path) {
                Some(snap) if snap.seq == seq => {
                    state = StoreState::from_dump(seq, snap.state)?;
                    snapshot_seq = Some(seq);
                    break;
                }
                _ => tracing::warn!(path = %path.display(), "skipping unreadable snapshot"),
            }
        }
    }
    let bytes = match fs::read(dir.join(JOURNAL_FILE)) {
        Ok(b) => b,
        Err(e) if e.kind() == io::ErrorKind::NotFound => Vec::new(),
        Err(e) => return Err(e.into()),
    };
    let decoded = decode_records(&bytes, 0);
    let mut records = 0;
    for (record, _) in decoded.records {
        if snapshot_seq.is_some_and(|s| record.seq <= s) {
            continue;
        }
        state.apply(record)?;
        records += 1;
    }
    Ok(Replayed { state, records, snapshot_seq, valid_len: decoded.valid_len, truncated: decoded.corruption })
}

#[derive(Debug, Clone, Copy, Default)]
pub struct StoreOptions {
    /// fsync after every append. Without it appends reach the OS before
    /// returning, which survives a process kill but not a power loss.
    pub fsync: bool,
    /// Refuse appends that would grow the journal past this many bytes.
    pub max_bytes: Option<u64>,
}

/// The writable journal of one data directory.
#[derive(Debug)]
pub struct Journal {
    dir: PathBuf,
    file: File,
    next_seq: u64,
    len: u64,
    records: u64,
    options: StoreOptions,
}

fn sync_dir(dir: &Path) -> io::Result<()> {
    File::open(dir)?.sync_all()
}

impl Journal {
    /// Replays the directory and opens the journal for appending, discarding
    /// any torn tail.
    pub fn open(dir: &Path, options: StoreOptions) -> Result<(Self, Replayed), StoreError> {
        fs::create_dir_all(dir)?;
        let replayed = replay(dir)?;
        let path = dir.join(JOURNAL_FILE);
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        if let Some(c) = &replayed.truncated {
            tracing::warn!(offset = c.offset, reason = %c.reason, "discarding journal tail");
            file.set_len(replayed.valid_len)?;
            file.sync_all()?;
        }
        let journal = Self {
            dir: dir.to_path_buf(),
            file,
            next_seq: replayed.state.last_seq + 1,
            len: replayed.valid_len,
            records: replayed.records,
            options,
        };
        Ok((journal, replayed))
    }

    /// Appends records in one write; returns the last sequence number.
    pub fn append_all(&mut self, mutations: &[Mutation]) -> Result<u64, StoreError> {
        let mut buf = Vec::new();
        let mut seq = self.next_seq;
        for m in mutations {
            buf.extend_from_slice(&encode_record(seq, m)?);
            seq += 1;
        }
        if let Some(limit) = self.options.max_bytes {
            if self.len + buf.len() as u64 > limit {
                return Err(StoreError::StoreFull { limit });
            }
        }
        self.file.write_all(&buf)?;
        if self.options.fsync {
            self.file.sync_data()?;
        }
        self.len += buf.len() as u64;
        self.records += mutations.len() as u64;
        self.next_seq = seq;
        Ok(seq - 1)
    }

    pub fn append(&mut self, mutation: &Mutation) -> Result<u64, StoreError> {
        self.append_all(std::slice::from_ref(mutation))
    }

    /// Sequence number of the last appended record.
    pub fn last_seq(&self) -> u64 {
        self.next_seq - 1
    }

    /// Records appended since the last compaction.
    pub fn records(&self) -> u64 {
        self.records
    }

    pub fn len_bytes(&self) -> u64 {
        self.len
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Writes `state` as `snapshot.<last_seq>` and starts an empty journal.
    ///
    /// `state` must reflect every record appended so far. Older snapshots
    /// are deleted once the new one is durable.
    pub fn compact(&mut self, state: &StateDump) -> Result<PathBuf, StoreError> {
        let seq = self.last_seq();
        let json = serde_json::to_vec(&SnapshotFile { seq, state: state.clone() })?;
        let mut bytes = Vec::with_capacity(json.len() + 4);
        bytes.extend_from_slice(&crc32fast::hash(&json).to_le_bytes());
        bytes.extend_from_slice(&json);

        let final_path = self.dir.join(format!("{SNAPSHOT_PREFIX}{seq}"));
        let tmp = self.dir.join(format!("{SNAPSHOT_PREFIX}{seq}.tmp"));
        {
            let mut f = File::create(&tmp)?;
            f.write_all(&bytes)?;
            f.sync_all()?;
        }
        fs::rename(&tmp, &final_path)?;
        sync_dir(&self.dir)?;

        // Records up to `seq` are now covered by the snapshot; replay skips
        // them even if the journal reset below does not happen.
        let journal_tmp = self.dir.join(format!("{JOURNAL_FILE}.tmp"));
        File::create(&journal_tmp)?.sync_all()?;
        fs::rename(&journal_tmp, self.dir.join(JOURNAL_FILE))?;
        sync_dir(&self.dir)?;
        self.file = OpenOptions::new().append(true).open(self.dir.join(JOURNAL_FILE))?;
        self.len = 0;
        self.records = 0;

        for (old, path) in snapshot_files(&self.dir)? {
            if old < seq {
                fs::remove_file(path)?;
            }
        }
        Ok(final_path)
    }
}

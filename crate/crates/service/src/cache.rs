//! Generation-swapped quota cache.
//!
//! Readers load the current [`QuotaTable`] without locking. Writers build a
//! new table from the current one and publish it with a single pointer swap,
//! serialized by a mutex so no update is lost.

use std::sync::{Arc, Mutex};

use arc_swap::ArcSwap;
use quota_core::{Decision, QuotaTable, RetentionPolicy};

#[derive(Debug)]
pub struct QuotaCache {
    current: ArcSwap<QuotaTable>,
    writer: Mutex<()>,
}

impl QuotaCache {
    pub fn new(table: QuotaTable) -> Self {
        Self { current: ArcSwap::from_pointee(table), writer: Mutex::new(()) }
    }

    /// The current generation. Holding the `Arc` pins it.
    pub fn snapshot(&self) -> Arc<QuotaTable> {
        self.current.load_full()
    }

    pub fn generation(&self) -> u64 {
        self.current.load().generation()
    }

    /// Create-time check against one generation; also returns the lookup count.
    pub fn check(&self, uid: u32, gid: u32, policy: RetentionPolicy) -> (Decision, u32) {
        self.current.load().check_counted(uid, gid, policy)
    }

    /// Derives and publishes a new generation.
    ///
    /// `derive` computes the next table from the current one; `persist` runs
    /// before publication and can veto it. Both run under the writer lock.
    pub fn update<T, E>(
        &self,
        derive: impl FnOnce(&QuotaTable) -> Result<(QuotaTable, T), E>,
        persist: impl FnOnce(&QuotaTable, &T) -> Result<(), E>,
    ) -> Result<T, E> {
        let _guard = self.writer.lock().unwrap_or_else(|e| e.into_inner());
        let current = self.current.load();
        let (next, out) = derive(&current)?;
        persist(&next, &out)?;
        self.current.store(Arc::new(next));
        Ok(out)
    }

    /// Runs `f` while holding the writer lock, so no generation is published meanwhile.
    pub fn with_writer_locked<T>(&self, f: impl FnOnce(&QuotaTable) -> T) -> T {
        let _guard = self.writer.lock().unwrap_or_else(|e| e.into_inner());
        f(&self.current.load())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use quota_core::{QuotaKey, QuotaLimits};

    #[test]
    fn failed_persist_publishes_nothing() {
        let cache = QuotaCache::new(QuotaTable::new());
        let r: Result<(), &str> = cache.update(
            |t| t.put_limits(QuotaKey::user(1), QuotaLimits::UNLIMITED).map(|(t, _)| (t, ())).map_err(|_| "dup"),
            |_, _| Err("disk"),
        );
        assert_eq!(r, Err("disk"));
        assert!(cache.snapshot().is_empty());
    }

    #[test]
    fn old_snapshot_survives_swap() {
        let cache = QuotaCache::new(QuotaTable::new());
        let before = cache.snapshot();
        cache
            .update::<_, ()>(|t| Ok((t.put_limits(QuotaKey::user(1), QuotaLimits::UNLIMITED).unwrap().0, ())), |_, _| Ok(()))
            .unwrap();
        assert!(before.is_empty());
        assert_eq!(cache.snapshot().len(), 1);
    }
}

use std::collections::HashMap;

use proptest::prelude::*;
use quota_core::{
    Aggregator, DirSpec, Entry, FileSpec, LimitsPatch, Namespace, QuotaKey, QuotaLimits, QuotaTable,
    RetentionPolicy, ScanReport,
};

fn policy() -> impl Strategy<Value = RetentionPolicy> {
    prop_oneof![Just(RetentionPolicy::Replica), Just(RetentionPolicy::Custodial), Just(RetentionPolicy::Output)]
}

#[derive(Debug, Clone)]
enum Op {
    Mkdir(usize, u8),
    Create(usize, u8, u32, u32, RetentionPolicy, u64),
    Remove(usize),
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        (0usize..32, 0u8..6).prop_map(|(d, n)| Op::Mkdir(d, n)),
        (0usize..32, 0u8..6, 1u32..5, 1u32..3, policy(), 0u64..1000).prop_map(|(d, n, u, g, p, s)| Op::Create(d, n, u, g, p, s)),
        (0usize..64).prop_map(Op::Remove),
    ]
}

fn dirs_of(ns: &Namespace) -> Vec<String> {
    let mut dirs = vec!["/".to_string()];
    dirs.extend(
        ns.entries().iter().filter(|e| matches!(e, Entry::Directory(_))).map(|e| ns.path_of(e.id()).unwrap()),
    );
    dirs
}

fn join(dir: &str, name: &str) -> String {
    if dir == "/" { format!("/{name}") } else { format!("{dir}/{name}") }
}

fn apply(ns: &mut Namespace, op: &Op) {
    let dirs = dirs_of(ns);
    match *op {
        Op::Mkdir(d, n) => {
            let _ = ns.create_directory(&join(&dirs[d % dirs.len()], &format!("d{n}")), DirSpec::owned_by(0, 0));
        }
        Op::Create(d, n, uid, gid, p, size) => {
            let path = join(&dirs[d % dirs.len()], &format!("f{n}"));
            if let Ok(f) = ns.create_file(&path, FileSpec::owned_by(uid, gid).policy(p), |_| Ok(())) {
                ns.commit_size(f.id, size).unwrap();
            }
        }
        Op::Remove(i) => {
            let entries = ns.entries();
            if !entries.is_empty() {
                let path = ns.path_of(entries[i % entries.len()].id()).unwrap();
                let _ = ns.remove(&path);
            }
        }
    }
}

/// Sum of sizes per (key, policy), computed straight from the entry list.
fn brute_force(entries: &[Entry]) -> HashMap<(QuotaKey, RetentionPolicy), u64> {
    let mut out = HashMap::new();
    for f in entries.iter().filter_map(Entry::as_file) {
        *out.entry((QuotaKey::user(f.uid), f.retention_policy)).or_insert(0) += f.size_bytes;
        *out.entry((QuotaKey::group(f.gid), f.retention_policy)).or_insert(0) += f.size_bytes;
    }
    out
}

proptest! {
    #[test]
    fn tree_stays_well_formed(ops in prop::collection::vec(op(), 0..120)) {
        let mut ns = Namespace::new();
        for op in &ops {
            apply(&mut ns, op);
            prop_assert!(ns.is_well_formed());
        }
        let rebuilt = Namespace::from_entries(ns.entries()).unwrap();
        prop_assert_eq!(rebuilt.entries(), ns.entries());
    }

    #[test]
    fn removed_ids_never_iterated(ops in prop::collection::vec(op(), 0..80)) {
        let mut ns = Namespace::new();
        for op in &ops {
            apply(&mut ns, op);
        }
        let files: Vec<_> = ns.files().map(|f| f.id).collect();
        if let Some(&victim) = files.first() {
            let path = ns.path_of(victim).unwrap();
            ns.remove(&path).unwrap();
            prop_assert!(ns.files().all(|f| f.id != victim));
        }
    }

    #[test]
    fn aggregation_matches_brute_force(ops in prop::collection::vec(op(), 0..150)) {
        let mut ns = Namespace::new();
        for op in &ops {
            apply(&mut ns, op);
        }
        let mut agg = Aggregator::new();
        agg.extend(ns.files());
        let report = agg.finish(1, 0, 0);
        let expected = brute_force(&ns.entries());
        prop_assert_eq!(report.entries_scanned as usize, ns.file_count());
        prop_assert_eq!(report.usage.len(), expected.len());
        for (k, v) in &expected {
            prop_assert_eq!(report.usage.get(k), Some(v));
        }
        // scanning the same namespace again is deterministic
        let mut again = Aggregator::new();
        again.extend(ns.files());
        prop_assert_eq!(again.finish(1, 0, 0).usage, report.usage);
    }

    #[test]
    fn check_is_user_or_group_over(
        user_limit in prop::option::of(0u64..100),
        group_limit in prop::option::of(0u64..100),
        user_used in 0u64..100,
        group_used in 0u64..100,
        p in policy(),
        other in policy(),
    ) {
        let mut table = QuotaTable::new();
        if let Some(l) = user_limit {
            table = table.put_limits(QuotaKey::user(1), QuotaLimits::UNLIMITED.with(p, Some(l))).unwrap().0;
        }
        if let Some(l) = group_limit {
            table = table.put_limits(QuotaKey::group(2), QuotaLimits::UNLIMITED.with(p, Some(l))).unwrap().0;
        }
        let mut report = ScanReport { scan_seq: 1, started_at: 0, finished_at: 0, entries_scanned: 0, usage: Default::default() };
        report.usage.insert((QuotaKey::user(1), p), user_used);
        report.usage.insert((QuotaKey::group(2), p), group_used);
        let table = table.apply_report(&report).unwrap();

        let oracle = user_limit.is_some_and(|l| user_used >= l) || group_limit.is_some_and(|l| group_used >= l);
        prop_assert_eq!(!table.check(1, 2, p).is_allowed(), oracle);
        if other != p {
            prop_assert!(table.check(1, 2, other).is_allowed());
        }
    }

    #[test]
    fn denial_is_monotone_in_limit(used in 0u64..1000, limit in 0u64..1000, lower in 0u64..1000) {
        let key = QuotaKey::user(9);
        let t = QuotaTable::new().put_limits(key, QuotaLimits::UNLIMITED.with(RetentionPolicy::Custodial, Some(limit))).unwrap().0;
        let mut report = ScanReport { scan_seq: 1, started_at: 0, finished_at: 0, entries_scanned: 0, usage: Default::default() };
        report.usage.insert((key, RetentionPolicy::Custodial), used);
        let t = t.apply_report(&report).unwrap();
        if !t.check(9, 0, RetentionPolicy::Custodial).is_allowed() {
            let lower = lower.min(limit);
            let t2 = t.modify_limits(key, &LimitsPatch::set(RetentionPolicy::Custodial, Some(lower))).unwrap().0;
            prop_assert!(!t2.check(9, 0, RetentionPolicy::Custodial).is_allowed());
        }
    }
}

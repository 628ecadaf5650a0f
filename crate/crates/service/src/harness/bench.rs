//! Create-latency measurement.

use std::fmt;
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::{Duration, Instant};

use quota_core::{AuthContext, DirSpec, QuotaKey, QuotaLimits, RetentionPolicy};

use crate::service::{CreateStats, QuotaService};

const BENCH_UID: u32 = 1000;
const BENCH_GID: u32 = 2000;
/// Scopes with limits configured besides the bench caller in quota runs.
const EXTRA_QUOTAS: u32 = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LatencyStats {
    pub samples: usize,
    pub p50: Duration,
    pub p95: Duration,
    pub p99: Duration,
}

/// Nearest-rank percentile of an ascending slice.
pub fn percentile(sorted: &[Duration], q: f64) -> Duration {
    if sorted.is_empty() {
        return Duration::ZERO;
    }
    let rank = (q * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

impl LatencyStats {
    pub fn from_samples(mut samples: Vec<Duration>) -> Self {
        samples.sort_unstable();
        Self {
            samples: samples.len(),
            p50: percentile(&samples, 0.50),
            p95: percentile(&samples, 0.95),
            p99: percentile(&samples, 0.99),
        }
    }
}

impl fmt::Display for LatencyStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n={} p50={:?} p95={:?} p99={:?}", self.samples, self.p50, self.p95, self.p99)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Variant {
    pub quotas: bool,
    pub scanner: bool,
}

impl Variant {
    pub const BASELINE: Variant = Variant { quotas: false, scanner: false };
    pub const QUOTAS: Variant = Variant { quotas: true, scanner: false };
    pub const QUOTAS_AND_SCANNER: Variant = Variant { quotas: true, scanner: true };
}

/// One run: a fresh service, `files` timed creates, raw samples returned.
pub fn sample_creates(files: usize, variant: Variant) -> (Vec<Duration>, CreateStats) {
    let service = QuotaService::in_memory();
    let admin = AuthContext::admin("bench", 0, 0);
    let caller = AuthContext::user("bench", BENCH_UID, BENCH_GID);
    service.create_directory("/bench", DirSpec::owned_by(BENCH_UID, BENCH_GID), &admin).expect("bench dir");
    if variant.quotas {
        let generous = QuotaLimits { custodial: Some(u64::MAX), replica: Some(u64::MAX), output: Some(u64::MAX) };
        service.put_quota(QuotaKey::user(BENCH_UID), generous, &admin).expect("user quota");
        service.put_quota(QuotaKey::group(BENCH_GID), generous, &admin).expect("group quota");
        for id in 0..EXTRA_QUOTAS {
            service.put_quota(QuotaKey::user(10_000 + id), generous, &admin).expect("extra quota");
        }
        service.run_scan_now().expect("initial scan");
    }
    let paths: Vec<String> = (0..files).map(|i| format!("/bench/f{i}")).collect();
    let stop = AtomicBool::new(false);
    let samples = std::thread::scope(|s| {
        if variant.scanner {
            s.spawn(|| {
                while !stop.load(Ordering::Relaxed) {
                    let _ = service.run_scan_now();
                }
            });
        }
        let mut samples = Vec::with_capacity(files);
        for path in &paths {
            let t = Instant::now();
            let created = service.create_entry(path, BENCH_UID, BENCH_GID, Some(RetentionPolicy::Replica), None, &caller);
            samples.push(t.elapsed());
            created.expect("bench create");
        }
        stop.store(true, Ordering::Relaxed);
        samples
    });
    (samples, service.create_stats())
}

pub fn measure_create_latency(files: usize, variant: Variant) -> (LatencyStats, CreateStats) {
    let (samples, stats) = sample_creates(files, variant);
    (LatencyStats::from_samples(samples), stats)
}

#[derive(Debug, Clone, Copy)]
pub struct Comparison {
    pub baseline: LatencyStats,
    pub quotas: LatencyStats,
    pub scanner: LatencyStats,
    /// Largest per-create traversal count seen across all runs.
    pub max_traversals_per_create: u64,
}

impl Comparison {
    pub fn quota_ratio(&self) -> f64 {
        ratio(self.quotas.p95, self.baseline.p95)
    }

    pub fn scanner_ratio(&self) -> f64 {
        ratio(self.scanner.p95, self.baseline.p95)
    }
}

fn ratio(a: Duration, b: Duration) -> f64 {
    a.as_secs_f64() / b.as_secs_f64().max(1e-9)
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "baseline         {}", self.baseline)?;
        writeln!(f, "quotas           {}  p95 ratio {:.2}", self.quotas, self.quota_ratio())?;
        writeln!(f, "quotas+scanner   {}  p95 ratio {:.2}", self.scanner, self.scanner_ratio())?;
        write!(f, "max traversals per create: {}", self.max_traversals_per_create)
    }
}

/// Interleaves `rounds` runs of each variant and pools their samples.
///
/// Interleaving spreads machine noise (frequency scaling, other tenants)
/// evenly over the variants instead of letting it land on one.
pub fn compare(files: usize, rounds: usize) -> Comparison {
    // warm allocator and caches
    let _ = sample_creates(files.min(2_000), Variant::QUOTAS);
    let mut pools: [Vec<Duration>; 3] = Default::default();
    let mut max_traversals = 0;
    let variants = [Variant::BASELINE, Variant::QUOTAS, Variant::QUOTAS_AND_SCANNER];
    for _ in 0..rounds.max(1) {
        for (pool, variant) in pools.iter_mut().zip(variants) {
            let (samples, stats) = sample_creates(files, variant);
            max_traversals = max_traversals.max(stats.max_traversals_per_create);
            pool.extend(samples);
        }
    }
    let [b, q, s] = pools;
    Comparison {
        baseline: LatencyStats::from_samples(b),
        quotas: LatencyStats::from_samples(q),
        scanner: LatencyStats::from_samples(s),
        max_traversals_per_create: max_traversals,
    }
}

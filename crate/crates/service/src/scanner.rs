//! Periodic aggregation scans.

use std::sync::{Arc, Condvar, Mutex, PoisonError};
use std::thread::JoinHandle;
use std::time::Instant;

use quota_core::{ScanError, ScanReport, ScanSchedule};

use crate::service::{QuotaService, Result, ServiceError};

#[derive(Debug, Default)]
struct Control {
    stop: bool,
    completed: Vec<u64>,
}

#[derive(Debug, Default)]
struct Shared {
    control: Mutex<Control>,
    wake: Condvar,
}

/// Runs scans against a service, on demand or on a fixed schedule.
///
/// A fire that comes due while the previous scan is still running is
/// skipped, not queued.
#[derive(Debug)]
pub struct Scanner {
    service: Arc<QuotaService>,
    shared: Arc<Shared>,
    worker: Mutex<Option<JoinHandle<()>>>,
}

impl Scanner {
    pub fn new(service: Arc<QuotaService>) -> Self {
        Self { service, shared: Arc::default(), worker: Mutex::new(None) }
    }

    pub fn service(&self) -> &Arc<QuotaService> {
        &self.service
    }

    pub fn run_scan_now(&self) -> Result<ScanReport> {
        let report = self.service.run_scan_now()?;
        self.lock_control().completed.push(report.scan_seq);
        Ok(report)
    }

    /// Scan sequence numbers completed through this scanner, in order.
    pub fn completed(&self) -> Vec<u64> {
        self.lock_control().completed.clone()
    }

    fn lock_control(&self) -> std::sync::MutexGuard<'_, Control> {
        self.shared.control.lock().unwrap_or_else(PoisonError::into_inner)
    }

    /// Starts firing scans every `schedule.interval()`, replacing any running schedule.
    ///
    /// A disabled schedule just stops the current one.
    pub fn start_schedule(&self, schedule: ScanSchedule) -> Result<()> {
        if schedule.interval().is_zero() {
            return Err(ScanError::InvalidInterval.into());
        }
        self.stop_schedule();
        if !schedule.enabled {
            return Ok(());
        }
        self.lock_control().stop = false;
        let service = Arc::clone(&self.service);
        let shared = Arc::clone(&self.shared);
        let interval = schedule.interval();
        let handle = std::thread::Builder::new()
            .name("quota-scanner".into())
            .spawn(move || {
                let mut next = Instant::now() + interval;
                loop {
                    {
                        let mut ctl = shared.control.lock().unwrap_or_else(PoisonError::into_inner);
                        loop {
                            if ctl.stop {
                                return;
                            }
                            let now = Instant::now();
                            if now >= next {
                                break;
                            }
                            ctl = shared.wake.wait_timeout(ctl, next - now).unwrap_or_else(PoisonError::into_inner).0;
                        }
                    }
                    match service.run_scan_now() {
                        Ok(report) => {
                            shared.control.lock().unwrap_or_else(PoisonError::into_inner).completed.push(report.scan_seq)
                        }
                        Err(ServiceError::Scan(ScanError::InProgress)) => tracing::debug!("scheduled scan skipped"),
                        Err(e) => tracing::warn!(error = %e, "scheduled scan failed"),
                    }
                    // fires missed while scanning are dropped rather than run back to back
                    let now = Instant::now();
                    next += interval;
                    while next <= now {
                        next += interval;
                    }
                }
            })
            .expect("spawn scanner thread");
        *self.worker.lock().unwrap_or_else(PoisonError::into_inner) = Some(handle);
        Ok(())
    }

    /// Stops future fires and waits for an in-flight scan to finish.
    pub fn stop_schedule(&self) {
        let handle = self.worker.lock().unwrap_or_else(PoisonError::into_inner).take();
        if let Some(handle) = handle {
            self.lock_control().stop = true;
            self.shared.wake.notify_all();
            let _ = handle.join();
        }
    }

    pub fn is_scheduled(&self) -> bool {
        self.worker.lock().unwrap_or_else(PoisonError::into_inner).is_some()
    }
}

impl Drop for Scanner {
    fn drop(&mut self) {
        self.stop_schedule();
    }
}

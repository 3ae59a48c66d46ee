//! Worker pool for the parallelizable crypto phases.
//!
//! With at least `C` hardware threads the phases run on a real pool of
//! width `C` and wall-clock time is charged as is. On a smaller host they
//! run on one worker and the measured serial time is divided by `C`.

use std::time::Instant;

use serde::Serialize;

use crate::error::{Error, Result};

/// Environment variable capping the pool width, for shared CI hosts.
pub const MAX_WORKERS_ENV: &str = "WONDERBOOM_MAX_WORKERS";

/// Effective seconds of a phase measured on one worker.
pub fn parallelism_model(measured_serial: f64, cores: usize, parallel: bool) -> f64 {
    if parallel && cores > 1 {
        measured_serial / cores as f64
    } else {
        measured_serial
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Timed {
    pub measured: f64,
    pub effective: f64,
    /// Ran on a real pool of the configured width.
    pub pooled: bool,
}

pub struct Workers {
    pool: rayon::ThreadPool,
    cores: usize,
    real: bool,
}

impl Workers {
    pub fn new(cores: usize) -> Result<Self> {
        if cores == 0 {
            return Err(Error::InvalidArgument("cores must be at least 1".into()));
        }
        let host = std::thread::available_parallelism().map_or(1, |n| n.get());
        let cap = std::env::var(MAX_WORKERS_ENV)
            .ok()
            .and_then(|s| s.parse::<usize>().ok())
            .filter(|&c| c > 0)
            .unwrap_or(usize::MAX);
        let width = cores.min(host).min(cap);
        let real = width >= cores && cores > 1;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(if real { cores } else { 1 })
            .build()
            .map_err(|e| Error::InvalidArgument(format!("worker pool: {e}")))?;
        Ok(Self { pool, cores, real })
    }

    pub fn cores(&self) -> usize {
        self.cores
    }

    /// True when phases run on `cores` real threads.
    pub fn is_real(&self) -> bool {
        self.real
    }

    /// Runs a parallelizable phase inside the pool.
    pub fn parallel<T: Send>(&self, f: impl FnOnce() -> T + Send) -> (T, Timed) {
        let t = Instant::now();
        let out = self.pool.install(f);
        let measured = t.elapsed().as_secs_f64();
        let effective = if self.real {
            measured
        } else {
            parallelism_model(measured, self.cores, true)
        };
        (
            out,
            Timed {
                measured,
                effective,
                pooled: self.real,
            },
        )
    }

    /// Runs a serial phase; no speedup is credited.
    pub fn serial<T>(&self, f: impl FnOnce() -> T) -> (T, Timed) {
        let t = Instant::now();
        let out = f();
        let measured = t.elapsed().as_secs_f64();
        (
            out,
            Timed {
                measured,
                effective: measured,
                pooled: false,
            },
        )
    }
}

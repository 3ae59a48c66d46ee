use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

/// Counts of the three primitive operations the latency model is built on:
/// public-key additions, signature additions and pairing verifications.
/// Shared by reference across verification workers.
#[derive(Debug, Default)]
pub struct OpMeter {
    pka: AtomicU64,
    sga: AtomicU64,
    sgv: AtomicU64,
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpCounts {
    pub pka: u64,
    pub sga: u64,
    pub sgv: u64,
}

impl OpMeter {
    pub fn pka(&self, n: u64) {
        self.pka.fetch_add(n, Ordering::Relaxed);
    }

    pub fn sga(&self, n: u64) {
        self.sga.fetch_add(n, Ordering::Relaxed);
    }

    pub fn sgv(&self, n: u64) {
        self.sgv.fetch_add(n, Ordering::Relaxed);
    }

    pub fn snapshot(&self) -> OpCounts {
        OpCounts {
            pka: self.pka.load(Ordering::Relaxed),
            sga: self.sga.load(Ordering::Relaxed),
            sgv: self.sgv.load(Ordering::Relaxed),
        }
    }
}

impl std::ops::Sub for OpCounts {
    type Output = OpCounts;
    fn sub(self, rhs: Self) -> Self {
        OpCounts {
            pka: self.pka - rhs.pka,
            sga: self.sga - rhs.sga,
            sgv: self.sgv - rhs.sgv,
        }
    }
}

impl std::ops::Add for OpCounts {
    type Output = OpCounts;
    fn add(self, rhs: Self) -> Self {
        OpCounts {
            pka: self.pka + rhs.pka,
            sga: self.sga + rhs.sga,
            sgv: self.sgv + rhs.sgv,
        }
    }
}

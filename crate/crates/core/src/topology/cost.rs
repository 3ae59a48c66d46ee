use serde::{Deserialize, Serialize};

use super::params::{TreeParams, REPRESENTATIVES};
use crate::error::{Error, Result};

/// Per-operation costs (seconds) and deployment constants driving the
/// latency model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub pka: f64,
    pub sga: f64,
    pub sgv: f64,
    pub delta_net: f64,
    pub cores: usize,
    pub delta_execute: f64,
}

impl CostModel {
    /// Zero is allowed for every cost: the latency-only model is a useful
    /// degenerate case. Negative or non-finite values and zero cores are not.
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("pka", self.pka),
            ("sga", self.sga),
            ("sgv", self.sgv),
            ("delta_net", self.delta_net),
            ("delta_execute", self.delta_execute),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidArgument(format!("{name} = {v}")));
            }
        }
        if self.cores == 0 {
            return Err(Error::InvalidArgument("cores must be at least 1".into()));
        }
        Ok(())
    }

    pub fn with_cores(self, cores: usize) -> Self {
        Self { cores, ..self }
    }
}

/// The three additive parts of the predicted latency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayBreakdown {
    pub depth: usize,
    /// δ_agg before division by the core count.
    pub aggregation: f64,
    pub compute: f64,
    pub execute: f64,
    pub network: f64,
    pub total: f64,
}

/// δ = δ_agg / C + δ_execute + Δ·d with
/// δ_agg = Σ_{i=1}^{d+1} [m·sgv + m'·sga + min(N, m·m'^i)·16·pka]
///         + m·sgv + m·sga + N·pka + sgv.
pub fn aggregation_delay(n: usize, m: usize, cm: &CostModel) -> Result<f64> {
    Ok(delay_breakdown(n, m, cm, None)?.total)
}

/// As [`aggregation_delay`], but with key reconstruction done by subtraction
/// at participation `r`: every public-key term is scaled by the missing
/// fraction `1 - r`.
pub fn aggregation_delay_at(n: usize, m: usize, cm: &CostModel, r: f64) -> Result<f64> {
    Ok(delay_breakdown(n, m, cm, Some(r))?.total)
}

pub fn delay_breakdown(
    n: usize,
    m: usize,
    cm: &CostModel,
    participation: Option<f64>,
) -> Result<DelayBreakdown> {
    cm.validate()?;
    let params = TreeParams::new(n, m)?;
    let pk_scale = match participation {
        None => 1.0,
        Some(r) if (0.0..=1.0).contains(&r) => 1.0 - r,
        Some(r) => return Err(Error::InvalidArgument(format!("participation {r}"))),
    };
    let d = params.depth();
    let mp = params.m_prime();
    let (nf, mf, mpf) = (n as f64, m as f64, mp as f64);
    let mut agg = 0.0;
    let mut width = mf;
    for _ in 1..=d + 1 {
        width *= mpf;
        let covered = width.min(nf);
        agg += mf * cm.sgv + mpf * cm.sga + covered * REPRESENTATIVES as f64 * cm.pka * pk_scale;
    }
    agg += mf * cm.sgv + mf * cm.sga + nf * cm.pka * pk_scale + cm.sgv;
    let compute = agg / cm.cores as f64;
    let network = cm.delta_net * d as f64;
    Ok(DelayBreakdown {
        depth: d,
        aggregation: agg,
        compute,
        execute: cm.delta_execute,
        network,
        total: compute + cm.delta_execute + network,
    })
}

/// Multiples of 16 from 32 up to `min(n, 2048)`.
pub fn default_fanout_range(n: usize) -> Vec<usize> {
    (32..=n.min(2048)).step_by(16).collect()
}

/// Argmin of the predicted delay over `range`, ties to the smaller `m`.
pub fn optimal_fanout(n: usize, cm: &CostModel, range: &[usize]) -> Result<(usize, f64)> {
    if range.is_empty() {
        return Err(Error::InvalidArgument("empty fanout range".into()));
    }
    let mut best: Option<(usize, f64)> = None;
    for &m in range {
        let d = aggregation_delay(n, m, cm)?;
        best = match best {
            Some((bm, bd)) if bd < d || (bd == d && bm < m) => Some((bm, bd)),
            _ => Some((m, d)),
        };
    }
    Ok(best.unwrap())
}

use serde::{Deserialize, Serialize};

use crate::adversary::AdversaryStrategy;
use crate::error::{Error, Result};
use crate::topology::{default_fanout_range, optimal_fanout, CostModel, TreeParams};

/// Leaf-group size, fixed or chosen by minimizing predicted latency.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Fanout {
    Fixed(usize),
    Auto(AutoFanout),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AutoFanout {
    Auto,
}

impl Default for Fanout {
    fn default() -> Self {
        Fanout::Auto(AutoFanout::Auto)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub n: usize,
    pub m: Fanout,
    pub cores: usize,
    /// One-way network latency in seconds.
    pub delta_net: f64,
    pub delta_execute: f64,
    /// Fraction of validators that vote.
    pub participation: f64,
    pub adversary: AdversaryStrategy,
    pub slots: usize,
    pub epochs: usize,
    /// Reward window in slots.
    pub k: usize,
    pub seed: u64,
    /// Absent validators still send votes, all with invalid signatures.
    pub worst_case_transport: bool,
    /// Run the real nodes with BLS. Off gives a timing-model-only run.
    pub crypto: bool,
    /// Slack added to internal timeouts, as a fraction of `delta_net`.
    pub timeout_slack: f64,
    /// Phases with more items than this are timed on a sample and scaled.
    pub max_real_items: usize,
    /// Cost constants for automatic fanout and predictions.
    pub cost_model: Option<CostModel>,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            n: 4096,
            m: Fanout::Fixed(256),
            cores: 4,
            delta_net: 0.1,
            delta_execute: 0.0,
            participation: 1.0,
            adversary: AdversaryStrategy::honest(),
            slots: 1,
            epochs: 1,
            k: 64,
            seed: 0,
            worst_case_transport: false,
            crypto: true,
            timeout_slack: 0.25,
            max_real_items: 2048,
            cost_model: None,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |s: String| Err(Error::InvalidArgument(s));
        if !(2.0 / 3.0 - 1e-9..=1.0).contains(&self.participation) {
            return bad(format!("participation {} outside [2/3, 1]", self.participation));
        }
        if self.cores == 0 {
            return bad("cores must be at least 1".into());
        }
        if !self.delta_net.is_finite() || self.delta_net < 0.0 {
            return bad(format!("delta_net = {}", self.delta_net));
        }
        if !self.delta_execute.is_finite() || self.delta_execute < 0.0 {
            return bad(format!("delta_execute = {}", self.delta_execute));
        }
        if self.slots == 0 || self.epochs == 0 || self.k == 0 {
            return bad("slots, epochs and k must be positive".into());
        }
        if !(0.0..=10.0).contains(&self.timeout_slack) {
            return bad(format!("timeout_slack = {}", self.timeout_slack));
        }
        if self.max_real_items == 0 {
            return bad("max_real_items must be positive".into());
        }
        if let Some(cm) = &self.cost_model {
            cm.validate()?;
        }
        self.adversary.validate(self.n)?;
        self.tree_params().map(|_| ())
    }

    pub fn resolved_m(&self) -> Result<usize> {
        match self.m {
            Fanout::Fixed(m) => Ok(m),
            Fanout::Auto(_) => {
                let cm = self.cost_model.ok_or_else(|| {
                    Error::InvalidArgument("automatic fanout needs a cost model".into())
                })?;
                let cm = cm.with_cores(self.cores);
                let range: Vec<usize> = default_fanout_range(self.n)
                    .into_iter()
                    .filter(|&m| TreeParams::new(self.n, m).is_ok())
                    .collect();
                Ok(optimal_fanout(self.n, &cm, &range)?.0)
            }
        }
    }

    pub fn tree_params(&self) -> Result<TreeParams> {
        TreeParams::new(self.n, self.resolved_m()?)
    }

    /// Number of validators that do not vote in a slot.
    pub fn absent_count(&self) -> usize {
        ((1.0 - self.participation) * self.n as f64).round() as usize
    }

    /// When the aggregator at inverted depth `i` (0 = leaf aggregator) gives
    /// up waiting, relative to the start of voting.
    pub fn timeout_at(&self, inverted_depth: usize) -> f64 {
        if inverted_depth == 0 {
            self.delta_net
        } else {
            (inverted_depth + 1) as f64 * self.delta_net + self.timeout_slack * self.delta_net
        }
    }
}

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const COMMITTEE_SIZE: usize = 128;
pub const REPRESENTATIVES: usize = 16;
pub const SLOTS_PER_EPOCH: usize = 32;

/// Shape of one aggregation tree: `n` validators, leaf groups of `m`,
/// internal fanout `m / 16`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TreeParams {
    pub n: usize,
    pub m: usize,
}

impl TreeParams {
    pub fn new(n: usize, m: usize) -> Result<Self> {
        if m == 0 || m % REPRESENTATIVES != 0 {
            return Err(Error::Infeasible(format!(
                "fanout m={m} must be a positive multiple of {REPRESENTATIVES}"
            )));
        }
        if m / REPRESENTATIVES < 2 {
            return Err(Error::Infeasible(format!(
                "fanout m={m} gives internal fanout below 2"
            )));
        }
        if n < m {
            return Err(Error::Infeasible(format!("N={n} is smaller than m={m}")));
        }
        if n < COMMITTEE_SIZE {
            return Err(Error::Infeasible(format!(
                "N={n} cannot staff a {COMMITTEE_SIZE}-member committee"
            )));
        }
        if n > u32::MAX as usize {
            return Err(Error::Infeasible(format!("N={n} exceeds the id space")));
        }
        Ok(Self { n, m })
    }

    pub fn m_prime(&self) -> usize {
        self.m / REPRESENTATIVES
    }

    /// L = ceil(N / m); the last group may be short.
    pub fn leaf_groups(&self) -> usize {
        self.n.div_ceil(self.m)
    }

    pub fn depth(&self) -> usize {
        layer_counts(self.leaf_groups(), self.m_prime()).len() + 1
    }

    /// Committees per layer, from depth 1 (children of the root) down to the
    /// leaf-aggregator layer at depth d-1.
    pub fn layer_counts(&self) -> Vec<usize> {
        layer_counts(self.leaf_groups(), self.m_prime())
    }
}

/// Reduces `leaves` committees by `fanout` until one layer fits under the
/// root. Always at least one layer, so the smallest tree has depth 2.
fn layer_counts(leaves: usize, fanout: usize) -> Vec<usize> {
    let mut counts = vec![leaves];
    while *counts.last().unwrap() > fanout {
        let next = counts.last().unwrap().div_ceil(fanout);
        counts.push(next);
    }
    counts.reverse();
    counts
}

/// d = 1 + max(1, ceil(log_{m'}(ceil(N/m)))), with the logarithm done in
/// integers.
pub fn depth(n: usize, m: usize) -> Result<usize> {
    Ok(TreeParams::new(n, m)?.depth())
}

#[cfg(test)]
mod tests {
    use super::*;

    // Independent evaluation through floating-point logarithms.
    fn depth_by_log(n: usize, m: usize) -> usize {
        let l = n.div_ceil(m) as f64;
        let mp = (m / 16) as f64;
        let k = (l.ln() / mp.ln() - 1e-12).ceil().max(1.0);
        k as usize + 1
    }

    #[test]
    fn depth_examples() {
        assert_eq!(depth(1_000_000, 256).unwrap(), 4);
        assert_eq!(depth(1 << 20, 256).unwrap(), 4);
        assert_eq!(depth(256, 256).unwrap(), 2);
        assert_eq!(depth(65_536, 256).unwrap(), 3);
        assert_eq!(depth(4096, 256).unwrap(), 2);
        assert_eq!(depth(2048, 128).unwrap(), 3);
    }

    #[test]
    fn depth_agrees_with_logarithm() {
        for m in (32..=512).step_by(16) {
            for n in [m, m + 1, 1000, 4096, 10_000, 65_536, 100_000, 1_000_000] {
                if n < m || n < 128 {
                    continue;
                }
                assert_eq!(depth(n, m).unwrap(), depth_by_log(n, m), "n={n} m={m}");
            }
        }
    }

    #[test]
    fn layer_counts_reduce_to_root() {
        let p = TreeParams::new(1_000_000, 256).unwrap();
        assert_eq!(p.layer_counts(), vec![16, 245, 3907]);
        let p = TreeParams::new(1 << 20, 256).unwrap();
        assert_eq!(p.leaf_groups(), 4096);
        assert_eq!(p.layer_counts(), vec![16, 256, 4096]);
        let p = TreeParams::new(4096, 256).unwrap();
        assert_eq!(p.layer_counts(), vec![16]);
    }

    #[test]
    fn infeasible_params() {
        assert!(TreeParams::new(1000, 100).is_err());
        assert!(TreeParams::new(1000, 16).is_err());
        assert!(TreeParams::new(200, 256).is_err());
        assert!(TreeParams::new(64, 32).is_err());
        assert!(depth(4096, 250).is_err());
    }
}

//! Brute-force check of the hypergeometric closed form: every committee of
//! every size is enumerated as a bitmask, with the faulty validators taken
//! to be ids `0..f`.

use num_rational::BigRational;
use num_traits::ToPrimitive;
use rayon::prelude::*;
use serde::Serialize;

use super::hypergeom::{binomial_exact, hypergeom_pmf, hypergeom_pmf_exact};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub max_n: u64,
    /// (N, f, n, k) tuples compared.
    pub cases: u64,
    pub exact_mismatches: u64,
    /// Worst relative error of the log-space evaluation.
    pub max_float_rel_err: f64,
}

impl OracleReport {
    pub fn passed(&self) -> bool {
        self.exact_mismatches == 0
    }
}

/// `counts[f][n][k]`: committees of size `n` containing exactly `k` of the
/// first `f` validators, over all `2^N` subsets.
fn enumerate(n_total: u64) -> Vec<Vec<Vec<u64>>> {
    let size = n_total as usize + 1;
    let masks = 1u64 << n_total;
    // split the mask space so the walk parallelizes
    let chunk = (masks / 64).max(1);
    (0..masks.div_ceil(chunk))
        .into_par_iter()
        .map(|c| {
            let mut counts = vec![vec![vec![0u64; size]; size]; size];
            for mask in c * chunk..((c + 1) * chunk).min(masks) {
                let n = mask.count_ones() as usize;
                for (f, row) in counts.iter_mut().enumerate() {
                    let k = (mask & ((1u64 << f) - 1)).count_ones() as usize;
                    row[n][k] += 1;
                }
            }
            counts
        })
        .reduce(
            || vec![vec![vec![0u64; size]; size]; size],
            |mut a, b| {
                for (x, y) in a.iter_mut().flatten().flatten().zip(b.iter().flatten().flatten()) {
                    *x += y;
                }
                a
            },
        )
}

pub fn hypergeom_oracle(max_n: u64) -> Result<OracleReport> {
    if max_n > 30 {
        return Err(Error::InvalidArgument(format!(
            "exhaustive enumeration is capped at N = 30, got {max_n}"
        )));
    }
    let mut report = OracleReport {
        max_n,
        cases: 0,
        exact_mismatches: 0,
        max_float_rel_err: 0.0,
    };
    for n_total in 1..=max_n {
        let counts = enumerate(n_total);
        for f in 0..=n_total {
            for n in 0..=n_total {
                let total = binomial_exact(n_total, n);
                for k in 0..=n {
                    report.cases += 1;
                    let counted = counts[f as usize][n as usize][k as usize];
                    let empirical =
                        BigRational::new(counted.into(), total.clone().into());
                    let exact = hypergeom_pmf_exact(n_total, f, n, k)?;
                    if empirical != exact {
                        report.exact_mismatches += 1;
                    }
                    let e = exact.to_f64().unwrap_or(0.0);
                    let a = hypergeom_pmf(n_total, f, n, k)?;
                    if e > 0.0 {
                        report.max_float_rel_err = report.max_float_rel_err.max((a - e).abs() / e);
                    } else if a != 0.0 {
                        report.max_float_rel_err = f64::INFINITY;
                    }
                }
            }
        }
    }
    Ok(report)
}

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, Zero};
use statrs::function::factorial::ln_binomial;

use crate::error::{Error, Result};

fn check(n_total: u64, f: u64, n: u64, k: u64) -> Result<()> {
    if f > n_total || n > n_total {
        return Err(Error::InvalidArgument(format!(
            "hypergeometric needs f, n <= N (N={n_total}, f={f}, n={n})"
        )));
    }
    if k > n {
        return Err(Error::OutOfRange {
            index: k as usize,
            lo: 0,
            hi: n as usize + 1,
        });
    }
    Ok(())
}

/// Probability of exactly `k` faulty members in a size-`n` committee drawn
/// without replacement from `N` validators of which `f` are faulty.
/// Evaluated in log space, so `N` in the millions is fine.
pub fn hypergeom_pmf(n_total: u64, f: u64, n: u64, k: u64) -> Result<f64> {
    check(n_total, f, n, k)?;
    if k > f || n - k > n_total - f {
        return Ok(0.0);
    }
    Ok(ln_pmf(n_total, f, n, k).exp().min(1.0))
}

/// Above this committee size the O(n) product form gives way to log-gamma.
const PRODUCT_LIMIT: u64 = 100_000;

/// `ln C(n,k) + sum ln((f-i)/(N-i)) + sum ln((N-f-j)/(N-k-j))`. Every factor
/// is a ratio of nearby integers, so for small committees the error stays
/// near `n` ulps even when `N` is in the millions; differencing log-gamma
/// values of size `N ln N` would lose about nine digits.
fn ln_pmf(n_total: u64, f: u64, n: u64, k: u64) -> f64 {
    if n > PRODUCT_LIMIT {
        return ln_binomial(f, k) + ln_binomial(n_total - f, n - k) - ln_binomial(n_total, n);
    }
    let small = k.min(n - k);
    let mut s = 0.0;
    for i in 0..small {
        s += ((n - i) as f64 / (i + 1) as f64).ln();
    }
    for i in 0..k {
        s += ((f - i) as f64 / (n_total - i) as f64).ln();
    }
    for j in 0..n - k {
        s += ((n_total - f - j) as f64 / (n_total - k - j) as f64).ln();
    }
    s
}

pub fn binomial_exact(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut r = BigUint::one();
    for i in 0..k {
        r = r * (n - i) / (i + 1);
    }
    r
}

/// Exact rational form of [`hypergeom_pmf`].
pub fn hypergeom_pmf_exact(n_total: u64, f: u64, n: u64, k: u64) -> Result<BigRational> {
    check(n_total, f, n, k)?;
    if k > f || n - k > n_total - f {
        return Ok(BigRational::zero());
    }
    let num = binomial_exact(f, k) * binomial_exact(n_total - f, n - k);
    Ok(BigRational::new(num.into(), binomial_exact(n_total, n).into()))
}

/// `P[X >= lo]` for the committee's faulty count `X`.
pub fn hypergeom_tail(n_total: u64, f: u64, n: u64, lo: u64) -> Result<f64> {
    check(n_total, f, n, 0)?;
    let mut s = 0.0;
    for k in lo..=n {
        s += hypergeom_pmf(n_total, f, n, k)?;
    }
    Ok(s.min(1.0))
}

/// `P[X >= ceil(2n/3)]`: a faulty supermajority in one committee.
pub fn supermajority_tail(n_total: u64, f: u64, n: u64) -> Result<f64> {
    hypergeom_tail(n_total, f, n, (2 * n).div_ceil(3))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::ToPrimitive;

    #[test]
    fn degenerate_cases() {
        assert_eq!(hypergeom_pmf(10, 3, 5, 4).unwrap(), 0.0);
        assert!((hypergeom_pmf(10, 5, 10, 5).unwrap() - 1.0).abs() < 1e-12);
        assert!(hypergeom_pmf(10, 3, 11, 1).is_err());
        assert!(hypergeom_pmf(10, 11, 5, 1).is_err());
        assert!(hypergeom_pmf(10, 3, 5, 6).is_err());
        assert!((supermajority_tail(50, 50, 9).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pmf_sums_to_one() {
        for (nt, f, n) in [(1_000_000u64, 333_333u64, 128u64), (500, 120, 64), (30, 30, 7)] {
            let s: f64 = (0..=n).map(|k| hypergeom_pmf(nt, f, n, k).unwrap()).sum();
            assert!((s - 1.0).abs() < 1e-12, "{nt} {f} {n}: {s}");
        }
    }

    #[test]
    fn float_matches_exact_for_small_n() {
        for k in 0..=6 {
            let e = hypergeom_pmf_exact(40, 13, 6, k).unwrap().to_f64().unwrap();
            let a = hypergeom_pmf(40, 13, 6, k).unwrap();
            assert!((a - e).abs() <= 1e-12 * e.max(1e-300), "{k}");
        }
        assert_eq!(binomial_exact(25, 12), BigUint::from(5_200_300u32));
    }
}

//! Closed-form censorship and economics calculators, and the resilience
//! curves comparing tree aggregation with the epoch-based design.

mod hypergeom;
mod oracle;

use num_rational::Ratio;
use rand::Rng;
use serde::Serialize;

pub use hypergeom::{
    binomial_exact, hypergeom_pmf, hypergeom_pmf_exact, hypergeom_tail, supermajority_tail,
};
pub use oracle::{hypergeom_oracle, OracleReport};

use crate::error::{Error, Result};
use crate::seed;
use crate::topology::{TreeParams, COMMITTEE_SIZE, REPRESENTATIVES, SLOTS_PER_EPOCH};

fn check_prob(name: &str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("{name} = {p} is not a probability")));
    }
    Ok(())
}

/// Chance that no honest member of an `n`-member committee is a
/// representative, when each member is faulty with probability `p_faulty`
/// and independently a representative with probability `p_rep`.
pub fn all_reps_faulty(p_faulty: f64, p_rep: f64, n: u32) -> Result<f64> {
    check_prob("p_faulty", p_faulty)?;
    check_prob("p_rep", p_rep)?;
    let per_member = p_faulty + (1.0 - p_rep) - p_faulty * (1.0 - p_rep);
    Ok(per_member.powi(n as i32))
}

/// Monte Carlo estimate of [`all_reps_faulty`].
pub fn all_reps_faulty_monte_carlo(p_faulty: f64, p_rep: f64, n: u32, trials: u64, seed: u64) -> f64 {
    let mut rng = seed::rng("all-reps-faulty", seed, &[]);
    let mut hits = 0u64;
    for _ in 0..trials {
        let captured = (0..n).all(|_| {
            let faulty = rng.random_bool(p_faulty);
            let rep = rng.random_bool(p_rep);
            faulty || !rep
        });
        hits += captured as u64;
    }
    hits as f64 / trials as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DailyCensorship {
    /// At least one censored committee in a day.
    pub probability: f64,
    pub expected_events: f64,
}

pub fn daily_censorship(p_event: f64, slots_per_day: u64, committees_per_slot: u64) -> Result<DailyCensorship> {
    check_prob("p_event", p_event)?;
    let trials = (slots_per_day * committees_per_slot) as f64;
    Ok(DailyCensorship {
        probability: -(trials * (-p_event).ln_1p()).exp_m1(),
        expected_events: trials * p_event,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EconomicLoss {
    /// Honest share x malicious-proposer share x suppressed share.
    pub loss_factor: Ratio<i64>,
    pub annual_reward: f64,
    /// Loss averaged over all validators: `loss_factor * annual_reward`.
    pub per_validator_loss: f64,
    /// The same total spread over honest validators only.
    pub per_honest_validator_loss: f64,
    pub aggregate_loss: f64,
}

/// Yearly reward lost to proposers that suppress attestations. With a third
/// of proposers malicious, each suppressing a third of honest attestations,
/// the loss factor is `2/3 * 1/3 * 1/3 = 2/27`.
pub fn economic_loss(
    reward_per_attestation: f64,
    attestations_per_year: f64,
    n: u64,
    honest_fraction: f64,
) -> Result<EconomicLoss> {
    check_prob("honest_fraction", honest_fraction)?;
    if reward_per_attestation < 0.0 || attestations_per_year < 0.0 || honest_fraction == 0.0 {
        return Err(Error::InvalidArgument("rewards must be nonnegative and some validators honest".into()));
    }
    let loss_factor = Ratio::new(2, 3) * Ratio::new(1, 3) * Ratio::new(1, 3);
    let lf = *loss_factor.numer() as f64 / *loss_factor.denom() as f64;
    let annual = reward_per_attestation * attestations_per_year;
    let per_validator = lf * annual;
    let aggregate = per_validator * n as f64;
    let honest = honest_fraction * n as f64;
    Ok(EconomicLoss {
        loss_factor,
        annual_reward: annual,
        per_validator_loss: per_validator,
        per_honest_validator_loss: if honest > 0.0 { aggregate / honest } else { 0.0 },
        aggregate_loss: aggregate,
    })
}

/// Chance of a minority-committee attack opening somewhere: a 112-member
/// leaf group with at least `min_leaves` faulty members times a 16-member
/// representative set with at least one faulty member, both drawn as
/// independent hypergeometric samples.
pub fn attack_opening_from(n: u64, f: u64, min_leaves: u64) -> Result<f64> {
    let leaves = (COMMITTEE_SIZE - REPRESENTATIVES) as u64;
    let reps = REPRESENTATIVES as u64;
    Ok(hypergeom_tail(n, f, leaves, min_leaves)? * hypergeom_tail(n, f, reps, 1)?)
}

/// Attack-opening probability counting leaf groups with two or more faulty
/// leaves. This lower limit gives 0.998 at f = N/3 and 0.548 at f = 0.05 N;
/// [`attack_opening_three`] is the stricter three-leaf count.
pub fn attack_opening(n: u64, f: u64) -> Result<f64> {
    attack_opening_from(n, f, 2)
}

/// Same probability with a lower limit of three faulty leaves.
pub fn attack_opening_three(n: u64, f: u64) -> Result<f64> {
    attack_opening_from(n, f, 3)
}

/// Lower bound on one honest leaf's inclusion in a single slot under the
/// minority-committee attack at tree depth `d`:
/// `(2/3) * (2/3)^(d-2) * ((16 - 16/3) / 15)`.
pub fn per_slot_inclusion(d: u32) -> Result<f64> {
    if d < 2 {
        return Err(Error::InvalidArgument(format!("depth {d} < 2")));
    }
    let two_thirds: f64 = 2.0 / 3.0;
    let random_lane = (16.0 - 16.0 / 3.0) / 15.0;
    Ok(two_thirds * two_thirds.powi(d as i32 - 2) * random_lane)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Resilience {
    /// `(1-p)^k`: one validator misses every slot of the window.
    pub window_loss: f64,
    /// `(1-(1-p)^k)^L`: no leaf group is censored throughout the window.
    pub no_committee_censored: f64,
}

pub fn resilience(p: f64, k: u32, l: u64) -> Result<Resilience> {
    check_prob("p", p)?;
    let window_loss = (1.0 - p).powi(k as i32);
    Ok(Resilience {
        window_loss,
        no_committee_censored: (1.0 - window_loss).powf(l as f64),
    })
}

/// `1 - (1/3)^k`: one vote per epoch, a faulty proposer a third of the
/// time.
pub fn ethereum_resilience(k_epochs: u32) -> f64 {
    1.0 - (1.0f64 / 3.0).powi(k_epochs as i32)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResilienceParams {
    pub n: u64,
    pub f: u64,
    pub committee_size: u64,
    pub m: u64,
    pub m_prime: u64,
    pub d: u32,
    pub k: u32,
    pub l: u64,
    pub representative_prob: f64,
    pub representatives: u64,
}

impl ResilienceParams {
    pub fn new(n: u64, f: u64, m: u64, k: u32) -> Result<Self> {
        let tp = TreeParams::new(n as usize, m as usize)?;
        if f > n {
            return Err(Error::InvalidArgument(format!("f = {f} > N = {n}")));
        }
        Ok(Self {
            n,
            f,
            committee_size: COMMITTEE_SIZE as u64,
            m,
            m_prime: tp.m_prime() as u64,
            d: tp.depth() as u32,
            k,
            l: tp.leaf_groups() as u64,
            representative_prob: 1.0 / 8.0,
            representatives: REPRESENTATIVES as u64,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResilienceReport {
    pub per_slot_inclusion: f64,
    pub window_loss: f64,
    pub no_committee_censored: f64,
    /// The epoch-based baseline after the same number of slots.
    pub ethereum_resilience: f64,
    pub ethereum_epochs: u32,
    pub attack_opening: f64,
    pub all_reps_faulty: f64,
    pub supermajority_tail: f64,
}

pub fn resilience_report(p: &ResilienceParams) -> Result<ResilienceReport> {
    let per_slot = per_slot_inclusion(p.d)?;
    let r = resilience(per_slot, p.k, p.l)?;
    let epochs = p.k / SLOTS_PER_EPOCH as u32;
    let faulty_frac = p.f as f64 / p.n as f64;
    Ok(ResilienceReport {
        per_slot_inclusion: per_slot,
        window_loss: r.window_loss,
        no_committee_censored: r.no_committee_censored,
        ethereum_resilience: ethereum_resilience(epochs),
        ethereum_epochs: epochs,
        attack_opening: attack_opening(p.n, p.f)?,
        all_reps_faulty: all_reps_faulty(faulty_frac, p.representative_prob, p.committee_size as u32)?,
        supermajority_tail: supermajority_tail(p.n, p.f, p.committee_size)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurveRow {
    /// Window length in slots.
    pub k: u32,
    pub ethereum_epochs: u32,
    /// `1-(1-p)^k` for one validator.
    pub wonderboom_validator: f64,
    /// `(1-(1-p)^k)^L` for every leaf group at once.
    pub wonderboom_network: f64,
    pub ethereum: f64,
}

/// One row per window length in slots; the epoch-based side only gets a
/// vote opportunity per completed epoch.
pub fn resilience_curve(params: &ResilienceParams, ks: impl IntoIterator<Item = u32>) -> Result<Vec<CurveRow>> {
    let p = per_slot_inclusion(params.d)?;
    ks.into_iter()
        .map(|k| {
            let r = resilience(p, k, params.l)?;
            let epochs = k / SLOTS_PER_EPOCH as u32;
            Ok(CurveRow {
                k,
                ethereum_epochs: epochs,
                wonderboom_validator: 1.0 - r.window_loss,
                wonderboom_network: r.no_committee_censored,
                ethereum: ethereum_resilience(epochs),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn representative_capture() {
        assert!(rel(all_reps_faulty(1.0 / 3.0, 0.125, 128).unwrap(), 1.45e-5) < 0.01);
        assert_eq!(all_reps_faulty(0.0, 0.125, 10).unwrap(), 0.875f64.powi(10));
        assert!(all_reps_faulty(1.5, 0.1, 3).is_err());
        let exact = all_reps_faulty(1.0 / 3.0, 0.125, 8).unwrap();
        let trials = 2_000_000u64;
        let mc = all_reps_faulty_monte_carlo(1.0 / 3.0, 0.125, 8, trials, 1);
        let sigma = (exact * (1.0 - exact) / trials as f64).sqrt();
        assert!((mc - exact).abs() < 3.0 * sigma, "{mc} vs {exact}");
    }

    #[test]
    fn daily_rates() {
        let d = daily_censorship(1.45e-5, 7200, 64).unwrap();
        assert!((d.probability - 0.9987).abs() < 5e-4);
        assert!(d.expected_events > 6.0);
        assert_eq!(daily_censorship(0.0, 7200, 64).unwrap().probability, 0.0);
        let t = daily_censorship(0.01, 10, 2).unwrap();
        assert!((t.probability - (1.0 - 0.99f64.powi(20))).abs() < 1e-14);
    }

    #[test]
    fn economics() {
        let e = economic_loss(0.03, 2465.0 / 0.03, 1_000_000, 2.0 / 3.0).unwrap();
        assert_eq!(e.loss_factor, Ratio::new(2, 27));
        assert!((e.per_validator_loss - 2465.0 * 2.0 / 27.0).abs() < 1e-9);
        assert!(e.aggregate_loss > 136e6);
        assert!((e.per_honest_validator_loss * 2.0 / 3.0 - e.per_validator_loss).abs() < 1e-9);
        let zero = economic_loss(0.0, 1000.0, 1_000_000, 2.0 / 3.0).unwrap();
        assert_eq!(zero.aggregate_loss, 0.0);
    }

    #[test]
    fn attack_opening_goldens() {
        assert_eq!(attack_opening(1_000_000, 0).unwrap(), 0.0);
        assert!((attack_opening(1_000_000, 333_333).unwrap() - 0.998).abs() < 1e-3);
        assert!((attack_opening(1_000_000, 50_000).unwrap() - 0.548).abs() < 5e-3);
        let three = attack_opening_three(1_000_000, 50_000).unwrap();
        assert!((three - 0.5167).abs() < 1e-3, "{three}");
        let mut prev = 0.0;
        for f in (0..=300_000).step_by(25_000) {
            let v = attack_opening(1_000_000, f).unwrap();
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn inclusion_and_resilience() {
        assert!((per_slot_inclusion(2).unwrap() - (2.0 / 3.0) * (32.0 / 45.0)).abs() < 1e-15);
        assert!((per_slot_inclusion(3).unwrap() - 0.3160).abs() < 1e-4);
        assert!((per_slot_inclusion(4).unwrap() - 0.2107).abs() < 1e-4);
        assert!(per_slot_inclusion(1).is_err());

        let r = resilience(per_slot_inclusion(4).unwrap(), 64, 4096).unwrap();
        assert!((r.no_committee_censored - 0.998).abs() < 1e-3);
        let one = resilience(1.0, 5, 100).unwrap();
        assert_eq!((one.window_loss, one.no_committee_censored), (0.0, 1.0));
        assert!((resilience(0.3, 1, 1).unwrap().no_committee_censored - 0.3).abs() < 1e-15);

        assert!((ethereum_resilience(2) - 0.889).abs() < 1e-3);
        assert!(ethereum_resilience(6) >= 0.998);
        assert!((ethereum_resilience(1) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn curve_shape() {
        let params = ResilienceParams::new(1 << 20, (1 << 20) / 3, 256, 64).unwrap();
        assert_eq!((params.d, params.l), (4, 4096));
        let rows = resilience_curve(&params, 1..=512).unwrap();
        assert_eq!(rows.len(), 512);
        for w in rows.windows(2) {
            assert!(w[1].wonderboom_validator >= w[0].wonderboom_validator);
            assert!(w[1].wonderboom_network >= w[0].wonderboom_network);
        }
        assert!(rows.iter().all(|r| r.wonderboom_validator >= r.ethereum));
        assert!(rows[511].wonderboom_network > 1.0 - 1e-9 && rows[511].ethereum > 0.99);
    }
}

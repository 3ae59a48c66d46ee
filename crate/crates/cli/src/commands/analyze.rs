use anyhow::{ensure, Result};
use serde::Serialize;
use wonderboom_core::analysis::{
    all_reps_faulty, daily_censorship, economic_loss, ethereum_resilience, hypergeom_oracle,
    attack_opening, attack_opening_three, resilience_curve, resilience_report, supermajority_tail,
    DailyCensorship, EconomicLoss, ResilienceParams, ResilienceReport,
};
use wonderboom_core::topology::{COMMITTEE_SIZE, SLOTS_PER_EPOCH};

use crate::config::{parse_k_range, FileConfig, OracleMode};
use crate::output::{f, OutDir};

pub const RESILIENCE_HEADER: &[&str] = &["k", "ethereum_epochs", "wonderboom_validator", "wonderboom_network", "ethereum"];

/// 12-second slots.
pub const SLOTS_PER_DAY: u64 = 7_200;
/// Beacon committees per slot at full size.
pub const COMMITTEES_PER_SLOT: u64 = 64;
/// Largest N the exhaustive oracle enumerates in `small` mode.
pub const SMALL_ORACLE_N: u64 = 25;

#[derive(Debug, Serialize)]
struct Analysis {
    params: ResilienceParams,
    report: ResilienceReport,
    /// Tail of faulty members reaching a third of one committee.
    supermajority_tail: f64,
    all_reps_faulty: f64,
    daily_censorship: DailyCensorship,
    attack_opening: f64,
    /// Same attack with only 5% of validators faulty.
    attack_opening_five_percent: f64,
    /// With three faulty leaves required instead of two.
    attack_opening_three_leaves: f64,
    ethereum_resilience_2_epochs: f64,
    ethereum_resilience_6_epochs: f64,
    economic_loss: EconomicLoss,
}

pub fn run(cfg: &FileConfig, out: &mut OutDir) -> Result<()> {
    let a = &cfg.analyze;
    let f_count = a.f.unwrap_or(a.n / 3);
    ensure!(f_count <= a.n, "f = {f_count} exceeds N = {}", a.n);
    let params = ResilienceParams::new(a.n, f_count, a.m, a.k)?;
    let faulty = f_count as f64 / a.n as f64;
    let reps_faulty = all_reps_faulty(faulty, params.representative_prob, COMMITTEE_SIZE as u32)?;
    let analysis = Analysis {
        params,
        report: resilience_report(&params)?,
        supermajority_tail: supermajority_tail(a.n, f_count, COMMITTEE_SIZE as u64)?,
        all_reps_faulty: reps_faulty,
        daily_censorship: daily_censorship(reps_faulty, SLOTS_PER_DAY, COMMITTEES_PER_SLOT)?,
        attack_opening: attack_opening(a.n, f_count)?,
        attack_opening_five_percent: attack_opening(a.n, a.n / 20)?,
        attack_opening_three_leaves: attack_opening_three(a.n, f_count)?,
        ethereum_resilience_2_epochs: ethereum_resilience(2),
        ethereum_resilience_6_epochs: ethereum_resilience(6),
        economic_loss: economic_loss(a.reward_per_attestation, a.attestations_per_year, a.n, 1.0 - faulty)?,
    };
    out.json("analysis.json", &analysis, true)?;

    let ks = parse_k_range(&a.k_range)?;
    let curve = resilience_curve(&params, ks)?;
    out.csv(
        "resilience.csv",
        RESILIENCE_HEADER,
        curve.iter().map(|r| {
            [
                r.k.to_string(),
                r.ethereum_epochs.to_string(),
                f(r.wonderboom_validator),
                f(r.wonderboom_network),
                f(r.ethereum),
            ]
        }),
        true,
    )?;

    println!("supermajority tail      {:.3e}", analysis.supermajority_tail);
    println!(
        "all reps faulty         {:.3e}  daily {:.4} ({:.2} events/day)",
        reps_faulty, analysis.daily_censorship.probability, analysis.daily_censorship.expected_events
    );
    println!(
        "attack opening          {:.4} (f = {}), {:.4} (5%)",
        analysis.attack_opening, f_count, analysis.attack_opening_five_percent
    );
    println!(
        "resilience k={}         {:.4} (d = {}, L = {}); epoch-based, {} epochs: {:.4}",
        a.k,
        analysis.report.no_committee_censored,
        params.d,
        params.l,
        a.k as usize / SLOTS_PER_EPOCH,
        analysis.report.ethereum_resilience
    );
    println!(
        "economic loss           factor {}  aggregate ${:.0}",
        analysis.economic_loss.loss_factor, analysis.economic_loss.aggregate_loss
    );

    if let Some(OracleMode::Small) = a.oracle {
        let report = hypergeom_oracle(SMALL_ORACLE_N)?;
        out.json("oracle.json", &report, true)?;
        println!(
            "oracle N <= {}: {} cases, {} exact mismatches, worst float error {:.2e}",
            report.max_n, report.cases, report.exact_mismatches, report.max_float_rel_err
        );
        if !report.passed() {
            return Err(wonderboom_core::Error::Invariant(format!(
                "closed-form pmf disagrees with enumeration in {} cases",
                report.exact_mismatches
            ))
            .into());
        }
    }
    Ok(())
}

use anyhow::Result;
use wonderboom_core::protocol::{reward_window_eligibility, WindowScheme};
use wonderboom_core::simulator::{run_epochs, run_ethereum_baseline, run_slot_with, EpochRun, SlotResult};

use super::{
    check_decomposes, outcome, phase_rows, print_slot, results_row, sweep_points, Outcome, Registries,
    PHASES_HEADER, RESULTS_HEADER,
};
use crate::config::{FileConfig, Mode};
use crate::output::OutDir;

pub const EPOCH_SLOTS_HEADER: &[&str] = &[
    "point",
    "n",
    "participation",
    "epoch",
    "slot",
    "popcount_largest",
    "popcount_random",
    "honest_voters",
    "honest_included",
    "victims",
    "victims_included",
    "targets",
    "targets_included",
    "collateral",
    "silent_proposer",
];

pub const INCLUSION_HEADER: &[&str] = &["validator", "slot", "included_largest", "included_random"];

pub const REWARDS_HEADER: &[&str] = &["point", "window_start", "k", "validators", "eligible"];

/// Inclusion tables above this many rows are skipped.
pub const MAX_INCLUSION_ROWS: usize = 4_000_000;

pub fn run(cfg: &FileConfig, out: &mut OutDir) -> Result<()> {
    match cfg.simulate.mode {
        Mode::Slot => slots(cfg, out),
        Mode::Epochs => epochs(cfg, out),
    }
}

fn slots(cfg: &FileConfig, out: &mut OutDir) -> Result<()> {
    let mut regs = Registries::default();
    let mut results: Vec<SlotResult> = Vec::new();
    for p in sweep_points(cfg) {
        let reg = regs.get(&p);
        let r = run_slot_with(&p, reg)?;
        check_decomposes(&r)?;
        print_slot(&r);
        results.push(r);
        if cfg.simulate.baseline {
            let b = run_ethereum_baseline(&p, reg)?;
            check_decomposes(&b)?;
            print_slot(&b);
            results.push(b);
        }
    }
    write_results(cfg, out, &results)
}

pub fn write_results(cfg: &FileConfig, out: &mut OutDir, results: &[SlotResult]) -> Result<()> {
    let wc = cfg.simulation.worst_case_transport;
    out.csv("results.csv", RESULTS_HEADER, results.iter().map(|r| results_row(r, wc)), false)?;
    out.csv("phases.csv", PHASES_HEADER, results.iter().flat_map(phase_rows), false)?;
    let outcomes: Vec<Outcome> = results.iter().map(outcome).collect();
    out.json("outcomes.json", &outcomes, true)
}

fn epochs(cfg: &FileConfig, out: &mut OutDir) -> Result<()> {
    let mut regs = Registries::default();
    let points = sweep_points(cfg);
    let mut timed = Vec::new();
    let mut slot_rows = Vec::new();
    let mut reward_rows = Vec::new();
    for (i, p) in points.iter().enumerate() {
        let run = run_epochs(p, regs.get(p))?;
        for r in run.slots.iter().filter(|r| r.timed) {
            check_decomposes(r)?;
        }
        slot_rows.extend(run.slots.iter().map(|r| epoch_slot_row(i, r)));
        reward_rows.extend(reward_rows_for(i, p.k, &run)?);
        let rows = run.ledger.validators() * run.ledger.slots();
        let name = if points.len() == 1 { "inclusion.csv".to_string() } else { format!("inclusion_{i}.csv") };
        if rows <= MAX_INCLUSION_ROWS {
            out.csv(
                &name,
                INCLUSION_HEADER,
                run.ledger.rows().map(|r| {
                    [
                        r.validator.to_string(),
                        r.slot.to_string(),
                        (r.included_largest as u8).to_string(),
                        (r.included_random as u8).to_string(),
                    ]
                }),
                true,
            )?;
        } else {
            eprintln!("note: {name} skipped ({rows} rows)");
        }
        let included: usize = run.slots.iter().map(|r| r.stats.honest_included).sum();
        let voters: usize = run.slots.iter().map(|r| r.stats.honest_voters).sum();
        println!(
            "point {i}: N={} {} slots, honest inclusion {:.4}",
            p.n,
            run.slots.len(),
            included as f64 / voters.max(1) as f64
        );
        timed.extend(run.slots.into_iter().filter(|r| r.timed));
    }
    out.csv("epoch_slots.csv", EPOCH_SLOTS_HEADER, slot_rows, true)?;
    out.csv("rewards.csv", REWARDS_HEADER, reward_rows, true)?;
    write_results(cfg, out, &timed)
}

fn epoch_slot_row(point: usize, r: &SlotResult) -> Vec<String> {
    let s = &r.stats;
    let mut row = vec![point.to_string(), r.n.to_string(), r.participation.to_string()];
    row.extend(
        [
            r.epoch as usize,
            r.slot as usize,
            r.popcount_largest,
            r.popcount_random,
            s.honest_voters,
            s.honest_included,
            s.victims,
            s.victims_included,
            s.targets,
            s.targets_included,
            s.collateral,
            s.silent_proposer as usize,
        ]
        .map(|v| v.to_string()),
    );
    row
}

/// Fixed `k`-slot windows; a run shorter than one window has no rows.
fn reward_rows_for(point: usize, k: usize, run: &EpochRun) -> Result<Vec<Vec<String>>> {
    if run.ledger.slots() < k {
        return Ok(Vec::new());
    }
    let records = run.ledger.to_records();
    Ok(reward_window_eligibility(&records, k, WindowScheme::Fixed)?
        .into_iter()
        .map(|w| {
            vec![
                point.to_string(),
                w.start.to_string(),
                k.to_string(),
                w.eligible.len().to_string(),
                w.eligible.iter().filter(|&&e| e).count().to_string(),
            ]
        })
        .collect())
}

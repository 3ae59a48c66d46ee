//! One module per subcommand, plus the sweep and row helpers they share.

pub mod analyze;
pub mod bench;
pub mod compare;
pub mod plan;
pub mod simulate;

use anyhow::Result;
use serde::Serialize;
use wonderboom_core::crypto::OpCounts;
use wonderboom_core::simulator::{Fanout, KeyRegistry, RealChecks, SimulationConfig, SlotResult, SlotStats};
use wonderboom_core::topology::{calibrate, CalibrationConfig};

use crate::config::FileConfig;
use crate::output::{f, print_warnings};

/// Automatic fanout needs cost constants. Without a model in the
/// configuration, a short calibration supplies one; it lands in the
/// manifest, so a rerun from the manifest picks the same `m`.
pub fn ensure_cost_model(cfg: &mut FileConfig) {
    let s = &mut cfg.simulation;
    if matches!(s.m, Fanout::Auto(_)) && s.cost_model.is_none() {
        let cal = calibrate(&CalibrationConfig {
            iterations: 2_000,
            samples: 20,
            delta_net: s.delta_net,
            cores: s.cores,
            delta_execute: s.delta_execute,
            ..Default::default()
        });
        print_warnings(&cal);
        s.cost_model = Some(cal.cost_model);
    }
}

/// Every combination of the sweep lists, `n` outermost so one key registry
/// serves a run of consecutive points.
pub fn sweep_points(cfg: &FileConfig) -> Vec<SimulationConfig> {
    let base = &cfg.simulation;
    let or = |v: &Vec<usize>, d: usize| if v.is_empty() { vec![d] } else { v.clone() };
    let ns = or(&cfg.sweep.n, base.n);
    let cores = or(&cfg.sweep.cores, base.cores);
    let rs = if cfg.sweep.participation.is_empty() {
        vec![base.participation]
    } else {
        cfg.sweep.participation.clone()
    };
    let mut out = Vec::new();
    for &n in &ns {
        for &c in &cores {
            for &r in &rs {
                out.push(SimulationConfig {
                    n,
                    cores: c,
                    participation: r,
                    ..base.clone()
                });
            }
        }
    }
    out
}

/// Keeps the registry for the most recent `(seed, n)`.
#[derive(Default)]
pub struct Registries {
    current: Option<KeyRegistry>,
}

impl Registries {
    pub fn get(&mut self, cfg: &SimulationConfig) -> Option<&KeyRegistry> {
        if !cfg.crypto {
            return None;
        }
        let stale = self.current.as_ref().is_none_or(|r| r.len() != cfg.n || r.seed() != cfg.seed);
        if stale {
            self.current = None; // release the old keys before generating
            self.current = Some(KeyRegistry::generate(cfg.seed, cfg.n));
        }
        self.current.as_ref()
    }
}

pub const RESULTS_HEADER: &[&str] = &[
    "design",
    "n",
    "m",
    "depth",
    "cores",
    "participation",
    "worst_case",
    "epoch",
    "slot",
    "timed",
    "compute_s",
    "network_s",
    "execute_s",
    "total_s",
    "predicted_s",
    "popcount_largest",
    "popcount_random",
];

pub fn results_row(r: &SlotResult, worst_case: bool) -> Vec<String> {
    vec![
        design_name(r).into(),
        r.n.to_string(),
        r.m.to_string(),
        r.depth.to_string(),
        r.cores.to_string(),
        r.participation.to_string(),
        worst_case.to_string(),
        r.epoch.to_string(),
        r.slot.to_string(),
        r.timed.to_string(),
        f(r.compute),
        f(r.network),
        f(r.execute),
        f(r.total),
        r.prediction.map(|p| f(p.at_participation)).unwrap_or_default(),
        r.popcount_largest.to_string(),
        r.popcount_random.to_string(),
    ]
}

pub const PHASES_HEADER: &[&str] = &[
    "design",
    "n",
    "cores",
    "participation",
    "slot",
    "role",
    "phase",
    "items",
    "sampled",
    "parallel",
    "measured_s",
    "effective_s",
];

pub fn phase_rows(r: &SlotResult) -> impl Iterator<Item = Vec<String>> + '_ {
    r.phases.iter().map(move |p| {
        vec![
            design_name(r).into(),
            r.n.to_string(),
            r.cores.to_string(),
            r.participation.to_string(),
            r.slot.to_string(),
            p.role.clone(),
            p.phase.clone(),
            p.items.to_string(),
            p.sampled.to_string(),
            p.parallel.to_string(),
            f(p.measured),
            f(p.effective),
        ]
    })
}

pub fn design_name(r: &SlotResult) -> &'static str {
    match r.design {
        wonderboom_core::simulator::Design::Wonderboom => "wonderboom",
        wonderboom_core::simulator::Design::Ethereum => "ethereum",
    }
}

/// The timing-free part of a slot result.
#[derive(Debug, Serialize)]
pub struct Outcome<'a> {
    pub design: &'static str,
    pub n: usize,
    pub m: usize,
    pub depth: usize,
    pub cores: usize,
    pub participation: f64,
    pub slot: u64,
    pub popcount_largest: usize,
    pub popcount_random: usize,
    pub stats: &'a SlotStats,
    pub ops: OpCounts,
    pub checks: Option<&'a RealChecks>,
}

pub fn outcome(r: &SlotResult) -> Outcome<'_> {
    Outcome {
        design: design_name(r),
        n: r.n,
        m: r.m,
        depth: r.depth,
        cores: r.cores,
        participation: r.participation,
        slot: r.slot,
        popcount_largest: r.popcount_largest,
        popcount_random: r.popcount_random,
        stats: &r.stats,
        ops: r.ops,
        checks: r.checks.as_ref(),
    }
}

/// The phase decomposition must add up; anything else is a simulator bug.
pub fn check_decomposes(r: &SlotResult) -> Result<()> {
    if !r.decomposes() {
        return Err(wonderboom_core::Error::Invariant(format!(
            "{} slot {}: phases do not add up to the total",
            design_name(r),
            r.slot
        ))
        .into());
    }
    Ok(())
}

pub fn print_slot(r: &SlotResult) {
    println!(
        "{:<10} N={:<8} m={:<4} d={} C={} r={:.3}  total {:.3} s (compute {:.3}, network {:.3})  largest {} random {}",
        design_name(r),
        r.n,
        r.m,
        r.depth,
        r.cores,
        r.participation,
        r.total,
        r.compute,
        r.network,
        r.popcount_largest,
        r.popcount_random
    );
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_is_a_cartesian_product() {
        let mut cfg = FileConfig::default();
        cfg.sweep.n = vec![1024, 2048];
        cfg.sweep.cores = vec![4, 8];
        cfg.sweep.participation = vec![0.9];
        let pts = sweep_points(&cfg);
        assert_eq!(pts.len(), 4);
        assert_eq!((pts[1].n, pts[1].cores), (1024, 8));
        assert!(pts.iter().all(|p| p.participation == 0.9));
        assert_eq!(sweep_points(&FileConfig::default()).len(), 1);
    }

    #[test]
    fn headers_match_row_widths() {
        let cfg = SimulationConfig {
            n: 512,
            m: Fanout::Fixed(32),
            crypto: false,
            ..Default::default()
        };
        let r = wonderboom_core::simulator::run_slot(&cfg).unwrap();
        assert_eq!(results_row(&r, false).len(), RESULTS_HEADER.len());
        let with_phases = wonderboom_core::simulator::run_slot(&SimulationConfig {
            crypto: true,
            max_real_items: 8,
            ..cfg
        })
        .unwrap();
        assert!(phase_rows(&with_phases).all(|row| row.len() == PHASES_HEADER.len()));
    }
}

use anyhow::Result;
use serde::Serialize;
use wonderboom_core::simulator::Fanout;
use wonderboom_core::topology::{delay_breakdown, DelayBreakdown, EpochPlan, TreeParams};

use crate::config::FileConfig;
use crate::output::OutDir;

#[derive(Debug, Serialize)]
struct Predicted {
    full: DelayBreakdown,
    at_participation: DelayBreakdown,
}

#[derive(Debug, Serialize)]
pub struct PlanSummary {
    pub n: usize,
    pub m: usize,
    pub fanout_auto: bool,
    pub m_prime: usize,
    pub depth: usize,
    pub leaf_groups: usize,
    /// Committees per layer from the root's children down to the leaf
    /// aggregators.
    pub layers: Vec<usize>,
    /// Committee counts from the leaf layer up to the root.
    pub structure: String,
    pub seed: u64,
    pub proposers: Vec<u32>,
    predicted: Option<Predicted>,
}

pub fn summarize(cfg: &FileConfig) -> Result<(PlanSummary, EpochPlan)> {
    let s = &cfg.simulation;
    let params: TreeParams = s.tree_params()?;
    let epoch = EpochPlan::build(s.seed, params)?;
    let layers = params.layer_counts();
    let structure = layers
        .iter()
        .rev()
        .chain(std::iter::once(&1))
        .map(|c| c.to_string())
        .collect::<Vec<_>>()
        .join("→");
    let predicted = match &s.cost_model {
        Some(cm) => {
            let cm = cm.with_cores(s.cores);
            Some(Predicted {
                full: delay_breakdown(params.n, params.m, &cm, None)?,
                at_participation: delay_breakdown(params.n, params.m, &cm, Some(s.participation))?,
            })
        }
        None => None,
    };
    Ok((
        PlanSummary {
            n: params.n,
            m: params.m,
            fanout_auto: matches!(s.m, Fanout::Auto(_)),
            m_prime: params.m_prime(),
            depth: params.depth(),
            leaf_groups: params.leaf_groups(),
            layers,
            structure,
            seed: s.seed,
            proposers: epoch.proposers(),
            predicted,
        },
        epoch,
    ))
}

pub fn run(cfg: &FileConfig, out: &mut OutDir) -> Result<()> {
    let (summary, epoch) = summarize(cfg)?;
    out.json("plan_summary.json", &summary, true)?;
    let slot0 = epoch.slots[0].to_json();
    std::fs::write(out.path("plan_slot0.json"), slot0 + "\n")?;
    out.note_file("plan_slot0.json", true);
    println!(
        "N={} m={} m'={} d={} L={} structure {}",
        summary.n, summary.m, summary.m_prime, summary.depth, summary.leaf_groups, summary.structure
    );
    if let Some(p) = &summary.predicted {
        println!("predicted delay {:.3} s (full keys), {:.3} s (by subtraction)", p.full.total, p.at_participation.total);
    }
    Ok(())
}

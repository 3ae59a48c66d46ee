use anyhow::Result;
use wonderboom_core::simulator::{run_ethereum_baseline, run_slot_with};

use super::simulate::write_results;
use super::{check_decomposes, print_slot, sweep_points, Registries};
use crate::config::FileConfig;
use crate::output::{f, OutDir};

pub const COMPARE_HEADER: &[&str] = &[
    "n",
    "cores",
    "participation",
    "worst_case",
    "wonderboom_total_s",
    "ethereum_total_s",
    "ratio",
    "wonderboom_predicted_s",
];

/// Tree and flat baseline at every sweep point, under the same keys,
/// transport, participation and cores.
pub fn run(cfg: &FileConfig, out: &mut OutDir) -> Result<()> {
    let mut regs = Registries::default();
    let mut results = Vec::new();
    let mut rows = Vec::new();
    for p in sweep_points(cfg) {
        let reg = regs.get(&p);
        let w = run_slot_with(&p, reg)?;
        let e = run_ethereum_baseline(&p, reg)?;
        check_decomposes(&w)?;
        check_decomposes(&e)?;
        print_slot(&w);
        print_slot(&e);
        println!("ratio {:.3}", w.total / e.total);
        rows.push(vec![
            p.n.to_string(),
            p.cores.to_string(),
            p.participation.to_string(),
            p.worst_case_transport.to_string(),
            f(w.total),
            f(e.total),
            f(w.total / e.total),
            w.prediction.map(|x| f(x.at_participation)).unwrap_or_default(),
        ]);
        results.push(w);
        results.push(e);
    }
    out.csv("compare.csv", COMPARE_HEADER, rows, false)?;
    write_results(cfg, out, &results)
}

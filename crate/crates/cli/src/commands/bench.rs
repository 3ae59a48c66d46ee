use anyhow::{ensure, Result};
use wonderboom_core::topology::{calibrate, CalibrationConfig};

use crate::config::FileConfig;
use crate::output::{print_warnings, OutDir};

pub fn run(cfg: &FileConfig, out: &mut OutDir) -> Result<()> {
    let b = &cfg.bench;
    ensure!(b.iterations >= 1 && b.samples >= 1, "bench needs at least one iteration and one sample");
    let s = &cfg.simulation;
    let cal = calibrate(&CalibrationConfig {
        iterations: b.iterations,
        samples: b.samples,
        dispersion_threshold: b.dispersion_threshold,
        delta_net: s.delta_net,
        cores: s.cores,
        delta_execute: s.delta_execute,
    });
    print_warnings(&cal);
    out.json("calibration.json", &cal, false)?;
    println!(
        "pka {:.3e} s  sga {:.3e} s  sgv {:.3e} s  ({} iterations each)",
        cal.pka.median, cal.sga.median, cal.sgv.median, cal.sgv.iterations
    );
    Ok(())
}

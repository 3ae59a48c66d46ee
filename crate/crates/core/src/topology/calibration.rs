//! Microbenchmarks that turn this host's crypto speed into a [`CostModel`].

use std::hint::black_box;
use std::time::Instant;

use blst::blst_p1;
use serde::{Deserialize, Serialize};

use super::cost::CostModel;
use crate::crypto::{add_affine, keygen, HashedMessage, PublicKey, Signature};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpStats {
    /// Median seconds per operation across samples.
    pub median: f64,
    pub p10: f64,
    pub p90: f64,
    /// (p90 - p10) / median.
    pub dispersion: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub scheme: String,
    pub pka: OpStats,
    pub sga: OpStats,
    pub sgv: OpStats,
    pub cost_model: CostModel,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy)]
pub struct CalibrationConfig {
    /// Total operations timed per primitive.
    pub iterations: usize,
    pub samples: usize,
    pub dispersion_threshold: f64,
    pub delta_net: f64,
    pub cores: usize,
    pub delta_execute: f64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            iterations: 10_000,
            samples: 50,
            dispersion_threshold: 0.5,
            delta_net: 0.1,
            cores: 4,
            delta_execute: 0.0,
        }
    }
}

fn stats(mut per_op: Vec<f64>, iterations: usize) -> OpStats {
    per_op.sort_by(|a, b| a.total_cmp(b));
    let q = |f: f64| per_op[((per_op.len() - 1) as f64 * f).round() as usize];
    let median = q(0.5);
    OpStats {
        median,
        p10: q(0.1),
        p90: q(0.9),
        dispersion: if median > 0.0 { (q(0.9) - q(0.1)) / median } else { 0.0 },
        iterations,
    }
}

fn sample<F: FnMut(usize)>(cfg: &CalibrationConfig, mut batch: F) -> OpStats {
    let samples = cfg.samples.max(1);
    let per = cfg.iterations.div_ceil(samples).max(1);
    batch(per.min(16)); // warm caches and lazy tables
    let per_op = (0..samples)
        .map(|_| {
            let t = Instant::now();
            batch(per);
            t.elapsed().as_secs_f64() / per as f64
        })
        .collect();
    stats(per_op, per * samples)
}

pub fn calibrate(cfg: &CalibrationConfig) -> Calibration {
    let kps: Vec<_> = (0..64).map(|i| keygen(0xBE7C4, i)).collect();
    let pks: Vec<PublicKey> = kps.iter().map(|k| k.public_key).collect();
    let msg = HashedMessage::new(b"calibration block");
    let sigs: Vec<Signature> = kps.iter().map(|k| k.secret_key.sign_hashed(&msg)).collect();

    let pka = sample(cfg, |n| {
        let mut acc = blst_p1::default();
        for i in 0..n {
            add_affine(&mut acc, &pks[i % pks.len()]);
        }
        black_box(acc);
    });
    let sga = sample(cfg, |n| {
        let mut acc = Signature::identity();
        for i in 0..n {
            acc.add_assign(&sigs[i % sigs.len()]);
        }
        black_box(acc);
    });
    let sgv = sample(cfg, |n| {
        for i in 0..n {
            let k = i % kps.len();
            assert!(black_box(crate::crypto::verify_hashed(&pks[k], &msg, &sigs[k])));
        }
    });

    let mut warnings = Vec::new();
    for (name, s) in [("pka", &pka), ("sga", &sga), ("sgv", &sgv)] {
        if s.dispersion > cfg.dispersion_threshold {
            warnings.push(format!(
                "{name}: dispersion {:.2} exceeds threshold {:.2}",
                s.dispersion, cfg.dispersion_threshold
            ));
        }
    }
    if sgv.median < sga.median {
        warnings.push("sgv measured below sga".into());
    }
    Calibration {
        scheme: "bls12-381-min-pk".into(),
        cost_model: CostModel {
            pka: pka.median,
            sga: sga.median,
            sgv: sgv.median,
            delta_net: cfg.delta_net,
            cores: cfg.cores,
            delta_execute: cfg.delta_execute,
        },
        pka,
        sga,
        sgv,
        warnings,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quick_calibration_is_sane() {
        let cfg = CalibrationConfig {
            iterations: 200,
            samples: 10,
            ..Default::default()
        };
        let c = calibrate(&cfg);
        c.cost_model.validate().unwrap();
        assert!(c.pka.median > 0.0 && c.sgv.median > c.pka.median);
        assert!(c.pka.p10 <= c.pka.median && c.pka.median <= c.pka.p90);
        let back: Calibration = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }
}

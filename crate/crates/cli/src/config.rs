//! Run configuration: one TOML or JSON file with a section per concern,
//! then command-line flags on top. A run manifest is accepted too, so any
//! result set can be regenerated from the manifest written next to it.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::{Deserialize, Serialize};
use wonderboom_core::adversary::{AdversaryStrategy, StrategyKind};
use wonderboom_core::simulator::{Fanout, SimulationConfig};
use wonderboom_core::topology::{Calibration, CostModel};

/// Lists a command iterates over. Empty means "the single value from the
/// simulation section".
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub n: Vec<usize>,
    pub cores: Vec<usize>,
    pub participation: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// One slot with a real node per role, per sweep point.
    #[default]
    Slot,
    /// Whole epochs with a populated inclusion ledger.
    Epochs,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSection {
    pub mode: Mode,
    /// Also run the flat baseline at every sweep point.
    pub baseline: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyzeSection {
    pub n: u64,
    /// Faulty validators; defaults to `n / 3`.
    pub f: Option<u64>,
    pub m: u64,
    pub k: u32,
    pub k_range: String,
    pub reward_per_attestation: f64,
    pub attestations_per_year: f64,
    /// Exhaustive cross-check of the hypergeometric closed form.
    pub oracle: Option<OracleMode>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OracleMode {
    /// Every N up to 25.
    Small,
}

impl Default for AnalyzeSection {
    fn default() -> Self {
        Self {
            n: 1_000_000,
            f: None,
            m: 256,
            k: 64,
            k_range: "1..128".into(),
            // $0.03 per attestation, $2,465 a year
            reward_per_attestation: 0.03,
            attestations_per_year: 2465.0 / 0.03,
            oracle: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchSection {
    pub iterations: usize,
    pub samples: usize,
    pub dispersion_threshold: f64,
}

impl Default for BenchSection {
    fn default() -> Self {
        Self {
            iterations: 10_000,
            samples: 50,
            dispersion_threshold: 0.5,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub simulation: SimulationConfig,
    pub sweep: SweepSection,
    pub simulate: SimulateSection,
    pub analyze: AnalyzeSection,
    pub bench: BenchSection,
}

/// Shape of a manifest, as far as reloading goes.
#[derive(Deserialize)]
struct ManifestConfig {
    config: FileConfig,
}

pub fn load(path: &Path) -> Result<FileConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if !is_json {
        return toml::from_str(&text).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()));
    }
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
    if value.get("command").is_some() && value.get("config").is_some() {
        let m: ManifestConfig =
            serde_json::from_value(value).map_err(|e| anyhow::anyhow!("{}: manifest: {e}", path.display()))?;
        return Ok(m.config);
    }
    // reparse from text so errors carry line and column
    serde_json::from_str(&text).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))
}

/// Reads a cost model from a `bench` calibration file or a bare model.
pub fn load_cost_model(path: &Path) -> Result<CostModel> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    if let Ok(c) = serde_json::from_str::<Calibration>(&text) {
        return Ok(c.cost_model);
    }
    let cm: CostModel = serde_json::from_str(&text).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
    cm.validate()?;
    Ok(cm)
}

/// `kind` or `kind:f`. Without `f`, the root attack corrupts one epoch's
/// proposers and the uniform strategies take the largest tolerated count.
pub fn parse_adversary(s: &str, n: usize) -> Result<AdversaryStrategy> {
    let (kind, f) = match s.split_once(':') {
        Some((k, f)) => (k, Some(f.trim().parse::<usize>().with_context(|| format!("adversary count in {s:?}"))?)),
        None => (s, None),
    };
    let kind: StrategyKind = kind.trim().parse()?;
    let f = f.unwrap_or(match kind {
        StrategyKind::Honest => 0,
        StrategyKind::FullyAdaptiveRoot => 32,
        _ => AdversaryStrategy::max_faults(n),
    });
    Ok(AdversaryStrategy::new(kind, f))
}

/// `a..b` (inclusive) or a comma list.
pub fn parse_k_range(s: &str) -> Result<Vec<u32>> {
    if let Some((a, b)) = s.split_once("..") {
        let a: u32 = a.trim().parse().with_context(|| format!("k range start in {s:?}"))?;
        let b: u32 = b.trim().trim_start_matches('=').parse().with_context(|| format!("k range end in {s:?}"))?;
        if a == 0 || b < a {
            bail!("k range {s:?} must satisfy 1 <= start <= end");
        }
        return Ok((a..=b).collect());
    }
    s.split(',')
        .map(|x| x.trim().parse::<u32>().with_context(|| format!("k value {x:?}")))
        .collect()
}

pub fn parse_fanout(s: &str) -> Result<Fanout> {
    if s.eq_ignore_ascii_case("auto") {
        return Ok(Fanout::default());
    }
    Ok(Fanout::Fixed(s.parse().with_context(|| format!("fanout {s:?} is neither a number nor \"auto\""))?))
}

/// Flags shared by every command.
#[derive(Debug, Clone, Args)]
pub struct CommonFlags {
    /// TOML or JSON configuration, or a manifest from an earlier run.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Allow runs with a million validators or more.
    #[arg(long)]
    pub large: bool,
}

/// Simulation overrides; list-valued flags become sweeps.
#[derive(Debug, Clone, Default, Args)]
pub struct SimFlags {
    /// Validator count; a comma list sweeps.
    #[arg(long, value_delimiter = ',')]
    pub n: Vec<usize>,
    /// Leaf-group size or "auto".
    #[arg(long)]
    pub m: Option<String>,
    #[arg(long, value_delimiter = ',')]
    pub cores: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    pub participation: Vec<f64>,
    /// honest, uniform, minority or root, optionally ":f".
    #[arg(long)]
    pub adversary: Option<String>,
    /// Reward window in slots.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Slots run with real nodes.
    #[arg(long)]
    pub slots: Option<usize>,
    /// Absent validators send forged votes.
    #[arg(long)]
    pub worst_case: bool,
    /// Timing-model-only run.
    #[arg(long)]
    pub no_crypto: bool,
    /// Calibration file from `bench`, or a bare cost model.
    #[arg(long)]
    pub cost_model: Option<PathBuf>,
    #[arg(long)]
    pub delta_net: Option<f64>,
    #[arg(long)]
    pub max_real_items: Option<usize>,
}

/// Folds flags into the file configuration. Flags win.
pub fn apply(file: &mut FileConfig, common: &CommonFlags, sim: &SimFlags) -> Result<()> {
    let s = &mut file.simulation;
    if let Some(seed) = common.seed {
        s.seed = seed;
    }
    if !sim.n.is_empty() {
        file.sweep.n = sim.n.clone();
    }
    if !sim.cores.is_empty() {
        file.sweep.cores = sim.cores.clone();
    }
    if !sim.participation.is_empty() {
        file.sweep.participation = sim.participation.clone();
    }
    if let Some(&n) = file.sweep.n.first() {
        s.n = n;
    }
    if let Some(&c) = file.sweep.cores.first() {
        s.cores = c;
    }
    if let Some(&r) = file.sweep.participation.first() {
        s.participation = r;
    }
    if let Some(m) = &sim.m {
        s.m = parse_fanout(m)?;
    }
    if let Some(a) = &sim.adversary {
        s.adversary = parse_adversary(a, s.n)?;
    }
    if let Some(k) = sim.k {
        s.k = k;
    }
    if let Some(e) = sim.epochs {
        s.epochs = e;
    }
    if let Some(x) = sim.slots {
        s.slots = x;
    }
    if sim.worst_case {
        s.worst_case_transport = true;
    }
    if sim.no_crypto {
        s.crypto = false;
    }
    if let Some(p) = &sim.cost_model {
        s.cost_model = Some(load_cost_model(p)?);
    }
    if let Some(d) = sim.delta_net {
        s.delta_net = d;
    }
    if let Some(x) = sim.max_real_items {
        s.max_real_items = x;
    }
    Ok(())
}

/// Million-validator runs need `--large`.
pub const LARGE_N: usize = 1_000_000;

pub fn check_large(ns: &[usize], large: bool) -> Result<()> {
    if !large {
        if let Some(n) = ns.iter().find(|&&n| n >= LARGE_N) {
            bail!("N = {n} needs --large (about 8 GiB of memory and several minutes)");
        }
    }
    Ok(())
}

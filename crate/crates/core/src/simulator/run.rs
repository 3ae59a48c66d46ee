use std::sync::Arc;

use rand::seq::index::sample;
use serde::Serialize;

use super::config::SimulationConfig;
use super::ledger::InclusionLedger;
use super::logical::{run_logical_slot, SlotInput, SlotOutcome, SlotStats};
use super::parallel::Workers;
use super::realnode::{run_real_path, PhaseTiming, RealChecks, RealContext};
use super::registry::KeyRegistry;
use crate::adversary::{
    corrupt, minority_targets, root_victims, targets_in_slot, CorruptionSet, StrategyKind,
};
use crate::crypto::{OpCounts, ParticipationBitmap, ValidatorId};
use crate::error::{Error, Result};
use crate::protocol::{block_hash, BlockAttestation, ModelSig, TargetSet};
use crate::seed;
use crate::topology::{
    aggregation_delay, aggregation_delay_at, EpochPlan, SlotPlan, TreeParams, COMMITTEE_SIZE,
    SLOTS_PER_EPOCH,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Design {
    Wonderboom,
    Ethereum,
}

/// Latency the cost model predicts for the run's shape.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Prediction {
    /// Every key aggregated from scratch.
    pub full: f64,
    /// Key reconstruction by subtraction at the run's participation.
    pub at_participation: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SlotResult {
    pub design: Design,
    pub epoch: u64,
    pub slot: u64,
    pub n: usize,
    pub m: usize,
    pub depth: usize,
    pub cores: usize,
    pub participation: f64,
    /// Real nodes ran; otherwise the compute figure is a model prediction
    /// or zero.
    pub timed: bool,
    /// Phases ran on a real pool of width `cores`.
    pub pooled: bool,
    pub phases: Vec<PhaseTiming>,
    pub compute: f64,
    pub network: f64,
    pub execute: f64,
    pub total: f64,
    pub popcount_largest: usize,
    pub popcount_random: usize,
    pub stats: SlotStats,
    pub checks: Option<RealChecks>,
    /// Operations charged by every node of the logical run.
    pub ops: OpCounts,
    pub prediction: Option<Prediction>,
    #[serde(skip)]
    pub attestation: BlockAttestation<ModelSig>,
}

impl SlotResult {
    /// Effective seconds summed over phases named `phase`.
    pub fn phase_seconds(&self, phase: &str) -> f64 {
        self.phases.iter().filter(|p| p.phase == phase).map(|p| p.effective).sum()
    }

    pub fn role_seconds(&self, role: &str) -> f64 {
        self.phases.iter().filter(|p| p.role == role).map(|p| p.effective).sum()
    }

    /// The decomposition adds up to the total.
    pub fn decomposes(&self) -> bool {
        let c: f64 = self.phases.iter().map(|p| p.effective).sum();
        let tol = 1e-9 * self.total.max(1.0);
        (!self.timed || (c - self.compute).abs() <= tol)
            && (self.compute + self.network + self.execute - self.total).abs() <= tol
    }
}

/// Per-epoch state shared by its slots.
pub struct EpochContext {
    pub epoch: u64,
    pub epoch_seed: u64,
    pub plans: EpochPlan,
    pub corruption: CorruptionSet,
    /// Fixed victims of the root attack, by id.
    pub victims: Option<Vec<ValidatorId>>,
}

pub fn epoch_context(cfg: &SimulationConfig, params: TreeParams, epoch: u64) -> Result<EpochContext> {
    let epoch_seed = seed::derive_u64("epoch", cfg.seed, &[epoch]);
    let plans = EpochPlan::build(epoch_seed, params)?;
    let corruption = corrupt(&cfg.adversary, epoch_seed, epoch, cfg.n, Some(&plans))?;
    let victims = match cfg.adversary.kind {
        StrategyKind::FullyAdaptiveRoot => Some(
            cfg.adversary
                .targets
                .clone()
                .unwrap_or_else(|| root_victims(epoch_seed, epoch, &plans, &corruption)),
        ),
        _ => None,
    };
    Ok(EpochContext {
        epoch,
        epoch_seed,
        plans,
        corruption,
        victims,
    })
}

fn slot_targets(cfg: &SimulationConfig, ctx: &EpochContext, plan: &SlotPlan) -> TargetSet {
    let bm = match (cfg.adversary.kind, &cfg.adversary.targets, &ctx.victims) {
        (StrategyKind::MinorityCommitteeCensor, Some(t), _) => targets_in_slot(plan, t),
        (StrategyKind::MinorityCommitteeCensor, None, _) => minority_targets(plan, &ctx.corruption),
        (StrategyKind::FullyAdaptiveRoot, _, Some(v)) => targets_in_slot(plan, v),
        _ => ParticipationBitmap::new(0, plan.n),
    };
    Arc::new(bm)
}

/// Validators that do not vote in a slot, by id; corrupted ones follow
/// their strategy instead.
fn absent_mask(cfg: &SimulationConfig, epoch_seed: u64, slot: u32) -> Vec<bool> {
    let mut mask = vec![false; cfg.n];
    let mut rng = seed::rng("absent", epoch_seed, &[slot as u64]);
    for v in sample(&mut rng, cfg.n, cfg.absent_count().min(cfg.n)) {
        mask[v] = true;
    }
    mask
}

fn prediction(cfg: &SimulationConfig, m: usize) -> Result<Option<Prediction>> {
    let Some(cm) = cfg.cost_model else {
        return Ok(None);
    };
    let cm = crate::topology::CostModel {
        cores: cfg.cores,
        delta_net: cfg.delta_net,
        delta_execute: cfg.delta_execute,
        ..cm
    };
    Ok(Some(Prediction {
        full: aggregation_delay(cfg.n, m, &cm)?,
        at_participation: aggregation_delay_at(cfg.n, m, &cm, cfg.participation)?,
    }))
}

fn check_outcome(o: &SlotOutcome) -> Result<()> {
    if o.stats.at_most_once_violations > 0 {
        return Err(Error::Invariant(format!(
            "slot {}: {} aggregators sent twice",
            o.slot, o.stats.at_most_once_violations
        )));
    }
    if o.stats.soundness_violations > 0 {
        return Err(Error::Invariant(format!(
            "slot {}: a censoring aggregate failed to dominate",
            o.slot
        )));
    }
    Ok(())
}

/// Logical slot, then the real replay when crypto is on.
#[allow(clippy::too_many_arguments)]
fn execute_slot(
    cfg: &SimulationConfig,
    design: Design,
    epoch: u64,
    epoch_seed: u64,
    plan: &SlotPlan,
    kind: StrategyKind,
    corruption: &CorruptionSet,
    targets: &TargetSet,
    registry: Option<&KeyRegistry>,
    timed: bool,
) -> Result<SlotResult> {
    let absent = absent_mask(cfg, epoch_seed, plan.slot);
    let hash = block_hash(epoch_seed, plan.slot as u64);
    let outcome = run_logical_slot(&SlotInput {
        plan,
        block_hash: hash,
        kind,
        corruption,
        targets,
        absent: &absent,
        worst_case_transport: cfg.worst_case_transport,
        capture_path: timed && cfg.crypto,
        largest_only_root: design == Design::Ethereum,
    })?;
    check_outcome(&outcome)?;
    let m = plan.group_size;
    let pred = match design {
        Design::Wonderboom => prediction(cfg, m)?,
        Design::Ethereum => None,
    };
    let network = cfg.delta_net * plan.depth() as f64;
    let mut result = SlotResult {
        design,
        epoch,
        slot: epoch * SLOTS_PER_EPOCH as u64 + plan.slot as u64,
        n: cfg.n,
        m,
        depth: plan.depth(),
        cores: cfg.cores,
        participation: cfg.participation,
        timed: false,
        pooled: false,
        phases: Vec::new(),
        compute: 0.0,
        network,
        execute: cfg.delta_execute,
        total: 0.0,
        popcount_largest: outcome.attestation.popcount_largest(),
        popcount_random: outcome.attestation.popcount_random(),
        stats: outcome.stats.clone(),
        checks: None,
        ops: outcome.ops,
        prediction: pred,
        attestation: outcome.attestation.clone(),
    };
    if timed && cfg.crypto {
        let owned;
        let registry = match registry {
            Some(r) if r.len() == cfg.n && r.seed() == cfg.seed => r,
            Some(_) => {
                return Err(Error::InvalidArgument(
                    "key registry does not match the configuration".into(),
                ))
            }
            None => {
                owned = KeyRegistry::generate(cfg.seed, cfg.n);
                &owned
            }
        };
        let workers = Workers::new(cfg.cores)?;
        let ctx = RealContext {
            plan,
            registry,
            block_hash: hash,
            workers: &workers,
            max_items: cfg.max_real_items,
        };
        let path = outcome.path.as_ref().expect("path captured for timed slots");
        let real = run_real_path(&ctx, path, &outcome.attestation)?;
        if !real.checks.all_match() {
            return Err(Error::Invariant(format!(
                "slot {}: real nodes disagree with the logical run: {:?}",
                plan.slot, real.checks
            )));
        }
        result.timed = true;
        result.pooled = workers.is_real();
        result.compute = real.phases.iter().map(|p| p.effective).sum();
        result.phases = real.phases;
        result.checks = Some(real.checks);
    } else if timed {
        if let Some(p) = pred {
            result.compute = p.at_participation - network - cfg.delta_execute;
        }
    }
    result.total = result.compute + result.network + result.execute;
    Ok(result)
}

/// One slot with a real node per role: slot 0 of epoch 0.
pub fn run_slot(cfg: &SimulationConfig) -> Result<SlotResult> {
    run_slot_with(cfg, None)
}

/// As [`run_slot`], reusing keys generated for the same `(seed, n)`.
pub fn run_slot_with(cfg: &SimulationConfig, registry: Option<&KeyRegistry>) -> Result<SlotResult> {
    cfg.validate()?;
    let ctx = epoch_context(cfg, cfg.tree_params()?, 0)?;
    let plan = &ctx.plans.slots[0];
    let targets = slot_targets(cfg, &ctx, plan);
    execute_slot(
        cfg,
        Design::Wonderboom,
        0,
        ctx.epoch_seed,
        plan,
        cfg.adversary.kind,
        &ctx.corruption,
        &targets,
        registry,
        true,
    )
}

/// Subcommittees per slot committee in the flat design.
pub fn ethereum_subcommittees(n: usize) -> usize {
    (n / SLOTS_PER_EPOCH / COMMITTEE_SIZE).clamp(1, 64)
}

/// Flat single-hop aggregation with every validator voting in one slot:
/// `32 * c` subcommittees, 16 representatives each, and a proposer that
/// keeps only the largest aggregate per subcommittee. Runs honest and
/// under the same transport and cores as the tree.
pub fn run_ethereum_baseline(cfg: &SimulationConfig, registry: Option<&KeyRegistry>) -> Result<SlotResult> {
    cfg.validate()?;
    let epoch_seed = seed::derive_u64("epoch", cfg.seed, &[0]);
    let subs = SLOTS_PER_EPOCH * ethereum_subcommittees(cfg.n);
    let plan = SlotPlan::build_flat(epoch_seed, 0, cfg.n, subs)?;
    let none = CorruptionSet::none(0, cfg.n);
    let targets = Arc::new(ParticipationBitmap::new(0, cfg.n));
    execute_slot(
        cfg,
        Design::Ethereum,
        0,
        epoch_seed,
        &plan,
        StrategyKind::Honest,
        &none,
        &targets,
        registry,
        true,
    )
}

pub struct EpochRun {
    pub ledger: InclusionLedger,
    pub slots: Vec<SlotResult>,
}

/// `cfg.epochs` epochs of 32 slots each. Corruption is fixed per epoch;
/// plans are redrawn every slot. The first `cfg.slots` slots run real nodes
/// when crypto is on.
pub fn run_epochs(cfg: &SimulationConfig, registry: Option<&KeyRegistry>) -> Result<EpochRun> {
    cfg.validate()?;
    let params = cfg.tree_params()?;
    let owned;
    let registry = match registry {
        None if cfg.crypto => {
            owned = KeyRegistry::generate(cfg.seed, cfg.n);
            Some(&owned)
        }
        r => r,
    };
    let mut ledger = InclusionLedger::new(cfg.n);
    let mut slots = Vec::with_capacity(cfg.epochs * SLOTS_PER_EPOCH);
    for epoch in 0..cfg.epochs as u64 {
        let ctx = epoch_context(cfg, params, epoch)?;
        for plan in &ctx.plans.slots {
            let targets = slot_targets(cfg, &ctx, plan);
            let timed = slots.len() < cfg.slots;
            let r = execute_slot(
                cfg,
                Design::Wonderboom,
                epoch,
                ctx.epoch_seed,
                plan,
                cfg.adversary.kind,
                &ctx.corruption,
                &targets,
                registry,
                timed,
            )?;
            let row = ledger.slots();
            ledger.record(plan, &r.attestation)?;
            if !ledger.consistent_with(row, plan, &r.attestation) {
                return Err(Error::Invariant(format!("ledger row {row} disagrees with its block")));
            }
            slots.push(r);
        }
    }
    Ok(EpochRun { ledger, slots })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversary::AdversaryStrategy;
    use crate::topology::CostModel;

    fn small(n: usize, m: usize) -> SimulationConfig {
        SimulationConfig {
            n,
            m: super::super::config::Fanout::Fixed(m),
            cores: 2,
            max_real_items: 32,
            ..Default::default()
        }
    }

    #[test]
    fn honest_slot_includes_everyone_and_decomposes() {
        let cfg = small(1024, 64);
        let r = run_slot(&cfg).unwrap();
        assert_eq!(r.popcount_largest, 1024);
        assert!(r.timed);
        assert!(r.decomposes());
        let c = r.checks.as_ref().unwrap();
        assert!(c.attestation_verifies && c.leaf_validator_voted);
        assert!((r.network - 0.1 * r.depth as f64).abs() < 1e-12);
        for role in ["leaf_validator", "leaf_aggregator", "proposer"] {
            assert!(r.role_seconds(role) > 0.0, "{role}");
        }
    }

    #[test]
    fn epochs_fill_a_consistent_ledger() {
        let cfg = SimulationConfig {
            crypto: false,
            epochs: 2,
            ..small(512, 32)
        };
        let run = run_epochs(&cfg, None).unwrap();
        assert_eq!(run.ledger.slots(), 64);
        assert!((0..512).all(|v| run.ledger.inclusion_count(v) == 64));
        let again = run_epochs(&cfg, None).unwrap();
        assert_eq!(run.ledger, again.ledger);
    }

    #[test]
    fn baseline_is_flat_and_complete() {
        let cfg = small(1024, 64);
        let r = run_ethereum_baseline(&cfg, None).unwrap();
        assert_eq!(r.depth, 2);
        assert_eq!(r.popcount_largest, 1024);
        assert_eq!(r.popcount_random, 0);
        assert!(r.decomposes());
    }

    #[test]
    fn model_only_slot_uses_prediction() {
        let cm = CostModel { pka: 1e-6, sga: 3e-6, sgv: 1e-3, delta_net: 0.1, cores: 4, delta_execute: 0.0 };
        let cfg = SimulationConfig {
            crypto: false,
            cost_model: Some(cm),
            ..small(4096, 256)
        };
        let r = run_slot(&cfg).unwrap();
        let p = r.prediction.unwrap();
        assert!((r.total - p.at_participation).abs() < 1e-9);
        assert!(p.full >= p.at_participation);
    }

    #[test]
    fn root_attack_starves_targets() {
        let cfg = SimulationConfig {
            crypto: false,
            adversary: AdversaryStrategy::new(StrategyKind::FullyAdaptiveRoot, 32),
            ..small(1024, 64)
        };
        let run = run_epochs(&cfg, None).unwrap();
        let total: usize = run.slots.iter().map(|s| s.stats.targets_included).sum();
        assert_eq!(total, 0);
        assert!(run.slots.iter().all(|s| s.stats.targets > 0));
    }
}

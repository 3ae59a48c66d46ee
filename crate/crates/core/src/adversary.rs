//! Byzantine strategies: who gets corrupted, and how corrupted leaves and
//! aggregators behave.

use std::sync::Arc;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::crypto::{ParticipationBitmap, ValidatorId};
use crate::error::{Error, Result};
use crate::protocol::{SelectionPolicy, TargetSet};
use crate::seed;
use crate::topology::{EpochPlan, SlotPlan, SLOTS_PER_EPOCH};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum StrategyKind {
    Honest,
    /// Uniform corruption fixed at the epoch boundary; corrupted validators
    /// stay silent.
    SlowlyAdaptiveUniform,
    /// Uniform corruption; corrupted leaves feed only corrupted
    /// representatives, which inflate their aggregates to hide honest votes.
    MinorityCommitteeCensor,
    /// Corrupts every slot proposer after seeing the plans. Breaks the
    /// slowly-adaptive model on purpose: it is the counterexample harness.
    FullyAdaptiveRoot,
}

impl std::str::FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "honest" => Ok(Self::Honest),
            "slowly_adaptive_uniform" | "uniform" => Ok(Self::SlowlyAdaptiveUniform),
            "minority_committee_censor" | "minority" => Ok(Self::MinorityCommitteeCensor),
            "fully_adaptive_root" | "root" => Ok(Self::FullyAdaptiveRoot),
            _ => Err(Error::InvalidArgument(format!("unknown adversary {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdversaryStrategy {
    pub kind: StrategyKind,
    pub f: usize,
    /// Validators to censor. `None` picks the strategy's default victims.
    #[serde(default)]
    pub targets: Option<Vec<ValidatorId>>,
}

impl AdversaryStrategy {
    pub fn honest() -> Self {
        Self {
            kind: StrategyKind::Honest,
            f: 0,
            targets: None,
        }
    }

    pub fn new(kind: StrategyKind, f: usize) -> Self {
        Self {
            kind,
            f,
            targets: None,
        }
    }

    pub fn with_targets(mut self, targets: Vec<ValidatorId>) -> Self {
        self.targets = Some(targets);
        self
    }

    /// Largest f with N >= 3f + 1.
    pub fn max_faults(n: usize) -> usize {
        n.saturating_sub(1) / 3
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.kind != StrategyKind::Honest && self.f > Self::max_faults(n) {
            return Err(Error::InvalidArgument(format!(
                "f = {} exceeds floor((N-1)/3) = {}",
                self.f,
                Self::max_faults(n)
            )));
        }
        if self.kind == StrategyKind::FullyAdaptiveRoot && self.f < SLOTS_PER_EPOCH {
            return Err(Error::InvalidArgument(format!(
                "root corruption needs f >= {SLOTS_PER_EPOCH}, got {}",
                self.f
            )));
        }
        if let Some(t) = &self.targets {
            if let Some(&v) = t.iter().find(|&&v| v as usize >= n) {
                return Err(Error::UnknownValidator(v));
            }
        }
        Ok(())
    }
}

/// Corrupted validators for one epoch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorruptionSet {
    pub epoch: u64,
    members: Vec<ValidatorId>,
    mask: Vec<bool>,
}

impl CorruptionSet {
    pub fn none(epoch: u64, n: usize) -> Self {
        Self::from_members(epoch, n, Vec::new())
    }

    pub fn from_members(epoch: u64, n: usize, mut members: Vec<ValidatorId>) -> Self {
        members.sort_unstable();
        members.dedup();
        let mut mask = vec![false; n];
        for &v in &members {
            mask[v as usize] = true;
        }
        Self {
            epoch,
            members,
            mask,
        }
    }

    pub fn contains(&self, v: ValidatorId) -> bool {
        self.mask.get(v as usize).copied().unwrap_or(false)
    }

    pub fn members(&self) -> &[ValidatorId] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Picks the epoch's corrupted set. Only the fully adaptive strategy looks
/// at the plans.
pub fn corrupt(
    strategy: &AdversaryStrategy,
    epoch_seed: u64,
    epoch: u64,
    n: usize,
    plan_preview: Option<&EpochPlan>,
) -> Result<CorruptionSet> {
    strategy.validate(n)?;
    match strategy.kind {
        StrategyKind::Honest => Ok(CorruptionSet::none(epoch, n)),
        StrategyKind::SlowlyAdaptiveUniform | StrategyKind::MinorityCommitteeCensor => {
            let mut rng = seed::rng("corrupt-uniform", epoch_seed, &[epoch]);
            let members = sample(&mut rng, n, strategy.f)
                .into_iter()
                .map(|v| v as ValidatorId)
                .collect();
            Ok(CorruptionSet::from_members(epoch, n, members))
        }
        StrategyKind::FullyAdaptiveRoot => {
            let plans = plan_preview.ok_or_else(|| {
                Error::InvalidArgument("root corruption needs the epoch's plans".into())
            })?;
            Ok(CorruptionSet::from_members(epoch, n, plans.proposers()))
        }
    }
}

/// What a corrupted leaf does with its vote.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Routing {
    /// Vote to every representative, like an honest leaf.
    Normal,
    /// Vote only to these representatives.
    Only(Vec<ValidatorId>),
    Silent,
}

/// Routing for the leaf at `position` under `kind`.
pub fn byzantine_vote_routing(
    kind: StrategyKind,
    plan: &SlotPlan,
    corruption: &CorruptionSet,
    position: usize,
) -> Routing {
    let v = plan.validator_at(position);
    if !corruption.contains(v) {
        return Routing::Normal;
    }
    match kind {
        StrategyKind::Honest | StrategyKind::FullyAdaptiveRoot => Routing::Normal,
        StrategyKind::SlowlyAdaptiveUniform => Routing::Silent,
        StrategyKind::MinorityCommitteeCensor => {
            let group = plan.group_of_position(position);
            let reps: Vec<ValidatorId> = plan
                .committee(plan.leaf_committee(group))
                .representatives()
                .iter()
                .copied()
                .filter(|&r| corruption.contains(r))
                .collect();
            if reps.is_empty() {
                Routing::Normal
            } else {
                Routing::Only(reps)
            }
        }
    }
}

/// Bitmap a corrupted leaf aggregator sends: every honest vote it saw plus
/// the `x` hidden votes, minus up to `x - 1` targets. It therefore beats any
/// honest aggregate by at least one whenever `x >= 1`, and censors nobody
/// when `x <= 1`. Targets are dropped lowest position first.
pub fn byzantine_aggregate(
    honest_seen: &ParticipationBitmap,
    hidden: &[usize],
    censor_targets: &ParticipationBitmap,
) -> Result<ParticipationBitmap> {
    let mut out = honest_seen.clone();
    for &p in hidden {
        out.set(p)?;
    }
    let budget = hidden.len().saturating_sub(1);
    let victims: Vec<usize> = honest_seen
        .iter_ones()
        .filter(|&p| censor_targets.contains(p))
        .take(budget)
        .collect();
    for p in victims {
        out.clear(p)?;
    }
    Ok(out)
}

/// Default victims of minority-committee censorship: the honest leaves of
/// every leaf group whose committee holds a corrupted representative.
pub fn minority_targets(plan: &SlotPlan, corruption: &CorruptionSet) -> ParticipationBitmap {
    let mut t = ParticipationBitmap::new(0, plan.n);
    for g in 0..plan.leaf_group_count() {
        let com = plan.committee(plan.leaf_committee(g));
        if com.representatives().iter().any(|&r| corruption.contains(r)) {
            for p in plan.leaf_group_range(g) {
                if !corruption.contains(plan.validator_at(p)) {
                    t.set(p).expect("position in range");
                }
            }
        }
    }
    t
}

/// Fixed victim set mapped into one slot's position space.
pub fn targets_in_slot(plan: &SlotPlan, victims: &[ValidatorId]) -> ParticipationBitmap {
    ParticipationBitmap::from_indices(0, plan.n, victims.iter().map(|&v| plan.position_of(v)))
        .expect("victims are known validators")
}

/// Default victims of the root attack: a seeded sample of honest
/// validators, about a third of the root's child count. Every child entry
/// touching a victim is dropped, so each victim costs the root a whole
/// subtree; a third of all validators would empty the block.
pub fn root_victims(
    epoch_seed: u64,
    epoch: u64,
    plans: &EpochPlan,
    corruption: &CorruptionSet,
) -> Vec<ValidatorId> {
    let n = plans.params.n;
    let count = (plans.slots[0].root_children().len() / 3).max(1);
    let honest: Vec<ValidatorId> = (0..n as ValidatorId)
        .filter(|&v| !corruption.contains(v))
        .collect();
    let mut rng = seed::rng("root-victims", epoch_seed, &[epoch]);
    let mut out: Vec<ValidatorId> = sample(&mut rng, honest.len(), count.min(honest.len()))
        .into_iter()
        .map(|i| honest[i])
        .collect();
    out.sort_unstable();
    out
}

/// Selection policy of an aggregator, given whether its holder is corrupted.
pub fn aggregator_policy(
    kind: StrategyKind,
    corrupted: bool,
    is_root: bool,
    targets: &TargetSet,
) -> SelectionPolicy {
    if !corrupted {
        return SelectionPolicy::Honest;
    }
    match (kind, is_root) {
        (StrategyKind::MinorityCommitteeCensor, _) => SelectionPolicy::Censoring(Arc::clone(targets)),
        (StrategyKind::FullyAdaptiveRoot, true) => SelectionPolicy::DropTargets(Arc::clone(targets)),
        _ => SelectionPolicy::Honest,
    }
}

//! Whole-tree run of one slot. Every node executes the real state machines,
//! but signatures are validity tokens, so a slot at N = 262144 costs
//! milliseconds. The real-crypto replay in `realnode` checks itself against
//! the path captured here.

use serde::Serialize;

use crate::adversary::{byzantine_aggregate, byzantine_vote_routing, CorruptionSet, Routing, StrategyKind};
use crate::crypto::{OpCounts, OpMeter, ParticipationBitmap, ValidatorId};
use crate::error::{Error, Result};
use crate::protocol::{
    AggregateMessage, BlockAttestation, BlockHash, InternalAggregator, Lane, LeafAggregator,
    ModelScheme, ModelSig, SelectionPolicy, TargetSet, VoteMessage, VoteScheme,
};
use crate::topology::{CommitteeRef, SlotPlan};

/// Everything one slot depends on besides the plan.
pub struct SlotInput<'a> {
    pub plan: &'a SlotPlan,
    pub block_hash: BlockHash,
    pub kind: StrategyKind,
    pub corruption: &'a CorruptionSet,
    /// Position space.
    pub targets: &'a TargetSet,
    /// Indexed by validator id.
    pub absent: &'a [bool],
    pub worst_case_transport: bool,
    /// Record the inputs and outputs along leaf group 0's path.
    pub capture_path: bool,
    /// The proposer forwards only the largest aggregate per child, as in
    /// the flat baseline.
    pub largest_only_root: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum VoteKind {
    Valid,
    Forged,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct SlotStats {
    pub leaf_groups: usize,
    pub empty_leaf_groups: usize,
    /// Leaf groups with at least one corrupted representative sending a
    /// censoring aggregate.
    pub attacked_groups: usize,
    pub soundness_checks: usize,
    pub soundness_violations: usize,
    /// Honest voters left out of a corrupted leaf aggregate.
    pub victims: usize,
    pub victims_included: usize,
    pub targets: usize,
    pub targets_included: usize,
    /// Honest valid voters outside the target set that missed the block.
    pub collateral: usize,
    pub honest_voters: usize,
    pub honest_included: usize,
    pub at_most_once_violations: usize,
    pub absent_children_at_root: usize,
    pub silent_proposer: bool,
}

/// One internal aggregator on the captured path.
#[derive(Debug, Clone)]
pub struct NodeCapture {
    pub committee: CommitteeRef,
    pub representative: ValidatorId,
    pub policy: SelectionPolicy,
    pub inputs: Vec<AggregateMessage<ModelSig>>,
    pub outputs: Vec<AggregateMessage<ModelSig>>,
}

/// Messages seen and produced along the path from leaf group 0 to the root.
#[derive(Debug, Clone)]
pub struct PathCapture {
    pub leaf_group: usize,
    pub leaf_representative: ValidatorId,
    /// Votes reaching honest representatives, in arrival order.
    pub votes: Vec<(usize, ValidatorId, VoteKind)>,
    pub leaf_output: Option<AggregateMessage<ModelSig>>,
    /// Leaf-parent first, root child last.
    pub internal: Vec<NodeCapture>,
    /// `None` when the proposer stays silent.
    pub root_policy: Option<SelectionPolicy>,
    pub root_inputs: Vec<AggregateMessage<ModelSig>>,
}

#[derive(Debug, Clone)]
pub struct SlotOutcome {
    pub slot: u32,
    pub attestation: BlockAttestation<ModelSig>,
    pub stats: SlotStats,
    /// Operations charged across every node of the tree.
    pub ops: OpCounts,
    pub path: Option<PathCapture>,
    /// Position space; set for honest validators whose vote was valid.
    pub honest_voted: ParticipationBitmap,
    pub victims: ParticipationBitmap,
}

fn first_honest(reps: &[ValidatorId], corruption: &CorruptionSet) -> ValidatorId {
    reps.iter()
        .copied()
        .find(|&r| !corruption.contains(r))
        .unwrap_or(reps[0])
}

/// Behaviour of a corrupted holder of an aggregation seat.
fn silent(kind: StrategyKind) -> bool {
    kind == StrategyKind::SlowlyAdaptiveUniform
}

pub fn run_logical_slot(input: &SlotInput<'_>) -> Result<SlotOutcome> {
    let plan = input.plan;
    let meter = OpMeter::default();
    let scheme = ModelScheme {
        block: plan.group_size,
        n: plan.n,
        meter: &meter,
    };
    let corrupted = |v: ValidatorId| input.corruption.contains(v);
    let mut stats = SlotStats {
        leaf_groups: plan.leaf_group_count(),
        targets: input.targets.popcount(),
        ..Default::default()
    };
    let mut honest_voted = ParticipationBitmap::new(0, plan.n);
    let mut victims = ParticipationBitmap::new(0, plan.n);
    let mut path: Option<PathCapture> = None;

    // outgoing messages of each committee in the layer being processed
    let mut below: Vec<Vec<AggregateMessage<ModelSig>>> = Vec::with_capacity(plan.leaf_group_count());
    for g in 0..plan.leaf_group_count() {
        let com = plan.committee(plan.leaf_committee(g));
        let reps = com.representatives();
        let mut arrivals: Vec<(usize, ValidatorId, VoteKind)> = Vec::new();
        let mut hidden: Vec<usize> = Vec::new();
        for p in plan.leaf_group_range(g) {
            let v = plan.validator_at(p);
            if corrupted(v) {
                match byzantine_vote_routing(input.kind, plan, input.corruption, p) {
                    Routing::Normal => arrivals.push((p, v, VoteKind::Valid)),
                    Routing::Only(_) => hidden.push(p),
                    Routing::Silent => {}
                }
            } else if input.absent[v as usize] {
                if input.worst_case_transport {
                    arrivals.push((p, v, VoteKind::Forged));
                }
            } else {
                honest_voted.set(p)?;
                arrivals.push((p, v, VoteKind::Valid));
            }
        }

        // every honest representative sees the same votes, so one instance
        // stands in for all of them
        let leaf_rep = first_honest(reps, input.corruption);
        let mut agg = LeafAggregator::new(plan, g, leaf_rep, input.block_hash, scheme.identity());
        let mut out = None;
        for &(_, v, k) in &arrivals {
            let vote = VoteMessage {
                slot: plan.slot,
                block_hash: input.block_hash,
                validator_id: v,
                signature: if k == VoteKind::Valid { ModelSig::VALID } else { ModelSig::FORGED },
            };
            if let Some(m) = agg.on_vote(&scheme, &vote) {
                out = Some(m);
            }
        }
        if out.is_none() {
            out = agg.on_timeout();
        }
        if agg.on_timeout().is_some() {
            stats.at_most_once_violations += 1;
        }
        if out.is_none() {
            stats.empty_leaf_groups += 1;
        }

        let honest_seen = out
            .as_ref()
            .map(|m| m.bitmap.clone())
            .unwrap_or_else(|| ParticipationBitmap::from_range(plan.leaf_group_range(g)));
        let censor = input.kind == StrategyKind::MinorityCommitteeCensor
            && reps.iter().any(|&r| corrupted(r));
        let byz = if censor {
            stats.attacked_groups += 1;
            let bm = byzantine_aggregate(&honest_seen, &hidden, input.targets)?;
            for p in honest_seen.difference(&bm).iter_ones() {
                victims.set(p)?;
            }
            if !hidden.is_empty() {
                stats.soundness_checks += 1;
                if bm.popcount() <= honest_seen.popcount() {
                    stats.soundness_violations += 1;
                }
            }
            Some(bm)
        } else {
            None
        };

        let mut sent = Vec::with_capacity(reps.len());
        for &r in reps {
            if corrupted(r) && censor {
                if let Some(bm) = byz.as_ref().filter(|b| b.popcount() > 0) {
                    sent.push(AggregateMessage {
                        slot: plan.slot,
                        from: plan.leaf_committee(g),
                        representative: r,
                        signature: ModelSig::VALID,
                        bitmap: bm.clone(),
                        lane: Lane::Both,
                    });
                }
            } else if corrupted(r) && silent(input.kind) {
            } else if let Some(m) = &out {
                sent.push(AggregateMessage {
                    representative: r,
                    ..m.clone()
                });
            }
        }
        if input.capture_path && g == 0 {
            path = Some(PathCapture {
                leaf_group: 0,
                leaf_representative: leaf_rep,
                votes: arrivals,
                leaf_output: out.clone(),
                internal: Vec::new(),
                root_policy: None,
                root_inputs: Vec::new(),
            });
        }
        below.push(sent);
    }

    // internal layers, bottom-up; `below` holds the child layer's output
    for layer in (0..plan.leaf_layer()).rev() {
        let count = plan.layers[layer].len();
        let mut here = Vec::with_capacity(count);
        for index in 0..count {
            let cref = CommitteeRef { layer, index };
            let lo = index * plan.fanout;
            let hi = ((index + 1) * plan.fanout).min(below.len());
            let inputs: Vec<&AggregateMessage<ModelSig>> = below[lo..hi].iter().flatten().collect();
            let reps = plan.committee(cref).representatives();
            let capture_rep = (input.capture_path && index == 0).then(|| first_honest(reps, input.corruption));
            let mut sent = Vec::new();
            for &r in reps {
                let is_bad = corrupted(r);
                if is_bad && silent(input.kind) {
                    continue;
                }
                let policy = crate::adversary::aggregator_policy(input.kind, is_bad, false, input.targets);
                let mut node = InternalAggregator::for_committee(plan, cref, r, policy.clone());
                let mut out = Vec::new();
                for m in &inputs {
                    out.extend(node.on_aggregate(&scheme, m));
                }
                out.extend(node.on_timeout(&scheme));
                if !node.on_timeout(&scheme).is_empty() {
                    stats.at_most_once_violations += 1;
                }
                if capture_rep == Some(r) {
                    if let Some(p) = path.as_mut() {
                        p.internal.push(NodeCapture {
                            committee: cref,
                            representative: r,
                            policy,
                            inputs: inputs.iter().map(|m| (*m).clone()).collect(),
                            outputs: out.clone(),
                        });
                    }
                }
                sent.extend(out);
            }
            here.push(sent);
        }
        below = here;
    }

    let root_inputs: Vec<&AggregateMessage<ModelSig>> = below.iter().flatten().collect();
    let proposer_bad = corrupted(plan.proposer);
    let (attestation, root_policy) = if proposer_bad && silent(input.kind) {
        stats.silent_proposer = true;
        (BlockAttestation::empty(plan.slot), None)
    } else {
        let policy = if input.largest_only_root {
            SelectionPolicy::LargestOnly
        } else {
            crate::adversary::aggregator_policy(input.kind, proposer_bad, true, input.targets)
        };
        let mut root = InternalAggregator::for_root(plan, policy.clone());
        for m in &root_inputs {
            root.on_aggregate(&scheme, m);
        }
        let att = root.finalize(&scheme);
        stats.absent_children_at_root = root.stats.absent_children;
        (att, Some(policy))
    };
    if let Some(p) = path.as_mut() {
        p.root_policy = root_policy;
        p.root_inputs = root_inputs.iter().map(|m| (*m).clone()).collect();
    }

    for lane in attestation.lanes() {
        if !lane.signature.valid {
            return Err(Error::Invariant(format!(
                "slot {}: an invalid aggregate reached the block",
                plan.slot
            )));
        }
    }
    if let (Some(l), Some(r)) = (&attestation.largest, &attestation.random) {
        if l.bitmap.range() != r.bitmap.range() {
            return Err(Error::Invariant("lane bitmaps cover different ranges".into()));
        }
    }

    let included = |p: usize| attestation.included(p);
    stats.honest_voters = honest_voted.popcount();
    for p in honest_voted.iter_ones() {
        let inc = included(p);
        stats.honest_included += inc as usize;
        if input.targets.contains(p) {
            stats.targets_included += inc as usize;
        } else if !inc {
            stats.collateral += 1;
        }
    }
    for p in input.targets.iter_ones() {
        if !honest_voted.contains(p) && included(p) {
            stats.targets_included += 1;
        }
    }
    stats.victims = victims.popcount();
    stats.victims_included = victims.iter_ones().filter(|&p| included(p)).count();

    Ok(SlotOutcome {
        slot: plan.slot,
        attestation,
        stats,
        ops: meter.snapshot(),
        path,
        honest_voted,
        victims,
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::adversary::{corrupt, minority_targets, AdversaryStrategy};
    use crate::topology::{EpochPlan, TreeParams};

    fn plan(n: usize, m: usize, seed: u64) -> SlotPlan {
        SlotPlan::build(seed, 0, TreeParams::new(n, m).unwrap()).unwrap()
    }

    fn honest_input<'a>(
        plan: &'a SlotPlan,
        c: &'a CorruptionSet,
        t: &'a TargetSet,
        absent: &'a [bool],
        worst: bool,
    ) -> SlotInput<'a> {
        SlotInput {
            plan,
            block_hash: [1; 32],
            kind: StrategyKind::Honest,
            corruption: c,
            targets: t,
            absent,
            worst_case_transport: worst,
            capture_path: true,
            largest_only_root: false,
        }
    }

    #[test]
    fn honest_full_participation_includes_everyone() {
        let p = plan(4096, 256, 3);
        let c = CorruptionSet::none(0, 4096);
        let t = Arc::new(ParticipationBitmap::new(0, 4096));
        let absent = vec![false; 4096];
        let out = run_logical_slot(&honest_input(&p, &c, &t, &absent, false)).unwrap();
        assert_eq!(out.attestation.popcount_largest(), 4096);
        assert_eq!(out.stats.honest_included, 4096);
        assert_eq!(out.stats.at_most_once_violations, 0);
        let path = out.path.unwrap();
        assert_eq!(path.votes.len(), 256);
        assert_eq!(path.internal.len(), p.leaf_layer());
        assert!(!path.root_inputs.is_empty());
    }

    #[test]
    fn forged_votes_never_count() {
        let p = plan(4096, 256, 5);
        let c = CorruptionSet::none(0, 4096);
        let t = Arc::new(ParticipationBitmap::new(0, 4096));
        let absent: Vec<bool> = (0..4096).map(|v| v % 3 == 0).collect();
        let out = run_logical_slot(&honest_input(&p, &c, &t, &absent, true)).unwrap();
        let voters = absent.iter().filter(|a| !**a).count();
        assert_eq!(out.attestation.popcount_largest(), voters);
        for lane in out.attestation.lanes() {
            assert!(lane.bitmap.is_subset_of(&out.honest_voted));
        }
    }

    #[test]
    fn minority_attack_is_sound_and_leaves_victims() {
        let n = 2048;
        let params = TreeParams::new(n, 128).unwrap();
        let mut checks = 0;
        let mut victims = 0;
        for seed in 0..10u64 {
            let epoch = EpochPlan::build(seed, params).unwrap();
            let strat = AdversaryStrategy::new(StrategyKind::MinorityCommitteeCensor, 682);
            let c = corrupt(&strat, seed, 0, n, None).unwrap();
            let p = &epoch.slots[0];
            let t = Arc::new(minority_targets(p, &c));
            let absent = vec![false; n];
            let input = SlotInput {
                plan: p,
                block_hash: [2; 32],
                kind: strat.kind,
                corruption: &c,
                targets: &t,
                absent: &absent,
                worst_case_transport: false,
                capture_path: false,
                largest_only_root: false,
            };
            let out = run_logical_slot(&input).unwrap();
            assert_eq!(out.stats.soundness_violations, 0);
            assert_eq!(out.stats.at_most_once_violations, 0);
            checks += out.stats.soundness_checks;
            victims += out.stats.victims;
        }
        assert!(checks > 0);
        assert!(victims > 0);
    }

    #[test]
    fn slowly_adaptive_silence_only_costs_corrupted_votes() {
        let n = 4096;
        let p = plan(n, 256, 8);
        let strat = AdversaryStrategy::new(StrategyKind::SlowlyAdaptiveUniform, 400);
        let c = corrupt(&strat, 8, 0, n, None).unwrap();
        let t = Arc::new(ParticipationBitmap::new(0, n));
        let absent = vec![false; n];
        let input = SlotInput {
            kind: strat.kind,
            ..honest_input(&p, &c, &t, &absent, false)
        };
        let out = run_logical_slot(&input).unwrap();
        if out.stats.silent_proposer {
            assert!(out.attestation.empty);
        } else {
            assert_eq!(out.attestation.popcount_largest(), n - 400);
            assert_eq!(out.stats.collateral, 0);
        }
    }
}

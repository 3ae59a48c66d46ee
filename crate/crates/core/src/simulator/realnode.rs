//! Real-crypto replay of one node per role along the captured path.
//!
//! Inputs the logical run produced are turned into genuine BLS objects: a
//! valid aggregate over a bitmap is signed with the sum of the members'
//! secret keys, which equals the aggregate of their signatures; an invalid
//! one is a random group element. Each real node then runs the same state
//! machine as in the logical run and must reach the same outputs.

use std::collections::HashMap;

use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::logical::{PathCapture, VoteKind};
use super::parallel::{Timed, Workers};
use super::registry::KeyRegistry;
use crate::crypto::{
    keygen, verify_aggregate_hashed, verify_hashed, AggregatePublicKey, HashedMessage, KeyDirectory,
    OpMeter, ParticipationBitmap, Signature, ValidatorId,
};
use crate::error::{Error, Result};
use crate::protocol::{
    block_hash, AggregateMessage, Block, BlockAttestation, BlockHash, BlsScheme, InternalAggregator,
    LaneAggregate, LeafAggregator, LeafValidator, ModelSig, VoteMessage,
};
use crate::seed;
use crate::topology::SlotPlan;

/// One timed phase of one real node.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseTiming {
    pub role: String,
    pub phase: String,
    pub items: usize,
    /// Items actually executed; the rest were extrapolated.
    pub sampled: usize,
    pub measured: f64,
    pub effective: f64,
    pub parallel: bool,
}

impl PhaseTiming {
    fn new(role: &str, phase: &str, items: usize, sampled: usize, t: Timed, parallel: bool) -> Self {
        let scale = if sampled == 0 { 1.0 } else { items as f64 / sampled as f64 };
        Self {
            role: role.into(),
            phase: phase.into(),
            items,
            sampled,
            measured: t.measured * scale,
            effective: t.effective * scale,
            parallel,
        }
    }

    pub fn extrapolated(&self) -> bool {
        self.sampled < self.items
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct RealChecks {
    pub leaf_aggregator_matches: bool,
    /// Leaf-parent first.
    pub internal_matches: Vec<bool>,
    pub proposer_matches: bool,
    pub attestation_verifies: bool,
    pub leaf_validator_voted: bool,
    pub pairings: usize,
}

impl RealChecks {
    pub fn all_match(&self) -> bool {
        self.leaf_aggregator_matches && self.internal_matches.iter().all(|&b| b) && self.proposer_matches
    }
}

pub struct RealPath {
    pub phases: Vec<PhaseTiming>,
    pub checks: RealChecks,
    pub attestation: BlockAttestation<Signature>,
    pub ops: crate::crypto::OpCounts,
}

/// Turns validity tokens into curve points for one slot.
struct Materializer<'a> {
    registry: &'a KeyRegistry,
    order: &'a [ValidatorId],
    message: HashedMessage,
    cache: HashMap<Vec<u8>, Signature>,
    rng: ChaCha20Rng,
}

impl Materializer<'_> {
    fn aggregate(&mut self, bitmap: &ParticipationBitmap, sig: ModelSig) -> Signature {
        if !sig.valid {
            return Signature::forgery(&mut self.rng);
        }
        let key = bitmap.to_bytes();
        if let Some(s) = self.cache.get(&key) {
            return *s;
        }
        let sk = self
            .registry
            .secret_sum(bitmap.iter_ones().map(|p| self.order[p]));
        let s = sk.sign_hashed(&self.message);
        self.cache.insert(key, s);
        s
    }

    fn message(&mut self, m: &AggregateMessage<ModelSig>) -> AggregateMessage<Signature> {
        AggregateMessage {
            slot: m.slot,
            from: m.from,
            representative: m.representative,
            signature: self.aggregate(&m.bitmap, m.signature),
            bitmap: m.bitmap.clone(),
            lane: m.lane,
        }
    }
}

/// Evenly spaced subset of `0..items` of size at most `cap`.
fn sample_indices(items: usize, cap: usize) -> Vec<usize> {
    if items <= cap {
        return (0..items).collect();
    }
    (0..cap).map(|i| i * items / cap).collect()
}

fn same_messages(a: &[AggregateMessage<Signature>], b: &[AggregateMessage<ModelSig>]) -> bool {
    a.len() == b.len()
        && a.iter().zip(b).all(|(x, y)| {
            x.from == y.from && x.representative == y.representative && x.lane == y.lane && x.bitmap == y.bitmap
        })
}

fn same_lane(a: &Option<LaneAggregate<Signature>>, b: &Option<LaneAggregate<ModelSig>>) -> bool {
    match (a, b) {
        (None, None) => true,
        (Some(x), Some(y)) => x.bitmap == y.bitmap,
        _ => false,
    }
}

pub struct RealContext<'a> {
    pub plan: &'a SlotPlan,
    pub registry: &'a KeyRegistry,
    pub block_hash: BlockHash,
    pub workers: &'a Workers,
    pub max_items: usize,
}

/// Verdicts for admitted aggregates: the sampled ones are checked for real
/// (key reconstruction and pairing timed apart), the rest reuse the token.
struct Verdicts {
    valid: Vec<bool>,
    pk: PhaseTiming,
    verify: PhaseTiming,
}

fn verify_aggregates(
    role: &str,
    ctx: &RealContext<'_>,
    directory: &KeyDirectory,
    h: &HashedMessage,
    msgs: &[AggregateMessage<Signature>],
    tokens: &[bool],
    meter: &OpMeter,
) -> Verdicts {
    let idx = sample_indices(msgs.len(), ctx.max_items);
    let (keys, t_pk): (Vec<AggregatePublicKey>, Timed) = ctx.workers.parallel(|| {
        idx.par_iter()
            .map(|&i| {
                let (k, cost) = directory.reconstruct(&msgs[i].bitmap);
                meter.pka(cost as u64);
                k
            })
            .collect()
    });
    let (ok, t_v): (Vec<bool>, Timed) = ctx.workers.parallel(|| {
        idx.par_iter()
            .zip(keys.par_iter())
            .map(|(&i, k)| {
                meter.sgv(1);
                verify_aggregate_hashed(&msgs[i].signature, k, h)
            })
            .collect()
    });
    let mut valid = tokens.to_vec();
    for (&i, v) in idx.iter().zip(ok) {
        valid[i] = v;
    }
    Verdicts {
        valid,
        pk: PhaseTiming::new(role, "pk", msgs.len(), idx.len(), t_pk, true),
        verify: PhaseTiming::new(role, "verify", msgs.len(), idx.len(), t_v, true),
    }
}

pub fn run_real_path(
    ctx: &RealContext<'_>,
    capture: &PathCapture,
    logical: &BlockAttestation<ModelSig>,
) -> Result<RealPath> {
    let plan = ctx.plan;
    let meter = OpMeter::default();
    let h = HashedMessage::new(&ctx.block_hash);
    let directory = KeyDirectory::new(ctx.registry.public_keys(), &plan.leaf_order, plan.group_size);
    let scheme = BlsScheme {
        directory: &directory,
        message: h,
        meter: &meter,
    };
    let mut mat = Materializer {
        registry: ctx.registry,
        order: &plan.leaf_order,
        message: h,
        cache: HashMap::new(),
        rng: seed::rng("forgery", ctx.registry.seed(), &[plan.slot as u64]),
    };
    let mut phases = Vec::new();
    let mut checks = RealChecks::default();

    // leaf aggregator
    let role = "leaf_aggregator";
    let votes: Vec<VoteMessage<Signature>> = capture
        .votes
        .iter()
        .map(|&(_, v, k)| VoteMessage {
            slot: plan.slot,
            block_hash: ctx.block_hash,
            validator_id: v,
            signature: match k {
                VoteKind::Valid => ctx.registry.secret(v).sign_hashed(&h),
                VoteKind::Forged => Signature::forgery(&mut mat.rng),
            },
        })
        .collect();
    let mut leaf = LeafAggregator::new(plan, capture.leaf_group, capture.leaf_representative, ctx.block_hash, Signature::identity());
    let admitted: Vec<(usize, usize)> = votes
        .iter()
        .enumerate()
        .filter_map(|(i, v)| leaf.admit(v).map(|p| (i, p)))
        .collect();
    let idx = sample_indices(admitted.len(), ctx.max_items);
    let (ok, t): (Vec<bool>, Timed) = ctx.workers.parallel(|| {
        idx.par_iter()
            .map(|&j| {
                let (i, p) = admitted[j];
                meter.sgv(1);
                verify_hashed(directory.key_at(p), &h, &votes[i].signature)
            })
            .collect()
    });
    phases.push(PhaseTiming::new(role, "verify", admitted.len(), idx.len(), t, true));
    let mut verdict: Vec<bool> = admitted
        .iter()
        .map(|&(i, _)| capture.votes[i].2 == VoteKind::Valid)
        .collect();
    for (&j, v) in idx.iter().zip(ok) {
        verdict[j] = v;
    }
    let (leaf_out, t) = ctx.workers.serial(|| {
        let mut out = None;
        for (&(i, p), &v) in admitted.iter().zip(&verdict) {
            if let Some(m) = leaf.apply(&scheme, p, &votes[i].signature, v) {
                out = Some(m);
            }
        }
        out.or_else(|| leaf.on_timeout())
    });
    phases.push(PhaseTiming::new(role, "aggregate", admitted.len(), admitted.len(), t, false));
    checks.leaf_aggregator_matches = match (&leaf_out, &capture.leaf_output) {
        (None, None) => true,
        (Some(a), Some(b)) => {
            a.bitmap == b.bitmap && a.signature == mat.aggregate(&b.bitmap, b.signature)
        }
        _ => false,
    };

    // one internal aggregator per depth
    for node in &capture.internal {
        let role = format!("internal_d{}", node.committee.depth());
        let inputs: Vec<AggregateMessage<Signature>> = node.inputs.iter().map(|m| mat.message(m)).collect();
        let mut agg = InternalAggregator::for_committee(plan, node.committee, node.representative, node.policy.clone());
        let (real_out, node_phases) = run_internal(ctx, &role, &directory, &scheme, &mut agg, &inputs, &node.inputs, &meter, false)?;
        phases.extend(node_phases);
        let mut matches = same_messages(&real_out.0, &node.outputs);
        for (r, l) in real_out.0.iter().zip(&node.outputs) {
            matches &= r.signature == mat.aggregate(&l.bitmap, l.signature);
        }
        checks.internal_matches.push(matches);
    }

    // proposer
    let attestation = match &capture.root_policy {
        None => BlockAttestation::empty(plan.slot),
        Some(policy) => {
            let inputs: Vec<AggregateMessage<Signature>> =
                capture.root_inputs.iter().map(|m| mat.message(m)).collect();
            let mut root = InternalAggregator::for_root(plan, policy.clone());
            let ((_, att), node_phases) =
                run_internal(ctx, "proposer", &directory, &scheme, &mut root, &inputs, &capture.root_inputs, &meter, true)?;
            phases.extend(node_phases);
            att.expect("root finalizes")
        }
    };
    checks.proposer_matches = attestation.empty == logical.empty
        && same_lane(&attestation.largest, &logical.largest)
        && same_lane(&attestation.random, &logical.random);
    checks.attestation_verifies = !attestation.empty
        && attestation.lanes().iter().all(|lane| {
            let (k, _) = directory.reconstruct(&lane.bitmap);
            verify_aggregate_hashed(&lane.signature, &k, &h)
        });

    // leaf validator of the next slot checks this attestation and votes
    let role = "leaf_validator";
    let me = (0..plan.n as ValidatorId)
        .find(|&v| v != plan.proposer)
        .unwrap_or(0);
    let kp = keygen(ctx.registry.seed(), me);
    let validator = LeafValidator::new(kp, ctx.registry.public_keys(), ctx.workers.cores());
    let next = block_hash(ctx.registry.seed() ^ plan.seed, plan.slot as u64 + 1);
    let block = Block {
        slot: plan.slot + 1,
        hash: next,
        parent_hash: ctx.block_hash,
        attestation: &attestation,
        parent_order: &plan.leaf_order,
    };
    let lanes = attestation.lanes();
    if !lanes.is_empty() {
        let (keys, t) = ctx.workers.parallel(|| {
            lanes
                .iter()
                .map(|l| validator.lane_key(l, &plan.leaf_order, ctx.registry.public_keys(), &meter))
                .collect::<Option<Vec<_>>>()
        });
        phases.push(PhaseTiming::new(role, "pk", lanes.len(), lanes.len(), t, true));
        let keys = keys.ok_or_else(|| Error::Invariant("attestation lane key did not rebuild".into()))?;
        let (ok, t) = ctx.workers.serial(|| {
            lanes
                .iter()
                .zip(&keys)
                .all(|(l, k)| validator.check_lane(l, k, &h, &meter))
        });
        phases.push(PhaseTiming::new(role, "verify", lanes.len(), lanes.len(), t, false));
        if ok {
            let (_, t) = ctx.workers.serial(|| validator.vote(&block));
            phases.push(PhaseTiming::new(role, "sign", 1, 1, t, false));
        }
        checks.leaf_validator_voted = ok;
    }
    checks.pairings = meter.snapshot().sgv as usize;

    Ok(RealPath {
        phases,
        checks,
        attestation,
        ops: meter.snapshot(),
    })
}

type InternalOutput = (Vec<AggregateMessage<Signature>>, Option<BlockAttestation<Signature>>);

/// Admit, verify (sampled), apply in arrival order, then send or finalize.
#[allow(clippy::too_many_arguments)]
fn run_internal(
    ctx: &RealContext<'_>,
    role: &str,
    directory: &KeyDirectory,
    scheme: &BlsScheme<'_>,
    agg: &mut InternalAggregator<Signature>,
    inputs: &[AggregateMessage<Signature>],
    tokens: &[AggregateMessage<ModelSig>],
    meter: &OpMeter,
    is_root: bool,
) -> Result<(InternalOutput, Vec<PhaseTiming>)> {
    let admitted: Vec<(usize, crate::protocol::Admitted)> = inputs
        .iter()
        .enumerate()
        .filter_map(|(i, m)| agg.admit(m).map(|a| (i, a)))
        .collect();
    let msgs: Vec<AggregateMessage<Signature>> = admitted.iter().map(|&(i, _)| inputs[i].clone()).collect();
    let token_ok: Vec<bool> = admitted.iter().map(|&(i, _)| tokens[i].signature.valid).collect();
    let v = verify_aggregates(role, ctx, directory, &scheme.message, &msgs, &token_ok, meter);
    if v.valid != token_ok {
        return Err(Error::Invariant(format!(
            "{role}: real verification disagrees with the synthesized validity"
        )));
    }
    let (out, t) = ctx.workers.serial(|| {
        let mut out = Vec::new();
        for ((_, a), (m, &ok)) in admitted.iter().zip(msgs.iter().zip(&v.valid)) {
            out.extend(agg.apply(scheme, *a, m, ok));
        }
        if is_root {
            (out, Some(agg.finalize(scheme)))
        } else {
            out.extend(agg.on_timeout(scheme));
            (out, None)
        }
    });
    let aggregate = PhaseTiming::new(role, "aggregate", admitted.len(), admitted.len(), t, false);
    Ok((out, vec![v.pk, v.verify, aggregate]))
}

use std::ops::Range;

use serde::Serialize;

use super::messages::{AggregateMessage, BlockAttestation, BlockHash, Lane, LaneAggregate, VoteMessage};
use super::scheme::VoteScheme;
use crate::crypto::{
    aggregate_public_keys, chunked_subtract, verify_aggregate_hashed, AggregatePublicKey,
    HashedMessage, KeyPair, OpMeter, ParticipationBitmap, PublicKey, Signature, ValidatorId,
};
use crate::topology::{CommitteeRef, SlotPlan};

/// A block as seen by a leaf validator: its own hash plus the attestation it
/// carries for the previous slot, whose bitmaps index that slot's positions.
pub struct Block<'a> {
    pub slot: u32,
    pub hash: BlockHash,
    pub parent_hash: BlockHash,
    pub attestation: &'a BlockAttestation<Signature>,
    /// Position-to-validator map of the slot the attestation comes from.
    pub parent_order: &'a [ValidatorId],
}

/// Baseline role of every validator: check the carried attestation, then
/// sign the block.
pub struct LeafValidator {
    keypair: KeyPair,
    /// Cached aggregates over contiguous validator-id ranges covering
    /// `[0, N)`, built once at bootstrap.
    chunks: Vec<AggregatePublicKey>,
    n: usize,
}

impl LeafValidator {
    pub fn new(keypair: KeyPair, keys_by_id: &[PublicKey], chunk_count: usize) -> Self {
        let n = keys_by_id.len();
        let c = chunk_count.clamp(1, n.max(1));
        let chunks = (0..c)
            .map(|k| {
                let r = k * n / c..(k + 1) * n / c;
                aggregate_public_keys(&keys_by_id[r.clone()], ParticipationBitmap::full(r.start, r.len()))
                    .expect("chunks are nonempty")
            })
            .collect();
        Self { keypair, chunks, n }
    }

    pub fn keypair(&self) -> &KeyPair {
        &self.keypair
    }

    pub fn chunk_count(&self) -> usize {
        self.chunks.len()
    }

    /// Aggregate key of one lane: subtraction from the cached chunks when
    /// most validators are present, direct summation otherwise.
    pub fn lane_key(
        &self,
        lane: &LaneAggregate<Signature>,
        parent_order: &[ValidatorId],
        keys_by_id: &[PublicKey],
        meter: &OpMeter,
    ) -> Option<AggregatePublicKey> {
        let bm = &lane.bitmap;
        if bm.offset() != 0 || bm.len() != self.n || parent_order.len() != self.n {
            return None;
        }
        let present = bm.popcount();
        let missing = self.n - present;
        if missing + self.chunks.len() < present {
            let pairs: Vec<(usize, PublicKey)> = bm
                .iter_zeros()
                .map(|p| {
                    let v = parent_order[p] as usize;
                    (v, keys_by_id[v])
                })
                .collect();
            meter.pka((missing + self.chunks.len() - 1) as u64);
            chunked_subtract(&self.chunks, &pairs).ok()
        } else {
            meter.pka(present as u64);
            // the aggregate's bitmap is in id space, so sort ids first
            let mut ids: Vec<usize> = bm.iter_ones().map(|p| parent_order[p] as usize).collect();
            ids.sort_unstable();
            let pks: Vec<PublicKey> = ids.iter().map(|&v| keys_by_id[v]).collect();
            aggregate_public_keys(&pks, ParticipationBitmap::from_indices(0, self.n, ids).ok()?)
                .ok()
        }
    }

    pub fn check_lane(
        &self,
        lane: &LaneAggregate<Signature>,
        key: &AggregatePublicKey,
        parent_hash: &HashedMessage,
        meter: &OpMeter,
    ) -> bool {
        meter.sgv(1);
        lane.bitmap.popcount() > 0 && verify_aggregate_hashed(&lane.signature, key, parent_hash)
    }

    pub fn vote(&self, block: &Block<'_>) -> VoteMessage<Signature> {
        VoteMessage {
            slot: block.slot,
            block_hash: block.hash,
            validator_id: self.keypair.validator_id,
            signature: self
                .keypair
                .secret_key
                .sign_hashed(&HashedMessage::new(&block.hash)),
        }
    }

    /// Votes iff every lane of the carried attestation verifies. An empty
    /// or all-zero attestation is invalid, except the genesis one.
    pub fn on_deliver(
        &self,
        block: &Block<'_>,
        keys_by_id: &[PublicKey],
        meter: &OpMeter,
    ) -> Option<VoteMessage<Signature>> {
        let att = block.attestation;
        if att.genesis {
            return (block.slot == 0).then(|| self.vote(block));
        }
        let lanes = att.lanes();
        if lanes.is_empty() {
            return None;
        }
        let parent = HashedMessage::new(&block.parent_hash);
        for lane in lanes {
            let key = self.lane_key(lane, block.parent_order, keys_by_id, meter)?;
            if !self.check_lane(lane, &key, &parent, meter) {
                return None;
            }
        }
        Some(self.vote(block))
    }
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct AggregatorStats {
    pub accepted: usize,
    pub invalid: usize,
    pub duplicate: usize,
    pub outsider: usize,
    pub wrong_block: usize,
    pub late: usize,
    pub empty_timeout: bool,
}

/// Leaf aggregator for one leaf group: folds valid votes into a running
/// aggregate and sends once, either when the group is complete or at the
/// timeout.
#[derive(Debug, Clone)]
pub struct LeafAggregator<S> {
    slot: u32,
    committee: CommitteeRef,
    representative: ValidatorId,
    block_hash: BlockHash,
    /// (validator, position) sorted by validator.
    members: Vec<(ValidatorId, usize)>,
    bitmap: ParticipationBitmap,
    agg: S,
    sent: bool,
    pub stats: AggregatorStats,
}

impl<S: Clone + PartialEq + std::fmt::Debug> LeafAggregator<S> {
    pub fn new(
        plan: &SlotPlan,
        group: usize,
        representative: ValidatorId,
        block_hash: BlockHash,
        identity: S,
    ) -> Self {
        let range = plan.leaf_group_range(group);
        Self::for_range(
            plan.slot,
            plan.leaf_committee(group),
            range.clone(),
            &plan.leaf_order[range],
            representative,
            block_hash,
            identity,
        )
    }

    pub fn for_range(
        slot: u32,
        committee: CommitteeRef,
        range: Range<usize>,
        validators: &[ValidatorId],
        representative: ValidatorId,
        block_hash: BlockHash,
        identity: S,
    ) -> Self {
        let mut members: Vec<(ValidatorId, usize)> = validators
            .iter()
            .enumerate()
            .map(|(j, &v)| (v, range.start + j))
            .collect();
        members.sort_unstable();
        Self {
            slot,
            committee,
            representative,
            block_hash,
            members,
            bitmap: ParticipationBitmap::from_range(range),
            agg: identity,
            sent: false,
            stats: AggregatorStats::default(),
        }
    }

    pub fn popcount(&self) -> usize {
        self.bitmap.popcount()
    }

    pub fn is_sent(&self) -> bool {
        self.sent
    }

    /// Cheap checks before any crypto; returns the vote's position.
    pub fn admit(&mut self, vote: &VoteMessage<S>) -> Option<usize> {
        if self.sent {
            self.stats.late += 1;
            return None;
        }
        if vote.slot != self.slot || vote.block_hash != self.block_hash {
            self.stats.wrong_block += 1;
            return None;
        }
        let Ok(i) = self
            .members
            .binary_search_by_key(&vote.validator_id, |(v, _)| *v)
        else {
            self.stats.outsider += 1;
            return None;
        };
        let pos = self.members[i].1;
        if self.bitmap.contains(pos) {
            self.stats.duplicate += 1;
            return None;
        }
        Some(pos)
    }

    /// Applies an already-verified vote; this is where the send-on-full rule
    /// fires.
    pub fn apply<V: VoteScheme<Sig = S>>(
        &mut self,
        scheme: &V,
        position: usize,
        sig: &S,
        valid: bool,
    ) -> Option<AggregateMessage<S>> {
        if self.sent {
            self.stats.late += 1;
            return None;
        }
        if !valid {
            self.stats.invalid += 1;
            return None;
        }
        if !self.bitmap.set(position).unwrap_or(false) {
            self.stats.duplicate += 1;
            return None;
        }
        self.stats.accepted += 1;
        scheme.combine(&mut self.agg, sig);
        (self.bitmap.popcount() == self.bitmap.len()).then(|| self.emit())
    }

    pub fn on_vote<V: VoteScheme<Sig = S>>(
        &mut self,
        scheme: &V,
        vote: &VoteMessage<S>,
    ) -> Option<AggregateMessage<S>> {
        let pos = self.admit(vote)?;
        let ok = scheme.verify_vote(pos, &vote.signature);
        self.apply(scheme, pos, &vote.signature, ok)
    }

    pub fn on_timeout(&mut self) -> Option<AggregateMessage<S>> {
        if self.sent {
            return None;
        }
        if self.bitmap.popcount() == 0 {
            self.stats.empty_timeout = true;
            return None;
        }
        Some(self.emit())
    }

    fn emit(&mut self) -> AggregateMessage<S> {
        self.sent = true;
        AggregateMessage {
            slot: self.slot,
            from: self.committee,
            representative: self.representative,
            signature: self.agg.clone(),
            bitmap: self.bitmap.clone(),
            lane: Lane::Both,
        }
    }
}

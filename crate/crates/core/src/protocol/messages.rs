use serde::{Deserialize, Serialize};

use crate::crypto::{ParticipationBitmap, ValidatorId};
use crate::topology::CommitteeRef;

pub type BlockHash = [u8; 32];

/// Which selection an aggregate belongs to. `Both` marks a single aggregate
/// standing for both lanes (leaf level, or when the two picks coincide).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Lane {
    Largest,
    Random,
    Both,
}

impl Lane {
    pub fn carries_largest(self) -> bool {
        matches!(self, Lane::Largest | Lane::Both)
    }

    pub fn carries_random(self) -> bool {
        matches!(self, Lane::Random | Lane::Both)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VoteMessage<S> {
    pub slot: u32,
    pub block_hash: BlockHash,
    pub validator_id: ValidatorId,
    pub signature: S,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateMessage<S> {
    pub slot: u32,
    /// Committee the sender represents.
    pub from: CommitteeRef,
    pub representative: ValidatorId,
    pub signature: S,
    pub bitmap: ParticipationBitmap,
    pub lane: Lane,
}

/// One lane of a block's attestation: an aggregate and its `[0, N)` bitmap.
#[derive(Debug, Clone, PartialEq)]
pub struct LaneAggregate<S> {
    pub signature: S,
    pub bitmap: ParticipationBitmap,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockAttestation<S> {
    pub slot: u32,
    pub largest: Option<LaneAggregate<S>>,
    pub random: Option<LaneAggregate<S>>,
    /// Set when the proposer had nothing to include, and on the genesis
    /// attestation.
    pub empty: bool,
    pub genesis: bool,
}

impl<S> BlockAttestation<S> {
    pub fn genesis() -> Self {
        Self {
            slot: 0,
            largest: None,
            random: None,
            empty: true,
            genesis: true,
        }
    }

    pub fn empty(slot: u32) -> Self {
        Self {
            slot,
            largest: None,
            random: None,
            empty: true,
            genesis: false,
        }
    }

    pub fn included_largest(&self, position: usize) -> bool {
        self.largest
            .as_ref()
            .is_some_and(|l| l.bitmap.contains(position))
    }

    pub fn included_random(&self, position: usize) -> bool {
        self.random
            .as_ref()
            .is_some_and(|l| l.bitmap.contains(position))
    }

    /// Included iff set in either lane.
    pub fn included(&self, position: usize) -> bool {
        self.included_largest(position) || self.included_random(position)
    }

    pub fn popcount_largest(&self) -> usize {
        self.largest.as_ref().map_or(0, |l| l.bitmap.popcount())
    }

    pub fn popcount_random(&self) -> usize {
        self.random.as_ref().map_or(0, |l| l.bitmap.popcount())
    }

    /// The distinct lanes, once each.
    pub fn lanes(&self) -> Vec<&LaneAggregate<S>>
    where
        S: PartialEq,
    {
        let mut out: Vec<&LaneAggregate<S>> = self.largest.iter().collect();
        if let Some(r) = &self.random {
            if out.first().is_none_or(|l| *l != r) {
                out.push(r);
            }
        }
        out
    }
}

/// Stable 32-byte identifier for the block proposed at `slot` of a run.
pub fn block_hash(seed: u64, slot: u64) -> BlockHash {
    crate::seed::derive("block-hash", seed, &[slot])
}

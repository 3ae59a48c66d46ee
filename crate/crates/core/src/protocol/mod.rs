//! Role state machines: leaf validator, leaf aggregator, internal aggregator
//! and proposer, plus reward-window eligibility and the wire format.

mod internal;
mod leaf;
mod messages;
mod rewards;
mod scheme;
pub mod wire;

pub use internal::{
    select_subcommittee, Admitted, Candidate, InternalAggregator, InternalStats, NodeRef,
    Selected, Selection, SelectionPolicy, TargetSet,
};
pub use leaf::{AggregatorStats, Block, LeafAggregator, LeafValidator};
pub use messages::{
    block_hash, AggregateMessage, BlockAttestation, BlockHash, Lane, LaneAggregate, VoteMessage,
};
pub use rewards::{
    reward_window_eligibility, window_loss_probability, InclusionRecords, WindowEligibility,
    WindowScheme,
};
pub use scheme::{BlsScheme, ModelScheme, ModelSig, VoteScheme};

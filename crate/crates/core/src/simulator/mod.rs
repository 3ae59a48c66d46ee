//! Slot and epoch harness. The whole tree runs logically; one node per
//! role reruns its share with real BLS and is timed.

mod config;
mod ledger;
mod logical;
mod parallel;
mod realnode;
mod registry;
mod run;

pub use config::{AutoFanout, Fanout, SimulationConfig};
pub use ledger::{InclusionLedger, InclusionRow};
pub use logical::{run_logical_slot, NodeCapture, PathCapture, SlotInput, SlotOutcome, SlotStats, VoteKind};
pub use parallel::{parallelism_model, Timed, Workers, MAX_WORKERS_ENV};
pub use realnode::{run_real_path, PhaseTiming, RealChecks, RealContext, RealPath};
pub use registry::KeyRegistry;
pub use run::{
    epoch_context, ethereum_subcommittees, run_epochs, run_ethereum_baseline, run_slot,
    run_slot_with, Design, EpochContext, EpochRun, Prediction, SlotResult,
};

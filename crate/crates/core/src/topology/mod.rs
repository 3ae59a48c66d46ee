//! Per-slot aggregation trees, the latency model and fanout search.

mod calibration;
mod cost;
mod params;
mod plan;

pub use calibration::{calibrate, Calibration, CalibrationConfig, OpStats};
pub use cost::{
    aggregation_delay, aggregation_delay_at, default_fanout_range, delay_breakdown,
    optimal_fanout, CostModel, DelayBreakdown,
};
pub use params::{depth, TreeParams, COMMITTEE_SIZE, REPRESENTATIVES, SLOTS_PER_EPOCH};
pub use plan::{
    adjacency, build_slot_plan, Adjacency, Children, Committee, CommitteeRef, EpochPlan, Parent,
    PlanKind, RoleInstance, SlotPlan,
};

use serde::Serialize;

use crate::crypto::{ParticipationBitmap, ValidatorId};
use crate::error::{Error, Result};
use crate::protocol::{BlockAttestation, InclusionRecords};
use crate::topology::SlotPlan;

/// Per validator and slot: whether it made the largest and the random lane.
/// Stored in validator-id space, so rows from different slots line up.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct InclusionLedger {
    n: usize,
    largest: Vec<ParticipationBitmap>,
    random: Vec<ParticipationBitmap>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct InclusionRow {
    pub validator: ValidatorId,
    pub slot: usize,
    pub included_largest: bool,
    pub included_random: bool,
}

impl InclusionLedger {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            ..Default::default()
        }
    }

    pub fn validators(&self) -> usize {
        self.n
    }

    pub fn slots(&self) -> usize {
        self.largest.len()
    }

    /// Appends one slot, mapping attestation positions through `plan`.
    pub fn record<S>(&mut self, plan: &SlotPlan, att: &BlockAttestation<S>) -> Result<()> {
        if plan.n != self.n {
            return Err(Error::InvalidArgument(format!(
                "plan has {} validators, ledger {}",
                plan.n, self.n
            )));
        }
        let to_ids = |bm: Option<&ParticipationBitmap>| -> Result<ParticipationBitmap> {
            let mut out = ParticipationBitmap::new(0, self.n);
            if let Some(bm) = bm {
                for p in bm.iter_ones() {
                    out.set(plan.validator_at(p) as usize)?;
                }
            }
            Ok(out)
        };
        self.largest.push(to_ids(att.largest.as_ref().map(|l| &l.bitmap))?);
        self.random.push(to_ids(att.random.as_ref().map(|l| &l.bitmap))?);
        Ok(())
    }

    pub fn included_largest(&self, slot: usize, v: ValidatorId) -> bool {
        self.largest[slot].contains(v as usize)
    }

    pub fn included_random(&self, slot: usize, v: ValidatorId) -> bool {
        self.random[slot].contains(v as usize)
    }

    pub fn included(&self, slot: usize, v: ValidatorId) -> bool {
        self.included_largest(slot, v) || self.included_random(slot, v)
    }

    /// Slots in which `v` made either lane.
    pub fn inclusion_count(&self, v: ValidatorId) -> usize {
        (0..self.slots()).filter(|&s| self.included(s, v)).count()
    }

    /// True iff every ledger bit equals the attestation bit it came from.
    pub fn consistent_with<S>(&self, slot: usize, plan: &SlotPlan, att: &BlockAttestation<S>) -> bool {
        (0..self.n).all(|p| {
            let v = plan.validator_at(p);
            self.included_largest(slot, v) == att.included_largest(p)
                && self.included_random(slot, v) == att.included_random(p)
        })
    }

    pub fn to_records(&self) -> InclusionRecords {
        let mut r = InclusionRecords::new(self.n);
        for s in 0..self.slots() {
            r.push_slot((0..self.n as ValidatorId).map(|v| self.included(s, v)).collect())
                .expect("rows have n entries");
        }
        r
    }

    pub fn rows(&self) -> impl Iterator<Item = InclusionRow> + '_ {
        (0..self.n as ValidatorId).flat_map(move |v| {
            (0..self.slots()).map(move |slot| InclusionRow {
                validator: v,
                slot,
                included_largest: self.included_largest(slot, v),
                included_random: self.included_random(slot, v),
            })
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::{LaneAggregate, ModelSig};
    use crate::topology::TreeParams;

    #[test]
    fn record_maps_positions_to_ids() {
        let plan = SlotPlan::build(1, 0, TreeParams::new(256, 32).unwrap()).unwrap();
        let mut bm = ParticipationBitmap::new(0, 256);
        bm.set(5).unwrap();
        let att = BlockAttestation {
            slot: 0,
            largest: Some(LaneAggregate {
                signature: ModelSig::VALID,
                bitmap: bm,
            }),
            random: None,
            empty: false,
            genesis: false,
        };
        let mut l = InclusionLedger::new(256);
        l.record(&plan, &att).unwrap();
        let v = plan.validator_at(5);
        assert!(l.included_largest(0, v));
        assert!(!l.included_random(0, v));
        assert_eq!(l.inclusion_count(v), 1);
        assert!(l.consistent_with(0, &plan, &att));
        assert_eq!(l.rows().count(), 256);
        assert!(l.to_records().included(0, v as usize));
    }
}

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WindowScheme {
    /// Back-to-back windows `[0,k), [k,2k), ...`; a trailing partial window
    /// is dropped.
    Fixed,
    /// Every window `[s, s+k)` that fits.
    Sliding,
}

/// Per-slot inclusion flags in validator-id order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct InclusionRecords {
    validators: usize,
    slots: Vec<Vec<bool>>,
}

impl InclusionRecords {
    pub fn new(validators: usize) -> Self {
        Self {
            validators,
            slots: Vec::new(),
        }
    }

    pub fn push_slot(&mut self, included: Vec<bool>) -> Result<()> {
        if included.len() != self.validators {
            return Err(Error::InvalidArgument(format!(
                "slot has {} flags, expected {}",
                included.len(),
                self.validators
            )));
        }
        self.slots.push(included);
        Ok(())
    }

    pub fn validators(&self) -> usize {
        self.validators
    }

    pub fn slot_count(&self) -> usize {
        self.slots.len()
    }

    pub fn included(&self, slot: usize, validator: usize) -> bool {
        self.slots[slot][validator]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WindowEligibility {
    pub start: usize,
    pub eligible: Vec<bool>,
}

/// A validator earns the window's reward iff it was included in at least one
/// of the window's `k` slots.
pub fn reward_window_eligibility(
    records: &InclusionRecords,
    k: usize,
    scheme: WindowScheme,
) -> Result<Vec<WindowEligibility>> {
    if k == 0 {
        return Err(Error::InvalidArgument("window length must be positive".into()));
    }
    let t = records.slot_count();
    if t < k {
        return Err(Error::InvalidArgument(format!(
            "{t} slots recorded, window needs {k}"
        )));
    }
    let starts: Vec<usize> = match scheme {
        WindowScheme::Fixed => (0..t / k).map(|w| w * k).collect(),
        WindowScheme::Sliding => (0..=t - k).collect(),
    };
    Ok(starts
        .into_iter()
        .map(|start| {
            let mut eligible = vec![false; records.validators];
            for slot in &records.slots[start..start + k] {
                for (e, &inc) in eligible.iter_mut().zip(slot) {
                    *e |= inc;
                }
            }
            WindowEligibility { start, eligible }
        })
        .collect())
}

/// Chance of missing a window when each slot includes the validator
/// independently with probability `p`: `(1-p)^k`.
pub fn window_loss_probability(p: f64, k: u32) -> f64 {
    (1.0 - p).powi(k as i32)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn records(rows: &[&[bool]]) -> InclusionRecords {
        let mut r = InclusionRecords::new(rows[0].len());
        for row in rows {
            r.push_slot(row.to_vec()).unwrap();
        }
        r
    }

    #[test]
    fn always_included_is_always_eligible() {
        let r = records(&[&[true, true] as &[bool]; 6]);
        for scheme in [WindowScheme::Fixed, WindowScheme::Sliding] {
            for w in reward_window_eligibility(&r, 3, scheme).unwrap() {
                assert_eq!(w.eligible, vec![true, true]);
            }
        }
    }

    #[test]
    fn fixed_windows_and_boundary() {
        let (t, f) = (true, false);
        // validator 0 misses the whole first window, validator 1 is only
        // included in the last slot of the first window
        let r = records(&[&[f, f], &[f, f], &[f, t], &[t, f], &[f, f], &[f, f], &[t, t]]);
        let w = reward_window_eligibility(&r, 3, WindowScheme::Fixed).unwrap();
        assert_eq!(w.len(), 2);
        assert_eq!(w[0].eligible, vec![false, true]);
        assert_eq!(w[1].eligible, vec![true, false]);

        let s = reward_window_eligibility(&r, 3, WindowScheme::Sliding).unwrap();
        assert_eq!(s.len(), 5);
        assert_eq!(s[2].start, 2);
        assert_eq!(s[2].eligible, vec![true, true]);
    }

    #[test]
    fn rejects_bad_windows() {
        let r = records(&[&[true] as &[bool]; 2]);
        assert!(reward_window_eligibility(&r, 0, WindowScheme::Fixed).is_err());
        assert!(reward_window_eligibility(&r, 3, WindowScheme::Sliding).is_err());
        let mut r = InclusionRecords::new(2);
        assert!(r.push_slot(vec![true]).is_err());
    }

    #[test]
    fn loss_probability_closed_form() {
        assert_eq!(window_loss_probability(1.0, 5), 0.0);
        assert!((window_loss_probability(0.5, 3) - 0.125).abs() < 1e-15);
    }
}

use std::ops::Range;

use blst::blst_p1;

use super::aggregate::{add_affine, add_point, sub_affine, sub_point, AggregatePublicKey};
use super::bitmap::ParticipationBitmap;
use super::keys::{PublicKey, ValidatorId};

/// How a bitmap's aggregate key is rebuilt from a directory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reconstruction {
    /// Sum the present keys one by one.
    Direct { adds: usize },
    /// Start from a cached aggregate of the whole window and remove the
    /// absent keys. Only possible when the window is block-aligned.
    Subtract { missing: usize },
}

impl Reconstruction {
    /// Group additions charged, counting the cached range lookup as one.
    pub fn cost(&self) -> usize {
        match *self {
            Reconstruction::Direct { adds } => adds,
            Reconstruction::Subtract { missing } => missing + 1,
        }
    }
}

fn aligned(range: &Range<usize>, block: usize, n: usize) -> bool {
    range.start % block == 0 && (range.end % block == 0 || range.end == n) && range.end <= n
}

/// Picks the cheaper route for `bitmap`; pure function of the bitmap shape,
/// so timing-only runs can charge the same cost without touching keys.
pub fn plan_reconstruction(bitmap: &ParticipationBitmap, block: usize, n: usize) -> Reconstruction {
    let present = bitmap.popcount();
    let missing = bitmap.len() - present;
    if aligned(&bitmap.range(), block, n) && missing + 1 < present {
        Reconstruction::Subtract { missing }
    } else {
        Reconstruction::Direct { adds: present }
    }
}

/// Public keys laid out in slot-position order, with cached prefix sums at
/// every `block` boundary (the leaf-group size). Any block-aligned window
/// then has its full aggregate in one subtraction, which is what makes
/// aggregate-minus-missing reconstruction cheap at every tree level.
pub struct KeyDirectory {
    keys: Vec<PublicKey>,
    block: usize,
    prefix: Vec<blst_p1>,
}

impl KeyDirectory {
    /// `order[p]` is the validator sitting at position `p`.
    pub fn new(keys_by_id: &[PublicKey], order: &[ValidatorId], block: usize) -> Self {
        let keys = order.iter().map(|&v| keys_by_id[v as usize]).collect();
        Self::from_positions(keys, block)
    }

    pub fn from_positions(keys: Vec<PublicKey>, block: usize) -> Self {
        assert!(block > 0, "block size must be positive");
        let mut prefix = Vec::with_capacity(keys.len() / block + 2);
        let mut acc = blst_p1::default();
        prefix.push(acc);
        for chunk in keys.chunks(block) {
            for pk in chunk {
                add_affine(&mut acc, pk);
            }
            prefix.push(acc);
        }
        Self { keys, block, prefix }
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn block(&self) -> usize {
        self.block
    }

    pub fn key_at(&self, position: usize) -> &PublicKey {
        &self.keys[position]
    }

    /// Cached aggregate of a block-aligned window.
    pub fn range_aggregate(&self, range: Range<usize>) -> Option<AggregatePublicKey> {
        if !aligned(&range, self.block, self.len()) || range.start > range.end {
            return None;
        }
        let lo = range.start / self.block;
        let hi = range.end.div_ceil(self.block);
        let mut point = self.prefix[hi];
        sub_point(&mut point, &self.prefix[lo]);
        Some(AggregatePublicKey::from_parts(
            point,
            ParticipationBitmap::full(range.start, range.len()),
        ))
    }

    pub fn full_aggregate(&self) -> AggregatePublicKey {
        self.range_aggregate(0..self.len()).expect("whole range is aligned")
    }

    /// Aggregate key for `bitmap`, plus the number of group additions spent.
    pub fn reconstruct(&self, bitmap: &ParticipationBitmap) -> (AggregatePublicKey, usize) {
        let plan = plan_reconstruction(bitmap, self.block, self.len());
        let mut point = blst_p1::default();
        match plan {
            Reconstruction::Subtract { .. } => {
                let lo = bitmap.offset() / self.block;
                let hi = bitmap.end().div_ceil(self.block);
                point = self.prefix[hi];
                sub_point(&mut point, &self.prefix[lo]);
                for i in bitmap.iter_zeros() {
                    sub_affine(&mut point, &self.keys[i]);
                }
            }
            Reconstruction::Direct { .. } => {
                for i in bitmap.iter_ones() {
                    add_affine(&mut point, &self.keys[i]);
                }
            }
        }
        (
            AggregatePublicKey::from_parts(point, bitmap.clone()),
            plan.cost(),
        )
    }

    /// Cached chunk aggregates over `[0, N)` with boundaries rounded to the
    /// block size; input to `chunked_subtract`.
    pub fn chunks(&self, count: usize) -> Vec<AggregatePublicKey> {
        let n = self.len();
        let blocks = n.div_ceil(self.block);
        let count = count.clamp(1, blocks.max(1));
        let mut out = Vec::with_capacity(count);
        let mut start = 0;
        for c in 1..=count {
            let end = ((c * blocks / count) * self.block).min(n);
            if end > start {
                out.push(self.range_aggregate(start..end).unwrap());
                start = end;
            }
        }
        out
    }

    pub fn sum_points(parts: &[AggregatePublicKey]) -> blst_p1 {
        let mut acc = blst_p1::default();
        for p in parts {
            add_point(&mut acc, p.point());
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::aggregate::aggregate_public_keys;
    use crate::crypto::keys::keygen;
    use proptest::prelude::*;

    fn directory(n: u32, block: usize) -> (Vec<PublicKey>, KeyDirectory) {
        let keys: Vec<PublicKey> = (0..n).map(|i| keygen(9, i).public_key).collect();
        let order: Vec<ValidatorId> = (0..n).rev().collect();
        let dir = KeyDirectory::new(&keys, &order, block);
        (keys, dir)
    }

    fn oracle(keys: &[PublicKey], n: usize, bm: &ParticipationBitmap) -> AggregatePublicKey {
        let pks: Vec<PublicKey> = bm.iter_ones().map(|p| keys[n - 1 - p]).collect();
        aggregate_public_keys(&pks, bm.clone()).unwrap()
    }

    #[test]
    fn range_aggregates_require_alignment() {
        let (keys, dir) = directory(40, 8);
        assert!(dir.range_aggregate(0..8).is_some());
        assert!(dir.range_aggregate(32..40).is_some());
        assert!(dir.range_aggregate(3..8).is_none());
        let full = ParticipationBitmap::full(0, 40);
        assert!(dir.full_aggregate().same_point(&oracle(&keys, 40, &full)));
    }

    #[test]
    fn plan_prefers_subtraction_when_mostly_present() {
        let mut bm = ParticipationBitmap::full(8, 8);
        bm.clear(9).unwrap();
        assert_eq!(plan_reconstruction(&bm, 8, 64), Reconstruction::Subtract { missing: 1 });
        let sparse = ParticipationBitmap::from_indices(8, 8, [9]).unwrap();
        assert_eq!(plan_reconstruction(&sparse, 8, 64), Reconstruction::Direct { adds: 1 });
        let unaligned = ParticipationBitmap::full(4, 8);
        assert_eq!(plan_reconstruction(&unaligned, 8, 64), Reconstruction::Direct { adds: 8 });
    }

    #[test]
    fn chunks_partition_and_sum_to_full() {
        let (_, dir) = directory(70, 16);
        for c in [1, 2, 3, 4, 8] {
            let ch = dir.chunks(c);
            assert_eq!(ch[0].bitmap().offset(), 0);
            assert_eq!(ch.last().unwrap().bitmap().end(), 70);
            let sum = AggregatePublicKey::from_parts(
                KeyDirectory::sum_points(&ch),
                ParticipationBitmap::full(0, 70),
            );
            assert!(sum.same_point(&dir.full_aggregate()));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn reconstruction_matches_direct_sum(
            block_pow in 2u32..5,
            g0 in 0usize..4,
            groups in 1usize..3,
            mask in any::<u64>(),
        ) {
            let block = 1usize << block_pow;
            let n = 4 * block + 3;
            let (keys, dir) = directory(n as u32, block);
            let lo = g0 * block;
            let hi = ((g0 + groups) * block).min(n);
            let bm = ParticipationBitmap::from_indices(
                lo, hi - lo, (lo..hi).filter(|p| (mask >> (p % 64)) & 1 == 1),
            ).unwrap();
            prop_assume!(bm.popcount() > 0);
            let (got, cost) = dir.reconstruct(&bm);
            prop_assert!(got.same_point(&oracle(&keys, n, &bm)));
            prop_assert_eq!(cost, plan_reconstruction(&bm, block, n).cost());
            prop_assert!(cost <= bm.popcount());
        }
    }
}

use std::fmt;
use std::ops::Range;

use bitvec::prelude::*;

use crate::error::{Error, Result};

/// A window of participation bits over the global index space.
///
/// Bit `j` stands for global index `offset + j`. Leaf aggregators produce a
/// window over their own group; internal nodes widen it as they merge child
/// windows, and the proposer's window covers `[0, N)`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct ParticipationBitmap {
    offset: usize,
    bits: BitVec<u64, Lsb0>,
}

impl ParticipationBitmap {
    pub fn new(offset: usize, len: usize) -> Self {
        Self {
            offset,
            bits: bitvec![u64, Lsb0; 0; len],
        }
    }

    pub fn full(offset: usize, len: usize) -> Self {
        Self {
            offset,
            bits: bitvec![u64, Lsb0; 1; len],
        }
    }

    pub fn from_range(range: Range<usize>) -> Self {
        Self::new(range.start, range.len())
    }

    pub fn from_indices(
        offset: usize,
        len: usize,
        indices: impl IntoIterator<Item = usize>,
    ) -> Result<Self> {
        let mut b = Self::new(offset, len);
        for i in indices {
            b.set(i)?;
        }
        Ok(b)
    }

    pub fn offset(&self) -> usize {
        self.offset
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn end(&self) -> usize {
        self.offset + self.bits.len()
    }

    pub fn range(&self) -> Range<usize> {
        self.offset..self.end()
    }

    pub fn popcount(&self) -> usize {
        self.bits.count_ones()
    }

    pub fn missing(&self) -> usize {
        self.len() - self.popcount()
    }

    pub fn contains(&self, index: usize) -> bool {
        index >= self.offset && index < self.end() && self.bits[index - self.offset]
    }

    fn local(&self, index: usize) -> Result<usize> {
        if index < self.offset || index >= self.end() {
            return Err(Error::OutOfRange {
                index,
                lo: self.offset,
                hi: self.end(),
            });
        }
        Ok(index - self.offset)
    }

    /// Sets a global index; returns whether the bit was newly set.
    pub fn set(&mut self, index: usize) -> Result<bool> {
        let j = self.local(index)?;
        let was = self.bits.replace(j, true);
        Ok(!was)
    }

    pub fn clear(&mut self, index: usize) -> Result<bool> {
        let j = self.local(index)?;
        Ok(self.bits.replace(j, false))
    }

    pub fn iter_ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.iter_ones().map(move |j| j + self.offset)
    }

    pub fn iter_zeros(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.iter_zeros().map(move |j| j + self.offset)
    }

    /// Set bits restricted to `range` (clamped to this window).
    pub fn ones_in(&self, range: Range<usize>) -> impl Iterator<Item = usize> + '_ {
        let lo = range.start.clamp(self.offset, self.end()) - self.offset;
        let hi = range.end.clamp(self.offset, self.end()) - self.offset;
        self.bits[lo..hi].iter_ones().map(move |j| j + lo + self.offset)
    }

    pub fn count_in(&self, range: Range<usize>) -> usize {
        let lo = range.start.clamp(self.offset, self.end()) - self.offset;
        let hi = range.end.clamp(self.offset, self.end()) - self.offset;
        self.bits[lo..hi].count_ones()
    }

    pub fn is_disjoint(&self, other: &Self) -> bool {
        let lo = self.offset.max(other.offset);
        let hi = self.end().min(other.end());
        if lo >= hi {
            return true;
        }
        let a = &self.bits[lo - self.offset..hi - self.offset];
        let b = &other.bits[lo - other.offset..hi - other.offset];
        a.iter_ones().all(|j| !b[j])
    }

    pub fn is_subset_of(&self, other: &Self) -> bool {
        self.iter_ones().all(|i| other.contains(i))
    }

    /// ORs a disjoint bitmap into this one. `other` must fit inside this
    /// window and share no set index with it.
    pub fn merge_disjoint(&mut self, other: &Self) -> Result<()> {
        if other.popcount() == 0 {
            return Ok(());
        }
        if other.offset < self.offset || other.end() > self.end() {
            return Err(Error::OutOfRange {
                index: if other.offset < self.offset {
                    other.offset
                } else {
                    other.end() - 1
                },
                lo: self.offset,
                hi: self.end(),
            });
        }
        let base = other.offset - self.offset;
        let dst = &mut self.bits[base..base + other.len()];
        if let Some(j) = other.bits.iter_ones().find(|&j| dst[j]) {
            return Err(Error::Overlap(j + other.offset));
        }
        *dst |= other.bits.as_bitslice();
        Ok(())
    }

    /// Bits of `self` not set in `other`, over this window.
    pub fn difference(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for i in other.ones_in(self.range()) {
            out.bits.set(i - self.offset, false);
        }
        out
    }

    /// Re-windows to `range` (which must contain every set bit).
    pub fn rewindow(&self, range: Range<usize>) -> Result<Self> {
        let mut out = Self::from_range(range);
        for i in self.iter_ones() {
            out.set(i)?;
        }
        Ok(out)
    }

    pub fn as_bitslice(&self) -> &BitSlice<u64, Lsb0> {
        &self.bits
    }

    /// Compact form: offset and length as little-endian u64 followed by
    /// `ceil(len/8)` bytes of LSB-first packed bits.
    pub fn to_bytes(&self) -> Vec<u8> {
        let nbytes = self.len().div_ceil(8);
        let mut out = Vec::with_capacity(16 + nbytes);
        out.extend_from_slice(&(self.offset as u64).to_le_bytes());
        out.extend_from_slice(&(self.len() as u64).to_le_bytes());
        let mut packed = Vec::with_capacity(nbytes + 8);
        for w in self.bits.as_raw_slice() {
            packed.extend_from_slice(&w.to_le_bytes());
        }
        packed.truncate(nbytes);
        out.extend_from_slice(&packed);
        out
    }

    /// Inverse of [`to_bytes`](Self::to_bytes); returns the bitmap and the
    /// number of bytes consumed.
    pub fn from_bytes(buf: &[u8]) -> Result<(Self, usize)> {
        if buf.len() < 16 {
            return Err(Error::Decode("bitmap header truncated".into()));
        }
        let offset = u64::from_le_bytes(buf[..8].try_into().unwrap()) as usize;
        let len = u64::from_le_bytes(buf[8..16].try_into().unwrap()) as usize;
        let nbytes = len.div_ceil(8);
        let body = buf
            .get(16..16 + nbytes)
            .ok_or_else(|| Error::Decode("bitmap body truncated".into()))?;
        if len % 8 != 0 && nbytes > 0 && body[nbytes - 1] >> (len % 8) != 0 {
            return Err(Error::Decode("bits set past bitmap length".into()));
        }
        let mut bits: BitVec<u64, Lsb0> = BitVec::from_slice(
            &body
                .chunks(8)
                .map(|c| {
                    let mut w = [0u8; 8];
                    w[..c.len()].copy_from_slice(c);
                    u64::from_le_bytes(w)
                })
                .collect::<Vec<_>>(),
        );
        bits.truncate(len);
        Ok((Self { offset, bits }, 16 + nbytes))
    }
}

impl fmt::Debug for ParticipationBitmap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "Bitmap[{}..{}; {} set]",
            self.offset,
            self.end(),
            self.popcount()
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn global_indexing() {
        let mut b = ParticipationBitmap::new(100, 10);
        assert!(b.set(103).unwrap());
        assert!(!b.set(103).unwrap());
        assert!(b.contains(103));
        assert!(!b.contains(3));
        assert!(b.set(110).is_err());
        assert!(b.set(99).is_err());
        assert_eq!(b.iter_ones().collect::<Vec<_>>(), vec![103]);
        assert_eq!(b.missing(), 9);
    }

    #[test]
    fn merge_rejects_overlap_and_escape() {
        let mut parent = ParticipationBitmap::new(0, 16);
        let a = ParticipationBitmap::from_indices(0, 8, [1, 2]).unwrap();
        let b = ParticipationBitmap::from_indices(8, 8, [9]).unwrap();
        parent.merge_disjoint(&a).unwrap();
        parent.merge_disjoint(&b).unwrap();
        assert_eq!(parent.popcount(), 3);
        assert_eq!(parent.merge_disjoint(&a), Err(Error::Overlap(1)));
        let outside = ParticipationBitmap::from_indices(16, 4, [17]).unwrap();
        assert!(parent.merge_disjoint(&outside).is_err());
    }

    #[test]
    fn disjointness_across_windows() {
        let a = ParticipationBitmap::from_indices(0, 10, [3, 9]).unwrap();
        let b = ParticipationBitmap::from_indices(5, 10, [10, 14]).unwrap();
        let c = ParticipationBitmap::from_indices(5, 10, [9]).unwrap();
        assert!(a.is_disjoint(&b));
        assert!(!a.is_disjoint(&c));
        assert!(c.is_subset_of(&a));
        assert!(!b.is_subset_of(&a));
    }

    #[test]
    fn truncated_encoding_is_rejected() {
        let b = ParticipationBitmap::full(0, 20);
        let bytes = b.to_bytes();
        assert!(ParticipationBitmap::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut dirty = bytes.clone();
        *dirty.last_mut().unwrap() |= 0x80;
        assert!(ParticipationBitmap::from_bytes(&dirty).is_err());
    }

    proptest! {
        #[test]
        fn bytes_round_trip(offset in 0usize..1000, bits in prop::collection::vec(any::<bool>(), 0..300)) {
            let b = ParticipationBitmap::from_indices(
                offset,
                bits.len(),
                bits.iter().enumerate().filter(|(_, s)| **s).map(|(j, _)| j + offset),
            ).unwrap();
            let enc = b.to_bytes();
            let (dec, used) = ParticipationBitmap::from_bytes(&enc).unwrap();
            prop_assert_eq!(used, enc.len());
            prop_assert_eq!(&dec, &b);
            prop_assert_eq!(dec.popcount(), bits.iter().filter(|s| **s).count());
        }

        #[test]
        fn difference_and_ones_in(bits in prop::collection::vec(any::<bool>(), 1..200), lo in 0usize..200, span in 0usize..200) {
            let n = bits.len();
            let a = ParticipationBitmap::from_indices(0, n, (0..n).filter(|j| bits[*j])).unwrap();
            let hi = (lo + span).min(n);
            let lo = lo.min(hi);
            let sub = ParticipationBitmap::from_indices(0, n, a.ones_in(lo..hi)).unwrap();
            prop_assert_eq!(sub.popcount(), a.count_in(lo..hi));
            let rest = a.difference(&sub);
            prop_assert!(rest.is_disjoint(&sub));
            prop_assert_eq!(rest.popcount() + sub.popcount(), a.popcount());
        }
    }
}

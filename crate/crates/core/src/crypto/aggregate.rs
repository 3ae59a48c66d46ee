use blst::*;
use rayon::prelude::*;

use super::bitmap::ParticipationBitmap;
use super::keys::{verify_hashed, HashedMessage, PublicKey, Signature};
use crate::error::{Error, Result};

/// Group sum of the public keys whose bits are set in `bitmap`.
#[derive(Clone)]
pub struct AggregatePublicKey {
    point: blst_p1,
    bitmap: ParticipationBitmap,
}

impl AggregatePublicKey {
    /// Trusted constructor for callers that maintain the sum themselves.
    pub(crate) fn from_parts(point: blst_p1, bitmap: ParticipationBitmap) -> Self {
        Self { point, bitmap }
    }

    pub fn bitmap(&self) -> &ParticipationBitmap {
        &self.bitmap
    }

    pub fn is_identity(&self) -> bool {
        unsafe { blst_p1_is_inf(&self.point) }
    }

    /// Group-element equality, ignoring bitmaps.
    pub fn same_point(&self, other: &Self) -> bool {
        unsafe { blst_p1_is_equal(&self.point, &other.point) }
    }

    pub fn to_public_key(&self) -> PublicKey {
        let mut a = blst_p1_affine::default();
        unsafe { blst_p1_to_affine(&mut a, &self.point) };
        PublicKey(a)
    }

    pub(crate) fn point(&self) -> &blst_p1 {
        &self.point
    }
}

impl PartialEq for AggregatePublicKey {
    fn eq(&self, other: &Self) -> bool {
        self.same_point(other) && self.bitmap == other.bitmap
    }
}

impl std::fmt::Debug for AggregatePublicKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AggregatePublicKey")
            .field("key", &self.to_public_key())
            .field("bitmap", &self.bitmap)
            .finish()
    }
}

pub(crate) fn add_affine(acc: &mut blst_p1, pk: &PublicKey) {
    unsafe { blst_p1_add_or_double_affine(acc, acc, &pk.0) };
}

pub(crate) fn sub_affine(acc: &mut blst_p1, pk: &PublicKey) {
    let mut neg = pk.projective();
    unsafe {
        blst_p1_cneg(&mut neg, true);
        blst_p1_add_or_double(acc, acc, &neg);
    }
}

pub(crate) fn add_point(acc: &mut blst_p1, p: &blst_p1) {
    unsafe { blst_p1_add_or_double(acc, acc, p) };
}

pub(crate) fn sub_point(acc: &mut blst_p1, p: &blst_p1) {
    let mut neg = *p;
    unsafe {
        blst_p1_cneg(&mut neg, true);
        blst_p1_add_or_double(acc, acc, &neg);
    }
}

pub fn aggregate_signatures(sigs: &[Signature]) -> Result<Signature> {
    let (first, rest) = sigs.split_first().ok_or(Error::EmptyAggregation)?;
    let mut acc = *first;
    for s in rest {
        acc.add_assign(s);
    }
    Ok(acc)
}

/// `pks[i]` belongs to the i-th set bit of `bitmap`.
pub fn aggregate_public_keys(
    pks: &[PublicKey],
    bitmap: ParticipationBitmap,
) -> Result<AggregatePublicKey> {
    if pks.is_empty() {
        return Err(Error::EmptyAggregation);
    }
    if pks.len() != bitmap.popcount() {
        return Err(Error::KeyCountMismatch {
            keys: pks.len(),
            popcount: bitmap.popcount(),
        });
    }
    let mut acc = blst_p1::default();
    for pk in pks {
        add_affine(&mut acc, pk);
    }
    Ok(AggregatePublicKey { point: acc, bitmap })
}

/// Removes `missing` (keys in set-bit order of `missing_bitmap`) from `full`.
/// Costs one group addition per missing key.
pub fn subtract_public_keys(
    full: &AggregatePublicKey,
    missing: &[PublicKey],
    missing_bitmap: &ParticipationBitmap,
) -> Result<AggregatePublicKey> {
    if missing.len() != missing_bitmap.popcount() {
        return Err(Error::KeyCountMismatch {
            keys: missing.len(),
            popcount: missing_bitmap.popcount(),
        });
    }
    if let Some(i) = missing_bitmap.iter_ones().find(|i| !full.bitmap.contains(*i)) {
        return Err(Error::NotSubset(i));
    }
    let mut point = full.point;
    for pk in missing {
        sub_affine(&mut point, pk);
    }
    Ok(AggregatePublicKey {
        point,
        bitmap: full.bitmap.difference(missing_bitmap),
    })
}

fn check_partition(chunks: &[AggregatePublicKey]) -> Result<()> {
    let first = chunks
        .first()
        .ok_or_else(|| Error::BadPartition("no chunks".into()))?;
    if first.bitmap.offset() != 0 {
        return Err(Error::BadPartition(format!(
            "first chunk starts at {}",
            first.bitmap.offset()
        )));
    }
    for w in chunks.windows(2) {
        if w[0].bitmap.end() != w[1].bitmap.offset() {
            return Err(Error::BadPartition(format!(
                "gap or overlap between {} and {}",
                w[0].bitmap.end(),
                w[1].bitmap.offset()
            )));
        }
    }
    Ok(())
}

/// Subtraction split over `chunks` (contiguous, in order, covering `[0, N)`).
/// Each chunk removes its own missing keys independently, on the current
/// rayon pool; the partial sums are then combined with `C - 1` additions.
/// `missing` pairs a global index with its key.
pub fn chunked_subtract(
    chunks: &[AggregatePublicKey],
    missing: &[(usize, PublicKey)],
) -> Result<AggregatePublicKey> {
    check_partition(chunks)?;
    let n = chunks.last().unwrap().bitmap.end();
    let mut per_chunk: Vec<Vec<&(usize, PublicKey)>> = vec![Vec::new(); chunks.len()];
    for m in missing {
        let c = chunks.partition_point(|ch| ch.bitmap.end() <= m.0);
        if c == chunks.len() || !chunks[c].bitmap.contains(m.0) {
            return Err(Error::NotSubset(m.0));
        }
        per_chunk[c].push(m);
    }
    let partial: Vec<Result<AggregatePublicKey>> = chunks
        .par_iter()
        .zip(per_chunk.par_iter())
        .map(|(chunk, miss)| {
            let mut point = chunk.point;
            let mut bitmap = chunk.bitmap.clone();
            for (i, pk) in miss {
                if !bitmap.clear(*i)? {
                    return Err(Error::NotSubset(*i));
                }
                sub_affine(&mut point, pk);
            }
            Ok(AggregatePublicKey { point, bitmap })
        })
        .collect();
    let mut point = blst_p1::default();
    let mut bitmap = ParticipationBitmap::new(0, n);
    for p in partial {
        let p = p?;
        add_point(&mut point, &p.point);
        bitmap.merge_disjoint(&p.bitmap)?;
    }
    Ok(AggregatePublicKey { point, bitmap })
}

pub fn verify_aggregate(sig: &Signature, agg_pub: &AggregatePublicKey, msg: &[u8]) -> bool {
    verify_aggregate_hashed(sig, agg_pub, &HashedMessage::new(msg))
}

pub fn verify_aggregate_hashed(
    sig: &Signature,
    agg_pub: &AggregatePublicKey,
    msg: &HashedMessage,
) -> bool {
    agg_pub.bitmap.popcount() > 0 && verify_hashed(&agg_pub.to_public_key(), msg, sig)
}

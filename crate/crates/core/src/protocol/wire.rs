//! Length-prefixed binary framing for votes and aggregates.
//!
//! Frame: `u32 LE body length`, then a tag byte and the fields. Group
//! elements are compressed; bitmaps use their packed encoding.

use super::messages::{AggregateMessage, Lane, VoteMessage};
use crate::crypto::{ParticipationBitmap, Signature, SIGNATURE_BYTES};
use crate::error::{Error, Result};
use crate::topology::CommitteeRef;

const TAG_VOTE: u8 = 1;
const TAG_AGGREGATE: u8 = 2;

#[derive(Debug, Clone, PartialEq)]
pub enum WireMessage {
    Vote(VoteMessage<Signature>),
    Aggregate(AggregateMessage<Signature>),
}

fn frame(body: Vec<u8>) -> Vec<u8> {
    let mut out = Vec::with_capacity(4 + body.len());
    out.extend_from_slice(&(body.len() as u32).to_le_bytes());
    out.extend(body);
    out
}

pub fn encode_vote(v: &VoteMessage<Signature>) -> Vec<u8> {
    let mut b = Vec::with_capacity(1 + 4 + 32 + 4 + SIGNATURE_BYTES);
    b.push(TAG_VOTE);
    b.extend_from_slice(&v.slot.to_le_bytes());
    b.extend_from_slice(&v.block_hash);
    b.extend_from_slice(&v.validator_id.to_le_bytes());
    b.extend_from_slice(&v.signature.to_bytes());
    frame(b)
}

pub fn encode_aggregate(a: &AggregateMessage<Signature>) -> Vec<u8> {
    let mut b = Vec::new();
    b.push(TAG_AGGREGATE);
    b.extend_from_slice(&a.slot.to_le_bytes());
    b.extend_from_slice(&(a.from.layer as u32).to_le_bytes());
    b.extend_from_slice(&(a.from.index as u32).to_le_bytes());
    b.extend_from_slice(&a.representative.to_le_bytes());
    b.push(match a.lane {
        Lane::Largest => 0,
        Lane::Random => 1,
        Lane::Both => 2,
    });
    b.extend_from_slice(&a.signature.to_bytes());
    b.extend(a.bitmap.to_bytes());
    frame(b)
}

pub fn encode(m: &WireMessage) -> Vec<u8> {
    match m {
        WireMessage::Vote(v) => encode_vote(v),
        WireMessage::Aggregate(a) => encode_aggregate(a),
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .at
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Decode("truncated message".into()))?;
        let s = &self.buf[self.at..end];
        self.at = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
}

/// Decodes one frame from the front of `buf`, returning the message and the
/// number of bytes consumed.
pub fn decode(buf: &[u8]) -> Result<(WireMessage, usize)> {
    let mut outer = Reader { buf, at: 0 };
    let len = outer.u32()? as usize;
    let body = outer.take(len)?;
    let mut r = Reader { buf: body, at: 0 };
    let msg = match r.u8()? {
        TAG_VOTE => {
            let slot = r.u32()?;
            let block_hash: [u8; 32] = r.take(32)?.try_into().unwrap();
            let validator_id = r.u32()?;
            let signature = Signature::from_bytes(r.take(SIGNATURE_BYTES)?)?;
            WireMessage::Vote(VoteMessage {
                slot,
                block_hash,
                validator_id,
                signature,
            })
        }
        TAG_AGGREGATE => {
            let slot = r.u32()?;
            let layer = r.u32()? as usize;
            let index = r.u32()? as usize;
            let representative = r.u32()?;
            let lane = match r.u8()? {
                0 => Lane::Largest,
                1 => Lane::Random,
                2 => Lane::Both,
                t => return Err(Error::Decode(format!("unknown lane {t}"))),
            };
            let signature = Signature::from_bytes(r.take(SIGNATURE_BYTES)?)?;
            let (bitmap, used) = ParticipationBitmap::from_bytes(&body[r.at..])?;
            r.at += used;
            WireMessage::Aggregate(AggregateMessage {
                slot,
                from: CommitteeRef { layer, index },
                representative,
                signature,
                bitmap,
                lane,
            })
        }
        t => return Err(Error::Decode(format!("unknown message tag {t}"))),
    };
    if r.at != body.len() {
        return Err(Error::Decode("trailing bytes in frame".into()));
    }
    Ok((msg, outer.at))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::keygen;

    fn agg() -> AggregateMessage<Signature> {
        let kp = keygen(1, 2);
        AggregateMessage {
            slot: 9,
            from: CommitteeRef { layer: 2, index: 77 },
            representative: 1234,
            signature: crate::crypto::sign(&kp, b"x"),
            bitmap: ParticipationBitmap::from_indices(512, 256, [512, 600, 767]).unwrap(),
            lane: Lane::Random,
        }
    }

    #[test]
    fn round_trips_back_to_back_frames() {
        let kp = keygen(1, 3);
        let vote = VoteMessage {
            slot: 4,
            block_hash: [3u8; 32],
            validator_id: 3,
            signature: crate::crypto::sign(&kp, &[3u8; 32]),
        };
        let mut buf = encode_vote(&vote);
        buf.extend(encode_aggregate(&agg()));
        let (a, used) = decode(&buf).unwrap();
        assert_eq!(a, WireMessage::Vote(vote));
        let (b, used2) = decode(&buf[used..]).unwrap();
        assert_eq!(b, WireMessage::Aggregate(agg()));
        assert_eq!(used + used2, buf.len());
    }

    #[test]
    fn rejects_malformed_frames() {
        let good = encode_aggregate(&agg());
        for cut in [0, 3, 10, good.len() - 1] {
            assert!(decode(&good[..cut]).is_err(), "cut {cut}");
        }
        let mut bad_tag = good.clone();
        bad_tag[4] = 9;
        assert!(decode(&bad_tag).is_err());
        let mut bad_lane = good.clone();
        bad_lane[4 + 1 + 16] = 7;
        assert!(decode(&bad_lane).is_err());
        let mut bad_sig = good;
        bad_sig[4 + 1 + 17] ^= 0x40;
        assert!(decode(&bad_sig).is_err());
    }
}

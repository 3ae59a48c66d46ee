//! Aggregatable signatures over BLS12-381 with participation bitmaps.

mod aggregate;
mod bitmap;
mod directory;
mod keys;
mod meter;

pub use aggregate::{
    aggregate_public_keys, aggregate_signatures, chunked_subtract, subtract_public_keys,
    verify_aggregate, verify_aggregate_hashed, AggregatePublicKey,
};
pub use bitmap::ParticipationBitmap;
pub use directory::{plan_reconstruction, KeyDirectory, Reconstruction};
pub use keys::{
    keygen, public_keys_bulk, sign, verify, verify_hashed, HashedMessage, KeyPair, PublicKey,
    SecretKey, Signature, ValidatorId, PUBLIC_KEY_BYTES, SIGNATURE_BYTES, SIG_DST,
};
pub use meter::{OpCounts, OpMeter};

pub(crate) use aggregate::add_affine;

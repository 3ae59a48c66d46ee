//! Fixtures shared by the benchmarks.

use wonderboom_core::crypto::{keygen, HashedMessage, KeyPair, PublicKey, Signature};

pub const MESSAGE: &[u8] = b"benchmark block";

/// `n` deterministic key pairs with their signatures over [`MESSAGE`].
pub struct Signed {
    pub keys: Vec<KeyPair>,
    pub public: Vec<PublicKey>,
    pub sigs: Vec<Signature>,
    pub message: HashedMessage,
}

pub fn signed(n: usize) -> Signed {
    let keys: Vec<KeyPair> = (0..n as u32).map(|i| keygen(0xB3, i)).collect();
    let message = HashedMessage::new(MESSAGE);
    let sigs = keys.iter().map(|k| k.secret_key.sign_hashed(&message)).collect();
    Signed {
        public: keys.iter().map(|k| k.public_key).collect(),
        keys,
        sigs,
        message,
    }
}

/// Every third index, the pattern a two-thirds participation run leaves.
pub fn missing_third(n: usize) -> Vec<usize> {
    (0..n).step_by(3).collect()
}

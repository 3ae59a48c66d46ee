//! BLS12-381 keys and signatures (public keys in G1, signatures in G2).
//!
//! Thin wrappers over the blst FFI. The safe blst API verifies with a fresh
//! hash-to-curve on every call; the protocol verifies thousands of aggregates
//! over one block hash, so the message is hashed once into a
//! [`HashedMessage`] and verification runs two Miller loops against it.

use std::fmt;
use std::sync::OnceLock;

use blst::*;
use rand::RngCore;
use sha2::{Digest, Sha512};

use crate::error::{Error, Result};

/// Ciphersuite tag for vote signatures.
pub const SIG_DST: &[u8] = b"BLS_SIG_BLS12381G2_XMD:SHA-256_SSWU_RO_NUL_";
const FORGERY_DST: &[u8] = b"WONDERBOOM_FORGED_SIGNATURE_G2_";

pub const PUBLIC_KEY_BYTES: usize = 48;
pub const SIGNATURE_BYTES: usize = 96;

pub type ValidatorId = u32;

#[derive(Clone, Copy, Default)]
pub struct SecretKey(pub(crate) [u8; 32]);

impl SecretKey {
    /// Deterministic key material for simulation: 512 hashed bits reduced
    /// modulo the group order, so the bias is negligible.
    pub fn derive(seed: u64, id: ValidatorId) -> Self {
        let mut counter = 0u32;
        loop {
            let mut h = Sha512::new();
            h.update(b"wonderboom/keygen/v1");
            h.update(seed.to_le_bytes());
            h.update(id.to_le_bytes());
            h.update(counter.to_le_bytes());
            let wide = h.finalize();
            let mut s = blst_scalar::default();
            unsafe { blst_scalar_from_le_bytes(&mut s, wide.as_ptr(), wide.len()) };
            if unsafe { blst_sk_check(&s) } {
                return Self(s.b);
            }
            counter += 1;
        }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    fn scalar(&self) -> blst_scalar {
        blst_scalar { b: self.0 }
    }

    /// Scalar sum modulo the group order.
    pub fn add(&self, other: &Self) -> Self {
        let mut out = blst_scalar::default();
        // the check result only reports a zero sum, which is still a valid scalar here
        unsafe { blst_sk_add_n_check(&mut out, &self.scalar(), &other.scalar()) };
        Self(out.b)
    }

    pub fn to_bytes(&self) -> [u8; 32] {
        self.0
    }

    pub fn public_key(&self) -> PublicKey {
        let mut p = blst_p1::default();
        let mut a = blst_p1_affine::default();
        unsafe {
            blst_sk_to_pk_in_g1(&mut p, &self.scalar());
            blst_p1_to_affine(&mut a, &p);
        }
        PublicKey(a)
    }

    /// `sk * H(m)`. Also used to synthesize an aggregate from a scalar sum.
    pub fn sign_hashed(&self, msg: &HashedMessage) -> Signature {
        let mut h = blst_p2::default();
        let mut out = blst_p2::default();
        unsafe {
            blst_p2_from_affine(&mut h, &msg.0);
            blst_sign_pk_in_g1(&mut out, &h, &self.scalar());
        }
        Signature(out)
    }
}

impl fmt::Debug for SecretKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SecretKey(..)")
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Default)]
pub struct PublicKey(pub(crate) blst_p1_affine);

impl PublicKey {
    pub fn to_bytes(&self) -> [u8; PUBLIC_KEY_BYTES] {
        let mut out = [0u8; PUBLIC_KEY_BYTES];
        unsafe { blst_p1_affine_compress(out.as_mut_ptr(), &self.0) };
        out
    }

    /// Decodes and checks subgroup membership. The identity is rejected.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() != PUBLIC_KEY_BYTES {
            return Err(Error::Decode(format!("public key length {}", bytes.len())));
        }
        let mut a = blst_p1_affine::default();
        let rc = unsafe { blst_p1_uncompress(&mut a, bytes.as_ptr()) };
        if rc != BLST_ERROR::BLST_SUCCESS {
            return Err(Error::Decode(format!("public key: {rc:?}")));
        }
        if unsafe { blst_p1_affine_is_inf(&a) || !blst_p1_affine_in_g1(&a) } {
            return Err(Error::Decode("public key not in G1 or identity".into()));
        }
        Ok(Self(a))
    }

    pub fn is_identity(&self) -> bool {
        unsafe { blst_p1_affine_is_inf(&self.0) }
    }

    pub(crate) fn projective(&self) -> blst_p1 {
        let mut p = blst_p1::default();
        unsafe { blst_p1_from_affine(&mut p, &self.0) };
        p
    }
}

impl fmt::Debug for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let b = self.to_bytes();
        write!(f, "PublicKey({:02x}{:02x}{:02x}{:02x}..)", b[0], b[1], b[2], b[3])
    }
}

#[derive(Clone, Copy, Default)]
pub struct Signature(pub(crate) blst_p2);

impl Signature {
    pub fn identity() -> Self {
        Self::default()
    }

    pub fn is_identity(&self) -> bool {
        unsafe { blst_p2_is_inf(&self.0) }
    }

    /// A uniformly random group element: signs nothing, verifies against
    /// nothing. Stands in for a forged or garbage vote.
    pub fn forgery<R: RngCore + ?Sized>(rng: &mut R) -> Self {
        let mut seed = [0u8; 32];
        rng.fill_bytes(&mut seed);
        let mut out = blst_p2::default();
        unsafe {
            blst_hash_to_g2(
                &mut out,
                seed.as_ptr(),
                seed.len(),
                FORGERY_DST.as_ptr(),
                FORGERY_DST.len(),
                std::ptr::null(),
                0,
            )
        };
        Self(out)
    }

    pub fn add_assign(&mut self, other: &Self) {
        unsafe { blst_p2_add_or_double(&mut self.0, &self.0, &other.0) };
    }

    pub(crate) fn affine(&self) -> blst_p2_affine {
        let mut a = blst_p2_affine::default();
        unsafe { blst_p2_to_affine(&mut a, &self.0) };
        a
    }

    pub fn to_bytes(&self) -> [u8; SIGNATURE_BYTES] {
        let mut out = [0u8; SIGNATURE_BYTES];
        unsafe { blst_p2_affine_compress(out.as_mut_ptr(), &self.affine()) };
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() != SIGNATURE_BYTES {
            return Err(Error::Decode(format!("signature length {}", bytes.len())));
        }
        let mut a = blst_p2_affine::default();
        let rc = unsafe { blst_p2_uncompress(&mut a, bytes.as_ptr()) };
        if rc != BLST_ERROR::BLST_SUCCESS {
            return Err(Error::Decode(format!("signature: {rc:?}")));
        }
        if !unsafe { blst_p2_affine_in_g2(&a) } {
            return Err(Error::Decode("signature not in G2".into()));
        }
        let mut p = blst_p2::default();
        unsafe { blst_p2_from_affine(&mut p, &a) };
        Ok(Self(p))
    }
}

impl PartialEq for Signature {
    fn eq(&self, other: &Self) -> bool {
        unsafe { blst_p2_is_equal(&self.0, &other.0) }
    }
}

impl Eq for Signature {}

impl fmt::Debug for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_identity() {
            return f.write_str("Signature(identity)");
        }
        let b = self.to_bytes();
        write!(f, "Signature({:02x}{:02x}{:02x}{:02x}..)", b[0], b[1], b[2], b[3])
    }
}

/// A message already mapped to G2.
#[derive(Clone, Copy)]
pub struct HashedMessage(pub(crate) blst_p2_affine);

impl HashedMessage {
    pub fn new(msg: &[u8]) -> Self {
        let mut p = blst_p2::default();
        let mut a = blst_p2_affine::default();
        unsafe {
            blst_hash_to_g2(
                &mut p,
                msg.as_ptr(),
                msg.len(),
                SIG_DST.as_ptr(),
                SIG_DST.len(),
                std::ptr::null(),
                0,
            );
            blst_p2_to_affine(&mut a, &p);
        }
        Self(a)
    }
}

impl fmt::Debug for HashedMessage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("HashedMessage(..)")
    }
}

#[derive(Clone, Copy, Debug)]
pub struct KeyPair {
    pub secret_key: SecretKey,
    pub public_key: PublicKey,
    pub validator_id: ValidatorId,
}

pub fn keygen(seed: u64, id: ValidatorId) -> KeyPair {
    let secret_key = SecretKey::derive(seed, id);
    KeyPair {
        secret_key,
        public_key: secret_key.public_key(),
        validator_id: id,
    }
}

pub fn sign(kp: &KeyPair, msg: &[u8]) -> Signature {
    kp.secret_key.sign_hashed(&HashedMessage::new(msg))
}

pub fn verify(pk: &PublicKey, msg: &[u8], sig: &Signature) -> bool {
    verify_hashed(pk, &HashedMessage::new(msg), sig)
}

/// `e(sig, g1) == e(H(m), pk)`. An identity public key never verifies: it
/// would accept the identity signature on any message.
pub fn verify_hashed(pk: &PublicKey, msg: &HashedMessage, sig: &Signature) -> bool {
    if pk.is_identity() {
        return false;
    }
    let sig_aff = sig.affine();
    let mut lhs = blst_fp12::default();
    let mut rhs = blst_fp12::default();
    unsafe {
        blst_miller_loop(&mut lhs, &sig_aff, blst_p1_affine_generator());
        blst_miller_loop(&mut rhs, &msg.0, &pk.0);
        blst_fp12_finalverify(&lhs, &rhs)
    }
}

/// Precomputed multiples `b * 256^w * G1` for every byte value `b` and
/// window `w`: a public key costs 32 affine additions instead of a scalar
/// multiplication. Only matters when deriving 10^5..10^6 keys.
struct FixedBaseG1 {
    table: Vec<blst_p1_affine>,
}

const WINDOWS: usize = 32;

impl FixedBaseG1 {
    fn build() -> Self {
        let mut proj = Vec::with_capacity(WINDOWS * 256);
        let mut base = unsafe { *blst_p1_generator() };
        for _ in 0..WINDOWS {
            let mut acc = blst_p1::default();
            for _ in 0..256 {
                proj.push(acc);
                unsafe { blst_p1_add_or_double(&mut acc, &acc, &base) };
            }
            // acc = 256 * base
            base = acc;
        }
        let ptrs: Vec<*const blst_p1> = proj.iter().map(|p| p as *const _).collect();
        let mut table = vec![blst_p1_affine::default(); proj.len()];
        unsafe { blst_p1s_to_affine(table.as_mut_ptr(), ptrs.as_ptr(), ptrs.len()) };
        Self { table }
    }

    fn get() -> &'static Self {
        static TABLE: OnceLock<FixedBaseG1> = OnceLock::new();
        TABLE.get_or_init(Self::build)
    }

    fn mul(&self, sk: &SecretKey) -> blst_p1 {
        let ptrs: Vec<*const blst_p1_affine> = sk
            .0
            .iter()
            .enumerate()
            .filter(|(_, b)| **b != 0)
            .map(|(w, b)| &self.table[w * 256 + *b as usize] as *const _)
            .collect();
        let mut out = blst_p1::default();
        if !ptrs.is_empty() {
            unsafe { blst_p1s_add(&mut out, ptrs.as_ptr(), ptrs.len()) };
        }
        out
    }
}

/// Public keys for many secrets at once; same result as calling
/// [`SecretKey::public_key`] on each.
pub fn public_keys_bulk(secrets: &[SecretKey]) -> Vec<PublicKey> {
    use rayon::prelude::*;
    let table = FixedBaseG1::get();
    secrets
        .par_chunks(4096)
        .flat_map_iter(|chunk| {
            let proj: Vec<blst_p1> = chunk.iter().map(|sk| table.mul(sk)).collect();
            let ptrs: Vec<*const blst_p1> = proj.iter().map(|p| p as *const _).collect();
            let mut aff = vec![blst_p1_affine::default(); proj.len()];
            unsafe { blst_p1s_to_affine(aff.as_mut_ptr(), ptrs.as_ptr(), ptrs.len()) };
            aff.into_iter().map(PublicKey)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn keygen_is_deterministic_and_unique() {
        assert_eq!(keygen(0, 0).public_key, keygen(0, 0).public_key);
        assert_ne!(keygen(0, 0).public_key, keygen(0, 1).public_key);
        assert_ne!(keygen(0, 0).public_key, keygen(1, 0).public_key);
    }

    #[test]
    fn sign_verify_roundtrip() {
        let kp = keygen(0, 7);
        let sig = sign(&kp, b"abc");
        assert!(verify(&kp.public_key, b"abc", &sig));
        assert!(!verify(&kp.public_key, b"abd", &sig));
        assert!(!verify(&keygen(0, 8).public_key, b"abc", &sig));
    }

    #[test]
    fn identity_inputs_never_verify() {
        let kp = keygen(3, 3);
        assert!(!verify(&kp.public_key, b"m", &Signature::identity()));
        assert!(!verify(&PublicKey::default(), b"m", &Signature::identity()));
    }

    #[test]
    fn forgeries_fail() {
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(1);
        let kp = keygen(0, 1);
        let forged = Signature::forgery(&mut rng);
        assert!(!verify(&kp.public_key, b"m", &forged));
        assert_ne!(forged, Signature::forgery(&mut rng));
    }

    #[test]
    fn encodings_round_trip() {
        let kp = keygen(5, 5);
        let pk = PublicKey::from_bytes(&kp.public_key.to_bytes()).unwrap();
        assert_eq!(pk, kp.public_key);
        let sig = sign(&kp, b"x");
        assert_eq!(Signature::from_bytes(&sig.to_bytes()).unwrap(), sig);
        assert!(PublicKey::from_bytes(&[0u8; 47]).is_err());
        assert!(Signature::from_bytes(&[0xffu8; 96]).is_err());
    }

    #[test]
    fn bulk_keys_match_scalar_multiplication() {
        let secrets: Vec<SecretKey> = (0..300).map(|i| SecretKey::derive(11, i)).collect();
        let bulk = public_keys_bulk(&secrets);
        for (sk, pk) in secrets.iter().zip(&bulk) {
            assert_eq!(sk.public_key(), *pk);
        }
    }

    #[test]
    fn scalar_sum_signs_like_an_aggregate() {
        let msg = HashedMessage::new(b"block");
        let a = SecretKey::derive(0, 1);
        let b = SecretKey::derive(0, 2);
        let mut agg = a.sign_hashed(&msg);
        agg.add_assign(&b.sign_hashed(&msg));
        assert_eq!(a.add(&b).sign_hashed(&msg), agg);
    }
}

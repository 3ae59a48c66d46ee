use std::fmt::Debug;

use crate::crypto::{
    plan_reconstruction, verify_aggregate_hashed, verify_hashed, HashedMessage, KeyDirectory,
    OpMeter, ParticipationBitmap, Signature,
};

/// The signature operations a role machine needs, bound to one slot's block
/// hash and key layout. Implementations count every primitive on the meter.
pub trait VoteScheme: Sync {
    type Sig: Clone + Debug + PartialEq + Send + Sync;

    fn identity(&self) -> Self::Sig;

    /// Checks a single vote from the validator at leaf `position`.
    fn verify_vote(&self, position: usize, sig: &Self::Sig) -> bool;

    /// Rebuilds the aggregate key for `bitmap` and checks `sig` against it.
    fn verify_aggregate(&self, bitmap: &ParticipationBitmap, sig: &Self::Sig) -> bool;

    fn combine(&self, acc: &mut Self::Sig, sig: &Self::Sig);

    fn meter(&self) -> &OpMeter;
}

/// Real BLS over a position-ordered key directory.
pub struct BlsScheme<'a> {
    pub directory: &'a KeyDirectory,
    pub message: HashedMessage,
    pub meter: &'a OpMeter,
}

impl VoteScheme for BlsScheme<'_> {
    type Sig = Signature;

    fn identity(&self) -> Signature {
        Signature::identity()
    }

    fn verify_vote(&self, position: usize, sig: &Signature) -> bool {
        self.meter.sgv(1);
        verify_hashed(self.directory.key_at(position), &self.message, sig)
    }

    fn verify_aggregate(&self, bitmap: &ParticipationBitmap, sig: &Signature) -> bool {
        if bitmap.popcount() == 0 {
            return false;
        }
        let (apk, cost) = self.directory.reconstruct(bitmap);
        self.meter.pka(cost as u64);
        self.meter.sgv(1);
        verify_aggregate_hashed(sig, &apk, &self.message)
    }

    fn combine(&self, acc: &mut Signature, sig: &Signature) {
        self.meter.sga(1);
        acc.add_assign(sig);
    }

    fn meter(&self) -> &OpMeter {
        self.meter
    }
}

/// Stand-in signature for runs without curve arithmetic: carries only
/// whether it would verify.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ModelSig {
    pub valid: bool,
}

impl ModelSig {
    pub const VALID: ModelSig = ModelSig { valid: true };
    pub const FORGED: ModelSig = ModelSig { valid: false };
}

/// Validity-token scheme. Charges the same operation counts as
/// [`BlsScheme`] so timing-only runs and op accounting stay comparable.
pub struct ModelScheme<'a> {
    pub block: usize,
    pub n: usize,
    pub meter: &'a OpMeter,
}

impl VoteScheme for ModelScheme<'_> {
    type Sig = ModelSig;

    fn identity(&self) -> ModelSig {
        ModelSig::VALID
    }

    fn verify_vote(&self, _position: usize, sig: &ModelSig) -> bool {
        self.meter.sgv(1);
        sig.valid
    }

    fn verify_aggregate(&self, bitmap: &ParticipationBitmap, sig: &ModelSig) -> bool {
        if bitmap.popcount() == 0 {
            return false;
        }
        let cost = plan_reconstruction(bitmap, self.block, self.n).cost();
        self.meter.pka(cost as u64);
        self.meter.sgv(1);
        sig.valid
    }

    fn combine(&self, acc: &mut ModelSig, sig: &ModelSig) {
        self.meter.sga(1);
        acc.valid &= sig.valid;
    }

    fn meter(&self) -> &OpMeter {
        self.meter
    }
}

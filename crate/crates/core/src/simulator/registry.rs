use crate::crypto::{public_keys_bulk, PublicKey, SecretKey, ValidatorId};

/// Deterministic key material for every validator of a run.
pub struct KeyRegistry {
    seed: u64,
    secrets: Vec<SecretKey>,
    publics: Vec<PublicKey>,
}

impl KeyRegistry {
    pub fn generate(seed: u64, n: usize) -> Self {
        use rayon::prelude::*;
        let secrets: Vec<SecretKey> = (0..n as ValidatorId)
            .into_par_iter()
            .map(|i| SecretKey::derive(seed, i))
            .collect();
        let publics = public_keys_bulk(&secrets);
        Self {
            seed,
            secrets,
            publics,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.publics.len()
    }

    pub fn is_empty(&self) -> bool {
        self.publics.is_empty()
    }

    pub fn public_keys(&self) -> &[PublicKey] {
        &self.publics
    }

    pub fn secret(&self, v: ValidatorId) -> &SecretKey {
        &self.secrets[v as usize]
    }

    /// Sum of the secrets of `ids`. Signing a hash with it gives exactly the
    /// aggregate of the individual signatures.
    pub fn secret_sum(&self, ids: impl IntoIterator<Item = ValidatorId>) -> SecretKey {
        ids.into_iter()
            .fold(SecretKey::zero(), |acc, v| acc.add(&self.secrets[v as usize]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::{aggregate_signatures, keygen, HashedMessage};

    #[test]
    fn registry_matches_keygen() {
        let r = KeyRegistry::generate(9, 50);
        assert_eq!(r.len(), 50);
        assert_eq!(r.public_keys()[17], keygen(9, 17).public_key);
    }

    #[test]
    fn secret_sum_signs_the_aggregate() {
        let r = KeyRegistry::generate(2, 10);
        let h = HashedMessage::new(b"b");
        let ids = [1u32, 4, 7];
        let sigs: Vec<_> = ids.iter().map(|&v| r.secret(v).sign_hashed(&h)).collect();
        assert_eq!(r.secret_sum(ids).sign_hashed(&h), aggregate_signatures(&sigs).unwrap());
    }
}

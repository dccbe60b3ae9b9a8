//! Account keys and signatures.
//!
//! Ed25519 signatures are deterministic, so the same key signing the same
//! canonical bytes always yields the same signature. Signing keys are derived
//! from a seed as `sha256(KEY_DOMAIN || seed)`.

use std::fmt;

use ed25519_dalek::{Signer as _, SigningKey, Verifier as _, VerifyingKey};

use crate::codec::{Canonical, DecodeError, Decoder, Encoder};
use crate::hash::{AccountId, Hash};

/// Signature and digest scheme, recorded in the genesis block.
pub const SCHEME: &str = "ed25519+sha256";

/// Domain separator for seed-to-key derivation.
pub const KEY_DOMAIN: &[u8] = b"thingledger/ed25519-seed/v1:";

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PublicKey(pub [u8; 32]);

impl PublicKey {
    pub fn account_id(&self) -> AccountId {
        AccountId(Hash::of(&self.0))
    }

    pub fn verify(&self, msg: &[u8], sig: &Signature) -> bool {
        let Ok(key) = VerifyingKey::from_bytes(&self.0) else {
            return false;
        };
        let sig = ed25519_dalek::Signature::from_bytes(&sig.0);
        key.verify(msg, &sig).is_ok()
    }
}

impl fmt::Debug for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PublicKey({})", hex::encode(&self.0[..4]))
    }
}

impl Canonical for PublicKey {
    fn encode(&self, enc: &mut Encoder) {
        enc.raw(&self.0);
    }
    fn decode(dec: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        dec.raw().map(PublicKey)
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
pub struct Signature(pub [u8; 64]);

impl fmt::Debug for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Signature({}..)", hex::encode(&self.0[..4]))
    }
}

impl Canonical for Signature {
    fn encode(&self, enc: &mut Encoder) {
        enc.raw(&self.0);
    }
    fn decode(dec: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        dec.raw().map(Signature)
    }
}

/// The raw signing-key bytes a seed derives to. Whoever holds the seed can
/// compute this; custody audits use it to scan outputs for leaked keys.
pub fn derive_secret(seed: &[u8]) -> Option<[u8; 32]> {
    if seed.is_empty() {
        return None;
    }
    let mut material = KEY_DOMAIN.to_vec();
    material.extend_from_slice(seed);
    Some(Hash::of(&material).0)
}

/// The signing capability for one account. Never serialized and never
/// printed.
pub struct Signer {
    key: SigningKey,
}

impl Signer {
    /// Derives a signer from a non-empty seed. Returns `None` for an empty seed.
    pub fn from_seed(seed: &[u8]) -> Option<Signer> {
        derive_secret(seed).map(|secret| Signer {
            key: SigningKey::from_bytes(&secret),
        })
    }

    pub fn public_key(&self) -> PublicKey {
        PublicKey(self.key.verifying_key().to_bytes())
    }

    pub fn account_id(&self) -> AccountId {
        self.public_key().account_id()
    }

    pub fn sign(&self, msg: &[u8]) -> Signature {
        Signature(self.key.sign(msg).to_bytes())
    }
}

impl fmt::Debug for Signer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Signer")
            .field("account", &self.account_id())
            .finish_non_exhaustive()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_account() {
        let a = Signer::from_seed(b"alice").unwrap();
        let b = Signer::from_seed(b"alice").unwrap();
        assert_eq!(a.account_id(), b.account_id());
        assert_ne!(a.account_id(), Signer::from_seed(b"bob").unwrap().account_id());
    }

    #[test]
    fn empty_seed_rejected() {
        assert!(Signer::from_seed(b"").is_none());
    }

    #[test]
    fn signatures_are_deterministic_and_verify() {
        let s = Signer::from_seed(b"alice").unwrap();
        let sig = s.sign(b"msg");
        assert_eq!(sig, s.sign(b"msg"));
        assert!(s.public_key().verify(b"msg", &sig));
        assert!(!s.public_key().verify(b"msh", &sig));
    }

    #[test]
    fn debug_does_not_leak_secret() {
        let s = Signer::from_seed(b"alice").unwrap();
        let mut material = KEY_DOMAIN.to_vec();
        material.extend_from_slice(b"alice");
        let secret_hex = Hash::of(&material).to_hex();
        assert!(!format!("{s:?}").contains(&secret_hex[..8]));
    }
}

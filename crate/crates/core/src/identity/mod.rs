//! Signing keys, the mock OIDC provider, certificates and the anonymizing CA.

mod cert;
mod oidc;

pub use cert::{ca_issue, cert_verify, CaError, CertError, Certificate, CertificateAuthority, CERT_TAG, CERT_VALIDITY_SECS};
pub use oidc::{oidc_issue, oidc_verify, IdentityProvider, OidcToken, TokenError, TokenPolicy, OIDC_TAG, TOKEN_MAX_AGE_SECS};

use core::fmt;

use ed25519_dalek::{Signer, SigningKey};
use rand_core::CryptoRngCore;

/// Seconds since the Unix epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Timestamp(pub u64);

impl Timestamp {
    pub fn plus(self, secs: u64) -> Self {
        Self(self.0.saturating_add(secs))
    }
}

/// Ed25519 verification key bytes. Parsing happens at verification time, so a
/// malformed key simply fails to verify anything.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PublicKey(pub [u8; 32]);

impl fmt::Debug for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PublicKey(")?;
        for b in &self.0[..8] {
            write!(f, "{b:02x}")?;
        }
        write!(f, "..)")
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
pub struct Signature(pub [u8; 64]);

impl fmt::Debug for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Signature(")?;
        for b in &self.0[..8] {
            write!(f, "{b:02x}")?;
        }
        write!(f, "..)")
    }
}

/// An Ed25519 key pair.
#[derive(Clone)]
pub struct SigKeypair {
    sk: SigningKey,
}

impl fmt::Debug for SigKeypair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SigKeypair").field("pk", &self.public()).finish_non_exhaustive()
    }
}

impl SigKeypair {
    pub fn generate(rng: &mut impl CryptoRngCore) -> Self {
        Self {
            sk: SigningKey::generate(rng),
        }
    }

    pub fn from_secret_bytes(bytes: &[u8; 32]) -> Self {
        Self {
            sk: SigningKey::from_bytes(bytes),
        }
    }

    pub fn secret_bytes(&self) -> [u8; 32] {
        self.sk.to_bytes()
    }

    pub fn public(&self) -> PublicKey {
        PublicKey(self.sk.verifying_key().to_bytes())
    }

    pub fn sign(&self, msg: &[u8]) -> Signature {
        Signature(self.sk.sign(msg).to_bytes())
    }
}

pub fn digsig_generate(rng: &mut impl CryptoRngCore) -> SigKeypair {
    SigKeypair::generate(rng)
}

pub fn digsig_sign(sk: &SigKeypair, msg: &[u8]) -> Signature {
    sk.sign(msg)
}

/// Strict Ed25519 verification; malformed keys or signatures yield `false`.
pub fn digsig_verify(pk: &PublicKey, msg: &[u8], sig: &Signature) -> bool {
    let Ok(vk) = ed25519_dalek::VerifyingKey::from_bytes(&pk.0) else {
        return false;
    };
    vk.verify_strict(msg, &ed25519_dalek::Signature::from_bytes(&sig.0)).is_ok()
}

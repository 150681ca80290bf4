//! A minimal OpenID Connect provider: signed `(id, audience, issued_at)` claims.

use alloc::string::String;
use alloc::vec::Vec;

use rand_core::CryptoRngCore;

use super::{digsig_verify, PublicKey, SigKeypair, Signature, Timestamp};
use crate::wire::{DecodeError, Reader, Writer};

pub const OIDC_TAG: &[u8] = b"speranza/oidc-token/v1";
pub const TOKEN_MAX_AGE_SECS: u64 = 300;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TokenError {
    #[error("identity must be non-empty")]
    EmptyId,
    #[error("token signature is invalid")]
    BadSignature,
    #[error("token expired")]
    Expired,
    #[error("token issued in the future")]
    NotYetValid,
    #[error("token audience mismatch")]
    WrongAudience,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OidcToken {
    pub id: String,
    pub audience: String,
    pub issued_at: Timestamp,
    pub sig: Signature,
}

impl OidcToken {
    /// The signed byte-string: `tag ‖ id ‖ audience ‖ issued_at`.
    pub fn payload(id: &str, audience: &str, issued_at: Timestamp) -> Vec<u8> {
        let mut w = Writer::new();
        w.bytes(OIDC_TAG).str(id).str(audience).u64(issued_at.0);
        w.finish()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Self::payload(&self.id, &self.audience, self.issued_at);
        out.extend_from_slice(&self.sig.0);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut r = Reader::new(bytes);
        if r.bytes("token tag")? != OIDC_TAG {
            return Err(DecodeError::Invalid("token tag"));
        }
        let tok = Self {
            id: r.string("id")?,
            audience: r.string("audience")?,
            issued_at: Timestamp(r.u64("issued_at")?),
            sig: Signature(r.array("token signature")?),
        };
        r.finish()?;
        Ok(tok)
    }
}

/// What a relying party accepts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenPolicy {
    pub audience: String,
    pub max_age: u64,
}

impl TokenPolicy {
    pub fn new(audience: impl Into<String>) -> Self {
        Self {
            audience: audience.into(),
            max_age: TOKEN_MAX_AGE_SECS,
        }
    }
}

pub fn oidc_issue(provider: &SigKeypair, id: &str, audience: &str, now: Timestamp) -> Result<OidcToken, TokenError> {
    if id.is_empty() {
        return Err(TokenError::EmptyId);
    }
    Ok(OidcToken {
        id: id.into(),
        audience: audience.into(),
        issued_at: now,
        sig: provider.sign(&OidcToken::payload(id, audience, now)),
    })
}

/// Returns the embedded identity if the token is authentic, addressed to
/// `policy.audience`, and no older than `policy.max_age` at `now`.
pub fn oidc_verify(provider_pk: &PublicKey, tok: &OidcToken, policy: &TokenPolicy, now: Timestamp) -> Result<String, TokenError> {
    if !digsig_verify(provider_pk, &OidcToken::payload(&tok.id, &tok.audience, tok.issued_at), &tok.sig) {
        return Err(TokenError::BadSignature);
    }
    if tok.id.is_empty() {
        return Err(TokenError::EmptyId);
    }
    if tok.audience != policy.audience {
        return Err(TokenError::WrongAudience);
    }
    if tok.issued_at > now {
        return Err(TokenError::NotYetValid);
    }
    if now.0 - tok.issued_at.0 > policy.max_age {
        return Err(TokenError::Expired);
    }
    Ok(tok.id.clone())
}

/// The identity provider as a service.
#[derive(Debug, Clone)]
pub struct IdentityProvider {
    keys: SigKeypair,
}

impl IdentityProvider {
    pub fn new(rng: &mut impl CryptoRngCore) -> Self {
        Self::from_keys(SigKeypair::generate(rng))
    }

    pub fn from_keys(keys: SigKeypair) -> Self {
        Self { keys }
    }

    pub fn keys(&self) -> &SigKeypair {
        &self.keys
    }

    pub fn public_key(&self) -> PublicKey {
        self.keys.public()
    }

    /// Authenticates `id` (mocked) and issues a token for `audience`.
    pub fn issue(&self, id: &str, audience: &str, now: Timestamp) -> Result<OidcToken, TokenError> {
        oidc_issue(&self.keys, id, audience, now)
    }
}

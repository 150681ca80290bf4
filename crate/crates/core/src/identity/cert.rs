//! Short-lived signing certificates whose subject is a commitment to the
//! requester's identity rather than the identity itself.

use alloc::vec::Vec;

use rand_core::CryptoRngCore;

use super::{digsig_verify, oidc_verify, PublicKey, SigKeypair, Signature, Timestamp, TokenError, TokenPolicy};
use crate::cocommit::coco_commit;
use crate::group::PrimeGroup;
use crate::pedersen::{self, Commitment, CommitmentKey, PublicParams};
use crate::wire::{DecodeError, Reader, Writer};

pub const CERT_TAG: &[u8] = b"speranza/certificate/v1";
/// Validity window of issued certificates.
pub const CERT_VALIDITY_SECS: u64 = 600;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CertError {
    #[error("certificate signature is invalid")]
    BadSignature,
    #[error("certificate is not valid at the requested time")]
    OutsideValidity,
    #[error("certificate validity window is empty")]
    EmptyWindow,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CaError {
    #[error("identity token rejected: {0}")]
    Token(#[from] TokenError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Certificate<G: PrimeGroup> {
    pub subject: Commitment<G>,
    pub pk: PublicKey,
    pub not_before: Timestamp,
    pub not_after: Timestamp,
    pub ca_sig: Signature,
}

impl<G: PrimeGroup> Certificate<G> {
    pub const SIZE: usize = 4 + CERT_TAG.len() + G::ELEMENT_LEN + 32 + 8 + 8 + 64;

    /// The CA-signed byte-string:
    /// `tag ‖ subject ‖ pk ‖ not_before ‖ not_after`.
    pub fn tbs(subject: &Commitment<G>, pk: &PublicKey, not_before: Timestamp, not_after: Timestamp) -> Vec<u8> {
        let mut w = Writer::new();
        w.bytes(CERT_TAG)
            .raw(subject.encode().as_ref())
            .raw(&pk.0)
            .u64(not_before.0)
            .u64(not_after.0);
        w.finish()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Self::tbs(&self.subject, &self.pk, self.not_before, self.not_after);
        out.extend_from_slice(&self.ca_sig.0);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut r = Reader::new(bytes);
        let cert = Self::read(&mut r)?;
        r.finish()?;
        Ok(cert)
    }

    pub(crate) fn read(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        if r.bytes("certificate tag")? != CERT_TAG {
            return Err(DecodeError::Invalid("certificate tag"));
        }
        Ok(Self {
            subject: Commitment(pedersen::read_element::<G>(r, "subject")?),
            pk: PublicKey(r.array("certificate key")?),
            not_before: Timestamp(r.u64("not_before")?),
            not_after: Timestamp(r.u64("not_after")?),
            ca_sig: Signature(r.array("ca signature")?),
        })
    }
}

/// Returns the subject commitment if the CA signature holds and `now` falls
/// inside `[not_before, not_after]`.
pub fn cert_verify<G: PrimeGroup>(ca_pk: &PublicKey, cert: &Certificate<G>, now: Timestamp) -> Result<Commitment<G>, CertError> {
    let tbs = Certificate::tbs(&cert.subject, &cert.pk, cert.not_before, cert.not_after);
    if !digsig_verify(ca_pk, &tbs, &cert.ca_sig) {
        return Err(CertError::BadSignature);
    }
    if cert.not_before >= cert.not_after {
        return Err(CertError::EmptyWindow);
    }
    if now < cert.not_before || now > cert.not_after {
        return Err(CertError::OutsideValidity);
    }
    Ok(cert.subject)
}

/// Verify the token, commit to its identity, certify `(commitment, signer_pk)`,
/// and hand back the opening. Nothing is retained.
#[allow(clippy::too_many_arguments)]
pub fn ca_issue<G: PrimeGroup>(
    ca_keys: &SigKeypair,
    pp: &PublicParams<G>,
    provider_pk: &PublicKey,
    token_policy: &TokenPolicy,
    tok: &super::OidcToken,
    signer_pk: &PublicKey,
    now: Timestamp,
    rng: &mut impl CryptoRngCore,
) -> Result<(Certificate<G>, CommitmentKey<G>), CaError> {
    let id = oidc_verify(provider_pk, tok, token_policy, now)?;
    let (subject, r) = coco_commit(pp, &id, rng);
    let not_before = now;
    let not_after = now.plus(CERT_VALIDITY_SECS);
    let ca_sig = ca_keys.sign(&Certificate::tbs(&subject, signer_pk, not_before, not_after));
    Ok((
        Certificate {
            subject,
            pk: *signer_pk,
            not_before,
            not_after,
            ca_sig,
        },
        r,
    ))
}

/// The certificate authority as a stateless service.
#[derive(Debug, Clone)]
pub struct CertificateAuthority<G: PrimeGroup> {
    keys: SigKeypair,
    pp: PublicParams<G>,
    provider_pk: PublicKey,
    token_policy: TokenPolicy,
}

impl<G: PrimeGroup> CertificateAuthority<G> {
    /// Audience the CA expects on incoming tokens.
    pub const AUDIENCE: &'static str = "speranza-ca";

    pub fn new(keys: SigKeypair, pp: PublicParams<G>, provider_pk: PublicKey) -> Self {
        Self {
            keys,
            pp,
            provider_pk,
            token_policy: TokenPolicy::new(Self::AUDIENCE),
        }
    }

    pub fn keys(&self) -> &SigKeypair {
        &self.keys
    }

    pub fn public_key(&self) -> PublicKey {
        self.keys.public()
    }

    pub fn issue(
        &self,
        tok: &super::OidcToken,
        signer_pk: &PublicKey,
        now: Timestamp,
        rng: &mut impl CryptoRngCore,
    ) -> Result<(Certificate<G>, CommitmentKey<G>), CaError> {
        ca_issue(
            &self.keys,
            &self.pp,
            &self.provider_pk,
            &self.token_policy,
            tok,
            signer_pk,
            now,
            rng,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cocommit::coco_verify;
    use crate::group::{Ristretto, Toy1019};
    use crate::identity::IdentityProvider;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    struct Fixture<G: PrimeGroup> {
        idp: IdentityProvider,
        ca: CertificateAuthority<G>,
        pp: PublicParams<G>,
        rng: ChaCha20Rng,
    }

    fn fixture<G: PrimeGroup>() -> Fixture<G> {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let idp = IdentityProvider::new(&mut rng);
        let pp = PublicParams::<G>::generate();
        let ca = CertificateAuthority::new(SigKeypair::generate(&mut rng), pp.clone(), idp.public_key());
        Fixture { idp, ca, pp, rng }
    }

    fn issue_and_open<G: PrimeGroup>() {
        let mut f = fixture::<G>();
        let now = Timestamp(10_000);
        let signer = SigKeypair::generate(&mut f.rng);
        let tok = f.idp.issue("alice@example.com", CertificateAuthority::<G>::AUDIENCE, now).unwrap();
        let (cert, r) = f.ca.issue(&tok, &signer.public(), now, &mut f.rng).unwrap();
        let sub = cert_verify(&f.ca.public_key(), &cert, now).unwrap();
        assert!(coco_verify(&f.pp, "alice@example.com", &sub, &r));
        assert_eq!(Certificate::<G>::from_bytes(&cert.to_bytes()).unwrap(), cert);
        assert_eq!(cert.to_bytes().len(), Certificate::<G>::SIZE);

        let (cert2, _) = f.ca.issue(&tok, &signer.public(), now, &mut f.rng).unwrap();
        assert_ne!(cert.subject, cert2.subject);
    }

    #[test]
    fn issued_subject_opens_to_identity() {
        issue_and_open::<Ristretto>();
        issue_and_open::<Toy1019>();
    }

    #[test]
    fn validity_window_and_signature_enforced() {
        let mut f = fixture::<Ristretto>();
        let now = Timestamp(10_000);
        let signer = SigKeypair::generate(&mut f.rng);
        let tok = f
            .idp
            .issue("alice@example.com", CertificateAuthority::<Ristretto>::AUDIENCE, now)
            .unwrap();
        let (cert, _) = f.ca.issue(&tok, &signer.public(), now, &mut f.rng).unwrap();
        assert_eq!(cert.not_after.0 - cert.not_before.0, 600);
        assert!(cert_verify(&f.ca.public_key(), &cert, now.plus(600)).is_ok());
        assert_eq!(
            cert_verify(&f.ca.public_key(), &cert, now.plus(660)),
            Err(CertError::OutsideValidity)
        );
        let mut flipped = cert;
        flipped.ca_sig.0[5] ^= 1;
        assert_eq!(cert_verify(&f.ca.public_key(), &flipped, now), Err(CertError::BadSignature));
    }

    #[test]
    fn stale_or_forged_tokens_refused() {
        let mut f = fixture::<Ristretto>();
        let now = Timestamp(10_000);
        let signer = SigKeypair::generate(&mut f.rng);
        let tok = f
            .idp
            .issue("alice@example.com", CertificateAuthority::<Ristretto>::AUDIENCE, now)
            .unwrap();
        assert_eq!(
            f.ca.issue(&tok, &signer.public(), now.plus(301), &mut f.rng).unwrap_err(),
            CaError::Token(TokenError::Expired)
        );
        let rogue = IdentityProvider::new(&mut f.rng);
        let forged = rogue
            .issue("alice@example.com", CertificateAuthority::<Ristretto>::AUDIENCE, now)
            .unwrap();
        assert_eq!(
            f.ca.issue(&forged, &signer.public(), now, &mut f.rng).unwrap_err(),
            CaError::Token(TokenError::BadSignature)
        );
    }

    #[test]
    fn no_cleartext_identity_in_certificate() {
        let mut f = fixture::<Ristretto>();
        let now = Timestamp(10_000);
        let signer = SigKeypair::generate(&mut f.rng);
        let id = "alice@example.com";
        let tok = f.idp.issue(id, CertificateAuthority::<Ristretto>::AUDIENCE, now).unwrap();
        let (cert, r) = f.ca.issue(&tok, &signer.public(), now, &mut f.rng).unwrap();
        let bytes = cert.to_bytes();
        assert!(!bytes.windows(id.len()).any(|w| w == id.as_bytes()));
        assert!(!bytes.windows(32).any(|w| w == r.to_bytes()));
    }
}

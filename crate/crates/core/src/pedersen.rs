//! Pedersen commitments and non-interactive Chaum-Pedersen proofs that two
//! commitments open to the same message.
//!
//! A commitment to `m` with key `r` is `c = g^m · h^r`. An [`EqualityProof`]
//! for `(c1, c2)` is the Fiat-Shamir transform of the three-move protocol
//!
//! ```text
//! P: s1, s2, s3 <- Z_q;  a1 = g^s1 h^s2;  a2 = g^s1 h^s3
//!    d  = H(c1, c2, a1, a2)
//!    b1 = d·m + s1;  b2 = d·r1 + s2;  b3 = d·r2 + s3
//! V: a1 · c1^d == g^b1 · h^b2  and  a2 · c2^d == g^b1 · h^b3
//! ```

use alloc::vec::Vec;
use core::fmt;

use rand_core::CryptoRngCore;

use crate::group::{hash_to_scalar, random_scalar, PrimeGroup, SCALAR_LEN};
use crate::wire::{DecodeError, Reader, Writer};

/// Fiat-Shamir domain tag for commitment-equality challenges.
pub const EQ_PROOF_TAG: &[u8] = b"speranza/chaum-pedersen/v1";
/// Seed from which the default generators are derived.
pub const GENERATOR_SEED: &[u8] = b"speranza/pedersen/generators/v1";
const GENERATOR_TAG: &[u8] = b"speranza/generator/v1";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CommitError {
    #[error("commitment does not open to the claimed message")]
    OpeningMismatch,
}

/// Generators `g`, `h` plus the Fiat-Shamir configuration.
#[derive(Clone, PartialEq, Eq)]
pub struct PublicParams<G: PrimeGroup> {
    pub g: G::Element,
    pub h: G::Element,
    pub nizk_domain_tag: Vec<u8>,
}

impl<G: PrimeGroup> fmt::Debug for PublicParams<G> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PublicParams")
            .field("group", &G::spec().name)
            .field("g", &self.g)
            .field("h", &self.h)
            .finish()
    }
}

impl<G: PrimeGroup> Default for PublicParams<G> {
    fn default() -> Self {
        Self::generate()
    }
}

impl<G: PrimeGroup> PublicParams<G> {
    /// Nothing-up-my-sleeve parameters from [`GENERATOR_SEED`].
    pub fn generate() -> Self {
        Self::from_seed(GENERATOR_SEED)
    }

    /// Both generators are hashed to the group from independent labels, so
    /// nobody learns `log_g h`.
    pub fn from_seed(seed: &[u8]) -> Self {
        let mut g_seed = seed.to_vec();
        g_seed.extend_from_slice(b"/g");
        let mut h_seed = seed.to_vec();
        h_seed.extend_from_slice(b"/h");
        Self {
            g: G::hash_to_element(GENERATOR_TAG, &g_seed),
            h: G::hash_to_element(GENERATOR_TAG, &h_seed),
            nizk_domain_tag: EQ_PROOF_TAG.to_vec(),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.str(G::spec().name)
            .raw(G::encode(&self.g).as_ref())
            .raw(G::encode(&self.h).as_ref())
            .bytes(&self.nizk_domain_tag);
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut r = Reader::new(bytes);
        if r.string("group name")? != G::spec().name {
            return Err(DecodeError::Invalid("group name"));
        }
        let g = read_element::<G>(&mut r, "g")?;
        let h = read_element::<G>(&mut r, "h")?;
        let nizk_domain_tag = r.bytes("nizk tag")?.to_vec();
        r.finish()?;
        if g == h || g == G::identity() || h == G::identity() || nizk_domain_tag.is_empty() {
            return Err(DecodeError::Invalid("public parameters"));
        }
        Ok(Self { g, h, nizk_domain_tag })
    }
}

/// `c = g^m · h^r`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Commitment<G: PrimeGroup>(pub G::Element);

impl<G: PrimeGroup> Commitment<G> {
    pub fn encode(&self) -> G::Encoded {
        G::encode(&self.0)
    }

    pub fn decode(bytes: &[u8]) -> Option<Self> {
        G::decode(bytes).map(Self)
    }
}

/// The opening randomness `r`. Debug output is redacted.
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct CommitmentKey<G: PrimeGroup>(pub G::Scalar);

impl<G: PrimeGroup> fmt::Debug for CommitmentKey<G> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("CommitmentKey(..)")
    }
}

impl<G: PrimeGroup> CommitmentKey<G> {
    pub fn to_bytes(&self) -> [u8; SCALAR_LEN] {
        G::scalar_to_bytes(&self.0)
    }

    pub fn from_bytes(bytes: &[u8; SCALAR_LEN]) -> Option<Self> {
        G::scalar_from_bytes(bytes).map(Self)
    }
}

pub fn commit<G: PrimeGroup>(pp: &PublicParams<G>, m: &G::Scalar, rng: &mut impl CryptoRngCore) -> (Commitment<G>, CommitmentKey<G>) {
    let r = random_scalar::<G>(rng);
    (commit_with_key(pp, m, &r), CommitmentKey(r))
}

/// Commitment with caller-chosen randomness.
pub fn commit_with_key<G: PrimeGroup>(pp: &PublicParams<G>, m: &G::Scalar, r: &G::Scalar) -> Commitment<G> {
    Commitment(G::msm2(m, &pp.g, r, &pp.h))
}

pub fn verify<G: PrimeGroup>(pp: &PublicParams<G>, m: &G::Scalar, c: &Commitment<G>, r: &CommitmentKey<G>) -> bool {
    commit_with_key(pp, m, &r.0) == *c
}

/// `(α₁, α₂, β₁, β₂, β₃)`; the challenge is recomputed, never stored.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EqualityProof<G: PrimeGroup> {
    pub alpha1: G::Element,
    pub alpha2: G::Element,
    pub beta1: G::Scalar,
    pub beta2: G::Scalar,
    pub beta3: G::Scalar,
}

impl<G: PrimeGroup> EqualityProof<G> {
    pub const SIZE: usize = 2 * G::ELEMENT_LEN + 3 * SCALAR_LEN;

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::with_capacity(Self::SIZE);
        w.raw(G::encode(&self.alpha1).as_ref())
            .raw(G::encode(&self.alpha2).as_ref())
            .raw(&G::scalar_to_bytes(&self.beta1))
            .raw(&G::scalar_to_bytes(&self.beta2))
            .raw(&G::scalar_to_bytes(&self.beta3));
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut r = Reader::new(bytes);
        let proof = Self::read(&mut r)?;
        r.finish()?;
        Ok(proof)
    }

    pub(crate) fn read(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(Self {
            alpha1: read_element::<G>(r, "alpha1")?,
            alpha2: read_element::<G>(r, "alpha2")?,
            beta1: read_scalar::<G>(r, "beta1")?,
            beta2: read_scalar::<G>(r, "beta2")?,
            beta3: read_scalar::<G>(r, "beta3")?,
        })
    }
}

pub(crate) fn read_element<G: PrimeGroup>(r: &mut Reader<'_>, what: &'static str) -> Result<G::Element, DecodeError> {
    G::decode(r.raw(G::ELEMENT_LEN, what)?).ok_or(DecodeError::Invalid(what))
}

pub(crate) fn read_scalar<G: PrimeGroup>(r: &mut Reader<'_>, what: &'static str) -> Result<G::Scalar, DecodeError> {
    G::scalar_from_bytes(&r.array(what)?).ok_or(DecodeError::Invalid(what))
}

/// `d = H(c1, c2, α₁, α₂)` over canonical encodings.
pub fn challenge<G: PrimeGroup>(
    pp: &PublicParams<G>,
    c1: &Commitment<G>,
    c2: &Commitment<G>,
    alpha1: &G::Element,
    alpha2: &G::Element,
) -> G::Scalar {
    hash_to_scalar::<G>(
        &pp.nizk_domain_tag,
        &[
            c1.encode().as_ref(),
            c2.encode().as_ref(),
            G::encode(alpha1).as_ref(),
            G::encode(alpha2).as_ref(),
        ],
    )
}

#[allow(clippy::too_many_arguments)]
pub fn prove_eq<G: PrimeGroup>(
    pp: &PublicParams<G>,
    m: &G::Scalar,
    c1: &Commitment<G>,
    r1: &CommitmentKey<G>,
    c2: &Commitment<G>,
    r2: &CommitmentKey<G>,
    rng: &mut impl CryptoRngCore,
) -> Result<EqualityProof<G>, CommitError> {
    let nonces = [random_scalar::<G>(rng), random_scalar::<G>(rng), random_scalar::<G>(rng)];
    prove_eq_with_nonces(pp, m, c1, r1, c2, r2, nonces)
}

/// [`prove_eq`] with explicit `(s1, s2, s3)`. Reusing nonces across two
/// proofs leaks `m`, `r1` and `r2`; this exists for transcript tests.
#[allow(clippy::too_many_arguments)]
pub fn prove_eq_with_nonces<G: PrimeGroup>(
    pp: &PublicParams<G>,
    m: &G::Scalar,
    c1: &Commitment<G>,
    r1: &CommitmentKey<G>,
    c2: &Commitment<G>,
    r2: &CommitmentKey<G>,
    [s1, s2, s3]: [G::Scalar; 3],
) -> Result<EqualityProof<G>, CommitError> {
    if !verify(pp, m, c1, r1) || !verify(pp, m, c2, r2) {
        return Err(CommitError::OpeningMismatch);
    }
    let alpha1 = G::msm2(&s1, &pp.g, &s2, &pp.h);
    let alpha2 = G::msm2(&s1, &pp.g, &s3, &pp.h);
    let d = challenge(pp, c1, c2, &alpha1, &alpha2);
    Ok(EqualityProof {
        alpha1,
        alpha2,
        beta1: d * *m + s1,
        beta2: d * r1.0 + s2,
        beta3: d * r2.0 + s3,
    })
}

pub fn verify_eq<G: PrimeGroup>(pp: &PublicParams<G>, c1: &Commitment<G>, c2: &Commitment<G>, proof: &EqualityProof<G>) -> bool {
    let d = challenge(pp, c1, c2, &proof.alpha1, &proof.alpha2);
    let lhs1 = G::op(&proof.alpha1, &G::exp(&c1.0, &d));
    let rhs1 = G::msm2(&proof.beta1, &pp.g, &proof.beta2, &pp.h);
    if lhs1 != rhs1 {
        return false;
    }
    let lhs2 = G::op(&proof.alpha2, &G::exp(&c2.0, &d));
    let rhs2 = G::msm2(&proof.beta1, &pp.g, &proof.beta3, &pp.h);
    lhs2 == rhs2
}

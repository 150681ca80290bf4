//! Prime-order groups used by every commitment and proof in the crate.
//!
//! [`PrimeGroup`] is the contract: a cyclic group of prime order `q`, its
//! scalar field `Z_q`, and canonical fixed-width encodings. Two backends
//! implement it:
//!
//! * [`Ristretto`], the production group (ristretto255 over Curve25519,
//!   32-byte encodings).
//! * [`Toy`], a multiplicative subgroup of `Z_p*` with `p = 2q + 1` and `q`
//!   small enough that discrete logarithms can be brute-forced in tests.
//!
//! The group operation is written multiplicatively in docs (`P·Q`, `P^a`) to
//! match the usual Pedersen notation, regardless of backend.

use core::fmt::Debug;
use core::ops::{Add, Mul, Neg, Sub};

use rand_core::CryptoRngCore;
use sha2::{Digest, Sha512};

mod ristretto;
mod toy;

pub use ristretto::Ristretto;
pub use toy::{Toy, Toy1019, Toy1048571, ToyElement, ToyModulus, ToyScalar, Q1019, Q1048571};

/// Domain tag under which identity strings are mapped to scalars.
pub const ID_TAG: &[u8] = b"speranza/id/v1";

/// Canonical scalar encoding width (little-endian, reduced).
pub const SCALAR_LEN: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    ProductionCurve,
    ToyModP,
}

/// Static description of a group backend.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GroupSpec {
    pub name: &'static str,
    /// Group order `q`, little-endian.
    pub order: [u8; 32],
    pub element_len: usize,
    pub backend: Backend,
}

/// A cyclic group of prime order with canonical encodings.
pub trait PrimeGroup: Copy + Debug + Eq + Send + Sync + 'static {
    type Scalar: Copy
        + Debug
        + Eq
        + Send
        + Sync
        + Add<Output = Self::Scalar>
        + Sub<Output = Self::Scalar>
        + Mul<Output = Self::Scalar>
        + Neg<Output = Self::Scalar>;
    type Element: Copy + Debug + Eq + Send + Sync;
    type Encoded: AsRef<[u8]> + Copy + Debug + Eq;

    const ELEMENT_LEN: usize;

    fn spec() -> GroupSpec;

    fn identity() -> Self::Element;

    /// `a·b`.
    fn op(a: &Self::Element, b: &Self::Element) -> Self::Element;

    /// `p^s`.
    fn exp(p: &Self::Element, s: &Self::Scalar) -> Self::Element;

    /// `p^a · q^b`.
    fn msm2(a: &Self::Scalar, p: &Self::Element, b: &Self::Scalar, q: &Self::Element) -> Self::Element {
        Self::op(&Self::exp(p, a), &Self::exp(q, b))
    }

    fn scalar_from_u64(v: u64) -> Self::Scalar;

    /// Reduces 64 uniform bytes mod `q`.
    fn scalar_from_wide(bytes: &[u8; 64]) -> Self::Scalar;

    fn scalar_to_bytes(s: &Self::Scalar) -> [u8; SCALAR_LEN];

    /// Accepts only reduced encodings.
    fn scalar_from_bytes(bytes: &[u8; SCALAR_LEN]) -> Option<Self::Scalar>;

    fn encode(e: &Self::Element) -> Self::Encoded;

    /// Rejects wrong lengths, non-canonical encodings, and non-members.
    fn decode(bytes: &[u8]) -> Option<Self::Element>;

    /// Maps a domain-separated seed to an element with unknown discrete log
    /// relative to any other output.
    fn hash_to_element(tag: &[u8], seed: &[u8]) -> Self::Element;
}

pub fn random_scalar<G: PrimeGroup>(rng: &mut impl CryptoRngCore) -> G::Scalar {
    let mut wide = [0u8; 64];
    rng.fill_bytes(&mut wide);
    G::scalar_from_wide(&wide)
}

/// SHA-512 over `tag ‖ (len_be64 ‖ input)*`, wide-reduced mod `q`.
pub fn hash_to_scalar<G: PrimeGroup>(tag: &[u8], inputs: &[&[u8]]) -> G::Scalar {
    debug_assert!(!tag.is_empty(), "domain tag must be non-empty");
    G::scalar_from_wide(&framed_sha512(tag, inputs))
}

pub(crate) fn framed_sha512(tag: &[u8], inputs: &[&[u8]]) -> [u8; 64] {
    let mut h = Sha512::new();
    h.update(tag);
    for input in inputs {
        h.update((input.len() as u64).to_be_bytes());
        h.update(input);
    }
    h.finalize().into()
}

/// The committed scalar for an identity string (email, account name).
pub fn id_scalar<G: PrimeGroup>(id: &str) -> G::Scalar {
    hash_to_scalar::<G>(ID_TAG, &[id.as_bytes()])
}

pub fn encode_element<G: PrimeGroup>(e: &G::Element) -> G::Encoded {
    G::encode(e)
}

pub fn decode_element<G: PrimeGroup>(bytes: &[u8]) -> Option<G::Element> {
    G::decode(bytes)
}

pub fn msm2<G: PrimeGroup>(a: &G::Scalar, p: &G::Element, b: &G::Scalar, q: &G::Element) -> G::Element {
    G::msm2(a, p, b, q)
}

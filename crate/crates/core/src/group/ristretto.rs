use curve25519_dalek::ristretto::{CompressedRistretto, RistrettoPoint};
use curve25519_dalek::scalar::Scalar;
use curve25519_dalek::traits::{Identity, MultiscalarMul};

use super::{framed_sha512, Backend, GroupSpec, PrimeGroup, SCALAR_LEN};

/// ristretto255: the prime-order quotient of the Curve25519 Edwards group.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ristretto;

// l = 2^252 + 27742317777372353535851937790883648493
const ORDER_LE: [u8; 32] = [
    0xed, 0xd3, 0xf5, 0x5c, 0x1a, 0x63, 0x12, 0x58, 0xd6, 0x9c, 0xf7, 0xa2, 0xde, 0xf9, 0xde, 0x14, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00,
    0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x10,
];

impl PrimeGroup for Ristretto {
    type Scalar = Scalar;
    type Element = RistrettoPoint;
    type Encoded = [u8; 32];

    const ELEMENT_LEN: usize = 32;

    fn spec() -> GroupSpec {
        GroupSpec {
            name: "ristretto255",
            order: ORDER_LE,
            element_len: 32,
            backend: Backend::ProductionCurve,
        }
    }

    fn identity() -> RistrettoPoint {
        RistrettoPoint::identity()
    }

    fn op(a: &RistrettoPoint, b: &RistrettoPoint) -> RistrettoPoint {
        a + b
    }

    fn exp(p: &RistrettoPoint, s: &Scalar) -> RistrettoPoint {
        p * s
    }

    fn msm2(a: &Scalar, p: &RistrettoPoint, b: &Scalar, q: &RistrettoPoint) -> RistrettoPoint {
        RistrettoPoint::multiscalar_mul([a, b], [p, q])
    }

    fn scalar_from_u64(v: u64) -> Scalar {
        Scalar::from(v)
    }

    fn scalar_from_wide(bytes: &[u8; 64]) -> Scalar {
        Scalar::from_bytes_mod_order_wide(bytes)
    }

    fn scalar_to_bytes(s: &Scalar) -> [u8; SCALAR_LEN] {
        s.to_bytes()
    }

    fn scalar_from_bytes(bytes: &[u8; SCALAR_LEN]) -> Option<Scalar> {
        Scalar::from_canonical_bytes(*bytes).into()
    }

    fn encode(e: &RistrettoPoint) -> [u8; 32] {
        e.compress().to_bytes()
    }

    fn decode(bytes: &[u8]) -> Option<RistrettoPoint> {
        CompressedRistretto::from_slice(bytes).ok()?.decompress()
    }

    fn hash_to_element(tag: &[u8], seed: &[u8]) -> RistrettoPoint {
        RistrettoPoint::from_uniform_bytes(&framed_sha512(tag, &[seed]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_ff_encoding_rejected() {
        assert_eq!(Ristretto::decode(&[0xff; 32]), None);
    }

    #[test]
    fn wrong_length_rejected() {
        let g = Ristretto::hash_to_element(b"t", b"g");
        let enc = Ristretto::encode(&g);
        assert_eq!(Ristretto::decode(&enc[..31]), None);
        let mut long = enc.to_vec();
        long.push(0);
        assert_eq!(Ristretto::decode(&long), None);
    }

    #[test]
    fn non_canonical_scalar_rejected() {
        assert_eq!(Ristretto::scalar_from_bytes(&ORDER_LE), None);
        assert_eq!(Ristretto::scalar_from_bytes(&[0xff; 32]), None);
    }

    #[test]
    fn identity_encodes_to_zero_bytes() {
        assert_eq!(Ristretto::encode(&Ristretto::identity()), [0u8; 32]);
    }

    #[test]
    fn order_matches_backend() {
        // q·P = identity for the encoded order q (computed as (q-1)·P + P).
        let p = Ristretto::hash_to_element(b"t", b"p");
        let q_minus_1 = -Scalar::ONE;
        assert_eq!(p * q_minus_1 + p, Ristretto::identity());
        let mut q = (q_minus_1).to_bytes();
        q[0] += 1;
        assert_eq!(q, ORDER_LE);
    }
}

//! A brute-forceable group: the order-`q` subgroup of quadratic residues in
//! `Z_p*`, `p = 2q + 1`.
//!
//! Only for tests and oracles. Discrete logs are trivially computable.

use core::fmt;
use core::marker::PhantomData;
use core::ops::{Add, Mul, Neg, Sub};

use super::{framed_sha512, Backend, GroupSpec, PrimeGroup, SCALAR_LEN};

/// Compile-time choice of the subgroup order. `q` and `2q + 1` must both be prime.
pub trait ToyModulus: Copy + fmt::Debug + Eq + Send + Sync + 'static {
    const Q: u64;
    const NAME: &'static str;
    const P: u64 = 2 * Self::Q + 1;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Q1019;

impl ToyModulus for Q1019 {
    const Q: u64 = 1019;
    const NAME: &'static str = "toy-modp-q1019";
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Q1048571;

impl ToyModulus for Q1048571 {
    const Q: u64 = 1_048_571;
    const NAME: &'static str = "toy-modp-q1048571";
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Toy<M>(PhantomData<M>);

/// `q = 1019`, small enough for exhaustive `q²` searches.
pub type Toy1019 = Toy<Q1019>;
/// `q = 1048571`, the largest safe-prime subgroup order below 2²⁰.
pub type Toy1048571 = Toy<Q1048571>;

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct ToyScalar<M>(u64, PhantomData<M>);

impl<M: ToyModulus> ToyScalar<M> {
    pub fn new(v: u64) -> Self {
        Self(v % M::Q, PhantomData)
    }

    pub fn value(self) -> u64 {
        self.0
    }
}

impl<M> fmt::Debug for ToyScalar<M> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ToyScalar({})", self.0)
    }
}

impl<M: ToyModulus> Add for ToyScalar<M> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.0 + rhs.0)
    }
}

impl<M: ToyModulus> Sub for ToyScalar<M> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.0 + M::Q - rhs.0)
    }
}

impl<M: ToyModulus> Mul for ToyScalar<M> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        Self::new(((self.0 as u128 * rhs.0 as u128) % M::Q as u128) as u64)
    }
}

impl<M: ToyModulus> Neg for ToyScalar<M> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(M::Q - self.0)
    }
}

/// A residue in `[1, p)` lying in the order-`q` subgroup.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct ToyElement<M>(u64, PhantomData<M>);

impl<M: ToyModulus> ToyElement<M> {
    pub fn value(self) -> u64 {
        self.0
    }

    /// Checked constructor: `None` unless `v` is a subgroup member.
    pub fn from_residue(v: u64) -> Option<Self> {
        (v != 0 && v < M::P && pow_mod(v, M::Q, M::P) == 1).then_some(Self(v, PhantomData))
    }
}

impl<M> fmt::Debug for ToyElement<M> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ToyElement({})", self.0)
    }
}

fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    let mut acc = 1 % m;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    acc
}

/// Little-endian bytes reduced mod `m`.
fn reduce_le(bytes: &[u8], m: u64) -> u64 {
    bytes
        .iter()
        .rev()
        .fold(0u64, |acc, &b| ((acc as u128 * 256 + b as u128) % m as u128) as u64)
}

impl<M: ToyModulus> PrimeGroup for Toy<M> {
    type Scalar = ToyScalar<M>;
    type Element = ToyElement<M>;
    type Encoded = [u8; 8];

    const ELEMENT_LEN: usize = 8;

    fn spec() -> GroupSpec {
        let mut order = [0u8; 32];
        order[..8].copy_from_slice(&M::Q.to_le_bytes());
        GroupSpec {
            name: M::NAME,
            order,
            element_len: 8,
            backend: Backend::ToyModP,
        }
    }

    fn identity() -> Self::Element {
        ToyElement(1, PhantomData)
    }

    fn op(a: &Self::Element, b: &Self::Element) -> Self::Element {
        ToyElement(mul_mod(a.0, b.0, M::P), PhantomData)
    }

    fn exp(p: &Self::Element, s: &Self::Scalar) -> Self::Element {
        ToyElement(pow_mod(p.0, s.0, M::P), PhantomData)
    }

    fn scalar_from_u64(v: u64) -> Self::Scalar {
        ToyScalar::new(v)
    }

    fn scalar_from_wide(bytes: &[u8; 64]) -> Self::Scalar {
        ToyScalar::new(reduce_le(bytes, M::Q))
    }

    fn scalar_to_bytes(s: &Self::Scalar) -> [u8; SCALAR_LEN] {
        let mut out = [0u8; SCALAR_LEN];
        out[..8].copy_from_slice(&s.0.to_le_bytes());
        out
    }

    fn scalar_from_bytes(bytes: &[u8; SCALAR_LEN]) -> Option<Self::Scalar> {
        if bytes[8..].iter().any(|&b| b != 0) {
            return None;
        }
        let v = u64::from_le_bytes(bytes[..8].try_into().ok()?);
        (v < M::Q).then(|| ToyScalar::new(v))
    }

    fn encode(e: &Self::Element) -> [u8; 8] {
        e.0.to_be_bytes()
    }

    fn decode(bytes: &[u8]) -> Option<Self::Element> {
        let arr: [u8; 8] = bytes.try_into().ok()?;
        ToyElement::from_residue(u64::from_be_bytes(arr))
    }

    fn hash_to_element(tag: &[u8], seed: &[u8]) -> Self::Element {
        // Squaring a uniform residue lands in the QR subgroup; skip 0 and 1.
        (0u64..)
            .map(|ctr| {
                let x = reduce_le(&framed_sha512(tag, &[seed, &ctr.to_be_bytes()]), M::P);
                mul_mod(x, x, M::P)
            })
            .find(|&e| e > 1)
            .map(|e| ToyElement(e, PhantomData))
            .expect("unbounded search")
    }
}

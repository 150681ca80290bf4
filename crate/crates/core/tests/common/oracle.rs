//! Independent evaluation of the commitment and equality-proof formulas over
//! the toy group, using plain `u128` modular arithmetic and nothing from the
//! library except plain integer accessors.

use rand::{Rng, RngCore};
use sha2::{Digest, Sha512};
use speranza_core::group::{Toy, ToyElement, ToyModulus, ToyScalar};
use speranza_core::pedersen::{
    commit_with_key, prove_eq_with_nonces, verify, verify_eq, Commitment, CommitmentKey, EqualityProof, PublicParams,
};

pub fn pow_mod(base: u64, mut e: u64, p: u64) -> u64 {
    let (mut acc, mut b) = (1u128, base as u128 % p as u128);
    while e > 0 {
        if e & 1 == 1 {
            acc = acc * b % p as u128;
        }
        b = b * b % p as u128;
        e >>= 1;
    }
    acc as u64
}

pub fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    (a as u128 * b as u128 % m as u128) as u64
}

/// SHA-512 over `tag ‖ (be64 len ‖ input)*`, read as a little-endian integer
/// and reduced mod `q` byte by byte.
pub fn hash_to_zq(tag: &[u8], inputs: &[&[u8]], q: u64) -> u64 {
    let mut pre = tag.to_vec();
    for i in inputs {
        pre.extend_from_slice(&(i.len() as u64).to_be_bytes());
        pre.extend_from_slice(i);
    }
    let h = Sha512::digest(&pre);
    h.iter()
        .rev()
        .fold(0u64, |acc, &b| ((acc as u128 * 256 + b as u128) % q as u128) as u64)
}

/// Exhaustive discrete log of `y` to base `g` in the order-`q` subgroup.
pub fn brute_dlog(g: u64, y: u64, p: u64, q: u64) -> Option<u64> {
    let mut x = 1u64;
    for e in 0..q {
        if x == y {
            return Some(e);
        }
        x = mul_mod(x, g, p);
    }
    None
}

struct Instance {
    m: u64,
    r1: u64,
    r2: u64,
    s: [u64; 3],
}

/// Runs one random instance through the library and the oracle; returns a
/// description of the first disagreement.
pub fn check_instance<M: ToyModulus>(pp: &PublicParams<Toy<M>>, rng: &mut impl RngCore) -> Result<(), String> {
    let (p, q) = (M::P, M::Q);
    let inst = Instance {
        m: rng.gen_range(0..q),
        r1: rng.gen_range(0..q),
        r2: rng.gen_range(0..q),
        s: [rng.gen_range(0..q), rng.gen_range(0..q), rng.gen_range(0..q)],
    };
    let g = pp.g.value();
    let h = pp.h.value();
    let sc = ToyScalar::<M>::new;
    let commit_oracle = |m: u64, r: u64| mul_mod(pow_mod(g, m, p), pow_mod(h, r, p), p);

    let c1 = commit_with_key(pp, &sc(inst.m), &sc(inst.r1));
    let c2 = commit_with_key(pp, &sc(inst.m), &sc(inst.r2));
    let (o1, o2) = (commit_oracle(inst.m, inst.r1), commit_oracle(inst.m, inst.r2));
    if c1.0.value() != o1 || c2.0.value() != o2 {
        return Err(format!("commit mismatch for m={} r1={}", inst.m, inst.r1));
    }

    let other = (inst.m + 1) % q;
    let lib_open = verify(pp, &sc(inst.m), &c1, &CommitmentKey(sc(inst.r1)));
    let lib_wrong = verify(pp, &sc(other), &c1, &CommitmentKey(sc(inst.r1)));
    if !lib_open || lib_wrong != (commit_oracle(other, inst.r1) == o1) {
        return Err("verify disagrees with oracle".into());
    }

    let proof = prove_eq_with_nonces(
        pp,
        &sc(inst.m),
        &c1,
        &CommitmentKey(sc(inst.r1)),
        &c2,
        &CommitmentKey(sc(inst.r2)),
        inst.s.map(sc),
    )
    .map_err(|e| e.to_string())?;

    let a1 = commit_oracle(inst.s[0], inst.s[1]);
    let a2 = commit_oracle(inst.s[0], inst.s[2]);
    let d = hash_to_zq(
        &pp.nizk_domain_tag,
        &[&o1.to_be_bytes(), &o2.to_be_bytes(), &a1.to_be_bytes(), &a2.to_be_bytes()],
        q,
    );
    let b1 = (mul_mod(d, inst.m, q) + inst.s[0]) % q;
    let b2 = (mul_mod(d, inst.r1, q) + inst.s[1]) % q;
    let b3 = (mul_mod(d, inst.r2, q) + inst.s[2]) % q;
    if (proof.alpha1.value(), proof.alpha2.value()) != (a1, a2)
        || (proof.beta1.value(), proof.beta2.value(), proof.beta3.value()) != (b1, b2, b3)
    {
        return Err(format!("transcript mismatch at d={d}"));
    }

    // Verification equations evaluated directly, on the honest proof and on
    // a mutated one.
    let eq_oracle = |pr: &EqualityProof<Toy<M>>, c1: u64, c2: u64| {
        let d = hash_to_zq(
            &pp.nizk_domain_tag,
            &[
                &c1.to_be_bytes(),
                &c2.to_be_bytes(),
                &pr.alpha1.value().to_be_bytes(),
                &pr.alpha2.value().to_be_bytes(),
            ],
            q,
        );
        mul_mod(pr.alpha1.value(), pow_mod(c1, d, p), p) == commit_oracle(pr.beta1.value(), pr.beta2.value())
            && mul_mod(pr.alpha2.value(), pow_mod(c2, d, p), p) == commit_oracle(pr.beta1.value(), pr.beta3.value())
    };
    if !verify_eq(pp, &c1, &c2, &proof) || !eq_oracle(&proof, o1, o2) {
        return Err("honest proof rejected".into());
    }
    let mut bent = proof;
    match rng.gen_range(0..5) {
        0 => bent.beta1 = sc(rng.gen_range(0..q)),
        1 => bent.beta2 = sc(rng.gen_range(0..q)),
        2 => bent.beta3 = sc(rng.gen_range(0..q)),
        3 => bent.alpha1 = random_element::<M>(rng),
        _ => bent.alpha2 = random_element::<M>(rng),
    }
    if verify_eq(pp, &c1, &c2, &bent) != eq_oracle(&bent, o1, o2) {
        return Err("verify_eq disagrees with oracle on a mutated proof".into());
    }
    let c3 = Commitment(random_element::<M>(rng));
    if verify_eq(pp, &c1, &c3, &proof) != eq_oracle(&proof, o1, c3.0.value()) {
        return Err("verify_eq disagrees with oracle on a swapped commitment".into());
    }
    Ok(())
}

pub fn random_element<M: ToyModulus>(rng: &mut impl RngCore) -> ToyElement<M> {
    loop {
        let v = rng.gen_range(2..M::P - 1);
        if let Some(e) = ToyElement::from_residue(mul_mod(v, v, M::P)) {
            return e;
        }
    }
}

/// `log_g h`, recovered by exhaustive search.
pub fn trapdoor<M: ToyModulus>(pp: &PublicParams<Toy<M>>) -> u64 {
    brute_dlog(pp.g.value(), pp.h.value(), M::P, M::Q).expect("h lies in the subgroup generated by g")
}

/// The committed message of `c` given its randomness, found by exhaustive
/// search.
pub fn brute_open<M: ToyModulus>(pp: &PublicParams<Toy<M>>, c: &Commitment<Toy<M>>, r: u64) -> u64 {
    let h_r = pow_mod(pp.h.value(), r, M::P);
    let h_r_inv = pow_mod(h_r, M::P - 2, M::P);
    brute_dlog(pp.g.value(), mul_mod(c.0.value(), h_r_inv, M::P), M::P, M::Q).expect("subgroup element")
}

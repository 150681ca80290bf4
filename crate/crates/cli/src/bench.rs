//! Microbenchmarks of the cryptographic building blocks and end-to-end
//! sign/verify timings over synthetic repositories.

use std::collections::BTreeMap;
use std::hint::black_box;
use std::time::Instant;

use rand::{CryptoRng, RngCore};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use speranza_core::cocommit::{coco_commit, coco_prove, coco_verify};
use speranza_core::group::{id_scalar, PrimeGroup, Ristretto};
use speranza_core::identity::{digsig_verify, SigKeypair, Timestamp};
use speranza_core::pedersen::{self, Commitment, PublicParams};
use speranza_core::protocols::{attest_artifact, register_package, verify_package, Deployment, Repository, SignatureBundle, User};
use speranza_core::record::{artifact_digest, AuthRecord, Authority, Policy, DIGEST_LEN};

pub const MIN_TRIALS: usize = 10;
const WARMUP: usize = 3;

pub const OP_SIGNATURE: &str = "ed25519_signature";
pub const OP_COMMITMENT: &str = "pedersen_commitment";
pub const OP_EQUALITY: &str = "equality_proof";
pub const OP_COCOMMIT: &str = "co_commitment";

/// Median timings of one operation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpStats {
    pub create_us: f64,
    pub verify_us: f64,
    pub samples: usize,
    /// Statistic reported in `create_us` and `verify_us`.
    pub median: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Sizes {
    pub proof_bytes: usize,
    pub digest_bytes: usize,
    pub bundle_bytes: usize,
    pub lookup_proof_bytes: usize,
    pub certificate_bytes: usize,
}

/// End-to-end costs at one repository size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct E2eRow {
    pub packages: usize,
    pub init_ms: f64,
    pub sign_us: f64,
    pub verify_us: f64,
    pub lookup_verify_us: f64,
    pub lookup_proof_mean_bytes: f64,
    pub lookup_proof_max_bytes: usize,
    pub digest_bytes: usize,
    pub bundle_bytes: usize,
    pub samples: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub ops: BTreeMap<String, OpStats>,
    pub sizes: Sizes,
    pub repo_scale: usize,
    pub e2e: Vec<E2eRow>,
}

pub fn median(xs: &mut [f64]) -> f64 {
    assert!(!xs.is_empty());
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    }
}

/// Times `op` on inputs from `setup`, `trials` times after a short warm-up,
/// and returns the median in microseconds.
fn time_us<S, T>(trials: usize, mut setup: impl FnMut() -> S, mut op: impl FnMut(&S) -> T) -> f64 {
    for _ in 0..WARMUP {
        black_box(op(&setup()));
    }
    let mut xs: Vec<f64> = (0..trials)
        .map(|_| {
            let input = setup();
            let t = Instant::now();
            black_box(op(&input));
            t.elapsed().as_secs_f64() * 1e6
        })
        .collect();
    median(&mut xs)
}

fn stats(trials: usize, create_us: f64, verify_us: f64) -> OpStats {
    OpStats {
        create_us,
        verify_us,
        samples: trials,
        median: true,
    }
}

/// The four rows of the cryptographic microbenchmark: signatures,
/// commitments, equality proofs, and co-commitments (commit plus equality
/// proof to an existing commitment; verification checks the proof and the
/// opening).
pub fn bench_micro<R: RngCore + CryptoRng>(rng: &mut R, trials: usize) -> BTreeMap<String, OpStats> {
    assert!(trials >= MIN_TRIALS, "need at least {MIN_TRIALS} trials");
    let pp = PublicParams::<Ristretto>::generate();
    let id = "bench@example.com";
    let m = id_scalar::<Ristretto>(id);
    let mut out = BTreeMap::new();
    let msg = [7u8; 64];

    let kp = SigKeypair::generate(rng);
    let sig = kp.sign(&msg);
    out.insert(
        OP_SIGNATURE.into(),
        stats(
            trials,
            time_us(trials, || (), |_| kp.sign(&msg)),
            time_us(trials, || (), |_| digsig_verify(&kp.public(), &msg, &sig)),
        ),
    );

    let (c, r) = pedersen::commit(&pp, &m, rng);
    out.insert(
        OP_COMMITMENT.into(),
        stats(
            trials,
            time_us(trials, || (), |_| pedersen::commit(&pp, &m, rng)),
            time_us(trials, || (), |_| pedersen::verify(&pp, &m, &c, &r)),
        ),
    );

    let (c2, r2) = pedersen::commit(&pp, &m, rng);
    let proof = pedersen::prove_eq(&pp, &m, &c, &r, &c2, &r2, rng).expect("same message");
    out.insert(
        OP_EQUALITY.into(),
        stats(
            trials,
            time_us(trials, || (), |_| pedersen::prove_eq(&pp, &m, &c, &r, &c2, &r2, rng)),
            time_us(trials, || (), |_| pedersen::verify_eq(&pp, &c, &c2, &proof)),
        ),
    );

    let create = time_us(
        trials,
        || (),
        |_| {
            let (cn, rn) = coco_commit(&pp, id, rng);
            coco_prove(&pp, id, &c, &r, &cn, &rn, rng)
        },
    );
    let (cn, rn) = coco_commit(&pp, id, rng);
    let link = coco_prove(&pp, id, &c, &r, &cn, &rn, rng).expect("same identity");
    let verify = time_us(
        trials,
        || (),
        |_| pedersen::verify_eq(&pp, &c, &cn, &link) && coco_verify(&pp, id, &cn, &rn),
    );
    out.insert(OP_COCOMMIT.into(), stats(trials, create, verify));
    out
}

/// `n` distinct single-owner policies for `pkg-0000000` and onward. Owner
/// commitments are consecutive multiples of `h` offset from a hashed base,
/// built in parallel chunks; only their encodings matter to the record.
pub fn synthetic_entries(pp: &PublicParams<Ristretto>, n: usize) -> Vec<(String, Policy<Ristretto>)> {
    const CHUNK: usize = 4096;
    let base = Ristretto::hash_to_element(b"speranza/bench/synthetic/v1", b"base");
    (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .flat_map_iter(|chunk| {
            let start = chunk * CHUNK;
            let end = (start + CHUNK).min(n);
            let mut acc = Ristretto::op(&base, &Ristretto::exp(&pp.h, &Ristretto::scalar_from_u64(start as u64)));
            (start..end).map(move |i| {
                let owner = Commitment(acc);
                acc = Ristretto::op(&acc, &pp.h);
                (format!("pkg-{i:07}"), Policy::SingleOwner { owner })
            })
        })
        .collect()
}

/// A deployment whose record starts with `n` synthetic packages. Returns
/// the deployment and the time spent building the record.
pub fn synthetic_deployment<R: RngCore + CryptoRng>(n: usize, monitors: usize, rng: &mut R) -> (Deployment<Ristretto>, f64) {
    let fresh = Deployment::<Ristretto>::new(0, rng);
    let authority = Authority {
        pp: fresh.pp().clone(),
        ca_pk: fresh.ca_pk(),
    };
    let t = Instant::now();
    let entries = synthetic_entries(&authority.pp, n);
    let record = AuthRecord::initialize(authority, entries).expect("distinct synthetic names");
    let init_ms = t.elapsed().as_secs_f64() * 1e3;
    let monitor_keys = (0..monitors).map(|_| SigKeypair::generate(rng)).collect();
    let repo = Repository::new(record, fresh.idp.public_key());
    (Deployment::from_parts(fresh.idp, fresh.ca, repo, monitor_keys), init_ms)
}

/// End-to-end sign and verify over a repository of `n` synthetic packages
/// plus one real one. Signing covers the signer's whole flow up to an
/// assembled bundle; verification includes the lookup proof.
pub fn bench_e2e<R: RngCore + CryptoRng>(n: usize, trials: usize, rng: &mut R) -> E2eRow {
    let (mut d, init_ms) = synthetic_deployment(n, 3, rng);
    e2e_on(&mut d, n, init_ms, trials, rng)
}

pub fn e2e_on<R: RngCore + CryptoRng>(d: &mut Deployment<Ristretto>, n: usize, init_ms: f64, trials: usize, rng: &mut R) -> E2eRow {
    assert!(trials >= MIN_TRIALS);
    let now = Timestamp(1_700_000_000);
    let user = User::enroll(&mut d.repo, "bench@example.com", rng).expect("fresh account");
    let package = "bench-target";
    register_package(d, &user, package, rng, now).expect("registration");
    let digest = d.sync_monitors().expect("honest monitors");
    let artifact = vec![0x5a; 4096];
    let pkg_digest = artifact_digest(&artifact);

    let d_ref = &*d;
    let sign_us = time_us(
        trials,
        || (),
        |_| {
            let att = attest_artifact(d_ref, &user, package, &pkg_digest, rng, now).expect("signer is owner");
            let (policy, lookup_proof) = d_ref.repo.lookup(package);
            let dg = d_ref.repo.digest();
            SignatureBundle {
                package_digest: pkg_digest,
                attestations: vec![att],
                policy: policy.expect("registered"),
                lookup_proof,
                digest_ref: (dg.root, dg.epoch),
            }
        },
    );
    let bundle = d
        .repo
        .publish(
            package,
            pkg_digest,
            vec![attest_artifact(d, &user, package, &pkg_digest, rng, now).expect("owner")],
            now,
        )
        .expect("authorized");
    let verify_us = time_us(
        trials,
        || (),
        |_| verify_package(&d.ca_pk(), d.pp(), &digest, package, &artifact, &bundle).expect("honest bundle"),
    );
    let lookup_verify_us = time_us(
        trials,
        || (),
        |_| speranza_core::record::verify_lookup(&digest, package, Some(&bundle.policy), &bundle.lookup_proof),
    );

    let (mean, max) = lookup_proof_sizes(d, n, 2000, rng);
    E2eRow {
        packages: n,
        init_ms,
        sign_us,
        verify_us,
        lookup_verify_us,
        lookup_proof_mean_bytes: mean,
        lookup_proof_max_bytes: max,
        digest_bytes: digest.root.len(),
        bundle_bytes: bundle.to_bytes().len(),
        samples: trials,
    }
}

/// Mean and maximum encoded lookup proof size over `samples` random
/// synthetic packages.
pub fn lookup_proof_sizes<R: RngCore>(d: &Deployment<Ristretto>, n: usize, samples: usize, rng: &mut R) -> (f64, usize) {
    if n == 0 {
        let len = d.repo.lookup("pkg-0000000").1.encoded_len();
        return (len as f64, len);
    }
    let sizes: Vec<usize> = (0..samples)
        .map(|_| {
            let i = (rng.next_u64() % n as u64) as usize;
            d.repo.lookup(&format!("pkg-{i:07}")).1.encoded_len()
        })
        .collect();
    let mean = sizes.iter().sum::<usize>() as f64 / sizes.len() as f64;
    (mean, sizes.into_iter().max().unwrap_or(0))
}

/// Repository sizes for the e2e sweep: powers of ten from 10^3 up to
/// `max`, plus `max` itself.
pub fn e2e_scales(max: usize) -> Vec<usize> {
    let mut v: Vec<usize> = std::iter::successors(Some(1000usize), |x| x.checked_mul(10))
        .take_while(|x| *x <= max)
        .collect();
    if v.last() != Some(&max) {
        v.push(max);
    }
    v
}

pub fn run<R: RngCore + CryptoRng>(packages: usize, trials: usize, rng: &mut R) -> BenchReport {
    let ops = bench_micro(rng, trials);
    let e2e: Vec<E2eRow> = e2e_scales(packages).into_iter().map(|n| bench_e2e(n, trials, rng)).collect();
    let last = e2e.last().expect("at least one scale");
    let sizes = Sizes {
        proof_bytes: pedersen::EqualityProof::<Ristretto>::SIZE,
        digest_bytes: DIGEST_LEN,
        bundle_bytes: last.bundle_bytes,
        lookup_proof_bytes: last.lookup_proof_mean_bytes.round() as usize,
        certificate_bytes: speranza_core::identity::Certificate::<Ristretto>::SIZE,
    };
    BenchReport {
        ops,
        sizes,
        repo_scale: packages,
        e2e,
    }
}

impl BenchReport {
    /// Aligned plain-text rendering.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!(
            "{:<22} {:>12} {:>12} {:>8}\n",
            "operation", "create (us)", "verify (us)", "samples"
        ));
        for (name, o) in &self.ops {
            s.push_str(&format!(
                "{:<22} {:>12.1} {:>12.1} {:>8}\n",
                name, o.create_us, o.verify_us, o.samples
            ));
        }
        s.push('\n');
        s.push_str(&format!(
            "{:>10} {:>12} {:>10} {:>12} {:>14} {:>12} {:>8}\n",
            "packages", "init (ms)", "sign (us)", "verify (us)", "lookup mean B", "lookup max B", "digest B"
        ));
        for r in &self.e2e {
            s.push_str(&format!(
                "{:>10} {:>12.1} {:>10.1} {:>12.1} {:>14.1} {:>12} {:>8}\n",
                r.packages, r.init_ms, r.sign_us, r.verify_us, r.lookup_proof_mean_bytes, r.lookup_proof_max_bytes, r.digest_bytes
            ));
        }
        s.push('\n');
        let z = &self.sizes;
        s.push_str(&format!(
            "sizes: equality proof {} B, digest {} B, certificate {} B, lookup proof {} B, bundle {} B (at {} packages)\n",
            z.proof_bytes, z.digest_bytes, z.certificate_bytes, z.lookup_proof_bytes, z.bundle_bytes, self.repo_scale
        ));
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;
    use std::collections::BTreeSet;

    #[test]
    fn median_of_odd_and_even_samples() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 3.0, 2.0]), 2.5);
    }

    #[test]
    fn scales_are_powers_of_ten_capped_by_max() {
        assert_eq!(e2e_scales(1000), vec![1000]);
        assert_eq!(e2e_scales(25_000), vec![1000, 10_000, 25_000]);
        assert_eq!(e2e_scales(1_000_000), vec![1000, 10_000, 100_000, 1_000_000]);
        assert_eq!(e2e_scales(10), vec![10]);
    }

    #[test]
    fn synthetic_entries_are_distinct_across_chunks() {
        let pp = PublicParams::<Ristretto>::generate();
        let entries = synthetic_entries(&pp, 9000);
        assert_eq!(entries.len(), 9000);
        assert_eq!(entries[4097].0, "pkg-0004097");
        let owners: BTreeSet<_> = entries
            .iter()
            .map(|(_, p)| match p {
                Policy::SingleOwner { owner } => owner.encode(),
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(owners.len(), 9000);
        // Chunking does not change the sequence.
        let small = synthetic_entries(&pp, 10);
        assert_eq!(small[..], entries[..10]);
    }

    #[test]
    fn micro_rows_cover_the_four_operations() {
        let ops = bench_micro(&mut ChaCha20Rng::seed_from_u64(1), MIN_TRIALS);
        let names: Vec<_> = ops.keys().map(String::as_str).collect();
        assert_eq!(names, [OP_COCOMMIT, OP_SIGNATURE, OP_EQUALITY, OP_COMMITMENT]);
        assert!(ops
            .values()
            .all(|o| o.samples == MIN_TRIALS && o.median && o.create_us > 0.0 && o.verify_us > 0.0));
    }

    #[test]
    fn e2e_row_reports_constant_digest() {
        let row = bench_e2e(100, MIN_TRIALS, &mut ChaCha20Rng::seed_from_u64(2));
        assert_eq!(row.packages, 100);
        assert_eq!(row.digest_bytes, 64);
        assert!(row.lookup_proof_max_bytes as f64 >= row.lookup_proof_mean_bytes);
        assert!(row.bundle_bytes > row.lookup_proof_max_bytes / 2);
    }
}

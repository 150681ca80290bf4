use super::*;
use crate::cocommit::{coco_commit, coco_prove, coco_verify};
use crate::group::{Ristretto, Toy1019};
use crate::identity::{CertificateAuthority, IdentityProvider};
use crate::pedersen::PublicParams;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

const NOW: Timestamp = Timestamp(1_700_000_000);

struct World<G: PrimeGroup> {
    idp: IdentityProvider,
    ca: CertificateAuthority<G>,
    pp: PublicParams<G>,
    rng: ChaCha20Rng,
}

impl<G: PrimeGroup> World<G> {
    fn new(seed: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let idp = IdentityProvider::new(&mut rng);
        let pp = PublicParams::generate();
        let ca = CertificateAuthority::new(SigKeypair::generate(&mut rng), pp.clone(), idp.public_key());
        Self { idp, ca, pp, rng }
    }

    fn authority(&self) -> Authority<G> {
        Authority {
            pp: self.pp.clone(),
            ca_pk: self.ca.public_key(),
        }
    }

    fn cert(&mut self, id: &str, now: Timestamp) -> (SigKeypair, Certificate<G>, CommitmentKey<G>) {
        let signer = SigKeypair::generate(&mut self.rng);
        let tok = self.idp.issue(id, CertificateAuthority::<G>::AUDIENCE, now).unwrap();
        let (cert, r) = self.ca.issue(&tok, &signer.public(), now, &mut self.rng).unwrap();
        (signer, cert, r)
    }

    fn registration(&mut self, id: &str, package: &str, epoch: u64, now: Timestamp) -> RegistrationRequest<G> {
        let (signer, cert, key) = self.cert(id, now);
        RegistrationRequest {
            evidence: RegistrationEvidence {
                cert,
                signed_at: now,
                sig: signer.sign(&register_message(package, epoch, now)),
            },
            key,
        }
    }

    fn attest(&mut self, id: &str, slot: u32, (c, r): (Commitment<G>, CommitmentKey<G>), message: &[u8], now: Timestamp) -> Attestation<G> {
        let (signer, cert, r_cert) = self.cert(id, now);
        let proof = coco_prove(&self.pp, id, &c, &r, &cert.subject, &r_cert, &mut self.rng).unwrap();
        Attestation {
            cert,
            signed_at: now,
            sig: signer.sign(message),
            proof,
            slot,
        }
    }

    fn member(&mut self, id: &str) -> (Commitment<G>, CommitmentKey<G>) {
        coco_commit(&self.pp, id, &mut self.rng)
    }
}

fn registered(w: &mut World<Ristretto>, owners: &[(&str, &str)]) -> AuthRecord<Ristretto> {
    let mut rec = AuthRecord::new(w.authority());
    for (id, pkg) in owners {
        let req = w.registration(id, pkg, rec.public().epoch(), NOW);
        rec.register(pkg, req, NOW).unwrap();
    }
    rec
}

#[test]
fn empty_record_digest_is_empty_trie_root() {
    let w = World::<Ristretto>::new(1);
    let rec = AuthRecord::initialize(w.authority(), vec![]).unwrap();
    assert_eq!(rec.digest().root, trie::empty_hash());
    assert_eq!(rec.digest().epoch, 0);
    assert_eq!(rec.digest().root.len(), DIGEST_LEN);
}

#[test]
fn initialized_entries_look_up_with_proofs() {
    let mut w = World::<Ristretto>::new(2);
    let entries: Vec<_> = ["a", "b", "c"]
        .iter()
        .map(|p| (String::from(*p), Policy::SingleOwner { owner: w.member(p).0 }))
        .collect();
    let rec = PublicRecord::initialize(w.authority(), entries.clone()).unwrap();
    let d = rec.digest();
    for (pkg, policy) in &entries {
        let (got, proof) = rec.lookup(pkg);
        assert_eq!(got.as_ref(), Some(policy));
        assert!(verify_lookup(&d, pkg, got.as_ref(), &proof));
        assert!(!verify_lookup::<Ristretto>(&d, pkg, None, &proof));
    }
    let (got, proof) = rec.lookup("missing");
    assert!(got.is_none());
    assert!(verify_lookup::<Ristretto>(&d, "missing", None, &proof));

    let mut dup = entries.clone();
    dup.push(entries[0].clone());
    assert_eq!(
        PublicRecord::initialize(w.authority(), dup).unwrap_err(),
        RecordError::DuplicatePackage
    );
}

#[test]
fn registration_stores_an_opening_for_the_registrant() {
    fn run<G: PrimeGroup>() {
        let mut w = World::<G>::new(3);
        let mut rec = AuthRecord::new(w.authority());
        let req = w.registration("alice@example.com", "foo", 0, NOW);
        let ev = rec.register("foo", req, NOW).unwrap().clone();
        assert_eq!(ev.kind(), EventKind::Register);
        let Some(Policy::SingleOwner { owner }) = rec.public().policy("foo") else {
            panic!("expected single owner")
        };
        let (c, r) = rec.private_keys("foo")[0];
        assert_eq!(c, *owner);
        assert!(coco_verify(&w.pp, "alice@example.com", owner, &r));
        assert!(!coco_verify(&w.pp, "mallory@example.com", owner, &r));
    }
    run::<Ristretto>();
    run::<Toy1019>();
}

#[test]
fn registration_failures() {
    let mut w = World::<Ristretto>::new(4);
    let mut rec = registered(&mut w, &[("alice@example.com", "foo")]);
    let before = rec.digest();

    let again = w.registration("bob@example.com", "foo", 1, NOW);
    assert_eq!(rec.register("foo", again, NOW).unwrap_err(), RecordError::DuplicatePackage);

    // Signed by a key the certificate does not name.
    let mut mismatched = w.registration("bob@example.com", "bar", 1, NOW);
    let stranger = SigKeypair::generate(&mut w.rng);
    mismatched.evidence.sig = stranger.sign(&register_message("bar", 1, NOW));
    assert_eq!(rec.register("bar", mismatched, NOW).unwrap_err(), RecordError::BadSignature);

    // A registration message for "baz" replayed for "bar".
    let for_baz = w.registration("bob@example.com", "baz", 1, NOW);
    assert_eq!(rec.register("bar", for_baz, NOW).unwrap_err(), RecordError::BadSignature);

    // A message bound to an older epoch.
    let stale_epoch = w.registration("bob@example.com", "bar", 0, NOW);
    assert_eq!(rec.register("bar", stale_epoch, NOW).unwrap_err(), RecordError::BadSignature);

    let expired = w.registration("bob@example.com", "bar", 1, NOW);
    assert_eq!(
        rec.register("bar", expired, NOW.plus(CERT_VALIDITY_SECS + 1)).unwrap_err(),
        RecordError::Certificate(CertError::OutsideValidity)
    );

    assert_eq!(rec.digest(), before);
    assert_eq!(rec.log().len(), 1);
}

use crate::identity::CERT_VALIDITY_SECS;

#[test]
fn threshold_publish_counts_distinct_linkages() {
    let mut w = World::<Ristretto>::new(5);
    let ids = ["a@x", "b@x", "c@x"];
    let members: Vec<_> = ids.iter().map(|id| w.member(id)).collect();
    let policy = Policy::Threshold {
        signers: members.iter().map(|m| m.0).collect(),
        threshold: 2,
    };
    let digest = artifact_digest(b"release");
    let msg = artifact_message(&digest, NOW);
    let atts: Vec<_> = (0..3).map(|i| w.attest(ids[i], i as u32, members[i], &msg, NOW)).collect();
    let auth = w.authority();

    assert!(auth.check_publish(&policy, &digest, &atts[..2]));
    assert!(auth.check_publish(&policy, &digest, &[atts[0], atts[2]]));
    assert!(!auth.check_publish(&policy, &digest, &atts[..1]));
    // The same signer twice, even through two fresh certificates.
    let twice = w.attest(ids[0], 0, members[0], &msg, NOW);
    assert!(!auth.check_publish(&policy, &digest, &[atts[0], twice]));
    // A valid linkage pointed at someone else's slot does not count.
    let mut wrong_slot = atts[1];
    wrong_slot.slot = 2;
    assert!(!auth.check_publish(&policy, &digest, &[atts[0], wrong_slot]));
    // Out-of-range slots are ignored.
    let mut oob = atts[1];
    oob.slot = 9;
    assert!(!auth.check_publish(&policy, &digest, &[atts[0], oob]));
    // Different artifact.
    assert!(!auth.check_publish(&policy, &artifact_digest(b"other"), &atts));
}

#[test]
fn head_signer_change_rules() {
    let mut w = World::<Ristretto>::new(6);
    let mut rec = registered(&mut w, &[("alice@x", "pkg")]);
    let (owner, owner_key) = rec.private_keys("pkg")[0];
    let bob = w.member("bob@x");
    let carol = w.member("carol@x");

    // Alice hands the package to a head-signer policy with Bob and Carol.
    let head_policy = Policy::HeadSigner {
        head: owner,
        signers: vec![owner, bob.0, carol.0],
    };
    let msg = change_message("pkg", 1, &head_policy, NOW);
    let att = w.attest("alice@x", 0, (owner, owner_key), &msg, NOW);
    rec.update("pkg", head_policy.clone(), vec![att], vec![bob, carol], NOW).unwrap();
    assert_eq!(rec.lookup("pkg").0, Some(head_policy.clone()));
    assert_eq!(rec.private_keys("pkg").len(), 3);

    // Bob may publish.
    let digest = artifact_digest(b"v2");
    let pub_att = w.attest("bob@x", 1, bob, &artifact_message(&digest, NOW), NOW);
    assert!(w.authority().check_publish(&head_policy, &digest, &[pub_att]));

    // Bob may not change the policy.
    let takeover = Policy::SingleOwner { owner: bob.0 };
    let msg = change_message("pkg", 2, &takeover, NOW);
    let bob_att = w.attest("bob@x", 0, bob, &msg, NOW);
    let before = rec.digest();
    assert_eq!(
        rec.update("pkg", takeover.clone(), vec![bob_att], vec![], NOW).unwrap_err(),
        RecordError::Unauthorized
    );
    assert_eq!(rec.digest(), before);

    // Alice's approval of one policy cannot be reused for another.
    let approved = Policy::SingleOwner { owner: carol.0 };
    let alice_att = w.attest("alice@x", 0, (owner, owner_key), &change_message("pkg", 2, &approved, NOW), NOW);
    assert_eq!(
        rec.update("pkg", takeover, vec![alice_att], vec![], NOW).unwrap_err(),
        RecordError::Unauthorized
    );
    rec.update("pkg", approved.clone(), vec![alice_att], vec![], NOW).unwrap();
    assert_eq!(rec.lookup("pkg").0, Some(approved));
    // Dropped commitments lose their keys.
    assert_eq!(rec.private_keys("pkg").len(), 1);
    assert_eq!(rec.private_keys("pkg")[0].0, carol.0);
}

#[test]
fn update_of_unknown_package_fails() {
    let mut w = World::<Ristretto>::new(7);
    let mut rec = registered(&mut w, &[("alice@x", "pkg")]);
    let p = Policy::SingleOwner { owner: w.member("z").0 };
    assert_eq!(rec.update("nope", p, vec![], vec![], NOW).unwrap_err(), RecordError::UnknownPackage);
}

#[test]
fn stale_lookup_proof_fails_after_update() {
    let mut w = World::<Ristretto>::new(8);
    let mut rec = registered(&mut w, &[("alice@x", "pkg"), ("bob@x", "other")]);
    let old_digest = rec.digest();
    let (old_policy, old_proof) = rec.lookup("pkg");
    assert!(verify_lookup(&old_digest, "pkg", old_policy.as_ref(), &old_proof));

    let key = rec.private_keys("pkg")[0];
    let next = Policy::SingleOwner {
        owner: w.member("alice@x").0,
    };
    let att = w.attest("alice@x", 0, key, &change_message("pkg", 2, &next, NOW), NOW);
    rec.update("pkg", next, vec![att], vec![], NOW).unwrap();
    assert_ne!(rec.digest().root, old_digest.root);
    assert!(!verify_lookup(&rec.digest(), "pkg", old_policy.as_ref(), &old_proof));
}

#[test]
fn digest_binds_one_policy_per_package() {
    let mut w = World::<Ristretto>::new(9);
    let rec = registered(&mut w, &[("alice@x", "pkg"), ("bob@x", "other")]);
    let d = rec.digest();
    let (real, proof) = rec.lookup("pkg");
    let fake = Policy::SingleOwner {
        owner: w.member("mallory@x").0,
    };
    assert!(verify_lookup(&d, "pkg", real.as_ref(), &proof));
    assert!(!verify_lookup(&d, "pkg", Some(&fake), &proof));
    assert!(!verify_lookup::<Ristretto>(&d, "pkg", None, &proof));
    // Nor can the proof for another package stand in.
    let (_, other_proof) = rec.lookup("other");
    assert!(!verify_lookup(&d, "pkg", real.as_ref(), &other_proof));
    assert!(!verify_lookup::<Ristretto>(&d, "pkg", None, &other_proof));
}

#[test]
fn log_replay_reproduces_digest_and_insertion_order_is_irrelevant() {
    let mut w = World::<Ristretto>::new(10);
    let names = ["a", "b", "c", "d"];
    let rec = registered(&mut w, &names.map(|n| ("alice@x", n)));
    let mut replay = rec.genesis().clone();
    for ev in rec.log() {
        let decoded = UpdateEvent::from_bytes(&ev.to_bytes()).unwrap();
        assert_eq!(&decoded, ev);
        replay.apply(&decoded).unwrap();
    }
    assert_eq!(replay.digest(), rec.digest());

    let snapshot: Vec<_> = rec.public().entries().map(|e| (e.package.clone(), e.policy.clone())).collect();
    let mut reversed = snapshot.clone();
    reversed.reverse();
    let a = PublicRecord::initialize(w.authority(), snapshot).unwrap();
    let b = PublicRecord::initialize(w.authority(), reversed).unwrap();
    assert_eq!(a.root(), rec.digest().root);
    assert_eq!(b.root(), rec.digest().root);

    let restored = PublicRecord::from_bytes(w.authority(), &rec.public().to_bytes()).unwrap();
    assert_eq!(restored.digest(), rec.digest());
}

#[test]
fn apply_rejects_out_of_sequence_events() {
    let mut w = World::<Ristretto>::new(11);
    let rec = registered(&mut w, &[("alice@x", "a"), ("bob@x", "b")]);
    let mut state = rec.genesis().clone();
    assert_eq!(state.apply(&rec.log()[1]), Err(RecordError::EpochMismatch));
    let mut wrong_prev = rec.log()[0].clone();
    wrong_prev.prev_root[0] ^= 1;
    assert_eq!(state.apply(&wrong_prev), Err(RecordError::PrevRootMismatch));
    let mut wrong_new = rec.log()[0].clone();
    wrong_new.new_root[0] ^= 1;
    assert_eq!(state.apply(&wrong_new), Err(RecordError::NewRootMismatch));
    assert_eq!(state.digest(), rec.genesis().digest());
}

#[test]
fn monitors_replay_and_catch_violations() {
    let mut w = World::<Ristretto>::new(12);
    let rec = registered(&mut w, &[("alice@x", "a"), ("bob@x", "b"), ("carol@x", "c")]);
    let mon = SigKeypair::generate(&mut w.rng);
    let genesis = rec.genesis().digest();

    let (signed, sig) = monitor_replay(&mon, rec.genesis(), &genesis, rec.log(), &rec.digest()).unwrap();
    assert_eq!(signed.root, rec.digest().root);
    assert!(digsig_verify(
        &mon.public(),
        &Digest::signing_payload(&signed.root, signed.epoch),
        &sig
    ));

    // A forged registration (signature by a stranger) injected at index 1.
    let mut events = rec.log().to_vec();
    if let Evidence::Register(e) = &mut events[1].evidence {
        e.sig = SigKeypair::generate(&mut w.rng).sign(b"anything");
    }
    let report = monitor_replay(&mon, rec.genesis(), &genesis, &events, &rec.digest()).unwrap_err();
    assert_eq!(report.index, 1);
    assert_eq!(report.kind, Violation::Transition(RecordError::BadSignature));

    // An equivocated final digest.
    let mut claimed = rec.digest();
    claimed.root[7] ^= 1;
    let report = monitor_replay(&mon, rec.genesis(), &genesis, rec.log(), &claimed).unwrap_err();
    assert_eq!(report.index, 3);
    assert_eq!(report.kind, Violation::DigestMismatch);

    let mut bad_genesis = genesis.clone();
    bad_genesis.epoch = 5;
    assert_eq!(
        monitor_replay(&mon, rec.genesis(), &bad_genesis, rec.log(), &rec.digest())
            .unwrap_err()
            .kind,
        Violation::GenesisMismatch
    );
}

#[test]
fn quorum_counts_distinct_valid_monitors() {
    let mut w = World::<Ristretto>::new(13);
    let rec = registered(&mut w, &[("alice@x", "a")]);
    let keys: Vec<_> = (0..3).map(|_| SigKeypair::generate(&mut w.rng)).collect();
    let pks: Vec<_> = keys.iter().map(SigKeypair::public).collect();
    let monitors: Vec<_> = keys
        .iter()
        .map(|k| {
            let mut m = Monitor::new(k.clone(), rec.genesis().clone());
            for ev in rec.log() {
                m.observe(ev).unwrap();
            }
            m
        })
        .collect();

    let mut d = rec.digest();
    assert!(gather_signatures(&mut d, &monitors[..2]).is_empty());
    assert!(quorum_check(&d, &pks, 2));
    assert!(!quorum_check(&d, &pks, 3));
    assert_eq!(Digest::from_bytes(&d.to_bytes()).unwrap(), d);

    let mut dup = rec.digest();
    let sig = dup.sign_as(&keys[0]);
    dup.add_signature(pks[0], sig);
    dup.add_signature(pks[0], sig);
    assert!(!quorum_check(&dup, &pks, 2));

    let mut other_epoch = rec.digest();
    let stale = Digest::new(other_epoch.root, other_epoch.epoch + 1).sign_as(&keys[1]);
    other_epoch.add_signature(pks[0], sig);
    other_epoch.add_signature(pks[1], stale);
    assert!(!quorum_check(&other_epoch, &pks, 2));

    // Signatures from keys outside the monitor set are ignored.
    let outsider = SigKeypair::generate(&mut w.rng);
    let mut d2 = rec.digest();
    d2.add_signature(pks[0], sig);
    d2.add_signature(outsider.public(), d2.sign_as(&outsider));
    assert!(!quorum_check(&d2, &pks, 2));
}

#[test]
fn public_record_bytes_hide_identities_and_keys() {
    let mut w = World::<Ristretto>::new(14);
    let ids = ["alice@example.com", "bob@example.com"];
    let rec = registered(&mut w, &[(ids[0], "a"), (ids[1], "b")]);
    let mut public = rec.public().to_bytes();
    public.extend(rec.digest().to_bytes());
    for ev in rec.log() {
        public.extend(ev.to_bytes());
    }
    for (_, (p, proof)) in ["a", "b"].iter().map(|p| (p, rec.lookup(p))) {
        public.extend(p.unwrap().to_bytes());
        public.extend(proof.to_bytes());
    }
    for id in ids {
        assert!(!public.windows(id.len()).any(|s| s == id.as_bytes()));
    }
    for pkg in ["a", "b"] {
        for (_, k) in rec.private_keys(pkg) {
            assert!(!public.windows(32).any(|s| s == k.to_bytes()));
        }
    }
}

//! End-to-end flows: package registration, signing, and verification, with
//! the repository as an actor and the signature bundle format.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use rand_core::CryptoRngCore;
use sha2::{Digest as _, Sha512};
use subtle::ConstantTimeEq;

use crate::cocommit::{coco_commit, coco_prove, coco_verify, CommitError};
use crate::group::PrimeGroup;
use crate::identity::{
    cert_verify, digsig_verify, oidc_verify, CaError, CertificateAuthority, IdentityProvider, PublicKey, SigKeypair, Timestamp, TokenError,
    TokenPolicy,
};
use crate::pedersen::{self, Commitment, CommitmentKey, PublicParams};
use crate::record::{
    artifact_digest, artifact_message, change_message, gather_signatures, register_message, verify_lookup, Action, Attestation, AuthRecord,
    Authority, Digest, LookupProof, Monitor, NodeHash, Policy, RecordError, RegistrationEvidence, RegistrationRequest, UpdateEvent,
    ViolationReport,
};
use crate::wire::{DecodeError, Reader, Writer};

pub const BUNDLE_MAGIC: &[u8; 5] = b"SPRZ1";
/// Audience the repository expects on identity tokens.
pub const REPO_AUDIENCE: &str = "speranza-repo";

/// Everything a verifier needs besides the CA key, the public parameters,
/// a quorum-signed digest, and the artifact itself.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignatureBundle<G: PrimeGroup> {
    pub package_digest: [u8; 64],
    pub attestations: Vec<Attestation<G>>,
    pub policy: Policy<G>,
    pub lookup_proof: LookupProof,
    pub digest_ref: (NodeHash, u64),
}

impl<G: PrimeGroup> SignatureBundle<G> {
    /// `"SPRZ1" ‖ package_digest ‖ u32 n ‖ attestation* ‖ policy ‖
    /// lookup_proof ‖ root ‖ epoch`; attestations, policy and proof are
    /// length-prefixed.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.raw(BUNDLE_MAGIC).raw(&self.package_digest).u32(self.attestations.len() as u32);
        for a in &self.attestations {
            w.bytes(&a.to_bytes());
        }
        w.bytes(&self.policy.to_bytes())
            .bytes(&self.lookup_proof.to_bytes())
            .raw(&self.digest_ref.0)
            .u64(self.digest_ref.1);
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut r = Reader::new(bytes);
        if r.raw(BUNDLE_MAGIC.len(), "bundle magic")? != BUNDLE_MAGIC {
            return Err(DecodeError::BadMagic);
        }
        let package_digest = r.array("package digest")?;
        let n = r.u32("attestation count")? as usize;
        if n > r.remaining() {
            return Err(DecodeError::Truncated("attestations"));
        }
        let attestations = (0..n)
            .map(|_| Attestation::from_bytes(r.bytes("attestation")?))
            .collect::<Result<_, _>>()?;
        let b = Self {
            package_digest,
            attestations,
            policy: Policy::from_bytes(r.bytes("policy")?)?,
            lookup_proof: LookupProof::from_bytes(r.bytes("lookup proof")?)?,
            digest_ref: (r.array("digest root")?, r.u64("digest epoch")?),
        };
        r.finish()?;
        Ok(b)
    }
}

/// The verification step that rejected a bundle, in checking order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum VerifyStep {
    Certificate,
    Lookup,
    Signature,
    CoCommitment,
}

impl fmt::Display for VerifyStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VerifyStep::Certificate => "certificate",
            VerifyStep::Lookup => "lookup",
            VerifyStep::Signature => "signature",
            VerifyStep::CoCommitment => "co-commitment",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("verification failed at the {step} step: {reason}")]
pub struct VerifyError {
    pub step: VerifyStep,
    pub reason: &'static str,
}

fn reject(step: VerifyStep, reason: &'static str) -> VerifyError {
    VerifyError { step, reason }
}

/// Checks `bundle` for `artifact` under `package`. `digest` must already
/// have passed a monitor quorum check.
///
/// Steps run in order and every attestation must pass each one: certificate
/// validity at sign time, the policy lookup against `digest`, the artifact
/// signature, and finally the equality proofs linking certificate subjects
/// to enough distinct policy commitments.
pub fn verify_package<G: PrimeGroup>(
    ca_pk: &PublicKey,
    pp: &PublicParams<G>,
    digest: &Digest,
    package: &str,
    artifact: &[u8],
    bundle: &SignatureBundle<G>,
) -> Result<(), VerifyError> {
    use VerifyStep::*;
    if bundle.attestations.is_empty() {
        return Err(reject(Certificate, "bundle carries no attestations"));
    }
    let mut subjects = Vec::with_capacity(bundle.attestations.len());
    for a in &bundle.attestations {
        subjects.push(cert_verify(ca_pk, &a.cert, a.signed_at).map_err(|_| reject(Certificate, "certificate invalid at sign time"))?);
    }

    if bundle.digest_ref != (digest.root, digest.epoch) {
        return Err(reject(Lookup, "bundle is pinned to a different digest"));
    }
    if !verify_lookup(digest, package, Some(&bundle.policy), &bundle.lookup_proof) {
        return Err(reject(Lookup, "lookup proof does not match the digest"));
    }

    if artifact_digest(artifact) != bundle.package_digest {
        return Err(reject(Signature, "artifact does not match the signed digest"));
    }
    for a in &bundle.attestations {
        if !digsig_verify(&a.cert.pk, &artifact_message(&bundle.package_digest, a.signed_at), &a.sig) {
            return Err(reject(Signature, "artifact signature invalid"));
        }
    }

    let (slots, required) = bundle.policy.slots(Action::Publish);
    let mut used = Vec::with_capacity(bundle.attestations.len());
    for (a, sub) in bundle.attestations.iter().zip(&subjects) {
        let Some(c) = slots.get(a.slot as usize) else {
            return Err(reject(CoCommitment, "attestation names no policy signer"));
        };
        if used.contains(&a.slot) {
            return Err(reject(CoCommitment, "two attestations for one signer"));
        }
        if !pedersen::verify_eq(pp, c, sub, &a.proof) {
            return Err(reject(CoCommitment, "equality proof does not link to the policy"));
        }
        used.push(a.slot);
    }
    if used.len() < required {
        return Err(reject(CoCommitment, "too few policy signers"));
    }
    Ok(())
}

/// Bearer secret for a repository account.
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct Credential(pub [u8; 32]);

impl fmt::Debug for Credential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Credential(..)")
    }
}

impl Credential {
    pub fn generate(rng: &mut impl CryptoRngCore) -> Self {
        let mut b = [0u8; 32];
        rng.fill_bytes(&mut b);
        Self(b)
    }

    pub fn hash(&self) -> [u8; 64] {
        Sha512::digest(self.0).into()
    }
}

/// An authenticated repository session.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Session {
    id: String,
}

impl Session {
    pub fn id(&self) -> &str {
        &self.id
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RepoError {
    #[error("account already exists")]
    AccountExists,
    #[error("unknown account or wrong credential")]
    BadCredential,
    #[error("identity token rejected: {0}")]
    Token(#[from] TokenError),
    #[error("token identity differs from the logged-in account")]
    TokenMismatch,
    #[error("commitment key does not open the certificate subject for this account")]
    IdentityMismatch,
    #[error("package not registered")]
    UnknownPackage,
    #[error("account is not a signer for this package")]
    NotAuthorized,
    #[error("evidence does not satisfy the package policy")]
    PublishRejected,
    #[error(transparent)]
    Record(#[from] RecordError),
}

/// Repository accounts, the authorization record, and published bundles.
#[derive(Debug, Clone)]
pub struct Repository<G: PrimeGroup> {
    record: AuthRecord<G>,
    provider_pk: PublicKey,
    token_policy: TokenPolicy,
    accounts: BTreeMap<String, [u8; 64]>,
    pending: Vec<(Commitment<G>, CommitmentKey<G>)>,
    published: BTreeMap<String, Vec<SignatureBundle<G>>>,
}

impl<G: PrimeGroup> Repository<G> {
    pub fn new(record: AuthRecord<G>, provider_pk: PublicKey) -> Self {
        Self {
            record,
            provider_pk,
            token_policy: TokenPolicy::new(REPO_AUDIENCE),
            accounts: BTreeMap::new(),
            pending: Vec::new(),
            published: BTreeMap::new(),
        }
    }

    /// Reassembles a repository from persisted parts.
    pub fn from_parts(
        record: AuthRecord<G>,
        provider_pk: PublicKey,
        accounts: BTreeMap<String, [u8; 64]>,
        pending: Vec<(Commitment<G>, CommitmentKey<G>)>,
    ) -> Self {
        Self {
            accounts,
            pending,
            ..Self::new(record, provider_pk)
        }
    }

    pub fn pending(&self) -> &[(Commitment<G>, CommitmentKey<G>)] {
        &self.pending
    }

    pub fn record(&self) -> &AuthRecord<G> {
        &self.record
    }

    pub fn authority(&self) -> &Authority<G> {
        self.record.public().authority()
    }

    pub fn digest(&self) -> Digest {
        self.record.digest()
    }

    pub fn lookup(&self, package: &str) -> (Option<Policy<G>>, LookupProof) {
        self.record.lookup(package)
    }

    pub fn create_account(&mut self, id: &str, rng: &mut impl CryptoRngCore) -> Result<Credential, RepoError> {
        let cred = Credential::generate(rng);
        self.add_account(id, cred.hash())?;
        Ok(cred)
    }

    /// Adds an account by credential hash.
    pub fn add_account(&mut self, id: &str, credential_hash: [u8; 64]) -> Result<(), RepoError> {
        if self.accounts.contains_key(id) {
            return Err(RepoError::AccountExists);
        }
        self.accounts.insert(id.into(), credential_hash);
        Ok(())
    }

    pub fn accounts(&self) -> impl Iterator<Item = (&str, &[u8; 64])> {
        self.accounts.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn login(&self, id: &str, credential: &Credential) -> Result<Session, RepoError> {
        match self.accounts.get(id) {
            Some(h) if bool::from(h[..].ct_eq(&credential.hash()[..])) => Ok(Session { id: id.into() }),
            _ => Err(RepoError::BadCredential),
        }
    }

    fn check_token(&self, session: &Session, token: &crate::identity::OidcToken, now: Timestamp) -> Result<(), RepoError> {
        let id = oidc_verify(&self.provider_pk, token, &self.token_policy, now)?;
        if id != session.id {
            return Err(RepoError::TokenMismatch);
        }
        Ok(())
    }

    /// Registers `package` to the logged-in account. The commitment key must
    /// open the certificate subject to the account's identity.
    pub fn register(
        &mut self,
        session: &Session,
        package: &str,
        req: RegistrationRequest<G>,
        now: Timestamp,
    ) -> Result<UpdateEvent<G>, RepoError> {
        if !coco_verify(&self.authority().pp, &session.id, &req.evidence.cert.subject, &req.key) {
            return Err(RepoError::IdentityMismatch);
        }
        Ok(self.record.register(package, req, now)?.clone())
    }

    /// Hands the account the policy commitment and key it holds for
    /// `action` on `package`, once a fresh token proves the identity again.
    pub fn release_commitment_key(
        &self,
        session: &Session,
        token: &crate::identity::OidcToken,
        package: &str,
        action: Action,
        now: Timestamp,
    ) -> Result<(u32, Commitment<G>, CommitmentKey<G>), RepoError> {
        self.check_token(session, token, now)?;
        let policy = self.record.public().policy(package).ok_or(RepoError::UnknownPackage)?;
        let (slots, _) = policy.slots(action);
        let keys = self.record.private_keys(package);
        let pp = &self.authority().pp;
        for (i, c) in slots.iter().enumerate() {
            if let Some((_, r)) = keys.iter().find(|(kc, r)| kc == c && coco_verify(pp, &session.id, c, r)) {
                return Ok((i as u32, *c, *r));
            }
        }
        Err(RepoError::NotAuthorized)
    }

    /// Commits to the account's identity for use in a future policy. The
    /// key is held until a policy adopting the commitment is accepted.
    pub fn prepare_commitment(
        &mut self,
        session: &Session,
        token: &crate::identity::OidcToken,
        now: Timestamp,
        rng: &mut impl CryptoRngCore,
    ) -> Result<Commitment<G>, RepoError> {
        self.check_token(session, token, now)?;
        let (c, r) = coco_commit(&self.authority().pp, &session.id, rng);
        self.pending.push((c, r));
        Ok(c)
    }

    pub fn update_policy(
        &mut self,
        package: &str,
        new_policy: Policy<G>,
        attestations: Vec<Attestation<G>>,
        now: Timestamp,
    ) -> Result<UpdateEvent<G>, RepoError> {
        let wanted = new_policy.commitments();
        let new_keys: Vec<_> = self.pending.iter().filter(|(c, _)| wanted.contains(c)).copied().collect();
        let ev = self.record.update(package, new_policy, attestations, new_keys, now)?.clone();
        self.pending.retain(|(c, _)| !wanted.contains(c));
        Ok(ev)
    }

    /// Accepts an artifact whose attestations satisfy the package policy and
    /// returns its bundle pinned to the current digest.
    pub fn publish(
        &mut self,
        package: &str,
        package_digest: [u8; 64],
        attestations: Vec<Attestation<G>>,
        now: Timestamp,
    ) -> Result<SignatureBundle<G>, RepoError> {
        let policy = self.record.public().policy(package).ok_or(RepoError::UnknownPackage)?;
        if attestations.iter().any(|a| a.signed_at > now) || !self.authority().check_publish(policy, &package_digest, &attestations) {
            return Err(RepoError::PublishRejected);
        }
        let (policy, lookup_proof) = self.lookup(package);
        let d = self.digest();
        let bundle = SignatureBundle {
            package_digest,
            attestations,
            policy: policy.expect("checked above"),
            lookup_proof,
            digest_ref: (d.root, d.epoch),
        };
        self.published.entry(package.into()).or_default().push(bundle.clone());
        Ok(bundle)
    }

    pub fn published(&self, package: &str) -> &[SignatureBundle<G>] {
        self.published.get(package).map_or(&[], Vec::as_slice)
    }

    /// Re-pins `bundle` to the current digest. The policy must be unchanged.
    pub fn refresh(&self, package: &str, bundle: &SignatureBundle<G>) -> Option<SignatureBundle<G>> {
        let (policy, lookup_proof) = self.lookup(package);
        if policy.as_ref() != Some(&bundle.policy) {
            return None;
        }
        let d = self.digest();
        Some(SignatureBundle {
            lookup_proof,
            digest_ref: (d.root, d.epoch),
            ..bundle.clone()
        })
    }
}

/// All actors of one deployment: identity provider, CA, repository, and
/// monitors.
#[derive(Debug, Clone)]
pub struct Deployment<G: PrimeGroup> {
    pub idp: IdentityProvider,
    pub ca: CertificateAuthority<G>,
    pub repo: Repository<G>,
    pub monitors: Vec<Monitor<G>>,
    synced: usize,
}

impl<G: PrimeGroup> Deployment<G> {
    /// Fresh keys for every actor and an empty record.
    pub fn new(monitors: usize, rng: &mut impl CryptoRngCore) -> Self {
        let idp = IdentityProvider::new(rng);
        let pp = PublicParams::generate();
        let ca = CertificateAuthority::new(SigKeypair::generate(rng), pp.clone(), idp.public_key());
        let record = AuthRecord::new(Authority {
            pp,
            ca_pk: ca.public_key(),
        });
        let monitors = (0..monitors).map(|_| SigKeypair::generate(rng)).collect();
        Self::from_parts(idp, ca, Repository::new(record, PublicKey([0; 32])), monitors)
    }

    /// Assembles a deployment; monitors start from the record's genesis and
    /// catch up on the next [`Deployment::sync_monitors`].
    pub fn from_parts(idp: IdentityProvider, ca: CertificateAuthority<G>, mut repo: Repository<G>, monitor_keys: Vec<SigKeypair>) -> Self {
        repo.provider_pk = idp.public_key();
        let genesis = repo.record.genesis().clone();
        let monitors = monitor_keys.into_iter().map(|k| Monitor::new(k, genesis.clone())).collect();
        Self {
            idp,
            ca,
            repo,
            monitors,
            synced: 0,
        }
    }

    pub fn pp(&self) -> &PublicParams<G> {
        &self.repo.authority().pp
    }

    pub fn ca_pk(&self) -> PublicKey {
        self.ca.public_key()
    }

    pub fn monitor_pks(&self) -> Vec<PublicKey> {
        self.monitors.iter().map(Monitor::public_key).collect()
    }

    /// Feeds new log entries to every monitor and returns the current digest
    /// with the signatures of all monitors that reproduced it.
    pub fn sync_monitors(&mut self) -> Result<Digest, ViolationReport> {
        let log = &self.repo.record.log()[self.synced..];
        for m in &mut self.monitors {
            for ev in log {
                m.observe(ev)?;
            }
        }
        self.synced = self.repo.record.log().len();
        let mut d = self.repo.digest();
        if let Some(v) = gather_signatures(&mut d, &self.monitors).into_iter().next() {
            return Err(v);
        }
        Ok(d)
    }
}

/// A repository account holder.
#[derive(Debug, Clone)]
pub struct User {
    pub id: String,
    pub credential: Credential,
}

impl User {
    pub fn enroll<G: PrimeGroup>(repo: &mut Repository<G>, id: &str, rng: &mut impl CryptoRngCore) -> Result<Self, RepoError> {
        Ok(Self {
            id: id.into(),
            credential: repo.create_account(id, rng)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FlowError {
    #[error("identity provider: {0}")]
    Token(#[from] TokenError),
    #[error("certificate authority: {0}")]
    Ca(#[from] CaError),
    #[error("repository: {0}")]
    Repo(#[from] RepoError),
    #[error("equality proof: {0}")]
    Commit(#[from] CommitError),
}

/// Ephemeral signing key, its certificate, and the subject's opening.
struct Ephemeral<G: PrimeGroup> {
    keys: SigKeypair,
    cert: crate::identity::Certificate<G>,
    r: CommitmentKey<G>,
}

fn certify<G: PrimeGroup>(d: &Deployment<G>, id: &str, now: Timestamp, rng: &mut impl CryptoRngCore) -> Result<Ephemeral<G>, FlowError> {
    let tok = d.idp.issue(id, CertificateAuthority::<G>::AUDIENCE, now)?;
    let keys = SigKeypair::generate(rng);
    let (cert, r) = d.ca.issue(&tok, &keys.public(), now, rng)?;
    Ok(Ephemeral { keys, cert, r })
}

/// Registers `package` to `user`: token, ephemeral key, certificate, signed
/// request, login, and registration. The ephemeral key is dropped on return.
pub fn register_package<G: PrimeGroup>(
    d: &mut Deployment<G>,
    user: &User,
    package: &str,
    rng: &mut impl CryptoRngCore,
    now: Timestamp,
) -> Result<UpdateEvent<G>, FlowError> {
    let eph = certify(d, &user.id, now, rng)?;
    let sig = eph.keys.sign(&register_message(package, d.repo.record.public().epoch(), now));
    let session = d.repo.login(&user.id, &user.credential)?;
    let req = RegistrationRequest {
        evidence: RegistrationEvidence {
            cert: eph.cert,
            signed_at: now,
            sig,
        },
        key: eph.r,
    };
    Ok(d.repo.register(&session, package, req, now)?)
}

/// One user's linkage for `action` over `message(signed_at)`.
fn attest<G: PrimeGroup>(
    d: &Deployment<G>,
    user: &User,
    package: &str,
    action: Action,
    message: impl Fn(Timestamp) -> Vec<u8>,
    rng: &mut impl CryptoRngCore,
    now: Timestamp,
) -> Result<Attestation<G>, FlowError> {
    let eph = certify(d, &user.id, now, rng)?;
    let sig = eph.keys.sign(&message(now));
    let session = d.repo.login(&user.id, &user.credential)?;
    let repo_tok = d.idp.issue(&user.id, REPO_AUDIENCE, now)?;
    let (slot, c_repo, r_repo) = d.repo.release_commitment_key(&session, &repo_tok, package, action, now)?;
    let proof = coco_prove(d.pp(), &user.id, &c_repo, &r_repo, &eph.cert.subject, &eph.r, rng)?;
    Ok(Attestation {
        cert: eph.cert,
        signed_at: now,
        sig,
        proof,
        slot,
    })
}

/// `user`'s attestation that `package_digest` is a release of `package`.
pub fn attest_artifact<G: PrimeGroup>(
    d: &Deployment<G>,
    user: &User,
    package: &str,
    package_digest: &[u8; 64],
    rng: &mut impl CryptoRngCore,
    now: Timestamp,
) -> Result<Attestation<G>, FlowError> {
    attest(d, user, package, Action::Publish, |t| artifact_message(package_digest, t), rng, now)
}

/// `user`'s approval of replacing the policy of `package` by `new_policy`.
pub fn attest_change<G: PrimeGroup>(
    d: &Deployment<G>,
    user: &User,
    package: &str,
    new_policy: &Policy<G>,
    rng: &mut impl CryptoRngCore,
    now: Timestamp,
) -> Result<Attestation<G>, FlowError> {
    let epoch = d.repo.record.public().epoch();
    attest(
        d,
        user,
        package,
        Action::Change,
        |t| change_message(package, epoch, new_policy, t),
        rng,
        now,
    )
}

/// Signs and publishes `artifact` as `user`, returning the bundle.
pub fn sign_package<G: PrimeGroup>(
    d: &mut Deployment<G>,
    user: &User,
    package: &str,
    artifact: &[u8],
    rng: &mut impl CryptoRngCore,
    now: Timestamp,
) -> Result<SignatureBundle<G>, FlowError> {
    sign_package_jointly(d, &[user], package, artifact, rng, now)
}

/// Like [`sign_package`] with one attestation per signer, for threshold
/// policies.
pub fn sign_package_jointly<G: PrimeGroup>(
    d: &mut Deployment<G>,
    signers: &[&User],
    package: &str,
    artifact: &[u8],
    rng: &mut impl CryptoRngCore,
    now: Timestamp,
) -> Result<SignatureBundle<G>, FlowError> {
    let digest = artifact_digest(artifact);
    let atts = signers
        .iter()
        .map(|u| attest_artifact(d, u, package, &digest, rng, now))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(d.repo.publish(package, digest, atts, now)?)
}

/// Has `user` commit their identity for a future policy.
pub fn enroll_signer<G: PrimeGroup>(
    d: &mut Deployment<G>,
    user: &User,
    rng: &mut impl CryptoRngCore,
    now: Timestamp,
) -> Result<Commitment<G>, FlowError> {
    let session = d.repo.login(&user.id, &user.credential)?;
    let tok = d.idp.issue(&user.id, REPO_AUDIENCE, now)?;
    Ok(d.repo.prepare_commitment(&session, &tok, now, rng)?)
}

/// Replaces the policy of `package`, approved by `approvers`.
pub fn change_policy<G: PrimeGroup>(
    d: &mut Deployment<G>,
    approvers: &[&User],
    package: &str,
    new_policy: Policy<G>,
    rng: &mut impl CryptoRngCore,
    now: Timestamp,
) -> Result<UpdateEvent<G>, FlowError> {
    let atts = approvers
        .iter()
        .map(|u| attest_change(d, u, package, &new_policy, rng, now))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(d.repo.update_policy(package, new_policy, atts, now)?)
}

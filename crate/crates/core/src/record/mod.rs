//! The authorization record: a package → policy dictionary held in a Merkle
//! prefix trie, advanced one authorized event at a time, and audited by
//! monitors that replay the event log.

pub mod monitor;
pub mod policy;
pub mod trie;

pub use monitor::{gather_signatures, monitor_replay, quorum_check, Monitor, Violation, ViolationReport};
pub use policy::{
    artifact_digest, artifact_message, change_message, package_key, register_message, Action, Attestation, Authority, Policy, PolicyError,
};
pub use trie::{Claim, KeyHash, LookupProof, NodeHash, Terminal, Trie, TrieError};

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::group::PrimeGroup;
use crate::identity::{cert_verify, digsig_verify, CertError, Certificate, PublicKey, SigKeypair, Signature, Timestamp};
use crate::pedersen::{Commitment, CommitmentKey};
use crate::wire::{DecodeError, Reader, Writer};

pub const DIGEST_TAG: &[u8] = b"speranza/digest/v1";
pub const EVENT_MAGIC: &[u8; 4] = b"SPEV";
pub const RECORD_MAGIC: &[u8; 4] = b"SPRC";
/// Width of a record root.
pub const DIGEST_LEN: usize = 64;

const KIND_REGISTER: u8 = 1;
const KIND_UPDATE: u8 = 2;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RecordError {
    #[error("package already registered")]
    DuplicatePackage,
    #[error("package not registered")]
    UnknownPackage,
    #[error("invalid policy: {0}")]
    InvalidPolicy(#[from] PolicyError),
    #[error("certificate rejected: {0}")]
    Certificate(#[from] CertError),
    #[error("signature over the request is invalid")]
    BadSignature,
    #[error("registered policy must be owned by the certificate subject")]
    PolicyMismatch,
    #[error("evidence does not authorize the change")]
    Unauthorized,
    #[error("evidence is timestamped in the future")]
    FutureTimestamp,
    #[error("event epoch does not follow the record epoch")]
    EpochMismatch,
    #[error("event was built on a different root")]
    PrevRootMismatch,
    #[error("event claims a root the transition does not produce")]
    NewRootMismatch,
}

/// Constant-size commitment to the record at one epoch, countersigned by
/// monitors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Digest {
    pub root: NodeHash,
    pub epoch: u64,
    pub monitor_sigs: Vec<(PublicKey, Signature)>,
}

impl Digest {
    pub fn new(root: NodeHash, epoch: u64) -> Self {
        Self {
            root,
            epoch,
            monitor_sigs: Vec::new(),
        }
    }

    /// Bytes a monitor signs: `tag ‖ root ‖ epoch`.
    pub fn signing_payload(root: &NodeHash, epoch: u64) -> Vec<u8> {
        let mut w = Writer::new();
        w.bytes(DIGEST_TAG).raw(root).u64(epoch);
        w.finish()
    }

    pub fn sign_as(&self, monitor: &SigKeypair) -> Signature {
        monitor.sign(&Self::signing_payload(&self.root, self.epoch))
    }

    pub fn add_signature(&mut self, monitor: PublicKey, sig: Signature) {
        self.monitor_sigs.push((monitor, sig));
    }

    /// `root ‖ epoch ‖ u32 n ‖ (pk ‖ sig)*`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        self.write(&mut w);
        w.finish()
    }

    pub(crate) fn write(&self, w: &mut Writer) {
        w.raw(&self.root).u64(self.epoch).u32(self.monitor_sigs.len() as u32);
        for (pk, sig) in &self.monitor_sigs {
            w.raw(&pk.0).raw(&sig.0);
        }
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut r = Reader::new(bytes);
        let d = Self::read(&mut r)?;
        r.finish()?;
        Ok(d)
    }

    pub(crate) fn read(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let root = r.array("root")?;
        let epoch = r.u64("epoch")?;
        let n = r.u32("monitor signature count")? as usize;
        if n > r.remaining() / 96 {
            return Err(DecodeError::Truncated("monitor signatures"));
        }
        let monitor_sigs = (0..n)
            .map(|_| Ok((PublicKey(r.array("monitor key")?), Signature(r.array("monitor signature")?))))
            .collect::<Result<_, DecodeError>>()?;
        Ok(Self { root, epoch, monitor_sigs })
    }
}

/// Proof that a registrant controls the certified key.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RegistrationEvidence<G: PrimeGroup> {
    pub cert: Certificate<G>,
    pub signed_at: Timestamp,
    /// Signature under `cert.pk` over [`register_message`].
    pub sig: Signature,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Evidence<G: PrimeGroup> {
    Register(RegistrationEvidence<G>),
    Update(Vec<Attestation<G>>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    Register,
    Update,
}

/// One logged transition. `epoch` is the epoch the record enters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UpdateEvent<G: PrimeGroup> {
    pub package: String,
    pub new_policy: Policy<G>,
    pub evidence: Evidence<G>,
    pub epoch: u64,
    pub prev_root: NodeHash,
    pub new_root: NodeHash,
}

impl<G: PrimeGroup> UpdateEvent<G> {
    pub fn kind(&self) -> EventKind {
        match self.evidence {
            Evidence::Register(_) => EventKind::Register,
            Evidence::Update(_) => EventKind::Update,
        }
    }

    /// `magic ‖ kind ‖ package ‖ policy ‖ evidence ‖ epoch ‖ prev_root ‖ new_root`,
    /// where register evidence is `cert ‖ signed_at ‖ sig` and update
    /// evidence is `u32 n ‖ attestations`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.raw(EVENT_MAGIC);
        match &self.evidence {
            Evidence::Register(_) => w.u8(KIND_REGISTER),
            Evidence::Update(_) => w.u8(KIND_UPDATE),
        };
        w.str(&self.package).bytes(&self.new_policy.to_bytes());
        match &self.evidence {
            Evidence::Register(e) => {
                w.bytes(&e.cert.to_bytes()).u64(e.signed_at.0).raw(&e.sig.0);
            }
            Evidence::Update(atts) => {
                w.u32(atts.len() as u32);
                for a in atts {
                    a.write(&mut w);
                }
            }
        }
        w.u64(self.epoch).raw(&self.prev_root).raw(&self.new_root);
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut r = Reader::new(bytes);
        if r.raw(4, "event magic")? != EVENT_MAGIC {
            return Err(DecodeError::BadMagic);
        }
        let kind = r.u8("event kind")?;
        let package = r.string("package")?;
        let new_policy = Policy::from_bytes(r.bytes("policy")?)?;
        let evidence = match kind {
            KIND_REGISTER => Evidence::Register(RegistrationEvidence {
                cert: Certificate::from_bytes(r.bytes("certificate")?)?,
                signed_at: Timestamp(r.u64("signed_at")?),
                sig: Signature(r.array("signature")?),
            }),
            KIND_UPDATE => {
                let n = r.u32("attestation count")? as usize;
                if n > r.remaining() {
                    return Err(DecodeError::Truncated("attestations"));
                }
                Evidence::Update((0..n).map(|_| Attestation::read(&mut r)).collect::<Result<_, _>>()?)
            }
            _ => return Err(DecodeError::Invalid("event kind")),
        };
        let ev = Self {
            package,
            new_policy,
            evidence,
            epoch: r.u64("epoch")?,
            prev_root: r.array("prev root")?,
            new_root: r.array("new root")?,
        };
        r.finish()?;
        Ok(ev)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry<G: PrimeGroup> {
    pub package: String,
    pub policy: Policy<G>,
}

/// The public half of the record. Cloning is O(1) and yields an immutable
/// snapshot that keeps serving lookups while the original advances.
#[derive(Debug, Clone)]
pub struct PublicRecord<G: PrimeGroup> {
    trie: Trie<Entry<G>>,
    epoch: u64,
    authority: Arc<Authority<G>>,
}

impl<G: PrimeGroup> PublicRecord<G> {
    pub fn new(authority: Authority<G>) -> Self {
        Self {
            trie: Trie::new(),
            epoch: 0,
            authority: Arc::new(authority),
        }
    }

    /// Bulk-loads `entries` at epoch 0.
    pub fn initialize(authority: Authority<G>, entries: Vec<(String, Policy<G>)>) -> Result<Self, RecordError> {
        let items = entries
            .into_iter()
            .map(|(package, policy)| {
                policy.validate()?;
                Ok((package_key(&package), policy.hash(), Entry { package, policy }))
            })
            .collect::<Result<Vec<_>, RecordError>>()?;
        let trie = Trie::from_items(items).map_err(|_| RecordError::DuplicatePackage)?;
        Ok(Self {
            trie,
            epoch: 0,
            authority: Arc::new(authority),
        })
    }

    pub fn authority(&self) -> &Authority<G> {
        &self.authority
    }

    pub fn len(&self) -> usize {
        self.trie.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trie.is_empty()
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    pub fn root(&self) -> NodeHash {
        self.trie.root_hash()
    }

    /// Unsigned digest of the current state.
    pub fn digest(&self) -> Digest {
        Digest::new(self.root(), self.epoch)
    }

    pub fn policy(&self, package: &str) -> Option<&Policy<G>> {
        self.trie.get(&package_key(package)).map(|e| &e.policy)
    }

    pub fn lookup(&self, package: &str) -> (Option<Policy<G>>, LookupProof) {
        let (entry, proof) = self.trie.prove(&package_key(package));
        (entry.map(|e| e.policy.clone()), proof)
    }

    pub fn entries(&self) -> impl Iterator<Item = &Entry<G>> {
        self.trie.iter().map(|(_, _, e)| e.as_ref())
    }

    /// Checks `evidence` against the current state and returns the state it
    /// leads to. `self` is left untouched.
    pub fn transition(&self, package: &str, new_policy: &Policy<G>, evidence: &Evidence<G>) -> Result<Self, RecordError> {
        new_policy.validate()?;
        let current = self.policy(package);
        match evidence {
            Evidence::Register(e) => {
                if current.is_some() {
                    return Err(RecordError::DuplicatePackage);
                }
                let subject = cert_verify(&self.authority.ca_pk, &e.cert, e.signed_at)?;
                if *new_policy != (Policy::SingleOwner { owner: subject }) {
                    return Err(RecordError::PolicyMismatch);
                }
                if !digsig_verify(&e.cert.pk, &register_message(package, self.epoch, e.signed_at), &e.sig) {
                    return Err(RecordError::BadSignature);
                }
            }
            Evidence::Update(atts) => {
                let current = current.ok_or(RecordError::UnknownPackage)?;
                if !self.authority.check_policy_change(current, package, self.epoch, new_policy, atts) {
                    return Err(RecordError::Unauthorized);
                }
            }
        }
        let mut next = self.clone();
        next.trie.insert(
            package_key(package),
            new_policy.hash(),
            Entry {
                package: package.into(),
                policy: new_policy.clone(),
            },
        );
        next.epoch += 1;
        Ok(next)
    }

    /// Builds the event for an authorized transition without applying it.
    pub fn propose(&self, package: &str, new_policy: Policy<G>, evidence: Evidence<G>) -> Result<(UpdateEvent<G>, Self), RecordError> {
        let next = self.transition(package, &new_policy, &evidence)?;
        let ev = UpdateEvent {
            package: package.into(),
            new_policy,
            evidence,
            epoch: next.epoch,
            prev_root: self.root(),
            new_root: next.root(),
        };
        Ok((ev, next))
    }

    /// Re-executes a logged event. On error the record is unchanged.
    pub fn apply(&mut self, ev: &UpdateEvent<G>) -> Result<(), RecordError> {
        if ev.epoch != self.epoch + 1 {
            return Err(RecordError::EpochMismatch);
        }
        if ev.prev_root != self.root() {
            return Err(RecordError::PrevRootMismatch);
        }
        let next = self.transition(&ev.package, &ev.new_policy, &ev.evidence)?;
        if next.root() != ev.new_root {
            return Err(RecordError::NewRootMismatch);
        }
        *self = next;
        Ok(())
    }

    /// `magic ‖ epoch ‖ u32 n ‖ (package ‖ policy)*` in key order.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.raw(RECORD_MAGIC).u64(self.epoch).u32(self.trie.len() as u32);
        for e in self.entries() {
            w.str(&e.package).bytes(&e.policy.to_bytes());
        }
        w.finish()
    }

    pub fn from_bytes(authority: Authority<G>, bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut r = Reader::new(bytes);
        if r.raw(4, "record magic")? != RECORD_MAGIC {
            return Err(DecodeError::BadMagic);
        }
        let epoch = r.u64("epoch")?;
        let n = r.u32("entry count")? as usize;
        if n > r.remaining() {
            return Err(DecodeError::Truncated("entries"));
        }
        let mut entries = Vec::with_capacity(n);
        for _ in 0..n {
            let package = r.string("package")?;
            entries.push((package, Policy::from_bytes(r.bytes("policy")?)?));
        }
        r.finish()?;
        let mut rec = Self::initialize(authority, entries).map_err(|_| DecodeError::Invalid("record entries"))?;
        rec.epoch = epoch;
        Ok(rec)
    }
}

/// Checks a lookup answer against a digest.
pub fn verify_lookup<G: PrimeGroup>(digest: &Digest, package: &str, result: Option<&Policy<G>>, proof: &LookupProof) -> bool {
    let key = package_key(package);
    match result {
        Some(p) => proof.verify(&digest.root, &key, Claim::Present(&p.hash())),
        None => proof.verify(&digest.root, &key, Claim::Absent),
    }
}

/// What a registrant hands the record: evidence plus the opening of the
/// certificate subject, which stays private.
#[derive(Debug, Clone)]
pub struct RegistrationRequest<G: PrimeGroup> {
    pub evidence: RegistrationEvidence<G>,
    pub key: CommitmentKey<G>,
}

/// Policy commitments with their private openings.
pub type Openings<G> = Vec<(Commitment<G>, CommitmentKey<G>)>;

/// The repository-side record: public state, the private commitment keys
/// behind each policy, and the append-only event log.
#[derive(Debug, Clone)]
pub struct AuthRecord<G: PrimeGroup> {
    genesis: PublicRecord<G>,
    public: PublicRecord<G>,
    private_keys: BTreeMap<String, Openings<G>>,
    log: Vec<UpdateEvent<G>>,
}

impl<G: PrimeGroup> AuthRecord<G> {
    pub fn new(authority: Authority<G>) -> Self {
        Self::from_public(PublicRecord::new(authority))
    }

    pub fn initialize(authority: Authority<G>, entries: Vec<(String, Policy<G>)>) -> Result<Self, RecordError> {
        Ok(Self::from_public(PublicRecord::initialize(authority, entries)?))
    }

    pub fn from_public(genesis: PublicRecord<G>) -> Self {
        Self {
            public: genesis.clone(),
            genesis,
            private_keys: BTreeMap::new(),
            log: Vec::new(),
        }
    }

    /// Rebuilds a record by replaying `events` on top of `genesis`.
    pub fn restore(
        genesis: PublicRecord<G>,
        events: Vec<UpdateEvent<G>>,
        private_keys: BTreeMap<String, Openings<G>>,
    ) -> Result<Self, ViolationReport> {
        let mut public = genesis.clone();
        for (index, ev) in events.iter().enumerate() {
            public.apply(ev).map_err(|e| ViolationReport { index, kind: e.into() })?;
        }
        Ok(Self {
            genesis,
            public,
            private_keys,
            log: events,
        })
    }

    pub fn public(&self) -> &PublicRecord<G> {
        &self.public
    }

    pub fn all_private_keys(&self) -> &BTreeMap<String, Openings<G>> {
        &self.private_keys
    }

    pub fn genesis(&self) -> &PublicRecord<G> {
        &self.genesis
    }

    pub fn log(&self) -> &[UpdateEvent<G>] {
        &self.log
    }

    pub fn digest(&self) -> Digest {
        self.public.digest()
    }

    pub fn lookup(&self, package: &str) -> (Option<Policy<G>>, LookupProof) {
        self.public.lookup(package)
    }

    pub fn private_keys(&self, package: &str) -> &[(Commitment<G>, CommitmentKey<G>)] {
        self.private_keys.get(package).map_or(&[], Vec::as_slice)
    }

    /// Registers `package` to the certificate subject of `req`. The
    /// certificate must be valid both when the request was signed and `now`.
    pub fn register(&mut self, package: &str, req: RegistrationRequest<G>, now: Timestamp) -> Result<&UpdateEvent<G>, RecordError> {
        let e = req.evidence;
        if e.signed_at > now {
            return Err(RecordError::FutureTimestamp);
        }
        cert_verify(&self.public.authority.ca_pk, &e.cert, now)?;
        let policy = Policy::SingleOwner { owner: e.cert.subject };
        let (ev, next) = self.public.propose(package, policy, Evidence::Register(e))?;
        self.private_keys.insert(package.into(), alloc::vec![(e.cert.subject, req.key)]);
        Ok(self.commit(ev, next))
    }

    /// Replaces the policy of `package`. `new_keys` are the openings of
    /// commitments introduced by `new_policy`; keys of commitments the new
    /// policy drops are discarded.
    pub fn update(
        &mut self,
        package: &str,
        new_policy: Policy<G>,
        attestations: Vec<Attestation<G>>,
        new_keys: Vec<(Commitment<G>, CommitmentKey<G>)>,
        now: Timestamp,
    ) -> Result<&UpdateEvent<G>, RecordError> {
        if attestations.iter().any(|a| a.signed_at > now) {
            return Err(RecordError::FutureTimestamp);
        }
        let (ev, next) = self.public.propose(package, new_policy, Evidence::Update(attestations))?;
        let keep = ev.new_policy.commitments();
        let mut keys = self.private_keys.remove(package).unwrap_or_default();
        keys.extend(new_keys);
        let mut seen = Vec::new();
        keys.retain(|(c, _)| {
            let fresh = keep.contains(c) && !seen.contains(c);
            seen.push(*c);
            fresh
        });
        self.private_keys.insert(package.into(), keys);
        Ok(self.commit(ev, next))
    }

    fn commit(&mut self, ev: UpdateEvent<G>, next: PublicRecord<G>) -> &UpdateEvent<G> {
        self.public = next;
        self.log.push(ev);
        self.log.last().expect("just pushed")
    }
}

#[cfg(test)]
mod tests;

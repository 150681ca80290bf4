//! Ownership policies over committed identities, and the evidence that
//! satisfies them.
//!
//! Evidence is a list of [`Attestation`]s. Each one presents a certificate
//! whose subject is a fresh commitment, a signature by the certified key over
//! the action being authorized, and an equality proof tying the certificate
//! subject to one commitment (`slot`) of the policy. A policy requirement of
//! `k` is met by `k` valid attestations on distinct slots.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;
use core::slice;

use sha2::{Digest, Sha512};

use super::trie::{KeyHash, NodeHash};
use crate::group::PrimeGroup;
use crate::identity::{cert_verify, digsig_verify, Certificate, PublicKey, Signature, Timestamp};
use crate::pedersen::{self, Commitment, EqualityProof, PublicParams};
use crate::wire::{DecodeError, Reader, Writer};

pub const ARTIFACT_TAG: &[u8] = b"speranza/sign-artifact/v1";
pub const REGISTER_TAG: &[u8] = b"speranza/register/v1";
pub const CHANGE_TAG: &[u8] = b"speranza/policy-change/v1";

const KIND_SINGLE: u8 = 1;
const KIND_THRESHOLD: u8 = 2;
const KIND_HEAD: u8 = 3;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PolicyError {
    #[error("policy lists no signers")]
    NoSigners,
    #[error("threshold {threshold} outside 1..={signers}")]
    BadThreshold { threshold: u32, signers: usize },
    #[error("signer commitments are not pairwise distinct")]
    DuplicateSigner,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Policy<G: PrimeGroup> {
    /// One owner who may publish and change the policy.
    SingleOwner { owner: Commitment<G> },
    /// `threshold` of `signers` must sign off on publishes and changes.
    Threshold { signers: Vec<Commitment<G>>, threshold: u32 },
    /// Any listed signer may publish; only `head` may change the policy.
    HeadSigner { head: Commitment<G>, signers: Vec<Commitment<G>> },
}

/// What an attestation authorizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    Publish,
    Change,
}

impl<G: PrimeGroup> Policy<G> {
    pub fn validate(&self) -> Result<(), PolicyError> {
        let signers = match self {
            Policy::SingleOwner { .. } => return Ok(()),
            Policy::Threshold { signers, threshold } => {
                if signers.is_empty() {
                    return Err(PolicyError::NoSigners);
                }
                if *threshold == 0 || *threshold as usize > signers.len() {
                    return Err(PolicyError::BadThreshold {
                        threshold: *threshold,
                        signers: signers.len(),
                    });
                }
                signers
            }
            Policy::HeadSigner { signers, .. } => {
                if signers.is_empty() {
                    return Err(PolicyError::NoSigners);
                }
                signers
            }
        };
        let distinct: BTreeSet<Vec<u8>> = signers.iter().map(|c| c.encode().as_ref().to_vec()).collect();
        if distinct.len() != signers.len() {
            return Err(PolicyError::DuplicateSigner);
        }
        Ok(())
    }

    /// Commitments an attestation may link to for `action`, and how many
    /// distinct ones are required.
    pub fn slots(&self, action: Action) -> (&[Commitment<G>], usize) {
        match (self, action) {
            (Policy::SingleOwner { owner }, _) => (slice::from_ref(owner), 1),
            (Policy::Threshold { signers, threshold }, _) => (signers, *threshold as usize),
            (Policy::HeadSigner { signers, .. }, Action::Publish) => (signers, 1),
            (Policy::HeadSigner { head, .. }, Action::Change) => (slice::from_ref(head), 1),
        }
    }

    /// Every commitment that appears in the policy.
    pub fn commitments(&self) -> Vec<Commitment<G>> {
        match self {
            Policy::SingleOwner { owner } => alloc::vec![*owner],
            Policy::Threshold { signers, .. } => signers.clone(),
            Policy::HeadSigner { head, signers } => core::iter::once(*head).chain(signers.iter().copied()).collect(),
        }
    }

    /// `kind ‖ fields`, with `u32` counts and fixed-width commitments:
    ///
    /// * single owner: `0x01 ‖ owner`
    /// * threshold: `0x02 ‖ threshold ‖ n ‖ signers`
    /// * head signer: `0x03 ‖ head ‖ n ‖ signers`
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        self.write(&mut w);
        w.finish()
    }

    pub(crate) fn write(&self, w: &mut Writer) {
        let list = |w: &mut Writer, cs: &[Commitment<G>]| {
            w.u32(cs.len() as u32);
            for c in cs {
                w.raw(c.encode().as_ref());
            }
        };
        match self {
            Policy::SingleOwner { owner } => {
                w.u8(KIND_SINGLE).raw(owner.encode().as_ref());
            }
            Policy::Threshold { signers, threshold } => {
                w.u8(KIND_THRESHOLD).u32(*threshold);
                list(w, signers);
            }
            Policy::HeadSigner { head, signers } => {
                w.u8(KIND_HEAD).raw(head.encode().as_ref());
                list(w, signers);
            }
        }
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut r = Reader::new(bytes);
        let p = Self::read(&mut r)?;
        r.finish()?;
        Ok(p)
    }

    pub(crate) fn read(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let commitment = |r: &mut Reader<'_>| pedersen::read_element::<G>(r, "policy commitment").map(Commitment);
        let list = |r: &mut Reader<'_>| -> Result<Vec<Commitment<G>>, DecodeError> {
            let n = r.u32("signer count")? as usize;
            if n > r.remaining() / G::ELEMENT_LEN {
                return Err(DecodeError::Truncated("signers"));
            }
            (0..n).map(|_| commitment(r)).collect()
        };
        let policy = match r.u8("policy kind")? {
            KIND_SINGLE => Policy::SingleOwner { owner: commitment(r)? },
            KIND_THRESHOLD => {
                let threshold = r.u32("threshold")?;
                Policy::Threshold {
                    signers: list(r)?,
                    threshold,
                }
            }
            KIND_HEAD => Policy::HeadSigner {
                head: commitment(r)?,
                signers: list(r)?,
            },
            _ => return Err(DecodeError::Invalid("policy kind")),
        };
        policy.validate().map_err(|_| DecodeError::Invalid("policy"))?;
        Ok(policy)
    }

    /// Leaf value committed in the trie.
    pub fn hash(&self) -> NodeHash {
        Sha512::digest(self.to_bytes()).into()
    }
}

/// SHA-512 of the package name, truncated to 256 bits.
pub fn package_key(package: &str) -> KeyHash {
    let full: [u8; 64] = Sha512::digest(package.as_bytes()).into();
    let mut k = [0u8; 32];
    k.copy_from_slice(&full[..32]);
    k
}

/// SHA-512 of artifact bytes.
pub fn artifact_digest(bytes: &[u8]) -> [u8; 64] {
    Sha512::digest(bytes).into()
}

/// Signed when publishing an artifact. The package is bound through the
/// equality proof to its policy commitment, not through this message.
pub fn artifact_message(digest: &[u8; 64], signed_at: Timestamp) -> Vec<u8> {
    let mut w = Writer::new();
    w.bytes(ARTIFACT_TAG).raw(digest).u64(signed_at.0);
    w.finish()
}

/// Signed when registering a package at record epoch `epoch`.
pub fn register_message(package: &str, epoch: u64, signed_at: Timestamp) -> Vec<u8> {
    let mut w = Writer::new();
    w.bytes(REGISTER_TAG).raw(&package_key(package)).u64(epoch).u64(signed_at.0);
    w.finish()
}

/// Signed when replacing a package's policy at record epoch `epoch`.
pub fn change_message<G: PrimeGroup>(package: &str, epoch: u64, new_policy: &Policy<G>, signed_at: Timestamp) -> Vec<u8> {
    let mut w = Writer::new();
    w.bytes(CHANGE_TAG)
        .raw(&package_key(package))
        .u64(epoch)
        .bytes(&new_policy.to_bytes())
        .u64(signed_at.0);
    w.finish()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Attestation<G: PrimeGroup> {
    pub cert: Certificate<G>,
    pub signed_at: Timestamp,
    pub sig: Signature,
    /// Proof that `policy_slot_commitment` and `cert.subject` commit to the
    /// same identity, in that order.
    pub proof: EqualityProof<G>,
    pub slot: u32,
}

impl<G: PrimeGroup> Attestation<G> {
    pub(crate) fn write(&self, w: &mut Writer) {
        w.bytes(&self.cert.to_bytes())
            .u64(self.signed_at.0)
            .raw(&self.sig.0)
            .raw(&self.proof.to_bytes())
            .u32(self.slot);
    }

    pub(crate) fn read(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let cert = Certificate::from_bytes(r.bytes("certificate")?)?;
        Ok(Self {
            cert,
            signed_at: Timestamp(r.u64("signed_at")?),
            sig: Signature(r.array("signature")?),
            proof: EqualityProof::read(r)?,
            slot: r.u32("slot")?,
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        self.write(&mut w);
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut r = Reader::new(bytes);
        let a = Self::read(&mut r)?;
        r.finish()?;
        Ok(a)
    }
}

/// Public inputs every checker shares.
#[derive(Debug, Clone)]
pub struct Authority<G: PrimeGroup> {
    pub pp: PublicParams<G>,
    pub ca_pk: PublicKey,
}

impl<G: PrimeGroup> Authority<G> {
    /// Whether `att` is a valid linkage to `slot_commitment` for `message`.
    pub fn attestation_holds(&self, slot_commitment: &Commitment<G>, message: &[u8], att: &Attestation<G>) -> bool {
        let Ok(sub) = cert_verify(&self.ca_pk, &att.cert, att.signed_at) else {
            return false;
        };
        digsig_verify(&att.cert.pk, message, &att.sig) && pedersen::verify_eq(&self.pp, slot_commitment, &sub, &att.proof)
    }

    /// Number of distinct slots among `slots` covered by valid attestations
    /// over the message that `message_for(signed_at)` produces.
    pub fn count_linkages(
        &self,
        slots: &[Commitment<G>],
        attestations: &[Attestation<G>],
        message_for: impl Fn(Timestamp) -> Vec<u8>,
    ) -> usize {
        let mut covered = BTreeSet::new();
        for att in attestations {
            let Some(c) = slots.get(att.slot as usize) else {
                continue;
            };
            if covered.contains(&att.slot) {
                continue;
            }
            if self.attestation_holds(c, &message_for(att.signed_at), att) {
                covered.insert(att.slot);
            }
        }
        covered.len()
    }

    /// Is the artifact with `digest` authorized for `package` under `policy`?
    pub fn check_publish(&self, policy: &Policy<G>, digest: &[u8; 64], evidence: &[Attestation<G>]) -> bool {
        let (slots, required) = policy.slots(Action::Publish);
        self.count_linkages(slots, evidence, |t| artifact_message(digest, t)) >= required
    }

    /// Is replacing `policy` by `new_policy` at `epoch` authorized?
    pub fn check_policy_change(
        &self,
        policy: &Policy<G>,
        package: &str,
        epoch: u64,
        new_policy: &Policy<G>,
        evidence: &[Attestation<G>],
    ) -> bool {
        if new_policy.validate().is_err() {
            return false;
        }
        let (slots, required) = policy.slots(Action::Change);
        self.count_linkages(slots, evidence, |t| change_message(package, epoch, new_policy, t)) >= required
    }
}

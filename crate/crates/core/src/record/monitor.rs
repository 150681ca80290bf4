//! Third-party monitors: replay every event through the public state machine
//! and countersign only digests they reproduced themselves.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use super::{Digest, PublicRecord, RecordError, UpdateEvent};
use crate::group::PrimeGroup;
use crate::identity::{digsig_verify, PublicKey, SigKeypair, Signature};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Violation {
    #[error("illegal transition: {0}")]
    Transition(#[from] RecordError),
    #[error("genesis state does not match the genesis digest")]
    GenesisMismatch,
    #[error("claimed digest differs from the replayed state")]
    DigestMismatch,
}

/// First offending event. `index == events.len()` blames the final digest.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("violation at event {index}: {kind}")]
pub struct ViolationReport {
    pub index: usize,
    pub kind: Violation,
}

/// An incremental monitor holding its own copy of the public record.
#[derive(Debug, Clone)]
pub struct Monitor<G: PrimeGroup> {
    keys: SigKeypair,
    state: PublicRecord<G>,
    observed: usize,
}

impl<G: PrimeGroup> Monitor<G> {
    pub fn new(keys: SigKeypair, genesis: PublicRecord<G>) -> Self {
        Self {
            keys,
            state: genesis,
            observed: 0,
        }
    }

    pub fn public_key(&self) -> PublicKey {
        self.keys.public()
    }

    pub fn state(&self) -> &PublicRecord<G> {
        &self.state
    }

    pub fn observe(&mut self, ev: &UpdateEvent<G>) -> Result<(), ViolationReport> {
        self.state.apply(ev).map_err(|e| ViolationReport {
            index: self.observed,
            kind: e.into(),
        })?;
        self.observed += 1;
        Ok(())
    }

    /// Signs `claimed` if it names exactly the replayed state.
    pub fn countersign(&self, claimed: &Digest) -> Result<Signature, ViolationReport> {
        if claimed.root != self.state.root() || claimed.epoch != self.state.epoch() {
            return Err(ViolationReport {
                index: self.observed,
                kind: Violation::DigestMismatch,
            });
        }
        Ok(claimed.sign_as(&self.keys))
    }
}

/// Replays `events` from `genesis_state` (which must match `genesis`) and
/// countersigns `claimed` if the replay reproduces it.
pub fn monitor_replay<G: PrimeGroup>(
    keys: &SigKeypair,
    genesis_state: &PublicRecord<G>,
    genesis: &Digest,
    events: &[UpdateEvent<G>],
    claimed: &Digest,
) -> Result<(Digest, Signature), ViolationReport> {
    if genesis_state.root() != genesis.root || genesis_state.epoch() != genesis.epoch {
        return Err(ViolationReport {
            index: 0,
            kind: Violation::GenesisMismatch,
        });
    }
    let mut m = Monitor::new(keys.clone(), genesis_state.clone());
    for ev in events {
        m.observe(ev)?;
    }
    let sig = m.countersign(claimed)?;
    let mut signed = Digest::new(claimed.root, claimed.epoch);
    signed.add_signature(keys.public(), sig);
    Ok((signed, sig))
}

/// At least `required` distinct monitors from `monitor_pks` signed
/// `(digest.root, digest.epoch)`.
pub fn quorum_check(digest: &Digest, monitor_pks: &[PublicKey], required: usize) -> bool {
    let payload = Digest::signing_payload(&digest.root, digest.epoch);
    let signers: BTreeSet<PublicKey> = digest
        .monitor_sigs
        .iter()
        .filter(|(pk, sig)| monitor_pks.contains(pk) && digsig_verify(pk, &payload, sig))
        .map(|(pk, _)| *pk)
        .collect();
    signers.len() >= required
}

/// Collects countersignatures from every monitor that agrees with `digest`.
pub fn gather_signatures<G: PrimeGroup>(digest: &mut Digest, monitors: &[Monitor<G>]) -> Vec<ViolationReport> {
    let mut dissent = Vec::new();
    for m in monitors {
        match m.countersign(digest) {
            Ok(sig) => digest.add_signature(m.public_key(), sig),
            Err(v) => dissent.push(v),
        }
    }
    dissent
}

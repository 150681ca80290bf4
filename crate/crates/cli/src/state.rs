//! On-disk deployment state.
//!
//! ```text
//! params.bin               public parameters
//! keys/*.key               hex secret keys: provider, ca, monitor-N
//! genesis.bin              record at epoch 0
//! events.log               append-only, u32 length-prefixed update events
//! repo/accounts.json       account id -> credential hash
//! repo/private_keys.json   package -> commitment openings
//! repo/pending.json        enrolled but unused openings
//! users/credentials.json   account id -> credential (client side)
//! snapshots/epoch-N.bin    record at every epoch N divisible by 1000
//! ```

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use rand::{CryptoRng, RngCore};
use serde::{de::DeserializeOwned, Serialize};
use speranza_core::group::Ristretto;
use speranza_core::identity::{CertificateAuthority, IdentityProvider, SigKeypair};
use speranza_core::pedersen::{Commitment, CommitmentKey, PublicParams};
use speranza_core::protocols::{Credential, Deployment, Repository, User};
use speranza_core::record::{AuthRecord, Authority, Openings, Policy, PublicRecord, UpdateEvent};

pub type G = Ristretto;

const PARAMS: &str = "params.bin";
const GENESIS: &str = "genesis.bin";
const EVENTS: &str = "events.log";
const ACCOUNTS: &str = "repo/accounts.json";
const PRIVATE_KEYS: &str = "repo/private_keys.json";
const PENDING: &str = "repo/pending.json";
const CREDENTIALS: &str = "users/credentials.json";
pub const SNAPSHOT_EVERY: u64 = 1000;

type HexOpenings = Vec<(String, String)>;

pub struct State {
    dir: PathBuf,
    pub deployment: Deployment<G>,
    credentials: BTreeMap<String, String>,
    events_on_disk: usize,
}

fn read_json<T: DeserializeOwned + Default>(path: &Path) -> Result<T> {
    if !path.exists() {
        return Ok(T::default());
    }
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    serde_json::from_reader(BufReader::new(f)).with_context(|| format!("parsing {}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let tmp = path.with_extension("tmp");
    let mut w = BufWriter::new(File::create(&tmp)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.flush()?;
    drop(w);
    fs::rename(&tmp, path)?;
    Ok(())
}

fn write_key(path: &Path, k: &SigKeypair) -> Result<()> {
    fs::write(path, hex::encode(k.secret_bytes()))?;
    Ok(())
}

fn read_key(path: &Path) -> Result<SigKeypair> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let bytes: [u8; 32] = hex::decode(text.trim())?
        .try_into()
        .map_err(|_| anyhow!("{}: expected a 32-byte key", path.display()))?;
    Ok(SigKeypair::from_secret_bytes(&bytes))
}

fn encode_openings(o: &[(Commitment<G>, CommitmentKey<G>)]) -> HexOpenings {
    o.iter()
        .map(|(c, r)| (hex::encode(c.encode()), hex::encode(r.to_bytes())))
        .collect()
}

fn decode_openings(o: &HexOpenings) -> Result<Openings<G>> {
    o.iter()
        .map(|(c, r)| {
            let c = Commitment::decode(&hex::decode(c)?).ok_or_else(|| anyhow!("bad commitment"))?;
            let r: [u8; 32] = hex::decode(r)?.try_into().map_err(|_| anyhow!("bad opening length"))?;
            let r = CommitmentKey::from_bytes(&r).ok_or_else(|| anyhow!("bad opening"))?;
            Ok((c, r))
        })
        .collect()
}

/// Reads every event from a length-prefixed log.
pub fn read_events(path: &Path) -> Result<Vec<UpdateEvent<G>>> {
    let mut buf = Vec::new();
    if path.exists() {
        File::open(path)?.read_to_end(&mut buf)?;
    }
    let mut out = Vec::new();
    let mut rest = buf.as_slice();
    while !rest.is_empty() {
        if rest.len() < 4 {
            bail!("truncated event log");
        }
        let n = u32::from_be_bytes(rest[..4].try_into()?) as usize;
        let body = rest.get(4..4 + n).ok_or_else(|| anyhow!("truncated event log"))?;
        out.push(UpdateEvent::from_bytes(body).map_err(|e| anyhow!("event {}: {e}", out.len()))?);
        rest = &rest[4 + n..];
    }
    Ok(out)
}

impl State {
    pub fn exists(dir: &Path) -> bool {
        dir.join(GENESIS).exists()
    }

    /// Creates a fresh deployment with `monitors` monitors and a genesis
    /// record holding `entries`.
    pub fn init<R: RngCore + CryptoRng>(dir: &Path, monitors: usize, entries: Vec<(String, Policy<G>)>, rng: &mut R) -> Result<Self> {
        if Self::exists(dir) {
            bail!("{} already holds a deployment", dir.display());
        }
        for sub in ["keys", "repo", "users", "snapshots"] {
            fs::create_dir_all(dir.join(sub))?;
        }
        let idp = IdentityProvider::new(rng);
        let pp = PublicParams::<G>::generate();
        let ca = CertificateAuthority::new(SigKeypair::generate(rng), pp.clone(), idp.public_key());
        let monitor_keys: Vec<SigKeypair> = (0..monitors).map(|_| SigKeypair::generate(rng)).collect();
        write_key(&dir.join("keys/provider.key"), idp.keys())?;
        write_key(&dir.join("keys/ca.key"), ca.keys())?;
        for (i, k) in monitor_keys.iter().enumerate() {
            write_key(&dir.join(format!("keys/monitor-{i}.key")), k)?;
        }
        fs::write(dir.join(PARAMS), pp.to_bytes())?;
        let authority = Authority {
            pp,
            ca_pk: ca.public_key(),
        };
        let genesis = PublicRecord::initialize(authority, entries).map_err(|e| anyhow!("genesis: {e}"))?;
        fs::write(dir.join(GENESIS), genesis.to_bytes())?;
        File::create(dir.join(EVENTS))?;
        let repo = Repository::new(AuthRecord::from_public(genesis), idp.public_key());
        let mut s = Self {
            dir: dir.to_path_buf(),
            deployment: Deployment::from_parts(idp, ca, repo, monitor_keys),
            credentials: BTreeMap::new(),
            events_on_disk: 0,
        };
        s.save()?;
        Ok(s)
    }

    pub fn open(dir: &Path) -> Result<Self> {
        if !Self::exists(dir) {
            bail!("no deployment in {}; run `speranza setup` first", dir.display());
        }
        let idp = IdentityProvider::from_keys(read_key(&dir.join("keys/provider.key"))?);
        let pp = PublicParams::<G>::from_bytes(&fs::read(dir.join(PARAMS))?).map_err(|e| anyhow!("params: {e}"))?;
        let ca = CertificateAuthority::new(read_key(&dir.join("keys/ca.key"))?, pp.clone(), idp.public_key());
        let mut monitor_keys = Vec::new();
        while let Ok(k) = read_key(&dir.join(format!("keys/monitor-{}.key", monitor_keys.len()))) {
            monitor_keys.push(k);
        }
        let authority = Authority {
            pp,
            ca_pk: ca.public_key(),
        };
        let genesis = PublicRecord::from_bytes(authority, &fs::read(dir.join(GENESIS))?).map_err(|e| anyhow!("genesis: {e}"))?;
        let events = read_events(&dir.join(EVENTS))?;
        let events_on_disk = events.len();
        let keys: BTreeMap<String, HexOpenings> = read_json(&dir.join(PRIVATE_KEYS))?;
        let keys = keys
            .iter()
            .map(|(p, o)| Ok((p.clone(), decode_openings(o)?)))
            .collect::<Result<BTreeMap<_, _>>>()?;
        let record =
            AuthRecord::restore(genesis, events, keys).map_err(|v| anyhow!("event log rejected at event {}: {}", v.index, v.kind))?;
        let accounts: BTreeMap<String, String> = read_json(&dir.join(ACCOUNTS))?;
        let accounts = accounts
            .into_iter()
            .map(|(id, h)| {
                let h: [u8; 64] = hex::decode(h)?.try_into().map_err(|_| anyhow!("bad credential hash"))?;
                Ok((id, h))
            })
            .collect::<Result<_>>()?;
        let pending = decode_openings(&read_json(&dir.join(PENDING))?)?;
        let repo = Repository::from_parts(record, idp.public_key(), accounts, pending);
        Ok(Self {
            dir: dir.to_path_buf(),
            deployment: Deployment::from_parts(idp, ca, repo, monitor_keys),
            credentials: read_json(&dir.join(CREDENTIALS))?,
            events_on_disk,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// The account `id`, created on first use.
    pub fn user<R: RngCore + CryptoRng>(&mut self, id: &str, rng: &mut R) -> Result<User> {
        if let Some(c) = self.credentials.get(id) {
            let c: [u8; 32] = hex::decode(c)?.try_into().map_err(|_| anyhow!("bad credential"))?;
            return Ok(User {
                id: id.into(),
                credential: Credential(c),
            });
        }
        let u = User::enroll(&mut self.deployment.repo, id, rng)?;
        self.credentials.insert(id.into(), hex::encode(u.credential.0));
        Ok(u)
    }

    pub fn snapshot_path(&self, epoch: u64) -> PathBuf {
        self.dir.join(format!("snapshots/epoch-{epoch}.bin"))
    }

    /// Snapshots every multiple of [`SNAPSHOT_EVERY`] reached by events
    /// after the first `from`.
    fn write_snapshots(&self, from: usize) -> Result<()> {
        let record = self.deployment.repo.record();
        let mut state = None;
        for (i, ev) in record.log().iter().enumerate().skip(from) {
            if ev.epoch % SNAPSHOT_EVERY != 0 {
                continue;
            }
            let s = state.get_or_insert_with(|| {
                let mut s = record.genesis().clone();
                for e in &record.log()[..i] {
                    s.apply(e).expect("logged events apply");
                }
                (s, i)
            });
            for e in &record.log()[s.1..=i] {
                s.0.apply(e).expect("logged events apply");
            }
            s.1 = i + 1;
            fs::create_dir_all(self.dir.join("snapshots"))?;
            fs::write(self.snapshot_path(ev.epoch), s.0.to_bytes())?;
        }
        Ok(())
    }

    /// Appends new events and rewrites the repository side files.
    pub fn save(&mut self) -> Result<()> {
        let record = self.deployment.repo.record();
        let log = record.log();
        if log.len() > self.events_on_disk {
            let mut f = BufWriter::new(OpenOptions::new().append(true).create(true).open(self.dir.join(EVENTS))?);
            for ev in &log[self.events_on_disk..] {
                let bytes = ev.to_bytes();
                f.write_all(&(bytes.len() as u32).to_be_bytes())?;
                f.write_all(&bytes)?;
            }
            f.flush()?;
            self.write_snapshots(self.events_on_disk)?;
            self.events_on_disk = log.len();
        }
        let keys: BTreeMap<&String, HexOpenings> = record.all_private_keys().iter().map(|(p, o)| (p, encode_openings(o))).collect();
        write_json(&self.dir.join(PRIVATE_KEYS), &keys)?;
        let accounts: BTreeMap<&str, String> = self.deployment.repo.accounts().map(|(id, h)| (id, hex::encode(h))).collect();
        write_json(&self.dir.join(ACCOUNTS), &accounts)?;
        write_json(&self.dir.join(PENDING), &encode_openings(self.deployment.repo.pending()))?;
        write_json(&self.dir.join(CREDENTIALS), &self.credentials)?;
        Ok(())
    }
}

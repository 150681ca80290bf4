use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};
use rand::rngs::OsRng;
use speranza_cli::bench;
use speranza_cli::state::{State, G};
use speranza_core::identity::Timestamp;
use speranza_core::protocols::{register_package, sign_package_jointly, verify_package, SignatureBundle, User};
use speranza_core::record::{quorum_check, verify_lookup, Policy};

#[derive(Parser)]
#[command(name = "speranza", version, about = "Privacy-preserving package signing")]
struct Cli {
    /// Deployment state directory.
    #[arg(long, global = true, default_value = ".speranza")]
    state_dir: PathBuf,
    /// Override the clock (Unix seconds).
    #[arg(long, global = true)]
    now: Option<u64>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Create identity provider, CA and monitor keys plus an empty record.
    Setup {
        #[arg(long, default_value_t = 3)]
        monitors: usize,
        /// Preload this many synthetic packages into the genesis record.
        #[arg(long, default_value_t = 0)]
        packages: usize,
    },
    /// Register a package to an identity.
    Register {
        #[arg(long)]
        id: String,
        #[arg(long)]
        package: String,
    },
    /// Sign an artifact and write its bundle.
    Sign {
        /// Signer identity; repeat for threshold policies.
        #[arg(long, required = true)]
        id: Vec<String>,
        #[arg(long)]
        package: String,
        artifact: PathBuf,
        /// Bundle path, by default the artifact path plus `.sprz`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Verify an artifact against its bundle and the monitored record.
    Verify {
        #[arg(long)]
        package: String,
        artifact: PathBuf,
        #[arg(long)]
        bundle: Option<PathBuf>,
        /// Monitor signatures required on the digest.
        #[arg(long, default_value_t = 2)]
        quorum: usize,
    },
    /// Print a package policy and its lookup proof.
    Lookup {
        #[arg(long)]
        package: String,
    },
    /// Replay the event log as every monitor and countersign the digest.
    Monitor,
    /// Run the benchmarks.
    Bench {
        #[arg(long, default_value_t = 1000)]
        packages: usize,
        #[arg(long, default_value_t = 30)]
        trials: usize,
        /// JSON sidecar path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn now(cli: &Cli) -> Timestamp {
    Timestamp(
        cli.now
            .unwrap_or_else(|| SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())),
    )
}

fn bundle_path(artifact: &Path, explicit: Option<&PathBuf>) -> PathBuf {
    explicit.cloned().unwrap_or_else(|| {
        let mut p = artifact.as_os_str().to_owned();
        p.push(".sprz");
        PathBuf::from(p)
    })
}

fn describe(policy: &Policy<G>) -> String {
    match policy {
        Policy::SingleOwner { owner } => format!("single owner {}", hex::encode(owner.encode())),
        Policy::Threshold { signers, threshold } => {
            format!("{threshold} of {} signers", signers.len())
        }
        Policy::HeadSigner { signers, .. } => format!("head signer plus {} signers", signers.len()),
    }
}

fn run(cli: &Cli) -> Result<()> {
    let now = now(cli);
    let mut rng = OsRng;
    let dir = &cli.state_dir;
    match &cli.cmd {
        Cmd::Setup { monitors, packages } => {
            let entries = bench::synthetic_entries(&speranza_core::pedersen::PublicParams::generate(), *packages);
            let s = State::init(dir, *monitors, entries, &mut rng)?;
            let d = s.deployment.repo.digest();
            println!("initialized {} with {packages} packages, {monitors} monitors", dir.display());
            println!("root {} epoch {}", hex::encode(d.root), d.epoch);
        }
        Cmd::Register { id, package } => {
            let mut s = State::open(dir)?;
            let user = s.user(id, &mut rng)?;
            let ev = register_package(&mut s.deployment, &user, package, &mut rng, now).map_err(|e| anyhow!("registration failed: {e}"))?;
            s.save()?;
            println!("registered {package} to {id} at epoch {}", ev.epoch);
        }
        Cmd::Sign {
            id,
            package,
            artifact,
            out,
        } => {
            let mut s = State::open(dir)?;
            let users: Vec<User> = id.iter().map(|i| s.user(i, &mut rng)).collect::<Result<_>>()?;
            let bytes = fs::read(artifact).with_context(|| format!("reading {}", artifact.display()))?;
            let refs: Vec<&User> = users.iter().collect();
            let bundle = sign_package_jointly(&mut s.deployment, &refs, package, &bytes, &mut rng, now)
                .map_err(|e| anyhow!("signing failed: {e}"))?;
            s.save()?;
            let path = bundle_path(artifact, out.as_ref());
            fs::write(&path, bundle.to_bytes())?;
            println!("wrote {} ({} bytes)", path.display(), bundle.to_bytes().len());
        }
        Cmd::Verify {
            package,
            artifact,
            bundle,
            quorum,
        } => {
            let mut s = State::open(dir)?;
            let bytes = fs::read(artifact).with_context(|| format!("reading {}", artifact.display()))?;
            let path = bundle_path(artifact, bundle.as_ref());
            let raw = fs::read(&path).with_context(|| format!("reading {}", path.display()))?;
            let mut b = SignatureBundle::<G>::from_bytes(&raw).map_err(|e| anyhow!("malformed bundle: {e}"))?;
            let digest = s
                .deployment
                .sync_monitors()
                .map_err(|v| anyhow!("monitors reject the record at event {}: {}", v.index, v.kind))?;
            if !quorum_check(&digest, &s.deployment.monitor_pks(), *quorum) {
                bail!("digest lacks a quorum of {quorum} monitor signatures");
            }
            if b.digest_ref != (digest.root, digest.epoch) && b.digest_ref.1 < digest.epoch {
                if let Some(fresh) = s.deployment.repo.refresh(package, &b) {
                    b = fresh;
                }
            }
            verify_package(&s.deployment.ca_pk(), s.deployment.pp(), &digest, package, &bytes, &b)?;
            println!(
                "OK: {package} verified at epoch {} ({} monitor signatures)",
                digest.epoch,
                digest.monitor_sigs.len()
            );
        }
        Cmd::Lookup { package } => {
            let s = State::open(dir)?;
            let d = s.deployment.repo.digest();
            let (policy, proof) = s.deployment.repo.lookup(package);
            println!("root {} epoch {}", hex::encode(d.root), d.epoch);
            match &policy {
                Some(p) => println!("policy: {}\npolicy bytes: {}", describe(p), hex::encode(p.to_bytes())),
                None => println!("policy: none (absent)"),
            }
            println!("proof ({} bytes): {}", proof.encoded_len(), hex::encode(proof.to_bytes()));
            if !verify_lookup(&d, package, policy.as_ref(), &proof) {
                bail!("verification failed at the lookup step: proof does not match the digest");
            }
        }
        Cmd::Monitor => {
            let mut s = State::open(dir)?;
            let events = s.deployment.repo.record().log().len();
            let digest = s
                .deployment
                .sync_monitors()
                .map_err(|v| anyhow!("violation at event {}: {}", v.index, v.kind))?;
            for epoch in (1..=digest.epoch).filter(|e| e % speranza_cli::state::SNAPSHOT_EVERY == 0) {
                let snap = s.snapshot_path(epoch);
                if snap.exists() {
                    let mut replay = s.deployment.repo.record().genesis().clone();
                    for ev in &s.deployment.repo.record().log()[..epoch as usize] {
                        replay.apply(ev).map_err(|e| anyhow!("replay: {e}"))?;
                    }
                    if fs::read(&snap)? != replay.to_bytes() {
                        bail!("snapshot {} disagrees with the log", snap.display());
                    }
                }
            }
            println!(
                "replayed {events} events; root {} epoch {}; {} of {} monitors signed",
                hex::encode(digest.root),
                digest.epoch,
                digest.monitor_sigs.len(),
                s.deployment.monitors.len()
            );
        }
        Cmd::Bench { packages, trials, out } => {
            if *trials < bench::MIN_TRIALS {
                bail!("--trials must be at least {}", bench::MIN_TRIALS);
            }
            let report = bench::run(*packages, *trials, &mut rng);
            print!("{}", report.to_table());
            if let Some(out) = out {
                fs::write(out, serde_json::to_string_pretty(&report)? + "\n")?;
                println!("wrote {}", out.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

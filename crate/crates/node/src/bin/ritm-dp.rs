//! Distribution point hosting one or more CAs.
//!
//! `keygen` writes a key file and the matching registry. `serve` runs the
//! CAs: it refreshes every CA once per period and revokes serials appended
//! to the revocations file (`ca_id_hex serial_hex` per line).

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Seek, SeekFrom};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use anyhow::Context;
use clap::{Parser, Subcommand};
use log::{info, warn};
use rand::rngs::OsRng;
use ritm_core::authdict::{CaId, SerialNumber, DEFAULT_CHAIN_LENGTH};
use ritm_core::ca::CertificateAuthority;
use ritm_core::dissemination::{DistributionPoint, Publication, Response, UpdateSource};
use ritm_node::http::serve;
use ritm_node::keys::KeyFile;
use ritm_node::{bind, init_logging, now};

#[derive(Parser)]
#[command(name = "ritm-dp", about = "Revocation distribution point")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate CA keys and the registry clients and agents load.
    Keygen {
        #[arg(long, default_value_t = 1)]
        cas: usize,
        #[arg(long)]
        delta: u64,
        #[arg(long)]
        keys: PathBuf,
        #[arg(long)]
        registry: PathBuf,
    },
    Serve {
        #[arg(long)]
        listen: String,
        #[arg(long)]
        keys: PathBuf,
        #[arg(long)]
        delta: u64,
        #[arg(long, default_value_t = DEFAULT_CHAIN_LENGTH)]
        chain_length: u64,
        #[arg(long)]
        revocations: Option<PathBuf>,
    },
}

fn main() -> anyhow::Result<()> {
    init_logging();
    match Cli::parse().cmd {
        Cmd::Keygen {
            cas,
            delta,
            keys,
            registry,
        } => {
            anyhow::ensure!(delta > 0, "--delta must be positive");
            let kf = KeyFile::generate(cas, &mut OsRng);
            std::fs::write(&keys, kf.to_text()).with_context(|| format!("writing {}", keys.display()))?;
            std::fs::write(&registry, kf.registry(delta).to_text())
                .with_context(|| format!("writing {}", registry.display()))?;
            Ok(())
        }
        Cmd::Serve {
            listen,
            keys,
            delta,
            chain_length,
            revocations,
        } => run(&listen, &keys, delta, chain_length, revocations),
    }
}

fn run(listen: &str, keys: &Path, delta: u64, chain_length: u64, revocations: Option<PathBuf>) -> anyhow::Result<()> {
    anyhow::ensure!(delta > 0, "--delta must be positive");
    let kf = KeyFile::load(keys)?;
    let mut dp = DistributionPoint::new(kf.registry(delta));
    let t = now();
    let mut cas = BTreeMap::new();
    for (id, key) in &kf.keys {
        let (ca, first) = CertificateAuthority::new(*id, key.clone(), delta, chain_length, t, &mut OsRng);
        dp.publish(Publication::Issuance(first))?;
        cas.insert(*id, ca);
    }
    let dp = Arc::new(Mutex::new(dp));
    let (listener, _) = bind(listen)?;
    {
        let dp = dp.clone();
        thread::spawn(move || serve(listener, move |ep| dp.lock().unwrap().fetch(ep, now()).unwrap_or_else(|_| Response::unavailable())));
    }
    let mut feed = revocations.map(RevocationFeed::new);
    loop {
        let t = now();
        if let Some(f) = &mut feed {
            let mut batches: BTreeMap<CaId, Vec<SerialNumber>> = BTreeMap::new();
            for (ca, sn) in f.poll() {
                batches.entry(ca).or_default().push(sn);
            }
            for (id, serials) in batches {
                let Some(ca) = cas.get_mut(&id) else {
                    warn!("revocation for unknown CA {id}");
                    continue;
                };
                match ca.revoke(&serials, t, &mut OsRng) {
                    Ok(m) => {
                        info!("CA {id}: revoked {} serial(s), n = {}", serials.len(), m.signed_root.n);
                        dp.lock().unwrap().publish(Publication::Issuance(m))?;
                    }
                    Err(e) => warn!("CA {id}: revocation rejected: {e}"),
                }
            }
        }
        for ca in cas.values_mut() {
            let p = ca.refresh(t, &mut OsRng);
            // re-publishing the current period's statement is harmless
            dp.lock().unwrap().publish(p).ok();
        }
        thread::sleep(Duration::from_millis(500));
    }
}

/// Tails the revocations file.
struct RevocationFeed {
    path: PathBuf,
    offset: u64,
}

impl RevocationFeed {
    fn new(path: PathBuf) -> Self {
        RevocationFeed { path, offset: 0 }
    }

    fn poll(&mut self) -> Vec<(CaId, SerialNumber)> {
        let Ok(mut f) = std::fs::File::open(&self.path) else {
            return Vec::new();
        };
        if f.seek(SeekFrom::Start(self.offset)).is_err() {
            return Vec::new();
        }
        let mut out = Vec::new();
        let mut r = BufReader::new(f);
        let mut line = String::new();
        // only complete lines are consumed
        while r.read_line(&mut line).unwrap_or(0) > 0 && line.ends_with('\n') {
            self.offset += line.len() as u64;
            let mut it = line.split_whitespace();
            match (it.next().map(str::parse::<CaId>), it.next().map(str::parse::<SerialNumber>)) {
                (Some(Ok(ca)), Some(Ok(sn))) => out.push((ca, sn)),
                _ if line.trim().is_empty() || line.starts_with('#') => {}
                _ => warn!("ignoring revocation line {:?}", line.trim()),
            }
            line.clear();
        }
        out
    }
}

//! Monitor. `verify` checks a misbehavior proof file and exits 0 when it
//! is valid, 1 otherwise. `watch` compares the signed roots served by
//! several edges and keeps any equivocation it finds.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::thread;
use std::time::Duration;

use anyhow::Context;
use clap::{Parser, Subcommand};
use log::{info, warn};
use ritm_core::authdict::{CaId, SignedRoot};
use ritm_core::dissemination::{Endpoint, UpdateSource};
use ritm_core::monitor::{compare_roots, verify_misbehavior, Comparison, MisbehaviorProof};
use ritm_core::registry::CaRegistry;
use ritm_node::http::HttpSource;
use ritm_node::{init_logging, now};

#[derive(Parser)]
#[command(name = "ritm-monitor", about = "Consistency monitor")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Exit 0 if the proof shows equivocation by a registered CA.
    Verify {
        proof: PathBuf,
        #[arg(long)]
        registry: PathBuf,
    },
    Watch {
        /// Edge servers, `http://host:port`; repeat for each.
        #[arg(long, required = true)]
        edge: Vec<String>,
        #[arg(long)]
        registry: PathBuf,
        #[arg(long, default_value_t = 60)]
        interval: u64,
        /// Directory proofs are written to.
        #[arg(long)]
        out: PathBuf,
        /// Stop after this many rounds.
        #[arg(long)]
        rounds: Option<u64>,
    },
}

fn main() -> ExitCode {
    init_logging();
    let result = match Cli::parse().cmd {
        Cmd::Verify { proof, registry } => verify(&proof, &registry),
        Cmd::Watch {
            edge,
            registry,
            interval,
            out,
            rounds,
        } => watch(&edge, &registry, interval, &out, rounds).map(|_| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn verify(path: &Path, registry: &Path) -> anyhow::Result<bool> {
    let registry = CaRegistry::load(registry)?;
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let Some(proof) = MisbehaviorProof::from_bytes(&bytes) else {
        println!("invalid: not a proof ({} bytes)", bytes.len());
        return Ok(false);
    };
    let Some(entry) = registry.get(&proof.ca_id) else {
        println!("invalid: CA {} not in registry", proof.ca_id);
        return Ok(false);
    };
    let ok = verify_misbehavior(&proof, &entry.key);
    if ok {
        println!("valid: CA {} signed two roots for n = {}", proof.ca_id, proof.root_a.n);
    } else {
        println!("invalid: proof does not show equivocation by CA {}", proof.ca_id);
    }
    Ok(ok)
}

fn watch(edges: &[String], registry: &Path, interval: u64, out: &Path, rounds: Option<u64>) -> anyhow::Result<()> {
    let registry = CaRegistry::load(registry)?;
    let mut sources = edges.iter().map(|e| HttpSource::parse(e)).collect::<anyhow::Result<Vec<_>>>()?;
    std::fs::create_dir_all(out)?;
    // every root seen per (CA, n), so a fork is caught even across rounds
    let mut seen: BTreeMap<(CaId, u64), SignedRoot> = BTreeMap::new();
    let mut round = 0;
    loop {
        for ca in registry.ids() {
            let key = registry.get(&ca).expect("listed").key;
            for (i, src) in sources.iter_mut().enumerate() {
                let resp = match src.fetch(&Endpoint::Root { ca }, now()) {
                    Ok(r) if r.status == 200 => r,
                    Ok(r) => {
                        warn!("edge {}: status {} for CA {ca}", edges[i], r.status);
                        continue;
                    }
                    Err(e) => {
                        warn!("edge {}: {e}", edges[i]);
                        continue;
                    }
                };
                let Some(root) = SignedRoot::from_bytes(&resp.body) else {
                    warn!("edge {}: malformed root for CA {ca}", edges[i]);
                    continue;
                };
                let prev = seen.entry((ca, root.n)).or_insert_with(|| root.clone());
                match compare_roots(prev, &root, &key) {
                    Ok(Comparison::Misbehavior(p)) => {
                        let file = out.join(format!("{}-{}.proof", ca.to_hex(), root.n));
                        std::fs::write(&file, p.to_bytes())?;
                        println!("misbehavior: CA {ca} at n = {}, proof in {}", root.n, file.display());
                    }
                    Ok(_) => {}
                    Err(e) => warn!("edge {}: {e}", edges[i]),
                }
            }
        }
        round += 1;
        info!("round {round} done");
        if rounds.is_some_and(|r| round >= r) {
            return Ok(());
        }
        thread::sleep(Duration::from_secs(interval));
    }
}

//! Revocation agent as a TCP relay.
//!
//! With `--upstream host:port` every accepted connection is relayed to
//! that server. With `--upstream transparent` the destination is the one
//! the client dialled, recovered from a NAT redirect.

use std::net::{TcpListener, TcpStream};
use std::path::PathBuf;
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use clap::Parser;
use log::{info, warn};
use rand::Rng;
use ritm_core::dissemination::ReplicaSet;
use ritm_core::ra::RevocationAgent;
use ritm_core::registry::CaRegistry;
use ritm_node::http::HttpSource;
use ritm_node::relay::{original_dst, relay};
use ritm_node::{bind, init_logging, now};

#[derive(Parser)]
#[command(name = "ritm-ra", about = "Revocation agent")]
struct Cli {
    #[arg(long)]
    listen: String,
    /// `host:port` or `transparent`.
    #[arg(long)]
    upstream: String,
    /// Edge server, `http://host:port`.
    #[arg(long)]
    edge: String,
    #[arg(long)]
    registry: PathBuf,
    #[arg(long)]
    delta: u64,
}

fn main() -> anyhow::Result<()> {
    init_logging();
    let cli = Cli::parse();
    anyhow::ensure!(cli.delta > 0, "--delta must be positive");
    let registry = CaRegistry::load(&cli.registry)?;
    let replicas = Arc::new(ReplicaSet::new(registry));
    let agent = Arc::new(RevocationAgent::new(replicas.clone(), cli.delta));
    let mut source = HttpSource::parse(&cli.edge)?;
    let transparent = cli.upstream == "transparent";

    // first sync before accepting, so early handshakes can be proven
    sync(&replicas, &mut source);
    {
        let agent = agent.clone();
        let delta = cli.delta as f64;
        thread::spawn(move || loop {
            // polls land in [0.9Δ, Δ] after the previous one
            let wait = rand::thread_rng().gen_range(0.9 * delta..=delta);
            thread::sleep(Duration::from_secs_f64(wait));
            sync(agent.replicas(), &mut source);
            agent.evict_idle(now());
        });
    }

    let (listener, _) = bind(&cli.listen)?;
    accept(listener, agent, transparent, cli.upstream);
    Ok(())
}

fn sync(replicas: &ReplicaSet, source: &mut HttpSource) {
    for (ca, r) in replicas.sync_all(source, now()) {
        match r {
            Ok(rep) if rep.apply.accepted > 0 => info!("CA {ca}: {} new issuance(s)", rep.apply.accepted),
            Ok(rep) if !rep.apply.rejected.is_empty() => warn!("CA {ca}: rejected {:?}", rep.apply.rejected),
            Ok(_) => {}
            Err(e) => warn!("CA {ca}: sync failed: {e}"),
        }
    }
}

fn accept(listener: TcpListener, agent: Arc<RevocationAgent>, transparent: bool, upstream: String) {
    for client in listener.incoming() {
        let Ok(client) = client else { continue };
        let agent = agent.clone();
        let upstream = upstream.clone();
        thread::spawn(move || {
            let dst = if transparent {
                match original_dst(&client) {
                    Ok(a) => a.to_string(),
                    Err(e) => {
                        warn!("no original destination: {e}");
                        return;
                    }
                }
            } else {
                upstream
            };
            match TcpStream::connect(&dst) {
                Ok(server) => {
                    if let Err(e) = relay(agent, client, server) {
                        warn!("relay to {dst} failed: {e}");
                    }
                }
                Err(e) => warn!("cannot reach {dst}: {e}"),
            }
        });
    }
}

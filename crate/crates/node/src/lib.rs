//! Shared plumbing for the networked parties: HTTP pull client and
//! server, CA key files, and the inline relay used by the agent.

pub mod http;
pub mod keys;
pub mod relay;

use std::io::Write;
use std::net::{SocketAddr, TcpListener};

use ritm_core::clock::{Clock, SystemClock};

pub fn now() -> u64 {
    SystemClock.now()
}

/// Binds and announces the address on stdout, so callers that pass
/// port 0 can find the listener.
pub fn bind(addr: &str) -> anyhow::Result<(TcpListener, SocketAddr)> {
    let l = TcpListener::bind(addr)?;
    let local = l.local_addr()?;
    println!("listening on {local}");
    std::io::stdout().flush()?;
    Ok((l, local))
}

pub fn init_logging() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
}

//! Caching edge in front of a distribution point.

use std::sync::Mutex;

use clap::Parser;
use ritm_core::dissemination::{EdgeServer, Response, UpdateSource};
use ritm_node::http::{serve, HttpSource};
use ritm_node::{bind, init_logging, now};

#[derive(Parser)]
#[command(name = "ritm-edge", about = "Caching edge server")]
struct Cli {
    #[arg(long)]
    listen: String,
    /// Distribution point, `http://host:port`.
    #[arg(long)]
    origin: String,
    /// Seconds a pulled log is served before pulling again.
    #[arg(long, default_value_t = 0)]
    ttl: u64,
}

fn main() -> anyhow::Result<()> {
    init_logging();
    let cli = Cli::parse();
    let edge = Mutex::new(EdgeServer::new(HttpSource::parse(&cli.origin)?, cli.ttl));
    let (listener, _) = bind(&cli.listen)?;
    serve(listener, move |ep| edge.lock().unwrap().fetch(ep, now()).unwrap_or_else(|_| Response::unavailable()));
    Ok(())
}

//! Harness client. Connects, runs the mini handshake, then watches the
//! connection for `--duration` seconds. Every verdict change and status is
//! written to the report as `timestamp event reason`.

use std::io::{ErrorKind, Read, Write};
use std::net::TcpStream;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::{Duration, Instant};

use anyhow::Context;
use clap::{ArgAction, Parser};
use ritm_core::client::{ClientPolicy, RitmClient};
use ritm_core::registry::CaRegistry;
use ritm_node::{init_logging, now};

#[derive(Parser)]
#[command(name = "ritm-client", about = "Harness RITM client")]
struct Cli {
    #[arg(long)]
    connect: String,
    #[arg(long)]
    registry: PathBuf,
    /// Treat a missing status as an attack.
    #[arg(long, action = ArgAction::Set, default_value_t = true)]
    expect_ritm: bool,
    #[arg(long)]
    delta: u64,
    #[arg(long)]
    report: PathBuf,
    /// Seconds to keep the connection open after the handshake.
    #[arg(long, default_value_t = 10)]
    duration: u64,
    /// Omit the RITM extension from the ClientHello.
    #[arg(long)]
    plain: bool,
}

fn main() -> anyhow::Result<()> {
    init_logging();
    let cli = Cli::parse();
    anyhow::ensure!(cli.delta > 0, "--delta must be positive");
    let mut policy = ClientPolicy::new(CaRegistry::load(&cli.registry)?, cli.delta);
    policy.expect_ritm = cli.expect_ritm;
    let mut client = RitmClient::new(Arc::new(policy), !cli.plain);

    let mut s = TcpStream::connect(&cli.connect).with_context(|| format!("connecting to {}", cli.connect))?;
    s.set_read_timeout(Some(Duration::from_millis(200)))?;
    s.write_all(&client.hello(now()))?;
    let start = Instant::now();
    let mut buf = vec![0u8; 16 * 1024];
    while client.is_open() && start.elapsed() < Duration::from_secs(cli.duration) {
        match s.read(&mut buf) {
            Ok(0) => break,
            Ok(n) => {
                let reply = client.on_server_bytes(&buf[..n], now());
                s.write_all(&reply)?;
            }
            Err(e) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => {}
            Err(e) => return Err(e.into()),
        }
        client.tick(now());
    }

    let mut report = String::new();
    for ev in client.events() {
        report.push_str(&format!("{ev}\n"));
    }
    report.push_str(&format!("{} end {:?}\n", now(), client.state()));
    std::fs::write(&cli.report, report).with_context(|| format!("writing {}", cli.report.display()))?;
    println!("{:?}", client.state());
    Ok(())
}

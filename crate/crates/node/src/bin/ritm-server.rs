//! Harness server: answers the mini handshake with a certificate issued
//! by one of the CAs in a key file, then streams application data.

use std::io::{ErrorKind, Read, Write};
use std::net::TcpStream;
use std::path::PathBuf;
use std::thread;
use std::time::{Duration, Instant};

use anyhow::Context;
use clap::Parser;
use log::debug;
use ritm_core::authdict::{CaId, SerialNumber};
use ritm_core::tls::stub::ServerPhase;
use ritm_core::tls::{Certificate, StubServer};
use ritm_node::keys::KeyFile;
use ritm_node::{bind, init_logging, now};

#[derive(Parser)]
#[command(name = "ritm-server", about = "Harness TLS server")]
struct Cli {
    #[arg(long)]
    listen: String,
    #[arg(long)]
    keys: PathBuf,
    /// Issuer, hex CA id.
    #[arg(long)]
    ca: CaId,
    /// Certificate serial, hex.
    #[arg(long)]
    serial: SerialNumber,
    #[arg(long, default_value = "server.test")]
    name: String,
    /// Seconds between application records; 0 sends none.
    #[arg(long, default_value_t = 1)]
    app_interval: u64,
}

fn main() -> anyhow::Result<()> {
    init_logging();
    let cli = Cli::parse();
    let kf = KeyFile::load(&cli.keys)?;
    let key = kf.get(&cli.ca).with_context(|| format!("CA {} not in key file", cli.ca))?;
    let cert = Certificate::issue(key, cli.ca, cli.serial.clone(), &cli.name, now() + 365 * 86_400).to_bytes();
    let (listener, _) = bind(&cli.listen)?;
    for s in listener.incoming() {
        let Ok(s) = s else { continue };
        let cert = cert.clone();
        let interval = cli.app_interval;
        thread::spawn(move || {
            if let Err(e) = session(s, cert, interval) {
                debug!("session ended: {e}");
            }
        });
    }
    Ok(())
}

fn session(mut s: TcpStream, cert: Vec<u8>, interval: u64) -> std::io::Result<()> {
    let mut server = StubServer::new(vec![cert]);
    s.set_read_timeout(Some(Duration::from_millis(200)))?;
    let mut buf = vec![0u8; 16 * 1024];
    let mut last_app = Instant::now();
    let mut seq = 0u64;
    loop {
        match s.read(&mut buf) {
            Ok(0) => return Ok(()),
            Ok(n) => {
                let out = server.on_client_bytes(&buf[..n]);
                s.write_all(&out)?;
                server.take_app_data();
            }
            Err(e) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => {}
            Err(e) => return Err(e),
        }
        match server.phase() {
            ServerPhase::Failed => return Ok(()),
            ServerPhase::Established if interval > 0 && last_app.elapsed() >= Duration::from_secs(interval) => {
                seq += 1;
                s.write_all(&server.app_data(format!("tick {seq}\n").as_bytes()))?;
                last_app = Instant::now();
            }
            _ => {}
        }
    }
}

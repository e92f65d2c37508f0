//! Inline TCP relay through a revocation agent.
//!
//! Each direction runs on its own thread; both share the connection's
//! parser state behind one lock. A ticker injects periodic statuses when
//! the server is silent. Writes toward the client happen under that lock
//! so injected and forwarded records never interleave.

use std::io::{self, Read, Write};
use std::net::{Shutdown, SocketAddr, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use log::debug;
use ritm_core::ra::{ConnKey, Connection, Direction, RevocationAgent};

use crate::now;

const TICK: Duration = Duration::from_millis(250);

struct Shared {
    conn: Mutex<Connection>,
    done: AtomicBool,
}

/// Relays `client` ↔ `server` until both directions close.
pub fn relay(agent: Arc<RevocationAgent>, client: TcpStream, server: TcpStream) -> io::Result<()> {
    let key = ConnKey::new(client.peer_addr()?, server.peer_addr()?);
    let shared = Arc::new(Shared {
        conn: Mutex::new(Connection::new(key)),
        done: AtomicBool::new(false),
    });
    client.set_nodelay(true).ok();
    server.set_nodelay(true).ok();

    let up = {
        let (agent, shared) = (agent.clone(), shared.clone());
        let (mut from, mut to) = (client.try_clone()?, server.try_clone()?);
        thread::spawn(move || {
            let mut buf = vec![0u8; 16 * 1024];
            loop {
                let n = match from.read(&mut buf) {
                    Ok(0) | Err(_) => break,
                    Ok(n) => n,
                };
                let out = agent.inspect(&mut shared.conn.lock().unwrap(), Direction::ClientToServer, &buf[..n], now());
                if to.write_all(&out).is_err() {
                    break;
                }
            }
            to.shutdown(Shutdown::Write).ok();
        })
    };
    let ticker = {
        let (agent, shared) = (agent.clone(), shared.clone());
        let mut to = client.try_clone()?;
        thread::spawn(move || {
            while !shared.done.load(Ordering::Relaxed) {
                thread::sleep(TICK);
                let mut conn = shared.conn.lock().unwrap();
                if let Some(rec) = agent.poll(&mut conn, now()) {
                    if to.write_all(&rec).is_err() {
                        break;
                    }
                }
            }
        })
    };

    let (mut from, mut to) = (server, client);
    let mut buf = vec![0u8; 16 * 1024];
    loop {
        let n = match from.read(&mut buf) {
            Ok(0) | Err(_) => break,
            Ok(n) => n,
        };
        let mut conn = shared.conn.lock().unwrap();
        let out = agent.inspect(&mut conn, Direction::ServerToClient, &buf[..n], now());
        if to.write_all(&out).is_err() {
            break;
        }
    }
    shared.done.store(true, Ordering::Relaxed);
    to.shutdown(Shutdown::Write).ok();
    up.join().ok();
    ticker.join().ok();
    agent.close(&shared.conn.lock().unwrap());
    debug!("{key:?} closed");
    Ok(())
}

/// Destination the client originally dialled, for connections redirected
/// to us by an iptables REDIRECT/TPROXY rule.
#[cfg(target_os = "linux")]
pub fn original_dst(stream: &TcpStream) -> io::Result<SocketAddr> {
    use std::net::{Ipv4Addr, SocketAddrV4};
    use std::os::fd::AsRawFd;
    const SO_ORIGINAL_DST: libc::c_int = 80;
    let mut addr: libc::sockaddr_in = unsafe { std::mem::zeroed() };
    let mut len = std::mem::size_of::<libc::sockaddr_in>() as libc::socklen_t;
    // SAFETY: addr and len describe a writable sockaddr_in of the stated size.
    let rc = unsafe {
        libc::getsockopt(
            stream.as_raw_fd(),
            libc::SOL_IP,
            SO_ORIGINAL_DST,
            &mut addr as *mut _ as *mut libc::c_void,
            &mut len,
        )
    };
    if rc != 0 {
        return Err(io::Error::last_os_error());
    }
    let ip = Ipv4Addr::from(u32::from_be(addr.sin_addr.s_addr));
    Ok(SocketAddr::V4(SocketAddrV4::new(ip, u16::from_be(addr.sin_port))))
}

#[cfg(not(target_os = "linux"))]
pub fn original_dst(_stream: &TcpStream) -> io::Result<SocketAddr> {
    Err(io::Error::new(io::ErrorKind::Unsupported, "transparent mode needs Linux"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ritm_core::dissemination::ReplicaSet;
    use ritm_core::registry::CaRegistry;
    use std::net::TcpListener;

    #[test]
    fn plain_bytes_pass_through() {
        let agent = Arc::new(RevocationAgent::new(Arc::new(ReplicaSet::new(CaRegistry::new())), 10));
        let echo = TcpListener::bind("127.0.0.1:0").unwrap();
        let echo_addr = echo.local_addr().unwrap();
        thread::spawn(move || {
            let (mut s, _) = echo.accept().unwrap();
            let mut buf = Vec::new();
            s.read_to_end(&mut buf).unwrap();
            s.write_all(&buf).unwrap();
        });
        let front = TcpListener::bind("127.0.0.1:0").unwrap();
        let front_addr = front.local_addr().unwrap();
        thread::spawn(move || {
            let (c, _) = front.accept().unwrap();
            let s = TcpStream::connect(echo_addr).unwrap();
            relay(agent, c, s).unwrap();
        });
        let data: Vec<u8> = (0..200_000u32).map(|i| (i * 7 % 251) as u8).collect();
        let mut c = TcpStream::connect(front_addr).unwrap();
        c.write_all(&data).unwrap();
        c.shutdown(Shutdown::Write).unwrap();
        let mut back = Vec::new();
        c.read_to_end(&mut back).unwrap();
        assert_eq!(back, data);
    }

    #[test]
    fn original_dst_fails_on_unredirected_socket() {
        let l = TcpListener::bind("127.0.0.1:0").unwrap();
        let _c = TcpStream::connect(l.local_addr().unwrap()).unwrap();
        let (s, _) = l.accept().unwrap();
        // without a NAT rule the kernel either refuses or reports the
        // local address itself
        match original_dst(&s) {
            Err(_) => {}
            Ok(a) => assert_eq!(a, s.local_addr().unwrap()),
        }
    }
}

//! Pull endpoints over TCP.

use std::io::{BufReader, BufWriter};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use log::{debug, warn};
use ritm_core::dissemination::http::{read_request, read_response, write_request, write_response};
use ritm_core::dissemination::{Endpoint, FetchError, Response, UpdateSource};

const IO_TIMEOUT: Duration = Duration::from_secs(10);

/// An edge or distribution point reached over HTTP.
#[derive(Clone, Debug)]
pub struct HttpSource {
    host: String,
}

impl HttpSource {
    /// Accepts `http://host:port` or `host:port`.
    pub fn parse(url: &str) -> anyhow::Result<Self> {
        let host = url.strip_prefix("http://").unwrap_or(url).trim_end_matches('/');
        anyhow::ensure!(!host.is_empty() && !host.contains('/'), "expected http://host:port, got {url}");
        anyhow::ensure!(host.contains(':'), "missing port in {url}");
        Ok(HttpSource { host: host.to_string() })
    }

    fn addr(&self) -> Option<SocketAddr> {
        self.host.to_socket_addrs().ok()?.next()
    }
}

impl UpdateSource for HttpSource {
    fn fetch(&mut self, ep: &Endpoint, _now: u64) -> Result<Response, FetchError> {
        let addr = self.addr().ok_or(FetchError::Unreachable)?;
        let stream = TcpStream::connect_timeout(&addr, IO_TIMEOUT).map_err(|_| FetchError::Unreachable)?;
        stream.set_read_timeout(Some(IO_TIMEOUT)).ok();
        let mut w = BufWriter::new(stream.try_clone().map_err(|_| FetchError::Unreachable)?);
        write_request(&mut w, ep, &self.host).map_err(|_| FetchError::Unreachable)?;
        read_response(&mut BufReader::new(stream)).map_err(|e| FetchError::BadResponse(e.to_string()))
    }
}

/// Serves pull requests, one thread per connection.
pub fn serve<H>(listener: TcpListener, handler: H)
where
    H: Fn(&Endpoint) -> Response + Send + Sync + 'static,
{
    let handler = Arc::new(handler);
    for stream in listener.incoming() {
        let Ok(stream) = stream else { continue };
        let handler = handler.clone();
        thread::spawn(move || {
            if let Err(e) = answer(stream, &*handler) {
                debug!("request failed: {e}");
            }
        });
    }
}

fn answer(stream: TcpStream, handler: &dyn Fn(&Endpoint) -> Response) -> anyhow::Result<()> {
    stream.set_read_timeout(Some(IO_TIMEOUT))?;
    let mut r = BufReader::new(stream.try_clone()?);
    let resp = match read_request(&mut r) {
        Ok(path) => match Endpoint::parse(&path) {
            Some(ep) => handler(&ep),
            None => Response::not_found(),
        },
        Err(e) => {
            warn!("bad request: {e}");
            Response {
                status: 400,
                body: Vec::new(),
                stale: false,
            }
        }
    };
    write_response(&mut BufWriter::new(stream), &resp)?;
    Ok(())
}

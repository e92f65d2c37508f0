//! Pull API shared by distribution points and edges, and a minimal
//! HTTP/1.1 request/response codec for it.
//!
//! Endpoints:
//! - `GET /dict/{ca_id}/updates?from={n}` → framed issuance messages
//! - `GET /dict/{ca_id}/freshness` → one freshness message
//! - `GET /dict/{ca_id}/root` → current signed root

use std::io::{self, BufRead, Read, Write};

use thiserror::Error;

use crate::authdict::CaId;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Endpoint {
    Updates { ca: CaId, from: u64 },
    Freshness { ca: CaId },
    Root { ca: CaId },
}

impl Endpoint {
    pub fn ca(&self) -> CaId {
        match self {
            Endpoint::Updates { ca, .. } | Endpoint::Freshness { ca } | Endpoint::Root { ca } => *ca,
        }
    }

    pub fn path(&self) -> String {
        match self {
            Endpoint::Updates { ca, from } => format!("/dict/{}/updates?from={}", ca.to_hex(), from),
            Endpoint::Freshness { ca } => format!("/dict/{}/freshness", ca.to_hex()),
            Endpoint::Root { ca } => format!("/dict/{}/root", ca.to_hex()),
        }
    }

    pub fn parse(path: &str) -> Option<Self> {
        let rest = path.strip_prefix("/dict/")?;
        let (ca, tail) = rest.split_once('/')?;
        let ca: CaId = ca.parse().ok()?;
        if ca.to_hex() != ca_lower(rest) {
            return None;
        }
        match tail {
            "freshness" => Some(Endpoint::Freshness { ca }),
            "root" => Some(Endpoint::Root { ca }),
            _ => {
                let from = tail.strip_prefix("updates?from=")?;
                if from.is_empty() || !from.bytes().all(|b| b.is_ascii_digit()) {
                    return None;
                }
                Some(Endpoint::Updates { ca, from: from.parse().ok()? })
            }
        }
    }
}

fn ca_lower(rest: &str) -> String {
    rest.split('/').next().unwrap_or("").to_ascii_lowercase()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Response {
    pub status: u16,
    pub body: Vec<u8>,
    /// Set by an edge serving cached data because its origin is unreachable.
    pub stale: bool,
}

impl Response {
    pub fn ok(body: Vec<u8>) -> Self {
        Response { status: 200, body, stale: false }
    }

    pub fn not_found() -> Self {
        Response { status: 404, body: Vec::new(), stale: false }
    }

    pub fn unavailable() -> Self {
        Response { status: 503, body: Vec::new(), stale: false }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FetchError {
    #[error("upstream unreachable")]
    Unreachable,
    #[error("malformed response: {0}")]
    BadResponse(String),
}

/// Anything that answers pull requests: a distribution point, an edge, or a
/// remote server reached over HTTP.
pub trait UpdateSource {
    fn fetch(&mut self, ep: &Endpoint, now: u64) -> Result<Response, FetchError>;
}

impl<T: UpdateSource + ?Sized> UpdateSource for &mut T {
    fn fetch(&mut self, ep: &Endpoint, now: u64) -> Result<Response, FetchError> {
        (**self).fetch(ep, now)
    }
}

impl<T: UpdateSource + ?Sized> UpdateSource for Box<T> {
    fn fetch(&mut self, ep: &Endpoint, now: u64) -> Result<Response, FetchError> {
        (**self).fetch(ep, now)
    }
}

const MAX_HEADER_LINES: usize = 64;
const MAX_BODY: usize = 64 << 20;

pub fn write_request<W: Write>(w: &mut W, ep: &Endpoint, host: &str) -> io::Result<()> {
    write!(w, "GET {} HTTP/1.1\r\nHost: {}\r\nConnection: close\r\n\r\n", ep.path(), host)?;
    w.flush()
}

#[derive(Debug, Error)]
pub enum HttpError {
    #[error("bad request line")]
    BadRequestLine,
    #[error("unsupported method {0}")]
    Method(String),
    #[error("malformed header")]
    BadHeader,
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Reads one request, returning the raw path (routing is up to the caller).
pub fn read_request<R: BufRead>(r: &mut R) -> Result<String, HttpError> {
    let mut line = String::new();
    r.read_line(&mut line)?;
    let mut parts = line.trim_end().split(' ');
    let (Some(method), Some(path), Some(version)) = (parts.next(), parts.next(), parts.next()) else {
        return Err(HttpError::BadRequestLine);
    };
    if !version.starts_with("HTTP/1.") {
        return Err(HttpError::BadRequestLine);
    }
    if method != "GET" {
        return Err(HttpError::Method(method.to_string()));
    }
    let path = path.to_string();
    for _ in 0..MAX_HEADER_LINES {
        let mut h = String::new();
        if r.read_line(&mut h)? == 0 || h == "\r\n" || h == "\n" {
            return Ok(path);
        }
    }
    Err(HttpError::BadHeader)
}

pub fn write_response<W: Write>(w: &mut W, resp: &Response) -> io::Result<()> {
    let reason = match resp.status {
        200 => "OK",
        400 => "Bad Request",
        404 => "Not Found",
        503 => "Service Unavailable",
        _ => "Status",
    };
    write!(w, "HTTP/1.1 {} {}\r\n", resp.status, reason)?;
    write!(w, "Content-Type: application/octet-stream\r\n")?;
    write!(w, "Content-Length: {}\r\n", resp.body.len())?;
    if resp.stale {
        write!(w, "X-Ritm-Stale: 1\r\n")?;
    }
    write!(w, "Connection: close\r\n\r\n")?;
    w.write_all(&resp.body)?;
    w.flush()
}

pub fn read_response<R: BufRead>(r: &mut R) -> Result<Response, HttpError> {
    let mut line = String::new();
    r.read_line(&mut line)?;
    let mut parts = line.trim_end().splitn(3, ' ');
    let version = parts.next().ok_or(HttpError::BadRequestLine)?;
    if !version.starts_with("HTTP/1.") {
        return Err(HttpError::BadRequestLine);
    }
    let status: u16 = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or(HttpError::BadRequestLine)?;
    let mut content_length = None;
    let mut stale = false;
    let mut done = false;
    for _ in 0..MAX_HEADER_LINES {
        let mut h = String::new();
        if r.read_line(&mut h)? == 0 || h == "\r\n" || h == "\n" {
            done = true;
            break;
        }
        let (name, value) = h.split_once(':').ok_or(HttpError::BadHeader)?;
        let value = value.trim();
        if name.eq_ignore_ascii_case("content-length") {
            content_length = Some(value.parse::<usize>().map_err(|_| HttpError::BadHeader)?);
        } else if name.eq_ignore_ascii_case("x-ritm-stale") {
            stale = value == "1";
        }
    }
    if !done {
        return Err(HttpError::BadHeader);
    }
    let mut body = Vec::new();
    match content_length {
        Some(n) if n <= MAX_BODY => {
            body.resize(n, 0);
            r.read_exact(&mut body)?;
        }
        Some(_) => return Err(HttpError::BadHeader),
        None => {
            r.take(MAX_BODY as u64).read_to_end(&mut body)?;
        }
    }
    Ok(Response { status, body, stale })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    #[test]
    fn endpoint_paths_are_exact() {
        let ca = CaId::from_u64(0xab);
        assert_eq!(Endpoint::Updates { ca, from: 12 }.path(), "/dict/00000000000000ab/updates?from=12");
        assert_eq!(Endpoint::Freshness { ca }.path(), "/dict/00000000000000ab/freshness");
        assert_eq!(Endpoint::Root { ca }.path(), "/dict/00000000000000ab/root");
        for ep in [Endpoint::Updates { ca, from: 0 }, Endpoint::Freshness { ca }, Endpoint::Root { ca }] {
            assert_eq!(Endpoint::parse(&ep.path()), Some(ep));
        }
    }

    #[test]
    fn bad_paths() {
        for p in [
            "/dict/00ab/root",
            "/dict/00000000000000ab/updates?from=",
            "/dict/00000000000000ab/updates?from=-1",
            "/dict/00000000000000ab/updates",
            "/other",
            "/dict/00000000000000ab/root/x",
        ] {
            assert_eq!(Endpoint::parse(p), None, "{p}");
        }
    }

    #[test]
    fn request_response_round_trip() {
        let ep = Endpoint::Root { ca: CaId::from_u64(1) };
        let mut buf = Vec::new();
        write_request(&mut buf, &ep, "edge").unwrap();
        let path = read_request(&mut Cursor::new(buf)).unwrap();
        assert_eq!(Endpoint::parse(&path), Some(ep));

        let resp = Response { status: 200, body: vec![1, 2, 3], stale: true };
        let mut buf = Vec::new();
        write_response(&mut buf, &resp).unwrap();
        assert_eq!(read_response(&mut Cursor::new(buf)).unwrap(), resp);
    }
}

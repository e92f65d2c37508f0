//! TLS 1.2 handshake message parsing and construction.
//!
//! Only the plaintext messages an on-path observer needs are decoded:
//! hellos (with extensions) and the certificate chain.

use thiserror::Error;

use super::record::{TlsRecord, CT_HANDSHAKE, MAX_PLAINTEXT, VERSION_TLS12};

pub const HS_CLIENT_HELLO: u8 = 1;
pub const HS_SERVER_HELLO: u8 = 2;
pub const HS_CERTIFICATE: u8 = 11;
pub const HS_SERVER_KEY_EXCHANGE: u8 = 12;
pub const HS_SERVER_HELLO_DONE: u8 = 14;
pub const HS_CLIENT_KEY_EXCHANGE: u8 = 16;
pub const HS_FINISHED: u8 = 20;

pub const EXT_SERVER_NAME: u16 = 0x0000;
/// Opt-in extension a client sends to request revocation statuses.
pub const EXT_RITM: u16 = 0xFF02;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("malformed handshake: {0}")]
pub struct ParseError(pub &'static str);

/// Bounds-checked big-endian reader.
struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Reader { buf }
    }

    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8], ParseError> {
        if self.buf.len() < n {
            return Err(ParseError(what));
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    fn u8(&mut self, what: &'static str) -> Result<u8, ParseError> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &'static str) -> Result<u16, ParseError> {
        let b = self.take(2, what)?;
        Ok(u16::from_be_bytes([b[0], b[1]]))
    }

    fn u24(&mut self, what: &'static str) -> Result<usize, ParseError> {
        let b = self.take(3, what)?;
        Ok(((b[0] as usize) << 16) | ((b[1] as usize) << 8) | b[2] as usize)
    }

    fn vec8(&mut self, what: &'static str) -> Result<&'a [u8], ParseError> {
        let n = self.u8(what)? as usize;
        self.take(n, what)
    }

    fn vec16(&mut self, what: &'static str) -> Result<&'a [u8], ParseError> {
        let n = self.u16(what)? as usize;
        self.take(n, what)
    }

    fn vec24(&mut self, what: &'static str) -> Result<&'a [u8], ParseError> {
        let n = self.u24(what)?;
        self.take(n, what)
    }

    fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HandshakeMessage {
    pub msg_type: u8,
    pub body: Vec<u8>,
}

impl HandshakeMessage {
    pub fn encode_into(&self, out: &mut Vec<u8>) {
        out.push(self.msg_type);
        let len = self.body.len();
        out.extend_from_slice(&[(len >> 16) as u8, (len >> 8) as u8, len as u8]);
        out.extend_from_slice(&self.body);
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(4 + self.body.len());
        self.encode_into(&mut out);
        out
    }
}

/// Splits complete handshake messages off the front of `buf`; returns
/// them with the number of bytes consumed.
pub fn split_handshake_messages(buf: &[u8]) -> (Vec<HandshakeMessage>, usize) {
    let mut out = Vec::new();
    let mut off = 0;
    while buf.len() - off >= 4 {
        let len = ((buf[off + 1] as usize) << 16) | ((buf[off + 2] as usize) << 8) | buf[off + 3] as usize;
        if buf.len() - off - 4 < len {
            break;
        }
        out.push(HandshakeMessage {
            msg_type: buf[off],
            body: buf[off + 4..off + 4 + len].to_vec(),
        });
        off += 4 + len;
    }
    (out, off)
}

/// Wraps handshake messages in as many handshake records as needed.
pub fn handshake_records(version: u16, msgs: &[HandshakeMessage]) -> Vec<u8> {
    let mut flat = Vec::new();
    for m in msgs {
        m.encode_into(&mut flat);
    }
    let mut out = Vec::with_capacity(flat.len() + 16);
    for chunk in flat.chunks(MAX_PLAINTEXT) {
        TlsRecord::new(CT_HANDSHAKE, version, chunk.to_vec()).encode_into(&mut out);
    }
    out
}

pub type Extension = (u16, Vec<u8>);

fn parse_extensions(r: &mut Reader<'_>) -> Result<Vec<Extension>, ParseError> {
    if r.is_empty() {
        return Ok(Vec::new());
    }
    let block = r.vec16("extensions")?;
    let mut er = Reader::new(block);
    let mut out = Vec::new();
    while !er.is_empty() {
        let ty = er.u16("extension type")?;
        let data = er.vec16("extension data")?;
        out.push((ty, data.to_vec()));
    }
    if !r.is_empty() {
        return Err(ParseError("trailing bytes after extensions"));
    }
    Ok(out)
}

fn encode_extensions(exts: &[Extension], out: &mut Vec<u8>) {
    if exts.is_empty() {
        return;
    }
    let mut block = Vec::new();
    for (ty, data) in exts {
        block.extend_from_slice(&ty.to_be_bytes());
        block.extend_from_slice(&(data.len() as u16).to_be_bytes());
        block.extend_from_slice(data);
    }
    out.extend_from_slice(&(block.len() as u16).to_be_bytes());
    out.extend_from_slice(&block);
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClientHello {
    pub version: u16,
    pub random: [u8; 32],
    pub session_id: Vec<u8>,
    pub cipher_suites: Vec<u16>,
    pub compression_methods: Vec<u8>,
    pub extensions: Vec<Extension>,
}

impl Default for ClientHello {
    fn default() -> Self {
        ClientHello {
            version: VERSION_TLS12,
            random: [0; 32],
            session_id: Vec::new(),
            // ECDHE-RSA-AES128-GCM-SHA256, ECDHE-ECDSA-AES128-GCM-SHA256
            cipher_suites: vec![0xc02f, 0xc02b],
            compression_methods: vec![0],
            extensions: Vec::new(),
        }
    }
}

impl ClientHello {
    pub fn parse(body: &[u8]) -> Result<Self, ParseError> {
        let mut r = Reader::new(body);
        let version = r.u16("client version")?;
        let random: [u8; 32] = r.take(32, "random")?.try_into().unwrap();
        let session_id = r.vec8("session id")?.to_vec();
        let suites = r.vec16("cipher suites")?;
        if suites.len() % 2 != 0 {
            return Err(ParseError("odd cipher suite list"));
        }
        let cipher_suites = suites.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect();
        let compression_methods = r.vec8("compression")?.to_vec();
        let extensions = parse_extensions(&mut r)?;
        Ok(ClientHello {
            version,
            random,
            session_id,
            cipher_suites,
            compression_methods,
            extensions,
        })
    }

    pub fn to_message(&self) -> HandshakeMessage {
        let mut b = Vec::new();
        b.extend_from_slice(&self.version.to_be_bytes());
        b.extend_from_slice(&self.random);
        b.push(self.session_id.len() as u8);
        b.extend_from_slice(&self.session_id);
        b.extend_from_slice(&((self.cipher_suites.len() * 2) as u16).to_be_bytes());
        for s in &self.cipher_suites {
            b.extend_from_slice(&s.to_be_bytes());
        }
        b.push(self.compression_methods.len() as u8);
        b.extend_from_slice(&self.compression_methods);
        encode_extensions(&self.extensions, &mut b);
        HandshakeMessage {
            msg_type: HS_CLIENT_HELLO,
            body: b,
        }
    }

    pub fn has_extension(&self, ty: u16) -> bool {
        self.extensions.iter().any(|(t, _)| *t == ty)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ServerHello {
    pub version: u16,
    pub random: [u8; 32],
    pub session_id: Vec<u8>,
    pub cipher_suite: u16,
    pub compression_method: u8,
    pub extensions: Vec<Extension>,
}

impl Default for ServerHello {
    fn default() -> Self {
        ServerHello {
            version: VERSION_TLS12,
            random: [0; 32],
            session_id: Vec::new(),
            cipher_suite: 0xc02f,
            compression_method: 0,
            extensions: Vec::new(),
        }
    }
}

impl ServerHello {
    pub fn parse(body: &[u8]) -> Result<Self, ParseError> {
        let mut r = Reader::new(body);
        let version = r.u16("server version")?;
        let random: [u8; 32] = r.take(32, "random")?.try_into().unwrap();
        let session_id = r.vec8("session id")?.to_vec();
        let cipher_suite = r.u16("cipher suite")?;
        let compression_method = r.u8("compression")?;
        let extensions = parse_extensions(&mut r)?;
        Ok(ServerHello {
            version,
            random,
            session_id,
            cipher_suite,
            compression_method,
            extensions,
        })
    }

    pub fn to_message(&self) -> HandshakeMessage {
        let mut b = Vec::new();
        b.extend_from_slice(&self.version.to_be_bytes());
        b.extend_from_slice(&self.random);
        b.push(self.session_id.len() as u8);
        b.extend_from_slice(&self.session_id);
        b.extend_from_slice(&self.cipher_suite.to_be_bytes());
        b.push(self.compression_method);
        encode_extensions(&self.extensions, &mut b);
        HandshakeMessage {
            msg_type: HS_SERVER_HELLO,
            body: b,
        }
    }
}

/// Certificate chain as raw certificate blobs, leaf first.
pub fn parse_certificate_list(body: &[u8]) -> Result<Vec<Vec<u8>>, ParseError> {
    let mut r = Reader::new(body);
    let list = r.vec24("certificate list")?;
    if !r.is_empty() {
        return Err(ParseError("trailing bytes after certificate list"));
    }
    let mut lr = Reader::new(list);
    let mut out = Vec::new();
    while !lr.is_empty() {
        let cert = lr.vec24("certificate")?;
        if cert.is_empty() {
            return Err(ParseError("empty certificate"));
        }
        out.push(cert.to_vec());
    }
    Ok(out)
}

pub fn certificate_message(chain: &[Vec<u8>]) -> HandshakeMessage {
    let mut list = Vec::new();
    for c in chain {
        let len = c.len();
        list.extend_from_slice(&[(len >> 16) as u8, (len >> 8) as u8, len as u8]);
        list.extend_from_slice(c);
    }
    let len = list.len();
    let mut body = vec![(len >> 16) as u8, (len >> 8) as u8, len as u8];
    body.extend_from_slice(&list);
    HandshakeMessage {
        msg_type: HS_CERTIFICATE,
        body,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HandshakeKind {
    ClientHello,
    ServerHello,
    Certificate,
    Finished,
    Other(u8),
}

/// What an on-path observer learns from one handshake message.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HandshakeView {
    pub kind: HandshakeKind,
    pub version: Option<u16>,
    pub extensions: Vec<Extension>,
    pub certificates: Vec<Vec<u8>>,
}

impl HandshakeView {
    pub fn from_message(m: &HandshakeMessage) -> Result<Self, ParseError> {
        let mut view = HandshakeView {
            kind: HandshakeKind::Other(m.msg_type),
            version: None,
            extensions: Vec::new(),
            certificates: Vec::new(),
        };
        match m.msg_type {
            HS_CLIENT_HELLO => {
                let ch = ClientHello::parse(&m.body)?;
                view.kind = HandshakeKind::ClientHello;
                view.version = Some(ch.version);
                view.extensions = ch.extensions;
            }
            HS_SERVER_HELLO => {
                let sh = ServerHello::parse(&m.body)?;
                view.kind = HandshakeKind::ServerHello;
                view.version = Some(sh.version);
                view.extensions = sh.extensions;
            }
            HS_CERTIFICATE => {
                view.kind = HandshakeKind::Certificate;
                view.certificates = parse_certificate_list(&m.body)?;
            }
            HS_FINISHED => view.kind = HandshakeKind::Finished,
            _ => {}
        }
        Ok(view)
    }

    pub fn has_extension(&self, ty: u16) -> bool {
        self.extensions.iter().any(|(t, _)| *t == ty)
    }
}

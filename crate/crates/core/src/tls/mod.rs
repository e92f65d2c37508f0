//! Minimal TLS 1.2 wire handling for on-path inspection.

pub mod cert;
pub mod handshake;
pub mod record;
pub mod scan;
pub mod stub;

pub use cert::Certificate;
pub use handshake::*;
pub use record::*;
pub use scan::{RecordScanner, ScanEvent};
pub use stub::StubServer;

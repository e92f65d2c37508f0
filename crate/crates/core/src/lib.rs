//! Revocation in the middle.
//!
//! CAs publish append-only authenticated dictionaries of revoked serials,
//! a pull-based dissemination layer replicates them to revocation agents,
//! and agents sitting inline on TLS paths attach fresh revocation statuses
//! that clients verify before (and while) trusting a server certificate.

pub mod authdict;
pub mod ca;
pub mod client;
pub mod clock;
pub mod dissemination;
pub mod monitor;
pub mod ra;
pub mod registry;
pub mod tls;

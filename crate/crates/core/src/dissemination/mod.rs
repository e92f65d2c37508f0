//! Pull-based dissemination: CAs publish to a distribution point, edges
//! cache its logs, and RAs pull new revocations and freshness statements
//! every Δ. Nothing on this path is trusted; every message is checked
//! against CA signatures or hash chains.

mod bandwidth;
mod edge;
pub mod http;
mod message;
mod point;
mod sync;

pub use bandwidth::{bandwidth_account, PublicationRecord};
pub use edge::EdgeServer;
pub use http::{Endpoint, FetchError, Response, UpdateSource};
pub use message::{decode_issuances, encode_issuances, frame, unframe, FreshnessMessage, IssuanceMessage, Publication};
pub use point::{DistributionPoint, PublishError, UpdateLog};
pub use sync::{ra_sync, ApplyReport, ProveError, Replica, ReplicaSet, SyncBatch, SyncCursor, SyncError, SyncReport};

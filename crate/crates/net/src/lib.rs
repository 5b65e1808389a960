//! Collaborative editing over WebSockets.
//!
//! [`hub`] is the synchronous server state machine, [`replica`] the matching
//! client state. [`server`] and [`client`] put them on the wire, and
//! [`script`] replays seeded schedules against a live server.

pub mod client;
pub mod hub;
pub mod protocol;
pub mod replica;
pub mod script;
pub mod server;

pub use client::{Client, ClientError};
pub use hub::{Hub, HubError, Mode, Outbound};
pub use protocol::WireMsg;
pub use replica::{Replica, ReplicaError};
pub use script::{run_script, Event, Outcome, ScriptConfig, ScriptError};
pub use server::{serve, serve_on, ServerHandle, Snapshot};

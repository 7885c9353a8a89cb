//! Operator console server.

mod protocol;
mod server;
mod sha1;
pub mod ws;

pub use protocol::{parse_inbound, Envelope, Inbound, InboundError, Published, PROTOCOL_SCHEMA};
pub use server::{Broadcaster, GatewayServer, SEND_QUEUE_BOUND};
pub use sha1::sha1;

#[derive(Debug, thiserror::Error)]
pub enum GatewayError {
    #[error("cannot bind {addr}: {message}")]
    BindFailure { addr: String, message: String },
    #[error("websocket handshake failed: {0}")]
    Handshake(String),
    #[error("websocket protocol error: {0}")]
    Protocol(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

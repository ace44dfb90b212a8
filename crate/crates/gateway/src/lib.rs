//! Command line and WebSocket front end for `morpho-core`.

pub mod cli;
pub mod live;
pub mod protocol;
pub mod server;

pub use live::LiveSession;
pub use protocol::{ClientMessage, ServerMessage, SessionStatus};

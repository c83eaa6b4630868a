//! Assume-guarantee contract synthesis for networks of coupled discrete-time
//! linear systems, with zonotopic sets and linear programming throughout.

pub mod geom;
pub mod lpcore;
mod serde_util;
pub mod sysmodel;
pub mod viability;
pub mod contracts;
pub mod synthesis;
pub mod runtime;

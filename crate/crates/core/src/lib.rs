//! Session-typed actors: Scribble protocols, endpoint projection, FSM
//! monitors and an in-process protocol broker.

pub mod broker;
pub mod corpus;
pub mod monitor;
pub mod parallel;
pub mod projection;
pub mod runtime;
pub mod scribble;

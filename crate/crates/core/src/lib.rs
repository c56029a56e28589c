//! Queuing Petri net toolkit for network services.

pub mod model;
pub mod parser;
pub mod engine;
pub mod analysis;
pub mod placement;

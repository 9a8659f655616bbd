//! Detailed lumped-parameter models of vacuum gripping systems and their
//! automatic abstraction into state machines of decreasing modeling depth.

pub mod assembly;
pub mod bench;
pub mod cli;
pub mod explorer;
pub mod graph;
pub mod io;
pub mod machine;
pub mod model;
pub mod network;
pub mod pneumatics;
pub mod reference;
pub mod trace;
pub mod units;

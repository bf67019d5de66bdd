//! File formats, corpus readers, parallel drivers and the command-line
//! pipeline for the retok vocabulary retrofit toolkit. The computation
//! itself lives in [`retok_core`].

pub mod cli;
pub mod config;
pub mod corpus;
pub mod fixture;
pub mod format;
pub mod parallel;
pub mod pipeline;
pub mod pretok;
pub mod report;

pub use retok_core as core;

//! Static API-misuse detection over Java sources and the benchmark harness
//! used to evaluate the detectors.

pub mod bench;
pub mod config;
pub mod detect;
pub mod extract;
pub mod mining;
pub mod model;
pub mod par;
pub mod pipeline;
pub mod review;

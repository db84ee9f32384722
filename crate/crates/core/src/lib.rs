//! Polar codes and polar subcodes with successive cancellation, list and
//! sequential (stack) decoding.
//!
//! The sequential decoder explores the code tree best-first, ranking partial
//! paths by their min-sum path metric corrected by a precomputed bias
//! function, and bounds its work by a per-phase visit budget `L` and a
//! priority queue of capacity `D`.

pub mod bias;
pub mod channel;
pub mod construction;
pub mod datapath;
pub mod decoders;
pub mod encoder;
pub mod gf2;
pub mod harness;
pub mod queue;

//! Reference-frame-independent QKD with fewer prepared states: SDP bounds on
//! the RFI quantity C, channel and source models, decoy-state finite-key
//! analysis and rate optimization.

// Negated comparisons are deliberate: they reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod cli;
pub mod finite_key;
pub mod linalg;
pub mod optimizer;
pub mod pipeline;
pub mod rfi;
pub mod sdp;

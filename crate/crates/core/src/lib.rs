//! Block compression capacity models, relay codecs and fee-volatility simulation.

// negated float comparisons are how NaN parameters get rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod block;
pub mod capacity;
pub mod error;
pub mod exp1;
pub mod exp2;
pub mod mempool;
pub mod protocols;
pub mod sketches;
pub mod stats;
pub mod tx;

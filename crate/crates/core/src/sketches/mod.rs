//! Probabilistic membership and set-difference sketches.

pub mod bloom;
pub mod hash;
pub mod iblt;

pub use bloom::{bloom_params, BloomFilter};
pub use hash::{keyed_digest64, short_id};
pub use iblt::{assured_cells, Cell, DecodeFailure, Difference, Iblt};

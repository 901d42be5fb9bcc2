//! Transactions per block under each protocol's size model.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::protocols::compact::{COMPACT_CONSTANT_BYTES, SHORTID_BYTES};
use crate::protocols::graphene::{plan, GrapheneConfig};
use crate::protocols::ipfs::CID_BYTES;
use crate::protocols::xthin::HASH_BYTES;
use crate::protocols::Protocol;

pub const MIB: u64 = 1 << 20;

type SizeFn = Arc<dyn Fn(u64) -> u64 + Send + Sync>;

/// Block size as a function of transaction count.
#[derive(Clone)]
pub enum SizeModel {
    /// `overhead + bytes_per_tx * n`.
    ClosedForm {
        protocol: Protocol,
        overhead: u64,
        bytes_per_tx: u64,
    },
    /// Size measured or computed for each `n`; must be non-decreasing.
    Empirical {
        protocol: Protocol,
        overhead: u64,
        size: SizeFn,
    },
    /// Size independent of `n`.
    Constant { protocol: Protocol, bytes: u64 },
}

impl fmt::Debug for SizeModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SizeModel::ClosedForm {
                protocol,
                overhead,
                bytes_per_tx,
            } => write!(f, "ClosedForm({protocol}, {overhead} + {bytes_per_tx}n)"),
            SizeModel::Empirical {
                protocol, overhead, ..
            } => {
                write!(f, "Empirical({protocol}, overhead {overhead})")
            }
            SizeModel::Constant { protocol, bytes } => write!(f, "Constant({protocol}, {bytes})"),
        }
    }
}

/// Typical Dino block: header, coinbase and a handful of rule bytes.
pub const DINO_TYPICAL_BYTES: u64 = 800;

impl SizeModel {
    pub fn compact() -> Self {
        SizeModel::ClosedForm {
            protocol: Protocol::Compact,
            overhead: (Protocol::Compact.base_bytes() + COMPACT_CONSTANT_BYTES) as u64,
            bytes_per_tx: SHORTID_BYTES as u64,
        }
    }

    pub fn xthin() -> Self {
        SizeModel::ClosedForm {
            protocol: Protocol::XThin,
            overhead: Protocol::XThin.base_bytes() as u64,
            bytes_per_tx: HASH_BYTES as u64,
        }
    }

    pub fn ipfs() -> Self {
        SizeModel::ClosedForm {
            protocol: Protocol::Ipfs,
            overhead: Protocol::Ipfs.base_bytes() as u64,
            bytes_per_tx: CID_BYTES as u64,
        }
    }

    pub fn dino() -> Self {
        SizeModel::Constant {
            protocol: Protocol::Dino,
            bytes: DINO_TYPICAL_BYTES,
        }
    }

    /// Protocol 1 size with the receiver pool at `multiplier * n`.
    pub fn graphene(multiplier: f64, cfg: GrapheneConfig) -> Self {
        let overhead = Protocol::Graphene.base_bytes() as u64;
        SizeModel::Empirical {
            protocol: Protocol::Graphene,
            overhead,
            size: Arc::new(move |n| {
                let m = ((multiplier * n as f64).round() as u64).max(n);
                overhead + plan(n, m, &cfg).map_or(u64::MAX, |p| p.body_len() as u64)
            }),
        }
    }

    pub fn empirical<F>(protocol: Protocol, overhead: u64, size: F) -> Self
    where
        F: Fn(u64) -> u64 + Send + Sync + 'static,
    {
        SizeModel::Empirical {
            protocol,
            overhead,
            size: Arc::new(size),
        }
    }

    /// Piecewise-linear model through measured `(n, bytes)` points, extended
    /// past the last point with the final segment's slope.
    pub fn from_points(
        protocol: Protocol,
        overhead: u64,
        mut points: Vec<(u64, f64)>,
    ) -> Result<Self> {
        points.sort_by_key(|p| p.0);
        points.dedup_by_key(|p| p.0);
        if points.len() < 2 {
            return Err(Error::InvalidInput("need at least two size points".into()));
        }
        let pts = Arc::new(points);
        Ok(SizeModel::empirical(protocol, overhead, move |n| {
            let p = &pts;
            let i = p.partition_point(|q| q.0 <= n).clamp(1, p.len() - 1);
            let (x0, y0) = p[i - 1];
            let (x1, y1) = p[i];
            let slope = (y1 - y0) / (x1 - x0) as f64;
            let y = y0 + slope * (n as f64 - x0 as f64);
            y.max(overhead as f64).round() as u64
        }))
    }

    pub fn protocol(&self) -> Protocol {
        match self {
            SizeModel::ClosedForm { protocol, .. }
            | SizeModel::Empirical { protocol, .. }
            | SizeModel::Constant { protocol, .. } => *protocol,
        }
    }

    pub fn overhead(&self) -> u64 {
        match self {
            SizeModel::ClosedForm { overhead, .. } | SizeModel::Empirical { overhead, .. } => {
                *overhead
            }
            SizeModel::Constant { bytes, .. } => *bytes,
        }
    }

    pub fn evaluate(&self, n: u64) -> u64 {
        match self {
            SizeModel::ClosedForm {
                overhead,
                bytes_per_tx,
                ..
            } => overhead + bytes_per_tx * n,
            SizeModel::Empirical { size, .. } => size(n),
            SizeModel::Constant { bytes, .. } => *bytes,
        }
    }

    /// Bytes per transaction at block size `n`, excluding fixed overhead.
    pub fn bytes_per_tx(&self, n: u64) -> Option<f64> {
        match self {
            SizeModel::ClosedForm { bytes_per_tx, .. } => Some(*bytes_per_tx as f64),
            SizeModel::Empirical { overhead, size, .. } if n > 0 => {
                Some(size(n).saturating_sub(*overhead) as f64 / n as f64)
            }
            _ => None,
        }
    }
}

/// Largest transaction count whose block fits in `max_block_bytes`.
pub fn block_capacity(model: &SizeModel, max_block_bytes: u64) -> Result<u64> {
    let overhead = model.overhead();
    match model {
        SizeModel::Constant { protocol, .. } => Err(Error::NotApplicable(format!(
            "{protocol} blocks have constant size; capacity is unbounded"
        ))),
        _ if max_block_bytes <= overhead => Err(Error::Infeasible(format!(
            "{max_block_bytes} bytes does not exceed the {} overhead of {overhead} bytes",
            model.protocol()
        ))),
        SizeModel::ClosedForm { bytes_per_tx, .. } => {
            Ok((max_block_bytes - overhead) / bytes_per_tx)
        }
        SizeModel::Empirical { size, protocol, .. } => {
            if size(1) > max_block_bytes {
                return Err(Error::Infeasible(format!(
                    "a one-transaction {protocol} block exceeds {max_block_bytes} bytes"
                )));
            }
            let mut lo = 1u64;
            let mut hi = 2u64;
            while size(hi) <= max_block_bytes {
                lo = hi;
                hi = hi.checked_mul(2).ok_or_else(|| {
                    Error::Infeasible(format!("{protocol} size does not grow with n"))
                })?;
                if hi > 1 << 40 {
                    return Err(Error::Infeasible(format!(
                        "{protocol} size does not grow with n"
                    )));
                }
            }
            while hi - lo > 1 {
                let mid = lo + (hi - lo) / 2;
                if size(mid) <= max_block_bytes {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            Ok(lo)
        }
    }
}

/// Transactions per second for a block of `capacity` transactions.
pub fn tps(capacity: u64, block_interval_s: u64) -> Result<f64> {
    if block_interval_s == 0 {
        return Err(Error::Parameter("block interval must be positive".into()));
    }
    Ok(capacity as f64 / block_interval_s as f64)
}

/// TPS in hundredths, rounded half to even on the exact quotient.
pub fn tps_centis(capacity: u64, block_interval_s: u64) -> Result<u64> {
    if block_interval_s == 0 {
        return Err(Error::Parameter("block interval must be positive".into()));
    }
    let num = capacity as u128 * 100;
    let d = block_interval_s as u128;
    let (q, r) = (num / d, num % d);
    let up = 2 * r > d || (2 * r == d && q % 2 == 1);
    Ok((q + up as u128) as u64)
}

/// TPS with two decimals, as reported in tables.
pub fn format_tps(capacity: u64, block_interval_s: u64) -> Result<String> {
    let c = tps_centis(capacity, block_interval_s)?;
    Ok(format!("{}.{:02}", c / 100, c % 100))
}

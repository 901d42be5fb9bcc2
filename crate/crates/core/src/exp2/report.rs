//! Per-protocol throughput, volatility and block-size limits.

use std::io::Write;

use serde::Serialize;

use crate::capacity::{block_capacity, format_tps, tps, SizeModel, MIB};
use crate::error::{Error, Result};
use crate::exp2::revenue::BLOCK_INTERVAL_S;
use crate::exp2::volatility::{CriticalPoint, VolatilityCurve, REFERENCE_BAND, REFERENCE_HV};
use crate::protocols::Protocol;

/// Throughput beyond which scaling is considered unsafe.
pub const DEFAULT_TPS_LIMIT: f64 = 1350.0;
pub const HARD_CAP_BYTES: u64 = 4 * MIB;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AcceptableSize {
    /// Transactions per block at the throughput limit.
    pub tx_limit: u64,
    pub acceptable_kb: f64,
    pub max_kb: f64,
}

/// Compressed size of a block that carries `tps_limit` for one interval.
///
/// The size counts transaction bytes only; the fixed header and coinbase
/// bytes are left out.
pub fn acceptable_block_size(
    model: &SizeModel,
    tps_limit: f64,
    block_interval_s: u64,
    hard_cap_bytes: u64,
) -> Result<AcceptableSize> {
    if !(tps_limit > 0.0 && tps_limit.is_finite()) {
        return Err(Error::Parameter(format!(
            "tps limit must be positive, got {tps_limit}"
        )));
    }
    if block_interval_s == 0 {
        return Err(Error::Parameter("block interval must be positive".into()));
    }
    if let SizeModel::Constant { protocol, .. } = model {
        return Err(Error::NotApplicable(format!(
            "{protocol} block size does not scale"
        )));
    }
    let tx_limit = (tps_limit * block_interval_s as f64).round() as u64;
    let bytes = model.evaluate(tx_limit).saturating_sub(model.overhead());
    let acceptable_kb = bytes as f64 / 1024.0;
    Ok(AcceptableSize {
        tx_limit,
        acceptable_kb,
        max_kb: acceptable_kb.min(hard_cap_bytes as f64 / 1024.0),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReportParams {
    pub block_bytes: u64,
    pub tps_limit: f64,
    pub block_interval_s: u64,
    pub hard_cap_bytes: u64,
}

impl Default for ReportParams {
    fn default() -> Self {
        ReportParams {
            block_bytes: MIB,
            tps_limit: DEFAULT_TPS_LIMIT,
            block_interval_s: BLOCK_INTERVAL_S,
            hard_cap_bytes: HARD_CAP_BYTES,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProtocolRow {
    pub protocol: Protocol,
    pub not_applicable: bool,
    pub bpt: Option<f64>,
    pub capacity_at_1mib: Option<u64>,
    pub tps: Option<f64>,
    /// Two decimals, halves to even.
    pub tps_display: Option<String>,
    /// Curve HV interpolated at this protocol's TPS.
    pub hv: Option<f64>,
    pub acceptable_kb: Option<f64>,
    pub max_kb: Option<f64>,
}

impl ProtocolRow {
    fn not_applicable(protocol: Protocol) -> Self {
        ProtocolRow {
            protocol,
            not_applicable: true,
            bpt: None,
            capacity_at_1mib: None,
            tps: None,
            tps_display: None,
            hv: None,
            acceptable_kb: None,
            max_kb: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ReferenceHv {
    pub year: u16,
    pub hv: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub params: ReportParams,
    pub protocols: Vec<ProtocolRow>,
    pub critical_point: Option<CriticalPoint>,
    pub reference_hv: Vec<ReferenceHv>,
    pub reference_band: [f64; 2],
}

pub fn protocol_row(
    model: &SizeModel,
    curve: Option<&VolatilityCurve>,
    params: &ReportParams,
) -> Result<ProtocolRow> {
    let protocol = model.protocol();
    if matches!(model, SizeModel::Constant { .. }) {
        return Ok(ProtocolRow::not_applicable(protocol));
    }
    let capacity = block_capacity(model, params.block_bytes)?;
    let t = tps(capacity, params.block_interval_s)?;
    let limits = acceptable_block_size(
        model,
        params.tps_limit,
        params.block_interval_s,
        params.hard_cap_bytes,
    )?;
    Ok(ProtocolRow {
        protocol,
        not_applicable: false,
        bpt: model.bytes_per_tx(capacity),
        capacity_at_1mib: Some(capacity),
        tps: Some(t),
        tps_display: Some(format_tps(capacity, params.block_interval_s)?),
        hv: curve.and_then(|c| c.hv_at(t)),
        acceptable_kb: Some(limits.acceptable_kb),
        max_kb: Some(limits.max_kb),
    })
}

pub fn build_report(
    models: &[SizeModel],
    curve: Option<&VolatilityCurve>,
    critical_point: Option<CriticalPoint>,
    params: &ReportParams,
) -> Result<Report> {
    let protocols = models
        .iter()
        .map(|m| protocol_row(m, curve, params))
        .collect::<Result<_>>()?;
    Ok(Report {
        params: params.clone(),
        protocols,
        critical_point,
        reference_hv: REFERENCE_HV
            .iter()
            .map(|&(year, hv)| ReferenceHv { year, hv })
            .collect(),
        reference_band: [REFERENCE_BAND.0, REFERENCE_BAND.1],
    })
}

impl Report {
    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, self)
            .map_err(|e| Error::InvalidInput(format!("report serialization failed: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn limits(model: SizeModel) -> AcceptableSize {
        acceptable_block_size(&model, DEFAULT_TPS_LIMIT, BLOCK_INTERVAL_S, HARD_CAP_BYTES).unwrap()
    }

    #[test]
    fn closed_form_acceptable_sizes() {
        let c = limits(SizeModel::compact());
        assert_eq!(c.tx_limit, 810_000);
        assert_eq!(format!("{:.2}", c.acceptable_kb), "4746.09");
        assert_eq!(c.max_kb, 4096.0);
        let x = limits(SizeModel::xthin());
        assert!((x.acceptable_kb / 6328.15 - 1.0).abs() < 1e-3);
        let i = limits(SizeModel::ipfs());
        assert_eq!(i.acceptable_kb, 25_312.5);
        assert_eq!(i.max_kb, 4096.0);
    }

    #[test]
    fn constant_model_not_applicable() {
        let r = acceptable_block_size(&SizeModel::dino(), 1350.0, 600, HARD_CAP_BYTES);
        assert!(matches!(r, Err(Error::NotApplicable(_))));
        let row = protocol_row(&SizeModel::dino(), None, &ReportParams::default()).unwrap();
        assert!(row.not_applicable);
        assert!(row.acceptable_kb.is_none());
    }

    #[test]
    fn small_limit_is_below_cap() {
        let a = acceptable_block_size(&SizeModel::compact(), 10.0, 600, HARD_CAP_BYTES).unwrap();
        assert_eq!(a.tx_limit, 6000);
        assert_eq!(a.acceptable_kb, a.max_kb);
    }

    #[test]
    fn report_rows() {
        let models = [SizeModel::compact(), SizeModel::ipfs(), SizeModel::dino()];
        let r = build_report(&models, None, None, &ReportParams::default()).unwrap();
        assert_eq!(r.protocols.len(), 3);
        assert_eq!(r.protocols[0].capacity_at_1mib, Some(174_663));
        assert_eq!(r.protocols[0].tps_display.as_deref(), Some("291.10"));
        assert_eq!(r.protocols[1].tps_display.as_deref(), Some("54.61"));
        assert_eq!(r.protocols[0].bpt, Some(6.0));
        assert!(r.protocols[2].not_applicable);
        assert_eq!(r.reference_hv.len(), 10);
        let mut buf = Vec::new();
        r.write_json(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("\"dino\""));
        assert!(text.contains("0.238111"));
    }
}

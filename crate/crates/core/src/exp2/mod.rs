//! Fee-regime mining simulation: revenue volatility against throughput.

pub mod dataset;
pub mod dist;
pub mod report;
pub mod revenue;
pub mod stream;
pub mod volatility;

pub use dataset::{load_dataset, read_dataset, Dataset, DatasetStats};
pub use dist::{fit_value_sampler, TargetStats, ValueDistribution};
pub use report::{acceptable_block_size, build_report, AcceptableSize, Report, ReportParams};
pub use revenue::{simulate_revenue, RevenueSeries, SimConfig};
pub use stream::{DriftConfig, ValueSource};
pub use volatility::{
    find_critical_point, historical_volatility, volatility_curve, CriticalPoint, CurvePoint,
    VolatilityCurve,
};

mod commands;
mod config;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Block compression capacity and fee-regime volatility experiments.
#[derive(Parser, Debug)]
#[command(name = "blockpress", version)]
pub struct Cli {
    /// INI file whose keys mirror long flag names; flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Master seed [default: $BLOCKPRESS_SEED, else 0].
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker threads [default: all cores].
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Transactions per block for each protocol at a block size.
    Capacity(CapacityArgs),
    /// Compressed block size against capacity, with repeated trials.
    Sweep(SweepArgs),
    /// Revenue volatility against throughput, critical point and size report.
    Curve(CurveArgs),
    /// Hex dump of one small compressed block.
    DumpHex(DumpHexArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Capacity(_) => "capacity",
            Command::Sweep(_) => "sweep",
            Command::Curve(_) => "curve",
            Command::DumpHex(_) => "dump-hex",
        }
    }
}

/// Parameters shared by the size models.
#[derive(Args, Debug, Clone, Default)]
pub struct ModelArgs {
    /// Mempool size as a multiple of block capacity [default: 2.92].
    #[arg(long)]
    pub multiplier: Option<f64>,
    /// Graphene IBLT bytes per cell relative to filter bits [default: 24].
    #[arg(long)]
    pub tau: Option<f64>,
    /// Graphene decode assurance [default: 0.995833 (239/240)].
    #[arg(long)]
    pub beta: Option<f64>,
}

#[derive(Args, Debug)]
pub struct CapacityArgs {
    /// Comma-separated protocols [default: compact,xthin,graphene,xthinner,ipfs,dino].
    #[arg(long, value_delimiter = ',')]
    pub protocols: Option<Vec<String>>,
    /// Block size limit in bytes [default: 1048576].
    #[arg(long)]
    pub block_bytes: Option<u64>,
    /// Random pools averaged per XThinner size evaluation [default: 5].
    #[arg(long)]
    pub xthinner_trials: Option<u32>,
    /// Block interval in seconds, for the TPS column [default: 600].
    #[arg(long)]
    pub block_interval_s: Option<u64>,
    /// Write the table here instead of standard output.
    #[arg(long, value_name = "FILE")]
    pub output: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    /// Comma-separated protocols [default: compact,xthin,graphene,xthinner,ipfs].
    #[arg(long, value_delimiter = ',')]
    pub protocols: Option<Vec<String>>,
    /// Trials per capacity, at least 30 [default: 100].
    #[arg(long)]
    pub trials: Option<u32>,
    /// Explicit comma-separated capacity grid; overrides --points/--min-capacity/--max-capacity.
    #[arg(long, value_delimiter = ',')]
    pub capacities: Option<Vec<u64>>,
    /// Log-spaced grid points [default: 40].
    #[arg(long)]
    pub points: Option<usize>,
    /// Smallest grid capacity [default: 1000].
    #[arg(long)]
    pub min_capacity: Option<u64>,
    /// Largest grid capacity [default: 1000000].
    #[arg(long)]
    pub max_capacity: Option<u64>,
    /// Output directory for sweep_raw.csv and sweep_summary.csv [default: .].
    #[arg(long, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Args, Debug)]
pub struct CurveArgs {
    /// Replay values from a CSV dataset (timestamp_unix,value_satoshi,size_bytes).
    #[arg(long, value_name = "FILE")]
    pub dataset: Option<PathBuf>,
    /// Use one constant value for every transaction (zero-dispersion ablation).
    #[arg(long)]
    pub constant_value: Option<u64>,
    /// Blocks simulated per capacity [default: 2000].
    #[arg(long)]
    pub blocks: Option<u32>,
    /// Block interval in seconds [default: 600].
    #[arg(long)]
    pub block_interval_s: Option<u64>,
    /// Fee as a fraction of value [default: 0.002].
    #[arg(long)]
    pub fee_rate: Option<f64>,
    /// Log-spaced grid points [default: 30].
    #[arg(long)]
    pub points: Option<usize>,
    /// Smallest grid capacity [default: 1000].
    #[arg(long)]
    pub min_capacity: Option<u64>,
    /// Largest grid capacity [default: 1000000].
    #[arg(long)]
    pub max_capacity: Option<u64>,
    /// Pareto tail exponent of the fitted value model [default: 2.5].
    #[arg(long)]
    pub tail_alpha: Option<f64>,
    /// Per-transaction log-level drift of synthetic values; 0 disables [default: 0.0003].
    #[arg(long)]
    pub drift_sd: Option<f64>,
    /// Drift mean-reversion length in transactions [default: 10000000].
    #[arg(long)]
    pub drift_reversion: Option<f64>,
    /// Moving-average window for the critical point [default: 5].
    #[arg(long)]
    pub window: Option<usize>,
    /// Throughput limit for acceptable block sizes [default: 1350].
    #[arg(long)]
    pub tps_limit: Option<f64>,
    /// Block size for the capacity column of the report [default: 1048576].
    #[arg(long)]
    pub block_bytes: Option<u64>,
    /// Random pools averaged per XThinner size evaluation in the report [default: 5].
    #[arg(long)]
    pub xthinner_trials: Option<u32>,
    /// Output directory for curve.csv, critical_point.json and report.json [default: .].
    #[arg(long, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Args, Debug)]
pub struct DumpHexArgs {
    /// Protocol to encode with.
    #[arg(long)]
    pub protocol: Option<String>,
    /// Transactions in the block [default: 8].
    #[arg(long)]
    pub txs: Option<u64>,
    /// Write the dump here instead of standard output.
    #[arg(long, value_name = "FILE")]
    pub output: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    Usage,
    Io,
    Infeasible,
}

impl Kind {
    fn code(self) -> u8 {
        match self {
            Kind::Usage => 1,
            Kind::Io => 2,
            Kind::Infeasible => 3,
        }
    }
}

#[derive(Debug)]
pub struct Failure {
    pub kind: Kind,
    pub message: String,
}

impl Failure {
    pub fn new(kind: Kind, message: impl Into<String>) -> Self {
        Failure {
            kind,
            message: message.into(),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<blockpress::error::Error> for Failure {
    fn from(e: blockpress::error::Error) -> Self {
        use blockpress::error::Error as E;
        let kind = match &e {
            E::InvalidInput(_) => Kind::Usage,
            E::Io { .. } | E::Parse { .. } => Kind::Io,
            _ => Kind::Infeasible,
        };
        Failure::new(kind, e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.kind.code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;
    use std::path::Path;

    fn run_args(args: &[&str]) -> Result<(), Failure> {
        let mut full = vec!["blockpress"];
        full.extend_from_slice(args);
        let cli =
            Cli::try_parse_from(full).map_err(|e| Failure::new(Kind::Usage, e.to_string()))?;
        commands::run(cli)
    }

    fn path(p: &Path) -> &str {
        p.to_str().unwrap()
    }

    #[test]
    fn capacity_table() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("cap.csv");
        run_args(&[
            "capacity",
            "--protocols",
            "compact,ipfs,dino",
            "--output",
            path(&out),
        ])
        .unwrap();
        assert_eq!(
            fs::read_to_string(&out).unwrap(),
            "protocol,block_bytes,capacity,tps\n\
             compact,1048576,174663,291.10\n\
             ipfs,1048576,32765,54.61\n\
             dino,1048576,NA,NA\n"
        );
    }

    #[test]
    fn config_file_sits_between_flags_and_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let ini = dir.path().join("run.ini");
        let out = dir.path().join("cap.csv");
        fs::write(
            &ini,
            "block-bytes = 10000\n[capacity]\nprotocols = compact\n",
        )
        .unwrap();
        run_args(&["--config", path(&ini), "capacity", "--output", path(&out)]).unwrap();
        assert_eq!(
            fs::read_to_string(&out).unwrap(),
            "protocol,block_bytes,capacity,tps\ncompact,10000,1567,2.61\n"
        );
        run_args(&[
            "--config",
            path(&ini),
            "capacity",
            "--block-bytes",
            "1594",
            "--output",
            path(&out),
        ])
        .unwrap();
        assert!(fs::read_to_string(&out)
            .unwrap()
            .ends_with("compact,1594,166,0.28\n"));
    }

    #[test]
    fn failures_map_to_kinds() {
        let dir = tempfile::tempdir().unwrap();
        let kind = |args: &[&str]| run_args(args).unwrap_err().kind;
        assert_eq!(
            kind(&["capacity", "--protocols", "carrier-pigeon"]),
            Kind::Usage
        );
        assert_eq!(
            kind(&["capacity", "--protocols", "compact", "--block-bytes", "100"]),
            Kind::Infeasible
        );
        assert_eq!(kind(&["--jobs", "0", "capacity"]), Kind::Usage);
        assert_eq!(kind(&["dump-hex"]), Kind::Usage);
        let missing = dir.path().join("nope.csv");
        assert_eq!(kind(&["curve", "--dataset", path(&missing)]), Kind::Io);
        assert_eq!(kind(&["--config", path(&missing), "capacity"]), Kind::Io);
        let ini = dir.path().join("bad.ini");
        fs::write(&ini, "trials = lots\n").unwrap();
        assert_eq!(kind(&["--config", path(&ini), "sweep"]), Kind::Usage);
        let blocked = dir.path().join("file");
        fs::write(&blocked, "").unwrap();
        let under = blocked.join("sub");
        assert_eq!(
            kind(&[
                "sweep",
                "--capacities",
                "100",
                "--trials",
                "30",
                "--out-dir",
                path(&under)
            ]),
            Kind::Io
        );
    }

    #[test]
    fn dump_hex_is_seeded() {
        let dir = tempfile::tempdir().unwrap();
        let dump = |seed: &str, name: &str| {
            let out = dir.path().join(name);
            run_args(&[
                "--seed",
                seed,
                "dump-hex",
                "--protocol",
                "graphene",
                "--txs",
                "5",
                "--output",
                path(&out),
            ])
            .unwrap();
            fs::read_to_string(out).unwrap()
        };
        let a = dump("1", "a");
        assert_eq!(a, dump("1", "b"));
        assert_ne!(a, dump("2", "c"));
        assert!(a.starts_with("protocol,txs,total_bytes,payload_bytes\ngraphene,5,"));
    }

    #[test]
    fn small_sweep_and_curve_write_their_files() {
        let dir = tempfile::tempdir().unwrap();
        let d = path(dir.path());
        run_args(&[
            "sweep",
            "--protocols",
            "xthinner,graphene",
            "--capacities",
            "200,400",
            "--trials",
            "30",
            "--out-dir",
            d,
        ])
        .unwrap();
        let raw = fs::read_to_string(dir.path().join("sweep_raw.csv")).unwrap();
        assert_eq!(raw.lines().count(), 1 + 2 * 2 * 30);
        run_args(&[
            "curve",
            "--constant-value",
            "100000",
            "--points",
            "6",
            "--blocks",
            "50",
            "--min-capacity",
            "100",
            "--max-capacity",
            "2000",
            "--xthinner-trials",
            "1",
            "--out-dir",
            d,
        ])
        .unwrap();
        let curve = fs::read_to_string(dir.path().join("curve.csv")).unwrap();
        assert_eq!(curve.lines().count(), 7);
        let report = fs::read_to_string(dir.path().join("report.json")).unwrap();
        assert!(report.contains("\"reference_hv\"") && report.ends_with("}\n"));
        let cp = fs::read_to_string(dir.path().join("critical_point.json")).unwrap();
        assert!(cp.contains("\"interior\": false"));
    }
}

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use blockpress::capacity::{block_capacity, format_tps, SizeModel, MIB};
use blockpress::exp1::{self, log_spaced, xthinner_model, SweepConfig};
use blockpress::exp2::dist::DEFAULT_TAIL_ALPHA;
use blockpress::exp2::report::{DEFAULT_TPS_LIMIT, HARD_CAP_BYTES};
use blockpress::exp2::revenue::{BLOCK_INTERVAL_S, DEFAULT_BLOCKS};
use blockpress::exp2::volatility::{CURVE_POINTS, DEFAULT_SMOOTHING};
use blockpress::exp2::{
    build_report, find_critical_point, fit_value_sampler, load_dataset, volatility_curve,
    DriftConfig, ReportParams, SimConfig, TargetStats, ValueSource,
};
use blockpress::mempool::{generate_mempool, UniformValue, DEFAULT_MULTIPLIER};
use blockpress::protocols::graphene::{GrapheneConfig, DEFAULT_BETA, DEFAULT_TAU};
use blockpress::protocols::{compress, Environment, Protocol};
use blockpress::tx::FeeRate;

use crate::config::FileConfig;
use crate::{
    CapacityArgs, Cli, Command, CurveArgs, DumpHexArgs, Failure, Kind, ModelArgs, SweepArgs,
};

const DEFAULT_XTHINNER_TRIALS: u32 = 5;
const DEFAULT_DUMP_TXS: u64 = 8;

pub fn run(cli: Cli) -> Result<(), Failure> {
    let file = match &cli.config {
        Some(path) => FileConfig::load(path, cli.command.name())?,
        None => FileConfig::default(),
    };
    let seed = file.seed(cli.seed)?;
    let jobs: Option<usize> = file.lookup(cli.jobs, "jobs")?;
    let go = || match &cli.command {
        Command::Capacity(a) => capacity(a, &file, seed),
        Command::Sweep(a) => sweep(a, &file, seed),
        Command::Curve(a) => curve(a, &file, seed),
        Command::DumpHex(a) => dump_hex(a, &file, seed),
    };
    match jobs {
        None => go(),
        Some(0) => Err(Failure::new(Kind::Usage, "--jobs must be at least 1")),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Failure::new(Kind::Infeasible, format!("thread pool: {e}")))?
            .install(go),
    }
}

struct Model {
    multiplier: f64,
    tau: f64,
    beta: f64,
}

impl Model {
    fn resolve(args: &ModelArgs, file: &FileConfig) -> Result<Self, Failure> {
        Ok(Model {
            multiplier: file.resolve(args.multiplier, "multiplier", DEFAULT_MULTIPLIER)?,
            tau: file.resolve(args.tau, "tau", DEFAULT_TAU)?,
            beta: file.resolve(args.beta, "beta", DEFAULT_BETA)?,
        })
    }

    fn graphene(&self, seed: u64) -> Result<GrapheneConfig, Failure> {
        let cfg = GrapheneConfig {
            tau: self.tau,
            beta: self.beta,
            salt: seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn size_model(
        &self,
        p: Protocol,
        xthinner_trials: u32,
        seed: u64,
    ) -> Result<SizeModel, Failure> {
        Ok(match p {
            Protocol::Compact => SizeModel::compact(),
            Protocol::XThin => SizeModel::xthin(),
            Protocol::Ipfs => SizeModel::ipfs(),
            Protocol::Dino => SizeModel::dino(),
            Protocol::Graphene => SizeModel::graphene(self.multiplier, self.graphene(seed)?),
            Protocol::XThinner => xthinner_model(self.multiplier, xthinner_trials, seed),
        })
    }
}

fn protocols(
    flag: &Option<Vec<String>>,
    file: &FileConfig,
    default: &[Protocol],
) -> Result<Vec<Protocol>, Failure> {
    let names: Vec<String> = match flag {
        Some(v) => v.clone(),
        None => match file.lookup::<String>(None, "protocols")? {
            Some(s) => s.split(',').map(str::to_string).collect(),
            None => return Ok(default.to_vec()),
        },
    };
    let mut out: Vec<Protocol> = Vec::new();
    for n in names.iter().filter(|n| !n.trim().is_empty()) {
        let p: Protocol = n.parse()?;
        if !out.contains(&p) {
            out.push(p);
        }
    }
    if out.is_empty() {
        return Err(Failure::new(Kind::Usage, "no protocols given"));
    }
    Ok(out)
}

fn grid(explicit: Option<Vec<u64>>, points: usize, lo: u64, hi: u64) -> Result<Vec<u64>, Failure> {
    if let Some(g) = explicit {
        return Ok(g);
    }
    if points == 0 || lo == 0 || lo > hi {
        return Err(Failure::new(
            Kind::Usage,
            format!("bad capacity grid: {points} points over [{lo}, {hi}]"),
        ));
    }
    Ok(log_spaced(points, lo, hi))
}

fn write_file<F>(path: &Path, body: F) -> Result<(), Failure>
where
    F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
{
    let io = |e: std::io::Error| Failure::new(Kind::Io, format!("{}: {e}", path.display()));
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    body(&mut w).map_err(io)?;
    w.flush().map_err(io)
}

fn out_dir(flag: &Option<PathBuf>, file: &FileConfig) -> Result<PathBuf, Failure> {
    let dir = file.resolve(flag.clone(), "out-dir", PathBuf::from("."))?;
    std::fs::create_dir_all(&dir)
        .map_err(|e| Failure::new(Kind::Io, format!("{}: {e}", dir.display())))?;
    Ok(dir)
}

/// Writes to `path` when given, else to standard output.
fn emit(path: Option<PathBuf>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => write_file(&p, |w| w.write_all(text.as_bytes())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn capacity(a: &CapacityArgs, file: &FileConfig, seed: u64) -> Result<(), Failure> {
    let model = Model::resolve(&a.model, file)?;
    let list = protocols(&a.protocols, file, &Protocol::ALL)?;
    let bytes = file.resolve(a.block_bytes, "block-bytes", MIB)?;
    let trials = file.resolve(
        a.xthinner_trials,
        "xthinner-trials",
        DEFAULT_XTHINNER_TRIALS,
    )?;
    let interval = file.resolve(a.block_interval_s, "block-interval-s", BLOCK_INTERVAL_S)?;
    let output = file.lookup(a.output.clone(), "output")?;

    let mut text = String::from("protocol,block_bytes,capacity,tps\n");
    for p in list {
        let m = model.size_model(p, trials, seed)?;
        if matches!(m, SizeModel::Constant { .. }) {
            text += &format!("{p},{bytes},NA,NA\n");
            continue;
        }
        let c = block_capacity(&m, bytes)?;
        text += &format!("{p},{bytes},{c},{}\n", format_tps(c, interval)?);
    }
    emit(output, &text)
}

fn sweep(a: &SweepArgs, file: &FileConfig, seed: u64) -> Result<(), Failure> {
    let model = Model::resolve(&a.model, file)?;
    let default: Vec<Protocol> = Protocol::ALL
        .into_iter()
        .filter(|&p| p != Protocol::Dino)
        .collect();
    let list = protocols(&a.protocols, file, &default)?;
    let explicit = match &a.capacities {
        Some(v) => Some(v.clone()),
        None => file
            .lookup::<String>(None, "capacities")?
            .map(|s| {
                s.split(',')
                    .map(|x| x.trim().parse::<u64>())
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|e| Failure::new(Kind::Usage, format!("capacities: {e}")))
            })
            .transpose()?,
    };
    let cfg = SweepConfig {
        capacities: grid(
            explicit,
            file.resolve(a.points, "points", 40)?,
            file.resolve(a.min_capacity, "min-capacity", 1_000)?,
            file.resolve(a.max_capacity, "max-capacity", 1_000_000)?,
        )?,
        trials: file.resolve(a.trials, "trials", 100)?,
        multiplier: model.multiplier,
        beta: model.beta,
        tau: model.tau,
        seed,
    };
    cfg.validate()?;
    let dir = out_dir(&a.out_dir, file)?;
    let results = list
        .iter()
        .map(|&p| exp1::sweep(p, &cfg))
        .collect::<blockpress::error::Result<Vec<_>>>()?;
    let raw = dir.join("sweep_raw.csv");
    let summary = dir.join("sweep_summary.csv");
    write_file(&raw, |w| exp1::write_raw_csv(w, &results))?;
    write_file(&summary, |w| exp1::write_summary_csv(w, &results))?;
    println!("wrote {} and {}", raw.display(), summary.display());
    Ok(())
}

fn curve(a: &CurveArgs, file: &FileConfig, seed: u64) -> Result<(), Failure> {
    let model = Model::resolve(&a.model, file)?;
    let dataset: Option<PathBuf> = file.lookup(a.dataset.clone(), "dataset")?;
    let constant: Option<u64> = file.lookup(a.constant_value, "constant-value")?;
    if dataset.is_some() && constant.is_some() {
        return Err(Failure::new(
            Kind::Usage,
            "--dataset and --constant-value are exclusive",
        ));
    }
    let fee_rate = FeeRate::from_fraction(file.resolve(a.fee_rate, "fee-rate", 0.002)?)?;
    let interval = file.resolve(a.block_interval_s, "block-interval-s", BLOCK_INTERVAL_S)?;
    let source = if let Some(path) = &dataset {
        let d = load_dataset(path)?;
        let s = d.stats(TargetStats::MAINNET_2021.tail_threshold);
        println!(
            "dataset {}: {} transactions, mean {:.1}, median {:.1}, tail fraction {:.6}",
            path.display(),
            s.count,
            s.mean,
            s.median,
            s.tail_fraction
        );
        d.source()
    } else if let Some(v) = constant {
        ValueSource::Constant(v)
    } else {
        let alpha = file.resolve(a.tail_alpha, "tail-alpha", DEFAULT_TAIL_ALPHA)?;
        let defaults = DriftConfig::default();
        ValueSource::Synthetic {
            dist: fit_value_sampler(&TargetStats::MAINNET_2021, alpha)?,
            drift: DriftConfig {
                step_sd: file.resolve(a.drift_sd, "drift-sd", defaults.step_sd)?,
                reversion_txs: file.resolve(
                    a.drift_reversion,
                    "drift-reversion",
                    defaults.reversion_txs,
                )?,
                ..defaults
            },
        }
    };
    let sim = SimConfig {
        blocks: file.resolve(a.blocks, "blocks", DEFAULT_BLOCKS)?,
        block_interval_s: interval,
        multiplier: model.multiplier,
        fee_rate,
        seed,
        arrivals: None,
    };
    let capacities = grid(
        None,
        file.resolve(a.points, "points", CURVE_POINTS)?,
        file.resolve(a.min_capacity, "min-capacity", 1_000)?,
        file.resolve(a.max_capacity, "max-capacity", 1_000_000)?,
    )?;
    let window = file.resolve(a.window, "window", DEFAULT_SMOOTHING)?;
    let params = ReportParams {
        block_bytes: file.resolve(a.block_bytes, "block-bytes", MIB)?,
        tps_limit: file.resolve(a.tps_limit, "tps-limit", DEFAULT_TPS_LIMIT)?,
        block_interval_s: interval,
        hard_cap_bytes: HARD_CAP_BYTES,
    };
    let trials = file.resolve(
        a.xthinner_trials,
        "xthinner-trials",
        DEFAULT_XTHINNER_TRIALS,
    )?;
    let dir = out_dir(&a.out_dir, file)?;

    let vc = volatility_curve(&capacities, &source, &sim)?;
    let cp = find_critical_point(&vc, window)?;
    let models = Protocol::ALL
        .iter()
        .map(|&p| model.size_model(p, trials, seed))
        .collect::<Result<Vec<_>, _>>()?;
    let report = build_report(&models, Some(&vc), Some(cp), &params)?;

    write_file(&dir.join("curve.csv"), |w| vc.write_csv(w))?;
    write_file(&dir.join("critical_point.json"), |w| {
        serde_json::to_writer_pretty(&mut *w, &cp)?;
        writeln!(w)
    })?;
    write_file(&dir.join("report.json"), |w| {
        serde_json::to_writer_pretty(&mut *w, &report)?;
        writeln!(w)
    })?;

    if cp.interior {
        println!(
            "critical point: hv {:.6} at tps {:.2} (capacity {})",
            cp.hv, cp.tps, cp.capacity
        );
    } else {
        println!(
            "no interior minimum: lowest smoothed hv {:.6} at tps {:.2}",
            cp.smoothed_hv, cp.tps
        );
    }
    println!(
        "wrote curve.csv, critical_point.json and report.json to {}",
        dir.display()
    );
    Ok(())
}

fn dump_hex(a: &DumpHexArgs, file: &FileConfig, seed: u64) -> Result<(), Failure> {
    let model = Model::resolve(&a.model, file)?;
    let name: String = file
        .lookup(a.protocol.clone(), "protocol")?
        .ok_or_else(|| Failure::new(Kind::Usage, "--protocol is required"))?;
    let protocol: Protocol = name.parse()?;
    let txs = file.resolve(a.txs, "txs", DEFAULT_DUMP_TXS)?;
    let output = file.lookup(a.output.clone(), "output")?;
    let values = UniformValue {
        lo: 1_000,
        hi: 100_000_000,
    };
    let mut pool = generate_mempool(txs, model.multiplier, &values, seed)?;
    let everything = pool.entries().to_vec();
    let block = pool.select_block(txs as usize);
    let env = Environment {
        salt: seed,
        receiver_pool: Some(&everything),
        sender_pool: Some(&everything),
        recv_set: Some(&everything),
        send_set: Some(&everything),
        graphene: model.graphene(seed)?,
        ..Default::default()
    };
    let c = compress(protocol, &block, &env)?;
    let text = format!(
        "protocol,txs,total_bytes,payload_bytes\n{protocol},{},{},{}\n{}\n",
        block.len(),
        c.total_bytes(),
        c.payload_bytes(),
        c.payload_hex()
    );
    emit(output, &text)
}

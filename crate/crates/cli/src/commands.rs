//! Subcommand implementations.

use std::fmt;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use fbmk::engine::{init_state_stream, step_count};
use fbmk::ergodic::{ergodic_experiment, ErgodicConfig};
use fbmk::format::{fmt_f64, write_path_binary, write_path_csv};
use fbmk::kernel::HurstKernelParams;
use fbmk::oracle::{default_grid, sup_l2_error, tune_partition};
use fbmk::partition::{compact_bounds, geometric_ratio, partition_cardinality};
use fbmk::{
    simulate_path, GeometricPartition, NodeRule, PartitionBuilder, PathConfig, Phi, Scheme,
    SpectralMeasure,
};
use rayon::prelude::*;

use crate::{ErgodicArgs, ErrorReportArgs, ModelArgs, OutputFormat, PartitionArgs, SimulateArgs};

/// Failure of a subcommand, carrying its exit code.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Run(fbmk::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Run(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "{msg}"),
            CliError::Run(e) => write!(f, "{e}"),
        }
    }
}

impl From<fbmk::Error> for CliError {
    fn from(e: fbmk::Error) -> Self {
        match e {
            fbmk::Error::Parse(msg) | fbmk::Error::Parameter(msg) => CliError::Usage(msg),
            other => CliError::Run(other),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Run(fbmk::Error::Io(e))
    }
}

type CliResult<T = ()> = Result<T, CliError>;

/// Sizes the global worker pool from `FBMK_THREADS`.
pub fn configure_threads() -> CliResult {
    let Ok(raw) = std::env::var("FBMK_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("FBMK_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Run(fbmk::Error::Numerical(format!("thread pool: {e}"))))
}

fn parse_vector(raw: &str) -> CliResult<Vec<f64>> {
    raw.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Usage(format!("bad number {s:?} in vector {raw:?}")))
        })
        .collect()
}

fn parse_scheme(raw: &str) -> CliResult<Scheme> {
    raw.parse().map_err(CliError::from)
}

impl ModelArgs {
    fn measure(&self) -> CliResult<SpectralMeasure> {
        if let Some(text) = &self.measure {
            if self.alpha.is_some() || self.hurst.is_some() {
                return Err(CliError::Usage("--measure excludes --alpha and --hurst".into()));
            }
            return Ok(text.parse()?);
        }
        let params = match (self.alpha, self.hurst) {
            (Some(a), Some(h)) => {
                if (a - h - 0.5).abs() > 1e-12 {
                    return Err(CliError::Usage(format!(
                        "--alpha {a} and --hurst {h} disagree: alpha must equal H + 1/2"
                    )));
                }
                HurstKernelParams::from_alpha(a)?
            }
            (Some(a), None) => HurstKernelParams::from_alpha(a)?,
            (None, Some(h)) => HurstKernelParams::from_hurst(h)?,
            (None, None) => HurstKernelParams::from_alpha(0.75)?,
        };
        Ok(params.measure())
    }

    fn node_rule(&self) -> CliResult<NodeRule> {
        Ok(self.node_rule.parse()?)
    }

    fn partition(&self, measure: &SpectralMeasure) -> CliResult<GeometricPartition> {
        let rule = self.node_rule()?;
        match (self.nodes.as_deref(), measure) {
            (Some("exact"), SpectralMeasure::Atomic(_)) | (None, SpectralMeasure::Atomic(_)) => {
                Ok(GeometricPartition::from_atoms(measure)?)
            }
            (Some("exact"), SpectralMeasure::PowerLaw { .. }) => Err(CliError::Run(
                fbmk::Error::UnsupportedVariant("--nodes exact needs an atomic measure".into()),
            )),
            (Some(count), SpectralMeasure::PowerLaw { alpha }) => {
                let n: usize = count
                    .parse()
                    .map_err(|_| CliError::Usage(format!("--nodes takes `exact` or a count, got {count:?}")))?;
                let (lo, hi) = compact_bounds(self.eps, *alpha);
                let x_min = self.x_min.unwrap_or(lo);
                let x_max = self.x_max.unwrap_or(hi);
                Ok(GeometricPartition::with_count(*alpha, x_min, x_max, n, rule)?)
            }
            (Some(_), SpectralMeasure::Atomic(_)) => Err(CliError::Usage(
                "an atomic measure only supports --nodes exact".into(),
            )),
            (None, SpectralMeasure::PowerLaw { .. }) => {
                let mut b = PartitionBuilder::new(self.eps).c_alpha(self.c_alpha).node_rule(rule);
                if let Some(x) = self.x_min {
                    b = b.x_min(x);
                }
                if let Some(x) = self.x_max {
                    b = b.x_max(x);
                }
                Ok(b.build(measure)?)
            }
        }
    }
}

/// Data goes to the file or to stdout; summaries go to stdout unless data does.
struct Sink {
    data: Box<dyn Write>,
    to_stdout: bool,
}

impl Sink {
    fn open(out: Option<&Path>) -> CliResult<Self> {
        Ok(match out {
            Some(p) => Sink { data: Box::new(BufWriter::new(File::create(p)?)), to_stdout: false },
            None => Sink { data: Box::new(BufWriter::new(io::stdout())), to_stdout: true },
        })
    }

    fn summary(&self, line: &str) {
        if self.to_stdout {
            eprintln!("{line}");
        } else {
            println!("{line}");
        }
    }
}

fn replica_path(out: &Path, replica: usize) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match out.extension() {
        Some(ext) => format!("{stem}_r{replica}.{}", ext.to_string_lossy()),
        None => format!("{stem}_r{replica}"),
    };
    out.with_file_name(name)
}

pub fn simulate(args: &SimulateArgs) -> CliResult {
    let measure = args.model.measure()?;
    let partition = args.model.partition(&measure)?;
    let scheme = parse_scheme(&args.scheme)?;
    if args.replicas == 0 {
        return Err(CliError::Usage("--replicas must be at least 1".into()));
    }
    if args.dt.is_nan() || args.dt > args.horizon {
        return Err(CliError::Usage(format!("--dt {} exceeds --T {}", args.dt, args.horizon)));
    }
    let steps = step_count(args.horizon, args.dt)?;
    let mut config = PathConfig::new(args.horizon, args.dt)
        .scheme(scheme)
        .seed(args.seed)
        .output_every(args.record_every);
    if let Some(raw) = &args.y0 {
        config = config.y0(parse_vector(raw)?);
    }
    let (state_vec, rng_bytes) = init_state_stream(&partition, config.y0.as_deref(), 0, 0)?.footprint();
    let start = Instant::now();

    if args.replicas == 1 {
        let path = simulate_path(&partition, &config)?;
        let mut sink = Sink::open(args.out.as_deref())?;
        write_sample(&path, args.format, &mut sink.data)?;
        sink.data.flush()?;
        report_simulation(&sink, &partition, steps, 1, start, state_vec, rng_bytes);
        return Ok(());
    }
    let out = args
        .out
        .as_deref()
        .ok_or_else(|| CliError::Usage("--replicas above 1 needs --out".into()))?;
    (0..args.replicas)
        .into_par_iter()
        .map(|r| -> CliResult {
            let path = simulate_path(&partition, &config.clone().stream(r as u64))?;
            let mut file = BufWriter::new(File::create(replica_path(out, r))?);
            write_sample(&path, args.format, &mut file)?;
            file.flush()?;
            Ok(())
        })
        .collect::<CliResult<Vec<()>>>()?;
    let sink = Sink { data: Box::new(io::sink()), to_stdout: false };
    report_simulation(&sink, &partition, steps, args.replicas, start, state_vec, rng_bytes);
    Ok(())
}

fn write_sample(path: &fbmk::PathSample, format: OutputFormat, out: &mut dyn Write) -> CliResult {
    match format {
        OutputFormat::Csv => write_path_csv(path, out)?,
        OutputFormat::Binary => write_path_binary(path, out)?,
    }
    Ok(())
}

fn report_simulation(
    sink: &Sink,
    partition: &GeometricPartition,
    steps: u64,
    replicas: usize,
    start: Instant,
    state_vec: usize,
    rng_bytes: usize,
) {
    sink.summary(&format!(
        "nodes={} steps={} replicas={} runtime_s={:.3} state_bytes={}",
        partition.len(),
        steps,
        replicas,
        start.elapsed().as_secs_f64(),
        state_vec * std::mem::size_of::<f64>() + rng_bytes
    ));
}

pub fn partition(args: &PartitionArgs) -> CliResult {
    let measure = args.model.measure()?;
    let mut sink = Sink::open(args.out.as_deref())?;
    if let Some(range) = &args.eps_sweep {
        let SpectralMeasure::PowerLaw { alpha } = measure else {
            return Err(CliError::Usage("--eps-sweep needs a power-law measure".into()));
        };
        let (lo, hi) = range
            .split_once(':')
            .and_then(|(a, b)| Some((a.trim().parse::<f64>().ok()?, b.trim().parse::<f64>().ok()?)))
            .ok_or_else(|| CliError::Usage(format!("--eps-sweep expects LO:HI, got {range:?}")))?;
        let (lo, hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
        if !(lo > 0.0 && hi < 1.0) || args.per_decade == 0 {
            return Err(CliError::Usage("--eps-sweep bounds must lie in (0, 1)".into()));
        }
        let decades = (hi / lo).log10();
        let count = (decades * args.per_decade as f64).round() as usize;
        writeln!(sink.data, "eps,N,ratio,x_min,x_max")?;
        for k in 0..=count {
            let eps = hi * 10f64.powf(-(k as f64) / args.per_decade as f64);
            let n = partition_cardinality(eps, alpha, args.model.c_alpha)?;
            let (x_min, x_max) = compact_bounds(eps, alpha);
            writeln!(
                sink.data,
                "{},{n},{},{},{}",
                fmt_f64(eps),
                fmt_f64(geometric_ratio(eps, args.model.c_alpha)),
                fmt_f64(x_min),
                fmt_f64(x_max)
            )?;
        }
        sink.data.flush()?;
        return Ok(());
    }
    let p = args.model.partition(&measure)?;
    let ratio = p.ratio().map(|r| format!("{r}")).unwrap_or_else(|| "none".into());
    sink.summary(&format!(
        "# measure={measure} N={} r={ratio} K=[{:e}, {:.4}] node_rule={}",
        p.len(),
        p.x_min(),
        p.x_max(),
        p.node_rule()
    ));
    p.write_csv(&mut sink.data)?;
    sink.data.flush()?;
    Ok(())
}

pub fn error_report(args: &ErrorReportArgs) -> CliResult {
    if args.grid_points == 0 {
        return Err(CliError::Usage("--grid-points must be positive".into()));
    }
    let measure = args.model.measure()?;
    let start = Instant::now();
    let (mut report, tuned) = match args.target_n {
        Some(n) => {
            let SpectralMeasure::PowerLaw { alpha } = measure else {
                return Err(CliError::Usage("--target-n needs a power-law measure".into()));
            };
            let tuned = tune_partition(alpha, n, args.horizon, args.grid_points)?;
            let c = tuned.equivalent_c_alpha(args.model.eps);
            (tuned.report, c)
        }
        None => {
            let p = args.model.partition(&measure)?;
            let mut r = sup_l2_error(&measure, &p, &default_grid(args.horizon, args.grid_points))?;
            r.eps_target = args.model.nodes.is_none().then_some(args.model.eps);
            (r, None)
        }
    };
    report.runtime = Some(start.elapsed());
    let mut sink = Sink::open(args.out.as_deref())?;
    report.write_csv(&mut sink.data)?;
    sink.data.flush()?;
    sink.summary(&format!(
        "nodes={} node_rule={} x_min={:e} x_max={:e} sup_l2_error={:e} relative={:e} runtime_s={:.3}",
        report.nodes,
        report.node_rule,
        report.x_min,
        report.x_max,
        report.sup_l2_error,
        report.relative_sup_error(),
        start.elapsed().as_secs_f64()
    ));
    if let Some(c) = tuned {
        sink.summary(&format!("equivalent c_alpha at eps={}: {c}", args.model.eps));
    }
    Ok(())
}

pub fn ergodic(args: &ErgodicArgs) -> CliResult {
    let measure = args.model.measure()?;
    let phi: Phi = args.phi.parse()?;
    let mut config = ErgodicConfig::new(measure, phi, args.horizon, args.dt)
        .replicas(args.replicas)
        .seed(args.seed)
        .scheme(parse_scheme(&args.scheme)?);
    if let Some(raw) = &args.y0 {
        config = config.y0(parse_vector(raw)?);
    }
    let start = Instant::now();
    let result = ergodic_experiment(&config)?;
    let opt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_else(|| "NA".into());
    let line = format!(
        "phi={} estimate={:.6} stderr={} target={} z_score={} replicas={} runtime_s={:.3}",
        result.phi,
        result.estimate,
        opt(result.stderr),
        opt(result.target),
        opt(result.z_score()),
        result.replicas(),
        start.elapsed().as_secs_f64()
    );
    if let Some(p) = &args.out {
        let mut file = BufWriter::new(File::create(p)?);
        result.write_csv(&mut file)?;
        file.flush()?;
    }
    println!("{line}");
    Ok(())
}

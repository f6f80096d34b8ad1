//! Command-line driver for the token selector experiments.
//!
//! Every subcommand writes its data to standard output or to the files named
//! by `--out` / `--csv`; diagnostics go to standard error. Exit status is 0 on
//! success, 1 when a check fails and 2 on usage errors.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use bimba_core::harness::synthetic_question;
use bimba_core::harness::{
    bench_scaling, grad_check, needle_trial, scan_oracle_check, sort_records, write_bench_csv,
    write_needle_csv, BenchMethod, BenchOptions, BenchmarkRecord, Compressor, NeedleConfig,
    NeedleRow, Precision, RecordStatus, QUESTION_TOKENS,
};
use bimba_core::selector::{
    build_layout, select_tokens, Direction, LayoutMode, SelectorConfig, SelectorParams,
};
use bimba_core::tensor_io::{read_header, read_tensor, write_tensor};
use bimba_core::{Error, Grid, Real, Rng};
use clap::{Args, Parser, Subcommand, ValueEnum};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Tolerance of `scan-check`.
pub const SCAN_TOLERANCE: f64 = 1e-10;
/// Tolerance of `grad-check`.
pub const GRAD_TOLERANCE: f64 = 1e-5;

#[derive(Debug, Parser)]
#[command(
    name = "bimba",
    version,
    about = "Selective-scan token selector: checks, benchmarks and compression"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compare the chunked scan against the sequential oracle on random instances.
    ScanCheck(ScanCheckArgs),
    /// Compare scan gradients against central finite differences.
    GradCheck(GradCheckArgs),
    /// Time compressors across sequence lengths and report buffer peaks.
    Bench(BenchArgs),
    /// Needle-retention experiment with a ridge probe.
    Needle(NeedleArgs),
    /// Compress a token grid stored in a tensor file.
    Compress(CompressArgs),
    /// Print the shape arithmetic of a selector configuration.
    Info(InfoArgs),
    /// Write a seeded random token grid to a tensor file.
    GenGrid(GenGridArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PrecisionArg {
    #[value(name = "f64-equivalent", alias = "f64")]
    F64,
    #[value(name = "f32-equivalent", alias = "f32")]
    F32,
}

impl From<PrecisionArg> for Precision {
    fn from(p: PrecisionArg) -> Self {
        match p {
            PrecisionArg::F64 => Precision::F64,
            PrecisionArg::F32 => Precision::F32,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LayoutArg {
    Append,
    Interleave,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DirectionArg {
    Uni,
    Bi,
}

/// Selector settings shared by several subcommands.
#[derive(Debug, Clone, Args)]
pub struct SelectorArgs {
    /// Temporal compression factor.
    #[arg(long, default_value_t = 4)]
    pub tf: usize,
    /// Spatial compression factor (per axis).
    #[arg(long, default_value_t = 2)]
    pub sf: usize,
    #[arg(long, value_enum, default_value_t = LayoutArg::Interleave)]
    pub layout: LayoutArg,
    #[arg(long, value_enum, default_value_t = DirectionArg::Bi)]
    pub direction: DirectionArg,
    /// Condition on a seeded synthetic question prefix.
    #[arg(long)]
    pub question: bool,
    /// State size per channel.
    #[arg(long, default_value_t = 8)]
    pub state: usize,
    /// Number of stacked scan blocks.
    #[arg(long, default_value_t = 1)]
    pub depth: usize,
}

impl SelectorArgs {
    pub fn config(&self, seed: u64) -> SelectorConfig {
        SelectorConfig {
            temporal_factor: self.tf,
            spatial_factor: self.sf,
            layout: match self.layout {
                LayoutArg::Append => LayoutMode::AppendEnd,
                LayoutArg::Interleave => LayoutMode::Interleaved,
            },
            direction: match self.direction {
                DirectionArg::Uni => Direction::Unidirectional,
                DirectionArg::Bi => Direction::Bidirectional,
            },
            question: self.question,
            state_size: self.state,
            scan_depth: self.depth,
            seed,
            ..SelectorConfig::default()
        }
    }
}

#[derive(Debug, Args)]
pub struct ScanCheckArgs {
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 100)]
    pub instances: usize,
    /// Also write the report as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GradCheckArgs {
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 20)]
    pub instances: usize,
    /// Central-difference step.
    #[arg(long, default_value_t = 1e-5)]
    pub step: f64,
    /// Random probe directions per instance, on top of every coordinate axis.
    #[arg(long, default_value_t = 8)]
    pub probes: usize,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub seed: u64,
    /// Comma-separated methods: selector, pooling, attention, perceiver, vanilla.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "selector,pooling,attention"
    )]
    pub methods: Vec<String>,
    /// Comma-separated, ascending video token counts (multiples of 64).
    #[arg(long, value_delimiter = ',', default_value = "4096,8192")]
    pub tokens: Vec<usize>,
    #[arg(long, value_enum, default_value_t = PrecisionArg::F64)]
    pub precision: PrecisionArg,
    /// Largest buffer a method may declare before it is marked "capacity".
    #[arg(long)]
    pub budget_bytes: Option<u64>,
    #[arg(long, default_value_t = 5)]
    pub runs: usize,
    #[arg(long, default_value_t = 1)]
    pub warmup: usize,
    /// Minimum wall time of one timed run; short kernels are repeated.
    #[arg(long, default_value_t = 0.05)]
    pub min_run_seconds: f64,
    #[arg(long, default_value_t = 16)]
    pub channels: usize,
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    #[command(flatten)]
    pub selector: SelectorArgs,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NeedleMethod {
    Selector,
    Pooling,
    Perceiver,
    Attention,
    Vanilla,
}

#[derive(Debug, Args)]
pub struct NeedleArgs {
    /// First seed; trials use `seed, seed+1, …`.
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 5)]
    pub seeds: u64,
    #[arg(
        long,
        value_enum,
        value_delimiter = ',',
        default_value = "selector,pooling"
    )]
    pub methods: Vec<NeedleMethod>,
    #[command(flatten)]
    pub selector: SelectorArgs,
    #[arg(long, default_value_t = 200)]
    pub samples: usize,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompressArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum, default_value_t = PrecisionArg::F64)]
    pub precision: PrecisionArg,
    #[command(flatten)]
    pub selector: SelectorArgs,
}

#[derive(Debug, Args)]
pub struct InfoArgs {
    #[arg(long, default_value_t = 64)]
    pub frames: usize,
    #[arg(long, default_value_t = 40)]
    pub height: usize,
    #[arg(long, default_value_t = 40)]
    pub width: usize,
    #[command(flatten)]
    pub selector: SelectorArgs,
}

#[derive(Debug, Args)]
pub struct GenGridArgs {
    #[arg(long)]
    pub seed: u64,
    /// `T,h,w,d`.
    #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
    pub dims: Vec<usize>,
    #[arg(long, value_enum, default_value_t = PrecisionArg::F64)]
    pub precision: PrecisionArg,
    #[arg(long)]
    pub out: PathBuf,
}

/// Outcome of a subcommand that ran to completion.
enum Outcome {
    Passed,
    CheckFailed,
}

/// Parses `argv` (including the program name) and runs the subcommand.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let mut stdout = std::io::stdout().lock();
    match dispatch(cli.command, &mut stdout) {
        Ok(Outcome::Passed) => EXIT_OK,
        Ok(Outcome::CheckFailed) => EXIT_CHECK_FAILED,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::InvalidArgument(_) | Error::Shape(_) => EXIT_USAGE,
                _ => EXIT_CHECK_FAILED,
            }
        }
    }
}

fn dispatch(command: Command, out: &mut dyn Write) -> bimba_core::Result<Outcome> {
    match command {
        Command::ScanCheck(a) => scan_check(a, out),
        Command::GradCheck(a) => grad_check_cmd(a, out),
        Command::Bench(a) => bench(a, out),
        Command::Needle(a) => needle(a, out),
        Command::Compress(a) => compress(a, out),
        Command::Info(a) => info(a, out),
        Command::GenGrid(a) => gen_grid(a, out),
    }
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

fn stdout_err(e: std::io::Error) -> Error {
    Error::Io {
        path: PathBuf::from("<stdout>"),
        source: e,
    }
}

fn write_text(path: &Path, text: &str) -> bimba_core::Result<()> {
    std::fs::write(path, text).map_err(io_err(path))
}

fn check_report(
    name: &str,
    seed: u64,
    report: bimba_core::harness::CheckReport,
    tol: f64,
) -> (String, bool) {
    let pass = report.max_error <= tol;
    let csv = format!(
        "check,seed,instances,comparisons,max_error,tolerance,status\n{name},{seed},{},{},{:e},{:e},{}\n",
        report.instances,
        report.comparisons,
        report.max_error,
        tol,
        if pass { "pass" } else { "fail" }
    );
    (csv, pass)
}

fn scan_check(a: ScanCheckArgs, out: &mut dyn Write) -> bimba_core::Result<Outcome> {
    let report = scan_oracle_check(a.seed, a.instances)?;
    let (csv, pass) = check_report("scan", a.seed, report, SCAN_TOLERANCE);
    writeln!(
        out,
        "scan-check: {} instances, {} comparisons, max relative deviation {:e} (tolerance {:e})",
        report.instances, report.comparisons, report.max_error, SCAN_TOLERANCE
    )
    .map_err(stdout_err)?;
    if let Some(path) = &a.csv {
        write_text(path, &csv)?;
    }
    if !pass {
        eprintln!(
            "scan-check failed: deviation {:e} exceeds {:e}",
            report.max_error, SCAN_TOLERANCE
        );
    }
    Ok(if pass {
        Outcome::Passed
    } else {
        Outcome::CheckFailed
    })
}

fn grad_check_cmd(a: GradCheckArgs, out: &mut dyn Write) -> bimba_core::Result<Outcome> {
    let report = grad_check(a.seed, a.instances, a.step, a.probes)?;
    let (csv, pass) = check_report("grad", a.seed, report, GRAD_TOLERANCE);
    writeln!(
        out,
        "grad-check: {} instances, {} probes, step {:e}, max relative error {:e} (tolerance {:e})",
        report.instances, report.comparisons, a.step, report.max_error, GRAD_TOLERANCE
    )
    .map_err(stdout_err)?;
    if let Some(path) = &a.csv {
        write_text(path, &csv)?;
    }
    if !pass {
        eprintln!(
            "grad-check failed: error {:e} exceeds {:e}",
            report.max_error, GRAD_TOLERANCE
        );
    }
    Ok(if pass {
        Outcome::Passed
    } else {
        Outcome::CheckFailed
    })
}

/// Sorts `records` by method then token count, writes them as CSV to
/// `csv_path` when given, and returns a fixed-width text table.
pub fn emit_summary(
    records: &mut [BenchmarkRecord],
    csv_path: Option<&Path>,
) -> bimba_core::Result<String> {
    if records.is_empty() {
        return Err(Error::InvalidArgument("no records to summarise".into()));
    }
    sort_records(records);
    if let Some(path) = csv_path {
        let file = File::create(path).map_err(io_err(path))?;
        let mut w = BufWriter::new(file);
        write_bench_csv(records, &mut w)?;
        w.flush().map_err(io_err(path))?;
    }
    let mut table = format!(
        "{:<12} {:>10} {:>16} {:>16} {:>9}\n",
        "method", "tokens", "median_s", "peak_bytes", "status"
    );
    for r in records.iter() {
        let secs = r
            .median_seconds
            .map_or_else(|| "-".to_string(), |s| format!("{s:.6}"));
        let status = match r.status {
            RecordStatus::Ok => "ok",
            RecordStatus::Capacity => "capacity",
        };
        let _ = writeln!(
            table,
            "{:<12} {:>10} {:>16} {:>16} {:>9}",
            r.method, r.tokens, secs, r.peak_bytes, status
        );
    }
    Ok(table)
}

fn bench(a: BenchArgs, out: &mut dyn Write) -> bimba_core::Result<Outcome> {
    let methods = a
        .methods
        .iter()
        .map(|m| m.parse::<BenchMethod>())
        .collect::<bimba_core::Result<Vec<_>>>()?;
    let opts = BenchOptions {
        runs: a.runs,
        warmup: a.warmup,
        min_run_seconds: a.min_run_seconds,
        budget: a.budget_bytes,
        channels: a.channels,
        precision: a.precision.into(),
        seed: a.seed,
        threads: a.threads,
        selector: a.selector.config(a.seed),
    };
    if methods.contains(&BenchMethod::Perceiver) {
        eprintln!("note: the perceiver baseline is a single cross-attention layer");
    }
    let mut records = bench_scaling(&methods, &a.tokens, &opts)?;
    let table = emit_summary(&mut records, a.csv.as_deref())?;
    out.write_all(table.as_bytes()).map_err(stdout_err)?;
    Ok(Outcome::Passed)
}

fn needle_compressor(method: NeedleMethod, selector: &SelectorArgs, seed: u64) -> Compressor {
    match method {
        NeedleMethod::Selector => Compressor::Selector(selector.config(seed)),
        NeedleMethod::Pooling => Compressor::Pooling {
            temporal_factor: selector.tf,
            spatial_factor: selector.sf,
        },
        NeedleMethod::Perceiver => Compressor::Perceiver { latents: 0, seed },
        NeedleMethod::Attention => Compressor::Attention {
            temporal_factor: selector.tf,
            spatial_factor: selector.sf,
            seed,
        },
        NeedleMethod::Vanilla => Compressor::Vanilla,
    }
}

fn needle(a: NeedleArgs, out: &mut dyn Write) -> bimba_core::Result<Outcome> {
    let cfg = NeedleConfig {
        samples: a.samples,
        ..NeedleConfig::default()
    };
    let queries = a
        .selector
        .config(a.seed)
        .query_dims(cfg.frames, cfg.height, cfg.width)?;
    let mut rows = Vec::new();
    for method in &a.methods {
        let mut compressor = needle_compressor(*method, &a.selector, a.seed);
        if let Compressor::Perceiver { seed, .. } = compressor {
            // Same output budget as the pooled query grid.
            compressor = Compressor::Perceiver {
                latents: queries.iter().product(),
                seed,
            };
        }
        for seed in a.seed..a.seed + a.seeds {
            let r = needle_trial(&compressor, &cfg, seed)?;
            rows.push(NeedleRow {
                method: compressor.name(),
                seed,
                accuracy: r.accuracy,
                per_position: r.per_position,
            });
        }
    }
    let mut table = String::new();
    for r in &rows {
        let pp: Vec<String> = r.per_position.iter().map(|v| format!("{v:.3}")).collect();
        let _ = writeln!(
            table,
            "{:<28} seed {:>4}  accuracy {:.4}  per-position [{}]",
            r.method,
            r.seed,
            r.accuracy,
            pp.join(" ")
        );
    }
    out.write_all(table.as_bytes()).map_err(stdout_err)?;
    if let Some(path) = &a.csv {
        let file = File::create(path).map_err(io_err(path))?;
        let mut w = BufWriter::new(file);
        write_needle_csv(&rows, &mut w)?;
        w.flush().map_err(io_err(path))?;
    }
    Ok(Outcome::Passed)
}

fn compress_as<R: Real>(a: &CompressArgs, cfg: &SelectorConfig) -> bimba_core::Result<[usize; 4]> {
    let header = read_header(&a.input)?;
    let z: Grid<R> = match header.dtype {
        1 => read_tensor::<f64>(&a.input)?.cast(),
        _ => read_tensor::<f32>(&a.input)?.cast(),
    };
    let params = SelectorParams::<R>::init(z.channels(), cfg);
    let question = cfg
        .question
        .then(|| synthetic_question::<R>(z.channels(), cfg.seed));
    let q = select_tokens(&z, question.as_ref(), cfg, &params)?;
    write_tensor(&q, &a.out)?;
    Ok(q.dims())
}

fn compress(a: CompressArgs, out: &mut dyn Write) -> bimba_core::Result<Outcome> {
    let cfg = a.selector.config(a.seed.unwrap_or(0));
    cfg.validate()?;
    let dims = match a.precision {
        PrecisionArg::F64 => compress_as::<f64>(&a, &cfg)?,
        PrecisionArg::F32 => compress_as::<f32>(&a, &cfg)?,
    };
    writeln!(
        out,
        "wrote {}x{}x{}x{} query grid to {}",
        dims[0],
        dims[1],
        dims[2],
        dims[3],
        a.out.display()
    )
    .map_err(stdout_err)?;
    Ok(Outcome::Passed)
}

/// Shape arithmetic for a `(T, h, w)` grid under `cfg`.
pub fn shape_report(
    frames: usize,
    height: usize,
    width: usize,
    cfg: &SelectorConfig,
) -> bimba_core::Result<String> {
    cfg.validate()?;
    let [tq, hq, wq] = cfg.query_dims(frames, height, width)?;
    let video = frames * height * width;
    let queries = tq * hq * wq;
    let question = if cfg.question { QUESTION_TOKENS } else { 0 };
    let layout = build_layout(video, queries, cfg.layout, question)?;
    let mut s = String::new();
    let _ = writeln!(
        s,
        "video grid      {frames}x{height}x{width} = {video} tokens"
    );
    let _ = writeln!(s, "query grid      {tq}x{hq}x{wq} = {queries} tokens");
    let _ = writeln!(s, "compression     {}x", video as f64 / queries as f64);
    let _ = writeln!(s, "scanned length  {}", layout.len());
    Ok(s)
}

fn info(a: InfoArgs, out: &mut dyn Write) -> bimba_core::Result<Outcome> {
    let report = shape_report(a.frames, a.height, a.width, &a.selector.config(0))?;
    out.write_all(report.as_bytes()).map_err(stdout_err)?;
    Ok(Outcome::Passed)
}

fn gen_grid(a: GenGridArgs, out: &mut dyn Write) -> bimba_core::Result<Outcome> {
    let dims: [usize; 4] = a.dims.as_slice().try_into().map_err(|_| {
        Error::InvalidArgument(format!("--dims needs 4 values, got {}", a.dims.len()))
    })?;
    let mut rng = Rng::new(a.seed);
    match a.precision {
        PrecisionArg::F64 => write_tensor(&Grid::<f64>::random(dims, 1.0, &mut rng)?, &a.out)?,
        PrecisionArg::F32 => write_tensor(&Grid::<f32>::random(dims, 1.0, &mut rng)?, &a.out)?,
    }
    writeln!(
        out,
        "wrote {}x{}x{}x{} grid to {}",
        dims[0],
        dims[1],
        dims[2],
        dims[3],
        a.out.display()
    )
    .map_err(stdout_err)?;
    Ok(Outcome::Passed)
}

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use crate::baselines::{
    attention_compress_metered, perceiver_compress_metered, pool_compress_metered, AttentionParams,
};
use crate::error::{Error, Result};
use crate::grid::{Grid, Seq, TokenGrid};
use crate::meter::BufferMeter;
use crate::real::Real;
use crate::rng::Rng;
use crate::selector::{select_tokens_metered, LayoutMode, SelectorConfig, SelectorParams};

use super::needle::synthetic_question;
use super::records::{BenchmarkRecord, RecordStatus};

/// Spatial side of the synthetic benchmark grids; the frame count is
/// `tokens / BENCH_SIDE²`.
pub const BENCH_SIDE: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BenchMethod {
    Selector,
    Pooling,
    Attention,
    Perceiver,
    Vanilla,
}

impl BenchMethod {
    pub const ALL: [BenchMethod; 5] = [
        BenchMethod::Selector,
        BenchMethod::Pooling,
        BenchMethod::Attention,
        BenchMethod::Perceiver,
        BenchMethod::Vanilla,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BenchMethod::Selector => "selector",
            BenchMethod::Pooling => "pooling",
            BenchMethod::Attention => "attention",
            BenchMethod::Perceiver => "perceiver",
            BenchMethod::Vanilla => "vanilla",
        }
    }
}

impl fmt::Display for BenchMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BenchMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BenchMethod::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown method {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Precision {
    #[default]
    F64,
    F32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchOptions {
    /// Timed runs per cell; the median is reported.
    pub runs: usize,
    /// Untimed runs before timing starts; at least one always happens, and
    /// warm-up continues until `min_run_seconds` has elapsed. The fastest
    /// warm-up run calibrates the repetition count.
    pub warmup: usize,
    /// Each timed run repeats the kernel until at least this long has
    /// elapsed and reports the per-call time, so that sub-millisecond
    /// kernels are not dominated by clock and scheduler noise.
    pub min_run_seconds: f64,
    /// Byte budget for any single declared buffer.
    pub budget: Option<u64>,
    pub channels: usize,
    pub precision: Precision,
    pub seed: u64,
    /// Worker threads for the run; 1 gives stable ratios.
    pub threads: usize,
    /// Compression factors, layout and scan settings shared by all methods.
    pub selector: SelectorConfig,
}

impl Default for BenchOptions {
    fn default() -> Self {
        Self {
            runs: 5,
            warmup: 1,
            min_run_seconds: 0.05,
            budget: None,
            channels: 16,
            precision: Precision::F64,
            seed: 0,
            threads: 1,
            selector: SelectorConfig::default(),
        }
    }
}

impl BenchOptions {
    fn validate(&self) -> Result<()> {
        if self.runs == 0 || self.channels == 0 || self.threads == 0 {
            return Err(Error::invalid(
                "runs, channels and threads must be positive",
            ));
        }
        if !(self.min_run_seconds >= 0.0) || !self.min_run_seconds.is_finite() {
            return Err(Error::invalid(
                "minimum run time must be finite and non-negative",
            ));
        }
        self.selector.validate()
    }

    /// Grid dimensions for `tokens` video tokens.
    pub fn grid_dims(&self, tokens: usize) -> Result<[usize; 4]> {
        let plane = BENCH_SIDE * BENCH_SIDE;
        if tokens == 0 || !tokens.is_multiple_of(plane) {
            return Err(Error::invalid(format!(
                "token count {tokens} is not a positive multiple of {plane}"
            )));
        }
        let dims = [tokens / plane, BENCH_SIDE, BENCH_SIDE, self.channels];
        self.selector.query_dims(dims[0], dims[1], dims[2])?;
        Ok(dims)
    }
}

/// Sequence length a method actually processes for `video` input tokens
/// compressed to `queries` outputs.
fn processed_len(method: BenchMethod, cfg: &SelectorConfig, video: usize, queries: usize) -> usize {
    match method {
        BenchMethod::Selector => {
            let question = if cfg.question {
                super::needle::QUESTION_TOKENS
            } else {
                0
            };
            video + queries + question
        }
        BenchMethod::Attention => video + queries,
        BenchMethod::Pooling | BenchMethod::Perceiver | BenchMethod::Vanilla => video,
    }
}

/// Times every `(method, token count)` cell.
///
/// `token_counts` are video token counts (multiples of 64 whose frame count
/// divides by the temporal factor) in ascending order. Each record's
/// `tokens` is the sequence length the method processed. A cell whose
/// declared buffers exceed `opts.budget` is reported with
/// [`RecordStatus::Capacity`] and the offending size instead of a timing.
pub fn bench_scaling(
    methods: &[BenchMethod],
    token_counts: &[usize],
    opts: &BenchOptions,
) -> Result<Vec<BenchmarkRecord>> {
    opts.validate()?;
    if token_counts.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("token counts must be strictly ascending"));
    }
    for &l in token_counts {
        opts.grid_dims(l)?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.threads)
        .build()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
    pool.install(|| match opts.precision {
        Precision::F64 => bench_all::<f64>(methods, token_counts, opts),
        Precision::F32 => bench_all::<f32>(methods, token_counts, opts),
    })
}

fn bench_all<R: Real>(
    methods: &[BenchMethod],
    token_counts: &[usize],
    opts: &BenchOptions,
) -> Result<Vec<BenchmarkRecord>> {
    let root = Rng::new(opts.seed);
    let grids = token_counts
        .iter()
        .enumerate()
        .map(|(ti, &tokens)| {
            Grid::<R>::random(opts.grid_dims(tokens)?, 1.0, &mut root.split(ti as u64))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut records = Vec::with_capacity(methods.len() * token_counts.len());
    for &method in methods {
        let cells = grids
            .iter()
            .map(|z| Cell::new(method, z, opts))
            .collect::<Result<Vec<_>>>()?;
        records.extend(time_cells(cells, opts)?);
    }
    Ok(records)
}

/// One `(method, grid)` pair with its frozen parameters.
struct Cell<'a, R> {
    method: BenchMethod,
    z: &'a TokenGrid<R>,
    cfg: &'a SelectorConfig,
    query_dims: [usize; 3],
    selector: Option<SelectorParams<R>>,
    question: Option<Seq<R>>,
    attention: Option<AttentionParams<R>>,
    budget: Option<u64>,
}

impl<'a, R: Real> Cell<'a, R> {
    fn new(method: BenchMethod, z: &'a TokenGrid<R>, opts: &'a BenchOptions) -> Result<Self> {
        let cfg = &opts.selector;
        let query_dims = cfg.query_dims(z.frames(), z.height(), z.width())?;
        let channels = z.channels();
        let queries = query_dims.iter().product();
        Ok(Self {
            method,
            z,
            cfg,
            query_dims,
            selector: (method == BenchMethod::Selector)
                .then(|| SelectorParams::init(channels, cfg)),
            question: cfg.question.then(|| synthetic_question(channels, cfg.seed)),
            attention: match method {
                BenchMethod::Attention => Some(AttentionParams::init(channels, 1, opts.seed)),
                BenchMethod::Perceiver => Some(AttentionParams::init(channels, queries, opts.seed)),
                _ => None,
            },
            budget: opts.budget,
        })
    }

    fn tokens(&self) -> usize {
        processed_len(
            self.method,
            self.cfg,
            self.z.tokens(),
            self.query_dims.iter().product(),
        )
    }

    /// Runs the kernel once and returns the meter peak.
    fn run(&self) -> Result<u64> {
        let mut meter = self
            .budget
            .map_or_else(BufferMeter::new, BufferMeter::with_budget);
        let meter = &mut meter;
        let [tq, hq, wq] = self.query_dims;
        let z = self.z;
        let out_len = match self.method {
            BenchMethod::Selector => {
                let params = self.selector.as_ref().expect("selector params prepared");
                select_tokens_metered(z, self.question.as_ref(), self.cfg, params, meter)?.tokens()
            }
            BenchMethod::Pooling => pool_compress_metered(z, tq, hq, wq, meter)?.tokens(),
            BenchMethod::Attention => {
                let q = pool_compress_metered(z, tq, hq, wq, meter)?;
                let p = self.attention.as_ref().expect("attention params prepared");
                attention_compress_metered(z, &q, p, meter)?.len()
            }
            BenchMethod::Perceiver => {
                let p = self.attention.as_ref().expect("perceiver params prepared");
                perceiver_compress_metered(z, p, meter)?.len()
            }
            BenchMethod::Vanilla => {
                meter.declare("flattened tokens", z.tokens() * z.channels(), R::BYTES)?;
                z.flatten().len()
            }
        };
        std::hint::black_box(out_len);
        Ok(meter.peak_bytes())
    }

    fn record(&self, median_seconds: Option<f64>, peak_bytes: u64) -> BenchmarkRecord {
        BenchmarkRecord {
            method: self.method.name().to_string(),
            tokens: self.tokens(),
            median_seconds,
            peak_bytes,
            status: if median_seconds.is_some() {
                RecordStatus::Ok
            } else {
                RecordStatus::Capacity
            },
            accuracy: None,
        }
    }
}

/// Warms up every cell, then takes the timed runs round-robin across cells so
/// that slow drifts of the host affect all token counts alike.
fn time_cells<R: Real>(
    cells: Vec<Cell<'_, R>>,
    opts: &BenchOptions,
) -> Result<Vec<BenchmarkRecord>> {
    struct State {
        peak: u64,
        reps: usize,
        times: Vec<f64>,
        capacity: Option<u64>,
    }
    let mut states = Vec::with_capacity(cells.len());
    for cell in &cells {
        let mut state = State {
            peak: 0,
            reps: 1,
            times: Vec::with_capacity(opts.runs),
            capacity: None,
        };
        let mut fastest = f64::INFINITY;
        let warm_start = Instant::now();
        let mut warm_runs = 0;
        while warm_runs < opts.warmup.max(1)
            || warm_start.elapsed().as_secs_f64() < opts.min_run_seconds
        {
            warm_runs += 1;
            let start = Instant::now();
            match cell.run() {
                Ok(peak) => state.peak = state.peak.max(peak),
                Err(Error::Capacity { needed, .. } | Error::OutOfMemory { needed, .. }) => {
                    state.capacity = Some(needed);
                    break;
                }
                Err(e) => return Err(e),
            }
            fastest = fastest.min(start.elapsed().as_secs_f64());
        }
        state.reps =
            ((opts.min_run_seconds / fastest.max(1e-9)).ceil() as usize).clamp(1, 1_000_000);
        states.push(state);
    }
    for _ in 0..opts.runs {
        for (cell, state) in cells.iter().zip(states.iter_mut()) {
            if state.capacity.is_some() {
                continue;
            }
            let start = Instant::now();
            for _ in 0..state.reps {
                state.peak = state.peak.max(cell.run()?);
            }
            state
                .times
                .push(start.elapsed().as_secs_f64() / state.reps as f64);
        }
    }
    Ok(cells
        .iter()
        .zip(states.iter_mut())
        .map(|(cell, state)| match state.capacity {
            Some(needed) => cell.record(None, needed),
            None => cell.record(Some(median(&mut state.times)), state.peak),
        })
        .collect())
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Layout string used in human-readable bench summaries.
pub fn layout_name(mode: LayoutMode) -> &'static str {
    match mode {
        LayoutMode::AppendEnd => "append",
        LayoutMode::Interleaved => "interleave",
    }
}

//! Spatiotemporal token selector.
//!
//! Queries are initialised by adaptive 3-D average pooling of the token grid,
//! placed into one sequence with the video tokens (and an optional question
//! prefix), refined by `s ← s + scan(LN(s))`, and read back out at their
//! slots.

mod layout;
mod norm;
mod pool;

pub use layout::{build_layout, LayoutMode, SequenceLayout, Slot};
pub use norm::{layer_norm, normalize};
pub use pool::{adaptive_pool3d, adaptive_pool3d_metered, pool_bin};

use crate::error::{Error, Result};
use crate::grid::{Grid, QueryGrid, Seq, TokenGrid};
use crate::meter::BufferMeter;
use crate::real::Real;
use crate::rng::Rng;
use crate::ssm::{scan_chunked_metered, SsmInit, SsmParams, DEFAULT_CHUNK};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Unidirectional,
    Bidirectional,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectorConfig {
    /// Temporal compression factor: `T' = T / temporal_factor`.
    pub temporal_factor: usize,
    /// Spatial compression factor applied to both `h` and `w`.
    pub spatial_factor: usize,
    pub layout: LayoutMode,
    pub direction: Direction,
    /// Whether a question prefix is prepended before scanning.
    pub question: bool,
    pub state_size: usize,
    /// Number of `s + scan(LN(s))` blocks.
    pub scan_depth: usize,
    pub seed: u64,
    pub chunk_len: usize,
    pub ssm_init: SsmInit,
}

impl Default for SelectorConfig {
    fn default() -> Self {
        Self {
            temporal_factor: 4,
            spatial_factor: 2,
            layout: LayoutMode::Interleaved,
            direction: Direction::Bidirectional,
            question: false,
            state_size: 8,
            scan_depth: 1,
            seed: 0,
            chunk_len: DEFAULT_CHUNK,
            ssm_init: SsmInit::default(),
        }
    }
}

impl SelectorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.temporal_factor == 0 || self.spatial_factor == 0 {
            return Err(Error::invalid("compression factors must be at least 1"));
        }
        if self.temporal_factor == 1 && self.spatial_factor == 1 {
            return Err(Error::invalid(
                "at least one compression factor must exceed 1",
            ));
        }
        if self.state_size == 0 {
            return Err(Error::invalid("state size must be positive"));
        }
        if self.scan_depth == 0 {
            return Err(Error::invalid("scan depth must be at least 1"));
        }
        if self.chunk_len == 0 {
            return Err(Error::invalid("chunk length must be at least 1"));
        }
        Ok(())
    }

    /// Query grid dims `(T', h', w')` for a `(T, h, w)` input; factors must divide.
    pub fn query_dims(&self, frames: usize, height: usize, width: usize) -> Result<[usize; 3]> {
        self.validate()?;
        let div = |n: usize, f: usize, axis: &str| {
            if !n.is_multiple_of(f) || n < f {
                Err(Error::invalid(format!(
                    "{axis} extent {n} is not a multiple of factor {f}"
                )))
            } else {
                Ok(n / f)
            }
        };
        Ok([
            div(frames, self.temporal_factor, "temporal")?,
            div(height, self.spatial_factor, "height")?,
            div(width, self.spatial_factor, "width")?,
        ])
    }
}

/// One `s ← s + scan(LN(s))` block.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanBlock<R> {
    pub gamma: Vec<R>,
    pub beta: Vec<R>,
    pub eps: R,
    pub forward: SsmParams<R>,
    /// Present for bidirectional selectors.
    pub backward: Option<SsmParams<R>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectorParams<R> {
    pub blocks: Vec<ScanBlock<R>>,
}

impl<R: Real> SelectorParams<R> {
    /// Seeded parameters for `channels`-wide tokens; LN affine starts at (1, 0).
    pub fn init(channels: usize, cfg: &SelectorConfig) -> Self {
        let root = Rng::new(cfg.seed);
        let blocks = (0..cfg.scan_depth as u64)
            .map(|i| {
                let forward = SsmParams::init(
                    channels,
                    cfg.state_size,
                    cfg.ssm_init,
                    &mut root.split(2 * i),
                );
                let backward = (cfg.direction == Direction::Bidirectional).then(|| {
                    SsmParams::init(
                        channels,
                        cfg.state_size,
                        cfg.ssm_init,
                        &mut root.split(2 * i + 1),
                    )
                });
                ScanBlock {
                    gamma: vec![R::one(); channels],
                    beta: vec![R::zero(); channels],
                    eps: R::of_f64(1e-5),
                    forward,
                    backward,
                }
            })
            .collect();
        Self { blocks }
    }

    /// Every scan emits exactly zero, leaving only the residual path.
    pub fn silenced(mut self) -> Self {
        for b in &mut self.blocks {
            b.forward = b.forward.clone().silenced();
            b.backward = b.backward.take().map(SsmParams::silenced);
        }
        self
    }

    pub fn channels(&self) -> Option<usize> {
        self.blocks.first().map(|b| b.forward.channels)
    }
}

/// Places video, query and question vectors according to `layout`.
pub fn assemble<R: Real>(
    z: &TokenGrid<R>,
    q: &QueryGrid<R>,
    question: Option<&Seq<R>>,
    layout: &SequenceLayout,
) -> Result<Seq<R>> {
    let d = z.channels();
    let n_question = question.map_or(0, Seq::len);
    if q.channels() != d || question.is_some_and(|x| x.dim() != d) {
        return Err(Error::shape(
            "video, query and question channel counts differ",
        ));
    }
    if layout.video_count() != z.tokens()
        || layout.query_count() != q.tokens()
        || layout.question_count() != n_question
    {
        return Err(Error::shape(format!(
            "layout expects {}/{}/{} video/query/question tokens, got {}/{}/{}",
            layout.video_count(),
            layout.query_count(),
            layout.question_count(),
            z.tokens(),
            q.tokens(),
            n_question
        )));
    }
    let mut data = Vec::with_capacity(layout.len() * d);
    for slot in layout.slots() {
        let src = match *slot {
            Slot::Video(i) => &z.data()[i * d..(i + 1) * d],
            Slot::Query(i) => &q.data()[i * d..(i + 1) * d],
            Slot::Question(i) => question.expect("counted above").row(i),
        };
        data.extend_from_slice(src);
    }
    Seq::new(layout.len(), d, data)
}

/// Vectors at the query slots, in query-index order.
pub fn extract<R: Real>(seq: &Seq<R>, layout: &SequenceLayout) -> Result<Seq<R>> {
    if seq.len() != layout.len() {
        return Err(Error::shape(format!(
            "sequence has {} positions, layout has {}",
            seq.len(),
            layout.len()
        )));
    }
    Seq::from_rows(
        seq.dim(),
        layout.query_positions().into_iter().map(|k| seq.row(k)),
    )
}

/// `scan(s; fwd) + reverse(scan(reverse(s); bwd))`.
pub fn bidirectional_scan<R: Real>(
    seq: &Seq<R>,
    forward: &SsmParams<R>,
    backward: &SsmParams<R>,
) -> Result<Seq<R>> {
    bidirectional_scan_metered(
        seq,
        forward,
        backward,
        DEFAULT_CHUNK,
        &mut BufferMeter::new(),
    )
}

pub fn bidirectional_scan_metered<R: Real>(
    seq: &Seq<R>,
    forward: &SsmParams<R>,
    backward: &SsmParams<R>,
    chunk_len: usize,
    meter: &mut BufferMeter,
) -> Result<Seq<R>> {
    let fwd = scan_chunked_metered(seq, forward, chunk_len, meter)?;
    meter.declare("reversed sequence", seq.len() * seq.dim(), R::BYTES)?;
    let bwd = scan_chunked_metered(&seq.reversed(), backward, chunk_len, meter)?.reversed();
    fwd.add(&bwd)
}

/// Compresses `z` to `(T/tf, h/sf, w/sf)` query tokens.
pub fn select_tokens<R: Real>(
    z: &TokenGrid<R>,
    question: Option<&Seq<R>>,
    cfg: &SelectorConfig,
    params: &SelectorParams<R>,
) -> Result<QueryGrid<R>> {
    select_tokens_metered(z, question, cfg, params, &mut BufferMeter::new())
}

pub fn select_tokens_metered<R: Real>(
    z: &TokenGrid<R>,
    question: Option<&Seq<R>>,
    cfg: &SelectorConfig,
    params: &SelectorParams<R>,
    meter: &mut BufferMeter,
) -> Result<QueryGrid<R>> {
    let [tq, hq, wq] = cfg.query_dims(z.frames(), z.height(), z.width())?;
    if cfg.question != question.is_some() {
        return Err(Error::invalid(if cfg.question {
            "question conditioning enabled but no question supplied"
        } else {
            "question supplied but conditioning is disabled"
        }));
    }
    if params.blocks.len() != cfg.scan_depth {
        return Err(Error::shape(format!(
            "params hold {} scan blocks, config asks for {}",
            params.blocks.len(),
            cfg.scan_depth
        )));
    }
    for block in &params.blocks {
        if block.forward.channels != z.channels() || block.forward.state != cfg.state_size {
            return Err(Error::shape(
                "selector params do not match channels/state size",
            ));
        }
        if (cfg.direction == Direction::Bidirectional) != block.backward.is_some() {
            return Err(Error::shape("selector params do not match scan direction"));
        }
    }

    let q = adaptive_pool3d_metered(z, tq, hq, wq, meter)?;
    let layout = build_layout(
        z.tokens(),
        q.tokens(),
        cfg.layout,
        question.map_or(0, Seq::len),
    )?;
    let mut seq = assemble(z, &q, question, &layout)?;
    let seq_elems = seq.len() * seq.dim();
    meter.declare("combined sequence", seq_elems, R::BYTES)?;

    for block in &params.blocks {
        meter.declare("normalized sequence", seq_elems, R::BYTES)?;
        let normed = layer_norm(&seq, &block.gamma, &block.beta, block.eps)?;
        let mixed = match &block.backward {
            None => scan_chunked_metered(&normed, &block.forward, cfg.chunk_len, meter)?,
            Some(bwd) => {
                bidirectional_scan_metered(&normed, &block.forward, bwd, cfg.chunk_len, meter)?
            }
        };
        seq = seq.add(&mixed)?;
    }

    let out = extract(&seq, &layout)?;
    Grid::unflatten(out, tq, hq, wq)
}

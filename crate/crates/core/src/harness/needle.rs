use crate::baselines::{
    attention_compress, perceiver_compress, pool_compress, vanilla_pass, AttentionParams,
};
use crate::error::{Error, Result};
use crate::grid::{Grid, Seq, TokenGrid};
use crate::real::Real;
use crate::rng::Rng;
use crate::selector::{select_tokens, SelectorConfig, SelectorParams};

use super::ridge::ridge_probe;

/// One planted needle.
#[derive(Debug, Clone, PartialEq)]
pub struct NeedleSpec {
    /// Unit-norm channel direction.
    pub direction: Vec<f64>,
    pub frame: usize,
    pub y: usize,
    pub x: usize,
    pub amplitude: f64,
    pub noise: f64,
}

impl NeedleSpec {
    pub fn validate(&self, dims: [usize; 4]) -> Result<()> {
        let [t, h, w, d] = dims;
        if self.direction.len() != d {
            return Err(Error::shape(
                "needle direction length differs from channel count",
            ));
        }
        let norm = self.direction.iter().map(|v| v * v).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!("needle direction has norm {norm}")));
        }
        if self.frame >= t || self.y >= h || self.x >= w {
            return Err(Error::invalid("needle position outside the grid"));
        }
        if !(self.amplitude > 0.0) || !(self.noise >= 0.0) {
            return Err(Error::invalid(
                "needle amplitude must be positive and noise non-negative",
            ));
        }
        Ok(())
    }

    /// Gaussian background of scale `noise` plus `amplitude·direction` at the needle token.
    pub fn render(&self, dims: [usize; 4], rng: &mut Rng) -> Result<TokenGrid<f64>> {
        self.validate(dims)?;
        let mut data: Vec<f64> = rng.normal_vec(dims.iter().product(), self.noise);
        let d = dims[3];
        let i = ((self.frame * dims[1] + self.y) * dims[2] + self.x) * d;
        for (v, u) in data[i..i + d].iter_mut().zip(&self.direction) {
            *v += self.amplitude * u;
        }
        Grid::new(dims, data)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeedleConfig {
    pub frames: usize,
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub samples: usize,
    /// Candidate needle frames; the label is the index into this list.
    pub positions: Vec<usize>,
    pub amplitude: f64,
    pub noise: f64,
    /// Spatial site `(y, x)` of the needle token.
    pub site: (usize, usize),
    /// Ridge penalty of the probe.
    pub lambda: f64,
}

impl Default for NeedleConfig {
    fn default() -> Self {
        Self {
            frames: 32,
            height: 8,
            width: 8,
            channels: 16,
            samples: 200,
            positions: vec![0, 4, 8, 12, 16, 20, 24, 28],
            amplitude: 4.0,
            noise: 0.5,
            site: (4, 4),
            lambda: 1e-3,
        }
    }
}

impl NeedleConfig {
    pub fn dims(&self) -> [usize; 4] {
        [self.frames, self.height, self.width, self.channels]
    }
}

#[derive(Debug, Clone)]
pub struct NeedleSample {
    pub grid: TokenGrid<f64>,
    pub label: usize,
}

#[derive(Debug, Clone)]
pub struct NeedleDataset {
    pub samples: Vec<NeedleSample>,
    pub direction: Vec<f64>,
    pub positions: Vec<usize>,
}

impl NeedleDataset {
    pub fn classes(&self) -> usize {
        self.positions.len()
    }
}

/// Balanced needle-retrieval dataset: labels cycle through `positions` and
/// the sample order is then shuffled.
pub fn gen_needle_dataset(cfg: &NeedleConfig, rng: &mut Rng) -> Result<NeedleDataset> {
    if cfg.positions.is_empty() {
        return Err(Error::invalid("needle positions must be nonempty"));
    }
    if let Some(&bad) = cfg.positions.iter().find(|&&f| f >= cfg.frames) {
        return Err(Error::invalid(format!(
            "needle frame {bad} outside [0, {})",
            cfg.frames
        )));
    }
    let dims = cfg.dims();
    let mut direction = rng.normal_vec(cfg.channels, 1.0);
    let norm = direction.iter().map(|v| v * v).sum::<f64>().sqrt();
    direction.iter_mut().for_each(|v| *v /= norm);

    let k = cfg.positions.len();
    let mut labels: Vec<usize> = (0..cfg.samples).map(|i| i % k).collect();
    rng.shuffle(&mut labels);
    let samples = labels
        .into_iter()
        .map(|label| {
            let spec = NeedleSpec {
                direction: direction.clone(),
                frame: cfg.positions[label],
                y: cfg.site.0,
                x: cfg.site.1,
                amplitude: cfg.amplitude,
                noise: cfg.noise,
            };
            Ok(NeedleSample {
                grid: spec.render(dims, rng)?,
                label,
            })
        })
        .collect::<Result<_>>()?;
    Ok(NeedleDataset {
        samples,
        direction,
        positions: cfg.positions.clone(),
    })
}

/// A frozen, seeded compressor under evaluation.
#[derive(Debug, Clone, PartialEq)]
pub enum Compressor {
    Selector(SelectorConfig),
    Pooling {
        temporal_factor: usize,
        spatial_factor: usize,
    },
    Perceiver {
        latents: usize,
        seed: u64,
    },
    Attention {
        temporal_factor: usize,
        spatial_factor: usize,
        seed: u64,
    },
    Vanilla,
}

impl Compressor {
    pub fn name(&self) -> String {
        use crate::selector::{Direction, LayoutMode};
        match self {
            Compressor::Selector(c) => {
                let layout = match c.layout {
                    LayoutMode::AppendEnd => "append",
                    LayoutMode::Interleaved => "interleave",
                };
                let dir = match c.direction {
                    Direction::Unidirectional => "uni",
                    Direction::Bidirectional => "bi",
                };
                let q = if c.question { "-question" } else { "" };
                format!("selector-{layout}-{dir}{q}")
            }
            Compressor::Pooling { .. } => "pooling".into(),
            Compressor::Perceiver { .. } => "perceiver".into(),
            Compressor::Attention { .. } => "attention".into(),
            Compressor::Vanilla => "vanilla".into(),
        }
    }

    /// Same compressor with every internal seed replaced by `seed`.
    pub fn reseeded(&self, seed: u64) -> Self {
        match self.clone() {
            Compressor::Selector(c) => Compressor::Selector(SelectorConfig { seed, ..c }),
            Compressor::Perceiver { latents, .. } => Compressor::Perceiver { latents, seed },
            Compressor::Attention {
                temporal_factor,
                spatial_factor,
                ..
            } => Compressor::Attention {
                temporal_factor,
                spatial_factor,
                seed,
            },
            other => other,
        }
    }

    /// Builds the frozen compressor for `channels`-wide tokens.
    pub fn prepare<R: Real>(&self, channels: usize) -> Prepared<R> {
        match self {
            Compressor::Selector(c) => Prepared::Selector {
                question: c.question.then(|| synthetic_question(channels, c.seed)),
                params: SelectorParams::init(channels, c),
                cfg: c.clone(),
            },
            Compressor::Pooling {
                temporal_factor,
                spatial_factor,
            } => Prepared::Pooling {
                tf: *temporal_factor,
                sf: *spatial_factor,
            },
            Compressor::Perceiver { latents, seed } => {
                Prepared::Perceiver(AttentionParams::init(channels, *latents, *seed))
            }
            Compressor::Attention {
                temporal_factor,
                spatial_factor,
                seed,
            } => Prepared::Attention {
                tf: *temporal_factor,
                sf: *spatial_factor,
                params: AttentionParams::init(channels, 1, *seed),
            },
            Compressor::Vanilla => Prepared::Vanilla,
        }
    }
}

/// Number of prepended question vectors used by conditioned selectors.
pub const QUESTION_TOKENS: usize = 4;

/// Seeded stand-in for tokenised question text.
pub fn synthetic_question<R: Real>(channels: usize, seed: u64) -> Seq<R> {
    Seq::random(
        QUESTION_TOKENS,
        channels,
        1.0,
        &mut Rng::new(seed).split(1 << 32),
    )
}

pub enum Prepared<R> {
    Selector {
        cfg: SelectorConfig,
        params: SelectorParams<R>,
        question: Option<Seq<R>>,
    },
    Pooling {
        tf: usize,
        sf: usize,
    },
    Perceiver(AttentionParams<R>),
    Attention {
        tf: usize,
        sf: usize,
        params: AttentionParams<R>,
    },
    Vanilla,
}

impl<R: Real> Prepared<R> {
    pub fn compress(&self, z: &TokenGrid<R>) -> Result<Seq<R>> {
        let pooled_dims = |tf: usize, sf: usize| -> Result<[usize; 3]> {
            SelectorConfig {
                temporal_factor: tf,
                spatial_factor: sf,
                ..Default::default()
            }
            .query_dims(z.frames(), z.height(), z.width())
        };
        match self {
            Prepared::Selector {
                cfg,
                params,
                question,
            } => Ok(select_tokens(z, question.as_ref(), cfg, params)?.flatten()),
            Prepared::Pooling { tf, sf } => {
                let [t, h, w] = pooled_dims(*tf, *sf)?;
                Ok(pool_compress(z, t, h, w)?.flatten())
            }
            Prepared::Perceiver(p) => perceiver_compress(z, p),
            Prepared::Attention { tf, sf, params } => {
                let [t, h, w] = pooled_dims(*tf, *sf)?;
                attention_compress(z, &pool_compress(z, t, h, w)?, params)
            }
            Prepared::Vanilla => Ok(vanilla_pass(z)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeedleResult {
    pub accuracy: f64,
    /// Test accuracy restricted to each needle position, in position order.
    pub per_position: Vec<f64>,
    pub train_size: usize,
    pub test_size: usize,
}

/// Stratified 70/30 split; the ridge probe is fit on compressed training
/// features and scored on the held-out samples.
pub fn run_needle_eval(
    compressor: &Compressor,
    dataset: &NeedleDataset,
    lambda: f64,
    rng: &mut Rng,
) -> Result<NeedleResult> {
    if dataset.samples.is_empty() {
        return Err(Error::invalid("empty needle dataset"));
    }
    let k = dataset.classes();
    let channels = dataset.samples[0].grid.channels();
    let prepared = compressor.prepare::<f64>(channels);
    let features: Vec<Vec<f64>> = dataset
        .samples
        .iter()
        .map(|s| prepared.compress(&s.grid).map(Seq::into_data))
        .collect::<Result<_>>()?;

    let (mut train, mut test) = (Vec::new(), Vec::new());
    for class in 0..k {
        let mut idx: Vec<usize> = (0..dataset.samples.len())
            .filter(|&i| dataset.samples[i].label == class)
            .collect();
        rng.shuffle(&mut idx);
        let cut = (idx.len() as f64 * 0.7).round() as usize;
        train.extend_from_slice(&idx[..cut]);
        test.extend_from_slice(&idx[cut..]);
    }
    if train.is_empty() || test.is_empty() {
        return Err(Error::invalid(
            "needle split left an empty train or test set",
        ));
    }
    train.sort_unstable();
    test.sort_unstable();

    let pick = |ids: &[usize]| -> (Vec<Vec<f64>>, Vec<usize>) {
        ids.iter()
            .map(|&i| (features[i].clone(), dataset.samples[i].label))
            .unzip()
    };
    let (train_x, train_y) = pick(&train);
    let (test_x, test_y) = pick(&test);
    let model = ridge_probe(&train_x, &train_y, k, lambda)?;

    let mut hits = vec![0usize; k];
    let mut totals = vec![0usize; k];
    for (f, &y) in test_x.iter().zip(&test_y) {
        totals[y] += 1;
        if model.predict(f) == y {
            hits[y] += 1;
        }
    }
    let per_position = hits
        .iter()
        .zip(&totals)
        .map(|(&h, &t)| if t == 0 { 0.0 } else { h as f64 / t as f64 })
        .collect();
    Ok(NeedleResult {
        accuracy: hits.iter().sum::<usize>() as f64 / test_y.len() as f64,
        per_position,
        train_size: train_y.len(),
        test_size: test_y.len(),
    })
}

/// One seeded trial: the dataset, the compressor's frozen parameters and the
/// split all derive from `seed`.
pub fn needle_trial(
    compressor: &Compressor,
    cfg: &NeedleConfig,
    seed: u64,
) -> Result<NeedleResult> {
    let mut rng = Rng::new(seed);
    let dataset = gen_needle_dataset(cfg, &mut rng)?;
    run_needle_eval(&compressor.reseeded(seed), &dataset, cfg.lambda, &mut rng)
}

//! Acceptance suite: every criterion runs at its stated tolerance and prints
//! one PASS/FAIL line. Criteria run sequentially inside a single test so the
//! timing measurements are not disturbed by concurrently running tests.

use std::io::Write;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use bimba_core::baselines::{perceiver_weights, pool_compress, AttentionParams};
use bimba_core::harness::{
    bench_scaling, grad_check, needle_trial, read_bench_csv, scan_oracle_check, BenchMethod,
    BenchOptions, Compressor, NeedleConfig, RecordStatus,
};
use bimba_core::selector::{
    build_layout, normalize, select_tokens, Direction, LayoutMode, SelectorConfig, SelectorParams,
};
use bimba_core::ssm::{scan_sequential, SsmInit, SsmParams};
use bimba_core::tensor_io::{decode_grid, encode_grid};
use bimba_core::{Grid, Rng, Seq, TokenGrid};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn within(limit: Duration, elapsed: Duration) -> (bool, String) {
    (
        elapsed <= limit,
        format!("{:.2}s of {}s", elapsed.as_secs_f64(), limit.as_secs()),
    )
}

fn shape_arithmetic() -> Outcome {
    let start = Instant::now();
    let cfg = SelectorConfig::default();
    let mut rng = Rng::new(1);
    let mut details = Vec::new();
    let mut pass = true;
    for (dims, expected) in [
        ([64, 40, 40, 8], [16, 20, 20, 8]),
        ([64, 24, 24, 8], [16, 12, 12, 8]),
    ] {
        let z: TokenGrid = Grid::random(dims, 1.0, &mut rng).unwrap();
        let params = SelectorParams::init(dims[3], &cfg);
        let q = select_tokens(&z, None, &cfg, &params).unwrap();
        pass &= q.dims() == expected;
        details.push(format!("{} -> {} tokens", z.tokens(), q.tokens()));
    }
    let (fast, t) = within(Duration::from_secs(1), start.elapsed());
    pass &= details[0] == "102400 -> 6400 tokens" && details[1] == "36864 -> 2304 tokens";
    outcome(pass && fast, format!("{}; {t}", details.join(", ")))
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let r = scan_oracle_check(20_240_601, 100).unwrap();
    let (fast, t) = within(Duration::from_secs(30), start.elapsed());
    outcome(
        r.max_error <= 1e-10 && r.instances == 100 && fast,
        format!(
            "{} comparisons, max relative deviation {:.3e}; {t}",
            r.comparisons, r.max_error
        ),
    )
}

fn gradient_correctness() -> Outcome {
    let start = Instant::now();
    let r = grad_check(7, 20, 1e-5, 8).unwrap();
    let (fast, t) = within(Duration::from_secs(60), start.elapsed());
    outcome(
        r.max_error <= 1e-5 && r.instances == 20 && fast,
        format!(
            "{} probes, max relative error {:.3e}; {t}",
            r.comparisons, r.max_error
        ),
    )
}

fn causality_and_reach() -> Outcome {
    let start = Instant::now();
    let mut rng = Rng::new(3);

    // Unidirectional scan: outputs before a perturbed position are bitwise unchanged.
    let mut causal = true;
    for _ in 0..10 {
        let (len, d) = (40, 4);
        let p = SsmParams::<f64>::init(d, 6, SsmInit::default(), &mut rng);
        let x = Seq::random(len, d, 1.0, &mut rng);
        let y = scan_sequential(&x, &p).unwrap();
        for j in 0..len {
            let mut xp = x.clone();
            xp.row_mut(j).iter_mut().for_each(|v| *v += 1.0);
            let yp = scan_sequential(&xp, &p).unwrap();
            causal &= y.data()[..j * d] == yp.data()[..j * d];
        }
    }

    // Bidirectional + interleaved: every query responds to every video token.
    let cfg = SelectorConfig {
        temporal_factor: 2,
        spatial_factor: 2,
        ..SelectorConfig::default()
    };
    let dims = [8, 4, 4, 4];
    let z: TokenGrid = Grid::random(dims, 1.0, &mut rng).unwrap();
    let params = SelectorParams::init(dims[3], &cfg);
    let base = select_tokens(&z, None, &cfg, &params).unwrap();
    let mut weakest = f64::INFINITY;
    for token in 0..z.tokens() {
        let mut data = z.data().to_vec();
        data[token * dims[3]] += 1.0;
        let zp = Grid::new(dims, data).unwrap();
        let out = select_tokens(&zp, None, &cfg, &params).unwrap();
        for (a, b) in base.data().chunks(dims[3]).zip(out.data().chunks(dims[3])) {
            let response = a
                .iter()
                .zip(b)
                .map(|(u, v)| (u - v).abs())
                .fold(0.0, f64::max);
            weakest = weakest.min(response);
        }
    }
    let (fast, t) = within(Duration::from_secs(30), start.elapsed());
    outcome(
        causal && weakest > 1e-9 && fast,
        format!("causal prefix exact: {causal}; weakest query response {weakest:.3e}; {t}"),
    )
}

fn ratio(records: &[bimba_core::harness::BenchmarkRecord], method: &str) -> Vec<f64> {
    let times: Vec<f64> = records
        .iter()
        .filter(|r| r.method == method)
        .map(|r| r.median_seconds.expect("timed"))
        .collect();
    times.windows(2).map(|w| w[1] / w[0]).collect()
}

fn cost_curves() -> Outcome {
    let start = Instant::now();
    let opts = BenchOptions::default();
    let linear = bench_scaling(
        &[BenchMethod::Selector, BenchMethod::Pooling],
        &[8192, 16384, 32768],
        &opts,
    )
    .unwrap();
    let quadratic = bench_scaling(&[BenchMethod::Attention], &[4096, 8192], &opts).unwrap();

    let sel = ratio(&linear, "selector");
    let pool = ratio(&linear, "pooling");
    let attn = ratio(&quadratic, "attention");
    let in_range = |v: &[f64], lo: f64, hi: f64| v.iter().all(|r| (lo..=hi).contains(r));
    let peak_exact = quadratic
        .iter()
        .all(|r| r.peak_bytes == (r.tokens * r.tokens * 8) as u64);

    let budget = 1u64 << 30;
    let capped = bench_scaling(
        &[BenchMethod::Attention],
        &[4096, 8192, 16384, 32768],
        &BenchOptions {
            runs: 1,
            warmup: 0,
            min_run_seconds: 0.0,
            budget: Some(budget),
            ..BenchOptions::default()
        },
    )
    .unwrap();
    let predicted = capped
        .iter()
        .find(|r| (r.tokens as u64).pow(2) * 8 > budget)
        .map(|r| r.tokens);
    let marked = capped
        .iter()
        .find(|r| r.status == RecordStatus::Capacity)
        .map(|r| r.tokens);
    let capacity_ok = predicted.is_some()
        && predicted == marked
        && capped.iter().all(|r| {
            (r.status == RecordStatus::Capacity) == ((r.tokens as u64).pow(2) * 8 > budget)
        });

    let (fast, t) = within(Duration::from_secs(300), start.elapsed());
    let pass = in_range(&sel, 1.7, 2.6) && in_range(&pool, 1.7, 2.6) && in_range(&attn, 3.2, 5.0);
    outcome(
        pass && peak_exact && capacity_ok && fast,
        format!(
            "selector ratios {sel:.2?}, pooling {pool:.2?}, attention {attn:.2?}; attention peak = L'^2*8: {peak_exact}; \
             capacity first at L'={marked:?} (predicted {predicted:?}); {t}"
        ),
    )
}

fn needle_retention() -> Outcome {
    let start = Instant::now();
    let cfg = NeedleConfig::default();
    let selector = |layout, direction| {
        Compressor::Selector(SelectorConfig {
            layout,
            direction,
            ..SelectorConfig::default()
        })
    };
    let pooling = Compressor::Pooling {
        temporal_factor: 4,
        spatial_factor: 2,
    };
    let inter_bi = selector(LayoutMode::Interleaved, Direction::Bidirectional);
    let append_uni = selector(LayoutMode::AppendEnd, Direction::Unidirectional);

    let seeds = 0..5u64;
    let summarise = |c: &Compressor| {
        let k = cfg.positions.len();
        let mut per_position = vec![0.0; k];
        let mut mean = 0.0;
        for seed in seeds.clone() {
            let r = needle_trial(c, &cfg, seed).unwrap();
            mean += r.accuracy / 5.0;
            per_position
                .iter_mut()
                .zip(&r.per_position)
                .for_each(|(a, b)| *a += b / 5.0);
        }
        let spread = per_position.iter().cloned().fold(f64::MIN, f64::max)
            - per_position.iter().cloned().fold(f64::MAX, f64::min);
        (mean, spread)
    };
    let (pool_acc, _) = summarise(&pooling);
    let (bi_acc, bi_spread) = summarise(&inter_bi);
    let (_, uni_spread) = summarise(&append_uni);
    let a = bi_acc >= pool_acc;
    let b = uni_spread > bi_spread;
    let (fast, t) = within(Duration::from_secs(300), start.elapsed());
    outcome(
        a && b && fast,
        format!(
            "(a) interleave+bi {bi_acc:.4} vs pooling {pool_acc:.4}: {}; \
             (b) spread append+uni {uni_spread:.4} vs interleave+bi {bi_spread:.4}: {}; chance {:.4}; {t}",
            if a { "ok" } else { "not met" },
            if b { "ok" } else { "not met" },
            1.0 / cfg.positions.len() as f64
        ),
    )
}

fn structural_invariants() -> Outcome {
    let start = Instant::now();
    let mut rng = Rng::new(9);

    // Residual identity: a silenced scan leaves exactly the pooled queries.
    let cfg = SelectorConfig::default();
    let z: TokenGrid = Grid::random([16, 8, 8, 6], 1.0, &mut rng).unwrap();
    let params = SelectorParams::init(6, &cfg).silenced();
    let q = select_tokens(&z, None, &cfg, &params).unwrap();
    let pooled = pool_compress(&z, 4, 4, 4).unwrap();
    let residual = q
        .data()
        .iter()
        .zip(pooled.data())
        .all(|(a, b)| a.to_bits() == b.to_bits());

    // Interleave gap uniformity for every (L, N) with N ≤ L ≤ 1000.
    let mut gaps_ok = true;
    for l in 1..=1000 {
        for n in 1..=l {
            let gaps = build_layout(l, n, LayoutMode::Interleaved, 0)
                .unwrap()
                .video_gaps();
            let (lo, hi) = gaps
                .iter()
                .fold((usize::MAX, 0), |(lo, hi), &g| (lo.min(g), hi.max(g)));
            gaps_ok &= gaps.len() == n && hi - lo <= 1 && gaps.iter().sum::<usize>() == l;
        }
    }

    // Pre-affine layer-norm moments (exact normalisation, no variance floor).
    let s = Seq::random(500, 16, 3.0, &mut rng);
    let (mut worst_mean, mut worst_var) = (0.0f64, 0.0f64);
    for row in normalize(&s, 0.0).rows() {
        let mean = row.iter().sum::<f64>() / 16.0;
        let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 16.0;
        worst_mean = worst_mean.max(mean.abs());
        worst_var = worst_var.max((var - 1.0).abs());
    }
    let ln_ok = worst_mean <= 1e-12 && worst_var <= 1e-9;

    // Perceiver attention rows sum to one.
    let zp: TokenGrid = Grid::random([8, 6, 6, 8], 2.0, &mut rng).unwrap();
    let p = AttentionParams::init(8, 12, 4);
    let w = perceiver_weights(&zp, &p).unwrap();
    let worst_row = w
        .chunks(zp.tokens())
        .map(|row| (row.iter().sum::<f64>() - 1.0).abs())
        .fold(0.0, f64::max);

    // Tensor file round trip.
    let g: TokenGrid = Grid::random([5, 4, 3, 7], 10.0, &mut rng).unwrap();
    let back: TokenGrid = decode_grid(&encode_grid(&g)).unwrap();
    let io_ok = back.dims() == g.dims()
        && back
            .data()
            .iter()
            .zip(g.data())
            .all(|(a, b)| a.to_bits() == b.to_bits());

    let (fast, t) = within(Duration::from_secs(60), start.elapsed());
    outcome(
        residual && gaps_ok && ln_ok && worst_row <= 1e-12 && io_ok && fast,
        format!(
            "residual bitwise {residual}; gaps {gaps_ok}; LN mean {worst_mean:.1e} var {worst_var:.1e}; \
             perceiver rows {worst_row:.1e}; tensor round trip {io_ok}; {t}"
        ),
    )
}

fn bimba(args: &[&str]) -> (i32, Vec<u8>) {
    let out = Command::new(env!("CARGO_BIN_EXE_bimba-under-test"))
        .args(args)
        .output()
        .expect("binary runs");
    (out.status.code().unwrap_or(-1), out.stdout)
}

fn read(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap_or_default()
}

/// Bench CSV without the timing column, which is the only non-deterministic field.
fn bench_data(path: &Path) -> Vec<(String, usize, u64, RecordStatus)> {
    read_bench_csv(read(path).as_slice())
        .unwrap()
        .into_iter()
        .map(|r| (r.method, r.tokens, r.peak_bytes, r.status))
        .collect()
}

/// Runs every subcommand twice with identical arguments and output paths and
/// compares standard output plus every written file byte for byte. The bench
/// CSV is compared without its timing column.
fn cli_determinism() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let path = |name: &str| dir.path().join(name).to_str().unwrap().to_string();
    let grid = path("grid.bmbt");
    let cmds: Vec<(Vec<String>, Option<String>)> = vec![
        (
            args(&["scan-check", "--seed", "7", "--csv", &path("scan.csv")]),
            Some(path("scan.csv")),
        ),
        (
            args(&["grad-check", "--seed", "7", "--csv", &path("grad.csv")]),
            Some(path("grad.csv")),
        ),
        (
            args(&[
                "bench",
                "--seed",
                "7",
                "--methods",
                "selector,pooling,attention,perceiver,vanilla",
                "--tokens",
                "256,512",
                "--runs",
                "1",
                "--min-run-seconds",
                "0",
                "--csv",
                &path("bench.csv"),
            ]),
            Some(path("bench.csv")),
        ),
        (
            args(&[
                "needle",
                "--seed",
                "7",
                "--seeds",
                "1",
                "--samples",
                "40",
                "--methods",
                "selector,pooling",
                "--csv",
                &path("needle.csv"),
            ]),
            Some(path("needle.csv")),
        ),
        (
            args(&[
                "gen-grid", "--seed", "7", "--dims", "8,8,8,4", "--out", &grid,
            ]),
            Some(grid.clone()),
        ),
        (
            args(&[
                "compress",
                "--seed",
                "7",
                "--question",
                "--in",
                &grid,
                "--out",
                &path("q.bmbt"),
            ]),
            Some(path("q.bmbt")),
        ),
        (args(&["info", "--frames", "64"]), None),
    ];

    let mut failures = Vec::new();
    let mut outputs: Vec<Vec<(Vec<u8>, Vec<u8>)>> = vec![Vec::new(), Vec::new()];
    for round in &mut outputs {
        for (cmd, file) in &cmds {
            let argv: Vec<&str> = cmd.iter().map(String::as_str).collect();
            let (code, stdout) = bimba(&argv);
            if code != 0 {
                failures.push(format!("{} exited {code}", cmd[0]));
            }
            let data = match file {
                Some(f) if cmd[0] == "bench" => {
                    format!("{:?}", bench_data(Path::new(f))).into_bytes()
                }
                Some(f) => read(Path::new(f)),
                None => Vec::new(),
            };
            if file.is_some() && data.is_empty() {
                failures.push(format!("{} wrote no data", cmd[0]));
            }
            // Bench stdout is a timing table; its data lives in the CSV.
            round.push((
                if cmd[0] == "bench" {
                    Vec::new()
                } else {
                    stdout
                },
                data,
            ));
        }
    }
    for ((cmd, _), (a, b)) in cmds.iter().zip(outputs[0].iter().zip(&outputs[1])) {
        if a != b {
            failures.push(format!("{} output differs", cmd[0]));
        }
    }
    let (fast, t) = within(Duration::from_secs(120), start.elapsed());
    let detail = if failures.is_empty() {
        format!(
            "{} subcommands byte-identical across two runs; {t}",
            cmds.len()
        )
    } else {
        format!("{}; {t}", failures.join(", "))
    };
    outcome(failures.is_empty() && fast, detail)
}

fn args(a: &[&str]) -> Vec<String> {
    a.iter().map(|s| s.to_string()).collect()
}

#[test]
fn acceptance_criteria() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("1 shape arithmetic", shape_arithmetic),
        ("2 scan oracle equivalence", oracle_equivalence),
        ("3 gradient correctness", gradient_correctness),
        ("4 causality and reach", causality_and_reach),
        ("5 cost curves", cost_curves),
        ("6 needle retention", needle_retention),
        ("7 structural invariants", structural_invariants),
        ("8 cli determinism", cli_determinism),
    ];
    let mut failed = Vec::new();
    for (name, check) in criteria {
        let o = check();
        // Written to the raw stderr handle so the line shows even when the
        // test harness captures output of a passing test.
        let _ = writeln!(
            std::io::stderr(),
            "[{}] criterion {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        if !o.pass {
            failed.push(name);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}

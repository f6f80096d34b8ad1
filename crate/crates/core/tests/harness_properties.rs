use bimba_core::harness::{
    gen_needle_dataset, needle_trial, read_bench_csv, read_needle_csv, run_needle_eval,
    write_bench_csv, write_needle_csv, BenchmarkRecord, Compressor, NeedleConfig, NeedleRow,
    RecordStatus,
};
use bimba_core::Rng;
use proptest::prelude::*;

fn record() -> impl Strategy<Value = BenchmarkRecord> {
    (
        "[a-z][a-z-]{0,11}",
        1usize..1 << 20,
        proptest::option::of(1e-9f64..1e3),
        1u64..u64::MAX / 2,
        any::<bool>(),
    )
        .prop_map(|(method, tokens, secs, peak_bytes, ok)| BenchmarkRecord {
            method,
            tokens,
            median_seconds: if ok { secs.or(Some(1.0)) } else { None },
            peak_bytes,
            status: if ok {
                RecordStatus::Ok
            } else {
                RecordStatus::Capacity
            },
            accuracy: None,
        })
}

proptest! {
    #[test]
    fn bench_csv_reconstructs_records(records in proptest::collection::vec(record(), 0..20)) {
        let mut buf = Vec::new();
        write_bench_csv(&records, &mut buf).unwrap();
        prop_assert_eq!(read_bench_csv(buf.as_slice()).unwrap(), records);
    }

    #[test]
    fn needle_csv_reconstructs_rows(k in 1usize..6, rows in proptest::collection::vec(
        ("[a-z-]{1,12}", any::<u64>(), 0.0f64..=1.0, proptest::collection::vec(0.0f64..=1.0, 6)), 1..8)) {
        let rows: Vec<NeedleRow> = rows
            .into_iter()
            .map(|(method, seed, accuracy, mut pp)| {
                pp.truncate(k);
                NeedleRow { method, seed, accuracy, per_position: pp }
            })
            .collect();
        let mut buf = Vec::new();
        write_needle_csv(&rows, &mut buf).unwrap();
        prop_assert_eq!(read_needle_csv(buf.as_slice()).unwrap(), rows);
    }
}

fn small() -> NeedleConfig {
    NeedleConfig {
        frames: 8,
        height: 4,
        width: 4,
        channels: 4,
        samples: 60,
        positions: vec![0, 2, 4, 6],
        site: (2, 2),
        amplitude: 6.0,
        noise: 0.25,
        ..NeedleConfig::default()
    }
}

#[test]
fn per_position_accuracies_are_probabilities() {
    let cfg = small();
    for c in [
        Compressor::Pooling {
            temporal_factor: 2,
            spatial_factor: 2,
        },
        Compressor::Selector(Default::default()),
        Compressor::Perceiver {
            latents: 8,
            seed: 0,
        },
        Compressor::Attention {
            temporal_factor: 2,
            spatial_factor: 2,
            seed: 0,
        },
        Compressor::Vanilla,
    ] {
        let c = match c {
            Compressor::Selector(s) => Compressor::Selector(bimba_core::selector::SelectorConfig {
                temporal_factor: 2,
                ..s
            }),
            other => other,
        };
        let r = needle_trial(&c, &cfg, 3).unwrap();
        assert_eq!(r.per_position.len(), cfg.positions.len(), "{}", c.name());
        assert!(r.per_position.iter().all(|p| (0.0..=1.0).contains(p)));
        assert!((0.0..=1.0).contains(&r.accuracy));
        assert_eq!(r.train_size + r.test_size, cfg.samples);
    }
}

#[test]
fn strong_needle_is_found_without_compression() {
    // Full resolution, strong signal: the probe should be far above chance.
    let r = needle_trial(&Compressor::Vanilla, &small(), 1).unwrap();
    assert!(r.accuracy > 0.9, "accuracy {}", r.accuracy);
}

#[test]
fn trials_are_seed_deterministic() {
    let c = Compressor::Selector(bimba_core::selector::SelectorConfig {
        temporal_factor: 2,
        ..Default::default()
    });
    assert_eq!(
        needle_trial(&c, &small(), 9).unwrap(),
        needle_trial(&c, &small(), 9).unwrap()
    );
    let ds = gen_needle_dataset(&small(), &mut Rng::new(9)).unwrap();
    let a = run_needle_eval(&c, &ds, 1e-3, &mut Rng::new(1)).unwrap();
    let b = run_needle_eval(&c, &ds, 1e-3, &mut Rng::new(1)).unwrap();
    assert_eq!(a, b);
}

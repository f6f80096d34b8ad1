//! Desk-scale experiments: needle retention with a ridge probe, scaling
//! benchmarks with buffer accounting, and finite-difference gradient checks.

mod bench;
mod checks;
mod fdcheck;
mod needle;
mod records;
mod ridge;

pub use bench::{bench_scaling, layout_name, BenchMethod, BenchOptions, Precision, BENCH_SIDE};
pub use checks::{grad_check, normwise_deviation, scan_oracle_check, CheckReport};
pub use fdcheck::{fd_check, FdTarget, ScanInstance};
pub use needle::{
    gen_needle_dataset, needle_trial, run_needle_eval, synthetic_question, Compressor,
    NeedleConfig, NeedleDataset, NeedleResult, NeedleSample, NeedleSpec, Prepared, QUESTION_TOKENS,
};
pub use records::{
    read_bench_csv, read_needle_csv, sort_records, write_bench_csv, write_needle_csv,
    BenchmarkRecord, NeedleRow, RecordStatus,
};
pub use ridge::{ridge_probe, RidgeModel};

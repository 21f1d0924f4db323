//! Synthetic datasets and the benchmark harness.

mod generators;
mod local;
mod remote;

pub use generators::{
    blocks_anchor_id, blocks_property, gen_baseline, gen_blocks, gen_incremental,
    incremental_properties, Dataset, DatasetSpec,
};
pub use local::{run_local_bench, run_local_bench_on_definitions, BenchError, BenchReport};
pub use remote::{run_remote_bench, AmountTiming, RemoteBenchReport, RemoteMode};

/// Mean and population standard deviation.
pub(crate) fn mean_and_stdev(samples: impl Iterator<Item = f64>) -> (f64, f64) {
    let values: Vec<f64> = samples.collect();
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let variance = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, variance.sqrt())
}

//! Local benchmarks: consistency checking and whole-interpretation timing.

use std::sync::Arc;
use std::time::Instant;

use serde::Serialize;

use super::generators::DatasetSpec;
use super::mean_and_stdev;
use super::remote::RemoteBenchReport;
use crate::engine::{self, BuildError, EngineError};
use crate::model::{EmptyKb, PrototypeDefinition, PrototypeId};

/// Benchmark failure: the dataset refused to build or to resolve.
#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error(transparent)]
    Build(#[from] BuildError),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// Machine-readable benchmark outcome.
#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct BenchReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spec: Option<DatasetSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub prototype_count: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub consistency_millis: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fixpoint_millis: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_props_per_fixpoint: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stdev_props_per_fixpoint: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub remote: Option<RemoteBenchReport>,
}

/// Generates the dataset, then times the consistency check and the
/// computation of the whole interpretation (one warm-up run first, with a
/// monotonic clock; generation and reporting are excluded from timings).
///
/// Property statistics cover the family's member prototypes; auxiliary
/// scaffolding such as the blocks anchor is excluded, which is what makes
/// the blocks mean exactly `(B+1)/2`.
pub fn run_local_bench(spec: DatasetSpec, seed: u64) -> Result<BenchReport, BenchError> {
    let dataset = spec.generate(seed);
    let member_ids: Vec<_> = dataset.member_ids().cloned().collect();
    // Warm-up: page cache, allocator and branch predictors settle.
    measure(spec.generate(seed).definitions, &member_ids)?;
    let mut report = measure(dataset.definitions, &member_ids)?;
    report.spec = Some(spec);
    report.seed = Some(seed);
    Ok(report)
}

/// Benchmarks an already-loaded definition set (e.g. a dataset file).
/// Statistics cover every fixpoint in the interpretation, since no family
/// metadata is available to single out auxiliary prototypes.
pub fn run_local_bench_on_definitions(
    definitions: Vec<PrototypeDefinition>,
) -> Result<BenchReport, BenchError> {
    let all_ids: Vec<_> = definitions.iter().map(|d| d.id.clone()).collect();
    measure(definitions.clone(), &all_ids)?;
    measure(definitions, &all_ids)
}

fn measure(
    definitions: Vec<PrototypeDefinition>,
    stat_ids: &[PrototypeId],
) -> Result<BenchReport, BenchError> {
    let prototype_count = definitions.len() as u64;

    let started = Instant::now();
    let kb = engine::build_layered_kb(definitions, Arc::new(EmptyKb))?;
    let consistency_millis = started.elapsed().as_millis() as u64;

    let started = Instant::now();
    let interpretation = engine::compute_interpretation(&kb)?;
    let fixpoint_millis = started.elapsed().as_millis() as u64;

    let (mean, stdev) = mean_and_stdev(
        stat_ids
            .iter()
            .map(|id| interpretation[id].properties.value_pair_count() as f64),
    );

    Ok(BenchReport {
        spec: None,
        seed: None,
        prototype_count,
        consistency_millis: Some(consistency_millis),
        fixpoint_millis: Some(fixpoint_millis),
        mean_props_per_fixpoint: Some(mean),
        stdev_props_per_fixpoint: Some(stdev),
        remote: None,
    })
}

//! Remote benchmark: fetch random fixpoints from a running server and time
//! each batch size.

use std::time::Instant;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::client::{ClientConfig, ClientError, RemoteClient};
use crate::model::PrototypeId;

/// Whether requests were issued one at a time or concurrently.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum RemoteMode {
    Single,
    Multi,
}

/// Wall-clock duration for fetching `amount` fixpoints.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct AmountTiming {
    pub amount: usize,
    pub millis: u64,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct RemoteBenchReport {
    pub mode: RemoteMode,
    pub concurrency: usize,
    pub amounts: Vec<AmountTiming>,
}

/// For each amount, fetches that many uniformly random fixpoints (IDs
/// drawn from `universe` with replacement, ChaCha8-seeded) at the given
/// concurrency, recording wall-clock milliseconds. Caching is disabled so
/// every request hits the network; any transport or protocol error aborts
/// the run.
pub async fn run_remote_bench(
    server_url: &str,
    universe: &[PrototypeId],
    amounts: &[usize],
    concurrency: usize,
    seed: u64,
) -> Result<RemoteBenchReport, ClientError> {
    assert!(!universe.is_empty(), "need at least one prototype ID");
    let client = RemoteClient::with_config(
        server_url,
        ClientConfig {
            cache_capacity: 0,
            max_concurrency: concurrency.max(1),
            ..ClientConfig::default()
        },
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut timings = Vec::with_capacity(amounts.len());
    for &amount in amounts {
        let ids: Vec<PrototypeId> = (0..amount)
            .map(|_| universe[(rng.next_u64() % universe.len() as u64) as usize].clone())
            .collect();
        let started = Instant::now();
        if !ids.is_empty() {
            client.fetch_fixpoints_concurrent(&ids, concurrency).await?;
        }
        timings.push(AmountTiming {
            amount,
            millis: started.elapsed().as_millis() as u64,
        });
    }

    Ok(RemoteBenchReport {
        mode: if concurrency <= 1 {
            RemoteMode::Single
        } else {
            RemoteMode::Multi
        },
        concurrency: concurrency.max(1),
        amounts: timings,
    })
}

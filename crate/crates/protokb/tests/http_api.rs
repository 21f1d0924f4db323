//! Server conformance: bodies, validators, compression, batches, links.

mod common;

use std::collections::HashMap;
use std::io::Read;
use std::sync::Arc;
use std::time::Duration;

use common::{pid, random_consistent_defs};
use protokb::bench::{blocks_property, gen_blocks};
use protokb::engine::{build_layered_kb, compute_fixpoint, FixpointCache};
use protokb::model::{EmptyKb, LayeredKb, PrototypeId};
use protokb::server::{serve, ServerConfig, ServerHandle};
use protokb::wire;

async fn start(kb: LayeredKb, config: ServerConfig) -> ServerHandle {
    serve(Arc::new(kb), config).await.expect("server starts")
}

async fn start_random(seed: u64, n: usize) -> (Vec<protokb::model::PrototypeDefinition>, ServerHandle) {
    let defs = random_consistent_defs(seed, n);
    let kb = build_layered_kb(defs.clone(), Arc::new(EmptyKb)).unwrap();
    let handle = start(kb, ServerConfig::default()).await;
    (defs, handle)
}

fn http() -> reqwest::Client {
    reqwest::Client::new()
}

fn gunzip(bytes: &[u8]) -> Vec<u8> {
    let mut decoder = flate2::read::GzDecoder::new(bytes);
    let mut out = Vec::new();
    decoder.read_to_end(&mut out).unwrap();
    out
}

#[tokio::test]
async fn single_get_bodies_decode_to_the_stored_definitions() {
    let (defs, server) = start_random(1, 200).await;
    let client = http();
    for (i, def) in defs.iter().enumerate() {
        let mut request = client
            .get(format!("{}/", server.url()))
            .query(&[("p", def.id.as_str())]);
        let gzip = i % 2 == 1;
        if gzip {
            request = request.header("accept-encoding", "gzip");
        }
        let response = request.send().await.unwrap();
        assert_eq!(response.status(), 200);
        assert_eq!(
            response.headers().get("content-type").unwrap(),
            "application/json"
        );
        let encoding = response
            .headers()
            .get("content-encoding")
            .map(|v| v.to_str().unwrap().to_owned());
        let raw = response.bytes().await.unwrap();
        let body = if gzip {
            assert_eq!(encoding.as_deref(), Some("gzip"));
            gunzip(&raw)
        } else {
            assert_eq!(encoding, None);
            raw.to_vec()
        };
        assert_eq!(&wire::decode_definition(&body).unwrap(), def);
    }
    server.shutdown().await;
}

#[tokio::test]
async fn isbn_style_query_parameter_is_percent_decoded() {
    let isbn = pid("isbn:123-4-56-789012-3");
    let kb = build_layered_kb(
        vec![protokb::model::PrototypeDefinition::bare(
            isbn.clone(),
            PrototypeId::empty(),
        )],
        Arc::new(EmptyKb),
    )
    .unwrap();
    let server = start(kb, ServerConfig::default()).await;

    let response = http()
        .get(format!("{}/?p=isbn%3A123-4-56-789012-3", server.url()))
        .send()
        .await
        .unwrap();
    assert_eq!(response.status(), 200);
    let def = wire::decode_definition(&response.bytes().await.unwrap()).unwrap();
    assert_eq!(def.id, isbn);
    server.shutdown().await;
}

#[tokio::test]
async fn missing_or_invalid_p_is_a_400_and_undefined_a_404() {
    let (_, server) = start_random(2, 10).await;
    let client = http();

    let response = client.get(format!("{}/", server.url())).send().await.unwrap();
    assert_eq!(response.status(), 400);

    let response = client
        .get(format!("{}/", server.url()))
        .query(&[("p", "no-scheme-here")])
        .send()
        .await
        .unwrap();
    assert_eq!(response.status(), 400);

    let response = client
        .get(format!("{}/", server.url()))
        .query(&[("p", "t:undefined")])
        .send()
        .await
        .unwrap();
    assert_eq!(response.status(), 404);
    // Negative results advertise a cache lifetime too.
    assert!(response.headers().get("cache-control").is_some());

    server.shutdown().await;
}

#[tokio::test]
async fn if_none_match_round_trip_yields_304_with_no_body() {
    let (defs, server) = start_random(3, 20).await;
    let client = http();
    let url = format!("{}/", server.url());
    let id = defs[7].id.as_str();

    let first = client.get(&url).query(&[("p", id)]).send().await.unwrap();
    assert_eq!(first.status(), 200);
    let etag = first.headers().get("etag").unwrap().to_str().unwrap().to_owned();
    assert!(etag.starts_with('"') && etag.ends_with('"'));
    let cache_control = first
        .headers()
        .get("cache-control")
        .unwrap()
        .to_str()
        .unwrap()
        .to_owned();
    assert!(cache_control.contains("max-age="));

    let second = client
        .get(&url)
        .query(&[("p", id)])
        .header("if-none-match", &etag)
        .send()
        .await
        .unwrap();
    assert_eq!(second.status(), 304);
    assert_eq!(second.headers().get("etag").unwrap().to_str().unwrap(), etag);
    assert!(second.bytes().await.unwrap().is_empty());

    // A different tag still gets the full entity.
    let third = client
        .get(&url)
        .query(&[("p", id)])
        .header("if-none-match", "\"somethingelse\"")
        .send()
        .await
        .unwrap();
    assert_eq!(third.status(), 200);
    assert_eq!(
        third.headers().get("etag").unwrap().to_str().unwrap(),
        etag,
        "validator is deterministic"
    );

    server.shutdown().await;
}

#[tokio::test]
async fn fixpoints_are_served_and_match_the_local_engine() {
    let data = gen_blocks(5, 20, 123);
    let kb = build_layered_kb(data.definitions.clone(), Arc::new(EmptyKb)).unwrap();
    let cache = FixpointCache::new();
    let top_block_id = pid("bench:blocks/5/3");
    let local = compute_fixpoint(&kb, &top_block_id, &cache).unwrap();

    let server = start(
        build_layered_kb(data.definitions, Arc::new(EmptyKb)).unwrap(),
        ServerConfig::default(),
    )
    .await;
    let client = http();

    // The empty prototype's fixpoint is empty.
    let response = client
        .get(format!("{}/fixpoint", server.url()))
        .query(&[("p", "PROTO:P_0")])
        .send()
        .await
        .unwrap();
    assert_eq!(response.status(), 200);
    assert_eq!(
        response.bytes().await.unwrap().as_ref(),
        br#"{"id":"PROTO:P_0","base":"PROTO:P_0","add":{},"rem":{},"remAll":[]}"#
    );

    // A top-block prototype accumulates one value per block.
    let response = client
        .get(format!("{}/fixpoint", server.url()))
        .query(&[("p", top_block_id.as_str())])
        .send()
        .await
        .unwrap();
    let body = response.bytes().await.unwrap();
    let served = wire::decode_definition(&body).unwrap();
    assert_eq!(served.base, PrototypeId::empty());
    assert_eq!(served.add.get(&blocks_property()).unwrap().len(), 5);
    assert_eq!(body.as_ref(), wire::encode_fixpoint(&local.id, &local.properties));

    server.shutdown().await;
}

#[tokio::test]
async fn batch_equals_elementwise_single_gets_byte_for_byte() {
    let (defs, server) = start_random(4, 150).await;
    let client = http();
    let ids: Vec<PrototypeId> = defs.iter().take(100).map(|d| d.id.clone()).collect();

    let mut singles = Vec::new();
    for id in &ids {
        let body = client
            .get(format!("{}/", server.url()))
            .query(&[("p", id.as_str())])
            .send()
            .await
            .unwrap()
            .bytes()
            .await
            .unwrap();
        singles.push(body.to_vec());
    }

    let batch_body = client
        .post(format!("{}/batch", server.url()))
        .header("content-type", "application/json")
        .body(wire::encode_id_list(&ids))
        .send()
        .await
        .unwrap()
        .bytes()
        .await
        .unwrap();

    let mut expected = Vec::new();
    expected.push(b'[');
    for (i, single) in singles.iter().enumerate() {
        if i > 0 {
            expected.push(b',');
        }
        expected.extend_from_slice(single);
    }
    expected.push(b']');
    assert_eq!(batch_body.as_ref(), expected.as_slice());

    server.shutdown().await;
}

#[tokio::test]
async fn batch_with_any_undefined_id_fails_whole() {
    let (defs, server) = start_random(5, 30).await;
    let client = http();

    let ids = [defs[0].id.clone(), pid("t:absolutelyMissing")];
    let response = client
        .post(format!("{}/batch", server.url()))
        .body(wire::encode_id_list(&ids))
        .send()
        .await
        .unwrap();
    assert_eq!(response.status(), 404);
    let body: serde_json::Value =
        serde_json::from_slice(&response.bytes().await.unwrap()).unwrap();
    assert_eq!(body["missing"], serde_json::json!(["t:absolutelyMissing"]));

    // Empty batch is fine.
    let response = client
        .post(format!("{}/batch", server.url()))
        .body(wire::encode_id_list(&[]))
        .send()
        .await
        .unwrap();
    assert_eq!(response.status(), 200);
    assert_eq!(response.bytes().await.unwrap().as_ref(), b"[]");

    // Malformed batch payloads are 400s.
    let response = client
        .post(format!("{}/batch", server.url()))
        .body("{\"not\":\"an array\"}")
        .send()
        .await
        .unwrap();
    assert_eq!(response.status(), 400);

    server.shutdown().await;
}

#[tokio::test]
async fn fixpoint_batch_matches_single_fixpoints() {
    let (defs, server) = start_random(6, 40).await;
    let client = http();
    let ids: Vec<PrototypeId> = defs.iter().take(10).map(|d| d.id.clone()).collect();

    let mut singles = Vec::new();
    for id in &ids {
        let body = client
            .get(format!("{}/fixpoint", server.url()))
            .query(&[("p", id.as_str())])
            .send()
            .await
            .unwrap()
            .bytes()
            .await
            .unwrap();
        singles.push(body.to_vec());
    }

    let batch = client
        .post(format!("{}/fixpoint/batch", server.url()))
        .body(wire::encode_id_list(&ids))
        .send()
        .await
        .unwrap();
    assert_eq!(batch.status(), 200);
    let decoded = wire::decode_batch(&batch.bytes().await.unwrap()).unwrap();
    for (single, from_batch) in singles.iter().zip(&decoded) {
        assert_eq!(&wire::decode_definition(single).unwrap(), from_batch);
    }

    server.shutdown().await;
}

#[tokio::test]
async fn gzip_bodies_decompress_to_the_identity_body() {
    let (defs, server) = start_random(7, 25).await;
    let client = http();
    let url = format!("{}/", server.url());
    let id = defs[3].id.as_str();

    let identity = client
        .get(&url)
        .query(&[("p", id)])
        .send()
        .await
        .unwrap()
        .bytes()
        .await
        .unwrap();
    let compressed_response = client
        .get(&url)
        .query(&[("p", id)])
        .header("accept-encoding", "gzip")
        .send()
        .await
        .unwrap();
    assert_eq!(
        compressed_response.headers().get("content-encoding").unwrap(),
        "gzip"
    );
    let compressed = compressed_response.bytes().await.unwrap();
    assert_eq!(gunzip(&compressed), identity.to_vec());

    // Both variants carry the same validator (tag covers the entity, not
    // its transfer encoding).
    server.shutdown().await;
}

#[tokio::test]
async fn alternate_links_are_advertised_per_prototype() {
    let defs = random_consistent_defs(8, 10);
    let with_alternates = defs[2].id.clone();
    let kb = build_layered_kb(defs, Arc::new(EmptyKb)).unwrap();
    let config = ServerConfig {
        alternates: HashMap::from([(
            with_alternates.clone(),
            vec![
                "http://b.example/kb".to_owned(),
                "http://c.example/kb".to_owned(),
            ],
        )]),
        ..ServerConfig::default()
    };
    let server = start(kb, config).await;
    let client = http();

    let response = client
        .get(format!("{}/", server.url()))
        .query(&[("p", with_alternates.as_str())])
        .send()
        .await
        .unwrap();
    let links: Vec<String> = response
        .headers()
        .get_all("link")
        .iter()
        .map(|v| v.to_str().unwrap().to_owned())
        .collect();
    assert_eq!(
        links,
        vec![
            "<http://b.example/kb>; rel=\"alternate\"",
            "<http://c.example/kb>; rel=\"alternate\"",
        ]
    );

    // Batch mode carries neither validators nor alternates.
    let batch = client
        .post(format!("{}/batch", server.url()))
        .body(wire::encode_id_list(&[with_alternates]))
        .send()
        .await
        .unwrap();
    assert!(batch.headers().get("link").is_none());
    assert!(batch.headers().get("etag").is_none());

    server.shutdown().await;
}

#[tokio::test]
async fn concurrent_clients_observe_serial_results() {
    let (defs, server) = start_random(9, 60).await;
    let url = server.url();

    let mut tasks = Vec::new();
    for worker in 0..8u64 {
        let url = url.clone();
        let defs = defs.clone();
        tasks.push(tokio::spawn(async move {
            let client = http();
            for round in 0..5 {
                let def = &defs[((worker * 13 + round * 7) as usize) % defs.len()];
                let body = client
                    .get(format!("{url}/"))
                    .query(&[("p", def.id.as_str())])
                    .send()
                    .await
                    .unwrap()
                    .bytes()
                    .await
                    .unwrap();
                assert_eq!(&wire::decode_definition(&body).unwrap(), def);
            }
        }));
    }
    for task in tasks {
        task.await.unwrap();
    }
    server.shutdown().await;
}

#[tokio::test]
async fn handler_delay_is_applied() {
    let kb = build_layered_kb(random_consistent_defs(10, 5), Arc::new(EmptyKb)).unwrap();
    let server = start(
        kb,
        ServerConfig {
            handler_delay: Duration::from_millis(30),
            ..ServerConfig::default()
        },
    )
    .await;
    let started = std::time::Instant::now();
    http()
        .get(format!("{}/", server.url()))
        .query(&[("p", "t:p0")])
        .send()
        .await
        .unwrap();
    assert!(started.elapsed() >= Duration::from_millis(30));
    server.shutdown().await;
}

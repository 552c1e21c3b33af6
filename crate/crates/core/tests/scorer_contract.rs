//! Both perplexity scorers honour the same contract: one score per sentence,
//! in input order, with `perplexity == exp(-mean(token_logprobs))`.
//!
//! The remote scorer is exercised against a local HTTP stub that serves the
//! built-in n-gram model, so the two must agree.

mod common;

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;

use serde_json::{json, Value};

use asrdata::corpus::{tokenize, Corpus};
use asrdata::http::HttpConfig;
use asrdata::lm::{perplexity_from_logprobs, LmError, NGramLm, PerplexityScorer, RemoteScorer, RemoteScorerConfig};
use asrdata::textmetrics::{mean_perplexity, sentence_perplexities, MetricError};

use common::rules;

#[derive(Clone, Copy)]
enum Behaviour {
    Serve,
    DropOne,
    Fail,
}

fn read_request(stream: &mut TcpStream) -> Option<Value> {
    let mut reader = BufReader::new(stream.try_clone().ok()?);
    let mut len = 0usize;
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line).ok()? == 0 {
            return None;
        }
        let line = line.trim_end();
        if line.is_empty() {
            break;
        }
        if let Some((k, v)) = line.split_once(':') {
            if k.eq_ignore_ascii_case("content-length") {
                len = v.trim().parse().ok()?;
            }
        }
    }
    let mut body = vec![0; len];
    reader.read_exact(&mut body).ok()?;
    serde_json::from_slice(&body).ok()
}

fn respond(stream: &mut TcpStream, status: &str, body: &str) {
    let _ = write!(
        stream,
        "HTTP/1.1 {status}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    );
}

/// Serves `{"sentences": [..]}` requests from `lm`. Returns the endpoint and
/// a counter of requests seen.
fn stub(lm: NGramLm, behaviour: Behaviour) -> (String, Arc<AtomicUsize>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let hits = Arc::new(AtomicUsize::new(0));
    let seen = hits.clone();
    thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { continue };
            let Some(req) = read_request(&mut stream) else { continue };
            seen.fetch_add(1, Ordering::SeqCst);
            let sentences: Vec<String> = req["sentences"]
                .as_array()
                .map(|a| a.iter().filter_map(|v| v.as_str().map(str::to_owned)).collect())
                .unwrap_or_default();
            let mut scores: Vec<Value> = sentences
                .iter()
                .map(|s| {
                    let lps = lm.token_logprobs(&tokenize(s, &rules()));
                    json!({"perplexity": perplexity_from_logprobs(&lps), "token_logprobs": lps})
                })
                .collect();
            match behaviour {
                Behaviour::Serve => respond(&mut stream, "200 OK", &json!({ "scores": scores }).to_string()),
                Behaviour::DropOne => {
                    scores.pop();
                    respond(&mut stream, "200 OK", &json!({ "scores": scores }).to_string())
                }
                Behaviour::Fail => respond(&mut stream, "503 Service Unavailable", "{}"),
            }
        }
    });
    (format!("http://{addr}/score"), hits)
}

fn remote(endpoint: String, batch_size: usize) -> RemoteScorer {
    RemoteScorer::new(RemoteScorerConfig {
        http: HttpConfig {
            attempts: 2,
            backoff_ms: 1,
            timeout_secs: 10.0,
            ..HttpConfig::new(endpoint)
        },
        batch_size,
        max_in_flight: 3,
    })
    .unwrap()
}

fn fixture() -> (Corpus, Corpus) {
    let train = Corpus::from_texts(
        &[
            "cleared to land runway two seven",
            "contact tower on one one eight decimal seven",
            "hold short of runway two seven",
            "wilco cleared to land",
        ],
        &rules(),
    )
    .unwrap();
    let texts: Vec<String> = (0..23)
        .map(|i| match i % 4 {
            0 => format!("cleared to land runway {i}"),
            1 => "squawk seven seven zero zero".to_owned(),
            2 => format!("hold short of runway two seven traffic {i}"),
            _ => "wilco".to_owned(),
        })
        .collect();
    let probe = Corpus::from_texts(&texts, &rules()).unwrap();
    (train, probe)
}

fn check_contract(scorer: &dyn PerplexityScorer, probe: &Corpus) {
    let refs: Vec<_> = probe.iter().collect();
    let scores = scorer.score_batch(&refs).unwrap();
    assert_eq!(scores.len(), probe.len());
    for (s, sc) in probe.iter().zip(&scores) {
        assert_eq!(sc.token_logprobs.len(), s.tokens.len(), "{}", s.id);
        assert!(sc.token_logprobs.iter().all(|lp| *lp <= 0.0));
        let p = perplexity_from_logprobs(&sc.token_logprobs);
        assert!((sc.perplexity - p).abs() <= 1e-9 * p, "{}: {} vs {p}", s.id, sc.perplexity);
        assert!(sc.perplexity >= 1.0);
    }
}

#[test]
fn builtin_scorer_satisfies_contract() {
    let (train, probe) = fixture();
    check_contract(&NGramLm::train(&train, 3, 0.1).unwrap(), &probe);
}

#[test]
fn remote_scorer_satisfies_contract_and_matches_builtin() {
    let (train, probe) = fixture();
    let lm = NGramLm::train(&train, 3, 0.1).unwrap();
    let (endpoint, hits) = stub(lm.clone(), Behaviour::Serve);
    let scorer = remote(endpoint, 5);
    check_contract(&scorer, &probe);
    assert_eq!(hits.load(Ordering::SeqCst), probe.len().div_ceil(5));

    let local = sentence_perplexities(&probe, &lm).unwrap();
    let served = sentence_perplexities(&probe, &scorer).unwrap();
    for (a, b) in local.iter().zip(&served) {
        assert!((a - b).abs() <= 1e-12 * a, "{a} vs {b}");
    }
    let (a, b) = (mean_perplexity(&probe, &lm).unwrap(), mean_perplexity(&probe, &scorer).unwrap());
    assert!((a - b).abs() <= 1e-12 * a);
}

#[test]
fn short_response_is_rejected() {
    let (train, probe) = fixture();
    let (endpoint, _) = stub(NGramLm::train(&train, 3, 0.1).unwrap(), Behaviour::DropOne);
    let scorer = remote(endpoint, 8);
    let refs: Vec<_> = probe.iter().collect();
    assert!(matches!(scorer.score_batch(&refs), Err(LmError::BadResponse(_))));
}

#[test]
fn server_errors_surface_after_retries() {
    let (train, probe) = fixture();
    let (endpoint, hits) = stub(NGramLm::train(&train, 3, 0.1).unwrap(), Behaviour::Fail);
    let scorer = remote(endpoint, 100);
    match scorer.score(&probe.sentences[0]) {
        Err(LmError::Transport(e)) => assert_eq!(e.attempts, 2),
        other => panic!("expected a transport error, got {other:?}"),
    }
    assert_eq!(hits.load(Ordering::SeqCst), 2);
    // Metric code names the sentence that could not be scored.
    match sentence_perplexities(&probe, &scorer) {
        Err(MetricError::Scorer { id, .. }) => assert_eq!(id, probe.sentences[0].id),
        other => panic!("expected a scorer error, got {other:?}"),
    }
}

#[test]
fn unreachable_endpoint_is_a_transport_error() {
    let scorer = remote("http://127.0.0.1:9/score".into(), 4);
    let (_, probe) = fixture();
    assert!(matches!(scorer.score(&probe.sentences[0]), Err(LmError::Transport(_))));
}

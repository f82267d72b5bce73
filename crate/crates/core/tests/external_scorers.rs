mod common;

use std::time::Duration;

use common::http::serve;
use lfrerank::data::{Candidate, CandidateSet, LogicalForm, Split};
use lfrerank::genclient::{GenerationRequest, Generator, HttpGenerator, RetryPolicy};
use lfrerank::scoring::protocol::Handshake;
use lfrerank::scoring::{score_sets, HttpScorer, MetricChoice, Scorer, ScorerKind, SubprocessScorer};
use lfrerank::Error;

fn sets() -> Vec<CandidateSet> {
    let mk = |id: &str, texts: &[&str]| {
        let c = texts.iter().map(|t| Candidate::new(*t, 1, Some(-1.0)).unwrap()).collect();
        CandidateSet::new(id, "answer ( x )", Some("gold text".to_string()), c).unwrap()
    };
    vec![mk("a", &["one", "three", "fives"]), mk("b", &["xx", "y"])]
}

fn mock_cmd(kind: &str) -> String {
    format!("{} mock-scorer --kind {kind}", env!("CARGO_BIN_EXE_lfrerank"))
}

#[test]
fn subprocess_scorer_round_trip() {
    let s = SubprocessScorer::spawn(&mock_cmd("external-reference"), Duration::from_secs(10)).unwrap();
    assert_eq!(s.name(), "candidate-length");
    assert_eq!(s.kind(), ScorerKind::ExternalReference);
    // batch size 2 splits set `a` across requests
    let out = score_sets(&sets(), &s, 2).unwrap();
    assert_eq!(out[0].scores, vec![3.0, 5.0, 5.0]);
    assert_eq!(out[1].scores, vec![2.0, 1.0]);
    assert!(out.iter().all(|m| m.metric == "candidate-length"));
}

#[test]
fn lf_scorer_needs_no_reference() {
    let s = SubprocessScorer::spawn(&mock_cmd("external-lf"), Duration::from_secs(10)).unwrap();
    let c = vec![Candidate::new("abc", 1, None).unwrap()];
    let set = CandidateSet::new("r", "answer ( y )", None, c).unwrap();
    assert_eq!(score_sets(std::slice::from_ref(&set), &s, 8).unwrap()[0].scores, vec![3.0]);

    let needs_ref = SubprocessScorer::spawn(&mock_cmd("external-reference"), Duration::from_secs(10)).unwrap();
    assert!(matches!(score_sets(&[set], &needs_ref, 8), Err(Error::MissingReference(_))));
}

#[test]
fn metric_choice_opens_subprocess() {
    let choice: MetricChoice = format!("ext:{}", mock_cmd("external-lf")).parse().unwrap();
    let s = choice.open(Duration::from_secs(10)).unwrap();
    assert_eq!(s.name(), "candidate-length");
}

#[test]
fn subprocess_failures_are_typed() {
    let e = SubprocessScorer::spawn("echo not-a-handshake", Duration::from_secs(5)).err().unwrap();
    assert!(matches!(e, Error::Protocol(_)), "{e}");
    let e = SubprocessScorer::spawn("sleep 5", Duration::from_millis(200)).err().unwrap();
    assert!(matches!(e, Error::Timeout(_)), "{e}");
    let e = SubprocessScorer::spawn("/nonexistent/scorer-binary", Duration::from_secs(1)).err().unwrap();
    assert!(matches!(e, Error::Transport(_)), "{e}");
    assert_eq!(e.exit_code(), 3);
}

fn length_server() -> common::http::Server {
    serve(|req, _| match (req.method.as_str(), req.path.as_str()) {
        ("GET", "/hello") => (200, serde_json::to_string(&Handshake::new("remote-len", ScorerKind::ExternalReference)).unwrap()),
        ("POST", "/score") => {
            let v: serde_json::Value = serde_json::from_str(&req.body).unwrap();
            assert_eq!(v["protocol_version"], 1);
            let scores: Vec<f64> = v["items"]
                .as_array()
                .unwrap()
                .iter()
                .map(|it| it["candidate"].as_str().unwrap().len() as f64)
                .collect();
            (200, serde_json::json!({ "scores": scores }).to_string())
        }
        _ => (404, String::new()),
    })
}

#[test]
fn http_scorer_keeps_order_with_concurrent_batches() {
    let server = length_server();
    let s = HttpScorer::connect(&server.url, Duration::from_secs(10)).unwrap().with_in_flight(3);
    assert_eq!(s.name(), "remote-len");
    let out = score_sets(&sets(), &s, 1).unwrap();
    assert_eq!(out[0].scores, vec![3.0, 5.0, 5.0]);
    assert_eq!(out[1].scores, vec![2.0, 1.0]);
    // one handshake plus one request per candidate
    assert_eq!(server.hits.load(std::sync::atomic::Ordering::SeqCst), 6);
}

#[test]
fn http_scorer_reports_protocol_errors() {
    let server = serve(|req, _| match req.path.as_str() {
        "/hello" => (200, serde_json::to_string(&Handshake::new("broken", ScorerKind::ExternalReference)).unwrap()),
        _ => (500, r#"{"error":"model not loaded"}"#.to_string()),
    });
    let s = HttpScorer::connect(&server.url, Duration::from_secs(5)).unwrap();
    let e = score_sets(&sets(), &s, 8).unwrap_err();
    assert!(matches!(e, Error::Protocol(_)) && e.to_string().contains("model not loaded"), "{e}");

    let short = serve(|req, _| match req.path.as_str() {
        "/hello" => (200, serde_json::to_string(&Handshake::new("short", ScorerKind::ExternalReference)).unwrap()),
        _ => (200, r#"{"scores":[1.0]}"#.to_string()),
    });
    let s = HttpScorer::connect(&short.url, Duration::from_secs(5)).unwrap();
    assert!(matches!(score_sets(&sets(), &s, 8), Err(Error::Protocol(_))));
}

#[test]
fn http_scorer_unreachable_is_transport_error() {
    let e = HttpScorer::connect("http://127.0.0.1:9", Duration::from_millis(500)).err().unwrap();
    assert!(matches!(e, Error::Transport(_)), "{e}");
}

fn request_for(lf: &LogicalForm) -> GenerationRequest<'_> {
    GenerationRequest { lf, prompt: "Query: x\nQuestion:", temperature: 0.7, max_tokens: 16, n: 2, attempt: 0 }
}

fn fast_retry(n: u32) -> RetryPolicy {
    RetryPolicy { max_retries: n, initial_backoff: Duration::from_millis(5), ..RetryPolicy::default() }
}

#[test]
fn http_generator_retries_transient_statuses() {
    let server = serve(|req, n| {
        assert_eq!(req.header("authorization"), Some("Bearer sekret"));
        let body: serde_json::Value = serde_json::from_str(&req.body).unwrap();
        assert_eq!(body["n"], 2);
        match n {
            0 => (503, "busy".into()),
            1 => (429, "slow down".into()),
            _ => (200, r#"{"choices":[{"text":"what is x","token_logprobs":[-0.5,-0.25]},{"text":"x ?"}]}"#.into()),
        }
    });
    let lf = LogicalForm::new("q1", "answer ( x )", None, Split::Test).unwrap();
    let g = HttpGenerator::new(&server.url).with_token(Some("sekret".into())).with_retry(fast_retry(3));
    let out = g.sample(&request_for(&lf)).unwrap();
    assert_eq!(out.len(), 2);
    assert_eq!(out[0].text, "what is x");
    assert_eq!(out[0].token_logprobs, vec![-0.5, -0.25]);
    assert!(out[1].token_logprobs.is_empty());
    assert_eq!(server.hits.load(std::sync::atomic::Ordering::SeqCst), 3);
}

#[test]
fn http_generator_stops_on_client_errors_and_exhaustion() {
    let lf = LogicalForm::new("q1", "answer ( x )", None, Split::Test).unwrap();
    let denied = serve(|_, _| (401, "no token".into()));
    let e = HttpGenerator::new(&denied.url).with_retry(fast_retry(3)).sample(&request_for(&lf)).unwrap_err();
    assert!(matches!(e, Error::Generator(_)), "{e}");
    assert_eq!(denied.hits.load(std::sync::atomic::Ordering::SeqCst), 1);

    let down = serve(|_, _| (502, "bad gateway".into()));
    let e = HttpGenerator::new(&down.url).with_retry(fast_retry(2)).sample(&request_for(&lf)).unwrap_err();
    assert!(matches!(e, Error::Transport(_)), "{e}");
    assert_eq!(down.hits.load(std::sync::atomic::Ordering::SeqCst), 3);
}

#[test]
fn instruction_style_splits_numbered_lists() {
    let server = serve(|_, _| (200, r#"{"choices":[{"text":"1. what is x\n2. name x\n3. which x"}]}"#.into()));
    let lf = LogicalForm::new("q1", "answer ( x )", None, Split::Test).unwrap();
    let out = HttpGenerator::new(&server.url).splitting_numbered_lists(true).sample(&request_for(&lf)).unwrap();
    let texts: Vec<&str> = out.iter().map(|c| c.text.as_str()).collect();
    assert_eq!(texts, ["what is x", "name x", "which x"]);
}

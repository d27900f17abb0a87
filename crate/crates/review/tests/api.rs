use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use serde_json::{json, Value};
use tower::ServiceExt;

use misuse_core::bench::experiment::ExperimentKind;
use misuse_core::config::PartialConfig;
use misuse_core::par::Execution;
use misuse_core::pipeline::Pipeline;
use misuse_review::{router, AppState, TokenEntry, TokenTable};

const ANA: &str = "token-ana";
const BEN: &str = "token-ben";
const CY: &str = "token-cy";

struct Fixture {
    _dir: tempfile::TempDir,
    ws: PathBuf,
    pipeline: Pipeline,
}

fn fixture() -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let ws = dir.path().join("ws");
    let cfg = PartialConfig {
        dataset: Some(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/demo")),
        workspace: Some(ws.clone()),
        ..Default::default()
    }
    .resolve()
    .unwrap();
    let pipeline = Pipeline::new(cfg, Execution::Sequential).unwrap();
    pipeline.run_p().unwrap();
    pipeline.run_rub(None).unwrap();
    pipeline.run_r().unwrap();
    Fixture { _dir: dir, ws, pipeline }
}

fn tokens() -> TokenTable {
    let e = |token: &str, reviewer: &str, primary| TokenEntry {
        token: token.into(),
        reviewer: reviewer.into(),
        primary,
    };
    TokenTable::new(vec![e(ANA, "ana", true), e(BEN, "ben", true), e(CY, "cy", false)]).unwrap()
}

fn app(ws: &Path) -> Router {
    router(AppState::open(ws, None, tokens()).unwrap())
}

async fn call(app: &Router, method: &str, uri: &str, token: Option<&str>, body: Option<Value>) -> (StatusCode, Value) {
    let mut req = Request::builder().method(method).uri(uri);
    if let Some(t) = token {
        req = req.header("authorization", format!("Bearer {t}"));
    }
    let body = match body {
        Some(b) => {
            req = req.header("content-type", "application/json");
            Body::from(b.to_string())
        }
        None => Body::empty(),
    };
    let resp = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    let bytes = axum::body::to_bytes(resp.into_body(), usize::MAX).await.unwrap();
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap_or(Value::Null) };
    (status, value)
}

async fn assess(app: &Router, token: &str, id: &str, decision: &str) -> (StatusCode, Value) {
    call(app, "POST", "/assessments", Some(token), Some(json!({"finding_id": id, "decision": decision}))).await
}

async fn first_finding(app: &Router, query: &str) -> String {
    let (s, v) = call(app, "GET", &format!("/findings?{query}"), None, None).await;
    assert_eq!(s, StatusCode::OK);
    v[0]["id"].as_str().expect("at least one finding").to_owned()
}

fn detector_stats<'a>(v: &'a Value, det: &str) -> &'a Value {
    v["detectors"].as_array().unwrap().iter().find(|d| d["detector_id"] == det).unwrap()
}

#[tokio::test]
async fn experiments_and_listing() {
    let f = fixture();
    let app = app(&f.ws);
    let (s, v) = call(&app, "GET", "/experiments", None, None).await;
    assert_eq!(s, StatusCode::OK);
    let exps: Vec<&str> = v.as_array().unwrap().iter().map(|e| e["experiment"].as_str().unwrap()).collect();
    assert_eq!(exps, ["p", "rub", "r"]);
    assert!(v.as_array().unwrap().iter().all(|e| e["available"] == true && e["failed_runs"] == 0));

    let (_, all) = call(&app, "GET", "/findings?experiment=p", None, None).await;
    let (_, cs) = call(&app, "GET", "/findings?experiment=p&detector=call-set", None, None).await;
    assert_eq!(cs.as_array().unwrap().len(), 2);
    assert!(all.as_array().unwrap().len() > 2);
    assert!(cs.as_array().unwrap().iter().all(|x| x["progress"] == "0/2" && x["detector_id"] == "call-set"));
    let (_, by_version) = call(&app, "GET", "/findings?experiment=p&version=inventory/v1", None, None).await;
    assert_eq!(by_version, all);
    let (_, none) = call(&app, "GET", "/findings?experiment=p&version=v9", None, None).await;
    assert_eq!(none, json!([]));
    let (s, _) = call(&app, "GET", "/findings?experiment=bogus", None, None).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn detail_has_snippet_misuse_and_guidance() {
    let f = fixture();
    let app = app(&f.ws);
    let (_, hits) = call(&app, "GET", "/findings?experiment=r&detector=call-pair", None, None).await;
    let id = hits[0]["id"].as_str().unwrap().to_owned();
    let (s, v) = call(&app, "GET", &format!("/findings/{id}"), None, None).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(v["finding"]["id"], id.as_str());
    let snippet = &v["snippet"];
    let focus = snippet["focus_line"].as_u64().unwrap();
    let start = snippet["start_line"].as_u64().unwrap();
    let lines = snippet["lines"].as_array().unwrap();
    assert!(start <= focus && focus < start + lines.len() as u64);
    assert!(lines.len() <= 21);
    assert_eq!(v["misuses"][0]["id"], "inv-002");
    assert!(!v["misuses"][0]["fix_description"].as_str().unwrap().is_empty());
    assert!(v["guidance"].as_str().unwrap().contains("condition"));
    assert_eq!(v["review"]["progress"], "0/2");

    // Percent-encoded ids resolve too.
    let (s, _) = call(&app, "GET", &format!("/findings/{}", id.replace('/', "%2F")), None, None).await;
    assert_eq!(s, StatusCode::OK);
    let (s, v) = call(&app, "GET", "/findings/p/call-set/nowhere/0/001", None, None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert!(v["error"].as_str().unwrap().contains("unknown finding"));
}

#[tokio::test]
async fn authentication_and_validation_errors() {
    let f = fixture();
    let app = app(&f.ws);
    let id = first_finding(&app, "experiment=p").await;
    let body = json!({"finding_id": id, "decision": "misuse"});
    assert_eq!(call(&app, "POST", "/assessments", None, Some(body.clone())).await.0, StatusCode::UNAUTHORIZED);
    assert_eq!(call(&app, "POST", "/assessments", Some("nope"), Some(body.clone())).await.0, StatusCode::UNAUTHORIZED);
    assert_eq!(call(&app, "POST", "/resolutions", None, Some(body)).await.0, StatusCode::UNAUTHORIZED);

    let (s, _) = assess(&app, ANA, "p/call-set/x/y/001", "misuse").await;
    assert_eq!(s, StatusCode::NOT_FOUND);

    // Root cause that does not fit the decision or the experiment.
    let bad = json!({"finding_id": id, "decision": "misuse", "fp_root_cause": "Uncommon"});
    assert_eq!(call(&app, "POST", "/assessments", Some(ANA), Some(bad)).await.0, StatusCode::UNPROCESSABLE_ENTITY);
    let bad = json!({"finding_id": id, "decision": "not-misuse", "fn_root_cause": "Matching"});
    assert_eq!(call(&app, "POST", "/assessments", Some(ANA), Some(bad)).await.0, StatusCode::UNPROCESSABLE_ENTITY);
    let bad = json!({"finding_id": id, "decision": "not-misuse", "fp_root_cause": "Cosmic"});
    assert_eq!(call(&app, "POST", "/assessments", Some(ANA), Some(bad)).await.0, StatusCode::UNPROCESSABLE_ENTITY);
    let ok = json!({"finding_id": id, "decision": "not-misuse", "fp_root_cause": "Uncommon"});
    assert_eq!(call(&app, "POST", "/assessments", Some(ANA), Some(ok)).await.0, StatusCode::OK);

    // Resolution before two assessments.
    let (s, v) = call(&app, "POST", "/resolutions", Some(ANA), Some(json!({"finding_id": id, "decision": "misuse"}))).await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert!(v["error"].as_str().unwrap().contains("1 assessment"));
}

#[tokio::test]
async fn two_review_gate_and_stats() {
    let f = fixture();
    let app = app(&f.ws);
    let (_, findings) = call(&app, "GET", "/findings?experiment=p&detector=call-set", None, None).await;
    let ids: Vec<String> = findings.as_array().unwrap().iter().map(|x| x["id"].as_str().unwrap().to_owned()).collect();
    assert_eq!(ids.len(), 2);

    let (s, v) = assess(&app, ANA, &ids[0], "misuse").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["progress"], "1/2");
    let (_, st) = call(&app, "GET", "/stats?experiment=p&detector=call-set", None, None).await;
    let d = detector_stats(&st, "call-set");
    assert_eq!(d["completeness"], json!({"complete": 0, "total": 2}));
    assert_eq!(d["confirmed"], 0);
    assert!(d["precision"].is_null());

    let (_, v) = assess(&app, BEN, &ids[0], "misuse").await;
    assert_eq!((v["progress"].as_str(), v["final_decision"].as_str()), (Some("2/2"), Some("misuse")));
    let (_, st) = call(&app, "GET", "/stats?experiment=p&detector=call-set", None, None).await;
    let d = detector_stats(&st, "call-set");
    assert_eq!((d["reviewed"].as_u64(), d["confirmed"].as_u64()), (Some(1), Some(1)));
    assert_eq!(d["precision"]["display"], "100.0%");
    assert_eq!(st["primary_reviewers"], json!(["ana", "ben"]));

    // Disagreement, then a resolution.
    assess(&app, ANA, &ids[1], "misuse").await;
    let nm = json!({"finding_id": ids[1], "decision": "not-misuse", "fp_root_cause": "Analysis"});
    call(&app, "POST", "/assessments", Some(BEN), Some(nm)).await;
    let (_, st) = call(&app, "GET", "/stats?experiment=p&detector=call-set", None, None).await;
    let d = detector_stats(&st, "call-set");
    assert_eq!((d["reviewed"].as_u64(), d["unresolved"].as_u64()), (Some(1), Some(1)));
    let (s, v) = call(&app, "POST", "/resolutions", Some(CY), Some(json!({"finding_id": ids[1], "decision": "misuse", "note": "agreed"}))).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["final_decision"], "misuse");
    let (_, st) = call(&app, "GET", "/stats?experiment=p&detector=call-set", None, None).await;
    let d = detector_stats(&st, "call-set");
    assert_eq!((d["reviewed"].as_u64(), d["confirmed"].as_u64()), (Some(2), Some(2)));
    // Kappa from first-round decisions: (yes, yes) and (yes, no).
    assert_eq!(d["kappa"], 0.0);

    // Matches the stats computed from the exports directly.
    let cli = f.pipeline.stats(ExperimentKind::P, &["ana".into(), "ben".into()]).unwrap();
    let cli_cs = cli.iter().find(|s| s.detector_id == "call-set").unwrap();
    assert_eq!(serde_json::to_value(cli_cs).unwrap(), *d);
}

#[tokio::test]
async fn upsert_and_durability() {
    let f = fixture();
    let app1 = app(&f.ws);
    let id = first_finding(&app1, "experiment=rub").await;
    assess(&app1, ANA, &id, "misuse").await;
    let nm = json!({"finding_id": id, "decision": "not-misuse", "fn_root_cause": "Lenient", "comment": "second look"});
    let (_, v) = call(&app1, "POST", "/assessments", Some(ANA), Some(nm)).await;
    assert_eq!(v["assessments"].as_array().unwrap().len(), 1);
    assert_eq!(v["assessments"][0]["decision"], "not-misuse");

    // A restarted service sees the same state.
    let app2 = app(&f.ws);
    let (_, d) = call(&app2, "GET", &format!("/findings/{id}"), None, None).await;
    assert_eq!(d["review"]["assessments"][0]["comment"], "second look");
    assert_eq!(d["review"]["progress"], "1/2");
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_posts_to_one_finding() {
    let f = fixture();
    let state = AppState::open(&f.ws, None, tokens()).unwrap();
    let app = router(Arc::clone(&state));
    let id = first_finding(&app, "experiment=p").await;
    let mut tasks = Vec::new();
    for i in 0..40 {
        let app = app.clone();
        let id = id.clone();
        let token = [ANA, BEN, CY][i % 3];
        let decision = if i % 2 == 0 { "misuse" } else { "not-misuse" };
        tasks.push(tokio::spawn(async move { assess(&app, token, &id, decision).await.0 }));
    }
    for t in tasks {
        assert_eq!(t.await.unwrap(), StatusCode::OK);
    }
    let (_, d) = call(&app, "GET", &format!("/findings/{id}"), None, None).await;
    let reviewers: Vec<&str> =
        d["review"]["assessments"].as_array().unwrap().iter().map(|a| a["reviewer"].as_str().unwrap()).collect();
    assert_eq!(reviewers, ["ana", "ben", "cy"]);
    // Every line of the log is a complete record.
    let log = std::fs::read_to_string(f.ws.join("review/store.jsonl")).unwrap();
    assert!(log.lines().all(|l| serde_json::from_str::<Value>(l).is_ok()));
}

#[tokio::test]
async fn vocabulary_lists_root_causes() {
    let f = fixture();
    let app = app(&f.ws);
    let (s, v) = call(&app, "GET", "/vocabulary", None, None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["decisions"], json!(["misuse", "not-misuse"]));
    assert_eq!(v["fp_root_causes"].as_array().unwrap().len(), 7);
    assert_eq!(v["fn_root_causes"].as_array().unwrap().len(), 6);
    assert_eq!(v["fp_root_causes"][0], "Uncommon");
    assert_eq!(v["required_reviews"], 2);
}

#[tokio::test]
async fn stats_for_missing_experiment_is_404() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let (s, _) = call(&app, "GET", "/stats?experiment=p", None, None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let (s, v) = call(&app, "GET", "/experiments", None, None).await;
    assert_eq!(s, StatusCode::OK);
    assert!(v.as_array().unwrap().iter().all(|e| e["available"] == false));
}

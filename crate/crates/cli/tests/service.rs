use std::collections::BTreeSet;
use std::fs::File;
use std::io::BufReader;
use std::path::Path;
use std::sync::Arc;

use axum::body::{to_bytes, Body};
use axum::http::{Request, StatusCode};
use axum::Router;
use germen_cli::service::{router, ComponentView, NoyauView, ServiceState, SizeCount};
use germen_core::aggregation::{ComponentStatus, Journal, JournalAction, ValenceMode};
use germen_core::{read_corpus, Classification, Config, Engine};
use serde_json::{json, Value};
use tower::ServiceExt;

fn engine() -> Engine {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/geo.tsv");
    let docs = read_corpus(BufReader::new(File::open(path).unwrap())).unwrap();
    let mut engine = Engine::new(Config::default()).unwrap();
    engine.ingest_all(&docs).unwrap();
    engine
}

fn service(journal: Option<&Path>) -> Router {
    let state = ServiceState::new(engine(), 2, ValenceMode::Exact, journal).unwrap();
    router(Arc::new(tokio::sync::RwLock::new(state)))
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let request = Request::builder().method(method).uri(uri);
    let request = match body {
        Some(b) => request
            .header("content-type", "application/json")
            .body(Body::from(b.to_string())),
        None => request.body(Body::empty()),
    }
    .unwrap();
    let response = app.clone().oneshot(request).await.unwrap();
    let status = response.status();
    let bytes = to_bytes(response.into_body(), usize::MAX).await.unwrap();
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, value)
}

async fn listing(app: &Router) -> Vec<ComponentView> {
    let (status, body) = call(app, "GET", "/components", None).await;
    assert_eq!(status, StatusCode::OK);
    serde_json::from_value(body).unwrap()
}

#[tokio::test]
async fn sizes_count_every_noyau() {
    let app = service(None);
    let (status, body) = call(&app, "GET", "/sizes", None).await;
    assert_eq!(status, StatusCode::OK);
    let sizes: Vec<SizeCount> = serde_json::from_value(body).unwrap();
    let e = engine();
    let heads = e.labels().head_nodes().len();
    assert_eq!(sizes.iter().map(|s| s.count).sum::<usize>(), heads);
    let strict = e.labels().all_heads().iter().filter(|h| h.len() == 1).count();
    assert_eq!(sizes.iter().map(|s| s.size * s.count).sum::<usize>(), strict);
}

#[tokio::test]
async fn components_are_listed_largest_first_and_filtered() {
    let app = service(None);
    let all = listing(&app).await;
    assert!(!all.is_empty());
    assert!(all.windows(2).all(|w| w[0].documents >= w[1].documents));
    assert!(all.iter().enumerate().all(|(i, c)| c.id == i));
    assert!(all.iter().all(|c| c.status == Some(ComponentStatus::Pending)));

    let (_, body) = call(&app, "GET", "/components?min_docs=6", None).await;
    let big: Vec<ComponentView> = serde_json::from_value(body).unwrap();
    assert_eq!(big.len(), all.iter().filter(|c| c.documents >= 6).count());

    let (status, body) = call(&app, "GET", "/components?valence=3", None).await;
    assert_eq!(status, StatusCode::OK);
    let other: Vec<ComponentView> = serde_json::from_value(body).unwrap();
    assert!(other.iter().all(|c| c.status.is_none()));

    let (status, _) = call(&app, "GET", "/components?valence=1", None).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn noyau_and_component_details() {
    let app = service(None);
    let first = listing(&app).await.remove(0);
    let head = &first.noyaux[0].head;

    let (status, body) = call(&app, "GET", &format!("/noyaux/{head}"), None).await;
    assert_eq!(status, StatusCode::OK);
    let noyau: NoyauView = serde_json::from_value(body).unwrap();
    assert_eq!(noyau.component, Some(0));
    assert_eq!(noyau.members.len(), first.noyaux[0].size);
    let top: Vec<&str> = noyau.terms.iter().take(3).map(|t| t.term.as_str()).collect();
    assert_eq!(first.noyaux[0].top_terms, top);
    assert!(first.noyaux[0].top_terms.len() <= 3);
    if !noyau.terms.is_empty() {
        let sum: f64 = noyau.terms.iter().map(|t| t.weight).sum();
        assert!((sum - 1.0).abs() < 1e-9);
    }

    let (status, body) = call(&app, "GET", "/components/0", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["noyau_details"].as_array().unwrap().len(), first.noyaux.len());
    assert_eq!(body["documents"], first.documents);

    let (status, _) = call(&app, "GET", "/components/999", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = call(&app, "GET", "/noyaux/nope", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    let e = engine();
    let member = (0..e.len())
        .map(germen_core::NodeId)
        .find(|&v| !e.labels().is_head(v))
        .unwrap();
    let (status, _) = call(&app, "GET", &format!("/noyaux/{}", e.doc_id(member)), None).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
}

fn journal_lines(path: &Path) -> usize {
    Journal::read(path).unwrap().len()
}

#[tokio::test]
async fn curation_flow_is_exported_and_journaled() {
    let dir = tempfile::tempdir().unwrap();
    let journal = dir.path().join("session.jsonl");
    let app = service(Some(&journal));
    let components = listing(&app).await;
    let merged = components.iter().find(|c| c.noyaux.len() >= 2).expect("a multi-noyau component");
    let dropped = components.iter().find(|c| c.id != merged.id).expect("a second component");
    let pair = vec![merged.noyaux[0].head.clone(), merged.noyaux[1].head.clone()];

    let (status, body) = call(&app, "POST", "/merge", Some(json!({"noyaux": pair, "label": "Soil mechanics"}))).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    let view: ComponentView = serde_json::from_value(body).unwrap();
    assert_eq!(view.groups.len(), 1);
    assert_eq!(view.groups[0].label, "Soil mechanics");

    let (status, _) = call(&app, "POST", "/status", Some(json!({"component": dropped.id, "status": "invalidated"}))).await;
    assert_eq!(status, StatusCode::OK);

    let (status, body) = call(&app, "GET", "/export", None).await;
    assert_eq!(status, StatusCode::OK);
    let exported: Classification = serde_json::from_value(body).unwrap();
    let group = exported.0.iter().find(|g| g.label == "Soil mechanics").expect("merged group exported");
    let e = engine();
    let mut expected: Vec<String> = (0..e.len())
        .map(germen_core::NodeId)
        .filter(|&v| match e.heads(v) {
            [h] => pair.contains(&e.doc_id(*h).to_owned()),
            _ => false,
        })
        .map(|v| e.doc_id(v).to_owned())
        .collect();
    expected.sort();
    assert_eq!(group.doc_ids, expected);

    let exported_docs: BTreeSet<&str> = exported.0.iter().flat_map(|g| g.doc_ids.iter().map(String::as_str)).collect();
    for n in &dropped.noyaux {
        assert!(!exported_docs.contains(n.head.as_str()), "{} from the invalidated component", n.head);
    }
    assert!(!exported.0.iter().any(|g| g.label == format!("component-{}", dropped.id)));

    // the journal holds exactly the two accepted actions
    let entries = Journal::read(&journal).unwrap();
    assert_eq!(entries.len(), 2);
    assert_eq!(
        entries[0].action,
        JournalAction::Merge { noyaux: pair.clone(), label: "Soil mechanics".into() }
    );
    assert_eq!(
        entries[1].action,
        JournalAction::SetStatus {
            component: germen_core::ComponentId(dropped.id),
            status: ComponentStatus::Invalidated
        }
    );
    assert!(entries.iter().all(|e| e.valence == 2 && e.timestamp_ms > 0));

    // a restarted service replays the journal to the same export
    let restarted = service(Some(&journal));
    let (_, body) = call(&restarted, "GET", "/export", None).await;
    assert_eq!(serde_json::from_value::<Classification>(body).unwrap(), exported);
}

#[tokio::test]
async fn rejected_actions_are_not_journaled() {
    let dir = tempfile::tempdir().unwrap();
    let journal = dir.path().join("session.jsonl");
    let app = service(Some(&journal));
    let components = listing(&app).await;
    let (a, b) = (&components[0], &components[1]);
    let cross = json!({"noyaux": [a.noyaux[0].head, b.noyaux[0].head], "label": "x"});
    assert_eq!(call(&app, "POST", "/merge", Some(cross)).await.0, StatusCode::CONFLICT);
    let blank = json!({"noyaux": [a.noyaux[0].head], "label": "   "});
    assert_eq!(call(&app, "POST", "/merge", Some(blank)).await.0, StatusCode::UNPROCESSABLE_ENTITY);
    let empty = json!({"noyaux": [], "label": "x"});
    assert_eq!(call(&app, "POST", "/merge", Some(empty)).await.0, StatusCode::UNPROCESSABLE_ENTITY);
    let unknown = json!({"noyaux": ["nope"], "label": "x"});
    assert_eq!(call(&app, "POST", "/merge", Some(unknown)).await.0, StatusCode::NOT_FOUND);
    let missing = json!({"component": 999, "status": "validated"});
    assert_eq!(call(&app, "POST", "/status", Some(missing)).await.0, StatusCode::NOT_FOUND);
    assert_eq!(journal_lines(&journal), 0);

    let invalidate = json!({"component": a.id, "status": "invalidated"});
    assert_eq!(call(&app, "POST", "/status", Some(invalidate)).await.0, StatusCode::OK);
    let late = json!({"noyaux": [a.noyaux[0].head], "label": "x"});
    assert_eq!(call(&app, "POST", "/merge", Some(late)).await.0, StatusCode::CONFLICT);
    assert_eq!(journal_lines(&journal), 1);
}

#[tokio::test]
async fn export_options_filter_documents() {
    let app = service(None);
    let components = listing(&app).await;
    let (_, body) = call(&app, "POST", "/status", Some(json!({"component": components[0].id, "status": "validated"}))).await;
    assert_eq!(body["status"], "validated");

    let (_, body) = call(&app, "GET", "/export?validated_only=true", None).await;
    let validated: Classification = serde_json::from_value(body).unwrap();
    assert_eq!(validated.0.len(), 1);
    assert_eq!(validated.0[0].label, "component-0");

    let (_, body) = call(&app, "GET", "/export", None).await;
    let everything: Classification = serde_json::from_value(body).unwrap();
    let (_, body) = call(&app, "GET", "/export?drop_isolated=true&include_multivalent=true", None).await;
    let trimmed: Classification = serde_json::from_value(body).unwrap();
    assert!(everything.document_count() > 0);
    assert!(trimmed.0.len() <= everything.0.len());
}

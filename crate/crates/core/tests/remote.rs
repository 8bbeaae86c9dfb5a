use std::collections::HashMap;
use std::net::SocketAddr;
use std::time::Duration;

use axum::extract::{Form, Query};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::Router;
use kgqa_core::kgclient::{fetch_candidates, Connection, ExecErrorKind, SparqlEndpoint};
use kgqa_core::skeleton::parse_skeleton;

const RESULTS: &str = r#"{"head":{"vars":["grisp_target"]},"results":{"bindings":[
  {"grisp_target":{"type":"uri","value":"http://www.wikidata.org/prop/direct/P1"}},
  {"grisp_target":{"type":"uri","value":"http://www.wikidata.org/prop/direct/P17"}},
  {"grisp_target":{"type":"literal","value":"x"}}]}}"#;

async fn answer(headers: HeaderMap, method: &'static str, query: String) -> Response {
    let accept = headers.get(header::ACCEPT).and_then(|v| v.to_str().ok()).unwrap_or("");
    if accept != "application/sparql-results+json" {
        return (StatusCode::NOT_ACCEPTABLE, "bad accept").into_response();
    }
    if query.contains("BROKEN") {
        return (StatusCode::BAD_REQUEST, "Parse error: unexpected BROKEN").into_response();
    }
    if query.contains("EXPLODE") {
        return (StatusCode::INTERNAL_SERVER_ERROR, "boom").into_response();
    }
    if query.contains("SLOW") {
        tokio::time::sleep(Duration::from_secs(3)).await;
    }
    let body = if query.starts_with("ASK") {
        format!(r#"{{"head":{{}},"boolean":{}}}"#, method == "GET")
    } else {
        RESULTS.to_string()
    };
    ([(header::CONTENT_TYPE, "application/sparql-results+json")], body).into_response()
}

fn spawn_server() -> SocketAddr {
    let (tx, rx) = std::sync::mpsc::channel();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Runtime::new().unwrap();
        rt.block_on(async move {
            let app = Router::new().route(
                "/sparql",
                get(|h: HeaderMap, Query(q): Query<HashMap<String, String>>| async move {
                    answer(h, "GET", q.get("query").cloned().unwrap_or_default()).await
                })
                .post(|h: HeaderMap, Form(f): Form<HashMap<String, String>>| async move {
                    answer(h, "POST", f.get("query").cloned().unwrap_or_default()).await
                }),
            );
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            tx.send(listener.local_addr().unwrap()).unwrap();
            axum::serve(listener, app).await.unwrap();
        });
    });
    rx.recv().unwrap()
}

#[test]
fn remote_endpoint_protocol() {
    let addr = spawn_server();
    let conn = Connection::remote(&format!("http://{addr}/sparql")).unwrap();
    let t = Duration::from_secs(2);

    let table = conn.execute("SELECT ?grisp_target WHERE { ?s ?grisp_target ?o }", t).unwrap();
    assert_eq!(table.variables, ["grisp_target"]);
    assert_eq!(table.rows.len(), 3);

    assert_eq!(conn.execute("ASK { }", t).unwrap().as_boolean(), Some(true));
    let long_ask = format!("ASK {{ }} #{}", "x".repeat(3000));
    assert_eq!(
        conn.execute(&long_ask, t).unwrap().as_boolean(),
        Some(false),
        "long queries are POSTed"
    );
    assert!(conn.ping());

    assert_eq!(conn.execute("BROKEN", t).unwrap_err().kind, ExecErrorKind::Syntax);
    assert_eq!(conn.execute("EXPLODE", t).unwrap_err().kind, ExecErrorKind::Transport);
    assert_eq!(
        conn.execute("SLOW", Duration::from_millis(200)).unwrap_err().kind,
        ExecErrorKind::Timeout
    );

    let skel = parse_skeleton("SELECT ?x WHERE { wd:Q1 <iri>capital of</iri> ?x }").unwrap();
    let cq = skel.constraint_query(0).unwrap();
    let got = fetch_candidates(&conn, &cq, 100, t).unwrap();
    assert_eq!(got.iris.len(), 2);
    assert_eq!(got.dropped_non_iri, 1);
}

#[test]
fn unreachable_endpoint_is_a_transport_error() {
    let conn = Connection::remote("http://127.0.0.1:9/sparql").unwrap();
    let e = conn.execute("ASK { }", Duration::from_secs(2)).unwrap_err();
    assert!(matches!(e.kind, ExecErrorKind::Transport | ExecErrorKind::Timeout));
    assert!(!conn.ping());
}

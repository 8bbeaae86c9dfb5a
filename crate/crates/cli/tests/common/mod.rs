#![allow(dead_code)]

use std::net::SocketAddr;
use std::sync::Arc;

use kgqa_cli::service::{router, AppState};
use kgqa_core::Pipeline;

/// Serves `pipeline` on an ephemeral port from a background thread.
/// The returned handle keeps the pipeline alive outside the runtime.
pub fn spawn_server(pipeline: Pipeline) -> (String, Arc<Pipeline>) {
    let workers = pipeline.config().workers;
    let pipeline = Arc::new(pipeline);
    let state = AppState::new(pipeline.clone(), workers);
    let (tx, rx) = std::sync::mpsc::channel::<SocketAddr>();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Builder::new_multi_thread()
            .enable_all()
            .build()
            .expect("runtime");
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.expect("bind");
            tx.send(listener.local_addr().expect("addr")).expect("send addr");
            axum::serve(listener, router(state)).await.expect("serve");
        });
    });
    let addr = rx.recv().expect("server address");
    (format!("http://{addr}"), pipeline)
}

pub fn client() -> reqwest::blocking::Client {
    reqwest::blocking::Client::builder()
        .timeout(std::time::Duration::from_secs(90))
        .build()
        .expect("client")
}

/// Drops timing fields so traces from different runs compare equal.
pub fn strip_micros(v: &mut serde_json::Value) {
    match v {
        serde_json::Value::Object(m) => {
            m.remove("micros");
            m.values_mut().for_each(strip_micros);
        }
        serde_json::Value::Array(a) => a.iter_mut().for_each(strip_micros),
        _ => {}
    }
}

pub fn questions() -> Vec<(String, String)> {
    std::fs::read_to_string(crate::oracles::fixture("questions.jsonl"))
        .expect("questions")
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let v: serde_json::Value = serde_json::from_str(l).expect("question line");
            (v["question"].as_str().unwrap().to_string(), v["sparql"].as_str().unwrap().to_string())
        })
        .collect()
}

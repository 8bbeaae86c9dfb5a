//! Row-wise F1 / exact match and the benchmark runner.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::hash::Hash;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use num_traits::Float;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::kgclient::ResultTable;
use crate::pipeline::{AskOptions, Pipeline};
use crate::resolver::Status;

pub type Row = Vec<Option<String>>;

/// Precision and recall of `pred` against `gold`, as sets.
/// Both empty counts as perfect; exactly one empty as zero.
pub fn precision_recall<T: Float, R: Eq + Hash>(gold: &HashSet<R>, pred: &HashSet<R>) -> (T, T) {
    match (gold.is_empty(), pred.is_empty()) {
        (true, true) => return (T::one(), T::one()),
        (true, false) | (false, true) => return (T::zero(), T::zero()),
        _ => {}
    }
    let hit = T::from(gold.intersection(pred).count()).expect("count fits");
    let p = hit / T::from(pred.len()).expect("count fits");
    let r = hit / T::from(gold.len()).expect("count fits");
    (p, r)
}

pub fn row_f1<T: Float, R: Eq + Hash>(gold: &HashSet<R>, pred: &HashSet<R>) -> T {
    let (p, r) = precision_recall::<T, R>(gold, pred);
    if p + r == T::zero() {
        return T::zero();
    }
    let two = T::one() + T::one();
    two * p * r / (p + r)
}

/// Exact match is defined through F1.
pub fn exact_match<T: Float>(f1: T) -> bool {
    f1 == T::one()
}

pub fn mean<T: Float>(xs: &[T]) -> Option<T> {
    if xs.is_empty() {
        return None;
    }
    let sum = xs.iter().fold(T::zero(), |a, &b| a + b);
    Some(sum / T::from(xs.len()).expect("count fits"))
}

pub fn median<T: Float>(xs: &[T]) -> Option<T> {
    if xs.is_empty() {
        return None;
    }
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / (T::one() + T::one())
    })
}

/// Row sets of two tables with columns aligned by name when both use the
/// same variable names, positionally otherwise.
pub fn aligned_rows(gold: &ResultTable, pred: &ResultTable) -> (HashSet<Row>, HashSet<Row>) {
    let gold_rows: HashSet<Row> = gold.rows.iter().cloned().collect();
    let same_names = gold.variables.len() == pred.variables.len()
        && gold.variables.iter().all(|v| pred.variables.contains(v))
        && pred.variables.iter().collect::<HashSet<_>>().len() == pred.variables.len();
    let pred_rows = if same_names {
        let order: Vec<usize> = gold
            .variables
            .iter()
            .map(|v| pred.variables.iter().position(|p| p == v).expect("same names"))
            .collect();
        pred.rows
            .iter()
            .map(|r| order.iter().map(|&i| r.get(i).cloned().flatten()).collect())
            .collect()
    } else {
        pred.rows.iter().cloned().collect()
    };
    (gold_rows, pred_rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalItem {
    pub id: String,
    pub question: String,
    pub sparql: String,
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Format {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

pub fn load_dataset(path: &Path) -> Result<Vec<EvalItem>, EvalError> {
    let io = |source| EvalError::Io {
        path: path.to_path_buf(),
        source,
    };
    let reader = BufReader::new(File::open(path).map_err(io)?);
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line.map_err(io)?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| EvalError::Format {
            path: path.to_path_buf(),
            line: n + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub id: String,
    pub question: String,
    pub gold_rows: Vec<Row>,
    pub pred_rows: Option<Vec<Row>>,
    pub sparql: Option<String>,
    pub f1: f64,
    pub em: u8,
    /// Seconds.
    pub wall_time: f64,
    pub failure: Option<String>,
    /// The gold query itself failed; excluded from averages.
    pub dataset_error: bool,
    pub generation_ms: f64,
    pub search_ms: f64,
    pub rank_ms: f64,
    pub validation_ms: f64,
}

impl EvalRecord {
    pub fn consistent(&self) -> bool {
        (self.em == 1) == exact_match(self.f1) && (0.0..=1.0).contains(&self.f1)
    }
}

fn sorted(rows: HashSet<Row>) -> Vec<Row> {
    let mut v: Vec<Row> = rows.into_iter().collect();
    v.sort();
    v
}

/// Runs one item; never fails, problems end up in `failure`.
pub fn evaluate_item(pipeline: &Pipeline, item: &EvalItem) -> EvalRecord {
    let started = Instant::now();
    let cfg = pipeline.config();
    let conn = pipeline.connection();
    let mut rec = EvalRecord {
        id: item.id.clone(),
        question: item.question.clone(),
        gold_rows: Vec::new(),
        pred_rows: None,
        sparql: None,
        f1: 0.0,
        em: 0,
        wall_time: 0.0,
        failure: None,
        dataset_error: false,
        generation_ms: 0.0,
        search_ms: 0.0,
        rank_ms: 0.0,
        validation_ms: 0.0,
    };
    let gold = match conn.execute(&item.sparql, cfg.kg_timeout()) {
        Ok(t) => t,
        Err(e) => {
            rec.dataset_error = true;
            rec.failure = Some(format!("gold_error: {e}"));
            rec.wall_time = started.elapsed().as_secs_f64();
            return rec;
        }
    };
    let opts = AskOptions {
        gold_sparql: Some(item.sparql.clone()),
        config: None,
    };
    let answer = pipeline.answer(&item.question, &opts);
    rec.wall_time = started.elapsed().as_secs_f64();
    let gold_set: HashSet<Row> = gold.rows.iter().cloned().collect();
    let answer = match answer {
        Ok(a) => a,
        Err(e) => {
            rec.gold_rows = sorted(gold_set);
            rec.failure = Some(format!("pipeline_error: {e}"));
            return rec;
        }
    };
    rec.generation_ms = answer.timings.generation_ms;
    rec.search_ms = answer.timings.search_ms;
    rec.rank_ms = answer.timings.rank_ms;
    rec.validation_ms = answer.timings.validation_ms;
    rec.sparql = answer.sparql.clone();
    let pred = match (answer.status, answer.result) {
        (Status::Answered, Some(table)) => table,
        _ => {
            rec.gold_rows = sorted(gold_set);
            rec.failure = Some(match answer.reason.as_deref() {
                Some("timeout") => "timeout".to_string(),
                Some(r) => format!("no_valid_query: {r}"),
                None => "no_valid_query".to_string(),
            });
            return rec;
        }
    };
    let (g, p) = aligned_rows(&gold, &pred);
    rec.f1 = row_f1::<f64, Row>(&g, &p);
    rec.em = exact_match(rec.f1) as u8;
    rec.gold_rows = sorted(g);
    rec.pred_rows = Some(sorted(p));
    rec
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub generation_ms: f64,
    pub search_ms: f64,
    pub rank_ms: f64,
    pub validation_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub questions: usize,
    pub evaluated: usize,
    pub dataset_errors: usize,
    pub mean_f1: f64,
    pub mean_em: f64,
    /// Seconds per question.
    pub mean_wall_time: f64,
    pub median_wall_time: f64,
    /// Failure category -> count.
    pub failures: BTreeMap<String, usize>,
    /// Mean milliseconds per evaluated question.
    pub timing: TimingReport,
    pub config_hash: String,
    /// SHA-256 over the records without timings.
    pub checksum: String,
}

fn failure_category(f: &str) -> String {
    f.split(':').next().unwrap_or(f).trim().to_string()
}

pub fn checksum(records: &[EvalRecord]) -> String {
    let mut sorted: Vec<&EvalRecord> = records.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    let mut h = Sha256::new();
    for r in sorted {
        let line = serde_json::json!({
            "id": r.id,
            "gold_rows": r.gold_rows,
            "pred_rows": r.pred_rows,
            "sparql": r.sparql,
            "f1": r.f1,
            "em": r.em,
            "failure": r.failure,
        });
        h.update(line.to_string().as_bytes());
        h.update(b"\n");
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

pub fn report(records: &[EvalRecord], config_hash: &str) -> Report {
    let scored: Vec<&EvalRecord> = records.iter().filter(|r| !r.dataset_error).collect();
    let f1: Vec<f64> = scored.iter().map(|r| r.f1).collect();
    let em: Vec<f64> = scored.iter().map(|r| r.em as f64).collect();
    let wall: Vec<f64> = scored.iter().map(|r| r.wall_time).collect();
    let mut failures = BTreeMap::new();
    for r in records {
        if let Some(f) = &r.failure {
            *failures.entry(failure_category(f)).or_insert(0) += 1;
        }
    }
    let avg = |f: fn(&EvalRecord) -> f64| mean(&scored.iter().map(|r| f(r)).collect::<Vec<_>>()).unwrap_or(0.0);
    Report {
        questions: records.len(),
        evaluated: scored.len(),
        dataset_errors: records.len() - scored.len(),
        mean_f1: mean(&f1).unwrap_or(0.0),
        mean_em: mean(&em).unwrap_or(0.0),
        mean_wall_time: mean(&wall).unwrap_or(0.0),
        median_wall_time: median(&wall).unwrap_or(0.0),
        failures,
        timing: TimingReport {
            generation_ms: avg(|r| r.generation_ms),
            search_ms: avg(|r| r.search_ms),
            rank_ms: avg(|r| r.rank_ms),
            validation_ms: avg(|r| r.validation_ms),
        },
        config_hash: config_hash.to_string(),
        checksum: checksum(records),
    }
}

/// Evaluates the dataset on `workers` threads; records come back sorted by id.
pub fn run_benchmark(pipeline: &Pipeline, dataset: &[EvalItem], workers: usize) -> (Vec<EvalRecord>, Report) {
    let next = AtomicUsize::new(0);
    let out: Mutex<Vec<EvalRecord>> = Mutex::new(Vec::with_capacity(dataset.len()));
    std::thread::scope(|s| {
        for _ in 0..workers.clamp(1, dataset.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(item) = dataset.get(i) else { break };
                let rec = evaluate_item(pipeline, item);
                log::info!("{}: f1 {:.3}{}", rec.id, rec.f1, rec.failure.as_deref().map(|f| format!(" ({f})")).unwrap_or_default());
                out.lock().unwrap_or_else(|e| e.into_inner()).push(rec);
            });
        }
    });
    let mut records = out.into_inner().unwrap_or_else(|e| e.into_inner());
    records.sort_by(|a, b| a.id.cmp(&b.id));
    let rep = report(&records, &pipeline.config().hash());
    (records, rep)
}

pub fn write_records_jsonl(records: &[EvalRecord], mut out: impl Write) -> std::io::Result<()> {
    for r in records {
        writeln!(out, "{}", serde_json::to_string(r).expect("serializable"))?;
    }
    Ok(())
}

pub fn write_records_tsv(records: &[EvalRecord], mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "id\tf1\tem\twall_time\tfailure\tsparql")?;
    let clean = |s: &str| s.replace(['\t', '\n', '\r'], " ");
    for r in records {
        writeln!(
            out,
            "{}\t{:.4}\t{}\t{:.4}\t{}\t{}",
            clean(&r.id),
            r.f1,
            r.em,
            r.wall_time,
            clean(r.failure.as_deref().unwrap_or("")),
            clean(r.sparql.as_deref().unwrap_or(""))
        )?;
    }
    Ok(())
}

//! Client for the external language-model service.
//!
//! Two JSON endpoints are used:
//!
//! * `POST {base}/generate` with `{prompt, n, temperature, top_p, max_tokens}`
//!   answering `{"sequences": [{"text": ..., "logprob": ...}]}`;
//! * `POST {base}/score` with `{prompt, candidate_tokens, max_tokens: 1}`
//!   answering `{"scores": {"A": -0.1, ...}}` (next-token log-scores).

use std::collections::HashMap;
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use reqwest::blocking::Client;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LmError {
    #[error("language model service timed out")]
    Timeout,
    #[error("language model service unreachable: {0}")]
    Transport(String),
    #[error("language model service answered badly: {0}")]
    Protocol(String),
}

impl LmError {
    /// The service could not be reached at all.
    pub fn is_unavailable(&self) -> bool {
        matches!(self, LmError::Transport(_) | LmError::Timeout)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GenerateRequest<'a> {
    pub prompt: &'a str,
    pub n: usize,
    pub temperature: f64,
    pub top_p: f64,
    pub max_tokens: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sequence {
    pub text: String,
    pub logprob: f64,
}

#[derive(Debug, Deserialize)]
struct GenerateResponse {
    sequences: Vec<Sequence>,
}

#[derive(Debug, Serialize)]
struct ScoreRequest<'a> {
    prompt: &'a str,
    candidate_tokens: &'a [String],
    max_tokens: usize,
}

#[derive(Debug, Deserialize)]
struct ScoreResponse {
    scores: HashMap<String, f64>,
}

/// Counting gate bounding concurrent requests.
#[derive(Debug)]
struct InFlight {
    max: usize,
    current: Mutex<usize>,
    freed: Condvar,
}

struct Permit<'a>(&'a InFlight);

impl InFlight {
    fn acquire(&self) -> Permit<'_> {
        let mut n = self.current.lock().unwrap_or_else(|e| e.into_inner());
        while *n >= self.max {
            n = self.freed.wait(n).unwrap_or_else(|e| e.into_inner());
        }
        *n += 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let mut n = self.0.current.lock().unwrap_or_else(|e| e.into_inner());
        *n -= 1;
        self.0.freed.notify_one();
    }
}

#[derive(Debug)]
pub struct LmClient {
    base_url: String,
    client: Client,
    timeout: Duration,
    in_flight: InFlight,
}

impl LmClient {
    pub fn new(base_url: &str, timeout: Duration, max_in_flight: usize) -> Result<Self, LmError> {
        let client = Client::builder()
            .user_agent(concat!("kgqa/", env!("CARGO_PKG_VERSION")))
            .build()
            .map_err(|e| LmError::Transport(e.to_string()))?;
        Ok(Self {
            base_url: base_url.trim_end_matches('/').to_string(),
            client,
            timeout,
            in_flight: InFlight {
                max: max_in_flight.max(1),
                current: Mutex::new(0),
                freed: Condvar::new(),
            },
        })
    }

    pub fn base_url(&self) -> &str {
        &self.base_url
    }

    fn post<T: Serialize + ?Sized, R: for<'de> Deserialize<'de>>(&self, path: &str, body: &T) -> Result<R, LmError> {
        let _permit = self.in_flight.acquire();
        let response = self
            .client
            .post(format!("{}/{path}", self.base_url))
            .timeout(self.timeout)
            .json(body)
            .send()
            .map_err(|e| {
                if e.is_timeout() {
                    LmError::Timeout
                } else {
                    LmError::Transport(e.to_string())
                }
            })?;
        let status = response.status();
        if !status.is_success() {
            return Err(LmError::Protocol(format!("HTTP {status} from /{path}")));
        }
        let text = response.text().map_err(|e| LmError::Transport(e.to_string()))?;
        serde_json::from_str(&text).map_err(|e| LmError::Protocol(format!("/{path}: {e}")))
    }

    pub fn generate(&self, req: &GenerateRequest<'_>) -> Result<Vec<Sequence>, LmError> {
        let resp: GenerateResponse = self.post("generate", req)?;
        Ok(resp.sequences)
    }

    /// Next-token log-scores for the candidate tokens the service reported.
    pub fn score(&self, prompt: &str, candidate_tokens: &[String]) -> Result<HashMap<String, f64>, LmError> {
        let resp: ScoreResponse = self.post(
            "score",
            &ScoreRequest {
                prompt,
                candidate_tokens,
                max_tokens: 1,
            },
        )?;
        Ok(resp.scores)
    }

    /// Readiness probe: anything answering HTTP at the base URL counts.
    pub fn ping(&self) -> bool {
        self.client
            .get(&self.base_url)
            .timeout(Duration::from_secs(2))
            .send()
            .is_ok()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    #[test]
    fn in_flight_never_exceeds_limit() {
        let gate = Arc::new(InFlight {
            max: 2,
            current: Mutex::new(0),
            freed: Condvar::new(),
        });
        let peak = Arc::new(Mutex::new(0usize));
        let handles: Vec<_> = (0..8)
            .map(|_| {
                let gate = gate.clone();
                let peak = peak.clone();
                std::thread::spawn(move || {
                    let _p = gate.acquire();
                    let now = *gate.current.lock().unwrap();
                    let mut pk = peak.lock().unwrap();
                    *pk = (*pk).max(now);
                    drop(pk);
                    std::thread::sleep(Duration::from_millis(5));
                })
            })
            .collect();
        for h in handles {
            h.join().unwrap();
        }
        assert!(*peak.lock().unwrap() <= 2);
        assert_eq!(*gate.current.lock().unwrap(), 0);
    }

    #[test]
    fn unreachable_service() {
        let c = LmClient::new("http://127.0.0.1:9", Duration::from_secs(1), 1).unwrap();
        let err = c.score("p", &["A".into()]).unwrap_err();
        assert!(err.is_unavailable());
        assert!(!c.ping());
    }
}

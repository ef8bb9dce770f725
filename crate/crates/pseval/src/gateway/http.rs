//! Live HTTP backends: an OpenAI-style chat judge and a Tavily-style search.
//!
//! These adapters are configured entirely through environment variables and
//! exist for real evaluations; the test suite never constructs them. Every
//! outbound request increments [`NETWORK_CALLS`], which deterministic runs
//! assert stays at zero.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;

use serde_json::Value;

use super::{GatewayError, JudgeClient, JudgeRequest, SearchClient, SearchHit};

/// Total HTTP requests issued by this process.
pub static NETWORK_CALLS: AtomicUsize = AtomicUsize::new(0);

/// Reads the count of HTTP requests issued so far.
pub fn network_calls() -> usize {
    NETWORK_CALLS.load(Ordering::SeqCst)
}

const REQUEST_TIMEOUT: Duration = Duration::from_secs(60);

fn require_env(name: &str) -> Result<String, GatewayError> {
    std::env::var(name).map_err(|_| GatewayError::Backend(format!("{name} is not set")))
}

fn classify_reqwest(error: reqwest::Error) -> GatewayError {
    let retryable = error.is_timeout() || error.is_connect();
    GatewayError::Network { message: error.to_string(), retryable }
}

/// Chat-completions judge speaking the OpenAI wire format.
///
/// Configuration: `PSEVAL_JUDGE_URL` (full chat completions endpoint),
/// `PSEVAL_JUDGE_API_KEY`, `PSEVAL_JUDGE_MODEL`.
pub struct HttpJudgeClient {
    id: String,
    url: String,
    api_key: String,
    model: String,
    client: reqwest::blocking::Client,
}

impl HttpJudgeClient {
    pub fn from_env(id: &str) -> Result<HttpJudgeClient, GatewayError> {
        Ok(HttpJudgeClient {
            id: id.to_string(),
            url: require_env("PSEVAL_JUDGE_URL")?,
            api_key: require_env("PSEVAL_JUDGE_API_KEY")?,
            model: require_env("PSEVAL_JUDGE_MODEL")?,
            client: reqwest::blocking::Client::builder()
                .timeout(REQUEST_TIMEOUT)
                .build()
                .map_err(|e| GatewayError::Backend(e.to_string()))?,
        })
    }
}

impl JudgeClient for HttpJudgeClient {
    fn id(&self) -> &str {
        &self.id
    }

    fn complete(&self, request: &JudgeRequest) -> Result<String, GatewayError> {
        NETWORK_CALLS.fetch_add(1, Ordering::SeqCst);
        let body = serde_json::json!({
            "model": self.model,
            "temperature": request.temperature,
            "messages": [{"role": "user", "content": request.prompt}],
        });
        let response = self
            .client
            .post(&self.url)
            .bearer_auth(&self.api_key)
            .json(&body)
            .send()
            .map_err(classify_reqwest)?;
        let status = response.status();
        if !status.is_success() {
            return Err(GatewayError::Network {
                message: format!("judge endpoint returned {status}"),
                retryable: status.is_server_error(),
            });
        }
        let value: Value = response.json().map_err(classify_reqwest)?;
        value
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(String::from)
            .ok_or_else(|| GatewayError::Backend("judge response lacks choices[0].message.content".into()))
    }
}

/// Web-search backend speaking the Tavily wire format.
///
/// Configuration: `PSEVAL_SEARCH_URL`, `PSEVAL_SEARCH_API_KEY`.
pub struct HttpSearchClient {
    id: String,
    url: String,
    api_key: String,
    rate_per_second: f64,
    client: reqwest::blocking::Client,
}

impl HttpSearchClient {
    pub fn from_env(id: &str, rate_per_second: f64) -> Result<HttpSearchClient, GatewayError> {
        Ok(HttpSearchClient {
            id: id.to_string(),
            url: require_env("PSEVAL_SEARCH_URL")?,
            api_key: require_env("PSEVAL_SEARCH_API_KEY")?,
            rate_per_second,
            client: reqwest::blocking::Client::builder()
                .timeout(REQUEST_TIMEOUT)
                .build()
                .map_err(|e| GatewayError::Backend(e.to_string()))?,
        })
    }
}

impl SearchClient for HttpSearchClient {
    fn id(&self) -> &str {
        &self.id
    }

    fn rate_limit(&self) -> f64 {
        self.rate_per_second
    }

    fn depth(&self) -> &str {
        "advanced"
    }

    fn search(&self, query: &str, depth: &str) -> Result<Vec<SearchHit>, GatewayError> {
        NETWORK_CALLS.fetch_add(1, Ordering::SeqCst);
        let body = serde_json::json!({
            "api_key": self.api_key,
            "query": query,
            "search_depth": depth,
        });
        let response = self.client.post(&self.url).json(&body).send().map_err(classify_reqwest)?;
        let status = response.status();
        if !status.is_success() {
            return Err(GatewayError::Network {
                message: format!("search endpoint returned {status}"),
                retryable: status.is_server_error() || status.as_u16() == 429,
            });
        }
        let value: Value = response.json().map_err(classify_reqwest)?;
        let results = value
            .get("results")
            .and_then(Value::as_array)
            .ok_or_else(|| GatewayError::Backend("search response lacks a results array".into()))?;
        Ok(results
            .iter()
            .filter_map(|item| {
                let url = item.get("url").and_then(Value::as_str)?;
                let snippet = item.get("content").and_then(Value::as_str).unwrap_or("");
                Some(SearchHit { url: url.to_string(), snippet: snippet.to_string() })
            })
            .collect())
    }
}

use std::time::{Duration, Instant};

use serde_json::Value;

use crate::CliError;

/// Blocking JSON client for the node service.
pub struct NodeClient {
    base: String,
    http: ureq::Agent,
}

impl NodeClient {
    pub fn new(base: &str) -> Self {
        let http = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(90)))
            .build()
            .into();
        NodeClient {
            base: base.trim_end_matches('/').to_string(),
            http,
        }
    }

    fn decode(&self, url: &str, result: Result<ureq::http::Response<ureq::Body>, ureq::Error>) -> Result<(u16, Value), CliError> {
        let mut resp = result.map_err(|e| CliError::Unreachable(format!("{url}: {e}")))?;
        let status = resp.status().as_u16();
        let body: Value = resp
            .body_mut()
            .read_json()
            .map_err(|e| CliError::Unreachable(format!("{url}: unreadable response: {e}")))?;
        Ok((status, body))
    }

    pub fn get(&self, path: &str) -> Result<Value, CliError> {
        let url = format!("{}{path}", self.base);
        let (status, body) = self.decode(&url, self.http.get(&url).call())?;
        if status == 200 {
            Ok(body)
        } else {
            Err(CliError::Node(body))
        }
    }

    /// Posts a signed transaction; a 422 rejection is reported as [`CliError::Rejected`].
    pub fn submit(&self, tx_json: &Value) -> Result<Value, CliError> {
        let url = format!("{}/tx", self.base);
        let (status, body) = self.decode(&url, self.http.post(&url).send_json(tx_json))?;
        match status {
            200 => Ok(body),
            422 => Err(CliError::Rejected(body)),
            _ => Err(CliError::Node(body)),
        }
    }

    /// Polls the transaction until it is in a block.
    pub fn wait_receipt(&self, tx_hash: &str, timeout: Duration) -> Result<Value, CliError> {
        let deadline = Instant::now() + timeout;
        loop {
            let r = self.get(&format!("/tx/{tx_hash}"))?;
            if r["status"] != "pending" {
                return Ok(r);
            }
            if Instant::now() >= deadline {
                return Err(CliError::Timeout(format!("{tx_hash} still pending after {timeout:?}")));
            }
            std::thread::sleep(Duration::from_millis(200));
        }
    }
}

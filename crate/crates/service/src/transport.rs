use std::time::Duration;

use shotadvisor::corpus::bugzilla::{HttpResponse, Transport};
use shotadvisor::{Error, Result};

/// Blocking HTTP GET over reqwest.
pub struct ReqwestTransport {
    client: reqwest::blocking::Client,
}

impl ReqwestTransport {
    pub fn new() -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(60))
            .user_agent(concat!("shotadvisor/", env!("CARGO_PKG_VERSION")))
            .build()
            .map_err(|e| Error::Transport {
                status: 0,
                message: e.to_string(),
            })?;
        Ok(ReqwestTransport { client })
    }
}

impl Transport for ReqwestTransport {
    fn get(&self, url: &str) -> Result<HttpResponse> {
        let resp = self
            .client
            .get(url)
            .header("Accept", "application/json")
            .send()
            .map_err(|e| Error::Transport {
                status: 0,
                message: e.to_string(),
            })?;
        let status = resp.status().as_u16();
        let body = resp.text().map_err(|e| Error::Transport {
            status,
            message: e.to_string(),
        })?;
        Ok(HttpResponse { status, body })
    }
}

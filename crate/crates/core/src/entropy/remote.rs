// SPDX-License-Identifier: Apache-2.0

//! Client for a remote entropy service.
//!
//! Protocol: `GET <endpoint>/entropy?n=<bytes>` answers status 200 with a
//! body of exactly `n` raw bytes. Any other status or length is a
//! [`EntropyError::BadResponse`]. Transport security is the deployment's
//! concern; the client speaks plain HTTP.

use std::time::Duration;

use super::{
    read_with_retry, Diagnostics, EntropyBlock, EntropyError, EntropySource, FetchStatus,
    ResistanceClass, SourceDescriptor, SourceKind,
};

/// Most bytes the service hands out per request.
pub const REMOTE_MAX_BYTES: usize = 1024;

const DEFAULT_TIMEOUT: Duration = Duration::from_secs(5);

pub struct RemoteSource {
    desc: SourceDescriptor,
    url: String,
    agent: ureq::Agent,
}

impl RemoteSource {
    pub fn new(endpoint: &str) -> Self {
        Self::with_timeout(endpoint, DEFAULT_TIMEOUT)
    }

    pub fn with_timeout(endpoint: &str, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        RemoteSource {
            desc: SourceDescriptor::new("remote", SourceKind::RemoteService)
                .with_block_size(REMOTE_MAX_BYTES),
            url: format!("{}/entropy", endpoint.trim_end_matches('/')),
            agent,
        }
    }

    pub fn fetch(&self, n: usize, diag: &Diagnostics) -> Result<EntropyBlock, EntropyError> {
        let block = read_with_retry(self, n, diag)?;
        // The service's output quality is taken on trust.
        EntropyBlock::new(block.bytes().to_vec(), block.source_id(), ResistanceClass::Unknown)
    }
}

impl EntropySource for RemoteSource {
    fn descriptor(&self) -> &SourceDescriptor {
        &self.desc
    }

    fn fetch_unit(&self) -> usize {
        REMOTE_MAX_BYTES
    }

    fn try_fetch(&self, buf: &mut [u8]) -> Result<FetchStatus, EntropyError> {
        let n = buf.len();
        let mut resp = self
            .agent
            .get(&self.url)
            .query("n", n.to_string())
            .call()
            .map_err(|e| match e {
                ureq::Error::Timeout(t) => EntropyError::Timeout(t.to_string()),
                other => EntropyError::Io(other.to_string()),
            })?;
        let status = resp.status().as_u16();
        if status != 200 {
            return Err(EntropyError::BadResponse(format!("status {status}")));
        }
        let body = resp.body_mut().read_to_vec().map_err(|e| match e {
            ureq::Error::Timeout(t) => EntropyError::Timeout(t.to_string()),
            other => EntropyError::BadResponse(other.to_string()),
        })?;
        if body.len() != n {
            return Err(EntropyError::BadResponse(format!(
                "expected {n} bytes, got {}",
                body.len()
            )));
        }
        buf.copy_from_slice(&body);
        Ok(FetchStatus::Ready)
    }
}

/// One-shot read of `n ≤ 1024` bytes from `endpoint`.
pub fn fetch_remote(
    endpoint: &str,
    n: usize,
    diag: &Diagnostics,
) -> Result<EntropyBlock, EntropyError> {
    RemoteSource::new(endpoint).fetch(n, diag)
}

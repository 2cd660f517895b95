//! Typed calls against the service's `/v1` endpoints.

use reliefchain_core::api::*;
use reliefchain_core::scenario::RunReport;
use reliefchain_core::Hash32;
use serde::de::DeserializeOwned;
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error("request failed: {0}")]
    Transport(#[from] reqwest::Error),
    #[error("{} ({status})", .error.message)]
    Api { status: u16, error: ApiError },
}

impl ClientError {
    pub fn kind(&self) -> Option<ErrorKind> {
        match self {
            ClientError::Api { error, .. } => Some(error.kind),
            ClientError::Transport(_) => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Client {
    base: String,
    http: reqwest::Client,
}

impl Client {
    /// `base` is the server root, e.g. `http://127.0.0.1:8080`.
    pub fn new(base: impl Into<String>) -> Self {
        Client { base: base.into().trim_end_matches('/').to_owned(), http: reqwest::Client::new() }
    }

    fn url(&self, path: &str) -> String {
        format!("{}{API_PREFIX}{path}", self.base)
    }

    async fn decode<T: DeserializeOwned>(resp: reqwest::Response) -> Result<T, ClientError> {
        let status = resp.status();
        if status.is_success() {
            return Ok(resp.json().await?);
        }
        let error = resp
            .json::<ApiError>()
            .await
            .unwrap_or_else(|e| ApiError { kind: ErrorKind::Internal, message: format!("unreadable error body: {e}") });
        Err(ClientError::Api { status: status.as_u16(), error })
    }

    async fn post<B: Serialize, T: DeserializeOwned>(&self, path: &str, body: &B) -> Result<T, ClientError> {
        Self::decode(self.http.post(self.url(path)).json(body).send().await?).await
    }

    async fn get<T: DeserializeOwned>(&self, path: &str) -> Result<T, ClientError> {
        Self::decode(self.http.get(self.url(path)).send().await?).await
    }

    pub async fn health(&self) -> Result<Health, ClientError> {
        self.get("/health").await
    }

    pub async fn run(&self, req: &RunRequest) -> Result<RunCreated, ClientError> {
        self.post("/runs", req).await
    }

    pub async fn report(&self, id: u64) -> Result<RunReport, ClientError> {
        self.get(&format!("/runs/{id}")).await
    }

    pub async fn chain_log(&self, id: u64) -> Result<String, ClientError> {
        let resp = self.http.get(self.url(&format!("/runs/{id}/chain-log"))).send().await?;
        if resp.status().is_success() {
            return Ok(resp.text().await?);
        }
        Self::decode(resp).await
    }

    pub async fn corpus(&self, req: &CorpusRequest) -> Result<CorpusResponse, ClientError> {
        self.post("/corpus", req).await
    }

    pub async fn verify(&self, run_dir: &str, hash: Hash32) -> Result<VerifyResponse, ClientError> {
        self.post("/verify", &VerifyRequest { run_dir: run_dir.to_owned(), hash }).await
    }
}

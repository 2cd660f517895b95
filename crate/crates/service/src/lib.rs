//! HTTP/JSON front end over the scenario driver, corpus generator and
//! persisted-run verifier. Scenario runs are CPU-bound and go to the
//! blocking pool; completed reports are kept in memory by id.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::Path;
use std::sync::{Arc, Mutex};

use axum::extract::{Path as UrlPath, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use reliefchain_core::api::*;
use reliefchain_core::audit::VulnClass;
use reliefchain_core::corpus::{generate_all, generate_corpus};
use reliefchain_core::forensics::{ForensicsError, MemStore, OffChainStore};
use reliefchain_core::run_dir::{self, RunDirError};
use reliefchain_core::scenario::{forensics_operator, run_scenario, RunReport, Scenario, ScenarioError};
use tokio::net::TcpListener;

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("{0}")]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    RunDir(#[from] RunDirError),
    #[error(transparent)]
    Forensics(#[from] ForensicsError),
    #[error("{0}")]
    Invalid(String),
    #[error("{0}")]
    UnknownClass(String),
    #[error("no run with id {0}")]
    NoRun(u64),
    #[error("worker task failed: {0}")]
    Join(#[from] tokio::task::JoinError),
}

impl ServiceError {
    fn kind(&self) -> ErrorKind {
        match self {
            ServiceError::Scenario(ScenarioError::Parse(_)) => ErrorKind::Parse,
            ServiceError::Scenario(ScenarioError::Invalid(_)) | ServiceError::Invalid(_) => ErrorKind::Invalid,
            ServiceError::Scenario(_) | ServiceError::Join(_) => ErrorKind::Internal,
            ServiceError::UnknownClass(_) => ErrorKind::UnknownClass,
            ServiceError::Forensics(ForensicsError::UnknownHash(_)) => ErrorKind::UnknownHash,
            ServiceError::Forensics(_) => ErrorKind::Internal,
            ServiceError::NoRun(_) => ErrorKind::NotFound,
            ServiceError::RunDir(_) => ErrorKind::RunDir,
        }
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let kind = self.kind();
        let status = match kind {
            ErrorKind::Parse => StatusCode::BAD_REQUEST,
            ErrorKind::Invalid | ErrorKind::UnknownClass | ErrorKind::RunDir => StatusCode::UNPROCESSABLE_ENTITY,
            ErrorKind::UnknownHash | ErrorKind::NotFound => StatusCode::NOT_FOUND,
            ErrorKind::Internal => StatusCode::INTERNAL_SERVER_ERROR,
        };
        (status, Json(ApiError { kind, message: self.to_string() })).into_response()
    }
}

#[derive(Default)]
struct Runs {
    next: u64,
    reports: HashMap<u64, StoredRun>,
}

struct StoredRun {
    report: RunReport,
    chain_log: String,
}

#[derive(Clone, Default)]
pub struct AppState {
    runs: Arc<Mutex<Runs>>,
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/v1/health", get(health))
        .route("/v1/runs", post(create_run))
        .route("/v1/runs/{id}", get(get_run))
        .route("/v1/runs/{id}/chain-log", get(get_chain_log))
        .route("/v1/corpus", post(corpus))
        .route("/v1/verify", post(verify))
        .with_state(state)
}

/// Serves on an already-bound listener until the task is dropped.
pub async fn serve(listener: TcpListener) -> std::io::Result<()> {
    axum::serve(listener, router(AppState::default())).await
}

/// Binds `addr` and serves in the background; returns the bound address.
pub async fn spawn(addr: SocketAddr) -> std::io::Result<SocketAddr> {
    let listener = TcpListener::bind(addr).await?;
    let bound = listener.local_addr()?;
    tokio::spawn(async move {
        if let Err(e) = serve(listener).await {
            tracing::error!("service stopped: {e}");
        }
    });
    Ok(bound)
}

async fn health() -> Json<Health> {
    Json(Health { status: "ok".into(), version: env!("CARGO_PKG_VERSION").into() })
}

fn execute(req: RunRequest) -> Result<(RunReport, String), ServiceError> {
    let mut sc = Scenario::from_json(&req.scenario)?;
    if let Some(seed) = req.seed {
        sc.seed = seed;
    }
    let out = match &req.run_dir {
        Some(dir) => {
            let root = Path::new(dir);
            let out = run_scenario(&sc, run_dir::create(root)?)?;
            run_dir::save(root, &out, forensics_operator())?;
            out
        }
        None => run_scenario(&sc, Arc::new(MemStore::new()) as Arc<dyn OffChainStore>)?,
    };
    Ok((out.report, out.ledger.chain_log()))
}

async fn create_run(State(st): State<AppState>, Json(req): Json<RunRequest>) -> Result<Json<RunCreated>, ServiceError> {
    let (report, chain_log) = tokio::task::spawn_blocking(move || execute(req)).await??;
    let mut runs = st.runs.lock().unwrap();
    let id = runs.next;
    runs.next += 1;
    runs.reports.insert(id, StoredRun { report: report.clone(), chain_log });
    Ok(Json(RunCreated { id, report }))
}

async fn get_run(State(st): State<AppState>, UrlPath(id): UrlPath<u64>) -> Result<Json<RunReport>, ServiceError> {
    let runs = st.runs.lock().unwrap();
    runs.reports.get(&id).map(|r| Json(r.report.clone())).ok_or(ServiceError::NoRun(id))
}

async fn get_chain_log(State(st): State<AppState>, UrlPath(id): UrlPath<u64>) -> Result<String, ServiceError> {
    let runs = st.runs.lock().unwrap();
    runs.reports.get(&id).map(|r| r.chain_log.clone()).ok_or(ServiceError::NoRun(id))
}

async fn corpus(Json(req): Json<CorpusRequest>) -> Result<Json<CorpusResponse>, ServiceError> {
    if req.count == 0 {
        return Err(ServiceError::Invalid("corpus count must be positive".into()));
    }
    let instances = if req.class.eq_ignore_ascii_case("all") {
        generate_all(req.count, req.seed)
    } else {
        let class: VulnClass = req
            .class
            .parse()
            .map_err(|e: reliefchain_core::audit::UnknownClass| ServiceError::UnknownClass(e.to_string()))?;
        generate_corpus(class, req.count, req.seed)
    };
    Ok(Json(CorpusResponse { instances }))
}

async fn verify(Json(req): Json<VerifyRequest>) -> Result<Json<VerifyResponse>, ServiceError> {
    let hash = req.hash;
    let verdict = tokio::task::spawn_blocking(move || -> Result<_, ServiceError> {
        Ok(run_dir::load(Path::new(&req.run_dir))?.verify(&hash)?)
    })
    .await??;
    Ok(Json(VerifyResponse { hash, verdict }))
}

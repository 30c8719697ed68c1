//! HTTP JSON API over the estimation pipeline.
//!
//! Endpoints:
//! - `GET /api/datasets`
//! - `POST /api/spectra`: spectra, and bands when `bands` is given; large
//!   band runs are started as background jobs and answered with `202`
//! - `GET /api/jobs/{token}`: `409` while running, the result when done
//! - `GET /api/complex?hash=…&point=…&omega=…`: replicate cloud at one frequency
//!
//! Results are cached by config hash; the job token is that hash.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use serde::{Deserialize, Serialize};
use serde_json::json;
use tower_http::cors::CorsLayer;

use lgcs::cache::ResultCache;
use lgcs::config::{figure_config, BandSettings, FieldError, RunConfig, Source};
use lgcs::pipeline::{load_series, run, ResultRecord, RunMode};
use lgcs::{LagWindow, Order, Transform};

/// A series the API can estimate on.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub name: String,
    pub source: Source,
    pub transform: Transform,
    /// seed used when the request does not give one
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DatasetInfo {
    pub name: String,
    pub n: usize,
    pub columns: Vec<String>,
    pub transform: Transform,
    pub kind: &'static str,
}

impl Dataset {
    /// The simulated figure configurations as datasets.
    pub fn demos() -> Vec<Dataset> {
        ["gaussian-wn", "cosine", "local-trig-common", "local-trig-individual"]
            .iter()
            .map(|name| {
                let c = figure_config(name).expect("known figure");
                Dataset {
                    name: name.to_string(),
                    source: c.source,
                    transform: c.transform,
                    seed: c.seed,
                }
            })
            .collect()
    }

    pub fn csv(name: impl Into<String>, path: impl Into<PathBuf>, transform: Transform) -> Dataset {
        Dataset {
            name: name.into(),
            source: Source::Csv {
                path: path.into(),
                columns: Vec::new(),
                delimiter: ',',
            },
            transform,
            seed: 1,
        }
    }

    fn info(&self) -> Result<DatasetInfo, String> {
        let probe = RunConfig {
            source: self.source.clone(),
            transform: self.transform,
            pair: (0, 1),
            points: vec!["50::50".into()],
            bandwidth: (0.6, 0.6),
            truncation: 1,
            order: Order::One,
            window: LagWindow::TukeyHanning,
            grid_size: 2,
            bands: None,
            seed: self.seed,
            output: None,
        };
        let series = load_series(&probe).map_err(|e| e.to_string())?;
        Ok(DatasetInfo {
            name: self.name.clone(),
            n: series.len(),
            columns: series.names().to_vec(),
            transform: self.transform,
            kind: match self.source {
                Source::Model { .. } => "model",
                Source::Csv { .. } => "csv",
            },
        })
    }
}

/// Body of `POST /api/spectra`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectraRequest {
    pub dataset: String,
    #[serde(default = "default_pair")]
    pub pair: (usize, usize),
    pub points: Vec<String>,
    pub bandwidth: (f64, f64),
    pub truncation: usize,
    pub order: Order,
    #[serde(default)]
    pub window: LagWindow,
    #[serde(default = "default_grid")]
    pub grid_size: usize,
    #[serde(default)]
    pub bands: Option<BandSettings>,
    #[serde(default)]
    pub seed: Option<u64>,
}

fn default_pair() -> (usize, usize) {
    (0, 1)
}

fn default_grid() -> usize {
    1024
}

impl SpectraRequest {
    pub fn to_config(&self, dataset: &Dataset) -> RunConfig {
        RunConfig {
            source: dataset.source.clone(),
            transform: dataset.transform,
            pair: self.pair,
            points: self.points.clone(),
            bandwidth: self.bandwidth,
            truncation: self.truncation,
            order: self.order,
            window: self.window,
            grid_size: self.grid_size,
            bands: self.bands.clone(),
            seed: self.seed.unwrap_or(dataset.seed),
            output: None,
        }
    }
}

enum Job {
    Running { done: Arc<AtomicUsize>, total: usize },
    Failed(String),
}

#[derive(Clone)]
pub struct AppState {
    cache: ResultCache,
    datasets: Arc<Vec<Dataset>>,
    jobs: Arc<Mutex<HashMap<String, Job>>>,
    /// band runs with more replicates than this become background jobs
    inline_replicates: usize,
}

impl AppState {
    pub fn new(cache: ResultCache, datasets: Vec<Dataset>, inline_replicates: usize) -> Self {
        Self {
            cache,
            datasets: Arc::new(datasets),
            jobs: Arc::new(Mutex::new(HashMap::new())),
            inline_replicates,
        }
    }

    fn dataset(&self, name: &str) -> Option<&Dataset> {
        self.datasets.iter().find(|d| d.name == name)
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/datasets", get(datasets))
        .route("/api/spectra", post(spectra))
        .route("/api/jobs/{token}", get(job))
        .route("/api/complex", get(complex))
        .layer(CorsLayer::permissive())
        .with_state(state)
}

pub async fn serve(addr: SocketAddr, state: AppState) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(state)).await
}

fn json_response(status: StatusCode, body: String) -> Response {
    (status, [(header::CONTENT_TYPE, "application/json")], body).into_response()
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    json_response(status, json!({ "error": message.into() }).to_string())
}

fn field_errors(errors: &[FieldError]) -> Response {
    json_response(StatusCode::BAD_REQUEST, json!({ "errors": errors }).to_string())
}

/// Result body; the cached record text is embedded verbatim.
fn result_body(hash: &str, record: &str, cached: bool) -> Response {
    json_response(
        StatusCode::OK,
        format!("{{\"cached\":{cached},\"config_hash\":\"{hash}\",\"record\":{record}}}"),
    )
}

async fn datasets(State(state): State<AppState>) -> Response {
    let list = state.datasets.clone();
    let infos = tokio::task::spawn_blocking(move || list.iter().map(Dataset::info).collect::<Result<Vec<_>, _>>())
        .await
        .expect("dataset probe panicked");
    match infos {
        Ok(infos) => json_response(StatusCode::OK, serde_json::to_string(&infos).expect("serializable")),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e),
    }
}

async fn spectra(State(state): State<AppState>, body: String) -> Response {
    let request: SpectraRequest = match serde_json::from_str(&body) {
        Ok(r) => r,
        Err(e) => {
            return field_errors(&[FieldError {
                field: "body".into(),
                message: e.to_string(),
            }])
        }
    };
    let Some(dataset) = state.dataset(&request.dataset) else {
        return error(StatusCode::NOT_FOUND, format!("unknown dataset '{}'", request.dataset));
    };
    let config = request.to_config(dataset);
    let errors = config.field_errors();
    if !errors.is_empty() {
        return field_errors(&errors);
    }
    let mode = if config.bands.is_some() { RunMode::Bands } else { RunMode::Spectra };
    let hash = config.hash(mode.tag());
    match state.cache.get(&hash) {
        Ok(Some(record)) => return result_body(&hash, &record, true),
        Ok(None) => {}
        Err(e) => return error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
    let replicates = config.bands.as_ref().map_or(0, |b| b.replicates);
    if mode == RunMode::Bands && replicates > state.inline_replicates {
        start_job(&state, hash.clone(), config, mode, replicates);
        return json_response(
            StatusCode::ACCEPTED,
            json!({ "job": hash, "config_hash": hash, "total": replicates }).to_string(),
        );
    }
    let cache = state.cache.clone();
    let key = hash.clone();
    let outcome = tokio::task::spawn_blocking(move || {
        cache.get_or_insert_with(&key, || run(&config, mode, None).map(|r| r.to_json()))
    })
    .await
    .expect("estimation panicked");
    match outcome {
        Ok((record, cached)) => result_body(&hash, &record, cached),
        Err(e) => error(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()),
    }
}

fn start_job(state: &AppState, hash: String, config: RunConfig, mode: RunMode, total: usize) {
    let done = Arc::new(AtomicUsize::new(0));
    {
        let mut jobs = state.jobs.lock().expect("job table poisoned");
        if matches!(jobs.get(&hash), Some(Job::Running { .. })) {
            return;
        }
        jobs.insert(
            hash.clone(),
            Job::Running {
                done: done.clone(),
                total,
            },
        );
    }
    let state = state.clone();
    tokio::task::spawn_blocking(move || {
        let outcome = run(&config, mode, Some(&done)).and_then(|r| state.cache.put(&hash, &r.to_json()));
        let mut jobs = state.jobs.lock().expect("job table poisoned");
        match outcome {
            Ok(()) => {
                jobs.remove(&hash);
            }
            Err(e) => {
                jobs.insert(hash, Job::Failed(e.to_string()));
            }
        }
    });
}

async fn job(State(state): State<AppState>, Path(token): Path<String>) -> Response {
    {
        let jobs = state.jobs.lock().expect("job table poisoned");
        match jobs.get(&token) {
            Some(Job::Running { done, total }) => {
                return json_response(
                    StatusCode::CONFLICT,
                    json!({
                        "status": "running",
                        "progress": { "done": done.load(Ordering::Relaxed), "total": total }
                    })
                    .to_string(),
                )
            }
            Some(Job::Failed(msg)) => return error(StatusCode::UNPROCESSABLE_ENTITY, msg.clone()),
            None => {}
        }
    }
    match state.cache.get(&token) {
        Ok(Some(record)) => result_body(&token, &record, false),
        Ok(None) => error(StatusCode::NOT_FOUND, format!("unknown job '{token}'")),
        Err(e) => error(StatusCode::BAD_REQUEST, e.to_string()),
    }
}

#[derive(Debug, Deserialize)]
pub struct ComplexQuery {
    pub hash: String,
    /// point index, or absent / `global` for the global spectrum
    #[serde(default)]
    pub point: Option<String>,
    pub omega: f64,
}

async fn complex(State(state): State<AppState>, Query(q): Query<ComplexQuery>) -> Response {
    let record = match state.cache.get(&q.hash) {
        Ok(Some(text)) => text,
        Ok(None) => return error(StatusCode::NOT_FOUND, format!("no cached result '{}'", q.hash)),
        Err(e) => return error(StatusCode::BAD_REQUEST, e.to_string()),
    };
    let index = match q.point.as_deref() {
        None | Some("global") => None,
        Some(p) => match p.parse::<usize>() {
            Ok(i) => Some(i),
            Err(_) => {
                return field_errors(&[FieldError {
                    field: "point".into(),
                    message: format!("expected a point index or 'global', got '{p}'"),
                }])
            }
        },
    };
    let outcome = tokio::task::spawn_blocking(move || {
        let record = ResultRecord::from_json(&record)?;
        let grid = match index {
            Some(i) => record.points.get(i).map(|p| p.spectrum.grid.clone()),
            None => Some(record.global.spectrum.grid.clone()),
        }
        .ok_or_else(|| lgcs::Error::InvalidParameter("point index out of range".into()))?;
        // the UI sends the clicked frequency; use the nearest grid value
        let omega = grid.values()[grid.nearest_index(q.omega)];
        record.complex_summary(index, omega)
    })
    .await
    .expect("summary panicked");
    match outcome {
        Ok(summary) => json_response(StatusCode::OK, serde_json::to_string(&summary).expect("serializable")),
        Err(e) => error(StatusCode::BAD_REQUEST, e.to_string()),
    }
}

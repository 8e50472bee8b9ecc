//! Local HTTP service over the feasibility engine.
//!
//! All state lives in memory; a restart clears every constellation and job.
//! Request bodies are parsed by hand so that any malformed or invalid body is
//! reported as `400` with `{"error": "..."}`.

pub mod jobs;

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{delete, get, post};
use axum::{Json, Router};
use feaslab_core::{
    circles_constellation, pick_best_lambda, preset_spec, random_constellation, run_orbit, AlgorithmConfig,
    AlgorithmKind, CircleSpec, Constellation, ConstellationPreset, FinitePointSet, MapBatch, Point, Provenance,
    RandomSpec, Region, SweepParams, SweepResult,
};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tower_http::services::ServeDir;

use jobs::{Job, JobState, MapRequest};

pub const DEFAULT_PORT: u16 = 8787;

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub message: String,
}

impl ApiError {
    fn bad_request(message: impl Into<String>) -> Self {
        Self { status: StatusCode::BAD_REQUEST, message: message.into() }
    }

    fn not_found(message: impl Into<String>) -> Self {
        Self { status: StatusCode::NOT_FOUND, message: message.into() }
    }
}

impl From<feaslab_core::Error> for ApiError {
    fn from(e: feaslab_core::Error) -> Self {
        ApiError::bad_request(e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(serde_json::json!({ "error": self.message }))).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

fn parse<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("invalid request body: {e}")))
}

#[derive(Default)]
pub struct AppState {
    constellations: RwLock<HashMap<String, Arc<Constellation>>>,
    jobs: RwLock<HashMap<String, Arc<Job>>>,
    // constellation id -> id of its current cartographer job
    active: Mutex<HashMap<String, String>>,
    next_job: AtomicU64,
}

impl AppState {
    pub fn new() -> Arc<Self> {
        Arc::new(Self::default())
    }

    /// Stores `c` and returns its id. Identical geometry maps to the same id.
    pub fn insert(&self, c: Constellation) -> String {
        let id = c.fingerprint();
        self.constellations.write().unwrap().entry(id.clone()).or_insert_with(|| Arc::new(c));
        id
    }

    pub fn constellation(&self, id: &str) -> Result<Arc<Constellation>, ApiError> {
        self.constellations
            .read()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(format!("unknown constellation '{id}'")))
    }

    fn job(&self, id: &str) -> Result<Arc<Job>, ApiError> {
        self.jobs.read().unwrap().get(id).cloned().ok_or_else(|| ApiError::not_found(format!("unknown job '{id}'")))
    }
}

pub fn router(state: Arc<AppState>, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/constellation", post(create_constellation))
        .route("/api/orbit", post(orbit))
        .route("/api/sweep", post(sweep))
        .route("/api/map/start", post(map_start))
        .route("/api/map/{id}/page", get(map_page))
        .route("/api/map/{id}", delete(map_cancel))
        .with_state(state);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

pub async fn serve(addr: SocketAddr, static_dir: Option<PathBuf>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(AppState::new(), static_dir)).await
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum ConstellationBody {
    Random {
        seed: u64,
        num_sets: usize,
        max_points_per_set: usize,
        #[serde(default = "Region::local")]
        region: Region,
    },
    Preset {
        preset: String,
        seed: Option<u64>,
    },
    Circles {
        sets: Vec<Vec<feaslab_core::Ring>>,
    },
    Explicit {
        sets: Vec<Vec<Point>>,
        feasible_hint: Option<Point>,
    },
}

#[derive(Serialize)]
pub struct ConstellationView<'a> {
    pub id: String,
    pub num_sets: usize,
    pub sets: Vec<&'a [Point]>,
    pub region: Region,
    pub feasible_hint: Option<Point>,
    pub provenance: &'a Provenance,
}

fn build_constellation(body: ConstellationBody) -> feaslab_core::Result<Constellation> {
    match body {
        ConstellationBody::Random { seed, num_sets, max_points_per_set, region } => {
            random_constellation(&RandomSpec { seed, num_sets, max_points_per_set, region })
        }
        ConstellationBody::Preset { preset, seed } => {
            let preset: ConstellationPreset = preset.parse()?;
            match seed {
                Some(seed) => random_constellation(&preset_spec(preset, seed)),
                None => Ok(preset.reference()),
            }
        }
        ConstellationBody::Circles { sets } => circles_constellation(&CircleSpec { sets }),
        ConstellationBody::Explicit { sets, feasible_hint } => {
            let sets = sets.into_iter().map(FinitePointSet::new).collect::<feaslab_core::Result<Vec<_>>>()?;
            let hint = feasible_hint.or_else(|| {
                let first = sets.first()?;
                first.points().iter().copied().find(|&p| sets.iter().all(|s| s.contains(p)))
            });
            Constellation::new(sets, hint)
        }
    }
}

async fn create_constellation(State(state): State<Arc<AppState>>, body: Bytes) -> Response {
    let result = (|| {
        let c = build_constellation(parse(&body)?)?;
        let id = state.insert(c);
        state.constellation(&id)
    })();
    match result {
        Ok(c) => Json(ConstellationView {
            id: c.fingerprint(),
            num_sets: c.num_sets(),
            sets: c.sets().iter().map(|s| s.points()).collect(),
            region: c.region(),
            feasible_hint: c.feasible_hint(),
            provenance: c.provenance(),
        })
        .into_response(),
        Err(e) => e.into_response(),
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct OrbitBody {
    constellation_id: String,
    kind: AlgorithmKind,
    lambda: f64,
    start: Point,
    epsilon: Option<f64>,
    max_iterations: Option<usize>,
}

fn config_for(
    kind: AlgorithmKind,
    lambda: f64,
    epsilon: Option<f64>,
    cap: Option<usize>,
) -> Result<AlgorithmConfig, ApiError> {
    let base = AlgorithmConfig::default_for(kind);
    Ok(AlgorithmConfig::with_limits(kind, lambda, epsilon.unwrap_or(base.epsilon), cap.unwrap_or(base.max_iterations))?)
}

async fn orbit(State(state): State<Arc<AppState>>, body: Bytes) -> ApiResult<feaslab_core::OrbitTrace> {
    let req: OrbitBody = parse(&body)?;
    let c = state.constellation(&req.constellation_id)?;
    let config = config_for(req.kind, req.lambda, req.epsilon, req.max_iterations)?;
    if !req.start.is_finite() {
        return Err(ApiError::bad_request("start must be finite"));
    }
    Ok(Json(run_orbit(&config, &c, req.start)?))
}

/// `"local"`, `"global"` or an explicit rectangle.
#[derive(Deserialize)]
#[serde(untagged)]
enum RegionArg {
    Named(String),
    Custom(Region),
}

fn region_of(arg: Option<RegionArg>) -> Result<Region, ApiError> {
    let region = match arg {
        None => Region::local(),
        Some(RegionArg::Named(name)) => match name.as_str() {
            "local" => Region::local(),
            "global" => Region::global(),
            other => return Err(ApiError::bad_request(format!("unknown region '{other}'"))),
        },
        Some(RegionArg::Custom(r)) => r,
    };
    region.validate()?;
    Ok(region)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepBody {
    constellation_id: String,
    kind: AlgorithmKind,
    n_lambda: Option<usize>,
    n_starts: Option<usize>,
    region: Option<RegionArg>,
}

#[derive(Serialize)]
pub struct SweepView {
    #[serde(flatten)]
    pub sweep: SweepResult,
    pub best_lambda: f64,
}

async fn sweep(State(state): State<Arc<AppState>>, body: Bytes) -> ApiResult<SweepView> {
    let req: SweepBody = parse(&body)?;
    let c = state.constellation(&req.constellation_id)?;
    let params = SweepParams::new(req.kind, region_of(req.region)?).with_counts(
        req.n_lambda.unwrap_or(feaslab_core::experiments::DEFAULT_N_LAMBDA),
        req.n_starts.unwrap_or(feaslab_core::experiments::DEFAULT_N_STARTS),
    );
    let sweep = tokio::task::spawn_blocking(move || feaslab_core::experiments::run_sweep(&c, &params))
        .await
        .map_err(|e| ApiError { status: StatusCode::INTERNAL_SERVER_ERROR, message: e.to_string() })??;
    let best_lambda = pick_best_lambda(&sweep)?;
    Ok(Json(SweepView { sweep, best_lambda }))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MapBody {
    constellation_id: String,
    kind: AlgorithmKind,
    lambda: f64,
    region: Option<RegionArg>,
    budget: u64,
    chunk: u64,
    epsilon: Option<f64>,
    max_iterations: Option<usize>,
}

#[derive(Serialize)]
pub struct JobView {
    pub job_id: String,
    pub constellation_id: String,
    pub total_pages: u64,
    pub pages_available: usize,
    #[serde(flatten)]
    pub state: JobState,
}

fn job_view(job: &Job) -> JobView {
    // Read the state first so a reported Done always comes with every page.
    let state = job.state();
    JobView {
        job_id: job.id.clone(),
        constellation_id: job.constellation_id.clone(),
        total_pages: job.total_pages,
        pages_available: job.pages_available(),
        state,
    }
}

async fn map_start(State(state): State<Arc<AppState>>, body: Bytes) -> ApiResult<JobView> {
    let req: MapBody = parse(&body)?;
    let c = state.constellation(&req.constellation_id)?;
    let request = MapRequest {
        config: config_for(req.kind, req.lambda, req.epsilon, req.max_iterations)?,
        region: region_of(req.region)?,
        budget: req.budget,
        chunk: req.chunk,
    };
    // Validate up front so bad parameters are a 400 rather than a failed job.
    let total_pages =
        feaslab_core::progressive_cartographer(&request.config, &c, request.region, request.budget, request.chunk)?
            .total_batches();

    let id = format!("job-{}", state.next_job.fetch_add(1, Ordering::SeqCst) + 1);
    let job = Arc::new(Job::new(id.clone(), req.constellation_id.clone(), total_pages));
    state.jobs.write().unwrap().insert(id.clone(), job.clone());
    let previous = state.active.lock().unwrap().insert(req.constellation_id.clone(), id);
    if let Some(prev) = previous.and_then(|p| state.job(&p).ok()) {
        prev.cancel();
    }

    let runner = job.clone();
    tokio::task::spawn_blocking(move || jobs::run(&runner, &c, &request));
    Ok(Json(job_view(&job)))
}

#[derive(Deserialize)]
struct PageQuery {
    from: Option<usize>,
}

#[derive(Serialize)]
pub struct PageView {
    #[serde(flatten)]
    pub job: JobView,
    pub from: usize,
    pub pages: Vec<Arc<MapBatch>>,
}

async fn map_page(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(q): Query<PageQuery>,
) -> ApiResult<PageView> {
    let job = state.job(&id)?;
    let view = job_view(&job);
    let from = q.from.unwrap_or(0);
    let pages = job.pages_from(from).ok_or_else(|| ApiError {
        status: StatusCode::CONFLICT,
        message: format!("page {from} is beyond progress ({} pages available)", view.pages_available),
    })?;
    Ok(Json(PageView { job: view, from, pages }))
}

async fn map_cancel(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<JobView> {
    let job = state.job(&id)?;
    job.cancel();
    let mut active = state.active.lock().unwrap();
    if active.get(&job.constellation_id) == Some(&job.id) {
        active.remove(&job.constellation_id);
    }
    Ok(Json(job_view(&job)))
}

//! HTTP job service under `/api/v1`.
//!
//! | route | purpose |
//! |---|---|
//! | `POST /jobs` | submit `{"type": ..., "config": {...}}`, answers 202 with the job |
//! | `GET /jobs/{id}` | job snapshot |
//! | `GET /jobs/{id}/result` | SARB bytes, or JSON for `psf` and `dataset` jobs |
//! | `GET /jobs/{id}/image` | PNG of the reconstructed image |
//! | `GET /presets` | named pipeline configs |
//! | `GET /metrics/resolution` | predicted resolution |
//!
//! Job configs per type: `simulate`, `pipeline` and `psf` take a pipeline
//! config; `reconstruct` takes [`ReconstructRequest`]; `dataset` takes a
//! dataset spec. Results live under `<data dir>/results/<type>-<hash>/` and
//! a job whose result already exists there finishes immediately with
//! `cached: true`.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use sarlab_core::analysis::{ReportConfig, ResolutionReport, Resolutions};
use sarlab_core::config::{from_json, PipelineConfig};
use sarlab_core::dataset::{generate_dataset, DatasetSpec, GenerateOptions};
use sarlab_core::engine::{self, Context, Prepared};
use sarlab_core::recon::{Algorithm, RmaOptions};
use sarlab_core::sarb::{read_sarb, to_bytes};
use sarlab_core::scene::GridSpec;
use sarlab_core::{Error, C};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::Semaphore;
use tower_http::cors::CorsLayer;

use crate::presets::presets;
use crate::render::{render_png, View, DEFAULT_DR_DB};

#[derive(Clone, Debug)]
pub struct ServiceConfig {
    pub data_dir: PathBuf,
    /// Jobs executing at once.
    pub workers: usize,
    /// Base for relative paths inside configs.
    pub base_dir: PathBuf,
}

impl ServiceConfig {
    /// `SARLAB_DATA_DIR` (default `sarlab-data`) and `SARLAB_WORKERS`
    /// (default: CPU count).
    pub fn from_env() -> Self {
        let workers = std::env::var("SARLAB_WORKERS")
            .ok()
            .and_then(|v| v.parse().ok())
            .filter(|&n: &usize| n > 0)
            .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
        ServiceConfig {
            data_dir: std::env::var_os("SARLAB_DATA_DIR")
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from("sarlab-data")),
            workers,
            base_dir: PathBuf::from("."),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobType {
    Simulate,
    Reconstruct,
    Pipeline,
    Dataset,
    Psf,
}

impl JobType {
    fn as_str(self) -> &'static str {
        match self {
            JobType::Simulate => "simulate",
            JobType::Reconstruct => "reconstruct",
            JobType::Pipeline => "pipeline",
            JobType::Dataset => "dataset",
            JobType::Psf => "psf",
        }
    }

    fn result_file(self) -> &'static str {
        match self {
            JobType::Psf => "report.json",
            JobType::Dataset => "dataset.json",
            _ => "result.sarb",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobStatus {
    Queued,
    Running,
    Done,
    Failed,
}

/// Config of a `reconstruct` job: the echo of a finished `simulate` or
/// `pipeline` job imaged on `grid`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReconstructRequest {
    pub echo_job: String,
    pub algo: Algorithm,
    pub grid: GridSpec,
    #[serde(default)]
    pub rma: RmaOptions,
}

#[derive(Clone, Debug, Serialize)]
pub struct JobSnapshot {
    pub id: String,
    #[serde(rename = "type")]
    pub kind: JobType,
    pub status: JobStatus,
    pub progress: f64,
    pub config_hash: String,
    pub cached: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub result: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

struct JobState {
    status: JobStatus,
    cached: bool,
    error: Option<String>,
}

struct Job {
    id: String,
    kind: JobType,
    hash: String,
    dir: PathBuf,
    /// f64 bits; nonnegative floats order like their bits, so `fetch_max`
    /// keeps progress monotone.
    progress: AtomicU64,
    state: Mutex<JobState>,
}

impl Job {
    fn set_progress(&self, p: f64) {
        self.progress.fetch_max(p.clamp(0.0, 1.0).to_bits(), Ordering::Relaxed);
    }

    fn result_path(&self) -> PathBuf {
        self.dir.join(self.kind.result_file())
    }

    fn snapshot(&self) -> JobSnapshot {
        let st = self.state.lock().expect("job lock");
        JobSnapshot {
            id: self.id.clone(),
            kind: self.kind,
            status: st.status,
            progress: f64::from_bits(self.progress.load(Ordering::Relaxed)),
            config_hash: self.hash.clone(),
            cached: st.cached,
            result: (st.status == JobStatus::Done).then(|| format!("/api/v1/jobs/{}/result", self.id)),
            error: st.error.clone(),
        }
    }

    fn finish(&self, outcome: Result<bool, String>) {
        let mut st = self.state.lock().expect("job lock");
        match outcome {
            Ok(cached) => {
                st.cached = cached;
                st.status = JobStatus::Done;
                drop(st);
                self.set_progress(1.0);
            }
            Err(e) => {
                st.status = JobStatus::Failed;
                st.error = Some(e);
            }
        }
    }
}

enum Work {
    Simulate(Box<Prepared>),
    Pipeline(Box<Prepared>),
    Psf(Box<Prepared>),
    Reconstruct { echo: PathBuf, req: ReconstructRequest },
    Dataset(Box<DatasetSpec>),
}

pub struct AppState {
    cfg: ServiceConfig,
    jobs: RwLock<HashMap<String, Arc<Job>>>,
    slots: Arc<Semaphore>,
}

impl AppState {
    pub fn new(cfg: ServiceConfig) -> Arc<Self> {
        Arc::new(AppState {
            slots: Arc::new(Semaphore::new(cfg.workers.max(1))),
            cfg,
            jobs: RwLock::new(HashMap::new()),
        })
    }

    fn job(&self, id: &str) -> Option<Arc<Job>> {
        self.jobs.read().expect("job table").get(id).cloned()
    }
}

/// JSON error body `{"error": ..., "field": ...}`.
pub struct ApiError {
    status: StatusCode,
    msg: String,
    field: Option<String>,
}

impl ApiError {
    fn new(status: StatusCode, msg: impl Into<String>) -> Self {
        ApiError {
            status,
            msg: msg.into(),
            field: None,
        }
    }

    fn bad(msg: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, msg)
    }

    fn field(field: &str, msg: impl Into<String>) -> Self {
        ApiError {
            field: Some(field.into()),
            ..Self::bad(msg)
        }
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        match e {
            Error::Invalid { field, msg } => ApiError::field(&field, format!("invalid `{field}`: {msg}")),
            other => ApiError::bad(other.to_string()),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({"error": self.msg});
        if let Some(f) = self.field {
            body["field"] = json!(f);
        }
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

pub fn router(state: Arc<AppState>) -> Router {
    let api = Router::new()
        .route("/jobs", post(create_job))
        .route("/jobs/{id}", get(job_status))
        .route("/jobs/{id}/result", get(job_result))
        .route("/jobs/{id}/image", get(job_image))
        .route("/presets", get(list_presets))
        .route("/metrics/resolution", get(resolution));
    Router::new()
        .nest("/api/v1", api)
        .layer(CorsLayer::permissive())
        .with_state(state)
}

pub async fn serve(cfg: ServiceConfig, addr: std::net::SocketAddr) -> anyhow::Result<()> {
    std::fs::create_dir_all(&cfg.data_dir)?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(AppState::new(cfg))).await?;
    Ok(())
}

fn hex_hash(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn prepare_work(state: &AppState, kind: JobType, config: &Value) -> ApiResult<(Work, String)> {
    let text = config.to_string();
    let ctx = Context::new(&state.cfg.base_dir);
    let pipeline = || -> ApiResult<Box<Prepared>> {
        let cfg = PipelineConfig::from_json(&text)?;
        Ok(Box::new(engine::prepare(&cfg, &ctx)?))
    };
    Ok(match kind {
        JobType::Simulate | JobType::Pipeline | JobType::Psf => {
            let p = pipeline()?;
            let hash = hex_hash(&p.hash);
            let work = match kind {
                JobType::Simulate => Work::Simulate(p),
                JobType::Pipeline => Work::Pipeline(p),
                _ => Work::Psf(p),
            };
            (work, hash)
        }
        JobType::Reconstruct => {
            let req: ReconstructRequest = from_json(&text)?;
            req.grid.validate().map_err(|e| ApiError::field("grid", e.to_string()))?;
            let src = state
                .job(&req.echo_job)
                .ok_or_else(|| ApiError::field("echo_job", format!("no job `{}`", req.echo_job)))?;
            if !matches!(src.kind, JobType::Simulate | JobType::Pipeline) {
                return Err(ApiError::field("echo_job", "source job produces no echo"));
            }
            if src.snapshot().status != JobStatus::Done {
                return Err(ApiError::field("echo_job", "source job has not finished"));
            }
            let mut key = src.hash.clone().into_bytes();
            key.extend(serde_json::to_vec(&(req.algo, &req.grid, &req.rma)).map_err(Error::from)?);
            let hash = hex_hash(&sarlab_core::config::canonical_hash(&key)?);
            (
                Work::Reconstruct {
                    echo: src.result_path(),
                    req,
                },
                hash,
            )
        }
        JobType::Dataset => {
            let spec = DatasetSpec::from_json(&text)?;
            let hash = hex_hash(&spec.hash()?);
            (Work::Dataset(Box::new(spec)), hash)
        }
    })
}

fn write_atomic(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    let tmp = path.with_extension(format!("tmp-{}", uuid::Uuid::new_v4()));
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Runs one job to completion; returns whether the result was cached.
fn execute(job: &Job, work: Work, base_dir: &Path) -> anyhow::Result<bool> {
    let out = job.result_path();
    if out.exists() {
        return Ok(true);
    }
    std::fs::create_dir_all(&job.dir)?;
    let progress = |f: f64| job.set_progress(f);
    match work {
        Work::Simulate(p) => {
            let echo = engine::simulate(&p, Some(&progress))?;
            write_atomic(&out, &to_bytes(&engine::echo_arrays(&echo))?)?;
        }
        Work::Pipeline(p) => {
            let arrays = engine::run_pipeline(&p, Some(&progress))?;
            write_atomic(&out, &to_bytes(&arrays)?)?;
        }
        Work::Psf(p) => {
            let report = engine::psf_report(&p)?;
            write_atomic(&out, &serde_json::to_vec_pretty(&report)?)?;
        }
        Work::Reconstruct { echo, req } => {
            let echo = engine::echo_from_arrays(&read_sarb(&echo)?)?;
            job.set_progress(0.1);
            let arrays = engine::reconstruct_echo(&echo, req.algo, &req.grid, &req.rma)?;
            write_atomic(&out, &to_bytes(&arrays)?)?;
        }
        Work::Dataset(spec) => {
            let total = spec.total().max(1) as f64;
            let tick = |n: usize| job.set_progress(n as f64 / total);
            let opts = GenerateOptions {
                base_dir: base_dir.to_path_buf(),
                progress: Some(&tick),
                ..Default::default()
            };
            // generate_dataset writes dataset.json itself; drop it on failure
            // so a partial run is never served from the cache
            let manifest = generate_dataset(&spec, &job.dir, &opts)?;
            if !manifest.failed.is_empty() {
                let _ = std::fs::remove_file(&out);
                anyhow::bail!("{} sample(s) failed, first: {}", manifest.failed.len(), manifest.failed[0].error);
            }
        }
    }
    Ok(false)
}

async fn create_job(State(state): State<Arc<AppState>>, body: axum::body::Bytes) -> ApiResult<Response> {
    let body: Value = serde_json::from_slice(&body).map_err(|e| ApiError::field("$", format!("malformed JSON: {e}")))?;
    let kind = body
        .get("type")
        .ok_or_else(|| ApiError::field("type", "missing field `type`"))?;
    let kind: JobType = serde_json::from_value(kind.clone()).map_err(|e| ApiError::field("type", e.to_string()))?;
    let config = body
        .get("config")
        .cloned()
        .ok_or_else(|| ApiError::field("config", "missing field `config`"))?;

    let st = state.clone();
    let (work, hash) = tokio::task::spawn_blocking(move || prepare_work(&st, kind, &config))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))??;

    let id = uuid::Uuid::new_v4().simple().to_string();
    let job = Arc::new(Job {
        dir: state.cfg.data_dir.join("results").join(format!("{}-{hash}", kind.as_str())),
        id: id.clone(),
        kind,
        hash,
        progress: AtomicU64::new(0f64.to_bits()),
        state: Mutex::new(JobState {
            status: JobStatus::Queued,
            cached: false,
            error: None,
        }),
    });
    state.jobs.write().expect("job table").insert(id.clone(), job.clone());

    let slots = state.slots.clone();
    let base_dir = state.cfg.base_dir.clone();
    let runner = job.clone();
    tokio::spawn(async move {
        let _permit = slots.acquire_owned().await.expect("semaphore open");
        runner.state.lock().expect("job lock").status = JobStatus::Running;
        let j = runner.clone();
        let outcome = tokio::task::spawn_blocking(move || execute(&j, work, &base_dir))
            .await
            .map_err(|e| format!("job panicked: {e}"))
            .and_then(|r| r.map_err(|e| format!("{e:#}")));
        if let Err(e) = &outcome {
            log::warn!("job {} failed: {e}", runner.id);
        }
        runner.finish(outcome);
    });

    Ok((StatusCode::ACCEPTED, Json(job.snapshot())).into_response())
}

fn lookup(state: &AppState, id: &str) -> ApiResult<Arc<Job>> {
    state
        .job(id)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("no job `{id}`")))
}

fn require_done(job: &Job) -> ApiResult<()> {
    let snap = job.snapshot();
    match snap.status {
        JobStatus::Done => Ok(()),
        JobStatus::Failed => Err(ApiError::new(
            StatusCode::CONFLICT,
            format!("job failed: {}", snap.error.unwrap_or_default()),
        )),
        _ => Err(ApiError::new(StatusCode::CONFLICT, "job has not finished")),
    }
}

async fn job_status(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<JobSnapshot>> {
    Ok(Json(lookup(&state, &id)?.snapshot()))
}

async fn job_result(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<Response> {
    let job = lookup(&state, &id)?;
    require_done(&job)?;
    let path = job.result_path();
    let bytes = tokio::fs::read(&path)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, format!("{}: {e}", path.display())))?;
    let ctype = if job.kind.result_file().ends_with(".json") {
        "application/json"
    } else {
        "application/octet-stream"
    };
    Ok(([(header::CONTENT_TYPE, ctype)], bytes).into_response())
}

#[derive(Debug, Deserialize)]
pub struct ImageQuery {
    mode: Option<String>,
    axis: Option<usize>,
    index: Option<usize>,
    dr: Option<f64>,
}

async fn job_image(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    Query(q): Query<ImageQuery>,
) -> ApiResult<Response> {
    let job = lookup(&state, &id)?;
    if !matches!(job.kind, JobType::Pipeline | JobType::Reconstruct) {
        return Err(ApiError::bad(format!("{} jobs produce no image", job.kind.as_str())));
    }
    require_done(&job)?;
    let path = job.result_path();
    let png = tokio::task::spawn_blocking(move || -> ApiResult<Vec<u8>> {
        let img = engine::image_from_arrays(&read_sarb(&path)?)?;
        let shape = img.voxels().shape().to_vec();
        let axis = q.axis.unwrap_or(shape.len() - 1);
        let view = match q.mode.as_deref().unwrap_or("mip") {
            "mip" => View::Mip { axis },
            "slice" => {
                let n = shape.get(axis).copied().unwrap_or(0);
                View::Slice {
                    axis,
                    index: q.index.unwrap_or(n / 2),
                }
            }
            other => return Err(ApiError::field("mode", format!("unknown mode `{other}`, expected slice or mip"))),
        };
        Ok(render_png(img.voxels(), view, q.dr.unwrap_or(DEFAULT_DR_DB))?)
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))??;
    Ok(([(header::CONTENT_TYPE, "image/png")], png).into_response())
}

async fn list_presets() -> Json<Value> {
    Json(json!(presets()))
}

fn param(q: &HashMap<String, String>, name: &str) -> ApiResult<Option<f64>> {
    match q.get(name) {
        None => Ok(None),
        Some(s) => {
            let v: f64 = s
                .parse()
                .map_err(|_| ApiError::field(name, format!("`{s}` is not a number")))?;
            if !v.is_finite() || v < 0.0 {
                return Err(ApiError::field(name, format!("must be positive, got {v}")));
            }
            Ok(Some(v))
        }
    }
}

fn positive(q: &HashMap<String, String>, name: &str) -> ApiResult<Option<f64>> {
    let v = param(q, name)?;
    if v == Some(0.0) {
        return Err(ApiError::field(name, "must be positive, got 0"));
    }
    Ok(v)
}

fn required(q: &HashMap<String, String>, name: &str) -> ApiResult<f64> {
    positive(q, name)?.ok_or_else(|| ApiError::field(name, format!("missing parameter `{name}`")))
}

/// Predicted resolution.
///
/// `geometry=planar` (default): `B` required; `dx`/`dy` also need
/// `lambdaC` (or `fc`), `Zref` and the extent `Dx`/`Dy`.
/// `geometry=cylindrical`: `fmin` and `fmax` (Hz) required; `dy` also needs
/// `R0` and `Dy`.
async fn resolution(Query(q): Query<HashMap<String, String>>) -> ApiResult<Json<ResolutionReport>> {
    let geometry = q.get("geometry").map(String::as_str).unwrap_or("planar");
    let mut cfg = ReportConfig::default();
    let mut predicted = Resolutions::default();
    match geometry {
        "planar" => {
            let b = required(&q, "B")?;
            let lambda = match (positive(&q, "lambdaC")?, positive(&q, "fc")?) {
                (Some(l), _) => Some(l),
                (None, Some(fc)) => Some(C / fc),
                _ => None,
            };
            let zref = positive(&q, "Zref")?;
            let (dx, dy) = (param(&q, "Dx")?, param(&q, "Dy")?);
            cfg.bandwidth = Some(b);
            predicted.dz = Some(C / (2.0 * b));
            if let (Some(l), Some(z)) = (lambda, zref) {
                let r = sarlab_core::analysis::planar_resolution(l, z, dx.unwrap_or(0.0), dy.unwrap_or(0.0), b)?;
                predicted = r;
                cfg.lambda_c = Some(l);
                cfg.zref = Some(z);
                cfg.dx_extent = dx;
                cfg.dy_extent = dy;
            }
        }
        "cylindrical" => {
            let (fmin, fmax) = (required(&q, "fmin")?, required(&q, "fmax")?);
            if fmax <= fmin {
                return Err(ApiError::field("fmax", "must exceed fmin"));
            }
            let k = |f: f64| 2.0 * std::f64::consts::PI * f / C;
            let (kmin, kmax) = (k(fmin), k(fmax));
            let lambda = 2.0 * C / (fmin + fmax);
            let r0 = positive(&q, "R0")?;
            let dy = param(&q, "Dy")?;
            let r = sarlab_core::analysis::cylindrical_resolution(lambda, r0.unwrap_or(1.0), dy.unwrap_or(0.0), kmin, kmax)?;
            predicted.drho = r.drho;
            if r0.is_some() {
                predicted.dy = r.dy;
                cfg.r0 = r0;
                cfg.dy_extent = dy;
            }
            cfg.lambda_c = Some(lambda);
            cfg.bandwidth = Some(fmax - fmin);
            cfg.kmin = Some(kmin);
            cfg.kmax = Some(kmax);
        }
        other => {
            return Err(ApiError::field(
                "geometry",
                format!("unknown geometry `{other}`, expected planar or cylindrical"),
            ))
        }
    }
    Ok(Json(ResolutionReport {
        predicted,
        measured: Resolutions::default(),
        config: cfg,
    }))
}

//! Session-based JSON-over-HTTP front end for interactive segmentation.
//!
//! ```text
//! POST   /api/sessions                 raw image bytes        -> 201 {"session_id": ..}
//! POST   /api/sessions/{id}/scribbles  [{"x","y","class"}]    -> 200 {"accepted", "rejected"}
//! POST   /api/sessions/{id}/segment    options                -> 202
//! GET    /api/sessions/{id}/status                            -> job state
//! GET    /api/sessions/{id}/mask                              -> image/png (0/255)
//! DELETE /api/sessions/{id}                                   -> 204
//! GET    /api/health                                          -> {"status": "ok"}
//! ```
//!
//! Anything else is served from the configured static directory, if any.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::dataset::{decode_image, encode_gray_png};
use crate::features::{extract_features, normalize, RgbImage, WeightVector};
use crate::knn::{LabelMap, TrimapCode};
use crate::optimizer::{optimize_with, GaConfig};
use crate::pcc::{run_segmentation, Observer, PccParams, Progress, SegmentRequest, Stage};
use crate::Error;

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub max_pixels: usize,
    pub session_ttl: Duration,
    pub static_dir: Option<PathBuf>,
    /// Finished masks are also written here as `<session>-mask.png`.
    pub spill_dir: Option<PathBuf>,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            max_pixels: 1 << 20,
            session_ttl: Duration::from_secs(3600),
            static_dir: None,
            spill_dir: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum JobState {
    Idle,
    Running {
        stage: String,
        round: usize,
        mean_max_domination: f64,
        fraction_finalized: f64,
    },
    Done {
        alpha: Option<f64>,
        rounds: usize,
        k: usize,
        lambda: Vec<f64>,
    },
    Failed {
        reason: String,
    },
}

struct Session {
    image: Arc<RgbImage>,
    scribbles: HashMap<usize, u8>,
    job: JobState,
    mask_png: Option<Vec<u8>>,
    cancel: Arc<AtomicBool>,
    touched: Instant,
}

struct Shared {
    sessions: Mutex<HashMap<String, Arc<Mutex<Session>>>>,
    config: ServerConfig,
}

#[derive(Clone)]
pub struct AppState(Arc<Shared>);

impl AppState {
    pub fn new(config: ServerConfig) -> Self {
        Self(Arc::new(Shared {
            sessions: Mutex::new(HashMap::new()),
            config,
        }))
    }

    fn session(&self, id: &str) -> Result<Arc<Mutex<Session>>, ApiError> {
        let sessions = self.0.sessions.lock().unwrap();
        let s = sessions
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError(StatusCode::NOT_FOUND, format!("unknown session {id}")))?;
        s.lock().unwrap().touched = Instant::now();
        Ok(s)
    }

    /// Drops sessions idle for longer than the TTL, cancelling their jobs.
    pub fn evict_expired(&self) -> usize {
        let ttl = self.0.config.session_ttl;
        let mut sessions = self.0.sessions.lock().unwrap();
        let before = sessions.len();
        sessions.retain(|_, s| {
            let s = s.lock().unwrap();
            let keep = s.touched.elapsed() < ttl;
            if !keep {
                s.cancel.store(true, Ordering::Relaxed);
            }
            keep
        });
        before - sessions.len()
    }

    pub fn session_count(&self) -> usize {
        self.0.sessions.lock().unwrap().len()
    }
}

#[derive(Debug)]
struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": self.1 }))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

pub fn router(state: AppState) -> Router {
    let api = Router::new()
        .route("/api/health", get(|| async { Json(json!({ "status": "ok" })) }))
        .route("/api/sessions", post(create_session))
        .route("/api/sessions/{id}", axum::routing::delete(delete_session))
        .route("/api/sessions/{id}/scribbles", post(add_scribbles))
        .route("/api/sessions/{id}/segment", post(start_segmentation))
        .route("/api/sessions/{id}/status", get(get_status))
        .route("/api/sessions/{id}/mask", get(get_mask))
        .layer(DefaultBodyLimit::max(64 << 20));
    let api = match &state.0.config.static_dir {
        Some(dir) => api.fallback_service(tower_http::services::ServeDir::new(dir)),
        None => api,
    };
    api.with_state(state)
}

/// Serves until the listener fails. Expired sessions are swept periodically.
pub async fn serve(listener: tokio::net::TcpListener, state: AppState) -> std::io::Result<()> {
    let sweeper = state.clone();
    let period = (state.0.config.session_ttl / 4).clamp(Duration::from_secs(1), Duration::from_secs(60));
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(period);
        loop {
            tick.tick().await;
            let n = sweeper.evict_expired();
            if n > 0 {
                log::info!("evicted {n} idle sessions");
            }
        }
    });
    axum::serve(listener, router(state)).await
}

async fn create_session(State(state): State<AppState>, body: Bytes) -> ApiResult<impl IntoResponse> {
    if body.is_empty() {
        return Err(ApiError(StatusCode::BAD_REQUEST, "empty upload".into()));
    }
    let image = decode_image(&body).map_err(|e| ApiError(StatusCode::BAD_REQUEST, e.to_string()))?;
    let pixels = image.width() * image.height();
    if pixels > state.0.config.max_pixels {
        return Err(ApiError(
            StatusCode::PAYLOAD_TOO_LARGE,
            format!("image has {pixels} pixels, limit is {}", state.0.config.max_pixels),
        ));
    }
    let id = uuid::Uuid::new_v4().simple().to_string();
    let (w, h) = (image.width(), image.height());
    let session = Session {
        image: Arc::new(image),
        scribbles: HashMap::new(),
        job: JobState::Idle,
        mask_png: None,
        cancel: Arc::new(AtomicBool::new(false)),
        touched: Instant::now(),
    };
    state
        .0
        .sessions
        .lock()
        .unwrap()
        .insert(id.clone(), Arc::new(Mutex::new(session)));
    Ok((
        StatusCode::CREATED,
        Json(json!({ "session_id": id, "width": w, "height": h })),
    ))
}

async fn delete_session(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<StatusCode> {
    let removed = state.0.sessions.lock().unwrap().remove(&id);
    match removed {
        Some(s) => {
            s.lock().unwrap().cancel.store(true, Ordering::Relaxed);
            Ok(StatusCode::NO_CONTENT)
        }
        None => Err(ApiError(StatusCode::NOT_FOUND, format!("unknown session {id}"))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScribbleClass {
    Background,
    Foreground,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Scribble {
    pub x: i64,
    pub y: i64,
    pub class: ScribbleClass,
}

async fn add_scribbles(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Json(batch): Json<Vec<Scribble>>,
) -> ApiResult<impl IntoResponse> {
    let session = state.session(&id)?;
    let mut s = session.lock().unwrap();
    if matches!(s.job, JobState::Running { .. }) {
        return Err(ApiError(StatusCode::CONFLICT, "a job is running".into()));
    }
    let (w, h) = (s.image.width() as i64, s.image.height() as i64);
    let mut rejected = Vec::new();
    let mut accepted = 0;
    for (i, sc) in batch.iter().enumerate() {
        if sc.x < 0 || sc.y < 0 || sc.x >= w || sc.y >= h {
            rejected.push(i);
            continue;
        }
        let class = match sc.class {
            ScribbleClass::Background => 0,
            ScribbleClass::Foreground => 1,
        };
        s.scribbles.insert((sc.y * w + sc.x) as usize, class);
        accepted += 1;
    }
    Ok(Json(json!({ "accepted": accepted, "rejected": rejected })))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LambdaMode {
    #[default]
    Unit,
    Optimize,
    Explicit,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegmentOptions {
    pub k: usize,
    pub lambda_mode: LambdaMode,
    pub lambda: Option<Vec<f64>>,
    pub seed: u64,
    /// k used while searching weights.
    pub optimize_k: usize,
    pub pcc: Option<PccParams>,
    pub ga: Option<GaConfig>,
}

impl Default for SegmentOptions {
    fn default() -> Self {
        Self {
            k: 100,
            lambda_mode: LambdaMode::Unit,
            lambda: None,
            seed: 0,
            optimize_k: 100,
            pcc: None,
            ga: None,
        }
    }
}

struct JobObserver {
    session: Arc<Mutex<Session>>,
    cancel: Arc<AtomicBool>,
}

impl Observer for JobObserver {
    fn on_progress(&mut self, p: &Progress) {
        let stage = match p.stage {
            Stage::Phase1 => "phase1",
            Stage::Phase2 => "phase2",
        };
        self.session.lock().unwrap().job = JobState::Running {
            stage: stage.into(),
            round: p.round,
            mean_max_domination: p.mean_max_domination,
            fraction_finalized: p.fraction_finalized,
        };
    }

    fn should_cancel(&self) -> bool {
        self.cancel.load(Ordering::Relaxed)
    }
}

async fn start_segmentation(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Option<Json<SegmentOptions>>,
) -> ApiResult<impl IntoResponse> {
    let opts = body.map(|Json(o)| o).unwrap_or_default();
    let unprocessable = |m: String| ApiError(StatusCode::UNPROCESSABLE_ENTITY, m);
    let params = PccParams {
        rng_seed: opts.seed,
        ..opts.pcc.unwrap_or_default()
    };
    params.validate(2).map_err(|e| unprocessable(e.to_string()))?;
    let ga = GaConfig {
        rng_seed: opts.seed,
        ..opts.ga.unwrap_or_default()
    };
    ga.validate().map_err(|e| unprocessable(e.to_string()))?;
    let explicit = match (opts.lambda_mode, &opts.lambda) {
        (LambdaMode::Explicit, Some(l)) => Some(WeightVector::from_slice(l).map_err(|e| unprocessable(e.to_string()))?),
        (LambdaMode::Explicit, None) => return Err(unprocessable("explicit mode needs \"lambda\"".into())),
        _ => None,
    };

    let session = state.session(&id)?;
    let (image, trimap, cancel) = {
        let mut s = session.lock().unwrap();
        if matches!(s.job, JobState::Running { .. }) {
            return Err(ApiError(StatusCode::CONFLICT, "a job is already running".into()));
        }
        for (class, name) in [(0u8, "background"), (1, "foreground")] {
            if !s.scribbles.values().any(|&c| c == class) {
                return Err(unprocessable(format!("no {name} scribbles")));
            }
        }
        let n = s.image.width() * s.image.height();
        let k_max = if opts.lambda_mode == LambdaMode::Optimize {
            opts.k.max(opts.optimize_k)
        } else {
            opts.k
        };
        if opts.k == 0 || k_max >= n {
            return Err(unprocessable(format!("k must be in 1..{n}")));
        }
        let mut codes = vec![TrimapCode::Unlabeled; n];
        for (&p, &c) in &s.scribbles {
            codes[p] = if c == 0 {
                TrimapCode::LabeledBackground
            } else {
                TrimapCode::LabeledForeground
            };
        }
        let trimap =
            LabelMap::new(s.image.width(), s.image.height(), codes).map_err(|e| unprocessable(e.to_string()))?;
        s.job = JobState::Running {
            stage: "features".into(),
            round: 0,
            mean_max_domination: 0.0,
            fraction_finalized: 0.0,
        };
        s.mask_png = None;
        s.cancel = Arc::new(AtomicBool::new(false));
        (s.image.clone(), trimap, s.cancel.clone())
    };

    let spill = state.0.config.spill_dir.clone();
    let job_session = session.clone();
    tokio::task::spawn_blocking(move || {
        let outcome = (|| -> crate::Result<(Vec<u8>, JobState)> {
            let features = normalize(&extract_features(&image)?);
            let lambda = match (opts.lambda_mode, explicit) {
                (LambdaMode::Optimize, _) => {
                    let cancel = cancel.clone();
                    let sess = job_session.clone();
                    let (best, _trace) = optimize_with(&features, &trimap, opts.optimize_k, &ga, &mut |g| {
                        sess.lock().unwrap().job = JobState::Running {
                            stage: "optimize".into(),
                            round: g.generation,
                            mean_max_domination: 0.0,
                            fraction_finalized: 0.0,
                        };
                        !cancel.load(Ordering::Relaxed)
                    })?;
                    best
                }
                (_, Some(l)) => l,
                _ => WeightVector::unit(),
            };
            let mut observer = JobObserver {
                session: job_session.clone(),
                cancel: cancel.clone(),
            };
            let result = run_segmentation(
                &SegmentRequest {
                    features: &features,
                    trimap: &trimap,
                    lambda,
                    k: opts.k,
                    params,
                    baseline_phi: None,
                },
                &mut observer,
            )?;
            let png = encode_gray_png(result.width, result.height, &result.mask())?;
            Ok((
                png,
                JobState::Done {
                    alpha: result.alpha(),
                    rounds: result.rounds,
                    k: result.k,
                    lambda: result.lambda.to_vec(),
                },
            ))
        })();
        let mut s = job_session.lock().unwrap();
        match outcome {
            Ok((png, done)) => {
                if let Some(dir) = &spill {
                    let path = dir.join(format!("{id}-mask.png"));
                    if let Err(e) = std::fs::write(&path, &png) {
                        log::warn!("could not spill {}: {e}", path.display());
                    }
                }
                s.mask_png = Some(png);
                s.job = done;
            }
            Err(Error::Cancelled) => {
                s.job = JobState::Failed {
                    reason: "cancelled".into(),
                }
            }
            Err(e) => s.job = JobState::Failed { reason: e.to_string() },
        }
    });

    Ok((StatusCode::ACCEPTED, Json(json!({ "accepted": true }))))
}

async fn get_status(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<JobState>> {
    let session = state.session(&id)?;
    let job = session.lock().unwrap().job.clone();
    Ok(Json(job))
}

async fn get_mask(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let session = state.session(&id)?;
    let s = session.lock().unwrap();
    let (
        JobState::Done {
            alpha,
            rounds,
            k,
            lambda,
        },
        Some(png),
    ) = (&s.job, &s.mask_png)
    else {
        return Err(ApiError(StatusCode::CONFLICT, "no finished segmentation".into()));
    };
    let lambda: Vec<String> = lambda.iter().map(|v| v.to_string()).collect();
    let mut resp = (StatusCode::OK, png.clone()).into_response();
    let headers = resp.headers_mut();
    headers.insert(header::CONTENT_TYPE, HeaderValue::from_static("image/png"));
    let mut set = |name: &'static str, value: String| {
        if let Ok(v) = HeaderValue::from_str(&value) {
            headers.insert(name, v);
        }
    };
    set("x-pcc-alpha", alpha.map_or("none".into(), |a| a.to_string()));
    set("x-pcc-rounds", rounds.to_string());
    set("x-pcc-k", k.to_string());
    set("x-pcc-lambda", lambda.join(","));
    Ok(resp)
}

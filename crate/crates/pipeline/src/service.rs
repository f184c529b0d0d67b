//! HTTP service for the annotation tool.
//!
//! | method | path                      | body / response                          |
//! |--------|---------------------------|------------------------------------------|
//! | GET    | `/photos`                 | JSON list of photo summaries             |
//! | GET    | `/photos/{id}/image`      | the original JPEG                        |
//! | GET    | `/photos/{id}/panorama`   | JSON: peaks, skyline, base64 edge PNG    |
//! | GET    | `/alignments/{id}`        | stored ground-truth alignment, verbatim  |
//! | POST   | `/alignments/{id}`        | `{"dx", "dy", "correspondences": [...]}` |
//! | POST   | `/masks/{id}`             | PNG, 255 snow / 0 no snow / 128 outside  |
//! | GET    | `/webcams/{id}/series`    | CSV series                               |
//! | GET    | `/metrics`                | last evaluation                          |
//!
//! Errors are `{"error": "..."}` with status 400 or 404. Uploads go to the
//! ground-truth area of the store and never touch pipeline outputs.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use base64::Engine;
use log::info;
use serde::Serialize;
use tokio::sync::Mutex;

use crate::error::PipelineError;
use crate::imageio::{decode_mask_png, dimensions};
use crate::photo::{current_records, PanoramaSummary};
use crate::store::{validate_id, GroundTruthAlignment, PhotoRecord, Relevance, Store};

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn bad_request(message: impl Into<String>) -> Self {
        Self {
            status: StatusCode::BAD_REQUEST,
            message: message.into(),
        }
    }

    fn not_found(message: impl Into<String>) -> Self {
        Self {
            status: StatusCode::NOT_FOUND,
            message: message.into(),
        }
    }
}

impl From<PipelineError> for ApiError {
    fn from(e: PipelineError) -> Self {
        let status = match e {
            PipelineError::NotFound(_) => StatusCode::NOT_FOUND,
            PipelineError::Invalid(_) => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        Self {
            status,
            message: e.to_string(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(serde_json::json!({ "error": self.message }))).into_response()
    }
}

type ApiResult<T> = std::result::Result<T, ApiError>;

struct AppState {
    store: Store,
    /// One lock per uploaded record, so concurrent POSTs never interleave.
    locks: Mutex<HashMap<String, Arc<Mutex<()>>>>,
}

impl AppState {
    async fn lock(&self, key: String) -> Arc<Mutex<()>> {
        self.locks.lock().await.entry(key).or_default().clone()
    }

    fn photo(&self, id: &str) -> ApiResult<PhotoRecord> {
        validate_id(id).map_err(|_| ApiError::not_found(format!("unknown photo {id}")))?;
        current_records(&self.store)?
            .into_iter()
            .find(|r| r.id == id)
            .ok_or_else(|| ApiError::not_found(format!("unknown photo {id}")))
    }
}

#[derive(Serialize)]
struct PhotoSummary {
    id: String,
    width: usize,
    height: usize,
    relevance: Relevance,
    aligned: bool,
    classified: bool,
    ground_truth_alignment: bool,
    ground_truth_mask: bool,
    flags: Vec<String>,
}

#[derive(Serialize)]
struct PanoramaView {
    #[serde(flatten)]
    panorama: PanoramaSummary,
    /// Photo size at panorama scale and the pipeline's global displacement.
    alignment: Option<AlignmentView>,
    edges_png_base64: String,
}

#[derive(Serialize)]
struct AlignmentView {
    dx: i64,
    dy: i64,
    photo_width: usize,
    photo_height: usize,
}

async fn list_photos(State(st): State<Arc<AppState>>) -> ApiResult<Json<Vec<PhotoSummary>>> {
    let out = current_records(&st.store)?
        .into_iter()
        .map(|r| PhotoSummary {
            aligned: r.alignment.is_some(),
            classified: r.snow.is_some(),
            ground_truth_alignment: st.store.ground_truth_alignment_path(&r.id).exists(),
            ground_truth_mask: st.store.ground_truth_mask_path(&r.id).exists(),
            id: r.id,
            width: r.width,
            height: r.height,
            relevance: r.relevance,
            flags: r.flags,
        })
        .collect();
    Ok(Json(out))
}

async fn photo_image(State(st): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Response> {
    let rec = st.photo(&id)?;
    let bytes = std::fs::read(&rec.path).map_err(|e| ApiError::not_found(format!("{}: {e}", rec.path.display())))?;
    Ok(([(header::CONTENT_TYPE, "image/jpeg")], bytes).into_response())
}

async fn photo_panorama(State(st): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<PanoramaView>> {
    let rec = st.photo(&id)?;
    let dir = st.store.photo_dir(&id);
    let panorama: PanoramaSummary = st
        .store
        .read_json(&dir.join("panorama.json"))?
        .ok_or_else(|| ApiError::not_found(format!("no panorama rendered for {id}")))?;
    let png = st
        .store
        .read(&dir.join("panorama.png"))?
        .ok_or_else(|| ApiError::not_found(format!("no panorama rendered for {id}")))?;
    Ok(Json(PanoramaView {
        panorama,
        alignment: rec.alignment.map(|a| AlignmentView {
            dx: a.global.dx,
            dy: a.global.dy,
            photo_width: a.photo_width,
            photo_height: a.photo_height,
        }),
        edges_png_base64: base64::engine::general_purpose::STANDARD.encode(png),
    }))
}

fn json_bytes(bytes: Vec<u8>) -> Response {
    ([(header::CONTENT_TYPE, "application/json")], bytes).into_response()
}

async fn get_alignment(State(st): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Response> {
    st.photo(&id)?;
    let bytes = st
        .store
        .read(&st.store.ground_truth_alignment_path(&id))?
        .ok_or_else(|| ApiError::not_found(format!("no ground-truth alignment for {id}")))?;
    Ok(json_bytes(bytes))
}

async fn post_alignment(State(st): State<Arc<AppState>>, Path(id): Path<String>, body: Bytes) -> ApiResult<StatusCode> {
    st.photo(&id)?;
    let gt: GroundTruthAlignment =
        serde_json::from_slice(&body).map_err(|e| ApiError::bad_request(format!("invalid alignment: {e}")))?;
    if gt
        .correspondences
        .iter()
        .any(|c| !c.photo_x.is_finite() || !c.photo_y.is_finite() || c.peak.is_empty())
    {
        return Err(ApiError::bad_request(
            "correspondences need a peak name and finite pixels",
        ));
    }
    let lock = st.lock(format!("alignment/{id}")).await;
    let _guard = lock.lock().await;
    st.store.write(&st.store.ground_truth_alignment_path(&id), &body)?;
    info!("stored ground-truth alignment for {id}");
    Ok(StatusCode::NO_CONTENT)
}

async fn post_mask(State(st): State<Arc<AppState>>, Path(id): Path<String>, body: Bytes) -> ApiResult<StatusCode> {
    let rec = st.photo(&id)?;
    let mask = decode_mask_png(&body).map_err(|e| ApiError::bad_request(format!("invalid mask: {e}")))?;
    let mut allowed = vec![(rec.width, rec.height)];
    if let Some(pipeline_mask) = st.store.read(&st.store.photo_dir(&id).join("mask.png"))? {
        allowed.push(dimensions(&pipeline_mask)?);
    }
    if !allowed.contains(&(mask.width, mask.height)) {
        let expected: Vec<String> = allowed.iter().map(|(w, h)| format!("{w}x{h}")).collect();
        return Err(ApiError::bad_request(format!(
            "mask is {}x{}, expected {}",
            mask.width,
            mask.height,
            expected.join(" or ")
        )));
    }
    let lock = st.lock(format!("mask/{id}")).await;
    let _guard = lock.lock().await;
    st.store.write(&st.store.ground_truth_mask_path(&id), &body)?;
    info!("stored ground-truth mask for {id}");
    Ok(StatusCode::NO_CONTENT)
}

async fn webcam_series(State(st): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Response> {
    validate_id(&id).map_err(|_| ApiError::not_found(format!("unknown webcam {id}")))?;
    let bytes = st
        .store
        .read(&st.store.webcam_dir(&id).join("series.csv"))?
        .ok_or_else(|| ApiError::not_found(format!("no series for webcam {id}")))?;
    Ok(([(header::CONTENT_TYPE, "text/csv")], bytes).into_response())
}

async fn metrics(State(st): State<Arc<AppState>>) -> ApiResult<Response> {
    let bytes = st
        .store
        .read(&st.store.metrics_path())?
        .ok_or_else(|| ApiError::not_found("no evaluation has been run"))?;
    Ok(json_bytes(bytes))
}

pub fn router(store: Store) -> Router {
    let state = Arc::new(AppState {
        store,
        locks: Mutex::new(HashMap::new()),
    });
    Router::new()
        .route("/photos", get(list_photos))
        .route("/photos/:id/image", get(photo_image))
        .route("/photos/:id/panorama", get(photo_panorama))
        .route("/alignments/:id", get(get_alignment).post(post_alignment))
        .route("/masks/:id", axum::routing::post(post_mask))
        .route("/webcams/:id/series", get(webcam_series))
        .route("/metrics", get(metrics))
        .with_state(state)
}

pub async fn serve(store: Store, addr: SocketAddr) -> crate::error::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| PipelineError::Invalid(format!("cannot listen on {addr}: {e}")))?;
    info!("listening on http://{addr}");
    axum::serve(listener, router(store))
        .await
        .map_err(|e| PipelineError::Invalid(format!("server stopped: {e}")))
}

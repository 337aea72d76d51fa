//! The loopback JSON service.

use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Serialize;
use serde_json::Value;
use shotadvisor::pipeline::{DraftReport, TrainedModel};
use shotadvisor::Error;
use tokio::net::TcpListener;
use tower_http::cors::{AllowOrigin, CorsLayer};

pub const DEFAULT_PORT: u16 = 8701;

/// Dev-server origins of the bundled panel.
pub const DEFAULT_ORIGINS: [&str; 2] = ["http://127.0.0.1:5173", "http://localhost:5173"];

#[derive(Serialize)]
struct ErrorBody {
    error: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    field: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    id: Option<String>,
}

fn bad_request(error: String, field: Option<String>) -> Response {
    (
        StatusCode::BAD_REQUEST,
        Json(ErrorBody {
            error,
            field,
            id: None,
        }),
    )
        .into_response()
}

fn incident_id() -> String {
    static COUNTER: AtomicU64 = AtomicU64::new(0);
    let n = COUNTER.fetch_add(1, Ordering::Relaxed);
    let t = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_nanos() as u64);
    format!(
        "{:016x}",
        t.rotate_left(17) ^ n.wrapping_mul(0x9e37_79b9_7f4a_7c15)
    )
}

async fn analyze(State(model): State<Arc<TrainedModel>>, body: Bytes) -> Response {
    let value: Value = match serde_json::from_slice(&body) {
        Ok(v) => v,
        Err(e) => return bad_request(format!("malformed JSON: {e}"), None),
    };
    let draft = match DraftReport::from_json(&value) {
        Ok(d) => d,
        Err(Error::MissingField { field, .. }) => {
            return bad_request(format!("missing required field `{field}`"), Some(field))
        }
        Err(Error::FieldType { field, message, .. }) => {
            return bad_request(
                format!("field `{field}` has the wrong type: {message}"),
                Some(field),
            )
        }
        Err(e) => return bad_request(e.to_string(), None),
    };
    match model.analyze(&draft) {
        Ok(rec) => match serde_json::to_string(&rec) {
            Ok(json) => ([(header::CONTENT_TYPE, "application/json")], json).into_response(),
            Err(e) => internal_error(&e.to_string()),
        },
        Err(e) => internal_error(&e.to_string()),
    }
}

fn internal_error(detail: &str) -> Response {
    let id = incident_id();
    tracing::error!(%id, detail, "analyze failed");
    (
        StatusCode::INTERNAL_SERVER_ERROR,
        Json(ErrorBody {
            error: "internal error".into(),
            field: None,
            id: Some(id),
        }),
    )
        .into_response()
}

async fn health(State(model): State<Arc<TrainedModel>>) -> Response {
    Json(serde_json::json!({
        "status": "ok",
        "model_version": model.model_version(),
    }))
    .into_response()
}

async fn model_info(State(model): State<Arc<TrainedModel>>) -> Response {
    Json(model.info()).into_response()
}

pub fn cors(origins: &[String]) -> CorsLayer {
    let allowed: Vec<HeaderValue> = origins
        .iter()
        .filter_map(|o| HeaderValue::from_str(o).ok())
        .collect();
    CorsLayer::new()
        .allow_origin(AllowOrigin::list(allowed))
        .allow_methods([Method::GET, Method::POST])
        .allow_headers([header::CONTENT_TYPE])
}

pub fn router(model: Arc<TrainedModel>, origins: &[String]) -> Router {
    Router::new()
        .route("/analyze", post(analyze))
        .route("/health", get(health))
        .route("/model-info", get(model_info))
        .layer(cors(origins))
        .with_state(model)
}

/// Serves until ctrl-c.
pub async fn serve(
    listener: TcpListener,
    model: Arc<TrainedModel>,
    origins: &[String],
) -> std::io::Result<()> {
    let app = router(model, origins);
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

pub async fn bind(addr: SocketAddr) -> std::io::Result<TcpListener> {
    TcpListener::bind(addr).await
}

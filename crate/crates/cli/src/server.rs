//! Stateless JSON API over the shared payload builders.

use std::net::SocketAddr;
use std::path::PathBuf;

use axum::body::{Body, Bytes};
use axum::http::{header, StatusCode, Uri};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use tower_http::services::ServeDir;

use crate::api::{self, ApiError, ApiResult};

fn bytes_response(status: StatusCode, content_type: &'static str, body: Vec<u8>) -> Response {
    (
        status,
        [(header::CONTENT_TYPE, content_type)],
        Body::from(body),
    )
        .into_response()
}

fn json_ok(body: Vec<u8>) -> Response {
    bytes_response(StatusCode::OK, "application/json", body)
}

fn error_response(err: ApiError) -> Response {
    let status = StatusCode::from_u16(err.http_status()).unwrap_or(StatusCode::BAD_REQUEST);
    bytes_response(status, "application/json", err.to_json())
}

fn respond(result: ApiResult<Response>) -> Response {
    result.unwrap_or_else(error_response)
}

/// Run CPU-bound work off the async executor.
async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> ApiResult<T> + Send + 'static,
) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .unwrap_or_else(|e| Err(ApiError::bad_request(format!("request aborted: {e}"), "")))
}

async fn compute(body: Bytes) -> Response {
    respond(
        api::parse::<api::ComputeRequest>(&body)
            .and_then(|req| Ok(json_ok(api::compute(&req)?.body))),
    )
}

async fn sweep(body: Bytes) -> Response {
    let result = async {
        let req: api::SweepRequest = api::parse(&body)?;
        let content_type = match req.format {
            refstd_core::ExportFormat::Csv => "text/csv",
            refstd_core::ExportFormat::Json => "application/json",
        };
        let out = blocking(move || api::run_sweep(&req)).await?;
        Ok(bytes_response(StatusCode::OK, content_type, out))
    };
    respond(result.await)
}

async fn crossovers(body: Bytes) -> Response {
    let result = async {
        let req: api::CrossoverRequest = api::parse(&body)?;
        Ok(json_ok(blocking(move || api::crossovers(&req)).await?))
    };
    respond(result.await)
}

async fn bounds(body: Bytes) -> Response {
    respond(api::parse::<api::BoundsRequest>(&body).and_then(|req| Ok(json_ok(api::bounds(&req)?))))
}

async fn health() -> Response {
    json_ok(api::health())
}

async fn not_found(uri: Uri) -> Response {
    let err = ApiError::bad_request(format!("no route for {}", uri.path()), uri.path());
    bytes_response(StatusCode::NOT_FOUND, "application/json", err.to_json())
}

/// The API routes, with the UI bundle served at `/` when a directory is given.
pub fn router(static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/compute", post(compute))
        .route("/api/sweep", post(sweep))
        .route("/api/bounds", post(bounds))
        .route("/api/crossovers", post(crossovers))
        .route("/api/health", get(health));
    match static_dir {
        Some(dir) => api
            .route("/api/{*rest}", get(not_found).post(not_found))
            .fallback_service(ServeDir::new(dir)),
        None => api.fallback(not_found),
    }
}

pub async fn serve(addr: SocketAddr, static_dir: Option<PathBuf>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(static_dir))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

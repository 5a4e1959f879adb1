use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::rejection::{BytesRejection, QueryRejection};
use axum::extract::{DefaultBodyLimit, Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use serde_json::{json, Map, Value};

use vividmap_core::geo::{feature_json, parse_feature_collection_all, parse_region};
use vividmap_core::style::resolve_style;
use vividmap_core::{render_view, scene_view, Bbox, Dataset, LonLat, Mode, ViewState, Viewport};

use crate::error::ApiError;
use crate::state::{AppState, Session};

type ApiResult<T> = Result<T, ApiError>;
type Params = Result<Query<HashMap<String, String>>, QueryRejection>;
type Shared = State<Arc<AppState>>;

pub fn router(state: Arc<AppState>, max_body_bytes: usize) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/ontology", get(ontology))
        .route("/datasets", post(create_dataset))
        .route("/datasets/{id}", get(dataset_info))
        .route("/datasets/{id}/features", get(features))
        .route("/datasets/{id}/features/{fid}", get(feature_detail))
        .route("/datasets/{id}/count", get(count))
        .route("/datasets/{id}/search", get(search))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(session_info))
        .route("/sessions/{id}/opacity", put(put_opacity))
        .route("/sessions/{id}/visibility", put(put_visibility))
        .route("/sessions/{id}/view", put(put_view))
        .route("/sessions/{id}/render.svg", get(render))
        .route("/sessions/{id}/scene.json", get(scene))
        .route("/sessions/{id}/hit", get(hit))
        .route("/icons/{file}", get(icon))
        .fallback(|| async { ApiError::not_found("not_found", "no such endpoint") })
        .layer(DefaultBodyLimit::max(max_body_bytes))
        .with_state(state)
}

fn params(q: Params) -> ApiResult<HashMap<String, String>> {
    q.map(|Query(p)| p)
        .map_err(|e| ApiError::bad_request("bad_query", e.body_text()))
}

fn body_json(body: Result<Bytes, BytesRejection>) -> ApiResult<Value> {
    let bytes = body_bytes(body)?;
    serde_json::from_slice(&bytes)
        .map_err(|e| ApiError::bad_request("malformed_json", e.to_string()))
}

fn body_bytes(body: Result<Bytes, BytesRejection>) -> ApiResult<Bytes> {
    body.map_err(|e| {
        if e.status() == StatusCode::PAYLOAD_TOO_LARGE {
            ApiError::new(
                StatusCode::PAYLOAD_TOO_LARGE,
                "payload_too_large",
                "request body exceeds the size limit",
            )
        } else {
            ApiError::bad_request("bad_body", e.body_text())
        }
    })
}

fn dataset(state: &AppState, id: &str) -> ApiResult<Arc<Dataset>> {
    state
        .dataset(id)
        .ok_or_else(|| ApiError::not_found("unknown_dataset", format!("no dataset `{id}`")))
}

fn session(state: &AppState, id: &str) -> ApiResult<Session> {
    let handle = state
        .session(id)
        .ok_or_else(|| ApiError::not_found("unknown_session", format!("no session `{id}`")))?;
    let session = handle.lock().unwrap().clone();
    Ok(session)
}

fn session_and_dataset(state: &AppState, id: &str) -> ApiResult<(Session, Arc<Dataset>)> {
    let s = session(state, id)?;
    let d = dataset(state, &s.dataset_id)?;
    Ok((s, d))
}

fn parse_bbox(value: &Value) -> ApiResult<Bbox> {
    let bad = |m: String| ApiError::bad_request("bad_bbox", m);
    match value {
        Value::String(s) => s
            .parse()
            .map_err(|e: vividmap_core::geo::BboxError| bad(e.to_string())),
        Value::Array(items) if items.len() == 4 => {
            let mut edges = [0.0; 4];
            for (slot, item) in edges.iter_mut().zip(items) {
                *slot = item
                    .as_f64()
                    .ok_or_else(|| bad("bbox entries must be numbers".into()))?;
            }
            Bbox::from_edges(edges[0], edges[1], edges[2], edges[3]).map_err(|e| bad(e.to_string()))
        }
        _ => Err(bad("bbox must be [west, south, east, north]".into())),
    }
}

fn parse_mode(value: &Value) -> ApiResult<Mode> {
    serde_json::from_value(value.clone())
        .map_err(|_| ApiError::bad_request("bad_mode", "mode must be \"2d\" or \"3d\""))
}

fn parse_viewport(value: &Value) -> ApiResult<Viewport> {
    let bad = || {
        ApiError::bad_request(
            "bad_viewport",
            "viewport must be {width, height} with positive integers",
        )
    };
    match value {
        Value::String(s) => Ok(s.parse()?),
        Value::Object(o) => {
            let dim = |k: &str| {
                o.get(k)
                    .and_then(Value::as_u64)
                    .and_then(|v| u32::try_from(v).ok())
                    .ok_or_else(bad)
            };
            Ok(Viewport::new(dim("width")?, dim("height")?)?)
        }
        _ => Err(bad()),
    }
}

fn parse_annotations(value: &Value) -> ApiResult<Vec<vividmap_core::Region>> {
    let items = value.as_array().ok_or_else(|| {
        ApiError::bad_request("bad_region", "annotations must be an array of rings")
    })?;
    items
        .iter()
        .map(|r| {
            parse_region(&r.to_string())
                .map_err(|e| ApiError::bad_request("bad_region", e.to_string()))
        })
        .collect()
}

fn field<'a>(body: &'a Value, key: &str) -> ApiResult<&'a Value> {
    body.get(key)
        .ok_or_else(|| ApiError::bad_request("missing_field", format!("missing field `{key}`")))
}

fn str_field<'a>(body: &'a Value, key: &str) -> ApiResult<&'a str> {
    field(body, key)?
        .as_str()
        .ok_or_else(|| ApiError::bad_request("bad_field", format!("`{key}` must be a string")))
}

fn session_json(state: &AppState, s: &Session) -> Value {
    let v = &s.view_state;
    json!({
        "session_id": s.id,
        "dataset_id": s.dataset_id,
        "mode": v.mode,
        "bbox": v.bbox.edges(),
        "viewport": v.viewport,
        "opacity": v.opacity_map(state.ontology()),
        "visible": v.visible,
        "annotations": v.annotations,
    })
}

async fn health() -> Json<Value> {
    Json(json!({ "status": "ok" }))
}

async fn ontology(State(state): Shared) -> Json<Value> {
    let categories: Vec<Value> = state
        .ontology()
        .categories()
        .iter()
        .map(|c| {
            json!({
                "id": c.id,
                "label": c.label,
                "color": state.ontology().resolve_color(&c.id).map(|rgb| rgb.hex()).ok(),
                "icon": state.icons().resolve(c.icon_id.as_deref().unwrap_or_default()),
                "parent_id": c.parent_id,
            })
        })
        .collect();
    Json(json!({ "categories": categories }))
}

async fn create_dataset(
    State(state): Shared,
    body: Result<Bytes, BytesRejection>,
) -> ApiResult<Response> {
    let bytes = body_bytes(body)?;
    let text = std::str::from_utf8(&bytes)
        .map_err(|_| ApiError::bad_request("malformed_json", "body is not UTF-8"))?;
    let features =
        parse_feature_collection_all(text).map_err(|errs| ApiError::validation(&errs))?;
    let d = state.add_dataset(features)?;
    tracing::info!(dataset = d.id(), features = d.len(), "dataset stored");
    let body = json!({
        "dataset_id": d.id(),
        "feature_count": d.len(),
        "categories_present": d.categories_present(),
    });
    Ok((StatusCode::CREATED, Json(body)).into_response())
}

async fn dataset_info(State(state): Shared, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let d = dataset(&state, &id)?;
    Ok(Json(json!({
        "dataset_id": d.id(),
        "feature_count": d.len(),
        "categories_present": d.categories_present(),
        "extent": d.extent().map(|b| b.edges()),
    })))
}

async fn features(
    State(state): Shared,
    Path(id): Path<String>,
    q: Params,
) -> ApiResult<Json<Value>> {
    let d = dataset(&state, &id)?;
    let p = params(q)?;
    let view = match p.get("session") {
        Some(sid) => {
            let s = session(&state, sid)?;
            if s.dataset_id != id {
                return Err(ApiError::bad_request(
                    "session_mismatch",
                    format!("session `{sid}` belongs to dataset `{}`", s.dataset_id),
                ));
            }
            s.view_state
        }
        None => ViewState::new(
            Mode::TwoD,
            Bbox::world(),
            Viewport::new(1, 1)?,
            d.ontology(),
        ),
    };
    let bbox = match p.get("bbox") {
        Some(b) => parse_bbox(&Value::String(b.clone()))?,
        None => Bbox::world(),
    };
    let categories: BTreeSet<String> = match p.get("categories") {
        Some(list) => {
            let set: BTreeSet<String> = list
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(String::from)
                .collect();
            if let Some(unknown) = set.iter().find(|c| !d.ontology().contains(c)) {
                return Err(ApiError::not_found(
                    "unknown_category",
                    format!("unknown category `{unknown}`"),
                ));
            }
            set
        }
        None => d
            .ontology()
            .categories()
            .iter()
            .map(|c| c.id.clone())
            .collect(),
    };
    let mut out = Vec::new();
    for f in d.query(&bbox, &categories) {
        let Some(style) = resolve_style(f, &view, d.ontology())? else {
            continue;
        };
        let mut obj = feature_json(f);
        obj["style"] = serde_json::to_value(style).expect("style serializes");
        out.push(obj);
    }
    Ok(Json(
        json!({ "type": "FeatureCollection", "features": out }),
    ))
}

async fn feature_detail(
    State(state): Shared,
    Path((id, fid)): Path<(String, String)>,
) -> ApiResult<Json<Value>> {
    let d = dataset(&state, &id)?;
    let table = d.feature_detail(&fid)?;
    let rows: Vec<Value> = table
        .rows
        .iter()
        .map(|(k, v)| json!({ "key": k, "value": v }))
        .collect();
    Ok(Json(json!({ "feature_id": fid, "rows": rows })))
}

async fn count(State(state): Shared, Path(id): Path<String>, q: Params) -> ApiResult<Json<Value>> {
    let d = dataset(&state, &id)?;
    let p = params(q)?;
    let category = p.get("category").ok_or_else(|| {
        ApiError::bad_request("missing_field", "missing query parameter `category`")
    })?;
    let region_text = p.get("region").ok_or_else(|| {
        ApiError::bad_request("missing_field", "missing query parameter `region`")
    })?;
    let region = parse_region(region_text)
        .map_err(|e| ApiError::bad_request("bad_region", e.to_string()))?;
    let count = d.count_in_region(&region, category)?;
    Ok(Json(json!({ "count": count })))
}

async fn search(State(state): Shared, Path(id): Path<String>, q: Params) -> ApiResult<Json<Value>> {
    let d = dataset(&state, &id)?;
    let p = params(q)?;
    let text = p.get("q").map(String::as_str).unwrap_or_default();
    let results: Vec<Value> = d
        .search(text)
        .into_iter()
        .map(|f| {
            json!({
                "feature_id": f.id,
                "name": f.name(),
                "category_id": f.category_id,
                "position": f.anchor().or_else(|| f.bbox().map(|b| b.center())),
            })
        })
        .collect();
    Ok(Json(json!({ "results": results })))
}

async fn create_session(
    State(state): Shared,
    body: Result<Bytes, BytesRejection>,
) -> ApiResult<Response> {
    let body = body_json(body)?;
    let dataset_id = str_field(&body, "dataset_id")?;
    let d = dataset(&state, dataset_id)?;
    let mode = match body.get("mode") {
        Some(m) => parse_mode(m)?,
        None => Mode::TwoD,
    };
    let bbox = match body.get("bbox") {
        Some(b) => parse_bbox(b)?,
        None => d.extent().unwrap_or_else(Bbox::world),
    };
    let viewport = parse_viewport(field(&body, "viewport")?)?;
    let mut view = ViewState::new(mode, bbox, viewport, d.ontology());
    if let Some(a) = body.get("annotations") {
        view.annotations = parse_annotations(a)?;
    }
    let s = state.add_session(d.id(), view);
    Ok((StatusCode::CREATED, Json(json!({ "session_id": s.id }))).into_response())
}

async fn session_info(State(state): Shared, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let s = session(&state, &id)?;
    Ok(Json(session_json(&state, &s)))
}

fn apply(
    state: &AppState,
    id: &str,
    update: impl FnOnce(&ViewState) -> ApiResult<ViewState>,
) -> ApiResult<Session> {
    state
        .update_view(id, update)
        .ok_or_else(|| ApiError::not_found("unknown_session", format!("no session `{id}`")))?
}

async fn put_opacity(
    State(state): Shared,
    Path(id): Path<String>,
    body: Result<Bytes, BytesRejection>,
) -> ApiResult<Json<Value>> {
    let body = body_json(body)?;
    let category = str_field(&body, "category_id")?;
    let alpha = field(&body, "alpha")?
        .as_f64()
        .ok_or_else(|| ApiError::bad_request("bad_field", "`alpha` must be a number"))?;
    let s = apply(&state, &id, |v| {
        Ok(v.set_opacity(state.ontology(), category, alpha)?)
    })?;
    Ok(Json(
        json!({ "opacity": s.view_state.opacity_map(state.ontology()) }),
    ))
}

async fn put_visibility(
    State(state): Shared,
    Path(id): Path<String>,
    body: Result<Bytes, BytesRejection>,
) -> ApiResult<Json<Value>> {
    let body = body_json(body)?;
    let category = str_field(&body, "category_id")?;
    let visible = field(&body, "visible")?
        .as_bool()
        .ok_or_else(|| ApiError::bad_request("bad_field", "`visible` must be a boolean"))?;
    let s = apply(&state, &id, |v| {
        Ok(v.set_visibility(state.ontology(), category, visible)?)
    })?;
    Ok(Json(json!({ "visible": s.view_state.visible })))
}

async fn put_view(
    State(state): Shared,
    Path(id): Path<String>,
    body: Result<Bytes, BytesRejection>,
) -> ApiResult<Json<Value>> {
    let body = body_json(body)?;
    let Value::Object(fields) = &body else {
        return Err(ApiError::bad_request(
            "malformed_json",
            "body must be an object",
        ));
    };
    let mode = fields.get("mode").map(parse_mode).transpose()?;
    let bbox = fields.get("bbox").map(parse_bbox).transpose()?;
    let viewport = fields.get("viewport").map(parse_viewport).transpose()?;
    let annotations = fields
        .get("annotations")
        .map(parse_annotations)
        .transpose()?;
    let s = apply(&state, &id, |v| {
        let mut next = v.clone();
        next.mode = mode.unwrap_or(next.mode);
        next.bbox = bbox.unwrap_or(next.bbox);
        next.viewport = viewport.unwrap_or(next.viewport);
        if let Some(a) = annotations {
            next.annotations = a;
        }
        Ok(next)
    })?;
    Ok(Json(session_json(&state, &s)))
}

async fn render(State(state): Shared, Path(id): Path<String>) -> ApiResult<Response> {
    let (s, d) = session_and_dataset(&state, &id)?;
    let svg = render_view(&d, &s.view_state)?;
    Ok(([(header::CONTENT_TYPE, "image/svg+xml")], svg).into_response())
}

async fn scene(State(state): Shared, Path(id): Path<String>) -> ApiResult<Response> {
    let (s, d) = session_and_dataset(&state, &id)?;
    let scene = scene_view(&d, &s.view_state, state.icons())?;
    Ok((
        [(header::CONTENT_TYPE, "application/json")],
        scene.to_json(),
    )
        .into_response())
}

async fn hit(State(state): Shared, Path(id): Path<String>, q: Params) -> ApiResult<Json<Value>> {
    let (s, d) = session_and_dataset(&state, &id)?;
    let p = params(q)?;
    let coord = |k: &str| -> ApiResult<f64> {
        p.get(k)
            .ok_or_else(|| {
                ApiError::bad_request("missing_field", format!("missing query parameter `{k}`"))
            })?
            .parse()
            .map_err(|_| ApiError::bad_request("bad_coordinate", format!("`{k}` must be a number")))
    };
    let point = LonLat::checked(coord("lon")?, coord("lat")?)
        .map_err(|e| ApiError::bad_request("bad_coordinate", e.to_string()))?;
    let hit = d.hit_test(&s.view_state, point)?;
    let mut body = Map::new();
    body.insert("feature_id".into(), hit.map_or(Value::Null, Value::String));
    Ok(Json(Value::Object(body)))
}

async fn icon(State(state): Shared, Path(file): Path<String>) -> ApiResult<Response> {
    let missing = || ApiError::not_found("unknown_icon", format!("no icon `{file}`"));
    let dir = state.icon_dir().ok_or_else(missing)?;
    if file.contains(['/', '\\']) || file.starts_with('.') {
        return Err(missing());
    }
    let bytes = tokio::fs::read(dir.join(&file))
        .await
        .map_err(|_| missing())?;
    let mime = match file.rsplit_once('.').map(|(_, ext)| ext) {
        Some("svg") => "image/svg+xml",
        Some("png") => "image/png",
        _ => "application/octet-stream",
    };
    Ok(([(header::CONTENT_TYPE, mime)], bytes).into_response())
}

//! Resource-oriented HTTP API with bearer-token sessions.

use std::collections::BTreeSet;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{FromRequestParts, Path, Query, State};
use axum::http::request::Parts;
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use cohortlens_core::instruments::Instrument;
use cohortlens_core::model::{Question, QuestionGroup, QuestionnaireDef, Respondent, RespondentGroup};
use cohortlens_core::roster::{RelationalTemplate, RosterEdit};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::auth::UserAccount;
use crate::csv_import::MappingSpec;
use crate::error::ServiceError;
use crate::service::{ImportRequest, NewUser, OpenWaveRequest, Service, SubmitRequest};

pub type AppState = Arc<Service>;

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let message = self.to_string();
        let (status, extra) = match self {
            ServiceError::Unauthenticated | ServiceError::BadCredentials => (StatusCode::UNAUTHORIZED, json!({})),
            ServiceError::Denied(d) => (StatusCode::FORBIDDEN, json!({ "rule": d.rule, "action": d.action.name() })),
            ServiceError::NotInRoster(_) => (StatusCode::FORBIDDEN, json!({})),
            ServiceError::NotFound(_) => (StatusCode::NOT_FOUND, json!({})),
            ServiceError::Conflict(_) => (StatusCode::CONFLICT, json!({})),
            ServiceError::WaveClosed(_) => (StatusCode::CONFLICT, json!({ "code": "wave-closed" })),
            ServiceError::Invalid(_) | ServiceError::Scoring(_) => (StatusCode::UNPROCESSABLE_ENTITY, json!({})),
            ServiceError::Findings(f) => (StatusCode::UNPROCESSABLE_ENTITY, json!({ "findings": f })),
            ServiceError::Response(issues) => (StatusCode::UNPROCESSABLE_ENTITY, json!({ "issues": issues })),
            ServiceError::ImportRejected(summary) => (StatusCode::UNPROCESSABLE_ENTITY, json!({ "summary": summary })),
            ServiceError::Io(_) => (StatusCode::INTERNAL_SERVER_ERROR, json!({})),
        };
        let mut body = extra;
        body["error"] = Value::String(message);
        (status, Json(body)).into_response()
    }
}

/// The signed-in account behind the request's bearer token.
pub struct Caller(pub UserAccount);

fn bearer(parts: &Parts) -> Option<&str> {
    parts.headers.get(header::AUTHORIZATION)?.to_str().ok()?.strip_prefix("Bearer ")
}

impl FromRequestParts<AppState> for Caller {
    type Rejection = ServiceError;

    async fn from_request_parts(parts: &mut Parts, state: &AppState) -> Result<Self, Self::Rejection> {
        let token = bearer(parts).ok_or(ServiceError::Unauthenticated)?;
        state.account(token).map(Caller)
    }
}

type ApiResult<T> = Result<T, ServiceError>;

/// Runs CPU-bound work off the async executor.
async fn blocking<T: Send + 'static>(svc: AppState, f: impl FnOnce(&Service) -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(move || f(&svc))
        .await
        .map_err(|e| ServiceError::Io(std::io::Error::other(e.to_string())))?
}

#[derive(Deserialize)]
struct Credentials {
    login: String,
    password: String,
}

async fn create_session(State(svc): State<AppState>, Json(c): Json<Credentials>) -> ApiResult<impl IntoResponse> {
    let s = blocking(svc, move |svc| svc.login(&c.login, &c.password)).await?;
    Ok((StatusCode::CREATED, Json(s)))
}

async fn delete_session(State(svc): State<AppState>, headers: HeaderMap) -> StatusCode {
    if let Some(t) = headers.get(header::AUTHORIZATION).and_then(|v| v.to_str().ok()).and_then(|v| v.strip_prefix("Bearer ")) {
        svc.logout(t);
    }
    StatusCode::NO_CONTENT
}

async fn me(Caller(u): Caller) -> Json<crate::service::AccountView> {
    Json((&u).into())
}

async fn create_user(State(svc): State<AppState>, Caller(u): Caller, Json(n): Json<NewUser>) -> ApiResult<impl IntoResponse> {
    let v = blocking(svc, move |svc| svc.create_user(&u, n)).await?;
    Ok((StatusCode::CREATED, Json(v)))
}

#[derive(Deserialize)]
struct SettingsBody {
    #[serde(default)]
    flagged_fields: Option<BTreeSet<String>>,
    #[serde(default)]
    allow_resubmission: Option<bool>,
}

async fn put_settings(State(svc): State<AppState>, Caller(u): Caller, Json(b): Json<SettingsBody>) -> ApiResult<StatusCode> {
    blocking(svc, move |svc| {
        if let Some(f) = b.flagged_fields {
            svc.set_flagged_fields(&u, f)?;
        }
        if let Some(a) = b.allow_resubmission {
            svc.set_allow_resubmission(&u, a)?;
        }
        Ok(())
    })
    .await?;
    Ok(StatusCode::NO_CONTENT)
}

async fn audit_log(State(svc): State<AppState>, Caller(u): Caller) -> ApiResult<impl IntoResponse> {
    Ok(Json(svc.audit_log(&u)?))
}

async fn pseudonyms(State(svc): State<AppState>, Caller(u): Caller) -> ApiResult<impl IntoResponse> {
    Ok(Json(svc.pseudonym_map(&u)?))
}

async fn list_instruments(State(svc): State<AppState>, Caller(u): Caller) -> ApiResult<impl IntoResponse> {
    Ok(Json(svc.list_instruments(&u)?))
}

async fn register_instrument(State(svc): State<AppState>, Caller(u): Caller, Json(i): Json<Instrument>) -> ApiResult<impl IntoResponse> {
    let id = blocking(svc, move |svc| svc.register_instrument(&u, i)).await?;
    Ok((StatusCode::CREATED, Json(json!({ "id": id }))))
}

async fn catalog(State(svc): State<AppState>, Caller(u): Caller) -> ApiResult<impl IntoResponse> {
    Ok(Json(svc.catalog(&u)?))
}

async fn create_question(State(svc): State<AppState>, Caller(u): Caller, Json(q): Json<Question>) -> ApiResult<StatusCode> {
    blocking(svc, move |svc| svc.create_question(&u, q)).await?;
    Ok(StatusCode::CREATED)
}

async fn create_question_group(State(svc): State<AppState>, Caller(u): Caller, Json(g): Json<QuestionGroup>) -> ApiResult<StatusCode> {
    blocking(svc, move |svc| svc.create_group(&u, g)).await?;
    Ok(StatusCode::CREATED)
}

async fn create_template(State(svc): State<AppState>, Caller(u): Caller, Json(t): Json<RelationalTemplate>) -> ApiResult<StatusCode> {
    blocking(svc, move |svc| svc.create_template(&u, t)).await?;
    Ok(StatusCode::CREATED)
}

async fn list_questionnaires(State(svc): State<AppState>, Caller(u): Caller) -> ApiResult<impl IntoResponse> {
    Ok(Json(svc.list_questionnaires(&u)?))
}

async fn create_questionnaire(State(svc): State<AppState>, Caller(u): Caller, Json(d): Json<QuestionnaireDef>) -> ApiResult<impl IntoResponse> {
    let v = blocking(svc, move |svc| svc.create_questionnaire(&u, d)).await?;
    Ok((StatusCode::CREATED, Json(v)))
}

async fn get_questionnaire(State(svc): State<AppState>, Caller(u): Caller, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    Ok(Json(svc.get_questionnaire(&u, &id)?))
}

async fn put_questionnaire(
    State(svc): State<AppState>,
    Caller(u): Caller,
    Path(id): Path<String>,
    Json(d): Json<QuestionnaireDef>,
) -> ApiResult<impl IntoResponse> {
    Ok(Json(blocking(svc, move |svc| svc.update_questionnaire(&u, &id, d)).await?))
}

async fn open_wave(
    State(svc): State<AppState>,
    Caller(u): Caller,
    Path(id): Path<String>,
    Json(r): Json<OpenWaveRequest>,
) -> ApiResult<impl IntoResponse> {
    let w = blocking(svc, move |svc| svc.open_wave(&u, &id, r)).await?;
    Ok((StatusCode::CREATED, Json(w)))
}

#[derive(Deserialize)]
struct TabsQuery {
    group: String,
}

async fn wave_tabs(
    State(svc): State<AppState>,
    Caller(u): Caller,
    Path(id): Path<String>,
    Query(q): Query<TabsQuery>,
) -> ApiResult<impl IntoResponse> {
    Ok(Json(blocking(svc, move |svc| svc.wave_tabs(&u, &id, &q.group)).await?))
}

async fn create_respondent(State(svc): State<AppState>, Caller(u): Caller, Json(r): Json<Respondent>) -> ApiResult<StatusCode> {
    blocking(svc, move |svc| svc.create_respondent(&u, r)).await?;
    Ok(StatusCode::CREATED)
}

async fn get_respondent(State(svc): State<AppState>, Caller(u): Caller, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    Ok(Json(blocking(svc, move |svc| svc.personal_data(&u, &id)).await?))
}

async fn create_respondent_group(State(svc): State<AppState>, Caller(u): Caller, Json(g): Json<RespondentGroup>) -> ApiResult<impl IntoResponse> {
    let g = blocking(svc, move |svc| svc.create_respondent_group(&u, g)).await?;
    Ok((StatusCode::CREATED, Json(g)))
}

async fn get_wave(State(svc): State<AppState>, Caller(u): Caller, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    let w = svc.wave(&u, &id)?;
    Ok(Json(json!({
        "wave": w.wave,
        "relational": w.relational.iter().map(|i| json!({
            "template_id": i.template_id, "relation": i.relation, "one_mode": i.one_mode, "items": i.item_count()
        })).collect::<Vec<_>>(),
        "responses": w.responses.len(),
        "scored": w.scores.len(),
    })))
}

async fn close_wave(State(svc): State<AppState>, Caller(u): Caller, Path(id): Path<String>) -> ApiResult<StatusCode> {
    blocking(svc, move |svc| svc.close_wave(&u, &id)).await?;
    Ok(StatusCode::NO_CONTENT)
}

async fn edit_roster(State(svc): State<AppState>, Caller(u): Caller, Path(id): Path<String>, Json(e): Json<RosterEdit>) -> ApiResult<impl IntoResponse> {
    let w = blocking(svc, move |svc| svc.edit_roster(&u, &id, e)).await?;
    Ok(Json(json!({ "roster": w.wave.roster })))
}

#[derive(Deserialize)]
struct RespondentQuery {
    #[serde(default)]
    respondent: Option<String>,
}

async fn form(
    State(svc): State<AppState>,
    Caller(u): Caller,
    Path(id): Path<String>,
    Query(q): Query<RespondentQuery>,
) -> ApiResult<impl IntoResponse> {
    Ok(Json(svc.form(&u, &id, q.respondent.as_deref())?))
}

async fn submit(State(svc): State<AppState>, Caller(u): Caller, Path(id): Path<String>, Json(r): Json<SubmitRequest>) -> ApiResult<impl IntoResponse> {
    let out = blocking(svc, move |svc| svc.submit_response(&u, &id, r)).await?;
    Ok((StatusCode::CREATED, Json(out)))
}

async fn get_response(
    State(svc): State<AppState>,
    Caller(u): Caller,
    Path((id, respondent)): Path<(String, String)>,
) -> ApiResult<impl IntoResponse> {
    Ok(Json(svc.response(&u, &id, &respondent)?))
}

async fn scores(State(svc): State<AppState>, Caller(u): Caller, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    Ok(Json(blocking(svc, move |svc| svc.scores(&u, &id)).await?))
}

#[derive(Deserialize)]
struct AnalysisQuery {
    #[serde(default)]
    relation: Option<String>,
    #[serde(default)]
    format: Option<String>,
    #[serde(default)]
    wave: Option<String>,
}

async fn network(
    State(svc): State<AppState>,
    Caller(u): Caller,
    Path(id): Path<String>,
    Query(q): Query<AnalysisQuery>,
) -> ApiResult<impl IntoResponse> {
    Ok(Json(blocking(svc, move |svc| svc.network(&u, &id, q.relation.as_deref())).await?))
}

fn report_response(format: &str, bytes: Vec<u8>) -> Response {
    let ct = if format.eq_ignore_ascii_case("json") || format.eq_ignore_ascii_case("structured") {
        "application/json"
    } else {
        "text/plain; charset=utf-8"
    };
    ([(header::CONTENT_TYPE, ct)], bytes).into_response()
}

async fn respondent_report(
    State(svc): State<AppState>,
    Caller(u): Caller,
    Path(id): Path<String>,
    Query(q): Query<AnalysisQuery>,
) -> ApiResult<Response> {
    let wave = q.wave.clone().ok_or_else(|| ServiceError::Invalid("query parameter `wave` is required".into()))?;
    let format = q.format.clone().unwrap_or_else(|| "text".into());
    let f = format.clone();
    let bytes = blocking(svc, move |svc| svc.report(&u, &id, &wave, q.relation.as_deref(), &f)).await?;
    Ok(report_response(&format, bytes))
}

async fn group_report(
    State(svc): State<AppState>,
    Caller(u): Caller,
    Path(id): Path<String>,
    Query(q): Query<AnalysisQuery>,
) -> ApiResult<Response> {
    let format = q.format.clone().unwrap_or_else(|| "text".into());
    let f = format.clone();
    let bytes = blocking(svc, move |svc| svc.group_report(&u, &id, q.relation.as_deref(), &f)).await?;
    Ok(report_response(&format, bytes))
}

async fn export(
    State(svc): State<AppState>,
    Caller(u): Caller,
    Path(id): Path<String>,
    Query(q): Query<AnalysisQuery>,
) -> ApiResult<Response> {
    let format = q.format.clone().ok_or_else(|| ServiceError::Invalid("query parameter `format` is required".into()))?;
    let a = blocking(svc, move |svc| svc.export(&u, &id, &format, q.relation.as_deref())).await?;
    let disposition = format!("attachment; filename=\"{}\"", a.filename);
    Ok(([(header::CONTENT_TYPE, a.content_type().to_string()), (header::CONTENT_DISPOSITION, disposition)], a.bytes).into_response())
}

#[derive(Deserialize)]
struct ImportQuery {
    questionnaire: Option<String>,
    #[serde(default)]
    version: Option<u32>,
    #[serde(default)]
    group_name: Option<String>,
    #[serde(default)]
    wave_label: Option<String>,
    #[serde(default)]
    strict: Option<bool>,
}

/// Accepts either a JSON import request or a raw `text/csv` body described by
/// query parameters.
async fn import_csv(
    State(svc): State<AppState>,
    Caller(u): Caller,
    Query(q): Query<ImportQuery>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult<impl IntoResponse> {
    let is_csv = headers
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.starts_with("text/csv"));
    let req = if is_csv {
        let csv = String::from_utf8(body.to_vec()).map_err(|_| ServiceError::Invalid("CSV body is not UTF-8".into()))?;
        let questionnaire_id = q.questionnaire.ok_or_else(|| ServiceError::Invalid("query parameter `questionnaire` is required".into()))?;
        let mapping = MappingSpec { strict: q.strict.unwrap_or(false), ..MappingSpec::default() };
        ImportRequest {
            questionnaire_id,
            version: q.version,
            group_name: q.group_name.unwrap_or_default(),
            wave_label: q.wave_label.unwrap_or_default(),
            opened_at: None,
            mapping,
            csv,
        }
    } else {
        serde_json::from_slice(&body).map_err(|e| ServiceError::Invalid(format!("import request: {e}")))?
    };
    let summary = blocking(svc, move |svc| svc.import_csv(&u, req)).await?;
    Ok((StatusCode::CREATED, Json(summary)))
}

pub fn router(service: AppState) -> Router {
    Router::new()
        .route("/api/session", post(create_session).delete(delete_session))
        .route("/api/me", get(me))
        .route("/api/users", post(create_user))
        .route("/api/settings", axum::routing::put(put_settings))
        .route("/api/audit-log", get(audit_log))
        .route("/api/pseudonyms", get(pseudonyms))
        .route("/api/instruments", get(list_instruments).post(register_instrument))
        .route("/api/catalog", get(catalog))
        .route("/api/questions", post(create_question))
        .route("/api/question-groups", post(create_question_group))
        .route("/api/templates", post(create_template))
        .route("/api/questionnaires", get(list_questionnaires).post(create_questionnaire))
        .route("/api/questionnaires/{id}", get(get_questionnaire).put(put_questionnaire))
        .route("/api/questionnaires/{id}/waves", post(open_wave))
        .route("/api/questionnaires/{id}/tabs", get(wave_tabs))
        .route("/api/respondents", post(create_respondent))
        .route("/api/respondents/{id}", get(get_respondent))
        .route("/api/respondents/{id}/report", get(respondent_report))
        .route("/api/groups", post(create_respondent_group))
        .route("/api/waves/{id}", get(get_wave))
        .route("/api/waves/{id}/close", post(close_wave))
        .route("/api/waves/{id}/roster", post(edit_roster))
        .route("/api/waves/{id}/form", get(form))
        .route("/api/waves/{id}/responses", post(submit))
        .route("/api/waves/{id}/responses/{respondent}", get(get_response))
        .route("/api/waves/{id}/scores", get(scores))
        .route("/api/waves/{id}/network", get(network))
        .route("/api/waves/{id}/report", get(group_report))
        .route("/api/waves/{id}/export", get(export))
        .route("/api/import/csv", post(import_csv))
        .with_state(service)
}

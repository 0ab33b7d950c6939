//! HTTP review service over a workspace of runs.
//!
//! Blind mode (the default) withholds everything derived from the manifest:
//! original clause texts, match status and the automated report's listings.

use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use regconflict_core::adjudication::{consensus, current_decisions, AdjudicationError, Decision, ValidatedMetrics, Verdict};
use regconflict_core::{ClauseId, Finding};
use serde::{Deserialize, Serialize};

use crate::store::{RunArtifacts, RunStore, RunSummary, StoreError};

pub struct AppState {
    pub store: RunStore,
    pub blind: bool,
}

pub fn router(store: RunStore, blind: bool) -> Router {
    Router::new()
        .route("/runs", get(list_runs))
        .route("/runs/:id/findings", get(list_findings))
        .route("/runs/:id/findings/:fid", get(one_finding))
        .route("/runs/:id/findings/:fid/verdict", post(post_verdict))
        .route("/runs/:id/metrics", get(metrics))
        .with_state(Arc::new(AppState { store, blind }))
}

pub async fn serve(store: RunStore, blind: bool, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(store, blind)).await
}

pub struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(serde_json::json!({ "error": self.1 }))).into_response()
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let status = match &e {
            StoreError::Adjudication(AdjudicationError::EmptyReviewer) => StatusCode::UNPROCESSABLE_ENTITY,
            StoreError::Adjudication(_) | StoreError::NoFindings(_) => StatusCode::NOT_FOUND,
            StoreError::Artifact(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError(status, e.to_string())
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

#[derive(Debug, Serialize)]
pub struct RunsPayload {
    pub blind: bool,
    pub runs: Vec<RunSummary>,
}

async fn list_runs(State(s): State<Arc<AppState>>) -> ApiResult<RunsPayload> {
    Ok(Json(RunsPayload {
        blind: s.blind,
        runs: s.store.summaries()?,
    }))
}

/// Quote location in `text`, in characters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Highlight {
    pub quote: String,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClauseContext {
    pub id: ClauseId,
    pub doc_id: Option<String>,
    pub title: Option<String>,
    /// The clause as the detector saw it; absent for ids not in the corpus.
    pub text: Option<String>,
    /// Pre-injection text, when it differs. Withheld in blind mode.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub original_text: Option<String>,
    pub highlights: Vec<Highlight>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FindingView {
    #[serde(flatten)]
    pub finding: Finding,
    pub adjudicated: bool,
    pub consensus: Option<Decision>,
    pub verdict_count: usize,
    pub clauses: Vec<ClauseContext>,
    /// Manifest conflict this finding was matched to. Withheld in blind mode.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub matched_conflict: Option<String>,
}

fn char_offset(text: &str, byte: usize) -> usize {
    text[..byte].chars().count()
}

fn highlights(text: &str, quotes: &[String]) -> Vec<Highlight> {
    let mut out = Vec::new();
    for q in quotes.iter().filter(|q| !q.is_empty()) {
        let mut from = 0;
        while let Some(rel) = text[from..].find(q.as_str()) {
            let b = from + rel;
            out.push(Highlight {
                quote: q.clone(),
                start: char_offset(text, b),
                end: char_offset(text, b + q.len()),
            });
            from = b + q.len();
        }
    }
    out.sort_by_key(|h| (h.start, h.end));
    out
}

fn view(run: &RunArtifacts, log: &[Verdict], f: &Finding, blind: bool) -> FindingView {
    let decisions = current_decisions(log);
    let votes = decisions.get(&f.id);
    let c = votes.and_then(|v| consensus(v.values()));
    let report = (!blind).then(|| run.automated_report());
    let clauses = f
        .clause_ids
        .iter()
        .map(|id| {
            let clause = run.corpus.as_ref().and_then(|c| c.find_all(id).next().map(|(_, cl)| cl));
            let original_text = if blind {
                None
            } else {
                run.manifest
                    .as_ref()
                    .and_then(|m| m.conflicts.iter().find_map(|k| k.original_texts.get(id)))
                    .filter(|o| clause.is_none_or(|cl| cl.body != **o))
                    .cloned()
            };
            ClauseContext {
                id: id.clone(),
                doc_id: clause.map(|cl| cl.doc_id.clone()),
                title: clause.and_then(|cl| cl.title.clone()),
                text: clause.map(|cl| cl.body.clone()),
                original_text,
                highlights: clause.map(|cl| highlights(&cl.body, &f.quotes)).unwrap_or_default(),
            }
        })
        .collect();
    FindingView {
        finding: f.clone(),
        adjudicated: c.is_some(),
        consensus: c,
        verdict_count: log.iter().filter(|v| v.finding_id == f.id).count(),
        clauses,
        matched_conflict: report.and_then(|r| {
            r.assignments
                .iter()
                .find(|a| a.finding_id == f.id)
                .map(|a| a.conflict_id.clone())
        }),
    }
}

#[derive(Debug, Deserialize)]
pub struct StatusQuery {
    pub status: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct FindingsPayload {
    pub run_id: String,
    pub blind: bool,
    pub findings: Vec<FindingView>,
}

async fn list_findings(
    State(s): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(q): Query<StatusQuery>,
) -> ApiResult<FindingsPayload> {
    let only_open = match q.status.as_deref() {
        None | Some("all") => false,
        Some("unadjudicated") => true,
        Some(other) => {
            return Err(ApiError(
                StatusCode::BAD_REQUEST,
                format!("status must be all or unadjudicated, got {other:?}"),
            ))
        }
    };
    let run = s.store.load(&id)?;
    let log = s.store.verdicts(&id)?;
    let findings = run
        .findings
        .findings
        .iter()
        .map(|f| view(&run, &log, f, s.blind))
        .filter(|v| !(only_open && v.adjudicated))
        .collect();
    Ok(Json(FindingsPayload {
        run_id: id,
        blind: s.blind,
        findings,
    }))
}

#[derive(Debug, Serialize)]
pub struct FindingPayload {
    pub finding: FindingView,
    pub verdicts: Vec<Verdict>,
}

async fn one_finding(
    State(s): State<Arc<AppState>>,
    Path((id, fid)): Path<(String, String)>,
) -> ApiResult<FindingPayload> {
    let run = s.store.load(&id)?;
    let log = s.store.verdicts(&id)?;
    let f = run
        .findings
        .findings
        .iter()
        .find(|f| f.id == fid)
        .ok_or_else(|| StoreError::from(AdjudicationError::UnknownFinding(fid.clone())))?;
    Ok(Json(FindingPayload {
        finding: view(&run, &log, f, s.blind),
        verdicts: log.into_iter().filter(|v| v.finding_id == fid).collect(),
    }))
}

/// Request body; the finding comes from the path.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerdictBody {
    pub decision: Decision,
    #[serde(default)]
    pub note: String,
    pub reviewer: String,
    #[serde(default)]
    pub timestamp: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct VerdictAck {
    pub finding_id: String,
    pub log_length: usize,
    pub consensus: Option<Decision>,
}

async fn post_verdict(
    State(s): State<Arc<AppState>>,
    Path((id, fid)): Path<(String, String)>,
    body: Bytes,
) -> Result<(StatusCode, Json<VerdictAck>), ApiError> {
    // unknown run or finding wins over a bad body
    let run = s.store.load(&id)?;
    if !run.findings.findings.iter().any(|f| f.id == fid) {
        return Err(StoreError::from(AdjudicationError::UnknownFinding(fid)).into());
    }
    let b: VerdictBody =
        serde_json::from_slice(&body).map_err(|e| ApiError(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()))?;
    let timestamp = match b.timestamp {
        Some(t) => {
            chrono::DateTime::parse_from_rfc3339(&t)
                .map_err(|e| ApiError(StatusCode::UNPROCESSABLE_ENTITY, format!("timestamp: {e}")))?;
            t
        }
        None => chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
    };
    let verdict = Verdict {
        finding_id: fid.clone(),
        decision: b.decision,
        note: b.note,
        reviewer: b.reviewer,
        timestamp,
    };
    let log_length = s.store.record_verdict(&id, verdict)?;
    let log = s.store.verdicts(&id)?;
    let c = current_decisions(&log).get(&fid).and_then(|v| consensus(v.values()));
    Ok((
        StatusCode::CREATED,
        Json(VerdictAck {
            finding_id: fid,
            log_length,
            consensus: c,
        }),
    ))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct MetricsPayload {
    pub run_id: String,
    pub blind: bool,
    pub metrics: ValidatedMetrics,
}

/// Drops the parts of validated metrics that reveal ground truth.
pub fn redact(mut m: ValidatedMetrics) -> ValidatedMetrics {
    m.automated.assignments.clear();
    m.automated.false_positives.clear();
    m.automated.false_negatives.clear();
    m.novel_confirmed.clear();
    m
}

async fn metrics(State(s): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<MetricsPayload> {
    let (_, m) = s.store.validated(&id)?;
    Ok(Json(MetricsPayload {
        run_id: id,
        blind: s.blind,
        metrics: if s.blind { redact(m) } else { m },
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn highlight_offsets_are_chars() {
        let h = highlights("Ramp ≤ 1:20, then 1:20.", &["1:20".into()]);
        assert_eq!(h.len(), 2);
        assert_eq!((h[0].start, h[0].end), (7, 11));
        let text: Vec<char> = "Ramp ≤ 1:20, then 1:20.".chars().collect();
        assert_eq!(text[h[1].start..h[1].end].iter().collect::<String>(), "1:20");
    }
}

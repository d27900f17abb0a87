//! Review service: serves exported findings with their source context,
//! records reviewer assessments and computes experiment statistics.
//!
//! All POST requests need an `Authorization: Bearer <token>` header whose
//! token is listed in the token table. Errors are JSON objects with an
//! `error` field.

mod error;
mod tokens;

use std::collections::{BTreeMap, BTreeSet};
use std::net::SocketAddr;
use std::path::{Path as FsPath, PathBuf};
use std::sync::{Arc, RwLock};

use axum::extract::{FromRequestParts, Path, Query, State};
use axum::http::request::Parts;
use axum::http::header::AUTHORIZATION;
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use misuse_core::bench::dataset::KnownMisuse;
use misuse_core::bench::experiment::{ExperimentKind, ExperimentResult, FindingRecord};
use misuse_core::bench::export::{read_result, results_dir};
use misuse_core::pipeline::{read_misuses, stats_context, Workspace};
use misuse_core::review::{
    experiment_stats, now_millis, Assessment, Decision, DetectorStats, FnRootCause, FpRootCause, ReviewState,
    ReviewStore, Resolution, REQUIRED_REVIEWS, REVIEWER_GUIDANCE,
};

pub use error::ApiError;
pub use tokens::{TokenEntry, TokenError, TokenTable};

/// Lines of context on each side of a finding.
pub const SNIPPET_CONTEXT: u32 = 10;

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error(transparent)]
    Store(#[from] misuse_core::review::ReviewError),
    #[error("{addr}: {source}")]
    Bind { addr: SocketAddr, source: std::io::Error },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Shared service state. Reads take the store lock shared; writes take
/// it exclusively, so the log has a single writer.
pub struct AppState {
    workspace: Workspace,
    store: RwLock<ReviewStore>,
    tokens: TokenTable,
}

impl AppState {
    /// `store` defaults to the workspace's review log.
    pub fn open(workspace: &FsPath, store: Option<&FsPath>, tokens: TokenTable) -> Result<Arc<Self>, ServeError> {
        let workspace = Workspace::new(workspace);
        let path = store.map_or_else(|| workspace.store_path(), FsPath::to_owned);
        Ok(Arc::new(Self {
            store: RwLock::new(ReviewStore::open(&path)?),
            workspace,
            tokens,
        }))
    }

    fn result(&self, exp: ExperimentKind) -> Result<Option<ExperimentResult>, ApiError> {
        let dir = results_dir(&self.workspace.root, exp);
        if !dir.join("findings.jsonl").exists() {
            return Ok(None);
        }
        read_result(&dir, exp).map(Some).map_err(|e| ApiError::Internal(e.to_string()))
    }

    fn misuses(&self, exp: ExperimentKind) -> Vec<KnownMisuse> {
        read_misuses(&results_dir(&self.workspace.root, exp)).unwrap_or_default()
    }

    /// Finds a finding by id; the id's first segment names the experiment.
    fn finding(&self, id: &str) -> Result<(ExperimentResult, FindingRecord), ApiError> {
        let not_found = || ApiError::NotFound(format!("unknown finding `{id}`"));
        let exp: ExperimentKind = id.split('/').next().unwrap_or_default().parse().map_err(|_| not_found())?;
        let result = self.result(exp)?.ok_or_else(not_found)?;
        let f = result.findings.iter().find(|f| f.id == id).cloned().ok_or_else(not_found)?;
        Ok((result, f))
    }

    fn read_store(&self) -> std::sync::RwLockReadGuard<'_, ReviewStore> {
        self.store.read().unwrap_or_else(|p| p.into_inner())
    }

    fn write_store(&self) -> std::sync::RwLockWriteGuard<'_, ReviewStore> {
        self.store.write().unwrap_or_else(|p| p.into_inner())
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/experiments", get(experiments))
        .route("/findings", get(list_findings))
        .route("/findings/{*id}", get(finding_detail))
        .route("/assessments", post(post_assessment))
        .route("/resolutions", post(post_resolution))
        .route("/stats", get(stats))
        .route("/vocabulary", get(vocabulary))
        .with_state(state)
}

/// Serves until Ctrl-C.
pub async fn serve(addr: SocketAddr, state: Arc<AppState>) -> Result<(), ServeError> {
    let listener = tokio::net::TcpListener::bind(addr).await.map_err(|source| ServeError::Bind { addr, source })?;
    log::info!("review service listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

/// Runs [`serve`] on a fresh multi-threaded runtime.
pub fn serve_blocking(addr: SocketAddr, state: Arc<AppState>) -> Result<(), ServeError> {
    tokio::runtime::Builder::new_multi_thread().enable_all().build()?.block_on(serve(addr, state))
}

/// Reviewer identified by the request's bearer token.
pub struct Reviewer(pub String);

impl FromRequestParts<Arc<AppState>> for Reviewer {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &Arc<AppState>) -> Result<Self, Self::Rejection> {
        let token = parts
            .headers
            .get(AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "))
            .map(str::trim)
            .ok_or(ApiError::Unauthorized)?;
        state.tokens.reviewer(token).map(|r| Reviewer(r.to_owned())).ok_or(ApiError::Unauthorized)
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub experiment: ExperimentKind,
    pub available: bool,
    pub detectors: Vec<String>,
    pub runs: usize,
    pub failed_runs: usize,
    pub findings: usize,
}

async fn experiments(State(state): State<Arc<AppState>>) -> Result<Json<Vec<ExperimentSummary>>, ApiError> {
    let mut out = Vec::new();
    for exp in ExperimentKind::ALL {
        let r = state.result(exp)?;
        out.push(match r {
            None => ExperimentSummary {
                experiment: exp,
                available: false,
                detectors: Vec::new(),
                runs: 0,
                failed_runs: 0,
                findings: 0,
            },
            Some(r) => ExperimentSummary {
                experiment: exp,
                available: true,
                detectors: r.runs.iter().map(|x| x.detector_id.clone()).collect::<BTreeSet<_>>().into_iter().collect(),
                runs: r.runs.len(),
                failed_runs: r.failed_runs(),
                findings: r.findings.len(),
            },
        });
    }
    Ok(Json(out))
}

/// Review state plus derived fields.
#[derive(Debug, Serialize, Deserialize)]
pub struct ReviewView {
    #[serde(flatten)]
    pub state: ReviewState,
    pub progress: String,
    pub gate_satisfied: bool,
    pub disagreement: bool,
    pub final_decision: Option<Decision>,
}

impl From<ReviewState> for ReviewView {
    fn from(state: ReviewState) -> Self {
        Self {
            progress: state.progress(),
            gate_satisfied: state.gate_satisfied(),
            disagreement: state.disagreement(),
            final_decision: state.final_decision(),
            state,
        }
    }
}

#[derive(Debug, Deserialize)]
pub struct FindingQuery {
    pub experiment: Option<ExperimentKind>,
    pub detector: Option<String>,
    /// A version id, or `project/version`.
    pub version: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct FindingSummary {
    pub id: String,
    pub experiment: ExperimentKind,
    pub detector_id: String,
    pub project: String,
    pub version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub misuse: Option<String>,
    pub rank: usize,
    pub score: misuse_core::model::Score,
    pub location: misuse_core::model::SourceLocation,
    pub progress: String,
    pub reviewers: Vec<String>,
    pub resolved: bool,
    pub disagreement: bool,
    pub final_decision: Option<Decision>,
}

async fn list_findings(
    State(state): State<Arc<AppState>>,
    Query(q): Query<FindingQuery>,
) -> Result<Json<Vec<FindingSummary>>, ApiError> {
    let exps: Vec<ExperimentKind> = match q.experiment {
        Some(e) => vec![e],
        None => ExperimentKind::ALL.to_vec(),
    };
    let store = state.read_store();
    let mut out = Vec::new();
    for exp in exps {
        let Some(result) = state.result(exp)? else { continue };
        for f in result.findings {
            if q.detector.as_deref().is_some_and(|d| d != f.detector_id) {
                continue;
            }
            if let Some(v) = q.version.as_deref() {
                if v != f.version && v != format!("{}/{}", f.project, f.version) {
                    continue;
                }
            }
            let st = store.state(&f.id);
            out.push(FindingSummary {
                progress: st.progress(),
                reviewers: st.assessments.iter().map(|a| a.reviewer.clone()).collect(),
                resolved: st.resolution.is_some(),
                disagreement: st.disagreement(),
                final_decision: st.final_decision(),
                id: f.id,
                experiment: f.experiment,
                detector_id: f.detector_id,
                project: f.project,
                version: f.version,
                misuse: f.misuse,
                rank: f.rank,
                score: f.score,
                location: f.location,
            });
        }
    }
    Ok(Json(out))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Snippet {
    pub file: String,
    /// 1-based number of the first line in `lines`.
    pub start_line: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub focus_line: Option<u32>,
    pub lines: Vec<String>,
}

/// Reads the lines around `line` from `path`.
pub fn read_snippet(path: &FsPath, file: &str, line: Option<u32>) -> std::io::Result<Snippet> {
    let text = std::fs::read_to_string(path)?;
    let focus = line.unwrap_or(1).max(1);
    let start = focus.saturating_sub(SNIPPET_CONTEXT).max(1);
    let end = focus + SNIPPET_CONTEXT;
    let lines = text
        .lines()
        .enumerate()
        .filter(|(i, _)| (start..=end).contains(&(*i as u32 + 1)))
        .map(|(_, l)| l.to_owned())
        .collect();
    Ok(Snippet {
        file: file.to_owned(),
        start_line: start,
        focus_line: line,
        lines,
    })
}

#[derive(Debug, Serialize, Deserialize)]
pub struct MisuseView {
    pub id: String,
    pub description: String,
    pub fix_description: String,
    pub location: misuse_core::model::SourceLocation,
    pub ambiguous: bool,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct FindingDetail {
    pub finding: FindingRecord,
    pub snippet: Option<Snippet>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snippet_error: Option<String>,
    pub review: ReviewView,
    /// Known misuses this finding is a potential hit for.
    pub misuses: Vec<MisuseView>,
    pub guidance: String,
}

async fn finding_detail(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> Result<Json<FindingDetail>, ApiError> {
    let (result, finding) = state.finding(&id)?;
    let loc = &finding.location;
    let path = state.workspace.checkout_dir(&loc.project_id, &loc.version_id).join(&loc.file_path);
    let (snippet, snippet_error) = match read_snippet(&path, &loc.file_path, loc.line) {
        Ok(s) => (Some(s), None),
        Err(e) => (None, Some(format!("{}: {e}", loc.file_path))),
    };
    let hits: BTreeMap<&str, bool> = result
        .hits
        .iter()
        .filter(|h| h.finding_id == id)
        .map(|h| (h.misuse_id.as_str(), h.ambiguous))
        .collect();
    let misuses = if hits.is_empty() {
        Vec::new()
    } else {
        state
            .misuses(result.experiment)
            .into_iter()
            .filter_map(|m| {
                hits.get(m.id.as_str()).map(|amb| MisuseView {
                    ambiguous: *amb,
                    id: m.id,
                    description: m.description,
                    fix_description: m.fix_description,
                    location: m.location,
                })
            })
            .collect()
    };
    let review = state.read_store().state(&id).into();
    Ok(Json(FindingDetail {
        finding,
        snippet,
        snippet_error,
        review,
        misuses,
        guidance: REVIEWER_GUIDANCE.to_owned(),
    }))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct AssessmentRequest {
    pub finding_id: String,
    pub decision: Decision,
    #[serde(default)]
    pub fp_root_cause: Option<FpRootCause>,
    #[serde(default)]
    pub fn_root_cause: Option<FnRootCause>,
    #[serde(default)]
    pub comment: String,
}

async fn post_assessment(
    State(state): State<Arc<AppState>>,
    Reviewer(reviewer): Reviewer,
    Json(req): Json<AssessmentRequest>,
) -> Result<Json<ReviewView>, ApiError> {
    let (result, _) = state.finding(&req.finding_id)?;
    let a = Assessment {
        finding_id: req.finding_id,
        reviewer,
        decision: req.decision,
        fp_root_cause: req.fp_root_cause,
        fn_root_cause: req.fn_root_cause,
        comment: req.comment,
        timestamp: now_millis(),
    };
    let mut store = state.write_store();
    store.assess(result.experiment, a.clone())?;
    if let Err(e) = store.maybe_compact() {
        log::warn!("compaction failed: {e}");
    }
    Ok(Json(store.state(&a.finding_id).into()))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ResolutionRequest {
    pub finding_id: String,
    pub decision: Decision,
    #[serde(default)]
    pub note: String,
}

async fn post_resolution(
    State(state): State<Arc<AppState>>,
    Reviewer(reviewer): Reviewer,
    Json(req): Json<ResolutionRequest>,
) -> Result<Json<ReviewView>, ApiError> {
    state.finding(&req.finding_id)?;
    let id = req.finding_id.clone();
    let mut store = state.write_store();
    store.resolve(Resolution {
        finding_id: req.finding_id,
        reviewer,
        decision: req.decision,
        note: req.note,
        timestamp: now_millis(),
    })?;
    Ok(Json(store.state(&id).into()))
}

#[derive(Debug, Deserialize)]
pub struct StatsQuery {
    pub experiment: ExperimentKind,
    pub detector: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct StatsResponse {
    pub experiment: ExperimentKind,
    pub primary_reviewers: Vec<String>,
    pub detectors: Vec<DetectorStats>,
}

async fn stats(
    State(state): State<Arc<AppState>>,
    Query(q): Query<StatsQuery>,
) -> Result<Json<StatsResponse>, ApiError> {
    let result = state
        .result(q.experiment)?
        .ok_or_else(|| ApiError::NotFound(format!("no results for experiment {}", q.experiment.as_str())))?;
    let primary = state.tokens.primary();
    let ctx = stats_context(&results_dir(&state.workspace.root, q.experiment), &primary);
    let mut detectors = experiment_stats(&result, &state.read_store(), &ctx);
    if let Some(d) = &q.detector {
        detectors.retain(|s| &s.detector_id == d);
    }
    Ok(Json(StatsResponse {
        experiment: q.experiment,
        primary_reviewers: primary,
        detectors,
    }))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Vocabulary {
    pub decisions: Vec<Decision>,
    pub fp_root_causes: Vec<FpRootCause>,
    pub fn_root_causes: Vec<FnRootCause>,
    pub required_reviews: usize,
    pub guidance: String,
}

async fn vocabulary() -> Json<Vocabulary> {
    Json(Vocabulary {
        decisions: vec![Decision::Misuse, Decision::NotMisuse],
        fp_root_causes: FpRootCause::ALL.to_vec(),
        fn_root_causes: FnRootCause::ALL.to_vec(),
        required_reviews: REQUIRED_REVIEWS,
        guidance: REVIEWER_GUIDANCE.to_owned(),
    })
}

/// Default store location for a workspace.
pub fn default_store(workspace: &FsPath) -> PathBuf {
    Workspace::new(workspace).store_path()
}

//! HTTP/JSON service over a loaded snapshot and one curation session.
//!
//! Reads take a shared lock; merges and status changes take the write lock,
//! are applied to a copy of the session, journaled, and only then
//! committed, so readers never see a half-applied action.

use std::path::Path;
use std::sync::Arc;

use axum::extract::{Path as UrlPath, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use germen_core::aggregation::{
    now_ms, Component, ComponentId, ComponentStatus, CurationAction, CurationSession, ExportOptions,
    Journal, JournalAction, JournalEntry, ValenceMode,
};
use germen_core::saliency::{per_mille, term_contributions};
use germen_core::{build_noyau_graph, components_by_key, size_distribution, Classification, Engine, Error, NodeCategory, NodeId};
use serde::{Deserialize, Serialize};
use tokio::sync::RwLock;

pub struct ServiceState {
    engine: Engine,
    session: CurationSession,
    journal: Option<Journal>,
}

pub type SharedState = Arc<RwLock<ServiceState>>;

impl ServiceState {
    /// Builds the session for `valence` and replays the journal entries
    /// recorded for the same valence and mode.
    pub fn new(engine: Engine, valence: usize, mode: ValenceMode, journal: Option<&Path>) -> anyhow::Result<Self> {
        let mut session =
            CurationSession::with_doc_ids(engine.labels().all_heads(), &engine.doc_ids(), valence, mode)?;
        let journal = match journal {
            Some(path) => {
                for (i, entry) in Journal::read(path)?.into_iter().enumerate() {
                    if entry.valence != valence || entry.mode != mode {
                        continue;
                    }
                    let action = to_action(&engine, &entry.action)?;
                    session
                        .apply(&action)
                        .map_err(|e| anyhow::anyhow!("journal entry {}: {e}", i + 1))?;
                }
                Some(Journal::open(path)?)
            }
            None => None,
        };
        Ok(Self {
            engine,
            session,
            journal,
        })
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    pub fn session(&self) -> &CurationSession {
        &self.session
    }

    fn record(&mut self, action: JournalAction) -> Result<(), ApiError> {
        let mut next = self.session.clone();
        next.apply(&to_action(&self.engine, &action)?)?;
        if let Some(journal) = &mut self.journal {
            journal.append(&JournalEntry {
                timestamp_ms: now_ms(),
                valence: next.valence,
                mode: next.mode,
                action,
            })?;
        }
        self.session = next;
        Ok(())
    }
}

fn to_action(engine: &Engine, action: &JournalAction) -> Result<CurationAction, Error> {
    Ok(match action {
        JournalAction::Merge { noyaux, label } => CurationAction::Merge {
            noyaux: noyaux
                .iter()
                .map(|d| engine.require_node(d))
                .collect::<Result<_, _>>()?,
            label: label.clone(),
        },
        JournalAction::SetStatus { component, status } => CurationAction::SetStatus {
            component: *component,
            status: *status,
        },
    })
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl From<Error> for ApiError {
    fn from(err: Error) -> Self {
        let status = match &err {
            Error::UnknownDocument(_) | Error::UnknownComponent(_) | Error::UnknownNode(_) => StatusCode::NOT_FOUND,
            Error::CrossComponentMerge(_) | Error::InvalidatedComponent(_) => StatusCode::CONFLICT,
            Error::NotAHead(_) | Error::EmptyLabel | Error::InvalidValence(_) => StatusCode::UNPROCESSABLE_ENTITY,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        Self {
            status,
            message: err.to_string(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(serde_json::json!({ "error": self.message }))).into_response()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoyauSummary {
    pub head: String,
    pub size: usize,
    /// The three heaviest terms of the class.
    pub top_terms: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupView {
    pub label: String,
    pub noyaux: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentView {
    pub id: usize,
    /// Absent when listed for a valence other than the session's.
    pub status: Option<ComponentStatus>,
    pub documents: usize,
    pub noyaux: Vec<NoyauSummary>,
    pub supporting: Vec<String>,
    pub groups: Vec<GroupView>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberView {
    pub doc_id: String,
    pub density: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttachedView {
    pub doc_id: String,
    pub density: f64,
    pub heads: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermView {
    pub term: String,
    pub weight: f64,
    pub per_mille: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoyauView {
    pub head: String,
    pub category: NodeCategory,
    pub component: Option<usize>,
    /// Head and strict members, by descending density.
    pub members: Vec<MemberView>,
    pub multivalent: Vec<AttachedView>,
    pub terms: Vec<TermView>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentDetail {
    #[serde(flatten)]
    pub component: ComponentView,
    pub noyau_details: Vec<NoyauView>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SizeCount {
    pub size: usize,
    pub count: usize,
}

/// Doc ids of `nodes`, sorted.
fn names(engine: &Engine, nodes: impl IntoIterator<Item = NodeId>) -> Vec<String> {
    let mut out: Vec<String> = nodes.into_iter().map(|v| engine.doc_id(v).to_owned()).collect();
    out.sort();
    out
}

pub fn component_view(engine: &Engine, component: &Component, session: Option<&CurationSession>) -> ComponentView {
    let lcc = engine.labels().all_heads();
    let mut noyaux: Vec<NoyauSummary> = component
        .noyaux
        .iter()
        .map(|&h| NoyauSummary {
            head: engine.doc_id(h).to_owned(),
            size: lcc.iter().filter(|l| l.as_slice() == [h]).count(),
            top_terms: term_contributions(engine, h)
                .map(|p| p.terms.into_iter().take(3).map(|t| t.term).collect())
                .unwrap_or_default(),
        })
        .collect();
    noyaux.sort_by(|a, b| a.head.cmp(&b.head));
    let (status, groups) = match session {
        Some(s) => (
            Some(s.components()[component.id.0].status),
            s.groups()
                .iter()
                .filter(|g| g.component == component.id)
                .map(|g| GroupView {
                    label: g.label.clone(),
                    noyaux: names(engine, g.noyaux.iter().copied()),
                })
                .collect(),
        ),
        None => (None, Vec::new()),
    };
    ComponentView {
        id: component.id.0,
        status,
        documents: component.documents,
        noyaux,
        supporting: names(engine, component.supporting.iter().copied()),
        groups,
    }
}

/// Component listing for any valence; carries session state when the
/// valence and mode are the session's.
pub fn list_components(
    engine: &Engine,
    session: Option<&CurationSession>,
    valence: usize,
    mode: ValenceMode,
    min_docs: usize,
) -> Result<Vec<ComponentView>, Error> {
    let session = session.filter(|s| s.valence == valence && s.mode == mode);
    let listed: Vec<Component> = match session {
        Some(s) => s.components().iter().map(|c| c.component.clone()).collect(),
        None => components_by_key(&build_noyau_graph(engine.labels().all_heads(), valence, mode)?, |h| {
            engine.doc_id(h).to_owned()
        }),
    };
    Ok(listed
        .iter()
        .filter(|c| c.documents >= min_docs)
        .map(|c| component_view(engine, c, session))
        .collect())
}

pub fn noyau_view(engine: &Engine, session: Option<&CurationSession>, doc_id: &str) -> Result<NoyauView, Error> {
    let head = engine.require_node(doc_id)?;
    if !engine.labels().is_head(head) {
        return Err(Error::NotAHead(head.0));
    }
    let profile = term_contributions(engine, head)?;
    let mut members = Vec::new();
    let mut multivalent = Vec::new();
    for m in &profile.members {
        let heads = engine.heads(m.node);
        if heads.len() == 1 {
            members.push(MemberView {
                doc_id: m.doc_id.clone(),
                density: m.density,
            });
        } else {
            multivalent.push(AttachedView {
                doc_id: m.doc_id.clone(),
                density: m.density,
                heads: names(engine, heads.iter().copied()),
            });
        }
    }
    Ok(NoyauView {
        head: doc_id.to_owned(),
        category: engine.labels().categorize(head),
        component: session.and_then(|s| s.component_of(head)).map(|c| c.0),
        members,
        multivalent,
        terms: profile
            .terms
            .into_iter()
            .map(|t| TermView {
                per_mille: per_mille(t.weight),
                term: t.term,
                weight: t.weight,
            })
            .collect(),
    })
}

pub fn sizes(engine: &Engine) -> Vec<SizeCount> {
    size_distribution(engine.labels().all_heads())
        .into_iter()
        .map(|(size, count)| SizeCount { size, count })
        .collect()
}

#[derive(Debug, Deserialize)]
struct ListQuery {
    valence: Option<usize>,
    #[serde(default)]
    at_least: bool,
    #[serde(default)]
    min_docs: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MergeRequest {
    pub noyaux: Vec<String>,
    pub label: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StatusRequest {
    pub component: usize,
    pub status: ComponentStatus,
}

async fn get_components(
    State(state): State<SharedState>,
    Query(q): Query<ListQuery>,
) -> Result<Json<Vec<ComponentView>>, ApiError> {
    let state = state.read().await;
    let session = &state.session;
    let mode = if q.at_least { ValenceMode::AtLeast } else { session.mode };
    let valence = q.valence.unwrap_or(session.valence);
    Ok(Json(list_components(&state.engine, Some(session), valence, mode, q.min_docs)?))
}

async fn get_component(
    State(state): State<SharedState>,
    UrlPath(id): UrlPath<usize>,
) -> Result<Json<ComponentDetail>, ApiError> {
    let state = state.read().await;
    let sc = state.session.component(ComponentId(id))?;
    let noyau_details = sc
        .component
        .noyaux
        .iter()
        .map(|&h| noyau_view(&state.engine, Some(&state.session), state.engine.doc_id(h)))
        .collect::<Result<_, _>>()?;
    Ok(Json(ComponentDetail {
        component: component_view(&state.engine, &sc.component, Some(&state.session)),
        noyau_details,
    }))
}

async fn get_noyau(
    State(state): State<SharedState>,
    UrlPath(doc_id): UrlPath<String>,
) -> Result<Json<NoyauView>, ApiError> {
    let state = state.read().await;
    Ok(Json(noyau_view(&state.engine, Some(&state.session), &doc_id)?))
}

async fn get_sizes(State(state): State<SharedState>) -> Json<Vec<SizeCount>> {
    Json(sizes(&state.read().await.engine))
}

async fn post_merge(
    State(state): State<SharedState>,
    Json(req): Json<MergeRequest>,
) -> Result<Json<ComponentView>, ApiError> {
    let mut state = state.write().await;
    let first = req.noyaux.first().ok_or_else(|| ApiError {
        status: StatusCode::UNPROCESSABLE_ENTITY,
        message: "merge needs at least one noyau".into(),
    })?;
    let head = state.engine.require_node(first)?;
    state.record(JournalAction::Merge {
        noyaux: req.noyaux,
        label: req.label,
    })?;
    let component = state.session.component_of(head).ok_or(Error::NotAHead(head.0))?;
    let sc = state.session.component(component)?;
    Ok(Json(component_view(&state.engine, &sc.component, Some(&state.session))))
}

async fn post_status(
    State(state): State<SharedState>,
    Json(req): Json<StatusRequest>,
) -> Result<Json<ComponentView>, ApiError> {
    let mut state = state.write().await;
    state.record(JournalAction::SetStatus {
        component: ComponentId(req.component),
        status: req.status,
    })?;
    let sc = state.session.component(ComponentId(req.component))?;
    Ok(Json(component_view(&state.engine, &sc.component, Some(&state.session))))
}

async fn get_export(
    State(state): State<SharedState>,
    Query(options): Query<ExportOptions>,
) -> Result<Json<Classification>, ApiError> {
    let state = state.read().await;
    let doc_ids = state.engine.doc_ids();
    Ok(Json(state.session.export(state.engine.labels(), &doc_ids, options)?))
}

pub fn router(state: SharedState) -> Router {
    Router::new()
        .route("/components", get(get_components))
        .route("/components/{id}", get(get_component))
        .route("/noyaux/{doc_id}", get(get_noyau))
        .route("/sizes", get(get_sizes))
        .route("/merge", post(post_merge))
        .route("/status", post(post_status))
        .route("/export", get(get_export))
        .with_state(state)
}

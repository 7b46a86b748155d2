//! Review service for human coding of ambiguous survey links.
//!
//! A [`Session`] keeps model suggestions as immutable revision snapshots,
//! appends coder verdicts to `decisions.jsonl` and re-embeds on request.
//! [`router`] exposes it over HTTP/JSON.

mod api;
mod session;

pub use api::{router, serve};
pub use session::{
    CandidateView, CaseDetail, CaseSummary, DecisionRecord, DecisionRequest, ExportReport, ExportRow,
    RecomputeReport, ReviewError, RevisionStatus, Session, SessionInputs, Snapshot, StatusFilter, Verdict,
    DECISIONS_FILE, REVISIONS_DIR,
};

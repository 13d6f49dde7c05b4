//! Questionnaire model, scoring-formula language, roster-driven relational
//! items, social network measures and report generation for sociometric
//! survey studies.
//!
//! Scores are exact by default: [`Score`] is a big rational, so band edges
//! such as 7/8 compare exactly. The numeric code is generic over
//! [`scalar::Scalar`] (scores) and [`scalar::RealScalar`] (centralities), so
//! it can also be driven with `Ratio<i64>`, `f64` or `f32`.

pub mod bands;
pub mod formula;
pub mod instruments;
pub mod model;
pub mod report;
pub mod roster;
pub mod scalar;
pub mod scoring;
pub mod sna;

/// Exact score type: option values, formula results, band edges, tie weights.
pub type Score = num_rational::BigRational;

/// Float type for centralities, modularity and correlations.
pub type Measure = f64;

pub use bands::{Band, BandTable};
pub use formula::{EvalError, FormulaError, ScoringFormula};
pub use instruments::{audit_zone, builtin_instruments, AuditZone, Instrument, InstrumentLibrary};
pub use model::{
    open_wave, validate_questionnaire, Answer, AnswerOption, Catalog, Completion, ElementRef, Finding, PublishedQuestionnaire,
    Question, QuestionGroup, QuestionKind, QuestionnaireDef, QuestionnaireRegistry, Respondent, RespondentGroup,
    ResponseSet, Wave,
};
pub use roster::{apply_roster_edit, extract_edges, instantiate, EdgeList, RelationalInstance, RelationalTemplate, RosterEdit};
pub use scoring::{score_response, ScoreEntry, ScoreReport};
pub use report::{group_report, individual_report, render_report, GroupReport, IndividualReport, Report, ReportFormat, Templates};
pub use sna::{analyze, build_matrix, build_two_mode, louvain, wave_churn, AnalysisResult, Sociomatrix};

//! Wave artifacts: score and edge tables, graph files and reports.

use std::fmt;
use std::str::FromStr;

use cohortlens_core::model::Completion;
use cohortlens_core::report::ReportError;
use cohortlens_core::roster::EdgeList;
use cohortlens_core::scalar::Scalar;
use cohortlens_core::{GroupReport, IndividualReport, Measure, Report, Templates};
use serde::{Deserialize, Serialize};

use crate::anon::WaveView;
use crate::error::{Result, ServiceError};
use crate::service::answer_text;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    ScoresCsv,
    EdgesCsv,
    GraphNodeLink,
    Gexf,
    Reports,
    ReportsText,
    ResponsesCsv,
}

impl ExportFormat {
    pub const ALL: [ExportFormat; 7] = [
        ExportFormat::ScoresCsv,
        ExportFormat::EdgesCsv,
        ExportFormat::GraphNodeLink,
        ExportFormat::Gexf,
        ExportFormat::Reports,
        ExportFormat::ReportsText,
        ExportFormat::ResponsesCsv,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExportFormat::ScoresCsv => "scores-csv",
            ExportFormat::EdgesCsv => "edges-csv",
            ExportFormat::GraphNodeLink => "graph-node-link",
            ExportFormat::Gexf => "gexf",
            ExportFormat::Reports => "reports",
            ExportFormat::ReportsText => "reports-text",
            ExportFormat::ResponsesCsv => "responses-csv",
        }
    }

    pub fn content_type(self) -> &'static str {
        match self {
            ExportFormat::ScoresCsv | ExportFormat::EdgesCsv | ExportFormat::ResponsesCsv => "text/csv; charset=utf-8",
            ExportFormat::GraphNodeLink | ExportFormat::Reports => "application/json",
            ExportFormat::Gexf => "application/gexf+xml",
            ExportFormat::ReportsText => "text/plain; charset=utf-8",
        }
    }

    fn extension(self) -> &'static str {
        match self {
            ExportFormat::ScoresCsv | ExportFormat::EdgesCsv | ExportFormat::ResponsesCsv => "csv",
            ExportFormat::GraphNodeLink | ExportFormat::Reports => "json",
            ExportFormat::Gexf => "gexf",
            ExportFormat::ReportsText => "txt",
        }
    }
}

impl fmt::Display for ExportFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExportFormat {
    type Err = ServiceError;

    fn from_str(s: &str) -> Result<Self> {
        ExportFormat::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| ServiceError::Invalid(format!("unknown export format `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub format: ExportFormat,
    pub filename: String,
    pub bytes: Vec<u8>,
}

impl Artifact {
    pub fn content_type(&self) -> &'static str {
        self.format.content_type()
    }

    pub fn text(&self) -> &str {
        std::str::from_utf8(&self.bytes).unwrap_or("")
    }
}

/// Every report of a wave for one relation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportBundle {
    pub wave: String,
    pub relation: String,
    pub group: Option<GroupReport<Measure>>,
    pub individual: Vec<IndividualReport<Measure>>,
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

/// `respondent,scale,score,band`: one row per scale, then one `item:<id>` row
/// per answered scoreable item.
pub fn scores_csv(view: &WaveView) -> Vec<u8> {
    let mut rows = Vec::new();
    for r in &view.scores {
        for e in &r.entries {
            rows.push(vec![r.respondent_id.clone(), e.scale.clone(), e.score.to_text(), e.band.clone().unwrap_or_default()]);
        }
        for (item, v) in view.item_values.get(&r.respondent_id).into_iter().flatten() {
            rows.push(vec![r.respondent_id.clone(), format!("item:{item}"), v.clone(), String::new()]);
        }
    }
    csv_bytes(&["respondent", "scale", "score", "band"], rows)
}

pub fn edges_csv(view: &WaveView, relation: Option<&str>) -> Result<Vec<u8>> {
    let lists: Vec<&EdgeList> = match relation {
        Some(_) => vec![&view.relation(relation)?.edges],
        None => view.relations.iter().map(|r| &r.edges).collect(),
    };
    let rows = lists.into_iter().flat_map(|l| {
        l.edges.iter().map(move |e| vec![e.source.clone(), e.target.clone(), e.weight.to_text(), l.relation.clone(), l.wave_id.clone()])
    });
    Ok(csv_bytes(&["source", "target", "weight", "relation", "wave"], rows))
}

/// `respondent,status,item,answer` in long form.
pub fn responses_csv(view: &WaveView) -> Vec<u8> {
    let rows = view.responses.iter().flat_map(|r| {
        let status = match r.status {
            Completion::Submitted => "submitted",
            Completion::Partial => "partial",
        };
        r.answers.iter().map(move |(item, a)| vec![r.respondent_id.clone(), status.to_string(), item.clone(), answer_text(a)])
    });
    csv_bytes(&["respondent", "status", "item", "answer"], rows)
}

pub fn report_bundle(view: &WaveView, templates: &Templates, relation: Option<&str>) -> Result<ReportBundle> {
    let net = view.network(relation)?;
    let group = if view.scores.len() >= 2 { Some(net.group(view, templates)?) } else { None };
    let mut individual = Vec::new();
    for t in &view.roster {
        if view.score_of(t).is_some() {
            individual.push(net.individual(view, templates, t)?);
        }
    }
    Ok(ReportBundle { wave: view.wave_id.clone(), relation: net.relation.clone(), group, individual })
}

pub fn export(view: &WaveView, templates: &Templates, format: ExportFormat, relation: Option<&str>) -> Result<Artifact> {
    let bytes = match format {
        ExportFormat::ScoresCsv => scores_csv(view),
        ExportFormat::EdgesCsv => edges_csv(view, relation)?,
        ExportFormat::ResponsesCsv => responses_csv(view),
        ExportFormat::GraphNodeLink => {
            let net = view.network(relation)?;
            serde_json::to_vec_pretty(&net.graph(view)).expect("graphs serialize")
        }
        ExportFormat::Gexf => view.network(relation)?.gexf(view).into_bytes(),
        ExportFormat::Reports => serde_json::to_vec_pretty(&report_bundle(view, templates, relation)?).expect("reports serialize"),
        ExportFormat::ReportsText => {
            let bundle = report_bundle(view, templates, relation)?;
            let mut out = String::new();
            if let Some(g) = bundle.group {
                out.push_str(&Report::Group(g).plain_text());
            }
            for r in bundle.individual {
                out.push_str(&format!("\n== {} ==\n", r.respondent_id));
                out.push_str(&Report::Individual(r).plain_text());
            }
            out.into_bytes()
        }
    };
    Ok(Artifact { format, filename: format!("{}-{}.{}", view.wave_id, format.name(), format.extension()), bytes })
}

pub(crate) fn report_error(e: ReportError) -> ServiceError {
    match e {
        ReportError::NoData(r) => ServiceError::NotFound(format!("scores of `{r}`")),
        ReportError::UnknownNode(r) => ServiceError::NotInRoster(r),
        other => ServiceError::Invalid(other.to_string()),
    }
}

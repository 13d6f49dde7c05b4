//! Legacy spreadsheet import: one row per respondent, one column per item,
//! relational columns headed `template[alter]`.

use std::collections::{BTreeMap, BTreeSet};

use cohortlens_core::model::{Answer, Completion, PublishedQuestionnaire, Question, QuestionKind};
use cohortlens_core::roster::{parse_item_id, RelationMode, RelationalTemplate};
use cohortlens_core::scalar::Scalar;
use cohortlens_core::Score;
use serde::{Deserialize, Serialize};

/// Binds CSV columns to respondent fields and question instances.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct MappingSpec {
    pub respondent_column: String,
    pub name_column: Option<String>,
    /// `submitted` or `partial`; rows are submitted when absent.
    pub status_column: Option<String>,
    /// Column → respondent attribute key.
    pub attributes: BTreeMap<String, String>,
    /// Column → question-instance id (`AUDIT.Q1`, `C12`, `F[S03]`).
    pub columns: BTreeMap<String, String>,
    /// Also map columns whose header already is a question-instance id.
    pub auto: bool,
    /// Reject the whole file on any row error.
    pub strict: bool,
}

impl Default for MappingSpec {
    fn default() -> Self {
        MappingSpec {
            respondent_column: "respondent".into(),
            name_column: Some("name".into()),
            status_column: None,
            attributes: BTreeMap::new(),
            columns: BTreeMap::new(),
            auto: true,
            strict: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowError {
    /// 1-based line number in the file, header included.
    pub row: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub column: Option<String>,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImportSummary {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wave_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group_id: Option<String>,
    pub rows_imported: usize,
    pub responses_scored: usize,
    pub cells_skipped: usize,
    pub skipped_columns: Vec<String>,
    pub errors: Vec<RowError>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedRow {
    pub line: usize,
    pub respondent_id: String,
    pub display_name: String,
    pub attributes: BTreeMap<String, String>,
    pub answers: BTreeMap<String, Answer>,
    pub status: Completion,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedFile {
    pub rows: Vec<ParsedRow>,
    pub summary: ImportSummary,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Column {
    Respondent,
    Name,
    Status,
    Attribute(String),
    Item(String),
    Relational { item: String, template: String, alter: String },
    Skipped,
}

fn classify(header: &str, mapping: &MappingSpec, q: &PublishedQuestionnaire) -> Result<Column, String> {
    if header == mapping.respondent_column {
        return Ok(Column::Respondent);
    }
    if mapping.name_column.as_deref() == Some(header) {
        return Ok(Column::Name);
    }
    if mapping.status_column.as_deref() == Some(header) {
        return Ok(Column::Status);
    }
    if let Some(key) = mapping.attributes.get(header) {
        return Ok(Column::Attribute(key.clone()));
    }
    let (target, explicit) = match mapping.columns.get(header) {
        Some(t) => (t.as_str(), true),
        None if mapping.auto => (header, false),
        None => return Ok(Column::Skipped),
    };
    if q.item(target).is_some() {
        return Ok(Column::Item(target.to_string()));
    }
    if let Some((t, alter)) = parse_item_id(target) {
        if q.template(t).is_some() {
            return Ok(Column::Relational { item: target.to_string(), template: t.to_string(), alter: alter.to_string() });
        }
    }
    if explicit {
        Err(format!("column `{header}` is mapped to unknown item `{target}`"))
    } else {
        Ok(Column::Skipped)
    }
}

fn option_for(options: &[cohortlens_core::AnswerOption], cell: &str) -> Option<String> {
    if let Some(o) = options.iter().find(|o| o.label == cell) {
        return Some(o.label.clone());
    }
    let v = Score::parse_text(cell)?;
    let mut hits = options.iter().filter(|o| o.value == v);
    match (hits.next(), hits.next()) {
        (Some(o), None) => Some(o.label.clone()),
        _ => None,
    }
}

/// Reads one cell as an answer to `question`. Choice cells accept the option
/// label or its (unique) value; multi-choice cells separate picks with `;`.
pub fn parse_answer(question: &Question, cell: &str) -> Result<Answer, String> {
    match question.kind {
        QuestionKind::SingleChoice => {
            option_for(&question.options, cell).map(Answer::Choice).ok_or_else(|| format!("`{cell}` is not an option"))
        }
        QuestionKind::MultiChoice => cell
            .split(';')
            .map(|p| option_for(&question.options, p.trim()).ok_or_else(|| format!("`{}` is not an option", p.trim())))
            .collect::<Result<Vec<_>, _>>()
            .map(Answer::Choices),
        QuestionKind::Numeric => Score::parse_text(cell).map(Answer::Number).ok_or_else(|| format!("`{cell}` is not a number")),
        QuestionKind::FreeText => Ok(Answer::Text(cell.to_string())),
        QuestionKind::RelationalTemplate => Err("relational marker items take no answers".into()),
    }
}

/// Reads a tie cell: a tie-scale label or weight.
pub fn parse_tie(template: &RelationalTemplate, cell: &str) -> Result<Answer, String> {
    option_for(&template.tie_scale, cell).map(Answer::Choice).ok_or_else(|| format!("`{cell}` is not a tie-scale level"))
}

fn parse_status(cell: &str) -> Result<Completion, String> {
    match cell.to_ascii_lowercase().as_str() {
        "" | "submitted" | "complete" | "completed" => Ok(Completion::Submitted),
        "partial" => Ok(Completion::Partial),
        other => Err(format!("unknown status `{other}`")),
    }
}

/// Parses a whole file against a published questionnaire. Header problems are
/// returned as `Err`; cell and row problems are collected in the summary, and
/// in non-strict mode the offending cells are dropped.
pub fn parse_csv(text: &str, mapping: &MappingSpec, q: &PublishedQuestionnaire) -> Result<ParsedFile, RowError> {
    let header_error = |message: String| RowError { row: 1, column: None, message };
    let mut reader = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| header_error(e.to_string()))?.clone();
    let mut columns = Vec::with_capacity(headers.len());
    let mut summary = ImportSummary::default();
    let mut seen = BTreeSet::new();
    for h in headers.iter() {
        let h = h.trim();
        if !seen.insert(h.to_string()) {
            return Err(header_error(format!("duplicate column `{h}`")));
        }
        let c = classify(h, mapping, q).map_err(header_error)?;
        if c == Column::Skipped {
            summary.skipped_columns.push(h.to_string());
        }
        columns.push(c);
    }
    if !columns.contains(&Column::Respondent) {
        return Err(header_error(format!("missing respondent column `{}`", mapping.respondent_column)));
    }
    let records = reader.records().collect::<Vec<_>>();
    let mut ids = BTreeSet::new();
    let mut roster = BTreeSet::new();
    for rec in records.iter().flatten() {
        if let Some(i) = columns.iter().position(|c| *c == Column::Respondent) {
            roster.insert(rec.get(i).unwrap_or("").trim().to_string());
        }
    }
    let mut rows = Vec::new();
    for (idx, rec) in records.into_iter().enumerate() {
        let line = idx + 2;
        let err = |column: Option<&str>, message: String| RowError { row: line, column: column.map(str::to_string), message };
        let rec = match rec {
            Ok(r) => r,
            Err(e) => {
                summary.errors.push(err(None, e.to_string()));
                continue;
            }
        };
        if rec.len() != columns.len() {
            summary.errors.push(err(None, format!("expected {} fields, found {}", columns.len(), rec.len())));
            continue;
        }
        let mut row = ParsedRow {
            line,
            respondent_id: String::new(),
            display_name: String::new(),
            attributes: BTreeMap::new(),
            answers: BTreeMap::new(),
            status: Completion::Submitted,
        };
        for (c, cell) in columns.iter().zip(rec.iter()) {
            if let Column::Respondent = c {
                row.respondent_id = cell.trim().to_string();
            }
        }
        if row.respondent_id.is_empty() {
            summary.errors.push(err(Some(&mapping.respondent_column), "empty respondent id".into()));
            continue;
        }
        if !ids.insert(row.respondent_id.clone()) {
            summary.errors.push(err(Some(&mapping.respondent_column), format!("respondent `{}` appears twice", row.respondent_id)));
            continue;
        }
        for ((c, cell), header) in columns.iter().zip(rec.iter()).zip(headers.iter()) {
            let cell = cell.trim();
            let header = header.trim();
            let mut bad = |message: String| {
                summary.cells_skipped += 1;
                summary.errors.push(err(Some(header), message));
            };
            match c {
                Column::Respondent => {}
                Column::Name => row.display_name = cell.to_string(),
                Column::Status => match parse_status(cell) {
                    Ok(s) => row.status = s,
                    Err(m) => bad(m),
                },
                Column::Attribute(key) => {
                    if !cell.is_empty() {
                        row.attributes.insert(key.clone(), cell.to_string());
                    }
                }
                Column::Skipped => {
                    if !cell.is_empty() {
                        summary.cells_skipped += 1;
                    }
                }
                Column::Item(id) if !cell.is_empty() => {
                    let question = q.item(id).expect("classified items exist");
                    match parse_answer(question, cell) {
                        Ok(a) => {
                            row.answers.insert(id.clone(), a);
                        }
                        Err(m) => bad(m),
                    }
                }
                Column::Relational { item, template, alter } if !cell.is_empty() => {
                    let t = q.template(template).expect("classified templates exist");
                    let valid_alter = match &t.mode {
                        RelationMode::OneMode => roster.contains(alter) && *alter != row.respondent_id,
                        RelationMode::TwoMode { entities } => entities.iter().any(|e| &e.id == alter),
                    };
                    if !valid_alter {
                        bad(format!("`{alter}` is not an alter of `{}`", row.respondent_id));
                        continue;
                    }
                    match parse_tie(t, cell) {
                        Ok(a) => {
                            row.answers.insert(item.clone(), a);
                        }
                        Err(m) => bad(m),
                    }
                }
                Column::Item(_) | Column::Relational { .. } => {}
            }
        }
        if row.display_name.is_empty() {
            row.display_name = row.respondent_id.clone();
        }
        rows.push(row);
    }
    Ok(ParsedFile { rows, summary })
}

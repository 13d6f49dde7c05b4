//! Pseudonymized view of a wave: every identity and flagged value replaced by
//! its token. All analysis and export output is built from this view.

use std::collections::{BTreeMap, BTreeSet};

use cohortlens_core::instruments::audit_zone;
use cohortlens_core::model::{Answer, ResponseSet};
use cohortlens_core::report::audit_scale;
use cohortlens_core::roster::{item_id, parse_item_id, EdgeList};
use cohortlens_core::scalar::Scalar;
use cohortlens_core::scoring::item_values;
use cohortlens_core::sna::{analyze, build_matrix, gexf, node_link, AnalysisResult, NodeAttributes, NodeLinkGraph, Sociomatrix};
use cohortlens_core::{group_report, individual_report, GroupReport, IndividualReport, Measure, ScoreReport, Templates};

use crate::error::{Result, ServiceError};
use crate::export::report_error;
use crate::pseudonym::{StudyKey, RESPONDENT_PREFIX, VALUE_PREFIX};
use crate::service::{answer_text, flagged_items, published, wave_edges};
use crate::store::{State, WaveRecord};

/// Number of suggested influencers and mediators per individual report.
pub const SUGGESTIONS: usize = 3;

/// Flagged-field names that cover the respondent display name.
pub const NAME_FIELDS: [&str; 2] = ["display_name", "name"];

#[derive(Debug, Clone)]
pub struct RelationView {
    pub relation: String,
    pub template_id: String,
    pub one_mode: bool,
    pub edges: EdgeList,
}

#[derive(Debug, Clone)]
pub struct WaveView {
    pub wave_id: String,
    pub label: String,
    /// Roster tokens in roster order.
    pub roster: Vec<String>,
    ids: BTreeMap<String, String>,
    pub attrs: BTreeMap<String, NodeAttributes>,
    /// Sorted by respondent token.
    pub scores: Vec<ScoreReport>,
    pub responses: Vec<ResponseSet>,
    /// Respondent token → item instance id → value text.
    pub item_values: BTreeMap<String, BTreeMap<String, String>>,
    pub relations: Vec<RelationView>,
}

pub struct Network {
    pub relation: String,
    pub matrix: Sociomatrix,
    pub analysis: AnalysisResult<Measure>,
    pub edges: EdgeList,
}

impl WaveView {
    pub fn build(s: &State, key: &StudyKey, rec: &WaveRecord) -> Result<Self> {
        let q = published(s, &rec.wave.questionnaire_id, rec.wave.version)?;
        let token = |raw: &str| s.pseudonyms.respondent(raw).map(str::to_string).unwrap_or_else(|| key.token(RESPONDENT_PREFIX, 0, raw));
        let value = |raw: &str| s.pseudonyms.value(raw).map(str::to_string).unwrap_or_else(|| key.token(VALUE_PREFIX, 0, raw));
        let flagged_name = NAME_FIELDS.iter().any(|f| s.settings.flagged_fields.contains(*f));
        let flagged = flagged_items(s, &q);

        let mut ids = BTreeMap::new();
        let mut everyone: BTreeSet<&str> = rec.wave.roster.iter().map(String::as_str).collect();
        everyone.extend(rec.responses.keys().map(String::as_str));
        for inst in &rec.relational {
            if inst.one_mode {
                everyone.extend(inst.roster.iter().map(String::as_str));
            }
        }
        for id in everyone {
            ids.insert(id.to_string(), token(id));
        }
        let roster: Vec<String> = rec.wave.roster.iter().map(|r| ids[r].clone()).collect();

        let mut scores: Vec<ScoreReport> = rec
            .scores
            .values()
            .map(|r| {
                let mut r = r.clone();
                r.respondent_id = ids[&r.respondent_id].clone();
                r
            })
            .collect();
        scores.sort_by(|a, b| a.respondent_id.cmp(&b.respondent_id));
        let by_token: BTreeMap<&str, &ScoreReport> = scores.iter().map(|r| (r.respondent_id.as_str(), r)).collect();

        let mut attrs = BTreeMap::new();
        for raw in &rec.wave.roster {
            let t = &ids[raw];
            let person = s.respondents.get(raw).map(|r| &r.value);
            let label = match person {
                Some(p) if !flagged_name => p.display_name.clone(),
                _ => t.clone(),
            };
            let sex = person.and_then(|p| p.attributes.get("sex")).map(|v| {
                if s.settings.flagged_fields.contains("sex") {
                    value(v)
                } else {
                    v.clone()
                }
            });
            let audit = by_token.get(t.as_str()).and_then(|r| r.score(&audit_scale()));
            attrs.insert(
                t.clone(),
                NodeAttributes {
                    label,
                    sex,
                    audit_zone: audit.and_then(|a| audit_zone(a).ok()).map(|z| z.zone),
                    audit_score: audit.map(|a| a.to_text()),
                },
            );
        }

        let rename_item = |item: &str| match parse_item_id(item) {
            Some((t, alter)) => item_id(t, ids.get(alter).map(String::as_str).unwrap_or(alter)),
            None => item.to_string(),
        };
        let mut responses = Vec::with_capacity(rec.responses.len());
        let mut values = BTreeMap::new();
        for r in rec.responses.values() {
            let t = ids[&r.respondent_id].clone();
            let answers = r
                .answers
                .iter()
                .map(|(item, a)| {
                    let a = if flagged.contains(item) { Answer::Text(value(&answer_text(a))) } else { a.clone() };
                    (rename_item(item), a)
                })
                .collect();
            if let Ok(v) = item_values(&q, r) {
                let v: BTreeMap<String, String> = v
                    .into_iter()
                    .map(|(item, x)| {
                        let text = if flagged.contains(&item) { value(&x.to_text()) } else { x.to_text() };
                        (item, text)
                    })
                    .collect();
                values.insert(t.clone(), v);
            }
            responses.push(ResponseSet { wave_id: r.wave_id.clone(), respondent_id: t, answers, status: r.status });
        }
        responses.sort_by(|a, b| a.respondent_id.cmp(&b.respondent_id));

        let raw_edges = wave_edges(s, rec)?;
        let mut relations = Vec::new();
        for inst in &rec.relational {
            let Some(raw) = raw_edges.get(&inst.relation) else { continue };
            let mut edges = EdgeList::new(&raw.relation, &raw.wave_id);
            for e in &raw.edges {
                let target = if inst.one_mode { ids.get(&e.target).cloned().unwrap_or_else(|| token(&e.target)) } else { e.target.clone() };
                edges.push(ids[&e.source].clone(), target, e.weight.clone());
            }
            relations.push(RelationView { relation: inst.relation.clone(), template_id: inst.template_id.clone(), one_mode: inst.one_mode, edges });
        }

        Ok(WaveView {
            wave_id: rec.wave.id.clone(),
            label: rec.wave.label.clone(),
            roster,
            ids,
            attrs,
            scores,
            responses,
            item_values: values,
            relations,
        })
    }

    pub fn token_of(&self, respondent_id: &str) -> Option<String> {
        self.ids.get(respondent_id).cloned()
    }

    pub fn relation(&self, name: Option<&str>) -> Result<&RelationView> {
        match name {
            Some(n) => self
                .relations
                .iter()
                .find(|r| r.relation == n || r.template_id == n)
                .ok_or_else(|| ServiceError::NotFound(format!("relation `{n}`"))),
            None => self.relations.first().ok_or_else(|| ServiceError::Invalid("wave has no relational items".into())),
        }
    }

    /// Sociomatrix and measures of a one-mode relation.
    pub fn network(&self, name: Option<&str>) -> Result<Network> {
        let rel = self.relation(name)?;
        if !rel.one_mode {
            return Err(ServiceError::Invalid(format!("relation `{}` is two-mode; centralities need a one-mode network", rel.relation)));
        }
        let matrix = build_matrix(&rel.edges, &self.roster).map_err(|e| ServiceError::Invalid(e.to_string()))?;
        let analysis = analyze(&matrix).map_err(|e| ServiceError::Invalid(e.to_string()))?;
        Ok(Network { relation: rel.relation.clone(), matrix, analysis, edges: rel.edges.clone() })
    }

    pub fn score_of(&self, token: &str) -> Option<&ScoreReport> {
        self.scores.iter().find(|r| r.respondent_id == token)
    }
}

impl Network {
    pub fn graph(&self, view: &WaveView) -> NodeLinkGraph {
        node_link(&self.analysis, &self.edges, &view.attrs)
    }

    pub fn gexf(&self, view: &WaveView) -> String {
        gexf(&self.analysis, &self.edges, &view.attrs)
    }

    pub fn individual(&self, view: &WaveView, templates: &Templates, token: &str) -> Result<IndividualReport<Measure>> {
        individual_report(templates, view.score_of(token), &self.matrix, &self.analysis, token, SUGGESTIONS)
            .map_err(report_error)
    }

    pub fn group(&self, view: &WaveView, templates: &Templates) -> Result<GroupReport<Measure>> {
        group_report(templates, &self.analysis, &view.scores).map_err(report_error)
    }
}

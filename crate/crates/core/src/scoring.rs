//! Scoring of submitted response sets: every scale of every embedded
//! instrument and every question group, banded where a table is present.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bands::{BandError, BandTable};
use crate::formula::{EvalError, ScoringFormula};
use crate::model::{AnswerError, ElementRef, PublishedQuestionnaire, ResponseSet};
use crate::scalar::Scalar;
use crate::Score;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "S: Scalar", deserialize = "S: Scalar"))]
pub struct ScoreEntry<S = Score> {
    /// `INSTRUMENT.scale` for instrument scales, the group id for groups.
    pub scale: String,
    #[serde(with = "crate::scalar::text")]
    pub score: S,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub band: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub guidance: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "S: Scalar", deserialize = "S: Scalar"))]
pub struct ScoreReport<S = Score> {
    pub wave_id: String,
    pub respondent_id: String,
    pub questionnaire_id: String,
    /// Questionnaire version whose formulas produced the entries.
    pub version: u32,
    pub entries: Vec<ScoreEntry<S>>,
}

impl<S: Scalar> ScoreReport<S> {
    pub fn entry(&self, scale: &str) -> Option<&ScoreEntry<S>> {
        self.entries.iter().find(|e| e.scale == scale)
    }

    pub fn score(&self, scale: &str) -> Option<&S> {
        self.entry(scale).map(|e| &e.score)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScoringError {
    #[error("response set is not submitted")]
    NotSubmitted,
    #[error("scale `{scale}`: missing answer for `{item}`")]
    MissingAnswer { scale: String, item: String },
    #[error("scale `{scale}`: division by zero")]
    DivisionByZero { scale: String },
    #[error("scale `{scale}`: {message}")]
    Evaluation { scale: String, message: String },
    #[error(transparent)]
    InvalidAnswer(#[from] AnswerError),
    #[error("scale `{scale}`: {source}")]
    Band { scale: String, source: BandError },
}

fn scale_error(scale: &str, e: EvalError) -> ScoringError {
    match e {
        EvalError::MissingAnswer(item) => ScoringError::MissingAnswer { scale: scale.to_string(), item },
        EvalError::DivisionByZero => ScoringError::DivisionByZero { scale: scale.to_string() },
        other => ScoringError::Evaluation { scale: scale.to_string(), message: other.to_string() },
    }
}

/// Value of every answered, scoreable non-relational item, keyed by
/// question-instance id.
pub fn item_values<S: Scalar>(
    questionnaire: &PublishedQuestionnaire<S>,
    resp: &ResponseSet<S>,
) -> Result<BTreeMap<String, S>, AnswerError> {
    let mut values = BTreeMap::new();
    for item in questionnaire.items() {
        if let Some(answer) = resp.answers.get(&item.instance_id) {
            if let Some(v) = item.question.value_of(answer)? {
                values.insert(item.instance_id, v);
            }
        }
    }
    Ok(values)
}

/// Looks up `score` in `table`.
pub fn band_of<'a, S: Scalar>(table: &'a BandTable<S>, score: &S) -> Result<(&'a str, &'a str), BandError> {
    table.band_of(score).map(|b| (b.label.as_str(), b.guidance.as_str()))
}

fn entry<S: Scalar>(
    scale: String,
    formula: &ScoringFormula,
    bands: Option<&BandTable<S>>,
    lookup: &dyn Fn(&str) -> Option<S>,
) -> Result<ScoreEntry<S>, ScoringError> {
    let score = formula.evaluate_with(lookup).map_err(|e| scale_error(&scale, e))?;
    let (band, guidance) = match bands {
        Some(t) => {
            let b = t.band_of(&score).map_err(|source| ScoringError::Band { scale: scale.clone(), source })?;
            (Some(b.label.clone()), Some(b.guidance.clone()).filter(|g| !g.is_empty()))
        }
        None => (None, None),
    };
    Ok(ScoreEntry { scale, score, band, guidance })
}

/// Scores one submitted response set. Relational items contribute no scale.
pub fn score_response<S: Scalar>(
    questionnaire: &PublishedQuestionnaire<S>,
    resp: &ResponseSet<S>,
) -> Result<ScoreReport<S>, ScoringError> {
    if !resp.is_submitted() {
        return Err(ScoringError::NotSubmitted);
    }
    let values = item_values(questionnaire, resp)?;
    let mut entries = Vec::new();
    for el in &questionnaire.def.elements {
        match el {
            ElementRef::Instrument(id) => {
                let Some(inst) = questionnaire.instruments.iter().find(|i| &i.id == id) else { continue };
                for scale in &inst.scales {
                    let lookup = |local: &str| values.get(&inst.instance_id(local)).cloned();
                    entries.push(entry(format!("{}.{}", inst.id, scale.name), &scale.formula, scale.bands.as_ref(), &lookup)?);
                }
            }
            ElementRef::Group(id) => {
                let Some(g) = questionnaire.groups.iter().find(|g| &g.id == id) else { continue };
                let lookup = |q: &str| values.get(q).cloned();
                entries.push(entry(g.id.clone(), &g.formula, g.bands.as_ref(), &lookup)?);
            }
            ElementRef::Question(_) | ElementRef::Relational(_) => {}
        }
    }
    Ok(ScoreReport {
        wave_id: resp.wave_id.clone(),
        respondent_id: resp.respondent_id.clone(),
        questionnaire_id: questionnaire.def.id.clone(),
        version: questionnaire.def.version,
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instruments::{audit_bands, AUDIT_ID};
    use crate::model::{
        Answer, AnswerOption, Catalog, Completion, Question, QuestionGroup, QuestionnaireDef, QuestionnaireRegistry,
    };
    use num_rational::BigRational;

    fn int(v: i64) -> Score {
        BigRational::from_integer(v.into())
    }

    fn publish(elements: Vec<ElementRef>, catalog: &Catalog) -> PublishedQuestionnaire {
        let mut reg = QuestionnaireRegistry::new();
        let def = QuestionnaireDef { id: "q".into(), title: "t".into(), description: String::new(), elements, version: 0 };
        reg.publish(&def, catalog).unwrap();
        reg.get("q", 1).unwrap()
    }

    fn audit_answers(level: i64) -> ResponseSet {
        let mut r = ResponseSet::new("w", "S01", Completion::Submitted);
        for i in 1..=10 {
            r.answers.insert(format!("AUDIT.Q{i}"), Answer::Choice(format!("Level {level}")));
        }
        r
    }

    #[test]
    fn audit_all_ones_is_zone_two() {
        let p = publish(vec![ElementRef::Instrument(AUDIT_ID.into())], &Catalog::with_builtin_instruments());
        let report = score_response(&p, &audit_answers(1)).unwrap();
        let e = report.entry("AUDIT.total").unwrap();
        assert_eq!(e.score, int(10));
        assert_eq!(e.band.as_deref(), Some("Zone II"));
        assert_eq!(e.guidance.as_deref(), Some("Simple advice"));
        assert_eq!(report.version, 1);
    }

    #[test]
    fn audit_maximum_is_zone_four() {
        let p = publish(vec![ElementRef::Instrument(AUDIT_ID.into())], &Catalog::with_builtin_instruments());
        let e = score_response(&p, &audit_answers(4)).unwrap().entries.remove(0);
        assert_eq!((e.score, e.band.as_deref()), (int(40), Some("Zone IV")));
    }

    #[test]
    fn incomplete_audit_is_missing_answer() {
        let p = publish(vec![ElementRef::Instrument(AUDIT_ID.into())], &Catalog::with_builtin_instruments());
        let mut r = audit_answers(2);
        r.answers.remove("AUDIT.Q4");
        assert_eq!(
            score_response(&p, &r),
            Err(ScoringError::MissingAnswer { scale: "AUDIT.total".into(), item: "Q4".into() })
        );
    }

    #[test]
    fn self_cancelling_group_is_zero() {
        let mut c = Catalog::default();
        c.add_question(Question::choice("Q1", "?", vec![AnswerOption::new("a", int(3)), AnswerOption::new("b", int(7))]));
        c.add_group(QuestionGroup {
            id: "G".into(),
            members: vec!["Q1".into()],
            formula: ScoringFormula::parse("Q1-Q1").unwrap(),
            bands: None,
        });
        let p = publish(vec![ElementRef::Group("G".into())], &c);
        for label in ["a", "b"] {
            let r = ResponseSet::new("w", "S", Completion::Submitted).answer("Q1", Answer::Choice(label.into()));
            assert_eq!(score_response(&p, &r).unwrap().score("G"), Some(&int(0)));
        }
    }

    #[test]
    fn partial_sets_are_not_scored() {
        let p = publish(vec![ElementRef::Instrument(AUDIT_ID.into())], &Catalog::with_builtin_instruments());
        let mut r = audit_answers(0);
        r.status = Completion::Partial;
        assert_eq!(score_response(&p, &r), Err(ScoringError::NotSubmitted));
    }

    #[test]
    fn band_lookup() {
        let t: BandTable<Score> = audit_bands();
        assert_eq!(band_of(&t, &int(7)).unwrap().0, "Zone I");
        assert_eq!(band_of(&t, &int(8)).unwrap().0, "Zone II");
        assert_eq!(band_of(&t, &int(19)).unwrap().0, "Zone III");
        assert!(band_of(&t, &int(41)).is_err());
    }
}

//! Built-in validated instruments, shipped as scoring skeletons.
//!
//! Item wording is a neutral placeholder keyed by the canonical item code; the
//! option values, scale formulas and band tables carry the scoring structure.

use std::collections::{BTreeMap, BTreeSet};

use num_rational::BigRational;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bands::{Band, BandTable};
use crate::formula::ScoringFormula;
use crate::model::{AnswerOption, Finding, Question, Rule};
use crate::scalar::Scalar;
use crate::Score;

pub const AUDIT_ID: &str = "AUDIT";
pub const FAS_ID: &str = "FAS_II";
pub const KIDSCREEN_ID: &str = "KIDSCREEN_27";
pub const GSE_ID: &str = "GSE";
pub const ESTUDES_ID: &str = "ESTUDES";

/// Risk zones of the AUDIT total: (inclusive upper bound, zone, intervention).
pub const AUDIT_ZONES: [(i64, &str, &str); 4] = [
    (7, "Zone I", "Alcohol education"),
    (15, "Zone II", "Simple advice"),
    (19, "Zone III", "Simple advice plus brief counseling and continued monitoring"),
    (40, "Zone IV", "Referral to specialist for diagnostic evaluation and treatment"),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "S: Scalar", deserialize = "S: Scalar"))]
pub struct Scale<S = Score> {
    pub name: String,
    pub formula: ScoringFormula,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bands: Option<BandTable<S>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "S: Scalar", deserialize = "S: Scalar"))]
pub struct Instrument<S = Score> {
    pub id: String,
    pub name: String,
    pub citation: String,
    pub items: Vec<Question<S>>,
    #[serde(default)]
    pub scales: Vec<Scale<S>>,
}

impl<S: Scalar> Instrument<S> {
    /// Question-instance id of an item once embedded in a questionnaire.
    pub fn instance_id(&self, item: &str) -> String {
        format!("{}.{item}", self.id)
    }

    pub fn instance_ids(&self) -> Vec<String> {
        self.items.iter().map(|q| self.instance_id(&q.id)).collect()
    }

    pub fn item(&self, id: &str) -> Option<&Question<S>> {
        self.items.iter().find(|q| q.id == id)
    }

    /// Score range of a scale from the option values of its items.
    pub fn scale_range(&self, scale: &Scale<S>) -> Option<(S, S)> {
        scale.formula.bounds(&|id: &str| self.item(id).and_then(|q| q.value_bounds()))
    }

    pub fn findings(&self) -> Vec<Finding> {
        let mut out = Vec::new();
        let el = |msg: String, rule: Rule| Finding { element: self.id.clone(), rule, message: msg };
        if self.citation.trim().is_empty() {
            out.push(el("instrument has no citation".into(), Rule::MissingCitation));
        }
        let mut ids = BTreeSet::new();
        for q in &self.items {
            if !ids.insert(q.id.as_str()) {
                out.push(el(format!("duplicate item `{}`", q.id), Rule::DuplicateInstance));
            }
            for (rule, msg) in q.violations() {
                out.push(el(msg, rule));
            }
        }
        for scale in &self.scales {
            for r in scale.formula.references() {
                match self.item(r) {
                    None => out.push(el(format!("scale `{}` references unknown item `{r}`", scale.name), Rule::InstrumentFormula)),
                    Some(q) if !q.is_scoreable() => out.push(el(
                        format!("scale `{}` references unscoreable item `{r}`", scale.name),
                        Rule::FormulaUnscoreable,
                    )),
                    Some(_) => {}
                }
            }
            if let Some(bands) = &scale.bands {
                let range = self.scale_range(scale);
                for issue in bands.check(range.as_ref().map(|(a, b)| (a, b))) {
                    out.push(el(format!("scale `{}`: {}", scale.name, issue.message), Rule::BandTable));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InstrumentError {
    #[error("instrument `{0}` has no citation")]
    MissingCitation(String),
    #[error("instrument `{0}` already exists")]
    DuplicateInstrument(String),
    #[error("scale `{scale}` references unknown item `{item}`")]
    UnknownItem { scale: String, item: String },
    #[error("instrument is invalid: {}", .0.iter().map(|f| f.message.as_str()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Finding>),
}

/// Browsable catalog of instruments: the built-ins plus registered ones.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound(serialize = "S: Scalar", deserialize = "S: Scalar"))]
pub struct InstrumentLibrary<S = Score> {
    instruments: BTreeMap<String, Instrument<S>>,
}

impl<S: Scalar> Default for InstrumentLibrary<S> {
    fn default() -> Self {
        InstrumentLibrary { instruments: builtin_instruments().into_iter().map(|i| (i.id.clone(), i)).collect() }
    }
}

impl<S: Scalar> InstrumentLibrary<S> {
    pub fn list(&self) -> impl Iterator<Item = &Instrument<S>> {
        self.instruments.values()
    }

    pub fn get(&self, id: &str) -> Option<&Instrument<S>> {
        self.instruments.get(id)
    }

    /// Adds a new instrument; role checks are the caller's concern.
    pub fn register(&mut self, inst: Instrument<S>) -> Result<String, InstrumentError> {
        if inst.citation.trim().is_empty() {
            return Err(InstrumentError::MissingCitation(inst.id));
        }
        if self.instruments.contains_key(&inst.id) {
            return Err(InstrumentError::DuplicateInstrument(inst.id));
        }
        for scale in &inst.scales {
            if let Some(r) = scale.formula.references().into_iter().find(|r| inst.item(r).is_none()) {
                return Err(InstrumentError::UnknownItem { scale: scale.name.clone(), item: r.to_string() });
            }
        }
        let findings = inst.findings();
        if !findings.is_empty() {
            return Err(InstrumentError::Invalid(findings));
        }
        let id = inst.id.clone();
        self.instruments.insert(id.clone(), inst);
        Ok(id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditZone {
    /// 1..=4
    pub zone: u8,
    pub label: String,
    pub intervention: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("AUDIT total {0} is outside [0, 40]")]
pub struct OutOfRange(pub String);

/// AUDIT risk zone and recommended intervention for a total in `[0, 40]`.
pub fn audit_zone<S: Scalar>(total: &S) -> Result<AuditZone, OutOfRange> {
    if *total < S::zero() || *total > int(40) {
        return Err(OutOfRange(total.to_text()));
    }
    // a total strictly below the next zone's lower edge stays in this zone
    let (i, (_, label, intervention)) = AUDIT_ZONES
        .iter()
        .enumerate()
        .find(|(_, (upper, _, _))| *total < int(upper + 1))
        .ok_or_else(|| OutOfRange(total.to_text()))?;
    Ok(AuditZone { zone: i as u8 + 1, label: label.to_string(), intervention: intervention.to_string() })
}

fn int<S: Scalar>(v: i64) -> S {
    S::from_rational(&BigRational::from_integer(v.into())).expect("small integers are representable")
}

fn item<S: Scalar>(code: &str, instrument: &str, values: std::ops::RangeInclusive<i64>) -> Question<S> {
    let options = values.map(|v| AnswerOption::new(format!("Level {v}"), int(v))).collect();
    Question::choice(code, format!("{instrument} item {code} (wording per cited source)"), options)
}

fn formula(src: &str) -> ScoringFormula {
    ScoringFormula::parse(src).expect("built-in formulas parse")
}

pub fn audit_bands<S: Scalar>() -> BandTable<S> {
    let mut lower = 0;
    let bands = AUDIT_ZONES
        .iter()
        .map(|(upper, label, guidance)| {
            let b = Band::new(int(lower), int(*upper), *label, *guidance);
            lower = upper + 1;
            b
        })
        .collect();
    BandTable::new(bands)
}

fn audit<S: Scalar>() -> Instrument<S> {
    Instrument {
        id: AUDIT_ID.into(),
        name: "Alcohol Use Disorders Identification Test".into(),
        citation: "Babor TF, Higgins-Biddle JC, Saunders JB, Monteiro MG. AUDIT: The Alcohol Use Disorders \
                   Identification Test. Guidelines for Use in Primary Care. 2nd ed. World Health Organization; 2001."
            .into(),
        items: (1..=10).map(|i| item(&format!("Q{i}"), AUDIT_ID, 0..=4)).collect(),
        scales: vec![Scale { name: "total".into(), formula: formula("sum(Q1..Q10)"), bands: Some(audit_bands()) }],
    }
}

/// Default FAS II cut-points; editable data, not part of the instrument.
pub fn fas_default_bands<S: Scalar>() -> BandTable<S> {
    BandTable::new(vec![
        Band::new(int(0), int(2), "Low affluence", ""),
        Band::new(int(3), int(5), "Medium affluence", ""),
        Band::new(int(6), int(9), "High affluence", ""),
    ])
}

fn fas<S: Scalar>() -> Instrument<S> {
    Instrument {
        id: FAS_ID.into(),
        name: "Family Affluence Scale II".into(),
        citation: "Boyce W, Torsheim T, Currie C, Zambon A. The Family Affluence Scale as a measure of national \
                   wealth: validation of an adolescent self-report measure. Social Indicators Research 78, 473-487 (2006)."
            .into(),
        items: vec![
            item("CAR", FAS_ID, 0..=2),
            item("BEDROOM", FAS_ID, 0..=1),
            item("HOLIDAYS", FAS_ID, 0..=3),
            item("COMPUTERS", FAS_ID, 0..=3),
        ],
        scales: vec![Scale {
            name: "total".into(),
            formula: formula("sum(CAR,BEDROOM,HOLIDAYS,COMPUTERS)"),
            bands: Some(fas_default_bands()),
        }],
    }
}

/// KIDSCREEN-27 scales: (scale name, item prefix, item count).
pub const KIDSCREEN_SCALES: [(&str, &str, usize); 5] = [
    ("physical_wellbeing", "PH", 5),
    ("psychological_wellbeing", "PW", 7),
    ("autonomy_parents", "AP", 7),
    ("peers_social_support", "PS", 4),
    ("school_environment", "SE", 4),
];

fn kidscreen<S: Scalar>() -> Instrument<S> {
    let mut items = Vec::new();
    let mut scales = Vec::new();
    for (name, prefix, n) in KIDSCREEN_SCALES {
        items.extend((1..=n).map(|i| item(&format!("{prefix}{i}"), KIDSCREEN_ID, 1..=5)));
        // raw sum over items valued 1..5, linearly rescaled to 0..100
        let src = format!("(sum({prefix}1..{prefix}{n})-{n})*100/{}", 4 * n);
        scales.push(Scale { name: name.into(), formula: formula(&src), bands: None });
    }
    Instrument {
        id: KIDSCREEN_ID.into(),
        name: "KIDSCREEN-27 Health Related Quality of Life Questionnaire".into(),
        citation: "The KIDSCREEN Group Europe. The KIDSCREEN Questionnaires: Quality of life questionnaires for \
                   children and adolescents. Handbook. Pabst Science Publishers; 2006."
            .into(),
        items,
        scales,
    }
}

fn gse<S: Scalar>() -> Instrument<S> {
    Instrument {
        id: GSE_ID.into(),
        name: "General Self-Efficacy Scale".into(),
        citation: "Schwarzer R, Jerusalem M. Generalized Self-Efficacy scale. In: Weinman J, Wright S, Johnston M. \
                   Measures in health psychology. NFER-NELSON; 1995. p. 35-37."
            .into(),
        items: (1..=10).map(|i| item(&format!("G{i}"), GSE_ID, 1..=4)).collect(),
        scales: vec![Scale { name: "total".into(), formula: formula("sum(G1..G10)"), bands: None }],
    }
}

/// Substances retained in the placeholder ESTUDES item set (alcohol excluded).
pub const ESTUDES_SUBSTANCES: [&str; 8] =
    ["TOBACCO", "CANNABIS", "COCAINE", "ECSTASY", "AMPHETAMINES", "HALLUCINOGENS", "INHALANTS", "SEDATIVES"];

fn estudes<S: Scalar>() -> Instrument<S> {
    Instrument {
        id: ESTUDES_ID.into(),
        name: "ESTUDES substance use items (alcohol excluded; editable placeholder set)".into(),
        citation: "Delegación del Gobierno para el Plan Nacional sobre Drogas. Encuesta sobre uso de drogas en \
                   Enseñanzas Secundarias en España (ESTUDES). Ministerio de Sanidad."
            .into(),
        items: ESTUDES_SUBSTANCES.iter().map(|s| item(s, ESTUDES_ID, 0..=4)).collect(),
        scales: Vec::new(),
    }
}

/// The five built-in instruments.
pub fn builtin_instruments<S: Scalar>() -> Vec<Instrument<S>> {
    vec![audit(), fas(), kidscreen(), gse(), estudes()]
}

//! Domain vocabulary: questions and their valued options, question groups,
//! questionnaire definitions, respondents, waves and response sets.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bands::BandTable;
use crate::formula::ScoringFormula;
use crate::instruments::Instrument;
use crate::roster::{self, RelationalInstance, RelationalTemplate, RosterError};
use crate::scalar::Scalar;
use crate::Score;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuestionKind {
    SingleChoice,
    MultiChoice,
    Numeric,
    FreeText,
    /// Marker for a roster-driven question; alters are supplied by a
    /// [`RelationalTemplate`] at wave opening.
    RelationalTemplate,
}

impl QuestionKind {
    pub fn is_choice(self) -> bool {
        matches!(self, QuestionKind::SingleChoice | QuestionKind::MultiChoice)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "S: Scalar", deserialize = "S: Scalar"))]
pub struct AnswerOption<S = Score> {
    pub label: String,
    #[serde(with = "crate::scalar::text")]
    pub value: S,
}

impl<S: Scalar> AnswerOption<S> {
    pub fn new(label: impl Into<String>, value: S) -> Self {
        AnswerOption { label: label.into(), value }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "S: Scalar", deserialize = "S: Scalar"))]
pub struct Question<S = Score> {
    pub id: String,
    pub prompt: String,
    pub kind: QuestionKind,
    #[serde(default)]
    pub options: Vec<AnswerOption<S>>,
    #[serde(default)]
    pub anonymize: bool,
    #[serde(default)]
    pub required: bool,
}

impl<S: Scalar> Question<S> {
    pub fn choice(id: impl Into<String>, prompt: impl Into<String>, options: Vec<AnswerOption<S>>) -> Self {
        Question {
            id: id.into(),
            prompt: prompt.into(),
            kind: QuestionKind::SingleChoice,
            options,
            anonymize: false,
            required: true,
        }
    }

    pub fn free_text(id: impl Into<String>, prompt: impl Into<String>) -> Self {
        Question {
            id: id.into(),
            prompt: prompt.into(),
            kind: QuestionKind::FreeText,
            options: Vec::new(),
            anonymize: false,
            required: false,
        }
    }

    pub fn option(&self, label: &str) -> Option<&AnswerOption<S>> {
        self.options.iter().find(|o| o.label == label)
    }

    /// Type invariants as human-readable violations.
    pub fn violations(&self) -> Vec<(Rule, String)> {
        let mut out = Vec::new();
        if self.id.trim().is_empty() {
            out.push((Rule::EmptyId, "question id is empty".to_string()));
        }
        match self.kind {
            QuestionKind::SingleChoice | QuestionKind::MultiChoice => {
                if self.options.len() < 2 {
                    out.push((Rule::TooFewOptions, format!("choice question `{}` needs at least 2 options", self.id)));
                }
            }
            QuestionKind::Numeric | QuestionKind::FreeText => {
                if !self.options.is_empty() {
                    out.push((Rule::UnexpectedOptions, format!("question `{}` of this kind takes no options", self.id)));
                }
            }
            QuestionKind::RelationalTemplate => {
                if !self.options.is_empty() {
                    out.push((
                        Rule::UnexpectedOptions,
                        format!("relational question `{}` must not list people inline", self.id),
                    ));
                }
            }
        }
        let mut labels = BTreeSet::new();
        for o in &self.options {
            if !labels.insert(o.label.as_str()) {
                out.push((Rule::DuplicateOptionLabel, format!("question `{}` repeats option `{}`", self.id, o.label)));
            }
            if !o.value.is_finite_value() {
                out.push((Rule::NonFiniteValue, format!("question `{}` option `{}` has a non-finite value", self.id, o.label)));
            }
        }
        out
    }

    /// Attainable score range, when the question is scoreable.
    pub fn value_bounds(&self) -> Option<(S, S)> {
        match self.kind {
            QuestionKind::SingleChoice => {
                let lo = self.options.iter().map(|o| o.value.clone()).reduce(|a, b| if b < a { b } else { a })?;
                let hi = self.options.iter().map(|o| o.value.clone()).reduce(|a, b| if b > a { b } else { a })?;
                Some((lo, hi))
            }
            QuestionKind::MultiChoice => {
                let zero = S::zero();
                let lo = self.options.iter().filter(|o| o.value < zero).fold(S::zero(), |a, o| a + o.value.clone());
                let hi = self.options.iter().filter(|o| o.value > zero).fold(S::zero(), |a, o| a + o.value.clone());
                Some((lo, hi))
            }
            _ => None,
        }
    }

    pub fn is_scoreable(&self) -> bool {
        matches!(self.kind, QuestionKind::SingleChoice | QuestionKind::MultiChoice | QuestionKind::Numeric)
    }

    /// Numeric value of an answer. Multi-choice answers score as the sum of the
    /// selected options; free text has no value.
    pub fn value_of(&self, answer: &Answer<S>) -> Result<Option<S>, AnswerError> {
        let bad = |reason: &str| AnswerError { item: self.id.clone(), reason: reason.to_string() };
        match (self.kind, answer) {
            (QuestionKind::SingleChoice, Answer::Choice(label)) => self
                .option(label)
                .map(|o| Some(o.value.clone()))
                .ok_or_else(|| bad(&format!("unknown option `{label}`"))),
            (QuestionKind::MultiChoice, Answer::Choices(labels)) => {
                let mut seen = BTreeSet::new();
                let mut total = S::zero();
                for l in labels {
                    if !seen.insert(l) {
                        return Err(bad(&format!("option `{l}` selected twice")));
                    }
                    let o = self.option(l).ok_or_else(|| bad(&format!("unknown option `{l}`")))?;
                    total = total + o.value.clone();
                }
                Ok(Some(total))
            }
            (QuestionKind::MultiChoice, Answer::Choice(label)) => self
                .option(label)
                .map(|o| Some(o.value.clone()))
                .ok_or_else(|| bad(&format!("unknown option `{label}`"))),
            (QuestionKind::Numeric, Answer::Number(v)) => {
                if v.is_finite_value() {
                    Ok(Some(v.clone()))
                } else {
                    Err(bad("non-finite number"))
                }
            }
            (QuestionKind::FreeText, Answer::Text(_)) => Ok(None),
            _ => Err(bad("answer does not match the question kind")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid answer for `{item}`: {reason}")]
pub struct AnswerError {
    pub item: String,
    pub reason: String,
}

/// Named formula over member questions, optionally banded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "S: Scalar", deserialize = "S: Scalar"))]
pub struct QuestionGroup<S = Score> {
    pub id: String,
    pub members: Vec<String>,
    pub formula: ScoringFormula,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bands: Option<BandTable<S>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElementRef {
    Instrument(String),
    Question(String),
    Group(String),
    Relational(String),
}

impl ElementRef {
    pub fn id(&self) -> &str {
        match self {
            ElementRef::Instrument(id) | ElementRef::Question(id) | ElementRef::Group(id) | ElementRef::Relational(id) => id,
        }
    }
}

impl fmt::Display for ElementRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self {
            ElementRef::Instrument(_) => "instrument",
            ElementRef::Question(_) => "question",
            ElementRef::Group(_) => "group",
            ElementRef::Relational(_) => "relational",
        };
        write!(f, "{kind} {}", self.id())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionnaireDef {
    pub id: String,
    pub title: String,
    #[serde(default)]
    pub description: String,
    pub elements: Vec<ElementRef>,
    /// 0 for a draft that was never published.
    #[serde(default)]
    pub version: u32,
}

/// Everything a questionnaire can reference.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound(serialize = "S: Scalar", deserialize = "S: Scalar"))]
pub struct Catalog<S = Score> {
    #[serde(default)]
    pub questions: BTreeMap<String, Question<S>>,
    #[serde(default)]
    pub groups: BTreeMap<String, QuestionGroup<S>>,
    #[serde(default)]
    pub templates: BTreeMap<String, RelationalTemplate<S>>,
    #[serde(default)]
    pub instruments: BTreeMap<String, Instrument<S>>,
}

impl<S> Default for Catalog<S> {
    fn default() -> Self {
        Catalog {
            questions: BTreeMap::new(),
            groups: BTreeMap::new(),
            templates: BTreeMap::new(),
            instruments: BTreeMap::new(),
        }
    }
}

impl<S: Scalar> Catalog<S> {
    pub fn with_builtin_instruments() -> Self {
        let mut c = Catalog::default();
        for inst in crate::instruments::builtin_instruments() {
            c.instruments.insert(inst.id.clone(), inst);
        }
        c
    }

    pub fn add_question(&mut self, q: Question<S>) {
        self.questions.insert(q.id.clone(), q);
    }

    pub fn add_group(&mut self, g: QuestionGroup<S>) {
        self.groups.insert(g.id.clone(), g);
    }

    pub fn add_template(&mut self, t: RelationalTemplate<S>) {
        self.templates.insert(t.id.clone(), t);
    }

    pub fn add_instrument(&mut self, i: Instrument<S>) {
        self.instruments.insert(i.id.clone(), i);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rule {
    UnresolvedElement,
    DuplicateElement,
    DuplicateInstance,
    EmptyId,
    TooFewOptions,
    UnexpectedOptions,
    DuplicateOptionLabel,
    NonFiniteValue,
    EmptyGroup,
    FormulaNonMember,
    FormulaFreeText,
    FormulaUnscoreable,
    BandTable,
    MissingCitation,
    InstrumentFormula,
    TieScale,
    TemplatePrompt,
    EmptyAlterSet,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default();
        f.write_str(&s)
    }
}

/// A validation finding names the offending element and the violated rule.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub element: String,
    pub rule: Rule,
    pub message: String,
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} [{}]: {}", self.element, self.rule, self.message)
    }
}

fn finding(element: impl Into<String>, rule: Rule, message: impl Into<String>) -> Finding {
    Finding { element: element.into(), rule, message: message.into() }
}

/// Checks every type invariant of `def` against `catalog`. Unresolved
/// references are reported as findings.
pub fn validate_questionnaire<S: Scalar>(def: &QuestionnaireDef, catalog: &Catalog<S>) -> Vec<Finding> {
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    let mut instance_ids: BTreeMap<String, String> = BTreeMap::new();
    let mut claim = |out: &mut Vec<Finding>, instance: String, owner: String| {
        if let Some(prev) = instance_ids.get(&instance) {
            if *prev != owner {
                out.push(finding(
                    &owner,
                    Rule::DuplicateInstance,
                    format!("item id `{instance}` is produced by both {prev} and {owner}"),
                ));
            }
        } else {
            instance_ids.insert(instance, owner);
        }
    };

    if def.elements.is_empty() {
        out.push(finding(&def.id, Rule::EmptyGroup, "questionnaire has no elements"));
    }
    for el in &def.elements {
        if !seen.insert(el.clone()) {
            out.push(finding(el.to_string(), Rule::DuplicateElement, format!("duplicate element {el}")));
            continue;
        }
        let owner = el.to_string();
        match el {
            ElementRef::Question(id) => match catalog.questions.get(id) {
                None => out.push(finding(id, Rule::UnresolvedElement, format!("unresolved element {id}"))),
                Some(q) => {
                    for (rule, msg) in q.violations() {
                        out.push(finding(id, rule, msg));
                    }
                    claim(&mut out, q.id.clone(), owner);
                }
            },
            ElementRef::Group(id) => match catalog.groups.get(id) {
                None => out.push(finding(id, Rule::UnresolvedElement, format!("unresolved element {id}"))),
                Some(g) => {
                    out.extend(check_group(g, catalog));
                    for m in &g.members {
                        if catalog.questions.contains_key(m) {
                            claim(&mut out, m.clone(), format!("question {m}"));
                        }
                    }
                }
            },
            ElementRef::Instrument(id) => match catalog.instruments.get(id) {
                None => out.push(finding(id, Rule::UnresolvedElement, format!("unresolved element {id}"))),
                Some(inst) => {
                    out.extend(inst.findings());
                    for item in &inst.items {
                        claim(&mut out, inst.instance_id(&item.id), owner.clone());
                    }
                }
            },
            ElementRef::Relational(id) => match catalog.templates.get(id) {
                None => out.push(finding(id, Rule::UnresolvedElement, format!("unresolved element {id}"))),
                Some(t) => out.extend(t.findings()),
            },
        }
    }
    out
}

fn check_group<S: Scalar>(g: &QuestionGroup<S>, catalog: &Catalog<S>) -> Vec<Finding> {
    let mut out = Vec::new();
    if g.members.is_empty() {
        out.push(finding(&g.id, Rule::EmptyGroup, "group has no member questions"));
    }
    let members: BTreeSet<&str> = g.members.iter().map(String::as_str).collect();
    for m in &g.members {
        match catalog.questions.get(m) {
            None => out.push(finding(m, Rule::UnresolvedElement, format!("unresolved element {m}"))),
            Some(q) => {
                for (rule, msg) in q.violations() {
                    out.push(finding(m, rule, msg));
                }
            }
        }
    }
    for r in g.formula.references() {
        if !members.contains(r) {
            out.push(finding(&g.id, Rule::FormulaNonMember, format!("formula references non-member `{r}`")));
            continue;
        }
        if let Some(q) = catalog.questions.get(r) {
            if q.kind == QuestionKind::FreeText {
                out.push(finding(&g.id, Rule::FormulaFreeText, format!("formula references free-text question `{r}`")));
            } else if !q.is_scoreable() {
                out.push(finding(&g.id, Rule::FormulaUnscoreable, format!("formula references unscoreable question `{r}`")));
            }
        }
    }
    if let Some(bands) = &g.bands {
        let range = g.formula.bounds(&|id: &str| catalog.questions.get(id).and_then(|q| q.value_bounds()));
        for issue in bands.check(range.as_ref().map(|(a, b)| (a, b))) {
            out.push(finding(&g.id, Rule::BandTable, issue.message));
        }
    }
    out
}

/// Fully resolved, self-contained questionnaire version: the definition plus a
/// snapshot of every element it references.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "S: Scalar", deserialize = "S: Scalar"))]
pub struct PublishedQuestionnaire<S = Score> {
    pub def: QuestionnaireDef,
    pub questions: Vec<Question<S>>,
    pub groups: Vec<QuestionGroup<S>>,
    pub instruments: Vec<Instrument<S>>,
    pub templates: Vec<RelationalTemplate<S>>,
}

/// A non-relational item as presented to a respondent.
#[derive(Debug, Clone)]
pub struct ItemRef<'a, S> {
    pub instance_id: String,
    pub question: &'a Question<S>,
    pub instrument: Option<&'a str>,
}

impl<S: Scalar> PublishedQuestionnaire<S> {
    fn resolve(def: &QuestionnaireDef, catalog: &Catalog<S>) -> Self {
        let mut questions: Vec<Question<S>> = Vec::new();
        let mut have = BTreeSet::new();
        let mut groups = Vec::new();
        let mut instruments = Vec::new();
        let mut templates = Vec::new();
        for el in &def.elements {
            match el {
                ElementRef::Question(id) => {
                    if let Some(q) = catalog.questions.get(id) {
                        if have.insert(q.id.clone()) {
                            questions.push(q.clone());
                        }
                    }
                }
                ElementRef::Group(id) => {
                    if let Some(g) = catalog.groups.get(id) {
                        for m in &g.members {
                            if let Some(q) = catalog.questions.get(m) {
                                if have.insert(q.id.clone()) {
                                    questions.push(q.clone());
                                }
                            }
                        }
                        groups.push(g.clone());
                    }
                }
                ElementRef::Instrument(id) => instruments.extend(catalog.instruments.get(id).cloned()),
                ElementRef::Relational(id) => templates.extend(catalog.templates.get(id).cloned()),
            }
        }
        PublishedQuestionnaire { def: def.clone(), questions, groups, instruments, templates }
    }

    pub fn id(&self) -> &str {
        &self.def.id
    }

    pub fn version(&self) -> u32 {
        self.def.version
    }

    /// Every non-relational item in presentation order.
    pub fn items(&self) -> Vec<ItemRef<'_, S>> {
        let mut out = Vec::new();
        let mut emitted_questions = false;
        for el in &self.def.elements {
            match el {
                ElementRef::Instrument(id) => {
                    if let Some(inst) = self.instruments.iter().find(|i| &i.id == id) {
                        for item in &inst.items {
                            out.push(ItemRef {
                                instance_id: inst.instance_id(&item.id),
                                question: item,
                                instrument: Some(&inst.id),
                            });
                        }
                    }
                }
                ElementRef::Question(_) | ElementRef::Group(_) if !emitted_questions => {
                    emitted_questions = true;
                    for q in &self.questions {
                        out.push(ItemRef { instance_id: q.id.clone(), question: q, instrument: None });
                    }
                }
                _ => {}
            }
        }
        out
    }

    /// Instance ids of all non-relational items (`INSTRUMENT.item` for
    /// instrument items).
    pub fn item_ids(&self) -> Vec<String> {
        self.items().into_iter().map(|i| i.instance_id).collect()
    }

    /// Looks up a non-relational item by instance id.
    pub fn item(&self, instance_id: &str) -> Option<&Question<S>> {
        if let Some((inst, local)) = instance_id.split_once('.') {
            if let Some(i) = self.instruments.iter().find(|i| i.id == inst) {
                if let Some(q) = i.items.iter().find(|q| q.id == local) {
                    return Some(q);
                }
            }
        }
        self.questions.iter().find(|q| q.id == instance_id)
    }

    pub fn template(&self, id: &str) -> Option<&RelationalTemplate<S>> {
        self.templates.iter().find(|t| t.id == id)
    }

    /// Every question-instance id for a roster snapshot: items followed by one
    /// `template[alter]` id per (respondent, alter) pair.
    pub fn instance_ids(&self, roster: &[String]) -> Result<Vec<String>, RosterError> {
        let mut ids = self.item_ids();
        for t in &self.templates {
            for alters in roster::alter_lists(t, roster)?.values() {
                ids.extend(alters.iter().map(|a| roster::item_id(&t.id, a)));
            }
        }
        Ok(ids)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PublishError {
    #[error("questionnaire has {} validation finding(s)", .0.len())]
    Invalid(Vec<Finding>),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WaveError {
    #[error("questionnaire `{id}` has no published version {version}")]
    Unpublished { id: String, version: u32 },
    #[error("respondent group `{0}` is empty")]
    EmptyGroup(String),
    #[error("respondent `{0}` is not in the directory")]
    UnknownRespondent(String),
    #[error(transparent)]
    Roster(#[from] RosterError),
}

/// Published questionnaire versions, frozen as serialized bytes so repeated
/// reads are byte-identical.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct QuestionnaireRegistry {
    versions: BTreeMap<String, Vec<String>>,
}

impl QuestionnaireRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Validates and freezes `def`; returns the new version number.
    pub fn publish<S: Scalar>(&mut self, def: &QuestionnaireDef, catalog: &Catalog<S>) -> Result<u32, PublishError> {
        let findings = validate_questionnaire(def, catalog);
        if !findings.is_empty() {
            return Err(PublishError::Invalid(findings));
        }
        let versions = self.versions.entry(def.id.clone()).or_default();
        let version = versions.len() as u32 + 1;
        let mut frozen_def = def.clone();
        frozen_def.version = version;
        let published = PublishedQuestionnaire::resolve(&frozen_def, catalog);
        let bytes = serde_json::to_string(&published).expect("published questionnaires serialize");
        versions.push(bytes);
        Ok(version)
    }

    pub fn latest_version(&self, id: &str) -> Option<u32> {
        self.versions.get(id).map(|v| v.len() as u32).filter(|v| *v > 0)
    }

    pub fn bytes(&self, id: &str, version: u32) -> Option<&[u8]> {
        let idx = (version as usize).checked_sub(1)?;
        self.versions.get(id)?.get(idx).map(String::as_bytes)
    }

    pub fn get<S: Scalar>(&self, id: &str, version: u32) -> Option<PublishedQuestionnaire<S>> {
        serde_json::from_slice(self.bytes(id, version)?).ok()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.versions.keys().map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Respondent {
    pub id: String,
    pub display_name: String,
    #[serde(default)]
    pub attributes: BTreeMap<String, String>,
}

impl Respondent {
    pub fn new(id: impl Into<String>, display_name: impl Into<String>) -> Self {
        Respondent { id: id.into(), display_name: display_name.into(), attributes: BTreeMap::new() }
    }

    pub fn with_attribute(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.attributes.insert(key.into(), value.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RespondentGroup {
    pub id: String,
    pub name: String,
    pub members: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Wave {
    pub id: String,
    pub questionnaire_id: String,
    pub version: u32,
    pub group_id: String,
    pub roster: Vec<String>,
    /// Seconds since the Unix epoch.
    pub opened_at: i64,
    pub label: String,
    #[serde(default)]
    pub closed: bool,
}

/// Identity of a wave to open.
#[derive(Debug, Clone)]
pub struct WaveSpec {
    pub id: String,
    pub label: String,
    pub opened_at: i64,
}

#[derive(Debug, Clone)]
pub struct OpenedWave<S = Score> {
    pub wave: Wave,
    pub questionnaire: PublishedQuestionnaire<S>,
    pub relational: Vec<RelationalInstance>,
}

/// Opens a wave of a published questionnaire version for a respondent group;
/// the roster is the group membership at call time.
pub fn open_wave<S: Scalar>(
    registry: &QuestionnaireRegistry,
    questionnaire_id: &str,
    version: u32,
    group: &RespondentGroup,
    directory: &BTreeMap<String, Respondent>,
    spec: WaveSpec,
) -> Result<OpenedWave<S>, WaveError> {
    let questionnaire: PublishedQuestionnaire<S> = registry
        .get(questionnaire_id, version)
        .ok_or_else(|| WaveError::Unpublished { id: questionnaire_id.to_string(), version })?;
    if group.members.is_empty() {
        return Err(WaveError::EmptyGroup(group.id.clone()));
    }
    let mut names = BTreeMap::new();
    for m in &group.members {
        let r = directory.get(m).ok_or_else(|| WaveError::UnknownRespondent(m.clone()))?;
        names.insert(m.clone(), r.display_name.clone());
    }
    let wave = Wave {
        id: spec.id,
        questionnaire_id: questionnaire_id.to_string(),
        version,
        group_id: group.id.clone(),
        roster: group.members.clone(),
        opened_at: spec.opened_at,
        label: spec.label,
        closed: false,
    };
    let relational = questionnaire
        .templates
        .iter()
        .map(|t| roster::instantiate(t, &wave, &names))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(OpenedWave { wave, questionnaire, relational })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", bound(serialize = "S: Scalar", deserialize = "S: Scalar"))]
pub enum Answer<S = Score> {
    Choice(String),
    Choices(Vec<String>),
    Number(#[serde(with = "crate::scalar::text")] S),
    Text(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Completion {
    Partial,
    Submitted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "S: Scalar", deserialize = "S: Scalar"))]
pub struct ResponseSet<S = Score> {
    pub wave_id: String,
    pub respondent_id: String,
    pub answers: BTreeMap<String, Answer<S>>,
    pub status: Completion,
}

impl<S: Scalar> ResponseSet<S> {
    pub fn new(wave_id: impl Into<String>, respondent_id: impl Into<String>, status: Completion) -> Self {
        ResponseSet { wave_id: wave_id.into(), respondent_id: respondent_id.into(), answers: BTreeMap::new(), status }
    }

    pub fn answer(mut self, item: impl Into<String>, answer: Answer<S>) -> Self {
        self.answers.insert(item.into(), answer);
        self
    }

    pub fn is_submitted(&self) -> bool {
        self.status == Completion::Submitted
    }
}

/// Problems found when checking a response set against its questionnaire.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResponseIssues {
    pub missing: Vec<String>,
    pub unknown: Vec<String>,
    pub invalid: Vec<AnswerIssue>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerIssue {
    pub item: String,
    pub reason: String,
}

impl ResponseIssues {
    pub fn is_empty(&self) -> bool {
        self.missing.is_empty() && self.unknown.is_empty() && self.invalid.is_empty()
    }
}

/// Checks a response set: answers must target items of the questionnaire (or
/// the respondent's own relational items) and be well-formed; submitted sets
/// must answer every required non-relational item.
pub fn check_response<S: Scalar>(
    questionnaire: &PublishedQuestionnaire<S>,
    relational: &[RelationalInstance],
    resp: &ResponseSet<S>,
) -> ResponseIssues {
    let mut issues = ResponseIssues::default();
    let mut relational_items: BTreeMap<String, &RelationalTemplate<S>> = BTreeMap::new();
    for inst in relational {
        if let (Some(items), Some(t)) = (inst.items.get(&resp.respondent_id), questionnaire.template(&inst.template_id)) {
            for it in items {
                relational_items.insert(it.item_id.clone(), t);
            }
        }
    }
    for (item, answer) in &resp.answers {
        if let Some(q) = questionnaire.item(item) {
            if let Err(e) = q.value_of(answer) {
                issues.invalid.push(AnswerIssue { item: item.clone(), reason: e.reason });
            }
        } else if let Some(t) = relational_items.get(item) {
            if t.tie_weight(answer).is_none() {
                issues.invalid.push(AnswerIssue { item: item.clone(), reason: "not a tie-scale option".into() });
            }
        } else {
            issues.unknown.push(item.clone());
        }
    }
    if resp.is_submitted() {
        for item in questionnaire.items() {
            if item.question.required && !resp.answers.contains_key(&item.instance_id) {
                issues.missing.push(item.instance_id);
            }
        }
    }
    issues
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instruments::AUDIT_ID;
    use num_rational::BigRational;

    fn int(v: i64) -> Score {
        BigRational::from_integer(v.into())
    }

    fn likert(id: &str) -> Question {
        Question::choice(id, format!("{id}?"), (0..3).map(|v| AnswerOption::new(format!("L{v}"), int(v))).collect())
    }

    fn catalog() -> Catalog {
        let mut c = Catalog::with_builtin_instruments();
        c.add_question(likert("Q1"));
        c.add_question(likert("Q2"));
        c.add_group(QuestionGroup {
            id: "G1".into(),
            members: vec!["Q1".into(), "Q2".into()],
            formula: ScoringFormula::parse("Q1+Q2").unwrap(),
            bands: None,
        });
        c
    }

    fn def(elements: Vec<ElementRef>) -> QuestionnaireDef {
        QuestionnaireDef { id: "study".into(), title: "Study".into(), description: String::new(), elements, version: 0 }
    }

    #[test]
    fn well_formed_definition_has_no_findings() {
        let d = def(vec![ElementRef::Instrument(AUDIT_ID.into()), ElementRef::Group("G1".into())]);
        assert_eq!(validate_questionnaire(&d, &catalog()), vec![]);
    }

    #[test]
    fn non_member_formula_reference() {
        let mut c = catalog();
        c.add_question(likert("Q3"));
        c.groups.get_mut("G1").unwrap().formula = ScoringFormula::parse("Q1+Q3").unwrap();
        let f = validate_questionnaire(&def(vec![ElementRef::Group("G1".into())]), &c);
        assert_eq!(f.len(), 1);
        assert_eq!(f[0].rule, Rule::FormulaNonMember);
        assert!(f[0].message.contains("formula references non-member"));
    }

    #[test]
    fn unresolved_and_duplicate_elements() {
        let d = def(vec![
            ElementRef::Question("QX".into()),
            ElementRef::Question("Q1".into()),
            ElementRef::Question("Q1".into()),
        ]);
        let f = validate_questionnaire(&d, &catalog());
        assert!(f.iter().any(|f| f.rule == Rule::UnresolvedElement && f.message == "unresolved element QX"));
        assert!(f.iter().any(|f| f.rule == Rule::DuplicateElement));
    }

    #[test]
    fn question_invariants() {
        let mut c = catalog();
        let mut q = likert("Q9");
        q.options.truncate(1);
        c.add_question(q);
        let mut t = Question::free_text("T1", "name");
        t.options.push(AnswerOption::new("x", int(1)));
        c.add_question(t);
        let mut dup = likert("Q8");
        dup.options[1].label = "L0".into();
        c.add_question(dup);
        let d = def(vec![
            ElementRef::Question("Q9".into()),
            ElementRef::Question("T1".into()),
            ElementRef::Question("Q8".into()),
        ]);
        let rules: Vec<Rule> = validate_questionnaire(&d, &c).into_iter().map(|f| f.rule).collect();
        assert!(rules.contains(&Rule::TooFewOptions));
        assert!(rules.contains(&Rule::UnexpectedOptions));
        assert!(rules.contains(&Rule::DuplicateOptionLabel));
    }

    #[test]
    fn free_text_cannot_be_scored() {
        let mut c = catalog();
        c.add_question(Question::free_text("T1", "comment"));
        c.add_group(QuestionGroup {
            id: "G2".into(),
            members: vec!["Q1".into(), "T1".into()],
            formula: ScoringFormula::parse("Q1+T1").unwrap(),
            bands: None,
        });
        let f = validate_questionnaire(&def(vec![ElementRef::Group("G2".into())]), &c);
        assert_eq!(f.iter().map(|f| f.rule).collect::<Vec<_>>(), vec![Rule::FormulaFreeText]);
    }

    #[test]
    fn publish_versions_are_immutable() {
        let c = catalog();
        let mut reg = QuestionnaireRegistry::new();
        let mut d = def(vec![ElementRef::Instrument(AUDIT_ID.into())]);
        assert_eq!(reg.publish(&d, &c).unwrap(), 1);
        let v1 = reg.bytes("study", 1).unwrap().to_vec();
        d.elements.push(ElementRef::Group("G1".into()));
        assert_eq!(reg.publish(&d, &c).unwrap(), 2);
        assert_eq!(reg.bytes("study", 1).unwrap(), v1.as_slice());
        let p1: PublishedQuestionnaire = reg.get("study", 1).unwrap();
        assert_eq!(p1.def.elements.len(), 1);
        assert_eq!(p1.version(), 1);
        assert_eq!(reg.latest_version("study"), Some(2));
    }

    #[test]
    fn publish_with_findings_is_rejected() {
        let mut reg = QuestionnaireRegistry::new();
        let d = def(vec![ElementRef::Question("QX".into())]);
        match reg.publish(&d, &catalog()) {
            Err(PublishError::Invalid(f)) => assert_eq!(f[0].rule, Rule::UnresolvedElement),
            other => panic!("{other:?}"),
        }
        assert_eq!(reg.latest_version("study"), None);
    }

    fn directory(n: usize) -> (RespondentGroup, BTreeMap<String, Respondent>) {
        let ids: Vec<String> = (1..=n).map(|i| format!("S{i:02}")).collect();
        let dir = ids.iter().map(|id| (id.clone(), Respondent::new(id, format!("Student {id}")))).collect();
        (RespondentGroup { id: "class-a".into(), name: "Class A".into(), members: ids }, dir)
    }

    #[test]
    fn open_wave_snapshots_roster() {
        let mut reg = QuestionnaireRegistry::new();
        reg.publish(&def(vec![ElementRef::Instrument(AUDIT_ID.into())]), &catalog()).unwrap();
        let (group, dir) = directory(20);
        let spec = |label: &str| WaveSpec { id: format!("w-{label}"), label: label.into(), opened_at: 0 };
        let t1 = open_wave::<Score>(&reg, "study", 1, &group, &dir, spec("T1")).unwrap();
        assert_eq!(t1.wave.roster.len(), 20);
        let t2 = open_wave::<Score>(&reg, "study", 1, &group, &dir, spec("T2")).unwrap();
        assert_ne!(t1.wave.id, t2.wave.id);
        assert_eq!((t1.wave.questionnaire_id.as_str(), t1.wave.version), (t2.wave.questionnaire_id.as_str(), t2.wave.version));
        let empty = RespondentGroup { id: "none".into(), name: "none".into(), members: vec![] };
        assert!(matches!(open_wave::<Score>(&reg, "study", 1, &empty, &dir, spec("T3")), Err(WaveError::EmptyGroup(_))));
        assert!(matches!(open_wave::<Score>(&reg, "study", 2, &group, &dir, spec("T3")), Err(WaveError::Unpublished { .. })));
    }

    #[test]
    fn submitted_response_must_be_complete() {
        let mut reg = QuestionnaireRegistry::new();
        reg.publish(&def(vec![ElementRef::Group("G1".into())]), &catalog()).unwrap();
        let p: PublishedQuestionnaire = reg.get("study", 1).unwrap();
        let r = ResponseSet::new("w", "S01", Completion::Submitted).answer("Q1", Answer::Choice("L1".into()));
        let issues = check_response(&p, &[], &r);
        assert_eq!(issues.missing, vec!["Q2".to_string()]);
        let r = r.answer("Q2", Answer::Choice("nope".into())).answer("Q7", Answer::Choice("L1".into()));
        let issues = check_response(&p, &[], &r);
        assert!(issues.missing.is_empty());
        assert_eq!(issues.unknown, vec!["Q7".to_string()]);
        assert_eq!(issues.invalid.len(), 1);
    }

    #[test]
    fn multi_choice_sums_selected() {
        let q = Question {
            id: "M".into(),
            prompt: "pick".into(),
            kind: QuestionKind::MultiChoice,
            options: vec![AnswerOption::new("a", int(1)), AnswerOption::new("b", int(2)), AnswerOption::new("c", int(4))],
            anonymize: false,
            required: true,
        };
        let v = q.value_of(&Answer::Choices(vec!["a".into(), "c".into()])).unwrap();
        assert_eq!(v, Some(int(5)));
        assert_eq!(q.value_bounds(), Some((int(0), int(7))));
        assert!(q.value_of(&Answer::Choices(vec!["a".into(), "a".into()])).is_err());
    }

    #[test]
    fn definition_document_round_trips() {
        let c = catalog();
        let json = serde_json::to_string(&c).unwrap();
        let back: Catalog = serde_json::from_str(&json).unwrap();
        assert_eq!(back.groups, c.groups);
        assert_eq!(back.instruments, c.instruments);
    }
}

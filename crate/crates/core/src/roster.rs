//! Roster-driven relational questions: one item per (respondent, alter) pair,
//! kept consistent under roster edits, and turned into edge lists.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Answer, AnswerOption, Finding, ResponseSet, Rule, Wave};
use crate::scalar::Scalar;
use crate::Score;

/// Placeholder replaced by the alter's display label in item prompts.
pub const ALTER_PLACEHOLDER: &str = "{alter}";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entity {
    pub id: String,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum RelationMode {
    /// Alters are the roster peers (square sociomatrix).
    OneMode,
    /// Alters are an external entity list (rectangular sociomatrix).
    TwoMode { entities: Vec<Entity> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "S: Scalar", deserialize = "S: Scalar"))]
pub struct RelationalTemplate<S = Score> {
    pub id: String,
    /// Prompt with an `{alter}` placeholder.
    pub prompt: String,
    pub relation: String,
    /// Weakest to strongest; a weight of 0 means "no tie".
    pub tie_scale: Vec<AnswerOption<S>>,
    pub mode: RelationMode,
}

impl<S: Scalar> RelationalTemplate<S> {
    pub fn one_mode(id: impl Into<String>, relation: impl Into<String>, prompt: impl Into<String>) -> Self {
        RelationalTemplate {
            id: id.into(),
            prompt: prompt.into(),
            relation: relation.into(),
            tie_scale: default_tie_scale(),
            mode: RelationMode::OneMode,
        }
    }

    pub fn is_one_mode(&self) -> bool {
        matches!(self.mode, RelationMode::OneMode)
    }

    /// Weight of a tie-scale answer, `None` if it is not a scale option.
    pub fn tie_weight(&self, answer: &Answer<S>) -> Option<S> {
        match answer {
            Answer::Choice(label) => self.tie_scale.iter().find(|o| &o.label == label).map(|o| o.value.clone()),
            _ => None,
        }
    }

    pub fn option_by_weight(&self, weight: &S) -> Option<&AnswerOption<S>> {
        self.tie_scale.iter().find(|o| &o.value == weight)
    }

    pub fn prompt_for(&self, alter_label: &str) -> String {
        self.prompt.replace(ALTER_PLACEHOLDER, alter_label)
    }

    pub fn findings(&self) -> Vec<Finding> {
        let mut out = Vec::new();
        let mut push = |rule: Rule, message: String| out.push(Finding { element: self.id.clone(), rule, message });
        if !self.prompt.contains(ALTER_PLACEHOLDER) {
            push(Rule::TemplatePrompt, format!("prompt lacks the {ALTER_PLACEHOLDER} placeholder"));
        }
        if self.tie_scale.len() < 2 {
            push(Rule::TieScale, "tie scale needs at least 2 levels".into());
        }
        if self.tie_scale.first().is_some_and(|o| o.value < S::zero()) {
            push(Rule::TieScale, "tie weights must be non-negative".into());
        }
        for w in self.tie_scale.windows(2) {
            if w[1].value <= w[0].value {
                push(Rule::TieScale, format!("tie weights must increase strictly (`{}` after `{}`)", w[1].label, w[0].label));
            }
        }
        let mut labels = BTreeSet::new();
        for o in &self.tie_scale {
            if !labels.insert(&o.label) {
                push(Rule::DuplicateOptionLabel, format!("tie scale repeats `{}`", o.label));
            }
        }
        if let RelationMode::TwoMode { entities } = &self.mode {
            if entities.is_empty() {
                push(Rule::EmptyAlterSet, "two-mode template has no entities".into());
            }
            let mut ids = BTreeSet::new();
            for e in entities {
                if !ids.insert(&e.id) {
                    push(Rule::DuplicateInstance, format!("entity `{}` listed twice", e.id));
                }
            }
        }
        out
    }
}

/// No tie (0), acquaintance (1), partner (2), friend (3).
pub fn default_tie_scale<S: Scalar>() -> Vec<AnswerOption<S>> {
    ["No tie", "Acquaintance", "Partner", "Friend"]
        .iter()
        .enumerate()
        .map(|(w, l)| AnswerOption::new(*l, S::from_count(w)))
        .collect()
}

/// Question-instance id of the item asking about `alter`; also the CSV header
/// convention `template[alter]`.
pub fn item_id(template: &str, alter: &str) -> String {
    format!("{template}[{alter}]")
}

/// Splits `template[alter]` back into its parts.
pub fn parse_item_id(id: &str) -> Option<(&str, &str)> {
    let (t, rest) = id.split_once('[')?;
    let alter = rest.strip_suffix(']')?;
    if t.is_empty() || alter.is_empty() || alter.contains('[') {
        return None;
    }
    Some((t, alter))
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RosterError {
    #[error("template `{0}` has no alters for this roster")]
    NoAlters(String),
    #[error("wave `{0}` is closed")]
    WaveClosed(String),
    #[error("respondent `{0}` is already on the roster")]
    AlreadyPresent(String),
    #[error("respondent `{0}` is not on the roster")]
    NotOnRoster(String),
    #[error("instance belongs to wave `{instance}`, not `{wave}`")]
    WaveMismatch { instance: String, wave: String },
}

/// Alter ids per respondent for a roster snapshot.
pub fn alter_lists<S: Scalar>(
    template: &RelationalTemplate<S>,
    roster: &[String],
) -> Result<BTreeMap<String, Vec<String>>, RosterError> {
    let mut out = BTreeMap::new();
    match &template.mode {
        RelationMode::OneMode => {
            if roster.len() < 2 {
                return Err(RosterError::NoAlters(template.id.clone()));
            }
            for me in roster {
                out.insert(me.clone(), roster.iter().filter(|a| *a != me).cloned().collect());
            }
        }
        RelationMode::TwoMode { entities } => {
            if entities.is_empty() || roster.is_empty() {
                return Err(RosterError::NoAlters(template.id.clone()));
            }
            let ids: Vec<String> = entities.iter().map(|e| e.id.clone()).collect();
            for me in roster {
                out.insert(me.clone(), ids.clone());
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlterItem {
    pub alter_id: String,
    pub item_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationalInstance {
    pub template_id: String,
    pub wave_id: String,
    pub relation: String,
    pub one_mode: bool,
    /// Roster order at the time of the last edit.
    pub roster: Vec<String>,
    /// Display label per alter id (respondents or entities).
    pub labels: BTreeMap<String, String>,
    /// Ordered alter items per respondent.
    pub items: BTreeMap<String, Vec<AlterItem>>,
}

impl RelationalInstance {
    pub fn alters_of(&self, respondent: &str) -> Vec<&str> {
        self.items.get(respondent).map(|v| v.iter().map(|a| a.alter_id.as_str()).collect()).unwrap_or_default()
    }

    pub fn item_count(&self) -> usize {
        self.items.values().map(Vec::len).sum()
    }

    /// Alter ids in column order: the roster (one-mode) or the entity list.
    pub fn alter_universe(&self) -> Vec<String> {
        if self.one_mode {
            self.roster.clone()
        } else {
            let mut seen = BTreeSet::new();
            self.items.values().flatten().filter(|a| seen.insert(&a.alter_id)).map(|a| a.alter_id.clone()).collect()
        }
    }
}

/// Expands a template over the wave's roster snapshot. `names` supplies the
/// display label of each roster member.
pub fn instantiate<S: Scalar>(
    template: &RelationalTemplate<S>,
    wave: &Wave,
    names: &BTreeMap<String, String>,
) -> Result<RelationalInstance, RosterError> {
    let lists = alter_lists(template, &wave.roster)?;
    let mut labels = BTreeMap::new();
    match &template.mode {
        RelationMode::OneMode => {
            for id in &wave.roster {
                labels.insert(id.clone(), names.get(id).cloned().unwrap_or_else(|| id.clone()));
            }
        }
        RelationMode::TwoMode { entities } => {
            for e in entities {
                labels.insert(e.id.clone(), e.label.clone());
            }
        }
    }
    let items = lists
        .into_iter()
        .map(|(me, alters)| {
            let items = alters
                .into_iter()
                .map(|a| AlterItem { item_id: item_id(&template.id, &a), alter_id: a })
                .collect();
            (me, items)
        })
        .collect();
    Ok(RelationalInstance {
        template_id: template.id.clone(),
        wave_id: wave.id.clone(),
        relation: template.relation.clone(),
        one_mode: template.is_one_mode(),
        roster: wave.roster.clone(),
        labels,
        items,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum RosterEdit {
    Add { id: String, display_name: String },
    Remove { id: String },
    Rename { id: String, display_name: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EditOutcome<S = Score> {
    pub instance: RelationalInstance,
    pub roster: Vec<String>,
    /// Response sets of respondents still on the roster, with answers about a
    /// removed alter dropped.
    pub responses: Vec<ResponseSet<S>>,
    /// The removed respondent's own response set, if any.
    pub retired: Vec<ResponseSet<S>>,
}

/// Applies a roster edit to an open wave's relational instance.
pub fn apply_roster_edit<S: Scalar>(
    instance: &RelationalInstance,
    wave: &Wave,
    responses: &[ResponseSet<S>],
    edit: &RosterEdit,
) -> Result<EditOutcome<S>, RosterError> {
    if wave.closed {
        return Err(RosterError::WaveClosed(wave.id.clone()));
    }
    if instance.wave_id != wave.id {
        return Err(RosterError::WaveMismatch { instance: instance.wave_id.clone(), wave: wave.id.clone() });
    }
    let mut next = instance.clone();
    let mut kept: Vec<ResponseSet<S>> = responses.to_vec();
    let mut retired = Vec::new();
    match edit {
        RosterEdit::Add { id, display_name } => {
            if next.roster.contains(id) {
                return Err(RosterError::AlreadyPresent(id.clone()));
            }
            if next.one_mode {
                for items in next.items.values_mut() {
                    items.push(AlterItem { alter_id: id.clone(), item_id: item_id(&next.template_id, id) });
                }
                let own = next
                    .roster
                    .iter()
                    .map(|a| AlterItem { alter_id: a.clone(), item_id: item_id(&next.template_id, a) })
                    .collect();
                next.items.insert(id.clone(), own);
                next.labels.insert(id.clone(), display_name.clone());
            } else {
                let entities = next.alter_universe();
                let own = entities
                    .iter()
                    .map(|a| AlterItem { alter_id: a.clone(), item_id: item_id(&next.template_id, a) })
                    .collect();
                next.items.insert(id.clone(), own);
            }
            next.roster.push(id.clone());
        }
        RosterEdit::Remove { id } => {
            let Some(pos) = next.roster.iter().position(|r| r == id) else {
                return Err(RosterError::NotOnRoster(id.clone()));
            };
            next.roster.remove(pos);
            next.items.remove(id);
            if next.one_mode {
                next.labels.remove(id);
                for items in next.items.values_mut() {
                    items.retain(|a| &a.alter_id != id);
                }
                let gone = item_id(&next.template_id, id);
                for r in &mut kept {
                    r.answers.remove(&gone);
                }
            }
            let (own, rest): (Vec<_>, Vec<_>) = kept.into_iter().partition(|r| &r.respondent_id == id);
            kept = rest;
            retired = own;
        }
        RosterEdit::Rename { id, display_name } => {
            if !next.roster.contains(id) {
                return Err(RosterError::NotOnRoster(id.clone()));
            }
            if next.one_mode {
                next.labels.insert(id.clone(), display_name.clone());
            }
        }
    }
    Ok(EditOutcome { roster: next.roster.clone(), instance: next, responses: kept, retired })
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(bound(serialize = "S: Scalar", deserialize = "S: Scalar"))]
pub struct Edge<S = Score> {
    pub source: String,
    pub target: String,
    #[serde(with = "crate::scalar::text")]
    pub weight: S,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "S: Scalar", deserialize = "S: Scalar"))]
pub struct EdgeList<S = Score> {
    pub relation: String,
    pub wave_id: String,
    pub edges: Vec<Edge<S>>,
}

impl<S: Scalar> EdgeList<S> {
    pub fn new(relation: impl Into<String>, wave_id: impl Into<String>) -> Self {
        EdgeList { relation: relation.into(), wave_id: wave_id.into(), edges: Vec::new() }
    }

    pub fn push(&mut self, source: impl Into<String>, target: impl Into<String>, weight: S) {
        self.edges.push(Edge { source: source.into(), target: target.into(), weight });
    }

    /// CSV with header `source,target,weight,relation,wave`.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["source", "target", "weight", "relation", "wave"]).expect("in-memory write");
        for e in &self.edges {
            w.write_record([e.source.as_str(), e.target.as_str(), &e.weight.to_text(), &self.relation, &self.wave_id])
                .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
    }
}

/// One directed edge per answered alter item whose weight is above the
/// no-tie level. Only submitted response sets are read.
pub fn extract_edges<S: Scalar>(
    instance: &RelationalInstance,
    template: &RelationalTemplate<S>,
    responses: &[ResponseSet<S>],
) -> EdgeList<S> {
    let mut list = EdgeList::new(&instance.relation, &instance.wave_id);
    let by_respondent: BTreeMap<&str, &ResponseSet<S>> = responses
        .iter()
        .filter(|r| r.is_submitted() && r.wave_id == instance.wave_id)
        .map(|r| (r.respondent_id.as_str(), r))
        .collect();
    for me in &instance.roster {
        let (Some(resp), Some(items)) = (by_respondent.get(me.as_str()), instance.items.get(me)) else {
            continue;
        };
        for item in items {
            if let Some(w) = resp.answers.get(&item.item_id).and_then(|a| template.tie_weight(a)) {
                if w > S::zero() {
                    list.push(me.clone(), item.alter_id.clone(), w);
                }
            }
        }
    }
    list
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Completion;

    fn wave(n: usize) -> Wave {
        Wave {
            id: "w1".into(),
            questionnaire_id: "q".into(),
            version: 1,
            group_id: "g".into(),
            roster: (1..=n).map(|i| format!("S{i:02}")).collect(),
            opened_at: 0,
            label: "T1".into(),
            closed: false,
        }
    }

    fn names(w: &Wave) -> BTreeMap<String, String> {
        w.roster.iter().map(|id| (id.clone(), format!("Name {id}"))).collect()
    }

    fn friendship() -> RelationalTemplate {
        RelationalTemplate::one_mode("F", "friendship", "How close are you to {alter}?")
    }

    fn venues(n: usize) -> RelationalTemplate {
        RelationalTemplate {
            id: "V".into(),
            prompt: "How often do you drink at {alter}?".into(),
            relation: "venue".into(),
            tie_scale: default_tie_scale(),
            mode: RelationMode::TwoMode {
                entities: (1..=n).map(|i| Entity { id: format!("P{i}"), label: format!("Place {i}") }).collect(),
            },
        }
    }

    #[test]
    fn one_mode_gives_n_minus_one_items() {
        let w = wave(20);
        let inst = instantiate(&friendship(), &w, &names(&w)).unwrap();
        assert_eq!(inst.items.len(), 20);
        assert!(inst.items.values().all(|v| v.len() == 19));
        assert_eq!(inst.items["S01"][0].item_id, "F[S02]");
        assert!(!inst.alters_of("S05").contains(&"S05"));
    }

    #[test]
    fn two_mode_gives_one_item_per_entity() {
        let w = wave(4);
        let inst = instantiate(&venues(5), &w, &names(&w)).unwrap();
        assert!(inst.items.values().all(|v| v.len() == 5));
    }

    #[test]
    fn single_person_roster_has_no_alters() {
        let w = wave(1);
        assert_eq!(instantiate(&friendship(), &w, &names(&w)), Err(RosterError::NoAlters("F".into())));
    }

    fn full_answers(inst: &RelationalInstance, t: &RelationalTemplate, label: &str) -> Vec<ResponseSet> {
        inst.roster
            .iter()
            .map(|me| {
                let mut r = ResponseSet::new(&inst.wave_id, me, Completion::Submitted);
                for it in &inst.items[me] {
                    r.answers.insert(it.item_id.clone(), Answer::Choice(label.into()));
                }
                let _ = t;
                r
            })
            .collect()
    }

    #[test]
    fn remove_keeps_other_answers() {
        let w = wave(20);
        let t = friendship();
        let inst = instantiate(&t, &w, &names(&w)).unwrap();
        let responses = full_answers(&inst, &t, "Friend");
        let out = apply_roster_edit(&inst, &w, &responses, &RosterEdit::Remove { id: "S07".into() }).unwrap();
        assert_eq!(out.roster.len(), 19);
        assert!(out.instance.items.values().all(|v| v.len() == 18));
        assert_eq!(out.retired.len(), 1);
        for r in &out.responses {
            let before: BTreeSet<_> = responses.iter().find(|x| x.respondent_id == r.respondent_id).unwrap().answers.keys().cloned().collect();
            let after: BTreeSet<_> = r.answers.keys().cloned().collect();
            let dropped: Vec<_> = before.difference(&after).cloned().collect();
            assert_eq!(dropped, vec!["F[S07]".to_string()]);
            assert_eq!(after.len(), 18);
        }
    }

    #[test]
    fn rename_touches_no_answers() {
        let w = wave(5);
        let t = friendship();
        let inst = instantiate(&t, &w, &names(&w)).unwrap();
        let responses = full_answers(&inst, &t, "Partner");
        let edit = RosterEdit::Rename { id: "S02".into(), display_name: "Renamed".into() };
        let out = apply_roster_edit(&inst, &w, &responses, &edit).unwrap();
        assert_eq!(out.responses, responses);
        assert_eq!(out.instance.items, inst.items);
        assert_eq!(out.instance.labels["S02"], "Renamed");
    }

    #[test]
    fn add_then_remove_is_identity() {
        let w = wave(6);
        let inst = instantiate(&friendship(), &w, &names(&w)).unwrap();
        let add = RosterEdit::Add { id: "S99".into(), display_name: "New".into() };
        let added = apply_roster_edit::<Score>(&inst, &w, &[], &add).unwrap();
        assert!(added.instance.items.values().all(|v| v.len() == 6));
        let mut w2 = w.clone();
        w2.roster = added.roster.clone();
        let removed = apply_roster_edit::<Score>(&added.instance, &w2, &[], &RosterEdit::Remove { id: "S99".into() }).unwrap();
        assert_eq!(removed.instance, inst);
    }

    #[test]
    fn closed_wave_rejects_edits() {
        let mut w = wave(3);
        let inst = instantiate(&friendship(), &w, &names(&w)).unwrap();
        w.closed = true;
        let err = apply_roster_edit::<Score>(&inst, &w, &[], &RosterEdit::Remove { id: "S01".into() }).unwrap_err();
        assert_eq!(err, RosterError::WaveClosed("w1".into()));
    }

    #[test]
    fn unreciprocated_nomination_is_one_edge() {
        let w = wave(2);
        let t = RelationalTemplate {
            tie_scale: ["none", "I know them", "friend", "best friend"]
                .iter()
                .enumerate()
                .map(|(i, l)| AnswerOption::new(*l, Score::from_count(i)))
                .collect(),
            ..friendship()
        };
        let inst = instantiate(&t, &w, &names(&w)).unwrap();
        let a = ResponseSet::new("w1", "S01", Completion::Submitted).answer("F[S02]", Answer::Choice("best friend".into()));
        let b = ResponseSet::new("w1", "S02", Completion::Submitted);
        let edges = extract_edges(&inst, &t, &[a, b]);
        assert_eq!(edges.edges, vec![Edge { source: "S01".into(), target: "S02".into(), weight: Score::from_count(3) }]);
    }

    #[test]
    fn no_tie_answers_give_no_edges() {
        let w = wave(4);
        let t = friendship();
        let inst = instantiate(&t, &w, &names(&w)).unwrap();
        assert!(extract_edges(&inst, &t, &full_answers(&inst, &t, "No tie")).edges.is_empty());
        assert!(extract_edges::<Score>(&inst, &t, &[]).edges.is_empty());
    }

    #[test]
    fn mutual_triad_gives_six_edges() {
        let w = wave(3);
        let t = friendship();
        let inst = instantiate(&t, &w, &names(&w)).unwrap();
        let edges = extract_edges(&inst, &t, &full_answers(&inst, &t, "Acquaintance"));
        // oracle: every ordered pair of distinct members
        let expected: BTreeSet<(String, String)> = w
            .roster
            .iter()
            .flat_map(|a| w.roster.iter().filter(move |b| *b != a).map(move |b| (a.clone(), b.clone())))
            .collect();
        let got: BTreeSet<(String, String)> = edges.edges.iter().map(|e| (e.source.clone(), e.target.clone())).collect();
        assert_eq!(got, expected);
        assert_eq!(edges.edges.len(), 6);
    }

    #[test]
    fn partial_responses_are_ignored() {
        let w = wave(2);
        let t = friendship();
        let inst = instantiate(&t, &w, &names(&w)).unwrap();
        let a = ResponseSet::new("w1", "S01", Completion::Partial).answer("F[S02]", Answer::Choice("Friend".into()));
        assert!(extract_edges(&inst, &t, &[a]).edges.is_empty());
    }

    #[test]
    fn template_checks() {
        let mut t = friendship();
        assert!(t.findings().is_empty());
        t.tie_scale.swap(1, 2);
        t.prompt = "no placeholder".into();
        let rules: Vec<Rule> = t.findings().into_iter().map(|f| f.rule).collect();
        assert!(rules.contains(&Rule::TieScale));
        assert!(rules.contains(&Rule::TemplatePrompt));
        assert!(!venues(0).findings().is_empty());
    }

    #[test]
    fn item_id_convention() {
        assert_eq!(item_id("F12", "S03"), "F12[S03]");
        assert_eq!(parse_item_id("F12[S03]"), Some(("F12", "S03")));
        assert_eq!(parse_item_id("F12"), None);
        assert_eq!(parse_item_id("[S03]"), None);
    }

    #[test]
    fn edge_csv_header() {
        let mut l = EdgeList::<Score>::new("friendship", "w1");
        l.push("A", "B", Score::from_count(2));
        assert_eq!(l.to_csv(), "source,target,weight,relation,wave\nA,B,2,friendship,w1\n");
    }
}

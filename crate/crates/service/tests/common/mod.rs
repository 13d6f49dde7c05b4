//! Study fixtures shared by the integration tests: accounts, a cohort-sized
//! questionnaire and synthetic classroom spreadsheets.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use cohortlens_core::instruments::{AUDIT_ID, ESTUDES_ID, FAS_ID, GSE_ID, KIDSCREEN_ID};
use cohortlens_core::model::{ElementRef, PublishedQuestionnaire, Question, QuestionGroup, QuestionKind, QuestionnaireDef};
use cohortlens_core::roster::item_id;
use cohortlens_core::{AnswerOption, RelationalTemplate, Score, ScoringFormula};
use cohortlens_service::auth::Role;
use cohortlens_service::csv_import::MappingSpec;
use cohortlens_service::service::{ImportRequest, NewUser};
use cohortlens_service::{Service, Store, StudyKey, UserAccount};
use rand::Rng;

pub const PASSWORD: &str = "correct horse battery";
pub const CUSTOM_ITEMS: usize = 170;
pub const RELATION: &str = "friendship";
pub const TEMPLATE: &str = "F";
pub const FREE_TEXT: &str = "HOME";
pub const FLAGGED: [&str; 3] = ["name", "postcode", FREE_TEXT];

pub fn study_key() -> StudyKey {
    StudyKey::new(vec![0x5a; 32])
}

pub struct Fixture {
    pub svc: Service,
    pub admin: UserAccount,
    pub alice: UserAccount,
    pub bob: UserAccount,
}

/// Super-admin `root` plus interviewers `alice` and `bob`.
pub fn fixture_on(store: Store, key: StudyKey) -> Fixture {
    let svc = Service::new(store, key);
    svc.bootstrap_admin("root", PASSWORD).unwrap();
    let admin = svc.account_by_login("root").unwrap();
    for login in ["alice", "bob"] {
        if svc.account_by_login(login).is_none() {
            svc.create_user(&admin, NewUser { login: login.into(), password: PASSWORD.into(), role: Role::Interviewer, respondent_id: None })
                .unwrap();
        }
    }
    let alice = svc.account_by_login("alice").unwrap();
    let bob = svc.account_by_login("bob").unwrap();
    Fixture { svc, admin, alice, bob }
}

pub fn fixture() -> Fixture {
    fixture_on(Store::in_memory(), study_key())
}

pub fn custom_id(i: usize) -> String {
    format!("C{i:03}")
}

fn levels(lo: i64, hi: i64) -> Vec<AnswerOption> {
    (lo..=hi).map(|v| AnswerOption::new(v.to_string(), Score::from_integer(v.into()))).collect()
}

/// The five validated instruments, `CUSTOM_ITEMS` custom questions (one of them
/// free text), a mean-scored custom group and the friendship relation.
pub fn cohort_definition(svc: &Service, who: &UserAccount, id: &str) -> QuestionnaireDef {
    let mut elements: Vec<ElementRef> =
        [AUDIT_ID, FAS_ID, KIDSCREEN_ID, GSE_ID, ESTUDES_ID].iter().map(|i| ElementRef::Instrument(i.to_string())).collect();
    let catalog = svc.catalog(who).unwrap();
    let have: BTreeSet<String> = catalog.questions.iter().map(|q| q.id.clone()).collect();
    for i in 1..CUSTOM_ITEMS {
        let qid = custom_id(i);
        if !have.contains(&qid) {
            svc.create_question(who, Question::choice(qid.clone(), format!("Custom item {i}"), levels(1, 5))).unwrap();
        }
        if i > 10 {
            elements.push(ElementRef::Question(qid));
        }
    }
    if !have.contains(FREE_TEXT) {
        svc.create_question(who, Question::free_text(FREE_TEXT, "Where do you live?")).unwrap();
    }
    elements.push(ElementRef::Question(FREE_TEXT.into()));
    if !catalog.groups.iter().any(|g| g.id == "WELLBEING") {
        let g = QuestionGroup {
            id: "WELLBEING".into(),
            members: (1..=10).map(custom_id).collect(),
            formula: ScoringFormula::parse("mean(C001..C010)").unwrap(),
            bands: None,
        };
        svc.create_group(who, g).unwrap();
    }
    elements.push(ElementRef::Group("WELLBEING".into()));
    if !catalog.templates.iter().any(|t| t.id == TEMPLATE) {
        svc.create_template(who, RelationalTemplate::one_mode(TEMPLATE, RELATION, "How close are you to {alter}?")).unwrap();
    }
    elements.push(ElementRef::Relational(TEMPLATE.into()));
    QuestionnaireDef { id: id.into(), title: "Cohort survey".into(), description: String::new(), elements, version: 0 }
}

pub fn cohort_questionnaire(svc: &Service, who: &UserAccount, id: &str) -> PublishedQuestionnaire {
    let def = cohort_definition(svc, who, id);
    svc.create_questionnaire(who, def).unwrap().published.unwrap()
}

pub fn student_id(class: usize, k: usize) -> String {
    format!("S{class:02}{k:02}")
}

pub fn student_name(id: &str) -> String {
    format!("Nombre-{id}-x")
}

pub fn postcode(id: &str) -> String {
    format!("PC{id}Z")
}

pub fn home_town(id: &str) -> String {
    format!("Villa-{id}-q")
}

/// Every raw value the flagged fields cover, plus the raw respondent ids.
pub fn raw_values(classes: &[(usize, usize)]) -> Vec<String> {
    let mut out = Vec::new();
    for &(c, size) in classes {
        for k in 1..=size {
            let id = student_id(c, k);
            out.extend([student_name(&id), postcode(&id), home_town(&id), id]);
        }
    }
    out
}

/// A legacy spreadsheet for one classroom: identity columns, every item of
/// `q` and one `F[alter]` column per classmate.
pub fn classroom_csv<R: Rng>(rng: &mut R, class: usize, size: usize, q: &PublishedQuestionnaire) -> String {
    let ids: Vec<String> = (1..=size).map(|k| student_id(class, k)).collect();
    let items = q.items();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = ["respondent", "name", "sex", "postcode"].iter().map(|s| s.to_string()).collect();
    header.extend(items.iter().map(|i| i.instance_id.clone()));
    header.extend(ids.iter().map(|a| item_id(TEMPLATE, a)));
    w.write_record(&header).unwrap();
    for id in &ids {
        let sex = if rng.gen_bool(0.5) { "F" } else { "M" };
        let mut row = vec![id.clone(), student_name(id), sex.to_string(), postcode(id)];
        for i in &items {
            let cell = match i.question.kind {
                QuestionKind::FreeText => home_town(id),
                _ => i.question.options[rng.gen_range(0..i.question.options.len())].label.clone(),
            };
            row.push(cell);
        }
        for alter in &ids {
            let cell = if alter == id || rng.gen_bool(0.6) { String::new() } else { rng.gen_range(1..=3).to_string() };
            row.push(cell);
        }
        w.write_record(&row).unwrap();
    }
    String::from_utf8(w.into_inner().unwrap()).unwrap()
}

pub fn mapping() -> MappingSpec {
    let attributes: BTreeMap<String, String> = [("sex", "sex"), ("postcode", "postcode")].iter().map(|(a, b)| (a.to_string(), b.to_string())).collect();
    MappingSpec { attributes, ..MappingSpec::default() }
}

pub fn import_request(questionnaire: &str, class: usize, csv: String) -> ImportRequest {
    ImportRequest {
        questionnaire_id: questionnaire.into(),
        version: None,
        group_name: format!("Class {class}"),
        wave_label: "T1".into(),
        opened_at: Some(1_700_000_000 + class as i64),
        mapping: mapping(),
        csv,
    }
}

/// Classroom sizes of the synthetic cohort: 7 × 24 + 2 × 23 = 214.
pub fn cohort_classes() -> Vec<(usize, usize)> {
    (1..=9).map(|c| (c, if c <= 7 { 24 } else { 23 })).collect()
}

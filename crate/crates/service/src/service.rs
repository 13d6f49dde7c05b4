//! Authorized operations over the study store.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use cohortlens_core::instruments::{Instrument, AUDIT_ID};
use cohortlens_core::model::{
    check_response, open_wave, Answer, Completion, ElementRef, PublishError, PublishedQuestionnaire, Question,
    QuestionGroup, QuestionKind, QuestionnaireDef, Respondent, RespondentGroup, ResponseSet, WaveError, WaveSpec,
};
use cohortlens_core::roster::{apply_roster_edit, extract_edges, EdgeList, RelationalTemplate, RosterEdit};
use cohortlens_core::scalar::display_decimal;
use cohortlens_core::sna::{wave_churn, TieChurn};
use cohortlens_core::{score_response, AnswerOption, Score, ScoreReport, Templates};
use num_bigint::BigInt;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::auth::{
    authorize, hash_password, verify_password, Action, Decision, Denied, Resource, Role, UserAccount, RULE_OWN_RESOURCES,
};
use crate::csv_import::{parse_csv, ImportSummary, MappingSpec, RowError};
use crate::error::{Result, ServiceError};
use crate::pseudonym::{StudyKey, RESPONDENT_PREFIX, VALUE_PREFIX};
use crate::store::{AuditEntry, Owned, State, Store, SubmissionEvent, WaveRecord};

pub fn now() -> i64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs() as i64).unwrap_or(0)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NewUser {
    pub login: String,
    pub password: String,
    pub role: Role,
    #[serde(default)]
    pub respondent_id: Option<String>,
}

/// Account as shown to clients, without the credential hash.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccountView {
    pub id: String,
    pub login: String,
    pub role: Role,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub respondent_id: Option<String>,
}

impl From<&UserAccount> for AccountView {
    fn from(u: &UserAccount) -> Self {
        AccountView { id: u.id.clone(), login: u.login.clone(), role: u.role, respondent_id: u.respondent_id.clone() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Session {
    pub token: String,
    pub account: AccountView,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuestionnaireView {
    pub owner: String,
    pub draft: QuestionnaireDef,
    pub latest_version: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub published: Option<PublishedQuestionnaire>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct OpenWaveRequest {
    pub group_id: String,
    #[serde(default)]
    pub label: String,
    #[serde(default)]
    pub version: Option<u32>,
    #[serde(default)]
    pub opened_at: Option<i64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubmitRequest {
    /// Defaults to the caller's linked respondent.
    #[serde(default)]
    pub respondent_id: Option<String>,
    pub answers: BTreeMap<String, Answer>,
    #[serde(default = "submitted")]
    pub status: Completion,
}

fn submitted() -> Completion {
    Completion::Submitted
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubmitOutcome {
    pub response: ResponseSet,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scores: Option<ScoreReport>,
    pub replaced: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ImportRequest {
    pub questionnaire_id: String,
    #[serde(default)]
    pub version: Option<u32>,
    #[serde(default)]
    pub group_name: String,
    #[serde(default)]
    pub wave_label: String,
    #[serde(default)]
    pub opened_at: Option<i64>,
    #[serde(default)]
    pub mapping: MappingSpec,
    pub csv: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FormItem {
    pub id: String,
    pub prompt: String,
    pub kind: QuestionKind,
    pub options: Vec<String>,
    pub required: bool,
}

/// What a respondent sees when filling a wave.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Form {
    pub wave_id: String,
    pub respondent_id: String,
    pub title: String,
    pub items: Vec<FormItem>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WaveTab {
    pub wave_id: String,
    pub label: String,
    pub opened_at: i64,
    pub closed: bool,
    pub roster_size: usize,
    pub submitted: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_audit: Option<String>,
    /// Tie persistence against the previous tab, per relation.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub churn: Vec<TieChurn>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CatalogView {
    pub questions: Vec<Question>,
    pub groups: Vec<QuestionGroup>,
    pub templates: Vec<RelationalTemplate>,
}

pub struct Service {
    store: Store,
    key: StudyKey,
    templates: Templates,
    sessions: Mutex<HashMap<String, String>>,
}

fn owner_key(kind: &str, id: &str) -> String {
    format!("{kind}:{id}")
}

fn mean(values: &[Score]) -> Option<Score> {
    if values.is_empty() {
        return None;
    }
    let total: Score = values.iter().cloned().fold(Score::from_integer(BigInt::from(0)), |a, b| a + b);
    Some(total / Score::from_integer(BigInt::from(values.len())))
}

fn audit_total(r: &ScoreReport) -> Option<&Score> {
    r.score(&format!("{AUDIT_ID}.total"))
}

fn publish_error(e: PublishError) -> ServiceError {
    match e {
        PublishError::Invalid(f) => ServiceError::Findings(f),
    }
}

fn wave_error(e: WaveError) -> ServiceError {
    match e {
        WaveError::Unpublished { .. } => ServiceError::NotFound(e.to_string()),
        other => ServiceError::Invalid(other.to_string()),
    }
}

impl Service {
    pub fn new(store: Store, key: StudyKey) -> Self {
        Service { store, key, templates: Templates::english(), sessions: Mutex::new(HashMap::new()) }
    }

    /// Replaces the report sentence templates.
    pub fn with_templates(mut self, templates: Templates) -> Self {
        self.templates = templates;
        self
    }

    pub fn in_memory(key: StudyKey) -> Self {
        Service::new(Store::in_memory(), key)
    }

    pub fn snapshot(&self) -> Arc<State> {
        self.store.snapshot()
    }

    pub fn key(&self) -> &StudyKey {
        &self.key
    }

    pub fn templates(&self) -> &Templates {
        &self.templates
    }

    fn check(&self, actor: &UserAccount, action: Action, resource: &Resource) -> Result<()> {
        match authorize(actor, action, resource)? {
            Decision::Allow => Ok(()),
            Decision::AllowAudited => {
                let entry = AuditEntry { at: now(), actor: actor.id.clone(), action: action.name().into(), target: String::new() };
                self.store.transact(|s| {
                    s.audit_log.push(entry);
                    Ok::<_, ServiceError>(())
                })
            }
        }
    }

    fn audited(&self, actor: &UserAccount, action: Action, resource: &Resource, target: &str) -> Result<()> {
        if authorize(actor, action, resource)? == Decision::AllowAudited {
            let entry = AuditEntry { at: now(), actor: actor.id.clone(), action: action.name().into(), target: target.into() };
            self.store.transact(|s| {
                s.audit_log.push(entry);
                Ok::<_, ServiceError>(())
            })?;
        }
        Ok(())
    }

    // ---- accounts and sessions

    /// Creates the first super-admin; a no-op once any account exists.
    pub fn bootstrap_admin(&self, login: &str, password: &str) -> Result<Option<AccountView>> {
        let hash = hash_password(password);
        self.store.transact(|s| {
            if !s.users.is_empty() {
                return Ok(None);
            }
            let id = s.fresh_id("U");
            let u = UserAccount { id: id.clone(), login: login.into(), credential_hash: hash, role: Role::SuperAdmin, respondent_id: None };
            let view = AccountView::from(&u);
            s.users.insert(id, u);
            Ok(Some(view))
        })
    }

    pub fn create_user(&self, actor: &UserAccount, new: NewUser) -> Result<AccountView> {
        self.check(actor, Action::ManageAccounts, &Resource::none())?;
        if new.login.trim().is_empty() || new.password.is_empty() {
            return Err(ServiceError::Invalid("login and password are required".into()));
        }
        let hash = hash_password(&new.password);
        self.store.transact(|s| {
            if s.user_by_login(&new.login).is_some() {
                return Err(ServiceError::Conflict(format!("login `{}`", new.login)));
            }
            let respondent_id = match (new.role, new.respondent_id) {
                (Role::Respondent, Some(r)) => {
                    if !s.respondents.contains_key(&r) {
                        return Err(ServiceError::NotFound(format!("respondent `{r}`")));
                    }
                    if s.users.values().any(|u| u.respondent_id.as_deref() == Some(&r)) {
                        return Err(ServiceError::Conflict(format!("account for respondent `{r}`")));
                    }
                    Some(r)
                }
                (Role::Respondent, None) => return Err(ServiceError::Invalid("respondent accounts need a respondent_id".into())),
                (_, Some(_)) => return Err(ServiceError::Invalid("only respondent accounts link a respondent".into())),
                (_, None) => None,
            };
            let id = s.fresh_id("U");
            let u = UserAccount { id: id.clone(), login: new.login, credential_hash: hash, role: new.role, respondent_id };
            let view = AccountView::from(&u);
            s.users.insert(id, u);
            Ok(view)
        })
    }

    pub fn login(&self, login: &str, password: &str) -> Result<Session> {
        let snap = self.snapshot();
        let user = snap.user_by_login(login).ok_or(ServiceError::BadCredentials)?;
        if !verify_password(password, &user.credential_hash) {
            return Err(ServiceError::BadCredentials);
        }
        let mut bytes = [0u8; 24];
        rand::rngs::OsRng.fill_bytes(&mut bytes);
        let token = hex::encode(bytes);
        self.sessions.lock().expect("session lock").insert(token.clone(), user.id.clone());
        Ok(Session { token, account: user.into() })
    }

    pub fn logout(&self, token: &str) {
        self.sessions.lock().expect("session lock").remove(token);
    }

    pub fn account(&self, token: &str) -> Result<UserAccount> {
        let id = self.sessions.lock().expect("session lock").get(token).cloned().ok_or(ServiceError::Unauthenticated)?;
        self.snapshot().users.get(&id).cloned().ok_or(ServiceError::Unauthenticated)
    }

    pub fn account_by_login(&self, login: &str) -> Option<UserAccount> {
        self.snapshot().user_by_login(login).cloned()
    }

    // ---- study settings and personal data

    /// Replaces the flagged-field set and issues tokens for every value now
    /// covered by it.
    pub fn set_flagged_fields(&self, actor: &UserAccount, fields: BTreeSet<String>) -> Result<()> {
        self.check(actor, Action::ManageAccounts, &Resource::none())?;
        self.store.transact(|s| {
            s.settings.flagged_fields = fields;
            let key = &self.key;
            let respondents: Vec<Respondent> = s.respondents.values().map(|r| r.value.clone()).collect();
            for r in &respondents {
                issue_respondent_tokens(s, key, r);
            }
            let waves: Vec<String> = s.waves.keys().cloned().collect();
            for w in waves {
                let responses: Vec<ResponseSet> = s.waves[&w].responses.values().cloned().collect();
                for r in &responses {
                    issue_answer_tokens(s, key, &w, r);
                }
            }
            Ok(())
        })
    }

    pub fn set_allow_resubmission(&self, actor: &UserAccount, allow: bool) -> Result<()> {
        self.check(actor, Action::ManageAccounts, &Resource::none())?;
        self.store.transact(|s| {
            s.settings.allow_resubmission = allow;
            Ok(())
        })
    }

    /// Raw respondent record; audited.
    pub fn personal_data(&self, actor: &UserAccount, respondent_id: &str) -> Result<Respondent> {
        let snap = self.snapshot();
        let r = snap.respondents.get(respondent_id).ok_or_else(|| ServiceError::NotFound(format!("respondent `{respondent_id}`")))?;
        self.audited(actor, Action::ReadPersonalData, &Resource::owned_by(&r.owner), respondent_id)?;
        Ok(r.value.clone())
    }

    /// The token → raw value map; audited.
    pub fn pseudonym_map(&self, actor: &UserAccount) -> Result<BTreeMap<String, String>> {
        self.audited(actor, Action::ReadPersonalData, &Resource::none(), "pseudonym-map")?;
        Ok(self.snapshot().pseudonyms.entries().map(|(t, r)| (t.to_string(), r.to_string())).collect())
    }

    pub fn audit_log(&self, actor: &UserAccount) -> Result<Vec<AuditEntry>> {
        self.check(actor, Action::ReadAuditLog, &Resource::none())?;
        Ok(self.snapshot().audit_log.clone())
    }

    // ---- instruments and catalog

    pub fn list_instruments(&self, actor: &UserAccount) -> Result<Vec<Instrument>> {
        self.check(actor, Action::ReadInstruments, &Resource::none())?;
        Ok(self.snapshot().library.list().cloned().collect())
    }

    pub fn register_instrument(&self, actor: &UserAccount, inst: Instrument) -> Result<String> {
        self.check(actor, Action::RegisterInstrument, &Resource::none())?;
        self.store.transact(|s| {
            s.library.register(inst).map_err(|e| match e {
                cohortlens_core::instruments::InstrumentError::DuplicateInstrument(id) => {
                    ServiceError::Conflict(format!("instrument `{id}`"))
                }
                cohortlens_core::instruments::InstrumentError::Invalid(f) => ServiceError::Findings(f),
                other => ServiceError::Invalid(other.to_string()),
            })
        })
    }

    fn add_catalog_item(&self, actor: &UserAccount, kind: &str, id: &str, insert: impl FnOnce(&mut State) -> bool) -> Result<()> {
        self.check(actor, Action::CreateCatalogItem, &Resource::none())?;
        if id.trim().is_empty() {
            return Err(ServiceError::Invalid(format!("{kind} id is empty")));
        }
        self.store.transact(|s| {
            if !insert(s) {
                return Err(ServiceError::Conflict(format!("{kind} `{id}`")));
            }
            s.catalog_owners.insert(owner_key(kind, id), actor.id.clone());
            Ok(())
        })
    }

    pub fn create_question(&self, actor: &UserAccount, q: Question) -> Result<()> {
        let findings = q.violations();
        if !findings.is_empty() {
            let msg = findings.iter().map(|(_, m)| m.as_str()).collect::<Vec<_>>().join("; ");
            return Err(ServiceError::Invalid(msg));
        }
        let id = q.id.clone();
        self.add_catalog_item(actor, "question", &id, |s| {
            if s.catalog.questions.contains_key(&q.id) {
                return false;
            }
            s.catalog.add_question(q);
            true
        })
    }

    pub fn create_group(&self, actor: &UserAccount, g: QuestionGroup) -> Result<()> {
        let id = g.id.clone();
        self.add_catalog_item(actor, "group", &id, |s| {
            if s.catalog.groups.contains_key(&g.id) {
                return false;
            }
            s.catalog.add_group(g);
            true
        })
    }

    pub fn create_template(&self, actor: &UserAccount, t: RelationalTemplate) -> Result<()> {
        let findings = t.findings();
        if !findings.is_empty() {
            return Err(ServiceError::Findings(findings));
        }
        let id = t.id.clone();
        self.add_catalog_item(actor, "template", &id, |s| {
            if s.catalog.templates.contains_key(&t.id) {
                return false;
            }
            s.catalog.add_template(t);
            true
        })
    }

    /// Catalog elements the caller may read.
    pub fn catalog(&self, actor: &UserAccount) -> Result<CatalogView> {
        let snap = self.snapshot();
        let visible = |kind: &str, id: &str| {
            let owner = snap.catalog_owners.get(&owner_key(kind, id)).cloned();
            authorize(actor, Action::ReadCatalogItem, &Resource { owner, respondent: None }).is_ok()
        };
        if actor.role == Role::Respondent {
            self.check(actor, Action::ReadCatalogItem, &Resource::none())?;
        }
        Ok(CatalogView {
            questions: snap.catalog.questions.values().filter(|q| visible("question", &q.id)).cloned().collect(),
            groups: snap.catalog.groups.values().filter(|g| visible("group", &g.id)).cloned().collect(),
            templates: snap.catalog.templates.values().filter(|t| visible("template", &t.id)).cloned().collect(),
        })
    }

    // ---- questionnaires

    fn owns_elements(&self, s: &State, actor: &UserAccount, def: &QuestionnaireDef) -> Result<()> {
        for el in &def.elements {
            let kind = match el {
                ElementRef::Instrument(_) => continue,
                ElementRef::Question(_) => "question",
                ElementRef::Group(_) => "group",
                ElementRef::Relational(_) => "template",
            };
            if let Some(owner) = s.catalog_owners.get(&owner_key(kind, el.id())) {
                authorize(actor, Action::ReadCatalogItem, &Resource::owned_by(owner))?;
            }
        }
        Ok(())
    }

    /// Stores a new questionnaire and publishes it as version 1.
    pub fn create_questionnaire(&self, actor: &UserAccount, def: QuestionnaireDef) -> Result<QuestionnaireView> {
        self.check(actor, Action::CreateQuestionnaire, &Resource::none())?;
        if def.id.trim().is_empty() {
            return Err(ServiceError::Invalid("questionnaire id is empty".into()));
        }
        self.store.transact(|s| {
            if s.questionnaires.contains_key(&def.id) {
                return Err(ServiceError::Conflict(format!("questionnaire `{}`", def.id)));
            }
            self.owns_elements(s, actor, &def)?;
            let catalog = s.full_catalog();
            let version = s.registry.publish(&def, &catalog).map_err(publish_error)?;
            let mut draft = def;
            draft.version = version;
            s.questionnaires.insert(draft.id.clone(), Owned { owner: actor.id.clone(), value: draft.clone() });
            Ok(questionnaire_view(s, &draft.id))
        })
    }

    /// Replaces the definition and publishes it as the next version.
    pub fn update_questionnaire(&self, actor: &UserAccount, id: &str, mut def: QuestionnaireDef) -> Result<QuestionnaireView> {
        self.store.transact(|s| {
            let rec = s.questionnaires.get(id).ok_or_else(|| ServiceError::NotFound(format!("questionnaire `{id}`")))?;
            authorize(actor, Action::UpdateQuestionnaire, &Resource::owned_by(&rec.owner))?;
            def.id = id.to_string();
            self.owns_elements(s, actor, &def)?;
            let catalog = s.full_catalog();
            let version = s.registry.publish(&def, &catalog).map_err(publish_error)?;
            def.version = version;
            s.questionnaires.get_mut(id).expect("checked above").value = def;
            Ok(questionnaire_view(s, id))
        })
    }

    pub fn get_questionnaire(&self, actor: &UserAccount, id: &str) -> Result<QuestionnaireView> {
        let snap = self.snapshot();
        let rec = snap.questionnaires.get(id).ok_or_else(|| ServiceError::NotFound(format!("questionnaire `{id}`")))?;
        self.check(actor, Action::ReadQuestionnaire, &Resource::owned_by(&rec.owner))?;
        Ok(questionnaire_view(&snap, id))
    }

    /// Questionnaires the caller may read.
    pub fn list_questionnaires(&self, actor: &UserAccount) -> Result<Vec<QuestionnaireView>> {
        if actor.role == Role::Respondent {
            self.check(actor, Action::ReadQuestionnaire, &Resource::none())?;
        }
        let snap = self.snapshot();
        Ok(snap
            .questionnaires
            .iter()
            .filter(|(_, rec)| authorize(actor, Action::ReadQuestionnaire, &Resource::owned_by(&rec.owner)).is_ok())
            .map(|(id, _)| {
                let mut v = questionnaire_view(&snap, id);
                v.published = None;
                v
            })
            .collect())
    }

    // ---- respondents and groups

    pub fn create_respondent(&self, actor: &UserAccount, r: Respondent) -> Result<()> {
        self.check(actor, Action::ManageRespondents, &Resource::none())?;
        if r.id.trim().is_empty() {
            return Err(ServiceError::Invalid("respondent id is empty".into()));
        }
        self.store.transact(|s| {
            if s.respondents.contains_key(&r.id) {
                return Err(ServiceError::Conflict(format!("respondent `{}`", r.id)));
            }
            issue_respondent_tokens(s, &self.key, &r);
            s.respondents.insert(r.id.clone(), Owned { owner: actor.id.clone(), value: r });
            Ok(())
        })
    }

    pub fn create_respondent_group(&self, actor: &UserAccount, mut g: RespondentGroup) -> Result<RespondentGroup> {
        self.check(actor, Action::ManageRespondents, &Resource::none())?;
        self.store.transact(|s| {
            if g.id.trim().is_empty() {
                g.id = s.fresh_id("G");
            }
            if s.groups.contains_key(&g.id) {
                return Err(ServiceError::Conflict(format!("group `{}`", g.id)));
            }
            let mut seen = BTreeSet::new();
            for m in &g.members {
                let rec = s.respondents.get(m).ok_or_else(|| ServiceError::NotFound(format!("respondent `{m}`")))?;
                if actor.role != Role::SuperAdmin && rec.owner != actor.id {
                    return Err(Denied { role: actor.role, action: Action::ManageRespondents, rule: RULE_OWN_RESOURCES }.into());
                }
                if !seen.insert(m) {
                    return Err(ServiceError::Invalid(format!("respondent `{m}` listed twice")));
                }
            }
            s.groups.insert(g.id.clone(), Owned { owner: actor.id.clone(), value: g.clone() });
            Ok(g)
        })
    }

    // ---- waves

    pub fn open_wave(&self, actor: &UserAccount, questionnaire_id: &str, req: OpenWaveRequest) -> Result<WaveRecord> {
        self.store.transact(|s| open_wave_in(s, actor, questionnaire_id, req))
    }

    pub fn close_wave(&self, actor: &UserAccount, wave_id: &str) -> Result<()> {
        self.store.transact(|s| {
            let rec = s.waves.get_mut(wave_id).ok_or_else(|| ServiceError::NotFound(format!("wave `{wave_id}`")))?;
            authorize(actor, Action::CloseWave, &Resource::owned_by(&rec.owner))?;
            rec.wave.closed = true;
            Ok(())
        })
    }

    pub fn wave(&self, actor: &UserAccount, wave_id: &str) -> Result<WaveRecord> {
        let snap = self.snapshot();
        let rec = wave_of(&snap, wave_id)?;
        self.check(actor, Action::ReadWave, &Resource::owned_by(&rec.owner))?;
        Ok(rec.clone())
    }

    /// Applies a roster edit to every relational instance of an open wave.
    pub fn edit_roster(&self, actor: &UserAccount, wave_id: &str, edit: RosterEdit) -> Result<WaveRecord> {
        self.store.transact(|s| {
            let owner = wave_of(s, wave_id)?.owner.clone();
            authorize(actor, Action::EditRoster, &Resource::owned_by(&owner))?;
            if let RosterEdit::Add { id, display_name } = &edit {
                if !s.respondents.contains_key(id) {
                    let r = Respondent::new(id.clone(), display_name.clone());
                    issue_respondent_tokens(s, &self.key, &r);
                    s.respondents.insert(id.clone(), Owned { owner: actor.id.clone(), value: r });
                }
            }
            if let RosterEdit::Rename { id, display_name } = &edit {
                if let Some(r) = s.respondents.get_mut(id) {
                    r.value.display_name = display_name.clone();
                }
                if let Some(r) = s.respondents.get(id).map(|r| r.value.clone()) {
                    issue_respondent_tokens(s, &self.key, &r);
                }
            }
            let rec = s.waves.get_mut(wave_id).expect("checked above");
            if rec.wave.closed {
                return Err(ServiceError::WaveClosed(wave_id.to_string()));
            }
            let mut responses: Vec<ResponseSet> = rec.responses.values().cloned().collect();
            let mut instances = Vec::with_capacity(rec.relational.len());
            let mut retired = Vec::new();
            for inst in &rec.relational {
                let out = apply_roster_edit(inst, &rec.wave, &responses, &edit).map_err(|e| ServiceError::Invalid(e.to_string()))?;
                responses = out.responses;
                retired.extend(out.retired);
                instances.push(out.instance);
            }
            match &edit {
                RosterEdit::Add { id, .. } => {
                    if rec.wave.roster.contains(id) {
                        return Err(ServiceError::Conflict(format!("roster member `{id}`")));
                    }
                    rec.wave.roster.push(id.clone());
                }
                RosterEdit::Remove { id } => {
                    let Some(pos) = rec.wave.roster.iter().position(|r| r == id) else {
                        return Err(ServiceError::NotInRoster(id.clone()));
                    };
                    rec.wave.roster.remove(pos);
                    if instances.is_empty() {
                        responses.retain(|r| {
                            if &r.respondent_id == id {
                                retired.push(r.clone());
                                false
                            } else {
                                true
                            }
                        });
                    }
                    rec.scores.remove(id);
                }
                RosterEdit::Rename { id, .. } => {
                    if !rec.wave.roster.contains(id) {
                        return Err(ServiceError::NotInRoster(id.clone()));
                    }
                }
            }
            rec.relational = instances;
            rec.responses = responses.into_iter().map(|r| (r.respondent_id.clone(), r)).collect();
            let mut seen = BTreeSet::new();
            retired.retain(|r| seen.insert(r.respondent_id.clone()));
            rec.retired.extend(retired);
            Ok(rec.clone())
        })
    }

    /// Questionnaire items and relational items for one roster member.
    pub fn form(&self, actor: &UserAccount, wave_id: &str, respondent_id: Option<&str>) -> Result<Form> {
        let snap = self.snapshot();
        let rec = wave_of(&snap, wave_id)?;
        let respondent_id = respondent_id.map(str::to_string).or_else(|| actor.respondent_id.clone()).ok_or_else(|| ServiceError::Invalid("respondent id is required".into()))?;
        self.check(actor, Action::SubmitResponse, &Resource::owned_by(&rec.owner).with_respondent(&respondent_id))?;
        if !rec.wave.roster.contains(&respondent_id) {
            return Err(ServiceError::NotInRoster(respondent_id));
        }
        let q = published(&snap, &rec.wave.questionnaire_id, rec.wave.version)?;
        let labels = |opts: &[AnswerOption]| opts.iter().map(|o| o.label.clone()).collect::<Vec<_>>();
        let mut items: Vec<FormItem> = q
            .items()
            .into_iter()
            .map(|i| FormItem {
                id: i.instance_id,
                prompt: i.question.prompt.clone(),
                kind: i.question.kind,
                options: labels(&i.question.options),
                required: i.question.required,
            })
            .collect();
        for inst in &rec.relational {
            let Some(t) = q.template(&inst.template_id) else { continue };
            for it in inst.items.get(&respondent_id).into_iter().flatten() {
                let label = inst.labels.get(&it.alter_id).cloned().unwrap_or_else(|| it.alter_id.clone());
                items.push(FormItem {
                    id: it.item_id.clone(),
                    prompt: t.prompt_for(&label),
                    kind: QuestionKind::SingleChoice,
                    options: labels(&t.tie_scale),
                    required: false,
                });
            }
        }
        Ok(Form { wave_id: wave_id.to_string(), respondent_id, title: q.def.title.clone(), items })
    }

    /// Stores a response set and, when submitted, its score report; both or
    /// neither are persisted.
    pub fn submit_response(&self, actor: &UserAccount, wave_id: &str, req: SubmitRequest) -> Result<SubmitOutcome> {
        let respondent_id = req
            .respondent_id
            .clone()
            .or_else(|| actor.respondent_id.clone())
            .ok_or_else(|| ServiceError::Invalid("respondent id is required".into()))?;
        self.store.transact(|s| {
            let rec = wave_of(s, wave_id)?;
            authorize(actor, Action::SubmitResponse, &Resource::owned_by(&rec.owner).with_respondent(&respondent_id))?;
            if !rec.wave.roster.contains(&respondent_id) {
                return Err(ServiceError::NotInRoster(respondent_id.clone()));
            }
            if rec.wave.closed {
                return Err(ServiceError::WaveClosed(wave_id.to_string()));
            }
            let previous = rec.responses.get(&respondent_id);
            if previous.is_some_and(|p| p.is_submitted()) && !s.settings.allow_resubmission {
                return Err(ServiceError::Conflict(format!("submitted response of `{respondent_id}`")));
            }
            let replaced = previous.is_some();
            let q = published(s, &rec.wave.questionnaire_id, rec.wave.version)?;
            let resp = ResponseSet { wave_id: wave_id.to_string(), respondent_id: respondent_id.clone(), answers: req.answers, status: req.status };
            let issues = check_response(&q, &rec.relational, &resp);
            if !issues.is_empty() {
                return Err(ServiceError::Response(issues));
            }
            let scores = if resp.is_submitted() {
                Some(score_response(&q, &resp).map_err(|e| ServiceError::Scoring(e.to_string()))?)
            } else {
                None
            };
            issue_answer_tokens(s, &self.key, wave_id, &resp);
            let rec = s.waves.get_mut(wave_id).expect("checked above");
            rec.responses.insert(respondent_id.clone(), resp.clone());
            match &scores {
                Some(r) => {
                    rec.scores.insert(respondent_id.clone(), r.clone());
                }
                None => {
                    rec.scores.remove(&respondent_id);
                }
            }
            rec.history.push(SubmissionEvent { respondent_id, actor: actor.id.clone(), at: now(), replaced });
            Ok(SubmitOutcome { response: resp, scores, replaced })
        })
    }

    pub fn response(&self, actor: &UserAccount, wave_id: &str, respondent_id: &str) -> Result<ResponseSet> {
        let snap = self.snapshot();
        let rec = wave_of(&snap, wave_id)?;
        self.check(actor, Action::ReadResponse, &Resource::owned_by(&rec.owner).with_respondent(respondent_id))?;
        rec.responses.get(respondent_id).cloned().ok_or_else(|| ServiceError::NotFound(format!("response of `{respondent_id}`")))
    }

    /// Score reports of the wave, keyed by respondent pseudonym.
    pub fn scores(&self, actor: &UserAccount, wave_id: &str) -> Result<Vec<ScoreReport>> {
        let snap = self.snapshot();
        let rec = wave_of(&snap, wave_id)?;
        self.check(actor, Action::ReadScores, &Resource::owned_by(&rec.owner))?;
        let view = crate::anon::WaveView::build(&snap, &self.key, rec)?;
        Ok(view.scores)
    }

    /// Waves of one questionnaire and group in time order.
    pub fn wave_tabs(&self, actor: &UserAccount, questionnaire_id: &str, group_id: &str) -> Result<Vec<WaveTab>> {
        let snap = self.snapshot();
        let rec = snap
            .questionnaires
            .get(questionnaire_id)
            .ok_or_else(|| ServiceError::NotFound(format!("questionnaire `{questionnaire_id}`")))?;
        self.check(actor, Action::ReadQuestionnaire, &Resource::owned_by(&rec.owner))?;
        let mut waves: Vec<&WaveRecord> = snap
            .waves
            .values()
            .filter(|w| w.wave.questionnaire_id == questionnaire_id && w.wave.group_id == group_id)
            .collect();
        waves.sort_by(|a, b| (a.wave.opened_at, &a.wave.id).cmp(&(b.wave.opened_at, &b.wave.id)));
        let mut tabs = Vec::with_capacity(waves.len());
        let mut previous: Option<BTreeMap<String, EdgeList>> = None;
        for w in waves {
            let edges = wave_edges(&snap, w)?;
            let audit: Vec<Score> = w.scores.values().filter_map(audit_total).cloned().collect();
            let churn = match &previous {
                Some(prev) => edges.iter().filter_map(|(rel, e)| prev.get(rel).map(|p| wave_churn(p, e))).collect(),
                None => Vec::new(),
            };
            tabs.push(WaveTab {
                wave_id: w.wave.id.clone(),
                label: w.wave.label.clone(),
                opened_at: w.wave.opened_at,
                closed: w.wave.closed,
                roster_size: w.wave.roster.len(),
                submitted: w.responses.values().filter(|r| r.is_submitted()).count(),
                mean_audit: mean(&audit).map(|m| display_decimal(&m)),
                churn,
            });
            previous = Some(edges);
        }
        Ok(tabs)
    }

    // ---- analysis and export

    pub fn network(&self, actor: &UserAccount, wave_id: &str, relation: Option<&str>) -> Result<cohortlens_core::sna::NodeLinkGraph> {
        let snap = self.snapshot();
        let rec = wave_of(&snap, wave_id)?;
        self.check(actor, Action::ReadNetwork, &Resource::owned_by(&rec.owner))?;
        let view = crate::anon::WaveView::build(&snap, &self.key, rec)?;
        let net = view.network(relation)?;
        Ok(net.graph(&view))
    }

    /// Individual report of a respondent in a wave, rendered as `format`.
    pub fn report(&self, actor: &UserAccount, respondent_id: &str, wave_id: &str, relation: Option<&str>, format: &str) -> Result<Vec<u8>> {
        let snap = self.snapshot();
        let rec = wave_of(&snap, wave_id)?;
        self.check(actor, Action::ReadReport, &Resource::owned_by(&rec.owner))?;
        let view = crate::anon::WaveView::build(&snap, &self.key, rec)?;
        let token = view.token_of(respondent_id).ok_or_else(|| ServiceError::NotInRoster(respondent_id.to_string()))?;
        let net = view.network(relation)?;
        let report = net.individual(&view, &self.templates, &token)?;
        cohortlens_core::report::render_report_as(&cohortlens_core::Report::Individual(report), format)
            .map_err(|e| ServiceError::Invalid(e.to_string()))
    }

    pub fn group_report(&self, actor: &UserAccount, wave_id: &str, relation: Option<&str>, format: &str) -> Result<Vec<u8>> {
        let snap = self.snapshot();
        let rec = wave_of(&snap, wave_id)?;
        self.check(actor, Action::ReadReport, &Resource::owned_by(&rec.owner))?;
        let view = crate::anon::WaveView::build(&snap, &self.key, rec)?;
        let net = view.network(relation)?;
        let report = net.group(&view, &self.templates)?;
        cohortlens_core::report::render_report_as(&cohortlens_core::Report::Group(report), format)
            .map_err(|e| ServiceError::Invalid(e.to_string()))
    }

    pub fn export(&self, actor: &UserAccount, wave_id: &str, format: &str, relation: Option<&str>) -> Result<crate::export::Artifact> {
        let snap = self.snapshot();
        let rec = wave_of(&snap, wave_id)?;
        self.check(actor, Action::Export, &Resource::owned_by(&rec.owner))?;
        let format: crate::export::ExportFormat = format.parse()?;
        let view = crate::anon::WaveView::build(&snap, &self.key, rec)?;
        crate::export::export(&view, &self.templates, format, relation)
    }

    // ---- import

    /// Imports one legacy file: respondents, a group, a wave and its responses,
    /// scored in the same transaction. Nothing is kept if the import fails.
    pub fn import_csv(&self, actor: &UserAccount, req: ImportRequest) -> Result<ImportSummary> {
        self.store.transact(|s| {
            let qrec = s
                .questionnaires
                .get(&req.questionnaire_id)
                .ok_or_else(|| ServiceError::NotFound(format!("questionnaire `{}`", req.questionnaire_id)))?;
            authorize(actor, Action::ImportCsv, &Resource::owned_by(&qrec.owner))?;
            let version = match req.version {
                Some(v) => v,
                None => s.registry.latest_version(&req.questionnaire_id).ok_or_else(|| ServiceError::NotFound("published version".into()))?,
            };
            let q = published(s, &req.questionnaire_id, version)?;
            let parsed = parse_csv(&req.csv, &req.mapping, &q).map_err(|e| {
                ServiceError::ImportRejected(Box::new(ImportSummary { errors: vec![e], ..ImportSummary::default() }))
            })?;
            let mut summary = parsed.summary;
            if parsed.rows.is_empty() {
                summary.errors.push(RowError { row: 1, column: None, message: "file has no data rows".into() });
                return Err(ServiceError::ImportRejected(Box::new(summary)));
            }
            for row in &parsed.rows {
                match s.respondents.get(&row.respondent_id) {
                    Some(existing) if existing.owner != actor.id && actor.role != Role::SuperAdmin => summary.errors.push(RowError {
                        row: row.line,
                        column: Some(req.mapping.respondent_column.clone()),
                        message: format!("respondent `{}` belongs to another interviewer", row.respondent_id),
                    }),
                    Some(_) => {}
                    None => {
                        let mut r = Respondent::new(row.respondent_id.clone(), row.display_name.clone());
                        r.attributes = row.attributes.clone();
                        issue_respondent_tokens(s, &self.key, &r);
                        s.respondents.insert(r.id.clone(), Owned { owner: actor.id.clone(), value: r });
                    }
                }
            }
            if req.mapping.strict && !summary.errors.is_empty() {
                return Err(ServiceError::ImportRejected(Box::new(summary)));
            }
            let group_id = s.fresh_id("G");
            let members: Vec<String> = parsed.rows.iter().map(|r| r.respondent_id.clone()).collect();
            let name = if req.group_name.is_empty() { group_id.clone() } else { req.group_name.clone() };
            s.groups.insert(group_id.clone(), Owned { owner: actor.id.clone(), value: RespondentGroup { id: group_id.clone(), name, members } });
            let open = OpenWaveRequest { group_id: group_id.clone(), label: req.wave_label.clone(), version: Some(version), opened_at: req.opened_at };
            let wave = open_wave_in(s, actor, &req.questionnaire_id, open)?;
            let wave_id = wave.wave.id.clone();
            for row in parsed.rows {
                let mut resp = ResponseSet { wave_id: wave_id.clone(), respondent_id: row.respondent_id.clone(), answers: row.answers, status: row.status };
                let issues = check_response(&q, &wave.relational, &resp);
                let mut fail = |message: String| summary.errors.push(RowError { row: row.line, column: None, message });
                if !issues.is_empty() {
                    let mut parts = Vec::new();
                    if !issues.missing.is_empty() {
                        parts.push(format!("missing {}", issues.missing.join(", ")));
                    }
                    parts.extend(issues.invalid.iter().map(|i| format!("{}: {}", i.item, i.reason)));
                    parts.extend(issues.unknown.iter().map(|u| format!("unknown item {u}")));
                    fail(parts.join("; "));
                    resp.status = Completion::Partial;
                }
                let scored = if resp.is_submitted() {
                    match score_response(&q, &resp) {
                        Ok(r) => Some(r),
                        Err(e) => {
                            fail(e.to_string());
                            resp.status = Completion::Partial;
                            None
                        }
                    }
                } else {
                    None
                };
                issue_answer_tokens(s, &self.key, &wave_id, &resp);
                let rec = s.waves.get_mut(&wave_id).expect("wave just opened");
                if let Some(r) = scored {
                    rec.scores.insert(resp.respondent_id.clone(), r);
                    summary.responses_scored += 1;
                }
                rec.history.push(SubmissionEvent { respondent_id: resp.respondent_id.clone(), actor: actor.id.clone(), at: now(), replaced: false });
                rec.responses.insert(resp.respondent_id.clone(), resp);
                summary.rows_imported += 1;
            }
            summary.errors.sort_by_key(|e| e.row);
            if req.mapping.strict && !summary.errors.is_empty() {
                return Err(ServiceError::ImportRejected(Box::new(summary)));
            }
            summary.wave_id = Some(wave_id);
            summary.group_id = Some(group_id);
            Ok(summary)
        })
    }
}

fn questionnaire_view(s: &State, id: &str) -> QuestionnaireView {
    let rec = &s.questionnaires[id];
    let latest = s.registry.latest_version(id);
    QuestionnaireView {
        owner: rec.owner.clone(),
        draft: rec.value.clone(),
        latest_version: latest,
        published: latest.and_then(|v| s.registry.get(id, v)),
    }
}

pub(crate) fn wave_of<'a>(s: &'a State, wave_id: &str) -> Result<&'a WaveRecord> {
    s.waves.get(wave_id).ok_or_else(|| ServiceError::NotFound(format!("wave `{wave_id}`")))
}

pub(crate) fn published(s: &State, id: &str, version: u32) -> Result<PublishedQuestionnaire> {
    s.registry.get(id, version).ok_or_else(|| ServiceError::NotFound(format!("questionnaire `{id}` version {version}")))
}

/// Raw edge lists per relation, from submitted responses.
pub(crate) fn wave_edges(s: &State, rec: &WaveRecord) -> Result<BTreeMap<String, EdgeList>> {
    let q = published(s, &rec.wave.questionnaire_id, rec.wave.version)?;
    let responses: Vec<ResponseSet> = rec.responses.values().cloned().collect();
    let mut out = BTreeMap::new();
    for inst in &rec.relational {
        if let Some(t) = q.template(&inst.template_id) {
            out.insert(inst.relation.clone(), extract_edges(inst, t, &responses));
        }
    }
    Ok(out)
}

fn open_wave_in(s: &mut State, actor: &UserAccount, questionnaire_id: &str, req: OpenWaveRequest) -> Result<WaveRecord> {
    let qrec = s.questionnaires.get(questionnaire_id).ok_or_else(|| ServiceError::NotFound(format!("questionnaire `{questionnaire_id}`")))?;
    authorize(actor, Action::OpenWave, &Resource::owned_by(&qrec.owner))?;
    let group = s.groups.get(&req.group_id).ok_or_else(|| ServiceError::NotFound(format!("group `{}`", req.group_id)))?;
    authorize(actor, Action::OpenWave, &Resource::owned_by(&group.owner))?;
    let version = match req.version {
        Some(v) => v,
        None => s.registry.latest_version(questionnaire_id).ok_or_else(|| ServiceError::NotFound("published version".into()))?,
    };
    let directory: BTreeMap<String, Respondent> = s.respondents.iter().map(|(k, v)| (k.clone(), v.value.clone())).collect();
    let group = group.value.clone();
    let id = s.fresh_id("W");
    let label = if req.label.is_empty() { id.clone() } else { req.label };
    let spec = WaveSpec { id: id.clone(), label, opened_at: req.opened_at.unwrap_or_else(now) };
    let opened = open_wave::<Score>(&s.registry, questionnaire_id, version, &group, &directory, spec).map_err(wave_error)?;
    let rec = WaveRecord {
        owner: actor.id.clone(),
        wave: opened.wave,
        relational: opened.relational,
        responses: BTreeMap::new(),
        scores: BTreeMap::new(),
        retired: Vec::new(),
        history: Vec::new(),
    };
    s.waves.insert(id, rec.clone());
    Ok(rec)
}

fn issue_respondent_tokens(s: &mut State, key: &StudyKey, r: &Respondent) {
    s.pseudonyms.issue(key, RESPONDENT_PREFIX, &r.id);
    for (k, v) in &r.attributes {
        if s.settings.flagged_fields.contains(k) {
            s.pseudonyms.issue(key, VALUE_PREFIX, v);
        }
    }
}

/// Question ids whose answers are tokenized in exports.
pub(crate) fn flagged_items(s: &State, q: &PublishedQuestionnaire) -> BTreeSet<String> {
    q.items()
        .into_iter()
        .filter(|i| i.question.anonymize || s.settings.flagged_fields.contains(&i.instance_id))
        .map(|i| i.instance_id)
        .collect()
}

pub(crate) fn answer_text(a: &Answer) -> String {
    match a {
        Answer::Choice(c) => c.clone(),
        Answer::Choices(cs) => cs.join(";"),
        Answer::Number(v) => cohortlens_core::scalar::Scalar::to_text(v),
        Answer::Text(t) => t.clone(),
    }
}

fn issue_answer_tokens(s: &mut State, key: &StudyKey, wave_id: &str, resp: &ResponseSet) {
    let Some(rec) = s.waves.get(wave_id) else { return };
    let Ok(q) = published(s, &rec.wave.questionnaire_id, rec.wave.version) else { return };
    let flagged = flagged_items(s, &q);
    for (item, a) in &resp.answers {
        if flagged.contains(item) {
            s.pseudonyms.issue(key, VALUE_PREFIX, &answer_text(a));
        }
    }
}

//! Accounts, credentials and the role × action authorization matrix.
//!
//! | action                | super-admin | interviewer        | respondent  |
//! |-----------------------|-------------|--------------------|-------------|
//! | manage-accounts       | allow       | deny `A1`          | deny `A1`   |
//! | register-instrument   | allow       | deny `A2`          | deny `A2`   |
//! | read-instruments      | allow       | allow              | deny `A3`   |
//! | create-catalog-item   | allow       | allow              | deny `A3`   |
//! | read-catalog-item     | allow       | own `A4`           | deny `A3`   |
//! | create-questionnaire  | allow       | allow              | deny `A3`   |
//! | read-questionnaire    | allow       | own `A4`           | deny `A3`   |
//! | update-questionnaire  | allow       | own `A4`           | deny `A3`   |
//! | manage-respondents    | allow       | allow              | deny `A3`   |
//! | open-wave             | allow       | own `A4`           | deny `A3`   |
//! | close-wave            | allow       | own `A4`           | deny `A3`   |
//! | edit-roster           | allow       | own `A4`           | deny `A3`   |
//! | read-wave             | allow       | own `A4`           | deny `A3`   |
//! | import-csv            | allow       | own `A4`           | deny `A3`   |
//! | submit-response       | allow       | own `A4`           | self `A5`   |
//! | read-response         | allow       | own `A4`           | self `A5`   |
//! | read-scores           | allow       | own `A4`           | deny `A5`   |
//! | read-network          | allow       | own `A4`           | deny `A5`   |
//! | read-report           | allow       | own `A4`           | deny `A5`   |
//! | export                | allow       | own `A4`           | deny `A5`   |
//! | read-personal-data    | audited     | deny `A6`          | deny `A6`   |
//! | read-audit-log        | allow       | deny `A1`          | deny `A1`   |
//!
//! `own` allows when the resource's owner is the caller; `self` allows when the
//! resource belongs to the caller's linked respondent record. A denial carries
//! the rule id shown in the table.

use std::fmt;

use argon2::password_hash::{PasswordHash, PasswordHasher, PasswordVerifier, SaltString};
use argon2::{Algorithm, Argon2, Params, Version};
use rand::rngs::OsRng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    SuperAdmin,
    Interviewer,
    Respondent,
}

impl Role {
    pub const ALL: [Role; 3] = [Role::SuperAdmin, Role::Interviewer, Role::Respondent];

    pub fn name(self) -> &'static str {
        match self {
            Role::SuperAdmin => "super-admin",
            Role::Interviewer => "interviewer",
            Role::Respondent => "respondent",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Action {
    ManageAccounts,
    RegisterInstrument,
    ReadInstruments,
    CreateCatalogItem,
    ReadCatalogItem,
    CreateQuestionnaire,
    ReadQuestionnaire,
    UpdateQuestionnaire,
    ManageRespondents,
    OpenWave,
    CloseWave,
    EditRoster,
    ReadWave,
    ImportCsv,
    SubmitResponse,
    ReadResponse,
    ReadScores,
    ReadNetwork,
    ReadReport,
    Export,
    ReadPersonalData,
    ReadAuditLog,
}

impl Action {
    pub const ALL: [Action; 22] = [
        Action::ManageAccounts,
        Action::RegisterInstrument,
        Action::ReadInstruments,
        Action::CreateCatalogItem,
        Action::ReadCatalogItem,
        Action::CreateQuestionnaire,
        Action::ReadQuestionnaire,
        Action::UpdateQuestionnaire,
        Action::ManageRespondents,
        Action::OpenWave,
        Action::CloseWave,
        Action::EditRoster,
        Action::ReadWave,
        Action::ImportCsv,
        Action::SubmitResponse,
        Action::ReadResponse,
        Action::ReadScores,
        Action::ReadNetwork,
        Action::ReadReport,
        Action::Export,
        Action::ReadPersonalData,
        Action::ReadAuditLog,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Action::ManageAccounts => "manage-accounts",
            Action::RegisterInstrument => "register-instrument",
            Action::ReadInstruments => "read-instruments",
            Action::CreateCatalogItem => "create-catalog-item",
            Action::ReadCatalogItem => "read-catalog-item",
            Action::CreateQuestionnaire => "create-questionnaire",
            Action::ReadQuestionnaire => "read-questionnaire",
            Action::UpdateQuestionnaire => "update-questionnaire",
            Action::ManageRespondents => "manage-respondents",
            Action::OpenWave => "open-wave",
            Action::CloseWave => "close-wave",
            Action::EditRoster => "edit-roster",
            Action::ReadWave => "read-wave",
            Action::ImportCsv => "import-csv",
            Action::SubmitResponse => "submit-response",
            Action::ReadResponse => "read-response",
            Action::ReadScores => "read-scores",
            Action::ReadNetwork => "read-network",
            Action::ReadReport => "read-report",
            Action::Export => "export",
            Action::ReadPersonalData => "read-personal-data",
            Action::ReadAuditLog => "read-audit-log",
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One cell of the matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Permission {
    Allow,
    /// Allowed and recorded in the audit log.
    Audited,
    /// Allowed on resources the caller owns; otherwise denied with the rule.
    Own(&'static str),
    /// Allowed on the caller's own respondent data; otherwise denied.
    OwnRespondent(&'static str),
    Deny(&'static str),
}

pub const RULE_ADMIN_ONLY: &str = "A1";
pub const RULE_INSTRUMENTS_ADMIN_ONLY: &str = "A2";
pub const RULE_RESPONDENT_FILL_ONLY: &str = "A3";
pub const RULE_OWN_RESOURCES: &str = "A4";
pub const RULE_OWN_RESPONSE: &str = "A5";
pub const RULE_PERSONAL_DATA: &str = "A6";

pub fn permission(role: Role, action: Action) -> Permission {
    use Action::*;
    use Permission::*;
    match role {
        Role::SuperAdmin => match action {
            ReadPersonalData => Audited,
            _ => Allow,
        },
        Role::Interviewer => match action {
            ManageAccounts | ReadAuditLog => Deny(RULE_ADMIN_ONLY),
            RegisterInstrument => Deny(RULE_INSTRUMENTS_ADMIN_ONLY),
            ReadInstruments | CreateCatalogItem | CreateQuestionnaire | ManageRespondents => Allow,
            ReadPersonalData => Deny(RULE_PERSONAL_DATA),
            _ => Own(RULE_OWN_RESOURCES),
        },
        Role::Respondent => match action {
            ManageAccounts | ReadAuditLog => Deny(RULE_ADMIN_ONLY),
            RegisterInstrument => Deny(RULE_INSTRUMENTS_ADMIN_ONLY),
            SubmitResponse | ReadResponse => OwnRespondent(RULE_OWN_RESPONSE),
            ReadScores | ReadNetwork | ReadReport | Export => Deny(RULE_OWN_RESPONSE),
            ReadPersonalData => Deny(RULE_PERSONAL_DATA),
            _ => Deny(RULE_RESPONDENT_FILL_ONLY),
        },
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserAccount {
    pub id: String,
    pub login: String,
    pub credential_hash: String,
    pub role: Role,
    /// Linked respondent record; set exactly for respondent accounts.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub respondent_id: Option<String>,
}

/// Who owns a resource and, for response data, whose it is.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Resource {
    pub owner: Option<String>,
    pub respondent: Option<String>,
}

impl Resource {
    pub fn none() -> Self {
        Resource::default()
    }

    pub fn owned_by(owner: impl Into<String>) -> Self {
        Resource { owner: Some(owner.into()), respondent: None }
    }

    pub fn with_respondent(mut self, respondent: impl Into<String>) -> Self {
        self.respondent = Some(respondent.into());
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Allow,
    AllowAudited,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{role} may not {action} (rule {rule})")]
pub struct Denied {
    pub role: Role,
    pub action: Action,
    pub rule: &'static str,
}

pub fn authorize(account: &UserAccount, action: Action, resource: &Resource) -> Result<Decision, Denied> {
    let deny = |rule| Denied { role: account.role, action, rule };
    match permission(account.role, action) {
        Permission::Allow => Ok(Decision::Allow),
        Permission::Audited => Ok(Decision::AllowAudited),
        Permission::Deny(rule) => Err(deny(rule)),
        Permission::Own(rule) => match &resource.owner {
            Some(o) if *o == account.id => Ok(Decision::Allow),
            _ => Err(deny(rule)),
        },
        Permission::OwnRespondent(rule) => match (&resource.respondent, &account.respondent_id) {
            (Some(r), Some(mine)) if r == mine => Ok(Decision::Allow),
            _ => Err(deny(rule)),
        },
    }
}

fn hasher() -> Argon2<'static> {
    let params = Params::new(4096, 2, 1, None).expect("static argon2 parameters");
    Argon2::new(Algorithm::Argon2id, Version::V0x13, params)
}

/// PHC-format argon2id hash of a password.
pub fn hash_password(password: &str) -> String {
    let salt = SaltString::generate(&mut OsRng);
    hasher().hash_password(password.as_bytes(), &salt).expect("argon2 hashing").to_string()
}

pub fn verify_password(password: &str, hash: &str) -> bool {
    PasswordHash::new(hash).is_ok_and(|h| hasher().verify_password(password.as_bytes(), &h).is_ok())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn account(role: Role) -> UserAccount {
        UserAccount {
            id: "u1".into(),
            login: "u1".into(),
            credential_hash: String::new(),
            role,
            respondent_id: (role == Role::Respondent).then(|| "r1".into()),
        }
    }

    #[test]
    fn ownership_decides_own_cells() {
        let i = account(Role::Interviewer);
        assert!(authorize(&i, Action::ReadQuestionnaire, &Resource::owned_by("u1")).is_ok());
        let e = authorize(&i, Action::ReadQuestionnaire, &Resource::owned_by("u2")).unwrap_err();
        assert_eq!(e.rule, RULE_OWN_RESOURCES);
        assert!(authorize(&i, Action::ReadQuestionnaire, &Resource::none()).is_err());
    }

    #[test]
    fn respondent_reaches_only_own_response() {
        let r = account(Role::Respondent);
        let mine = Resource::owned_by("x").with_respondent("r1");
        let theirs = Resource::owned_by("x").with_respondent("r2");
        assert!(authorize(&r, Action::SubmitResponse, &mine).is_ok());
        assert_eq!(authorize(&r, Action::ReadResponse, &theirs).unwrap_err().rule, RULE_OWN_RESPONSE);
        assert!(authorize(&r, Action::ReadReport, &mine).is_err());
    }

    #[test]
    fn admin_personal_data_is_audited() {
        let a = account(Role::SuperAdmin);
        assert_eq!(authorize(&a, Action::ReadPersonalData, &Resource::none()), Ok(Decision::AllowAudited));
        assert_eq!(authorize(&a, Action::RegisterInstrument, &Resource::none()), Ok(Decision::Allow));
    }

    #[test]
    fn password_round_trip() {
        let h = hash_password("s3cret");
        assert!(h.starts_with("$argon2id$"));
        assert!(verify_password("s3cret", &h));
        assert!(!verify_password("nope", &h));
        assert!(!verify_password("s3cret", "garbage"));
    }
}

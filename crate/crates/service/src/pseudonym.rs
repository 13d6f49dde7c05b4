//! Keyed pseudonyms for respondent identities and flagged field values.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::Path;

use hmac::{Hmac, Mac};
use rand::RngCore;
use serde::{Deserialize, Serialize};
use sha2::Sha256;

/// Hex characters kept from the keyed hash.
pub const TOKEN_HEX_LEN: usize = 8;

pub const RESPONDENT_PREFIX: &str = "R-";
pub const VALUE_PREFIX: &str = "A-";

/// Secret HMAC key of a study.
#[derive(Clone)]
pub struct StudyKey(Vec<u8>);

impl std::fmt::Debug for StudyKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("StudyKey(..)")
    }
}

impl StudyKey {
    pub fn new(bytes: impl Into<Vec<u8>>) -> Self {
        StudyKey(bytes.into())
    }

    pub fn generate() -> Self {
        let mut bytes = vec![0u8; 32];
        rand::rngs::OsRng.fill_bytes(&mut bytes);
        StudyKey(bytes)
    }

    /// Reads a hex key file, creating one with a fresh key if it is absent.
    pub fn load_or_create(path: &Path) -> io::Result<Self> {
        match fs::read_to_string(path) {
            Ok(text) => hex::decode(text.trim())
                .map(StudyKey)
                .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, format!("study key file: {e}"))),
            Err(e) if e.kind() == io::ErrorKind::NotFound => {
                let key = StudyKey::generate();
                if let Some(dir) = path.parent() {
                    fs::create_dir_all(dir)?;
                }
                fs::write(path, hex::encode(&key.0))?;
                Ok(key)
            }
            Err(e) => Err(e),
        }
    }

    /// `prefix` followed by the first [`TOKEN_HEX_LEN`] hex digits of
    /// HMAC-SHA256(key, prefix ‖ salt ‖ raw).
    pub fn token(&self, prefix: &str, salt: u32, raw: &str) -> String {
        let mut mac = Hmac::<Sha256>::new_from_slice(&self.0).expect("hmac accepts any key length");
        mac.update(prefix.as_bytes());
        mac.update(&salt.to_be_bytes());
        mac.update(raw.as_bytes());
        let digest = hex::encode(mac.finalize().into_bytes());
        format!("{prefix}{}", &digest[..TOKEN_HEX_LEN])
    }
}

/// Issued tokens, persisted with the study so they never change.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PseudonymMap {
    /// raw value → token, per prefix.
    forward: BTreeMap<String, BTreeMap<String, String>>,
    /// token → raw value.
    reverse: BTreeMap<String, String>,
}

impl PseudonymMap {
    /// Token for `raw`, issuing one (re-salting on collision) if needed.
    pub fn issue(&mut self, key: &StudyKey, prefix: &str, raw: &str) -> String {
        if let Some(t) = self.get(prefix, raw) {
            return t.to_string();
        }
        let mut salt = 0u32;
        let token = loop {
            let t = key.token(prefix, salt, raw);
            if !self.reverse.contains_key(&t) {
                break t;
            }
            salt += 1;
        };
        self.forward.entry(prefix.to_string()).or_default().insert(raw.to_string(), token.clone());
        self.reverse.insert(token.clone(), raw.to_string());
        token
    }

    pub fn get(&self, prefix: &str, raw: &str) -> Option<&str> {
        self.forward.get(prefix)?.get(raw).map(String::as_str)
    }

    pub fn respondent(&self, id: &str) -> Option<&str> {
        self.get(RESPONDENT_PREFIX, id)
    }

    pub fn value(&self, raw: &str) -> Option<&str> {
        self.get(VALUE_PREFIX, raw)
    }

    /// Raw value behind a token; super-admin only.
    pub fn reveal(&self, token: &str) -> Option<&str> {
        self.reverse.get(token).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.reverse.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reverse.is_empty()
    }

    /// Every (token, raw) pair.
    pub fn entries(&self) -> impl Iterator<Item = (&str, &str)> {
        self.reverse.iter().map(|(t, r)| (t.as_str(), r.as_str()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokens_are_keyed_and_short() {
        let a = StudyKey::new(b"key-a".to_vec());
        let b = StudyKey::new(b"key-b".to_vec());
        let t = a.token(RESPONDENT_PREFIX, 0, "María");
        assert_eq!(t.len(), 2 + TOKEN_HEX_LEN);
        assert!(t.starts_with("R-") && t[2..].chars().all(|c| c.is_ascii_hexdigit()));
        assert_eq!(t, a.token(RESPONDENT_PREFIX, 0, "María"));
        assert_ne!(t, b.token(RESPONDENT_PREFIX, 0, "María"));
        assert_ne!(t, a.token(RESPONDENT_PREFIX, 1, "María"));
    }

    #[test]
    fn issue_is_stable_and_injective() {
        let key = StudyKey::new(b"k".to_vec());
        let mut m = PseudonymMap::default();
        let t1 = m.issue(&key, RESPONDENT_PREFIX, "S01");
        assert_eq!(m.issue(&key, RESPONDENT_PREFIX, "S01"), t1);
        assert_eq!(t1, key.token(RESPONDENT_PREFIX, 0, "S01"));
        let mut seen = std::collections::BTreeSet::new();
        for i in 0..2000 {
            assert!(seen.insert(m.issue(&key, VALUE_PREFIX, &format!("v{i}"))));
        }
        assert_eq!(m.reveal(&t1), Some("S01"));
    }

    #[test]
    fn collision_is_resalted() {
        let key = StudyKey::new(b"k".to_vec());
        let mut m = PseudonymMap::default();
        let taken = key.token(VALUE_PREFIX, 0, "x");
        m.reverse.insert(taken.clone(), "someone else".into());
        let t = m.issue(&key, VALUE_PREFIX, "x");
        assert_ne!(t, taken);
        assert_eq!(t, key.token(VALUE_PREFIX, 1, "x"));
    }

    #[test]
    fn key_file_is_created_then_reused() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("keys/study.key");
        let k1 = StudyKey::load_or_create(&path).unwrap();
        let k2 = StudyKey::load_or_create(&path).unwrap();
        assert_eq!(k1.token("R-", 0, "a"), k2.token("R-", 0, "a"));
    }
}

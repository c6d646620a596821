use std::sync::Arc;

use chrono::{DateTime, Duration, Utc};
use parking_lot::Mutex;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::json;

use crate::accounts::PasswordCost;
use crate::classifier::Model;
use crate::clock::{Clock, SystemClock};
use crate::error::{Error, Result};
use crate::geo::{BoxGeocoder, Geocoder, DEFAULT_COUNTRY};
use crate::i18n::Catalogs;
use crate::mail::{LogMailer, MailSender};
use crate::storage::{DocumentStore, StorageError};
use crate::types::Language;

pub(crate) mod collections {
    pub const ACCOUNTS: &str = "accounts";
    pub const EMAILS: &str = "emails";
    pub const SESSIONS: &str = "sessions";
    pub const VERIFICATIONS: &str = "verifications";
    pub const CREDENTIALS: &str = "credentials";
    pub const COMPLAINTS: &str = "complaints";
    pub const EVENTS: &str = "events";
    pub const NOTIFICATIONS: &str = "notifications";
    pub const COUNTERS: &str = "counters";
}

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    /// ISO 3166 alpha-2 code complaints must resolve to.
    pub country_code: String,
    pub token_ttl: Duration,
    pub verification_ttl: Duration,
    pub default_language: Language,
    pub password_cost: PasswordCost,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            country_code: DEFAULT_COUNTRY.to_string(),
            token_ttl: Duration::hours(24),
            verification_ttl: Duration::hours(24),
            default_language: Language::En,
            password_cost: PasswordCost::Standard,
        }
    }
}

/// Everything an operation needs: storage, the classifier, the geocoder,
/// the mail sender, a clock and a random source. Operations live in
/// `impl Platform` blocks across the domain modules.
pub struct Platform {
    pub(crate) store: Arc<dyn DocumentStore>,
    pub(crate) model: Arc<dyn Model>,
    pub(crate) geocoder: Arc<dyn Geocoder>,
    pub(crate) mailer: Arc<dyn MailSender>,
    pub(crate) clock: Arc<dyn Clock>,
    pub(crate) catalogs: Arc<Catalogs>,
    pub(crate) settings: Settings,
    rng: Mutex<ChaCha20Rng>,
}

pub struct PlatformBuilder {
    store: Arc<dyn DocumentStore>,
    model: Arc<dyn Model>,
    geocoder: Option<Arc<dyn Geocoder>>,
    mailer: Option<Arc<dyn MailSender>>,
    clock: Option<Arc<dyn Clock>>,
    catalogs: Option<Arc<Catalogs>>,
    settings: Settings,
    seed: Option<u64>,
}

impl PlatformBuilder {
    pub fn geocoder(mut self, geocoder: Arc<dyn Geocoder>) -> Self {
        self.geocoder = Some(geocoder);
        self
    }

    pub fn mailer(mut self, mailer: Arc<dyn MailSender>) -> Self {
        self.mailer = Some(mailer);
        self
    }

    pub fn clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = Some(clock);
        self
    }

    pub fn catalogs(mut self, catalogs: Arc<Catalogs>) -> Self {
        self.catalogs = Some(catalogs);
        self
    }

    pub fn settings(mut self, settings: Settings) -> Self {
        self.settings = settings;
        self
    }

    /// Fixes the token generator; without it tokens come from OS entropy.
    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn build(self) -> Platform {
        let catalogs = self
            .catalogs
            .unwrap_or_else(|| Arc::new(Catalogs::builtin()));
        let rng = match self.seed {
            Some(seed) => ChaCha20Rng::seed_from_u64(seed),
            None => ChaCha20Rng::from_entropy(),
        };
        Platform {
            store: self.store,
            model: self.model,
            geocoder: self
                .geocoder
                .unwrap_or_else(|| Arc::new(BoxGeocoder::builtin())),
            mailer: self
                .mailer
                .unwrap_or_else(|| Arc::new(LogMailer::new(Arc::clone(&catalogs)))),
            clock: self.clock.unwrap_or_else(|| Arc::new(SystemClock)),
            catalogs,
            settings: self.settings,
            rng: Mutex::new(rng),
        }
    }
}

impl Platform {
    pub fn builder(store: Arc<dyn DocumentStore>, model: Arc<dyn Model>) -> PlatformBuilder {
        PlatformBuilder {
            store,
            model,
            geocoder: None,
            mailer: None,
            clock: None,
            catalogs: None,
            settings: Settings::default(),
            seed: None,
        }
    }

    pub fn store(&self) -> &Arc<dyn DocumentStore> {
        &self.store
    }

    pub fn catalogs(&self) -> &Catalogs {
        &self.catalogs
    }

    pub fn settings(&self) -> &Settings {
        &self.settings
    }

    pub fn model(&self) -> &Arc<dyn Model> {
        &self.model
    }

    pub(crate) fn now(&self) -> DateTime<Utc> {
        self.clock.now()
    }

    /// Hex string of `bytes` random bytes.
    pub(crate) fn random_token(&self, bytes: usize) -> String {
        let mut buf = vec![0u8; bytes];
        self.rng.lock().fill_bytes(&mut buf);
        hex::encode(buf)
    }

    pub(crate) fn random_bytes<const N: usize>(&self) -> [u8; N] {
        let mut buf = [0u8; N];
        self.rng.lock().fill_bytes(&mut buf);
        buf
    }

    /// Allocates the next id in a named sequence, e.g. `C-17`.
    pub(crate) fn next_id(&self, prefix: &str) -> Result<(String, u64)> {
        loop {
            let (next, expected) = match self.store.get(collections::COUNTERS, prefix) {
                Ok(doc) => (
                    doc.body["value"].as_u64().unwrap_or(0) + 1,
                    Some(doc.revision),
                ),
                Err(StorageError::NotFound(_)) => (1, None),
                Err(e) => return Err(e.into()),
            };
            match self.store.put(
                collections::COUNTERS,
                prefix,
                json!({ "value": next }),
                expected,
            ) {
                Ok(_) => return Ok((format!("{prefix}-{next}"), next)),
                Err(StorageError::Conflict { .. } | StorageError::AlreadyExists { .. }) => continue,
                Err(e) => return Err(e.into()),
            }
        }
    }

    pub(crate) fn load<T: DeserializeOwned>(
        &self,
        collection: &str,
        key: &str,
    ) -> Result<(T, u64)> {
        let doc = self.store.get(collection, key)?;
        Ok((serde_json::from_value(doc.body)?, doc.revision))
    }

    pub(crate) fn try_load<T: DeserializeOwned>(
        &self,
        collection: &str,
        key: &str,
    ) -> Result<Option<(T, u64)>> {
        match self.load(collection, key) {
            Ok(found) => Ok(Some(found)),
            Err(Error::NotFound(_)) => Ok(None),
            Err(e) => Err(e),
        }
    }

    pub(crate) fn create<T: Serialize>(
        &self,
        collection: &str,
        key: &str,
        value: &T,
    ) -> Result<u64> {
        Ok(self
            .store
            .put(collection, key, serde_json::to_value(value)?, None)?
            .revision)
    }

    pub(crate) fn replace<T: Serialize>(
        &self,
        collection: &str,
        key: &str,
        value: &T,
        revision: u64,
    ) -> Result<u64> {
        Ok(self
            .store
            .put(
                collection,
                key,
                serde_json::to_value(value)?,
                Some(revision),
            )?
            .revision)
    }

    pub(crate) fn scan<T: DeserializeOwned>(
        &self,
        collection: &str,
        predicate: &dyn Fn(&serde_json::Value) -> bool,
    ) -> Result<Vec<(T, u64)>> {
        self.store
            .query(collection, &|doc| predicate(&doc.body))?
            .into_iter()
            .map(|doc| Ok((serde_json::from_value(doc.body)?, doc.revision)))
            .collect()
    }
}

//! Citizen and employee registration, login sessions and employee removal.
//!
//! Email uniqueness is enforced through a reservation document per
//! lower-cased address in the `emails` collection; creating it is the
//! compare-and-set that decides which registration wins.

use argon2::password_hash::{PasswordHash, PasswordHasher, PasswordVerifier, SaltString};
use argon2::{Algorithm, Argon2, Params, Version};
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mail::OutgoingMail;
use crate::notifications::NotificationKind;
use crate::platform::{collections, Platform};
use crate::types::{Language, Role};

pub const MIN_PASSWORD_LEN: usize = 8;

/// Argon2id cost profile. `Fast` exists for tests and local fixtures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PasswordCost {
    #[default]
    Standard,
    Fast,
}

impl PasswordCost {
    fn hasher(self) -> Argon2<'static> {
        let params = match self {
            PasswordCost::Standard => Params::default(),
            PasswordCost::Fast => {
                Params::new(Params::MIN_M_COST, 1, 1, None).expect("argon2 params")
            }
        };
        Argon2::new(Algorithm::Argon2id, Version::V0x13, params)
    }
}

#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct UserAccount {
    pub id: String,
    pub role: Role,
    pub email: String,
    pub display_name: String,
    pub city: Option<String>,
    password_digest: String,
    pub active: bool,
    pub removed_at: Option<DateTime<Utc>>,
    pub language_pref: Language,
    pub created_at: DateTime<Utc>,
}

impl std::fmt::Debug for UserAccount {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("UserAccount")
            .field("id", &self.id)
            .field("role", &self.role)
            .field("email", &self.email)
            .field("display_name", &self.display_name)
            .field("city", &self.city)
            .field("active", &self.active)
            .field("removed_at", &self.removed_at)
            .field("language_pref", &self.language_pref)
            .field("created_at", &self.created_at)
            .finish_non_exhaustive()
    }
}

/// Account fields safe to hand to clients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccountView {
    pub id: String,
    pub role: Role,
    pub email: String,
    pub display_name: String,
    pub city: Option<String>,
    pub active: bool,
    pub language_pref: Language,
    pub created_at: DateTime<Utc>,
}

impl UserAccount {
    pub fn view(&self) -> AccountView {
        AccountView {
            id: self.id.clone(),
            role: self.role,
            email: self.email.clone(),
            display_name: self.display_name.clone(),
            city: self.city.clone(),
            active: self.active,
            language_pref: self.language_pref,
            created_at: self.created_at,
        }
    }

    pub fn is_removed(&self) -> bool {
        self.removed_at.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationToken {
    pub token: String,
    pub email: String,
    pub account_id: String,
    pub expires_at: DateTime<Utc>,
    pub consumed: bool,
}

struct NewAccount {
    id: String,
    role: Role,
    email: String,
    display_name: String,
    city: Option<String>,
    active: bool,
    language_pref: Language,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct EmailReservation {
    account_id: String,
}

/// Bearer token issued at login.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuthToken {
    pub token: String,
    pub account_id: String,
    pub role: Role,
    pub city: Option<String>,
    pub issued_at: DateTime<Utc>,
    pub expires_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemovalConfirmation {
    pub account_id: String,
    pub email: String,
    pub mail_dispatched: bool,
}

pub(crate) fn normalize_email(email: &str) -> Result<String> {
    let email = email.trim().to_ascii_lowercase();
    let valid = match email.split_once('@') {
        Some((local, domain)) => {
            !local.is_empty()
                && !domain.contains('@')
                && domain.contains('.')
                && !domain.starts_with('.')
                && !domain.ends_with('.')
                && !email.chars().any(|c| c.is_whitespace() || c.is_control())
        }
        None => false,
    };
    if valid {
        Ok(email)
    } else {
        Err(Error::InvalidEmail)
    }
}

fn check_password(password: &str) -> Result<()> {
    if password.chars().count() < MIN_PASSWORD_LEN {
        return Err(Error::WeakPassword);
    }
    Ok(())
}

impl Platform {
    fn hash_password(&self, password: &str) -> Result<String> {
        let salt = SaltString::encode_b64(&self.random_bytes::<16>())
            .map_err(|e| Error::Internal(e.to_string()))?;
        self.settings
            .password_cost
            .hasher()
            .hash_password(password.as_bytes(), &salt)
            .map(|h| h.to_string())
            .map_err(|e| Error::Internal(e.to_string()))
    }

    fn password_matches(&self, account: &UserAccount, password: &str) -> bool {
        PasswordHash::new(&account.password_digest)
            .map(|parsed| {
                Argon2::default()
                    .verify_password(password.as_bytes(), &parsed)
                    .is_ok()
            })
            .unwrap_or(false)
    }

    fn reserve_email(&self, email: &str, account_id: &str) -> Result<()> {
        let reservation = EmailReservation {
            account_id: account_id.to_string(),
        };
        match self.create(collections::EMAILS, email, &reservation) {
            Ok(_) => Ok(()),
            Err(Error::AlreadyExists(_)) => Err(Error::EmailInUse),
            Err(e) => Err(e),
        }
    }

    fn release_email(&self, email: &str, account_id: &str) -> Result<()> {
        if let Some((reservation, revision)) =
            self.try_load::<EmailReservation>(collections::EMAILS, email)?
        {
            if reservation.account_id == account_id {
                self.store.delete(collections::EMAILS, email, revision)?;
            }
        }
        Ok(())
    }

    fn email_in_use(&self, email: &str) -> Result<bool> {
        Ok(self
            .try_load::<EmailReservation>(collections::EMAILS, email)?
            .is_some())
    }

    /// Writes a fresh account after its email has been reserved.
    fn insert_account(&self, new: NewAccount, password: &str) -> Result<UserAccount> {
        let account = UserAccount {
            id: new.id,
            role: new.role,
            email: new.email,
            display_name: new.display_name,
            city: new.city,
            password_digest: self.hash_password(password)?,
            active: new.active,
            removed_at: None,
            language_pref: new.language_pref,
            created_at: self.now(),
        };
        self.create(collections::ACCOUNTS, &account.id, &account)?;
        Ok(account)
    }

    pub fn get_account(&self, account_id: &str) -> Result<UserAccount> {
        self.try_load::<UserAccount>(collections::ACCOUNTS, account_id)?
            .map(|(a, _)| a)
            .ok_or_else(|| Error::NotFound(format!("account {account_id}")))
    }

    /// The active account behind an operation's `actor_id`.
    pub(crate) fn actor(&self, actor_id: &str) -> Result<UserAccount> {
        match self.try_load::<UserAccount>(collections::ACCOUNTS, actor_id)? {
            Some((account, _)) if account.active => Ok(account),
            _ => Err(Error::denied("unknown or inactive actor")),
        }
    }

    /// Creates the first (or another) central admin. Only reachable from
    /// operator tooling, never from the HTTP surface.
    pub fn bootstrap_admin(&self, email: &str, password: &str) -> Result<UserAccount> {
        let email = normalize_email(email)?;
        check_password(password)?;
        let (id, _) = self.next_id("U")?;
        self.reserve_email(&email, &id)?;
        let result = self.insert_account(
            NewAccount {
                id: id.clone(),
                role: Role::CentralAdmin,
                email: email.clone(),
                display_name: "Central Admin".into(),
                city: None,
                active: true,
                language_pref: self.settings.default_language,
            },
            password,
        );
        if result.is_err() {
            self.release_email(&email, &id)?;
        }
        result
    }

    /// Creates an inactive citizen account and mails a verification token.
    pub fn register_citizen(
        &self,
        email: &str,
        password: &str,
        display_name: &str,
        language_pref: Language,
    ) -> Result<(UserAccount, VerificationToken)> {
        let email = normalize_email(email)?;
        check_password(password)?;
        if self.email_in_use(&email)? {
            return Err(Error::EmailInUse);
        }
        let (id, _) = self.next_id("U")?;
        self.reserve_email(&email, &id)?;
        let created = self.insert_account(
            NewAccount {
                id: id.clone(),
                role: Role::Citizen,
                email: email.clone(),
                display_name: display_name.trim().to_string(),
                city: None,
                active: false,
                language_pref,
            },
            password,
        );
        let account = match created {
            Ok(account) => account,
            Err(e) => {
                self.release_email(&email, &id)?;
                return Err(e);
            }
        };
        let token = VerificationToken {
            token: self.random_token(16),
            email: email.clone(),
            account_id: account.id.clone(),
            expires_at: self.now() + self.settings.verification_ttl,
            consumed: false,
        };
        self.create(collections::VERIFICATIONS, &token.token, &token)?;
        let mail = OutgoingMail {
            to: email,
            subject_key: "mail.verify.subject".into(),
            body_key: "mail.verify.body".into(),
            params: vec![account.display_name.clone(), token.token.clone()],
            language: language_pref,
        };
        self.mailer
            .send(mail)
            .map_err(|e| Error::Internal(e.to_string()))?;
        Ok((account, token))
    }

    pub fn verify_email(&self, token: &str) -> Result<UserAccount> {
        let (mut record, revision): (VerificationToken, u64) = self
            .try_load(collections::VERIFICATIONS, token)?
            .ok_or_else(|| Error::NotFound("verification token".into()))?;
        if record.consumed {
            return Err(Error::AlreadyUsed);
        }
        if self.now() >= record.expires_at {
            return Err(Error::TokenExpired);
        }
        record.consumed = true;
        self.replace(collections::VERIFICATIONS, token, &record, revision)
            .map_err(|e| match e {
                Error::Conflict(_) => Error::AlreadyUsed,
                other => other,
            })?;
        let (mut account, revision): (UserAccount, u64) =
            self.load(collections::ACCOUNTS, &record.account_id)?;
        account.active = true;
        self.replace(collections::ACCOUNTS, &account.id, &account, revision)?;
        Ok(account)
    }

    /// Registers a city employee from an admin-issued credential payload.
    ///
    /// Writes happen in the order: email reservation, credential
    /// redemption, account. A failure undoes the earlier steps, so a
    /// rejected registration never consumes the credential.
    pub fn register_employee(
        &self,
        payload_text: &str,
        email: &str,
        password: &str,
        language_pref: Language,
    ) -> Result<UserAccount> {
        let email = normalize_email(email)?;
        check_password(password)?;
        let (record, _) = self.check_credential(payload_text)?;
        let (id, _) = self.next_id("U")?;
        self.reserve_email(&email, &id)?;
        let redeemed = match self.redeem_credential(payload_text, &id) {
            Ok(r) => r,
            Err(e) => {
                self.release_email(&email, &id)?;
                return Err(e);
            }
        };
        debug_assert_eq!(redeemed.employee_id, record.employee_id);
        let created = self.insert_account(
            NewAccount {
                id: id.clone(),
                role: Role::CityEmployee,
                email: email.clone(),
                display_name: format!("{} {}", redeemed.first_name, redeemed.last_name),
                city: Some(redeemed.city.clone()),
                active: true,
                language_pref,
            },
            password,
        );
        match created {
            Ok(account) => Ok(account),
            Err(e) => {
                self.release_email(&email, &id)?;
                let (mut record, revision) = self.load::<crate::provisioning::CredentialRecord>(
                    collections::CREDENTIALS,
                    &redeemed.employee_id,
                )?;
                record.used = false;
                record.used_by = None;
                self.replace(
                    collections::CREDENTIALS,
                    &record.employee_id,
                    &record,
                    revision,
                )?;
                Err(e)
            }
        }
    }

    pub fn authenticate(&self, email: &str, password: &str) -> Result<AuthToken> {
        let email = normalize_email(email).map_err(|_| Error::InvalidCredentials)?;
        let account = match self.try_load::<EmailReservation>(collections::EMAILS, &email)? {
            Some((reservation, _)) => self
                .try_load::<UserAccount>(collections::ACCOUNTS, &reservation.account_id)?
                .map(|(a, _)| a),
            None => self
                .scan::<UserAccount>(collections::ACCOUNTS, &|body| {
                    body["email"].as_str() == Some(email.as_str())
                })?
                .into_iter()
                .map(|(a, _)| a)
                .find(UserAccount::is_removed),
        };
        let account = account.ok_or(Error::InvalidCredentials)?;
        if !self.password_matches(&account, password) {
            return Err(Error::InvalidCredentials);
        }
        if account.is_removed() {
            return Err(Error::AccountRemoved);
        }
        if !account.active {
            return Err(Error::AccountInactive);
        }
        let issued_at = self.now();
        let token = AuthToken {
            token: self.random_token(32),
            account_id: account.id.clone(),
            role: account.role,
            city: account.city.clone(),
            issued_at,
            expires_at: issued_at + self.settings.token_ttl,
        };
        self.create(collections::SESSIONS, &token.token, &token)?;
        Ok(token)
    }

    /// Resolves a bearer token to its session and the live account.
    pub fn introspect(&self, token: &str) -> Result<(AuthToken, UserAccount)> {
        let (session, _): (AuthToken, u64) = self
            .try_load(collections::SESSIONS, token)?
            .ok_or(Error::Unauthenticated)?;
        if self.now() >= session.expires_at {
            return Err(Error::TokenExpired);
        }
        let account = self
            .actor(&session.account_id)
            .map_err(|_| Error::Unauthenticated)?;
        Ok((session, account))
    }

    pub fn logout(&self, token: &str) -> Result<()> {
        let doc = self.store.get(collections::SESSIONS, token)?;
        self.store
            .delete(collections::SESSIONS, token, doc.revision)?;
        Ok(())
    }

    /// Active central admins, oldest first. For operator tooling.
    pub fn central_admins(&self) -> Result<Vec<UserAccount>> {
        let mut admins: Vec<UserAccount> = self
            .scan::<UserAccount>(collections::ACCOUNTS, &|body| {
                body["role"] == "CentralAdmin" && body["active"] == true
            })?
            .into_iter()
            .map(|(a, _)| a)
            .collect();
        admins.sort_by(|a, b| {
            a.created_at
                .cmp(&b.created_at)
                .then_with(|| a.id.cmp(&b.id))
        });
        Ok(admins)
    }

    pub fn list_employees(&self, actor_id: &str) -> Result<Vec<AccountView>> {
        let actor = self.actor(actor_id)?;
        if actor.role != Role::CentralAdmin {
            return Err(Error::denied("only the central admin lists employees"));
        }
        Ok(self
            .scan::<UserAccount>(collections::ACCOUNTS, &|body| {
                body["role"] == "CityEmployee" && body["active"] == true
            })?
            .into_iter()
            .map(|(a, _)| a.view())
            .collect())
    }

    pub fn remove_employee(
        &self,
        actor_id: &str,
        employee_id: &str,
    ) -> Result<RemovalConfirmation> {
        let actor = self.actor(actor_id)?;
        if actor.role != Role::CentralAdmin {
            return Err(Error::denied("only the central admin removes employees"));
        }
        let (mut target, revision): (UserAccount, u64) = self
            .try_load(collections::ACCOUNTS, employee_id)?
            .filter(|(a, _): &(UserAccount, u64)| !a.is_removed())
            .ok_or_else(|| Error::NotFound(format!("account {employee_id}")))?;
        if target.role != Role::CityEmployee {
            return Err(Error::InvalidTarget);
        }
        target.active = false;
        target.removed_at = Some(self.now());
        self.replace(collections::ACCOUNTS, &target.id, &target, revision)?;
        self.release_email(&target.email, &target.id)?;

        let account_id = target.id.clone();
        for (session, rev) in self.scan::<AuthToken>(collections::SESSIONS, &|body| {
            body["account_id"].as_str() == Some(account_id.as_str())
        })? {
            self.store
                .delete(collections::SESSIONS, &session.token, rev)?;
        }

        let city = target.city.clone().unwrap_or_default();
        self.notify(
            &target.id,
            NotificationKind::AccountRemoved,
            None,
            "notification.account_removed",
            vec![city.clone()],
        )?;
        let sent = self.mailer.send(OutgoingMail {
            to: target.email.clone(),
            subject_key: "mail.removed.subject".into(),
            body_key: "mail.removed.body".into(),
            params: vec![target.display_name.clone(), city],
            language: target.language_pref,
        });
        if let Err(e) = &sent {
            tracing::warn!(account = %target.id, error = %e, "removal mail not delivered");
        }
        Ok(RemovalConfirmation {
            account_id: target.id,
            email: target.email,
            mail_dispatched: sent.is_ok(),
        })
    }
}

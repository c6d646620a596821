//! Single-use employee credentials issued by the central admin.
//!
//! The QR code content is plain text:
//!
//! ```text
//! CS1|<employee_id>|<first_name>|<last_name>|<city>
//! ```
//!
//! Fields are non-empty and contain neither `|` nor control characters.
//! Redemption only succeeds when the full field tuple matches a stored,
//! unused record.

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::platform::{collections, Platform};
use crate::types::Role;

pub const PAYLOAD_VERSION: &str = "CS1";
const SEPARATOR: char = '|';

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PayloadError {
    #[error("{0}")]
    InvalidField(String),
    #[error("{0}")]
    Malformed(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CredentialPayload {
    pub employee_id: String,
    pub first_name: String,
    pub last_name: String,
    pub city: String,
}

fn check_field(name: &str, value: &str) -> Result<(), PayloadError> {
    if value.is_empty() {
        return Err(PayloadError::InvalidField(format!("{name} is empty")));
    }
    if value.contains(SEPARATOR) {
        return Err(PayloadError::InvalidField(format!("{name} contains '|'")));
    }
    if value.chars().any(char::is_control) {
        return Err(PayloadError::InvalidField(format!(
            "{name} contains a control character"
        )));
    }
    Ok(())
}

impl CredentialPayload {
    pub fn new(
        employee_id: impl Into<String>,
        first_name: impl Into<String>,
        last_name: impl Into<String>,
        city: impl Into<String>,
    ) -> Result<Self, PayloadError> {
        let payload = Self {
            employee_id: employee_id.into(),
            first_name: first_name.into(),
            last_name: last_name.into(),
            city: city.into(),
        };
        payload.validate()?;
        Ok(payload)
    }

    fn fields(&self) -> [(&'static str, &str); 4] {
        [
            ("employee_id", &self.employee_id),
            ("first_name", &self.first_name),
            ("last_name", &self.last_name),
            ("city", &self.city),
        ]
    }

    pub fn validate(&self) -> Result<(), PayloadError> {
        self.fields()
            .iter()
            .try_for_each(|(name, value)| check_field(name, value))
    }
}

pub fn encode_payload(payload: &CredentialPayload) -> Result<String, PayloadError> {
    payload.validate()?;
    let mut text = String::from(PAYLOAD_VERSION);
    for (_, value) in payload.fields() {
        text.push(SEPARATOR);
        text.push_str(value);
    }
    Ok(text)
}

pub fn decode_payload(text: &str) -> Result<CredentialPayload, PayloadError> {
    let parts: Vec<&str> = text.split(SEPARATOR).collect();
    if parts[0] != PAYLOAD_VERSION {
        return Err(PayloadError::Malformed(format!(
            "unknown version tag {:?}",
            parts[0]
        )));
    }
    let [_, employee_id, first_name, last_name, city] = parts[..] else {
        return Err(PayloadError::Malformed(format!(
            "expected 5 fields, found {}",
            parts.len()
        )));
    };
    let payload = CredentialPayload {
        employee_id: employee_id.into(),
        first_name: first_name.into(),
        last_name: last_name.into(),
        city: city.into(),
    };
    payload
        .validate()
        .map_err(|e| PayloadError::Malformed(e.to_string()))?;
    Ok(payload)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CredentialRecord {
    pub employee_id: String,
    pub first_name: String,
    pub last_name: String,
    pub city: String,
    pub issued_by: String,
    pub issued_at: DateTime<Utc>,
    pub used: bool,
    pub used_by: Option<String>,
}

impl CredentialRecord {
    pub fn payload(&self) -> CredentialPayload {
        CredentialPayload {
            employee_id: self.employee_id.clone(),
            first_name: self.first_name.clone(),
            last_name: self.last_name.clone(),
            city: self.city.clone(),
        }
    }
}

impl Platform {
    pub fn generate_credential(
        &self,
        actor_id: &str,
        payload: CredentialPayload,
    ) -> Result<(CredentialRecord, String)> {
        let actor = self.actor(actor_id)?;
        if actor.role != Role::CentralAdmin {
            return Err(Error::denied("only the central admin issues credentials"));
        }
        let text = encode_payload(&payload)?;
        let record = CredentialRecord {
            employee_id: payload.employee_id,
            first_name: payload.first_name,
            last_name: payload.last_name,
            city: payload.city,
            issued_by: actor.id,
            issued_at: self.now(),
            used: false,
            used_by: None,
        };
        match self.create(collections::CREDENTIALS, &record.employee_id, &record) {
            Ok(_) => Ok((record, text)),
            Err(Error::AlreadyExists(_)) => Err(Error::DuplicateCredential(record.employee_id)),
            Err(e) => Err(e),
        }
    }

    /// Checks a payload against the issued records without consuming it.
    pub fn check_credential(&self, payload_text: &str) -> Result<(CredentialRecord, u64)> {
        let payload = decode_payload(payload_text)?;
        let (record, revision): (CredentialRecord, u64) = self
            .try_load(collections::CREDENTIALS, &payload.employee_id)?
            .ok_or(Error::UnknownCredential)?;
        if record.payload() != payload {
            return Err(Error::FieldMismatch);
        }
        if record.used {
            return Err(Error::AlreadyUsed);
        }
        Ok((record, revision))
    }

    /// Marks the credential used by `used_by`. Exactly one of any number of
    /// concurrent redemptions of the same payload succeeds.
    pub fn redeem_credential(&self, payload_text: &str, used_by: &str) -> Result<CredentialRecord> {
        loop {
            let (mut record, revision) = self.check_credential(payload_text)?;
            record.used = true;
            record.used_by = Some(used_by.to_string());
            match self.replace(
                collections::CREDENTIALS,
                &record.employee_id,
                &record,
                revision,
            ) {
                Ok(_) => return Ok(record),
                // re-check: the concurrent writer most likely redeemed it
                Err(Error::Conflict(_)) => continue,
                Err(e) => return Err(e),
            }
        }
    }

    pub fn list_credentials(&self, actor_id: &str) -> Result<Vec<CredentialRecord>> {
        let actor = self.actor(actor_id)?;
        if actor.role != Role::CentralAdmin {
            return Err(Error::denied("only the central admin lists credentials"));
        }
        Ok(self
            .scan(collections::CREDENTIALS, &|_| true)?
            .into_iter()
            .map(|(r, _)| r)
            .collect())
    }
}

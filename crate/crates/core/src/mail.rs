use std::sync::Arc;

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};

use crate::i18n::Catalogs;
use crate::types::Language;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutgoingMail {
    pub to: String,
    pub subject_key: String,
    pub body_key: String,
    pub params: Vec<String>,
    pub language: Language,
}

#[derive(Debug, thiserror::Error)]
#[error("mail delivery failed: {0}")]
pub struct MailError(pub String);

/// Outbound mail. Implementations localize `subject_key` / `body_key`
/// through the message catalogs.
pub trait MailSender: Send + Sync {
    fn send(&self, mail: OutgoingMail) -> Result<(), MailError>;
}

/// Keeps every message in memory instead of delivering it.
#[derive(Debug, Default)]
pub struct RecordingMailer {
    sent: Mutex<Vec<OutgoingMail>>,
}

impl RecordingMailer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn sent(&self) -> Vec<OutgoingMail> {
        self.sent.lock().clone()
    }

    pub fn sent_to(&self, address: &str) -> Vec<OutgoingMail> {
        self.sent
            .lock()
            .iter()
            .filter(|m| m.to.eq_ignore_ascii_case(address))
            .cloned()
            .collect()
    }

    pub fn last_to(&self, address: &str) -> Option<OutgoingMail> {
        self.sent_to(address).pop()
    }
}

impl MailSender for RecordingMailer {
    fn send(&self, mail: OutgoingMail) -> Result<(), MailError> {
        self.sent.lock().push(mail);
        Ok(())
    }
}

/// Renders the message and writes it to the tracing log.
pub struct LogMailer {
    catalogs: Arc<Catalogs>,
}

impl LogMailer {
    pub fn new(catalogs: Arc<Catalogs>) -> Self {
        Self { catalogs }
    }
}

impl MailSender for LogMailer {
    fn send(&self, mail: OutgoingMail) -> Result<(), MailError> {
        let render = |key: &str| {
            self.catalogs
                .localize(key, mail.language, &mail.params)
                .map_err(|e| MailError(e.to_string()))
        };
        let subject = render(&mail.subject_key)?;
        let body = render(&mail.body_key)?;
        tracing::info!(to = %mail.to, %subject, %body, "mail dispatched");
        Ok(())
    }
}

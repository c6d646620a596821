use std::cmp::Reverse;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::platform::{collections, Platform};
use crate::types::Language;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NotificationKind {
    StatusUpdate,
    Feedback,
    FakeMarked,
    AccountRemoved,
}

impl NotificationKind {
    pub fn message_key(self) -> &'static str {
        match self {
            NotificationKind::StatusUpdate => "notification.status_update",
            NotificationKind::Feedback => "notification.feedback",
            NotificationKind::FakeMarked => "notification.fake_marked",
            NotificationKind::AccountRemoved => "notification.account_removed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Notification {
    pub id: String,
    pub seq: u64,
    pub recipient_id: String,
    pub kind: NotificationKind,
    pub complaint_id: Option<String>,
    pub message_key: String,
    pub params: Vec<String>,
    pub read: bool,
    pub created_at: DateTime<Utc>,
}

impl Platform {
    pub(crate) fn notify(
        &self,
        recipient_id: &str,
        kind: NotificationKind,
        complaint_id: Option<&str>,
        message_key: &str,
        params: Vec<String>,
    ) -> Result<Notification> {
        if !self.catalogs.contains(message_key) {
            return Err(Error::MissingKey(message_key.to_string()));
        }
        let (id, seq) = self.next_id("N")?;
        let notification = Notification {
            id,
            seq,
            recipient_id: recipient_id.to_string(),
            kind,
            complaint_id: complaint_id.map(str::to_string),
            message_key: message_key.to_string(),
            params,
            read: false,
            created_at: self.now(),
        };
        self.create(collections::NOTIFICATIONS, &notification.id, &notification)?;
        Ok(notification)
    }

    /// Newest first.
    pub fn list_notifications(&self, recipient_id: &str) -> Result<Vec<Notification>> {
        self.actor(recipient_id)?;
        let mut found: Vec<Notification> = self
            .scan(collections::NOTIFICATIONS, &|body| {
                body["recipient_id"].as_str() == Some(recipient_id)
            })?
            .into_iter()
            .map(|(n, _)| n)
            .collect();
        found.sort_by_key(|n| Reverse((n.created_at, n.seq)));
        Ok(found)
    }

    /// Idempotent: a notification that is already read is returned unchanged.
    pub fn mark_notification_read(
        &self,
        recipient_id: &str,
        notification_id: &str,
    ) -> Result<Notification> {
        self.actor(recipient_id)?;
        loop {
            let (mut n, revision): (Notification, u64) = self
                .try_load(collections::NOTIFICATIONS, notification_id)?
                .ok_or_else(|| Error::NotFound(format!("notification {notification_id}")))?;
            if n.recipient_id != recipient_id {
                return Err(Error::denied("notification belongs to another user"));
            }
            if n.read {
                return Ok(n);
            }
            n.read = true;
            match self.replace(collections::NOTIFICATIONS, notification_id, &n, revision) {
                Ok(_) => return Ok(n),
                Err(Error::Conflict(_)) => continue,
                Err(e) => return Err(e),
            }
        }
    }

    pub fn render_notification(&self, n: &Notification, language: Language) -> Result<String> {
        Ok(self
            .catalogs
            .localize(&n.message_key, language, &n.params)?)
    }
}

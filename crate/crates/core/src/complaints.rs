//! Complaint entities and their lifecycle.
//!
//! A complaint starts `Pending` with a model-assigned category. City
//! employees (for their own city) and the central admin move it forward,
//! relabel it, mark it fake or send feedback. Every successful operation
//! appends one [`StatusEvent`]; once a complaint is marked fake it only
//! accepts reads.

use std::cmp::Reverse;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::accounts::UserAccount;
use crate::classifier::{classify, preprocess};
use crate::error::{Error, Result};
use crate::geo::{self, GeoPoint};
use crate::i18n::key_param;
use crate::notifications::NotificationKind;
use crate::platform::{collections, Platform};
use crate::storage::BlobRef;
use crate::types::{Category, CategorySource, Language, Role, Status};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Complaint {
    pub id: String,
    pub seq: u64,
    pub submitter_id: String,
    pub image_ref: BlobRef,
    pub category: Category,
    pub category_source: CategorySource,
    /// Present only while the category comes from the model.
    pub confidence: Option<f64>,
    pub status: Status,
    pub city: String,
    pub location: GeoPoint,
    pub note: Option<String>,
    pub created_at: DateTime<Utc>,
    pub updated_at: DateTime<Utc>,
    pub revision: u64,
}

impl Complaint {
    pub fn is_fake(&self) -> bool {
        self.category == Category::FakeComplaint
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventKind {
    StatusChanged,
    CategoryChanged,
    MarkedFake,
    FeedbackSent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatusEvent {
    pub id: String,
    pub seq: u64,
    pub complaint_id: String,
    pub actor_id: String,
    pub kind: EventKind,
    pub from_value: String,
    pub to_value: String,
    pub timestamp: DateTime<Utc>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComplaintFilter {
    pub city: Option<String>,
    pub status: Option<Status>,
    pub category: Option<Category>,
    pub submitter: Option<String>,
}

impl ComplaintFilter {
    pub fn matches(&self, c: &Complaint) -> bool {
        self.city.as_ref().is_none_or(|city| *city == c.city)
            && self.status.is_none_or(|s| s == c.status)
            && self.category.is_none_or(|cat| cat == c.category)
            && self.submitter.as_ref().is_none_or(|s| *s == c.submitter_id)
    }
}

/// Employees of the complaint's city and the central admin.
pub fn can_manage(actor: &UserAccount, complaint: &Complaint) -> bool {
    match actor.role {
        Role::CentralAdmin => true,
        Role::CityEmployee => actor.city.as_deref() == Some(complaint.city.as_str()),
        Role::Citizen => false,
    }
}

pub fn can_view(actor: &UserAccount, complaint: &Complaint) -> bool {
    can_manage(actor, complaint)
        || (actor.role == Role::Citizen && actor.id == complaint.submitter_id)
}

fn newest_first(complaints: &mut [Complaint]) {
    complaints.sort_by_key(|c| Reverse((c.created_at, c.seq)));
}

impl Platform {
    fn record_event(
        &self,
        complaint_id: &str,
        actor_id: &str,
        kind: EventKind,
        from_value: impl Into<String>,
        to_value: impl Into<String>,
    ) -> Result<StatusEvent> {
        let (id, seq) = self.next_id("E")?;
        let event = StatusEvent {
            id,
            seq,
            complaint_id: complaint_id.to_string(),
            actor_id: actor_id.to_string(),
            kind,
            from_value: from_value.into(),
            to_value: to_value.into(),
            timestamp: self.now(),
        };
        self.create(collections::EVENTS, &event.id, &event)?;
        Ok(event)
    }

    fn load_complaint(&self, complaint_id: &str) -> Result<Complaint> {
        let (mut complaint, revision): (Complaint, u64) = self
            .try_load(collections::COMPLAINTS, complaint_id)?
            .ok_or_else(|| Error::NotFound(format!("complaint {complaint_id}")))?;
        complaint.revision = revision;
        Ok(complaint)
    }

    /// Loads a complaint the actor may change, rejecting fake-locked ones
    /// and stale client revisions.
    fn managed_complaint(
        &self,
        actor: &UserAccount,
        complaint_id: &str,
        expected_revision: Option<u64>,
    ) -> Result<Complaint> {
        let complaint = self.load_complaint(complaint_id)?;
        if !can_manage(actor, &complaint) {
            return Err(Error::denied("complaint belongs to another city"));
        }
        if complaint.is_fake() {
            return Err(Error::FakeLocked(complaint.id));
        }
        if let Some(expected) = expected_revision {
            if expected != complaint.revision {
                return Err(Error::Conflict(format!(
                    "complaint {} is at revision {}, not {expected}",
                    complaint.id, complaint.revision
                )));
            }
        }
        Ok(complaint)
    }

    fn write_complaint(&self, complaint: &mut Complaint) -> Result<()> {
        let current = complaint.revision;
        complaint.revision = current + 1;
        complaint.updated_at = self.now();
        if let Err(e) = self.replace(collections::COMPLAINTS, &complaint.id, complaint, current) {
            complaint.revision = current;
            return Err(e);
        }
        Ok(())
    }

    pub fn submit_complaint(
        &self,
        submitter_id: &str,
        image_bytes: &[u8],
        location: GeoPoint,
        note: Option<&str>,
    ) -> Result<Complaint> {
        let submitter = self.actor(submitter_id)?;
        if submitter.role != Role::Citizen {
            return Err(Error::denied("only citizens submit complaints"));
        }
        if image_bytes.is_empty() {
            return Err(Error::InvalidImage("no image data".into()));
        }
        let place = geo::gate_country(
            &location,
            self.geocoder.as_ref(),
            &self.settings.country_code,
        )?;
        let tensor = preprocess(image_bytes)?;
        let prediction = classify(self.model.as_ref(), &tensor)?;
        let media_type = image::guess_format(image_bytes)
            .map(|f| f.to_mime_type())
            .unwrap_or("application/octet-stream");
        let image_ref = self.store.put_blob(image_bytes, media_type)?;

        let (id, seq) = self.next_id("C")?;
        let now = self.now();
        let complaint = Complaint {
            id,
            seq,
            submitter_id: submitter.id.clone(),
            image_ref,
            category: prediction.label,
            category_source: CategorySource::Model,
            confidence: Some(prediction.confidence()),
            status: Status::Pending,
            city: place.city,
            location,
            note: note
                .map(str::trim)
                .filter(|n| !n.is_empty())
                .map(str::to_string),
            created_at: now,
            updated_at: now,
            revision: 1,
        };
        self.create(collections::COMPLAINTS, &complaint.id, &complaint)?;
        self.record_event(
            &complaint.id,
            &submitter.id,
            EventKind::StatusChanged,
            "",
            Status::Pending.as_str(),
        )?;
        Ok(complaint)
    }

    /// Moves the complaint forward. `feedback` additionally sends a
    /// feedback message to the submitter.
    pub fn transition_status(
        &self,
        actor_id: &str,
        complaint_id: &str,
        new_status: Status,
        feedback: Option<&str>,
        expected_revision: Option<u64>,
    ) -> Result<StatusEvent> {
        let actor = self.actor(actor_id)?;
        let mut complaint = self.managed_complaint(&actor, complaint_id, expected_revision)?;
        let from = complaint.status;
        if !from.can_transition_to(new_status) {
            return Err(Error::InvalidTransition {
                from,
                to: new_status,
            });
        }
        complaint.status = new_status;
        self.write_complaint(&mut complaint)?;
        let event = self.record_event(
            &complaint.id,
            &actor.id,
            EventKind::StatusChanged,
            from.as_str(),
            new_status.as_str(),
        )?;
        self.notify(
            &complaint.submitter_id,
            NotificationKind::StatusUpdate,
            Some(&complaint.id),
            NotificationKind::StatusUpdate.message_key(),
            vec![complaint.id.clone(), key_param(new_status.label_key())],
        )?;
        if let Some(text) = feedback.map(str::trim).filter(|t| !t.is_empty()) {
            self.feedback_unchecked(&actor, &complaint, text)?;
        }
        Ok(event)
    }

    pub fn reassign_category(
        &self,
        actor_id: &str,
        complaint_id: &str,
        new_category: Category,
        expected_revision: Option<u64>,
    ) -> Result<StatusEvent> {
        let actor = self.actor(actor_id)?;
        let mut complaint = self.managed_complaint(&actor, complaint_id, expected_revision)?;
        if !new_category.is_model_class() {
            return Err(Error::InvalidCategory(
                "use the fake-complaint operation to mark fraud".into(),
            ));
        }
        let from = complaint.category;
        complaint.category = new_category;
        complaint.category_source = CategorySource::Authority;
        complaint.confidence = None;
        self.write_complaint(&mut complaint)?;
        self.record_event(
            &complaint.id,
            &actor.id,
            EventKind::CategoryChanged,
            from.as_str(),
            new_category.as_str(),
        )
    }

    /// Relabels the complaint as fake, freezes it and warns the submitter.
    pub fn mark_fake(
        &self,
        actor_id: &str,
        complaint_id: &str,
        expected_revision: Option<u64>,
    ) -> Result<StatusEvent> {
        let actor = self.actor(actor_id)?;
        let mut complaint = self.managed_complaint(&actor, complaint_id, expected_revision)?;
        let from = complaint.category;
        complaint.category = Category::FakeComplaint;
        complaint.category_source = CategorySource::Authority;
        complaint.confidence = None;
        self.write_complaint(&mut complaint)?;
        let event = self.record_event(
            &complaint.id,
            &actor.id,
            EventKind::MarkedFake,
            from.as_str(),
            Category::FakeComplaint.as_str(),
        )?;
        self.notify(
            &complaint.submitter_id,
            NotificationKind::FakeMarked,
            Some(&complaint.id),
            NotificationKind::FakeMarked.message_key(),
            vec![complaint.id.clone()],
        )?;
        Ok(event)
    }

    pub fn send_feedback(
        &self,
        actor_id: &str,
        complaint_id: &str,
        text: &str,
    ) -> Result<StatusEvent> {
        let actor = self.actor(actor_id)?;
        let complaint = self.managed_complaint(&actor, complaint_id, None)?;
        let text = text.trim();
        if text.is_empty() {
            return Err(Error::InvalidRequest("feedback text is empty".into()));
        }
        self.feedback_unchecked(&actor, &complaint, text)
    }

    fn feedback_unchecked(
        &self,
        actor: &UserAccount,
        complaint: &Complaint,
        text: &str,
    ) -> Result<StatusEvent> {
        let event =
            self.record_event(&complaint.id, &actor.id, EventKind::FeedbackSent, "", text)?;
        self.notify(
            &complaint.submitter_id,
            NotificationKind::Feedback,
            Some(&complaint.id),
            NotificationKind::Feedback.message_key(),
            vec![complaint.id.clone(), text.to_string()],
        )?;
        Ok(event)
    }

    /// Citizens see their own complaints, employees their city's, the
    /// central admin everything. Newest first.
    pub fn list_complaints(
        &self,
        actor_id: &str,
        filter: &ComplaintFilter,
    ) -> Result<Vec<Complaint>> {
        let actor = self.actor(actor_id)?;
        let mut found: Vec<Complaint> = self
            .scan::<Complaint>(collections::COMPLAINTS, &|_| true)?
            .into_iter()
            .map(|(mut c, rev)| {
                c.revision = rev;
                c
            })
            .filter(|c| filter.matches(c))
            .filter(|c| match actor.role {
                Role::Citizen => c.submitter_id == actor.id,
                Role::CityEmployee | Role::CentralAdmin => can_manage(&actor, c),
            })
            .collect();
        newest_first(&mut found);
        Ok(found)
    }

    pub fn get_complaint(&self, actor_id: &str, complaint_id: &str) -> Result<Complaint> {
        let actor = self.actor(actor_id)?;
        let complaint = self.load_complaint(complaint_id)?;
        if !can_view(&actor, &complaint) {
            return Err(Error::denied("complaint is outside the caller's scope"));
        }
        Ok(complaint)
    }

    /// Audit trail, oldest first.
    pub fn complaint_events(&self, actor_id: &str, complaint_id: &str) -> Result<Vec<StatusEvent>> {
        self.get_complaint(actor_id, complaint_id)?;
        let mut events: Vec<StatusEvent> = self
            .scan(collections::EVENTS, &|body| {
                body["complaint_id"].as_str() == Some(complaint_id)
            })?
            .into_iter()
            .map(|(e, _)| e)
            .collect();
        events.sort_by_key(|e| (e.timestamp, e.seq));
        Ok(events)
    }

    pub fn complaint_image(&self, actor_id: &str, complaint_id: &str) -> Result<(Vec<u8>, String)> {
        let complaint = self.get_complaint(actor_id, complaint_id)?;
        let bytes = self.store.get_blob(&complaint.image_ref)?;
        Ok((bytes, complaint.image_ref.media_type))
    }

    pub fn map_link(&self, actor_id: &str, complaint_id: &str) -> Result<String> {
        let complaint = self.get_complaint(actor_id, complaint_id)?;
        Ok(geo::map_link(&complaint.location)?)
    }

    /// `mailto:` link to the submitter with a localized subject.
    pub fn contact_link(
        &self,
        actor_id: &str,
        complaint_id: &str,
        language: Language,
    ) -> Result<String> {
        let actor = self.actor(actor_id)?;
        let complaint = self.load_complaint(complaint_id)?;
        if !can_manage(&actor, &complaint) {
            return Err(Error::denied("complaint belongs to another city"));
        }
        let submitter = self
            .get_account(&complaint.submitter_id)
            .ok()
            .filter(|a| a.active)
            .ok_or_else(|| Error::NotFound(format!("submitter of {complaint_id}")))?;
        let subject =
            self.catalogs
                .localize("contact.subject", language, &[complaint.id.as_str()])?;
        Ok(geo::mailto_link(&submitter.email, &subject))
    }

    /// Every complaint in the store, for aggregation.
    pub fn all_complaints(&self) -> Result<Vec<Complaint>> {
        Ok(self
            .scan::<Complaint>(collections::COMPLAINTS, &|_| true)?
            .into_iter()
            .map(|(c, _)| c)
            .collect())
    }
}

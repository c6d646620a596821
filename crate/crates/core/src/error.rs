use crate::classifier::ClassifierError;
use crate::geo::GeoError;
use crate::i18n::CatalogError;
use crate::provisioning::PayloadError;
use crate::storage::StorageError;
use crate::types::Status;

/// Every failure a platform operation can report. Each variant has one
/// stable machine-readable [`code`](Error::code).
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("authentication required")]
    Unauthenticated,
    #[error("token expired")]
    TokenExpired,
    #[error("invalid email or password")]
    InvalidCredentials,
    #[error("account is not verified")]
    AccountInactive,
    #[error("account has been removed")]
    AccountRemoved,
    #[error("permission denied: {0}")]
    PermissionDenied(String),
    #[error("{0} not found")]
    NotFound(String),

    #[error("location is outside {expected} ({country_code})")]
    OutsideCountry {
        country_code: String,
        expected: String,
    },
    #[error("location could not be resolved")]
    UnresolvableLocation,
    #[error("invalid location: {0}")]
    InvalidLocation(String),
    #[error("location has no coordinates")]
    NoCoordinates,
    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("cannot move from {from} to {to}")]
    InvalidTransition { from: Status, to: Status },
    #[error("complaint {0} is marked fake")]
    FakeLocked(String),
    #[error("invalid category: {0}")]
    InvalidCategory(String),
    #[error("stale revision: {0}")]
    Conflict(String),
    #[error("{0} already exists")]
    AlreadyExists(String),

    #[error("credential was not issued")]
    UnknownCredential,
    #[error("already used")]
    AlreadyUsed,
    #[error("credential for employee {0} already issued")]
    DuplicateCredential(String),
    #[error("credential fields do not match the issued record")]
    FieldMismatch,
    #[error("malformed payload: {0}")]
    MalformedPayload(String),
    #[error("invalid payload field: {0}")]
    InvalidPayloadField(String),

    #[error("email already in use")]
    EmailInUse,
    #[error("invalid email address")]
    InvalidEmail,
    #[error("password must be at least 8 characters")]
    WeakPassword,
    #[error("target is not an employee account")]
    InvalidTarget,

    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("model unavailable: {0}")]
    ModelUnavailable(String),
    #[error("missing catalog key {0:?}")]
    MissingKey(String),
    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Every code [`Error::code`] can return.
    pub const CODES: [&'static str; 31] = [
        "Unauthenticated",
        "TokenExpired",
        "InvalidCredentials",
        "AccountInactive",
        "AccountRemoved",
        "PermissionDenied",
        "NotFound",
        "OutsideCountry",
        "UnresolvableLocation",
        "InvalidLocation",
        "NoCoordinates",
        "InvalidImage",
        "InvalidTransition",
        "FakeLocked",
        "InvalidCategory",
        "Conflict",
        "AlreadyExists",
        "UnknownCredential",
        "AlreadyUsed",
        "DuplicateCredential",
        "FieldMismatch",
        "MalformedPayload",
        "InvalidPayloadField",
        "EmailInUse",
        "InvalidEmail",
        "WeakPassword",
        "InvalidTarget",
        "InvalidRequest",
        "ModelUnavailable",
        "MissingKey",
        "Internal",
    ];

    pub fn code(&self) -> &'static str {
        match self {
            Error::Unauthenticated => "Unauthenticated",
            Error::TokenExpired => "TokenExpired",
            Error::InvalidCredentials => "InvalidCredentials",
            Error::AccountInactive => "AccountInactive",
            Error::AccountRemoved => "AccountRemoved",
            Error::PermissionDenied(_) => "PermissionDenied",
            Error::NotFound(_) => "NotFound",
            Error::OutsideCountry { .. } => "OutsideCountry",
            Error::UnresolvableLocation => "UnresolvableLocation",
            Error::InvalidLocation(_) => "InvalidLocation",
            Error::NoCoordinates => "NoCoordinates",
            Error::InvalidImage(_) => "InvalidImage",
            Error::InvalidTransition { .. } => "InvalidTransition",
            Error::FakeLocked(_) => "FakeLocked",
            Error::InvalidCategory(_) => "InvalidCategory",
            Error::Conflict(_) => "Conflict",
            Error::AlreadyExists(_) => "AlreadyExists",
            Error::UnknownCredential => "UnknownCredential",
            Error::AlreadyUsed => "AlreadyUsed",
            Error::DuplicateCredential(_) => "DuplicateCredential",
            Error::FieldMismatch => "FieldMismatch",
            Error::MalformedPayload(_) => "MalformedPayload",
            Error::InvalidPayloadField(_) => "InvalidPayloadField",
            Error::EmailInUse => "EmailInUse",
            Error::InvalidEmail => "InvalidEmail",
            Error::WeakPassword => "WeakPassword",
            Error::InvalidTarget => "InvalidTarget",
            Error::InvalidRequest(_) => "InvalidRequest",
            Error::ModelUnavailable(_) => "ModelUnavailable",
            Error::MissingKey(_) => "MissingKey",
            Error::Internal(_) => "Internal",
        }
    }

    /// Catalog key of the user-facing message for this error.
    pub fn message_key(&self) -> String {
        format!("error.{}", self.code())
    }

    pub(crate) fn denied(reason: impl Into<String>) -> Self {
        Error::PermissionDenied(reason.into())
    }
}

impl From<StorageError> for Error {
    fn from(e: StorageError) -> Self {
        match e {
            StorageError::Conflict { .. } => Error::Conflict(e.to_string()),
            StorageError::AlreadyExists { collection, key } => {
                Error::AlreadyExists(format!("{collection}/{key}"))
            }
            StorageError::NotFound(what) => Error::NotFound(what),
            StorageError::EmptyBlob => Error::InvalidImage("empty image".into()),
            StorageError::CorruptSnapshot(_) | StorageError::Io(_) | StorageError::Encoding(_) => {
                Error::Internal(e.to_string())
            }
        }
    }
}

impl From<ClassifierError> for Error {
    fn from(e: ClassifierError) -> Self {
        match e {
            ClassifierError::InvalidImage(m) => Error::InvalidImage(m),
            ClassifierError::ModelUnavailable(_)
            | ClassifierError::UnsupportedModelKind(_)
            | ClassifierError::CorruptArtifact(_) => Error::ModelUnavailable(e.to_string()),
            other => Error::Internal(other.to_string()),
        }
    }
}

impl From<GeoError> for Error {
    fn from(e: GeoError) -> Self {
        match e {
            GeoError::OutsideCountry {
                country_code,
                expected,
            } => Error::OutsideCountry {
                country_code,
                expected,
            },
            GeoError::UnresolvableLocation => Error::UnresolvableLocation,
            GeoError::InvalidLocation(m) => Error::InvalidLocation(m),
            GeoError::NoCoordinates => Error::NoCoordinates,
            GeoError::InvalidFixture(m) => Error::Internal(m),
        }
    }
}

impl From<CatalogError> for Error {
    fn from(e: CatalogError) -> Self {
        match e {
            CatalogError::MissingKey(k) => Error::MissingKey(k),
            CatalogError::Malformed { .. } => Error::Internal(e.to_string()),
        }
    }
}

impl From<PayloadError> for Error {
    fn from(e: PayloadError) -> Self {
        match e {
            PayloadError::InvalidField(m) => Error::InvalidPayloadField(m),
            PayloadError::Malformed(m) => Error::MalformedPayload(m),
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Internal(format!("record encoding: {e}"))
    }
}

//! Location validation through a pluggable geocoder, and the map / mail
//! link builders used by the triage views.

use std::path::Path;

use percent_encoding::{utf8_percent_encode, AsciiSet, NON_ALPHANUMERIC};
use serde::{Deserialize, Serialize};

pub const DEFAULT_COUNTRY: &str = "BD";

const BUILTIN_FIXTURE: &str = include_str!("../data/geocoder/cities.json");

/// RFC 3986 unreserved characters stay literal, everything else is encoded.
const URL_COMPONENT: &AsciiSet = &NON_ALPHANUMERIC
    .remove(b'-')
    .remove(b'.')
    .remove(b'_')
    .remove(b'~');

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeoError {
    #[error("location resolves to {country_code}, outside {expected}")]
    OutsideCountry {
        country_code: String,
        expected: String,
    },
    #[error("no geocoder answer for the location")]
    UnresolvableLocation,
    #[error("invalid location: {0}")]
    InvalidLocation(String),
    #[error("location has no coordinates")]
    NoCoordinates,
    #[error("invalid geocoder fixture: {0}")]
    InvalidFixture(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LocationSource {
    Auto,
    Manual,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
struct RawGeoPoint {
    #[serde(default)]
    latitude: Option<f64>,
    #[serde(default)]
    longitude: Option<f64>,
    source: LocationSource,
    #[serde(default)]
    manual_text: Option<String>,
}

/// Either legal coordinates, or a manual point carrying a place name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGeoPoint")]
pub struct GeoPoint {
    latitude: Option<f64>,
    longitude: Option<f64>,
    source: LocationSource,
    #[serde(skip_serializing_if = "Option::is_none")]
    manual_text: Option<String>,
}

impl TryFrom<RawGeoPoint> for GeoPoint {
    type Error = GeoError;

    fn try_from(raw: RawGeoPoint) -> Result<Self, GeoError> {
        let manual_text = raw
            .manual_text
            .map(|t| t.trim().to_string())
            .filter(|t| !t.is_empty());
        match (raw.latitude, raw.longitude) {
            (Some(lat), Some(lon)) => {
                if !(-90.0..=90.0).contains(&lat) {
                    return Err(GeoError::InvalidLocation(format!(
                        "latitude {lat} out of range"
                    )));
                }
                if !(-180.0..=180.0).contains(&lon) {
                    return Err(GeoError::InvalidLocation(format!(
                        "longitude {lon} out of range"
                    )));
                }
            }
            (None, None) => {
                if raw.source != LocationSource::Manual || manual_text.is_none() {
                    return Err(GeoError::InvalidLocation(
                        "coordinates or a manual place name are required".into(),
                    ));
                }
            }
            _ => {
                return Err(GeoError::InvalidLocation(
                    "latitude and longitude must be given together".into(),
                ))
            }
        }
        Ok(GeoPoint {
            latitude: raw.latitude,
            longitude: raw.longitude,
            source: raw.source,
            manual_text,
        })
    }
}

impl GeoPoint {
    /// Sensor-provided coordinates.
    pub fn auto(latitude: f64, longitude: f64) -> Result<Self, GeoError> {
        RawGeoPoint {
            latitude: Some(latitude),
            longitude: Some(longitude),
            source: LocationSource::Auto,
            manual_text: None,
        }
        .try_into()
    }

    /// A user-typed place with no coordinates.
    pub fn manual(text: &str) -> Result<Self, GeoError> {
        RawGeoPoint {
            latitude: None,
            longitude: None,
            source: LocationSource::Manual,
            manual_text: Some(text.to_string()),
        }
        .try_into()
    }

    /// A user-picked point on a map.
    pub fn manual_at(latitude: f64, longitude: f64, text: Option<&str>) -> Result<Self, GeoError> {
        RawGeoPoint {
            latitude: Some(latitude),
            longitude: Some(longitude),
            source: LocationSource::Manual,
            manual_text: text.map(str::to_string),
        }
        .try_into()
    }

    pub fn coordinates(&self) -> Option<(f64, f64)> {
        self.latitude.zip(self.longitude)
    }

    pub fn source(&self) -> LocationSource {
        self.source
    }

    pub fn manual_text(&self) -> Option<&str> {
        self.manual_text.as_deref()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResolvedPlace {
    pub country_code: String,
    pub city: String,
}

pub trait Geocoder: Send + Sync {
    fn reverse(&self, latitude: f64, longitude: f64) -> Option<ResolvedPlace>;

    fn lookup_city(&self, name: &str) -> Option<ResolvedPlace>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CityBox {
    pub city: String,
    pub min_lat: f64,
    pub max_lat: f64,
    pub min_lon: f64,
    pub max_lon: f64,
    pub country_code: String,
}

impl CityBox {
    pub fn contains(&self, latitude: f64, longitude: f64) -> bool {
        (self.min_lat..=self.max_lat).contains(&latitude)
            && (self.min_lon..=self.max_lon).contains(&longitude)
    }

    fn place(&self) -> ResolvedPlace {
        ResolvedPlace {
            country_code: self.country_code.clone(),
            city: self.city.clone(),
        }
    }
}

/// Geocoder backed by axis-aligned bounding boxes; the first box in file
/// order wins when boxes overlap.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxGeocoder {
    boxes: Vec<CityBox>,
}

impl BoxGeocoder {
    pub fn new(boxes: Vec<CityBox>) -> Result<Self, GeoError> {
        for b in &boxes {
            let ok = !b.city.trim().is_empty()
                && b.country_code.len() == 2
                && b.country_code.chars().all(|c| c.is_ascii_alphabetic())
                && -90.0 <= b.min_lat
                && b.min_lat <= b.max_lat
                && b.max_lat <= 90.0
                && -180.0 <= b.min_lon
                && b.min_lon <= b.max_lon
                && b.max_lon <= 180.0;
            if !ok {
                return Err(GeoError::InvalidFixture(format!("bad entry {b:?}")));
            }
        }
        Ok(Self { boxes })
    }

    pub fn from_json(text: &str) -> Result<Self, GeoError> {
        let boxes =
            serde_json::from_str(text).map_err(|e| GeoError::InvalidFixture(e.to_string()))?;
        Self::new(boxes)
    }

    pub fn from_file(path: &Path) -> Result<Self, GeoError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| GeoError::InvalidFixture(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// The bundled table of Bangladeshi city boxes (plus one neighbouring
    /// foreign city).
    pub fn builtin() -> Self {
        Self::from_json(BUILTIN_FIXTURE).expect("bundled geocoder fixture")
    }

    pub fn boxes(&self) -> &[CityBox] {
        &self.boxes
    }
}

impl Geocoder for BoxGeocoder {
    fn reverse(&self, latitude: f64, longitude: f64) -> Option<ResolvedPlace> {
        self.boxes
            .iter()
            .find(|b| b.contains(latitude, longitude))
            .map(CityBox::place)
    }

    fn lookup_city(&self, name: &str) -> Option<ResolvedPlace> {
        let name = name.trim();
        self.boxes
            .iter()
            .find(|b| b.city.eq_ignore_ascii_case(name))
            .map(CityBox::place)
    }
}

/// Resolves the point and accepts it only inside `country_code`.
pub fn gate_country(
    point: &GeoPoint,
    geocoder: &dyn Geocoder,
    country_code: &str,
) -> Result<ResolvedPlace, GeoError> {
    let place = match (point.coordinates(), point.manual_text()) {
        (Some((lat, lon)), _) => geocoder.reverse(lat, lon),
        (None, Some(text)) => geocoder.lookup_city(text),
        (None, None) => None,
    }
    .ok_or(GeoError::UnresolvableLocation)?;
    if !place.country_code.eq_ignore_ascii_case(country_code) {
        return Err(GeoError::OutsideCountry {
            country_code: place.country_code,
            expected: country_code.to_string(),
        });
    }
    if place.city.trim().is_empty() {
        return Err(GeoError::UnresolvableLocation);
    }
    Ok(place)
}

pub fn map_link(point: &GeoPoint) -> Result<String, GeoError> {
    let (lat, lon) = point.coordinates().ok_or(GeoError::NoCoordinates)?;
    // adding 0.0 turns -0.0 into 0.0 so zero never prints with a sign
    Ok(format!(
        "https://www.google.com/maps/search/?api=1&query={:.6},{:.6}",
        lat + 0.0,
        lon + 0.0
    ))
}

/// `mailto:` link with an already-localized subject line.
pub fn mailto_link(email: &str, subject: &str) -> String {
    format!(
        "mailto:{email}?subject={}",
        utf8_percent_encode(subject, URL_COMPONENT)
    )
}

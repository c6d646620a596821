//! Fixtures for tests, demos and local development: solid-color photos,
//! a color-centroid model that recognizes them, city coordinates and a
//! deterministic in-memory platform.

use std::io::Cursor;
use std::sync::Arc;

use image::{ImageFormat, Rgb, RgbImage};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::accounts::PasswordCost;
use crate::classifier::{
    CentroidModel, ImageTensor, Model, TrainingConfig, DEFAULT_BETA, INPUT_CHANNELS, INPUT_SIZE,
};
use crate::clock::SteppingClock;
use crate::error::Result;
use crate::geo::{BoxGeocoder, GeoPoint, Geocoder};
use crate::mail::RecordingMailer;
use crate::platform::{Platform, Settings};
use crate::provisioning::CredentialPayload;
use crate::storage::MemoryStore;
use crate::types::{Category, Language, Status};

pub const PASSWORD: &str = "correct-horse";
pub const ADMIN_EMAIL: &str = "admin@city.gov.bd";

/// Photo color per model class, in model index order.
pub const CLASS_COLORS: [[u8; 3]; 4] = [
    [128, 128, 128], // DamagedRoad: asphalt gray
    [30, 60, 200],   // Flood: water blue
    [40, 170, 40],   // Trash: green
    [190, 90, 40],   // HomelessPeople: brown
];

pub fn class_color(category: Category) -> [u8; 3] {
    CLASS_COLORS[category.model_index().expect("model class")]
}

/// 16x16 PNG filled with one color.
pub fn solid_png(rgb: [u8; 3]) -> Vec<u8> {
    let img = RgbImage::from_pixel(16, 16, Rgb(rgb));
    let mut out = Cursor::new(Vec::new());
    img.write_to(&mut out, ImageFormat::Png)
        .expect("png encoding");
    out.into_inner()
}

pub fn photo_of(category: Category) -> Vec<u8> {
    solid_png(class_color(category))
}

/// Centroid model whose centroids are [`CLASS_COLORS`].
pub fn color_model() -> Arc<dyn Model> {
    Arc::new(color_centroid_model())
}

pub fn color_centroid_model() -> CentroidModel {
    let centroids = CLASS_COLORS.map(|c| c.map(|v| f64::from(v) / 255.0));
    CentroidModel::new(centroids, DEFAULT_BETA, TrainingConfig::default())
}

/// Input tensor of the class color with independent Gaussian noise of
/// standard deviation `sigma` on every channel value, clamped to [0, 1].
/// The same `seed` always gives the same tensor.
pub fn noisy_color_tensor(category: Category, sigma: f64, seed: u64) -> ImageTensor {
    let base = class_color(category).map(|v| f64::from(v) / 255.0);
    let noise = Normal::new(0.0, sigma).expect("finite sigma");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Vec::with_capacity(INPUT_SIZE * INPUT_SIZE * INPUT_CHANNELS);
    for _ in 0..INPUT_SIZE * INPUT_SIZE {
        for channel in base {
            data.push((channel + noise.sample(&mut rng)).clamp(0.0, 1.0) as f32);
        }
    }
    ImageTensor::new(data).expect("tensor of input size")
}

/// Center of the city's box in the builtin geocoder.
pub fn city_point(city: &str) -> GeoPoint {
    let geocoder = BoxGeocoder::builtin();
    let b = geocoder
        .boxes()
        .iter()
        .find(|b| b.city == city)
        .unwrap_or_else(|| panic!("no builtin box for {city}"));
    GeoPoint::auto((b.min_lat + b.max_lat) / 2.0, (b.min_lon + b.max_lon) / 2.0)
        .expect("box center is a valid point")
}

/// Bangladeshi cities in the builtin geocoder.
pub fn bd_cities() -> Vec<String> {
    BoxGeocoder::builtin()
        .boxes()
        .iter()
        .filter(|b| b.country_code == "BD")
        .map(|b| b.city.clone())
        .collect()
}

/// An in-memory platform with a recording mailer, a stepping clock, a
/// fixed random seed and cheap password hashing.
pub struct Harness {
    pub platform: Arc<Platform>,
    pub store: Arc<MemoryStore>,
    pub mailer: Arc<RecordingMailer>,
    pub clock: Arc<SteppingClock>,
    pub admin_id: String,
}

impl Harness {
    pub fn new() -> Self {
        Self::with_seed(7)
    }

    pub fn with_seed(seed: u64) -> Self {
        let store = Arc::new(MemoryStore::new());
        let mailer = Arc::new(RecordingMailer::new());
        let clock = Arc::new(SteppingClock::default());
        let platform = Platform::builder(store.clone(), color_model())
            .geocoder(Arc::new(BoxGeocoder::builtin()) as Arc<dyn Geocoder>)
            .mailer(mailer.clone())
            .clock(clock.clone())
            .settings(Settings {
                password_cost: PasswordCost::Fast,
                ..Settings::default()
            })
            .seed(seed)
            .build();
        let admin_id = platform
            .bootstrap_admin(ADMIN_EMAIL, PASSWORD)
            .expect("bootstrap admin")
            .id;
        Self {
            platform: Arc::new(platform),
            store,
            mailer,
            clock,
            admin_id,
        }
    }

    /// Registers and verifies a citizen; returns the account id.
    pub fn citizen(&self, email: &str) -> Result<String> {
        let (account, token) =
            self.platform
                .register_citizen(email, PASSWORD, "Test Citizen", Language::En)?;
        self.platform.verify_email(&token.token)?;
        Ok(account.id)
    }

    /// Issues a credential for `city` and registers the employee with it.
    pub fn employee(&self, employee_id: &str, city: &str) -> Result<String> {
        let payload = CredentialPayload::new(employee_id, "Emp", employee_id, city)?;
        let (_, text) = self.platform.generate_credential(&self.admin_id, payload)?;
        let email = format!("{}@city.gov.bd", employee_id.to_lowercase());
        Ok(self
            .platform
            .register_employee(&text, &email, PASSWORD, Language::En)?
            .id)
    }

    /// Submits a photo the color model labels `category` from the center of `city`.
    pub fn submit(&self, citizen_id: &str, city: &str, category: Category) -> Result<String> {
        Ok(self
            .platform
            .submit_complaint(citizen_id, &photo_of(category), city_point(city), None)?
            .id)
    }

    /// Moves a fresh complaint to `status` as the admin.
    pub fn advance(&self, complaint_id: &str, status: Status) -> Result<()> {
        if status != Status::Pending {
            self.platform
                .transition_status(&self.admin_id, complaint_id, status, None, None)?;
        }
        Ok(())
    }
}

impl Default for Harness {
    fn default() -> Self {
        Self::new()
    }
}

//! Service configuration: a TOML file, overridden field by field by
//! `CITYSOLUTION_*` environment variables.

use std::fmt;
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};

use citysolution_core::Language;
use serde::Deserialize;

pub const ENV_PREFIX: &str = "CITYSOLUTION_";

#[derive(Debug)]
pub enum ConfigError {
    Io(PathBuf, std::io::Error),
    Parse(String),
    Invalid(String),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Io(path, e) => write!(f, "cannot read {}: {e}", path.display()),
            ConfigError::Parse(m) => write!(f, "invalid configuration: {m}"),
            ConfigError::Invalid(m) => write!(f, "invalid configuration: {m}"),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq)]
pub struct ApiConfig {
    pub bind: IpAddr,
    pub port: u16,
    pub country_code: String,
    pub geocoder_path: PathBuf,
    pub model_path: PathBuf,
    /// Created on first start if missing.
    pub snapshot_path: PathBuf,
    pub token_ttl_secs: i64,
    pub default_language: Language,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    bind: Option<String>,
    port: Option<i64>,
    country_code: Option<String>,
    geocoder_path: Option<PathBuf>,
    model_path: Option<PathBuf>,
    snapshot_path: Option<PathBuf>,
    token_ttl_secs: Option<i64>,
    default_language: Option<String>,
}

fn required<T>(value: Option<T>, name: &str) -> Result<T, ConfigError> {
    value.ok_or_else(|| ConfigError::Invalid(format!("{name} is required")))
}

fn parse_env<T: std::str::FromStr>(name: &str, value: &str) -> Result<T, ConfigError> {
    value
        .trim()
        .parse()
        .map_err(|_| ConfigError::Invalid(format!("{ENV_PREFIX}{name}={value:?} is not valid")))
}

impl ApiConfig {
    /// Reads `path` (if given) and applies overrides from the process environment.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let text = match path {
            Some(p) => Some(std::fs::read_to_string(p).map_err(|e| ConfigError::Io(p.into(), e))?),
            None => None,
        };
        let base = path.and_then(Path::parent);
        Self::from_sources(text.as_deref(), std::env::vars(), base)
    }

    /// Relative paths in the file resolve against `base_dir`; paths from
    /// the environment are taken as given.
    pub fn from_sources(
        toml_text: Option<&str>,
        env: impl IntoIterator<Item = (String, String)>,
        base_dir: Option<&Path>,
    ) -> Result<Self, ConfigError> {
        let mut raw: RawConfig = match toml_text {
            Some(text) => toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?,
            None => RawConfig::default(),
        };
        if let Some(base) = base_dir {
            for p in [
                &mut raw.geocoder_path,
                &mut raw.model_path,
                &mut raw.snapshot_path,
            ]
            .into_iter()
            .flatten()
            {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        for (key, value) in env {
            let Some(name) = key.strip_prefix(ENV_PREFIX) else {
                continue;
            };
            match name {
                "BIND" => raw.bind = Some(value),
                "PORT" => raw.port = Some(parse_env(name, &value)?),
                "COUNTRY_CODE" => raw.country_code = Some(value),
                "GEOCODER_PATH" => raw.geocoder_path = Some(value.into()),
                "MODEL_PATH" => raw.model_path = Some(value.into()),
                "SNAPSHOT_PATH" => raw.snapshot_path = Some(value.into()),
                "TOKEN_TTL_SECS" => raw.token_ttl_secs = Some(parse_env(name, &value)?),
                "DEFAULT_LANGUAGE" => raw.default_language = Some(value),
                // other CITYSOLUTION_ variables (e.g. log filters) are not config fields
                _ => {}
            }
        }
        Self::from_raw(raw)
    }

    fn from_raw(raw: RawConfig) -> Result<Self, ConfigError> {
        let bind_text = raw.bind.unwrap_or_else(|| "127.0.0.1".into());
        let bind = bind_text.trim().parse().map_err(|_| {
            ConfigError::Invalid(format!("bind address {bind_text:?} is not an IP address"))
        })?;
        let port = raw.port.unwrap_or(8080);
        let port = u16::try_from(port)
            .ok()
            .filter(|p| *p != 0)
            .ok_or_else(|| ConfigError::Invalid(format!("port {port} outside 1..=65535")))?;
        let country_code = raw
            .country_code
            .unwrap_or_else(|| "BD".into())
            .trim()
            .to_uppercase();
        if country_code.len() != 2 || !country_code.chars().all(|c| c.is_ascii_alphabetic()) {
            return Err(ConfigError::Invalid(format!(
                "country_code {country_code:?} is not an ISO 3166 alpha-2 code"
            )));
        }
        let token_ttl_secs = raw.token_ttl_secs.unwrap_or(24 * 60 * 60);
        if token_ttl_secs <= 0 {
            return Err(ConfigError::Invalid(
                "token_ttl_secs must be positive".into(),
            ));
        }
        let default_language = match raw.default_language {
            Some(tag) => Language::parse_tag(&tag)
                .ok_or_else(|| ConfigError::Invalid(format!("unsupported language {tag:?}")))?,
            None => Language::En,
        };
        Ok(Self {
            bind,
            port,
            country_code,
            geocoder_path: required(raw.geocoder_path, "geocoder_path")?,
            model_path: required(raw.model_path, "model_path")?,
            snapshot_path: required(raw.snapshot_path, "snapshot_path")?,
            token_ttl_secs,
            default_language,
        })
    }

    /// Startup checks: the geocoder fixture and model artifact must exist,
    /// the snapshot's directory must exist.
    pub fn validate_paths(&self) -> Result<(), ConfigError> {
        for (name, path) in [
            ("geocoder_path", &self.geocoder_path),
            ("model_path", &self.model_path),
        ] {
            if !path.is_file() {
                return Err(ConfigError::Invalid(format!(
                    "{name} {} does not exist",
                    path.display()
                )));
            }
        }
        let dir = match self.snapshot_path.parent() {
            Some(d) if !d.as_os_str().is_empty() => d,
            _ => Path::new("."),
        };
        if !dir.is_dir() {
            return Err(ConfigError::Invalid(format!(
                "snapshot directory {} does not exist",
                dir.display()
            )));
        }
        Ok(())
    }

    pub fn socket_addr(&self) -> SocketAddr {
        SocketAddr::new(self.bind, self.port)
    }
}

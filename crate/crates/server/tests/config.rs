use std::path::Path;

use citysolution_core::Language;
use citysolution_server::config::{ApiConfig, ConfigError};

const MINIMAL: &str = r#"
geocoder_path = "geo/cities.json"
model_path = "model.json"
snapshot_path = "state/store.snapshot"
"#;

fn env(pairs: &[(&str, &str)]) -> Vec<(String, String)> {
    pairs
        .iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

#[test]
fn defaults_and_relative_paths() {
    let c = ApiConfig::from_sources(Some(MINIMAL), env(&[]), Some(Path::new("/srv/cs"))).unwrap();
    assert_eq!(c.socket_addr().to_string(), "127.0.0.1:8080");
    assert_eq!(c.country_code, "BD");
    assert_eq!(c.token_ttl_secs, 86_400);
    assert_eq!(c.default_language, Language::En);
    assert_eq!(c.geocoder_path, Path::new("/srv/cs/geo/cities.json"));
    assert_eq!(c.snapshot_path, Path::new("/srv/cs/state/store.snapshot"));
}

#[test]
fn environment_overrides_the_file() {
    let c = ApiConfig::from_sources(
        Some(MINIMAL),
        env(&[
            ("CITYSOLUTION_PORT", "9000"),
            ("CITYSOLUTION_BIND", "0.0.0.0"),
            ("CITYSOLUTION_DEFAULT_LANGUAGE", "bn"),
            ("CITYSOLUTION_MODEL_PATH", "/models/m.json"),
            ("CITYSOLUTION_TOKEN_TTL_SECS", "60"),
            ("CITYSOLUTION_COUNTRY_CODE", "np"),
            ("CITYSOLUTION_LOG", "debug"),
            ("PORT", "1"),
        ]),
        None,
    )
    .unwrap();
    assert_eq!(c.socket_addr().to_string(), "0.0.0.0:9000");
    assert_eq!(c.default_language, Language::Bn);
    assert_eq!(c.model_path, Path::new("/models/m.json"));
    assert_eq!(c.token_ttl_secs, 60);
    assert_eq!(c.country_code, "NP");
}

#[test]
fn environment_alone_is_enough() {
    let c = ApiConfig::from_sources(
        None,
        env(&[
            ("CITYSOLUTION_GEOCODER_PATH", "g.json"),
            ("CITYSOLUTION_MODEL_PATH", "m.json"),
            ("CITYSOLUTION_SNAPSHOT_PATH", "s.snap"),
        ]),
        None,
    )
    .unwrap();
    assert_eq!(c.geocoder_path, Path::new("g.json"));
}

#[test]
fn invalid_values_are_rejected() {
    let bad = |text: &str, vars: &[(&str, &str)]| {
        ApiConfig::from_sources(Some(text), env(vars), None).unwrap_err()
    };
    for port in ["0", "65536", "-1", "http"] {
        assert!(
            matches!(
                bad(MINIMAL, &[("CITYSOLUTION_PORT", port)]),
                ConfigError::Invalid(_)
            ),
            "{port}"
        );
    }
    assert!(matches!(
        bad(MINIMAL, &[("CITYSOLUTION_BIND", "localhost")]),
        ConfigError::Invalid(_)
    ));
    assert!(matches!(
        bad(MINIMAL, &[("CITYSOLUTION_DEFAULT_LANGUAGE", "fr")]),
        ConfigError::Invalid(_)
    ));
    assert!(matches!(
        bad(MINIMAL, &[("CITYSOLUTION_COUNTRY_CODE", "BGD")]),
        ConfigError::Invalid(_)
    ));
    assert!(matches!(
        bad(MINIMAL, &[("CITYSOLUTION_TOKEN_TTL_SECS", "0")]),
        ConfigError::Invalid(_)
    ));
    assert!(matches!(
        bad("model_path = \"m\"", &[]),
        ConfigError::Invalid(_)
    ));
    assert!(matches!(bad("colour = 1", &[]), ConfigError::Parse(_)));
    assert!(matches!(
        bad("port = 65535\nport = 1", &[]),
        ConfigError::Parse(_)
    ));
    let edge = ApiConfig::from_sources(Some(MINIMAL), env(&[("CITYSOLUTION_PORT", "65535")]), None)
        .unwrap();
    assert_eq!(edge.port, 65535);
}

#[test]
fn startup_paths_must_exist() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("cities.json"), "[]").unwrap();
    let text = "geocoder_path = \"cities.json\"\nmodel_path = \"model.json\"\nsnapshot_path = \"store.snapshot\"\n";
    let path = dir.path().join("cs.toml");
    std::fs::write(&path, text).unwrap();
    let c = ApiConfig::load(Some(&path)).unwrap();
    let err = c.validate_paths().unwrap_err().to_string();
    assert!(err.contains("model_path"), "{err}");
    std::fs::write(dir.path().join("model.json"), "{}").unwrap();
    c.validate_paths().unwrap();

    let mut missing_dir = c.clone();
    missing_dir.snapshot_path = dir.path().join("nowhere/store.snapshot");
    assert!(missing_dir.validate_paths().is_err());
    assert!(matches!(
        ApiConfig::load(Some(&dir.path().join("absent.toml"))),
        Err(ConfigError::Io(..))
    ));
}

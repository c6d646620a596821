//! English and Bengali message catalogs.
//!
//! Templates use positional placeholders `{0}`, `{1}`, ... A parameter that
//! starts with `@` names another catalog key and is localized before
//! substitution, so `["C-3", "@status.solved"]` renders the status in the
//! requested language.

use std::collections::{BTreeMap, BTreeSet};

use crate::types::Language;

const EN_CATALOG: &str = include_str!("../data/i18n/en.json");
const BN_CATALOG: &str = include_str!("../data/i18n/bn.json");

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CatalogError {
    #[error("message key {0:?} is missing from every catalog")]
    MissingKey(String),
    #[error("catalog {language} is malformed: {reason}")]
    Malformed {
        language: &'static str,
        reason: String,
    },
}

/// Prefix marking a parameter as a nested catalog key.
pub const KEY_PARAM_PREFIX: char = '@';

pub fn key_param(key: &str) -> String {
    format!("{KEY_PARAM_PREFIX}{key}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct MessageCatalog {
    pub language: Language,
    entries: BTreeMap<String, String>,
}

impl MessageCatalog {
    pub fn from_json(language: Language, text: &str) -> Result<Self, CatalogError> {
        let entries: BTreeMap<String, String> =
            serde_json::from_str(text).map_err(|e| CatalogError::Malformed {
                language: language.tag(),
                reason: e.to_string(),
            })?;
        Ok(Self { language, entries })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn keys(&self) -> BTreeSet<&str> {
        self.entries.keys().map(String::as_str).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Catalogs {
    en: MessageCatalog,
    bn: MessageCatalog,
}

impl Catalogs {
    pub fn new(en: MessageCatalog, bn: MessageCatalog) -> Self {
        Self { en, bn }
    }

    /// The catalogs shipped with the crate.
    pub fn builtin() -> Self {
        Self {
            en: MessageCatalog::from_json(Language::En, EN_CATALOG).expect("bundled en catalog"),
            bn: MessageCatalog::from_json(Language::Bn, BN_CATALOG).expect("bundled bn catalog"),
        }
    }

    pub fn catalog(&self, language: Language) -> &MessageCatalog {
        match language {
            Language::En => &self.en,
            Language::Bn => &self.bn,
        }
    }

    pub fn contains(&self, key: &str) -> bool {
        self.en.get(key).is_some() || self.bn.get(key).is_some()
    }

    /// Keys present in one catalog but not the other.
    pub fn key_differences(&self) -> BTreeSet<String> {
        self.en
            .keys()
            .symmetric_difference(&self.bn.keys())
            .map(|k| k.to_string())
            .collect()
    }

    fn template(&self, key: &str, language: Language) -> Result<&str, CatalogError> {
        self.catalog(language)
            .get(key)
            .or_else(|| self.en.get(key))
            .ok_or_else(|| CatalogError::MissingKey(key.to_string()))
    }

    /// Renders `key` in `language`, falling back to English when the key is
    /// only present there.
    pub fn localize<S: AsRef<str>>(
        &self,
        key: &str,
        language: Language,
        params: &[S],
    ) -> Result<String, CatalogError> {
        let template = self.template(key, language)?;
        let rendered: Vec<String> = params
            .iter()
            .map(|p| match p.as_ref().strip_prefix(KEY_PARAM_PREFIX) {
                Some(nested) => self.template(nested, language).map(str::to_string),
                None => Ok(p.as_ref().to_string()),
            })
            .collect::<Result<_, _>>()?;
        Ok(substitute(template, &rendered))
    }
}

fn substitute(template: &str, params: &[String]) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let close = after.find('}');
        let index = close.and_then(|c| after[..c].parse::<usize>().ok());
        match (close, index.and_then(|i| params.get(i))) {
            (Some(c), Some(value)) => {
                out.push_str(value);
                rest = &after[c + 1..];
            }
            _ => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}

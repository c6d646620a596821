//! Operator commands.

use std::error::Error as StdError;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::Duration;
use citysolution_core::accounts::PasswordCost;
use citysolution_core::classifier::{
    classify, evaluate_predictions, load_dataset_dir, load_model, preprocess, split_dataset,
    train_baseline, LabeledItem, PredictionFile, TrainingConfig,
};
use citysolution_core::clock::SystemClock;
use citysolution_core::geo::{BoxGeocoder, Geocoder};
use citysolution_core::i18n::Catalogs;
use citysolution_core::mail::LogMailer;
use citysolution_core::provisioning::CredentialPayload;
use citysolution_core::storage::{DocumentStore, FileStore};
use citysolution_core::{Error, Platform, Settings};
use clap::{Args, Parser, Subcommand};

use crate::api::{router, AppState};
use crate::config::ApiConfig;

pub type CliResult<T = ()> = Result<T, Box<dyn StdError + Send + Sync>>;

#[derive(Debug, Parser)]
#[command(name = "citysolution", version, about = "Civic complaint service")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct ConfigArg {
    /// TOML configuration file; CITYSOLUTION_* variables override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the HTTP service.
    Serve(ConfigArg),
    /// Create the central admin account.
    BootstrapAdmin {
        #[arg(long)]
        email: String,
        #[arg(long)]
        password: String,
        #[command(flatten)]
        config: ConfigArg,
    },
    /// Issue a single-use employee credential and print its payload text.
    GenCredential {
        #[arg(long)]
        id: String,
        #[arg(long)]
        first: String,
        #[arg(long)]
        last: String,
        #[arg(long)]
        city: String,
        /// Issuing admin; defaults to the oldest admin account.
        #[arg(long)]
        admin_email: Option<String>,
        #[command(flatten)]
        config: ConfigArg,
    },
    /// Evaluate a model artifact or a prediction file on a labeled image tree.
    Eval {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        data: PathBuf,
        /// `<item id>\t<label>` lines to score instead of running a model.
        #[arg(long, conflicts_with = "model")]
        predictions: Option<PathBuf>,
        /// Score only the test split produced by this train fraction.
        #[arg(long)]
        train_fraction: Option<f64>,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Copy the store to a snapshot file.
    Snapshot {
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        config: ConfigArg,
    },
    /// Fit the baseline model on the train split and print the test-split report.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.85)]
        train_fraction: f64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
}

fn settings_for(config: &ApiConfig) -> Settings {
    Settings {
        country_code: config.country_code.clone(),
        token_ttl: Duration::seconds(config.token_ttl_secs),
        default_language: config.default_language,
        password_cost: PasswordCost::Standard,
        ..Settings::default()
    }
}

/// Platform over the configured snapshot, model and geocoder.
pub fn open_platform(config: &ApiConfig) -> CliResult<Platform> {
    config.validate_paths()?;
    let store = Arc::new(FileStore::open(&config.snapshot_path)?);
    let model = load_model(&config.model_path)?;
    let geocoder = BoxGeocoder::from_file(&config.geocoder_path)?;
    let catalogs = Arc::new(Catalogs::builtin());
    Ok(Platform::builder(store, model)
        .geocoder(Arc::new(geocoder) as Arc<dyn Geocoder>)
        .mailer(Arc::new(LogMailer::new(catalogs.clone())))
        .catalogs(catalogs)
        .clock(Arc::new(SystemClock))
        .settings(settings_for(config))
        .build())
}

pub async fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::Serve(c) => serve(&ApiConfig::load(c.config.as_deref())?).await,
        Command::BootstrapAdmin {
            email,
            password,
            config,
        } => {
            let platform = open_platform(&ApiConfig::load(config.config.as_deref())?)?;
            let account = platform.bootstrap_admin(&email, &password)?;
            println!("{}", serde_json::to_string_pretty(&account.view())?);
            Ok(())
        }
        Command::GenCredential {
            id,
            first,
            last,
            city,
            admin_email,
            config,
        } => {
            let platform = open_platform(&ApiConfig::load(config.config.as_deref())?)?;
            let admins = platform.central_admins()?;
            let admin = match &admin_email {
                Some(email) => {
                    let email = email.trim().to_lowercase();
                    admins.into_iter().find(|a| a.email == email)
                }
                None => admins.into_iter().next(),
            }
            .ok_or("no matching central admin account; run bootstrap-admin first")?;
            let payload = CredentialPayload::new(id, first, last, city).map_err(Error::from)?;
            let (_, text) = platform.generate_credential(&admin.id, payload)?;
            println!("{text}");
            Ok(())
        }
        Command::Eval {
            model,
            data,
            predictions,
            train_fraction,
            seed,
        } => {
            let report = eval(
                model.as_deref(),
                &data,
                predictions.as_deref(),
                train_fraction,
                seed,
            )?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(())
        }
        Command::Snapshot { out, config } => {
            let config = ApiConfig::load(config.config.as_deref())?;
            if !config.snapshot_path.is_file() {
                return Err(format!("no store at {}", config.snapshot_path.display()).into());
            }
            FileStore::open(&config.snapshot_path)?.snapshot_to_file(&out)?;
            eprintln!("snapshot written to {}", out.display());
            Ok(())
        }
        Command::Train {
            data,
            out,
            train_fraction,
            seed,
        } => {
            let report = train(&data, &out, train_fraction, seed)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(())
        }
    }
}

async fn serve(config: &ApiConfig) -> CliResult {
    let platform = open_platform(config)?;
    let app = router(AppState::new(Arc::new(platform)));
    let addr = config.socket_addr();
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| format!("cannot bind {addr}: {e}"))?;
    tracing::info!(%addr, "listening");
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

fn test_items(
    data: &Path,
    train_fraction: Option<f64>,
    seed: u64,
) -> CliResult<Vec<LabeledItem<PathBuf>>> {
    let items = load_dataset_dir(data)?;
    Ok(match train_fraction {
        Some(f) => split_dataset(items, f, seed)?.test,
        None => items,
    })
}

pub fn eval(
    model: Option<&Path>,
    data: &Path,
    predictions: Option<&Path>,
    train_fraction: Option<f64>,
    seed: u64,
) -> CliResult<citysolution_core::classifier::EvaluationReport> {
    let items = test_items(data, train_fraction, seed)?;
    let predictions = match (predictions, model) {
        (Some(path), _) => PredictionFile::parse(&std::fs::read_to_string(path)?)?,
        (None, Some(path)) => {
            let model = load_model(path)?;
            let mut out = PredictionFile::default();
            for item in &items {
                let tensor = preprocess(&std::fs::read(&item.data)?)?;
                out.insert(item.id.clone(), classify(model.as_ref(), &tensor)?.label);
            }
            out
        }
        (None, None) => return Err("eval needs --model or --predictions".into()),
    };
    Ok(evaluate_predictions(&predictions, &items)?)
}

pub fn train(
    data: &Path,
    out: &Path,
    train_fraction: f64,
    seed: u64,
) -> CliResult<citysolution_core::classifier::EvaluationReport> {
    let split = split_dataset(load_dataset_dir(data)?, train_fraction, seed)?;
    let load = |item: &LabeledItem<PathBuf>| -> CliResult<_> {
        Ok((item.label, preprocess(&std::fs::read(&item.data)?)?))
    };
    let train_set = split
        .train
        .iter()
        .map(load)
        .collect::<CliResult<Vec<_>>>()?;
    let config = TrainingConfig {
        train_fraction,
        ..TrainingConfig::default()
    };
    let model = train_baseline(train_set.iter().map(|(c, t)| (*c, t)), config)?;
    model.save(out)?;
    let mut predictions = PredictionFile::default();
    for item in &split.test {
        let (_, tensor) = load(item)?;
        predictions.insert(item.id.clone(), classify(&model, &tensor)?.label);
    }
    Ok(evaluate_predictions(&predictions, &split.test)?)
}

//! Flat key/value configuration shared by every subcommand.
//!
//! A config file may hold keys for any subcommand; each command reads the
//! keys it understands. Flags override file values.

use std::path::Path;

use geoprior::{Error, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

/// Every key a config file may contain.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(dead_code)]
pub struct Settings {
    seed: Option<u64>,
    pairs: Option<usize>,
    n_train: Option<usize>,
    n_test: Option<usize>,
    gamma: Option<f64>,
    geo_sigma: Option<f64>,
    pair_separation: Option<f64>,
    season_width: Option<f64>,
    image_confusion: Option<f64>,
    image_concentration: Option<f64>,
    image_prior_tilt: Option<f64>,
    hidden_width: Option<usize>,
    epochs: Option<usize>,
    batch_size: Option<usize>,
    lr: Option<f64>,
    momentum: Option<f64>,
    lr_decay: Option<f64>,
    features: Option<String>,
    strategy: Option<String>,
    weight_cap: Option<f64>,
    mixup_alpha: Option<f64>,
    crl_eta: Option<f64>,
    crl_margin: Option<f64>,
    crl_minority_fraction: Option<f64>,
    smote_k: Option<usize>,
    clusters: Option<usize>,
    epsilon: Option<f64>,
    topk: Option<Vec<usize>>,
    average: Option<Vec<String>>,
    method: Option<String>,
    scheme: Option<String>,
}

pub fn load_table(path: Option<&Path>) -> Result<toml::Table> {
    let Some(path) = path else {
        return Ok(toml::Table::new());
    };
    let text = geoprior::io::read_text(path)?;
    let table: toml::Table = text.parse().map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
    Settings::deserialize(table.clone()).map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
    Ok(table)
}

/// File values overlaid with flag values, read as one command's flag set.
pub fn merge<F: Serialize + DeserializeOwned>(file: &toml::Table, flags: &F) -> Result<F> {
    let mut merged = file.clone();
    let given = toml::Table::try_from(flags).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    merged.extend(given);
    F::deserialize(merged).map_err(|e| Error::InvalidConfig(e.to_string()))
}

/// Text of the effective configuration, loadable again with `--config`.
pub fn echo<F: Serialize>(command: &str, resolved: &F) -> Result<String> {
    let body = toml::to_string(resolved).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    Ok(format!("# effective configuration of `geoprior {command}`\n{body}"))
}

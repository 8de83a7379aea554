//! `key value` configuration text for [`TrainConfig`]; keys are the field
//! names.

use std::fmt::Write;

use siren_core::train::TrainConfig;

use crate::hexfloat::{format_hex, parse_float};

pub const KEYS: [&str; 11] = [
    "initial_lr",
    "lr_patience",
    "lr_factor",
    "lr_floor",
    "epochs",
    "batch_size",
    "seed",
    "blocks",
    "hidden_multiplier",
    "lip_coeff",
    "stop_patience",
];

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("invalid value `{value}` for `{key}`")]
    Value { key: String, value: String },
}

/// Sets one field. Keys may use `-` in place of `_`.
pub fn set_key(cfg: &mut TrainConfig, key: &str, value: &str) -> Result<(), ConfigError> {
    let key = key.replace('-', "_");
    let bad = || ConfigError::Value { key: key.clone(), value: value.to_string() };
    let float = || parse_float(value).map_err(|_| bad());
    let int = || value.parse::<usize>().map_err(|_| bad());
    match key.as_str() {
        "initial_lr" => cfg.initial_lr = float()?,
        "lr_patience" => cfg.lr_patience = int()?,
        "lr_factor" => cfg.lr_factor = float()?,
        "lr_floor" => cfg.lr_floor = float()?,
        "epochs" => cfg.epochs = int()?,
        "batch_size" => cfg.batch_size = if value == "auto" { None } else { Some(int()?) },
        "seed" => cfg.seed = value.parse().map_err(|_| bad())?,
        "blocks" => cfg.blocks = int()?,
        "hidden_multiplier" => cfg.hidden_multiplier = int()?,
        "lip_coeff" => cfg.lip_coeff = float()?,
        "stop_patience" => cfg.stop_patience = int()?,
        _ => return Err(ConfigError::UnknownKey(key)),
    }
    Ok(())
}

/// Applies every `key value` line of `text`; `#` starts a comment.
pub fn apply_text(cfg: &mut TrainConfig, text: &str) -> Result<(), ConfigError> {
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let (Some(key), Some(value), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(ConfigError::Line { line: i + 1, message: "expected `key value`".into() });
        };
        set_key(cfg, key, value).map_err(|e| ConfigError::Line { line: i + 1, message: e.to_string() })?;
    }
    Ok(())
}

/// Every field, one per line, with hex floats.
pub fn to_text(cfg: &TrainConfig) -> String {
    let mut out = String::new();
    let batch = cfg.batch_size.map_or("auto".to_string(), |b| b.to_string());
    let values = [
        format_hex(cfg.initial_lr),
        cfg.lr_patience.to_string(),
        format_hex(cfg.lr_factor),
        format_hex(cfg.lr_floor),
        cfg.epochs.to_string(),
        batch,
        cfg.seed.to_string(),
        cfg.blocks.to_string(),
        cfg.hidden_multiplier.to_string(),
        format_hex(cfg.lip_coeff),
        cfg.stop_patience.to_string(),
    ];
    for (k, v) in KEYS.iter().zip(values) {
        writeln!(out, "{k} {v}").unwrap();
    }
    out
}

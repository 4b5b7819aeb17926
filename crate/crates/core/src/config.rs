//! Flat `key = value` configuration files for the tuning parameters.
//!
//! Keys are `N_init`, `N_expl`, `M_fin`, `T_max`, `rho_min`, `P_and`,
//! `P_not`, `P_init`, `P_c`, `rho_del`, `C_max`, `k_max` and `d`. Blank lines
//! and `#` comments are ignored.

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::gmjmcmc::GmjmcmcConfig;

pub const KEYS: [&str; 13] = [
    "N_init", "N_expl", "M_fin", "T_max", "rho_min", "P_and", "P_not", "P_init", "P_c", "rho_del", "C_max", "k_max",
    "d",
];

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: expected `key = value`, got {text:?}")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown key {key:?}")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key {key} given twice")]
    DuplicateKey { line: usize, key: String },
    #[error("line {line}: bad value {value:?} for {key}")]
    BadValue { line: usize, key: String, value: String },
}

/// Parsed `key = value` pairs in file order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    entries: Vec<(String, String, usize)>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries: Vec<(String, String, usize)> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(ConfigError::Syntax {
                    line,
                    text: raw.to_string(),
                });
            };
            let (key, value) = (key.trim(), value.trim());
            if !KEYS.contains(&key) {
                return Err(ConfigError::UnknownKey {
                    line,
                    key: key.to_string(),
                });
            }
            if entries.iter().any(|(k, _, _)| k == key) {
                return Err(ConfigError::DuplicateKey {
                    line,
                    key: key.to_string(),
                });
            }
            entries.push((key.to_string(), value.to_string(), line));
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _, _)| k == key).map(|(_, v, _)| v.as_str())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Overwrites the fields named in the file.
    pub fn apply(&self, cfg: &mut GmjmcmcConfig) -> Result<(), ConfigError> {
        for (key, value, line) in &self.entries {
            let bad = || ConfigError::BadValue {
                line: *line,
                key: key.clone(),
                value: value.clone(),
            };
            let int = || value.parse::<usize>().map_err(|_| bad());
            let real = || {
                value
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(bad)
            };
            match key.as_str() {
                "N_init" => cfg.n_init = int()?,
                "N_expl" => cfg.n_expl = int()?,
                "M_fin" => cfg.m_fin = int()?,
                "T_max" => cfg.t_max = int()?,
                "rho_min" => cfg.rho_min = real()?,
                "P_and" => cfg.p_and = real()?,
                "P_not" => cfg.p_not = real()?,
                "P_init" => cfg.p_init = real()?,
                "P_c" => cfg.p_c = real()?,
                "rho_del" => cfg.rho_del = real()?,
                "C_max" => cfg.c_max = int()?,
                "k_max" => cfg.k_max = int()?,
                "d" => cfg.d = int()?,
                _ => unreachable!("keys are checked while parsing"),
            }
        }
        Ok(())
    }
}

/// Writes every tuning parameter of `cfg` in the file format.
pub fn to_config_text(cfg: &GmjmcmcConfig) -> String {
    let mut s = String::new();
    let ints = [
        ("N_init", cfg.n_init),
        ("N_expl", cfg.n_expl),
        ("M_fin", cfg.m_fin),
        ("T_max", cfg.t_max),
    ];
    for (k, v) in ints {
        writeln!(s, "{k} = {v}").unwrap();
    }
    for (k, v) in [
        ("rho_min", cfg.rho_min),
        ("P_and", cfg.p_and),
        ("P_not", cfg.p_not),
        ("P_init", cfg.p_init),
        ("P_c", cfg.p_c),
        ("rho_del", cfg.rho_del),
    ] {
        writeln!(s, "{k} = {v}").unwrap();
    }
    for (k, v) in [("C_max", cfg.c_max), ("k_max", cfg.k_max), ("d", cfg.d)] {
        writeln!(s, "{k} = {v}").unwrap();
    }
    s
}

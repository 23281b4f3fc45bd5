//! Flat `key = value` generator config.
//!
//! Blank lines and lines starting with `#` are ignored. Unset keys keep
//! their defaults. Recognised keys:
//!
//! | key | value |
//! |-----|-------|
//! | `n_schools`, `seed` | integers |
//! | `school_size.median`, `school_size.sigma`, `school_size.min` | school size distribution |
//! | `sigma_u`, `sigma_e` | school effect SD (grades), pupil noise SD (points) |
//! | `ks2_background_link` | KS2 / background copula correlation in `[0, 1)` |
//! | `marginal.<name>` | comma-separated probabilities in category order |
//! | `coef.<label>` | one adjusted-model coefficient, e.g. `coef.fsm_eligible` |
//! | `concentrate.characteristic`, `concentrate.category`, `concentrate.school_share`, `concentrate.inside_prob`, `concentrate.outside_prob` | optional concentration, all five together |

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use super::IoError;
use crate::accountability::Characteristic;
use crate::synth::{Concentration, PupilMarginals, SchoolMarginals, SynthConfig};

fn err(line: usize, message: impl Into<String>) -> IoError {
    IoError::Config {
        line,
        message: message.into(),
    }
}

fn num<T: std::str::FromStr>(line: usize, key: &str, value: &str) -> Result<T, IoError> {
    value
        .parse()
        .map_err(|_| err(line, format!("{key}: cannot parse {value:?}")))
}

fn list(line: usize, key: &str, value: &str) -> Result<Vec<f64>, IoError> {
    value.split(',').map(|v| num(line, key, v.trim())).collect()
}

#[derive(Default)]
struct PartialConcentration {
    characteristic: Option<Characteristic>,
    category: Option<String>,
    school_share: Option<f64>,
    inside_prob: Option<f64>,
    outside_prob: Option<f64>,
    line: usize,
}

/// Parses a config over the defaults and validates the result.
pub fn parse_config(text: &str) -> Result<SynthConfig, IoError> {
    let mut config = SynthConfig::default();
    let mut seen = BTreeSet::new();
    let mut conc = PartialConcentration::default();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let (key, value) = trimmed
            .split_once('=')
            .ok_or_else(|| err(line, "expected key = value"))?;
        let (key, value) = (key.trim(), value.trim());
        if !seen.insert(key.to_string()) {
            return Err(err(line, format!("duplicate key {key}")));
        }
        match key {
            "n_schools" => config.n_schools = num(line, key, value)?,
            "seed" => config.seed = num(line, key, value)?,
            "school_size.median" => config.school_size.median = num(line, key, value)?,
            "school_size.sigma" => config.school_size.sigma = num(line, key, value)?,
            "school_size.min" => config.school_size.min = num(line, key, value)?,
            "sigma_u" => config.sigma_u = num(line, key, value)?,
            "sigma_e" => config.sigma_e = num(line, key, value)?,
            "ks2_background_link" => config.ks2_background_link = num(line, key, value)?,
            "concentrate.characteristic" => {
                conc.characteristic = Some(value.parse().map_err(|_| err(line, format!("unknown characteristic {value}")))?);
                conc.line = line;
            }
            "concentrate.category" => conc.category = Some(value.to_string()),
            "concentrate.school_share" => conc.school_share = Some(num(line, key, value)?),
            "concentrate.inside_prob" => conc.inside_prob = Some(num(line, key, value)?),
            "concentrate.outside_prob" => conc.outside_prob = Some(num(line, key, value)?),
            _ => {
                if let Some(name) = key.strip_prefix("marginal.") {
                    let probs = list(line, key, value)?;
                    if let Some(slot) = config.pupil_marginals.get_mut(name) {
                        *slot = probs;
                    } else if let Some(slot) = config.school_marginals.get_mut(name) {
                        *slot = probs;
                    } else {
                        return Err(err(line, format!("unknown marginal {name}")));
                    }
                } else if let Some(label) = key.strip_prefix("coef.") {
                    let v = num(line, key, value)?;
                    config.set_coefficient(label, v).map_err(|e| err(line, e.to_string()))?;
                } else {
                    return Err(err(line, format!("unknown key {key}")));
                }
            }
        }
    }
    let parts = [
        conc.characteristic.is_some(),
        conc.category.is_some(),
        conc.school_share.is_some(),
        conc.inside_prob.is_some(),
        conc.outside_prob.is_some(),
    ];
    if parts.iter().any(|&p| p) {
        if !parts.iter().all(|&p| p) {
            return Err(err(conc.line, "concentration needs all five concentrate.* keys"));
        }
        config.concentration = Some(Concentration {
            characteristic: conc.characteristic.unwrap(),
            category: conc.category.unwrap(),
            school_share: conc.school_share.unwrap(),
            inside_prob: conc.inside_prob.unwrap(),
            outside_prob: conc.outside_prob.unwrap(),
        });
    }
    config.validate().map_err(|e| err(0, e.to_string()))?;
    Ok(config)
}

fn join(values: &[f64]) -> String {
    values.iter().map(f64::to_string).collect::<Vec<_>>().join(", ")
}

/// Writes every setting explicitly; `parse_config` of the output returns
/// an equal config.
pub fn config_to_string(config: &SynthConfig) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "n_schools = {}", config.n_schools);
    let _ = writeln!(s, "seed = {}", config.seed);
    let _ = writeln!(s, "school_size.median = {}", config.school_size.median);
    let _ = writeln!(s, "school_size.sigma = {}", config.school_size.sigma);
    let _ = writeln!(s, "school_size.min = {}", config.school_size.min);
    let _ = writeln!(s, "sigma_u = {}", config.sigma_u);
    let _ = writeln!(s, "sigma_e = {}", config.sigma_e);
    let _ = writeln!(s, "ks2_background_link = {}", config.ks2_background_link);
    for name in PupilMarginals::NAMES {
        let _ = writeln!(s, "marginal.{name} = {}", join(config.pupil_marginals.get(name).unwrap()));
    }
    for name in SchoolMarginals::NAMES {
        let _ = writeln!(s, "marginal.{name} = {}", join(config.school_marginals.get(name).unwrap()));
    }
    for (label, c) in SynthConfig::coefficient_labels().iter().zip(&config.coefficients) {
        let _ = writeln!(s, "coef.{label} = {c}");
    }
    if let Some(c) = &config.concentration {
        let _ = writeln!(s, "concentrate.characteristic = {}", c.characteristic);
        let _ = writeln!(s, "concentrate.category = {}", c.category);
        let _ = writeln!(s, "concentrate.school_share = {}", c.school_share);
        let _ = writeln!(s, "concentrate.inside_prob = {}", c.inside_prob);
        let _ = writeln!(s, "concentrate.outside_prob = {}", c.outside_prob);
    }
    s
}

pub fn read_config(path: &Path) -> Result<SynthConfig, IoError> {
    let text = std::fs::read_to_string(path).map_err(|e| IoError::io(path, e))?;
    parse_config(&text)
}

pub fn write_config(path: &Path, config: &SynthConfig) -> Result<(), IoError> {
    std::fs::write(path, config_to_string(config)).map_err(|e| IoError::io(path, e))
}

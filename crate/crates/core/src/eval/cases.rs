use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::ScenarioConfig;

/// Scenario variants used to probe a trained policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ExperimentCase {
    /// Training conditions.
    Optim,
    /// Aerodynamic coefficients and density perturbed by +/- the percentage.
    Pv(f64),
    /// Mass and reference area independently biased by +/- the percentage.
    MvSv(f64),
    /// Divert offset set to the percentage of the trigger range.
    Divert(f64),
    /// Chain of diverts at the percentage, ending on the true target.
    Evasion(f64),
    /// Failure effectiveness loss drawn from (-x, 0).
    Af(f64),
}

pub const CASE_LABELS: [&str; 6] = ["Optim", "PV", "MV/SV", "Divert", "Evasion", "AF"];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CaseError {
    #[error("unknown case `{0}`; valid cases: {list}", list = valid_list())]
    Unknown(String),
    #[error("case `{0}` needs a value, e.g. {1}")]
    MissingValue(String, &'static str),
    #[error("case `{label}`: bad value `{value}`")]
    BadValue { label: String, value: String },
}

fn valid_list() -> String {
    "Optim, PV=<pct>, MV/SV=<pct>, Divert=<pct>, Evasion=<pct>, AF=<fraction>".into()
}

impl ExperimentCase {
    /// The standard evaluation matrix.
    pub fn standard() -> Vec<Self> {
        vec![
            Self::Optim,
            Self::Pv(15.0),
            Self::Pv(20.0),
            Self::MvSv(10.0),
            Self::Af(0.5),
            Self::Divert(10.0),
            Self::Evasion(5.0),
        ]
    }

    pub fn family(&self) -> &'static str {
        match self {
            Self::Optim => "Optim",
            Self::Pv(_) => "PV",
            Self::MvSv(_) => "MV/SV",
            Self::Divert(_) => "Divert",
            Self::Evasion(_) => "Evasion",
            Self::Af(_) => "AF",
        }
    }

    /// Overrides exactly the fields the case names.
    pub fn apply(&self, cfg: &mut ScenarioConfig) {
        match *self {
            Self::Optim => {}
            Self::Pv(pct) => {
                let f = pct / 100.0;
                let p = &mut cfg.perturbation;
                p.lift_fraction = f;
                p.drag_fraction = f;
                p.side_force_fraction = f;
                p.density_fraction = f;
            }
            Self::MvSv(pct) => {
                cfg.perturbation.mass_fraction = pct / 100.0;
                cfg.perturbation.area_fraction = pct / 100.0;
            }
            Self::Divert(pct) => cfg.divert.fraction = pct / 100.0,
            Self::Evasion(pct) => {
                cfg.divert.evasion = true;
                cfg.divert.fraction = pct / 100.0;
            }
            Self::Af(x) => cfg.actuator.failure_bias_min = -x,
        }
    }
}

impl fmt::Display for ExperimentCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Optim => write!(f, "Optim"),
            Self::Pv(v) => write!(f, "PV={v}"),
            Self::MvSv(v) => write!(f, "MV/SV={v}%"),
            Self::Divert(v) => write!(f, "Divert={v}%"),
            Self::Evasion(v) => write!(f, "Evasion={v}%"),
            Self::Af(v) => write!(f, "AF={v}"),
        }
    }
}

impl FromStr for ExperimentCase {
    type Err = CaseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let (name, value) = match s.split_once('=') {
            Some((n, v)) => (n.trim(), Some(v.trim())),
            None => (s, None),
        };
        let example = match name.to_ascii_lowercase().as_str() {
            "optim" => {
                return match value {
                    None => Ok(Self::Optim),
                    Some(v) => Err(CaseError::BadValue { label: name.into(), value: v.into() }),
                }
            }
            "pv" => "PV=20",
            "mv/sv" => "MV/SV=10%",
            "divert" => "Divert=10%",
            "evasion" => "Evasion=5%",
            "af" => "AF=0.5",
            _ => return Err(CaseError::Unknown(s.into())),
        };
        let raw = value.ok_or_else(|| CaseError::MissingValue(name.into(), example))?;
        let num: f64 = raw
            .trim_end_matches('%')
            .trim()
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite() && *v >= 0.0)
            .ok_or_else(|| CaseError::BadValue { label: name.into(), value: raw.into() })?;
        Ok(match name.to_ascii_lowercase().as_str() {
            "pv" => Self::Pv(num),
            "mv/sv" => Self::MvSv(num),
            "divert" => Self::Divert(num),
            "evasion" => Self::Evasion(num),
            _ => {
                if num > 1.0 {
                    return Err(CaseError::BadValue { label: name.into(), value: raw.into() });
                }
                Self::Af(num)
            }
        })
    }
}

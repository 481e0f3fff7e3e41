//! Run configuration: one TOML file with a section per parameter group.
//!
//! ```toml
//! cases = ["A", "B", "C", "D", "baseline"]
//! output_dir = "out"
//!
//! [weather]            # synthetic unless `path` is set
//! days = 3
//! seed = 7
//!
//! [battery]
//! preset = "nas" # any field below the preset overrides it
//! ```

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::economics::{BatterySpec, DieselSpec, EconomicParams};
use crate::formulation::{CaseId, ConstraintConfig};
use crate::lp::{PivotRule, SolveOptions};
use crate::presets;
use crate::timeseries::{PvPlantSpec, DEFAULT_LOW_IRRADIANCE};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Parse(String),
    #[error("{field}: {message}")]
    Invalid { field: String, message: String },
}

fn invalid(field: impl Into<String>, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.into(),
        message: message.into(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CaseSelector {
    A,
    B,
    C,
    D,
    #[serde(rename = "baseline")]
    Baseline,
    #[serde(rename = "battery-select")]
    BatterySelect,
}

impl CaseSelector {
    pub fn case_id(self) -> Option<CaseId> {
        match self {
            CaseSelector::A => Some(CaseId::A),
            CaseSelector::B => Some(CaseId::B),
            CaseSelector::C => Some(CaseId::C),
            CaseSelector::D => Some(CaseId::D),
            _ => None,
        }
    }
}

impl fmt::Display for CaseSelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CaseSelector::A => "A",
            CaseSelector::B => "B",
            CaseSelector::C => "C",
            CaseSelector::D => "D",
            CaseSelector::Baseline => "baseline",
            CaseSelector::BatterySelect => "battery-select",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for CaseSelector {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "baseline" => Ok(CaseSelector::Baseline),
            "battery-select" => Ok(CaseSelector::BatterySelect),
            other => other.parse::<CaseId>().map(|c| match c {
                CaseId::A => CaseSelector::A,
                CaseId::B => CaseSelector::B,
                CaseId::C => CaseSelector::C,
                CaseId::D => CaseSelector::D,
            }),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeatherConfig {
    /// Measured CSV; relative paths resolve against the config file.
    pub path: Option<PathBuf>,
    pub days: usize,
    pub seed: u64,
    pub variability: f64,
    /// W/m²
    pub low_irradiance_threshold: f64,
}

impl Default for WeatherConfig {
    fn default() -> Self {
        WeatherConfig {
            path: None,
            days: 3,
            seed: 7,
            variability: 0.8,
            low_irradiance_threshold: DEFAULT_LOW_IRRADIANCE,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub feasibility_tol: f64,
    pub optimality_tol: f64,
    pub max_iterations: Option<usize>,
    pub pivot_rule: PivotRule,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let o = SolveOptions::default();
        SolverConfig {
            feasibility_tol: o.feasibility_tol,
            optimality_tol: o.optimality_tol,
            max_iterations: o.max_iterations,
            pivot_rule: o.pivot_rule,
        }
    }
}

impl SolverConfig {
    pub fn options(&self) -> SolveOptions {
        SolveOptions {
            feasibility_tol: self.feasibility_tol,
            optimality_tol: self.optimality_tol,
            max_iterations: self.max_iterations,
            pivot_rule: self.pivot_rule,
            ..SolveOptions::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub cases: Vec<CaseSelector>,
    pub output_dir: PathBuf,
    pub weather: WeatherConfig,
    pub plant: PvPlantSpec,
    pub battery: BatterySpec,
    pub diesel: DieselSpec,
    pub econ: EconomicParams,
    pub constraints: ConstraintConfig,
    pub solver: SolverConfig,
    /// Specs compared by battery selection, in input order.
    pub battery_select: Vec<BatterySpec>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            cases: vec![
                CaseSelector::A,
                CaseSelector::B,
                CaseSelector::C,
                CaseSelector::D,
                CaseSelector::Baseline,
            ],
            output_dir: PathBuf::from("out"),
            weather: WeatherConfig::default(),
            plant: PvPlantSpec::default(),
            battery: presets::battery(presets::DEFAULT_BATTERY).expect("bundled preset"),
            diesel: presets::diesel(presets::DEFAULT_DIESEL).expect("bundled preset"),
            econ: EconomicParams::default(),
            constraints: ConstraintConfig::default(),
            solver: SolverConfig::default(),
            battery_select: presets::battery_names()
                .map(|n| presets::battery(n).expect("bundled preset"))
                .collect(),
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    cases: Option<Vec<CaseSelector>>,
    output_dir: Option<PathBuf>,
    #[serde(default)]
    weather: WeatherConfig,
    #[serde(default)]
    plant: PvPlantSpec,
    battery: Option<toml::Table>,
    diesel: Option<toml::Table>,
    #[serde(default)]
    econ: EconomicParams,
    #[serde(default)]
    constraints: ConstraintConfig,
    #[serde(default)]
    solver: SolverConfig,
    battery_select: Option<RawBatterySelect>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBatterySelect {
    #[serde(default)]
    presets: Vec<String>,
    #[serde(default)]
    specs: Vec<toml::Table>,
}

/// Preset table with the user's keys laid over it.
fn resolve_spec<T: serde::de::DeserializeOwned>(
    section: &str,
    table: Option<toml::Table>,
    default_preset: &str,
    lookup: fn(&str) -> Option<&'static str>,
) -> Result<T, ConfigError> {
    let mut table = table.unwrap_or_default();
    let preset = match table.remove("preset") {
        Some(toml::Value::String(s)) => Some(s),
        Some(_) => return Err(invalid(format!("{section}.preset"), "must be a string")),
        None => None,
    };
    let base_name = preset.as_deref().unwrap_or(default_preset);
    // inline specs without a preset must be complete
    let mut merged = if preset.is_some() || table.is_empty() {
        let text = lookup(base_name)
            .ok_or_else(|| invalid(format!("{section}.preset"), format!("unknown preset {base_name:?}")))?;
        text.parse::<toml::Table>()
            .map_err(|e| ConfigError::Parse(format!("bundled preset {base_name}: {e}")))?
    } else {
        toml::Table::new()
    };
    for (k, v) in table {
        merged.insert(k, v);
    }
    toml::Value::Table(merged)
        .try_into()
        .map_err(|e| ConfigError::Parse(format!("[{section}] {}", e.to_string().trim())))
}

fn battery_text(name: &str) -> Option<&'static str> {
    let name = name.strip_suffix(".preset").unwrap_or(name);
    presets::BATTERY_PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, t)| *t)
}

fn diesel_text(name: &str) -> Option<&'static str> {
    let name = name.strip_suffix(".preset").unwrap_or(name);
    presets::DIESEL_PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, t)| *t)
}

impl RunConfig {
    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<RunConfig, ConfigError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        let defaults = RunConfig::default();
        let battery = resolve_spec::<BatterySpec>(
            "battery",
            raw.battery,
            presets::DEFAULT_BATTERY,
            battery_text,
        )?;
        let diesel =
            resolve_spec::<DieselSpec>("diesel", raw.diesel, presets::DEFAULT_DIESEL, diesel_text)?;
        let battery_select = match raw.battery_select {
            None => defaults.battery_select,
            Some(sel) => {
                let mut specs = Vec::new();
                for name in &sel.presets {
                    specs.push(presets::battery(name).ok_or_else(|| {
                        invalid("battery_select.presets", format!("unknown preset {name:?}"))
                    })?);
                }
                for (i, t) in sel.specs.into_iter().enumerate() {
                    let section = format!("battery_select.specs[{i}]");
                    specs.push(resolve_spec::<BatterySpec>(
                        &section,
                        Some(t),
                        presets::DEFAULT_BATTERY,
                        battery_text,
                    )?);
                }
                specs
            }
        };
        let mut weather = raw.weather;
        if let Some(p) = weather.path.as_mut() {
            if p.is_relative() {
                *p = base_dir.join(&*p);
            }
        }
        let cfg = RunConfig {
            cases: raw.cases.unwrap_or(defaults.cases),
            output_dir: raw.output_dir.unwrap_or(defaults.output_dir),
            weather,
            plant: raw.plant,
            battery,
            diesel,
            econ: raw.econ,
            constraints: raw.constraints,
            solver: raw.solver,
            battery_select,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<RunConfig, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        RunConfig::from_toml_str(&text, base)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.cases.is_empty() {
            return Err(invalid("cases", "at least one case must be selected"));
        }
        let w = &self.weather;
        if w.path.is_none() && w.days < 1 {
            return Err(invalid("weather.days", "must be at least 1"));
        }
        if !(0.0..=1.0).contains(&w.variability) {
            return Err(invalid("weather.variability", "must be in [0, 1]"));
        }
        if !(w.low_irradiance_threshold >= 0.0) {
            return Err(invalid("weather.low_irradiance_threshold", "must be non-negative"));
        }
        let prefixed = |section: &str, r: Result<(), String>| {
            r.map_err(|m| {
                let (field, msg) = m.split_once(' ').unwrap_or(("", &m));
                invalid(format!("{section}.{field}"), msg.to_string())
            })
        };
        prefixed("plant", self.plant.validate())?;
        prefixed("battery", self.battery.validate())?;
        prefixed("diesel", self.diesel.validate())?;
        prefixed("econ", self.econ.validate())?;
        prefixed("constraints", self.constraints.validate())?;
        if self.cases.contains(&CaseSelector::BatterySelect) && self.battery_select.len() < 2 {
            return Err(invalid("battery_select", "needs at least two battery specs"));
        }
        for (i, b) in self.battery_select.iter().enumerate() {
            prefixed(&format!("battery_select[{i}]"), b.validate())?;
        }
        if !(self.solver.feasibility_tol > 0.0 && self.solver.optimality_tol > 0.0) {
            return Err(invalid("solver", "tolerances must be positive"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RunConfig, ConfigError> {
        RunConfig::from_toml_str(text, Path::new("."))
    }

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(parse("").unwrap(), RunConfig::default());
    }

    #[test]
    fn negative_fluctuation_limit_names_the_field() {
        let err = parse("[constraints]\nfluctuation_limit = -5\n").unwrap_err();
        match err {
            ConfigError::Invalid { field, .. } => assert_eq!(field, "constraints.fluctuation_limit"),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn preset_with_override() {
        let c = parse("[battery]\npreset = \"li_ion\"\nlifetime_years = 10\n").unwrap();
        assert_eq!(c.battery.name, "Li-ion");
        assert_eq!(c.battery.lifetime_years, 10.0);
        assert_eq!(c.battery.capital_power, 1300.0);
    }

    #[test]
    fn incomplete_inline_battery_is_rejected() {
        assert!(matches!(
            parse("[battery]\nname = \"x\"\ncapital_power = 5\n"),
            Err(ConfigError::Parse(_))
        ));
    }

    #[test]
    fn unknown_keys_and_cases_are_rejected() {
        assert!(parse("bogus = 1\n").is_err());
        assert!(parse("cases = [\"E\"]\n").is_err());
        assert!(parse("[constraints]\nramp = 3\n").is_err());
        assert!(parse("cases = []\n").is_err());
    }

    #[test]
    fn cases_and_soc_mode_parse() {
        let c = parse(
            "cases = [\"A\", \"baseline\", \"battery-select\"]\n\
             [constraints]\ninitial_soc = { fixed-fraction = 0.5 }\nfluctuation_limit = inf\n",
        )
        .unwrap();
        assert_eq!(
            c.cases,
            vec![CaseSelector::A, CaseSelector::Baseline, CaseSelector::BatterySelect]
        );
        assert_eq!(
            c.constraints.initial_soc,
            crate::formulation::InitialSoc::FixedFraction(0.5)
        );
        assert!(c.constraints.fluctuation_limit.is_infinite());
    }

    #[test]
    fn battery_select_lists() {
        let c = parse(
            "[battery_select]\npresets = [\"nas\"]\n\
             [[battery_select.specs]]\npreset = \"nas\"\nname = \"NaS-cheap\"\ncapital_power = 500\n",
        )
        .unwrap();
        assert_eq!(c.battery_select.len(), 2);
        assert_eq!(c.battery_select[1].name, "NaS-cheap");
    }
}

//! Bundled parameter sets, stored as TOML files under `presets/`.

use crate::economics::{BatterySpec, DieselSpec};

pub const BATTERY_PRESETS: &[(&str, &str)] = &[
    ("lead_acid", include_str!("../presets/lead_acid.preset")),
    ("nas", include_str!("../presets/nas.preset")),
    ("li_ion", include_str!("../presets/li_ion.preset")),
    ("ni_cd", include_str!("../presets/ni_cd.preset")),
];

pub const DIESEL_PRESETS: &[(&str, &str)] =
    &[("diesel", include_str!("../presets/diesel.preset"))];

pub const DEFAULT_BATTERY: &str = "nas";
pub const DEFAULT_DIESEL: &str = "diesel";

fn lookup<'a>(table: &'a [(&str, &str)], name: &str) -> Option<&'a str> {
    let name = name.strip_suffix(".preset").unwrap_or(name);
    table.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

pub fn battery(name: &str) -> Option<BatterySpec> {
    lookup(BATTERY_PRESETS, name).map(|text| toml::from_str(text).expect("bundled battery preset"))
}

pub fn diesel(name: &str) -> Option<DieselSpec> {
    lookup(DIESEL_PRESETS, name).map(|text| toml::from_str(text).expect("bundled diesel preset"))
}

pub fn battery_names() -> impl Iterator<Item = &'static str> {
    BATTERY_PRESETS.iter().map(|(n, _)| *n)
}

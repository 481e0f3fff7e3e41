//! Present-worth cost factors for battery and diesel capacity, and the
//! discounted revenue multiplier.
//!
//! Each capacity factor has the same three-part shape: the capital cost of
//! every purchase discounted to its purchase year, the O&M annuity, and the
//! salvage credit of every unit discounted to the end of its life.

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatterySpec {
    pub name: String,
    /// $/kW
    pub capital_power: f64,
    /// $/kWh
    pub capital_energy: f64,
    /// $/kW-yr
    pub om_power: f64,
    /// $/kWh-yr
    pub om_energy: f64,
    /// $/kW
    pub salvage_power: f64,
    /// $/kWh
    pub salvage_energy: f64,
    pub lifetime_years: f64,
    pub eff_power: f64,
    pub eff_energy: f64,
    pub soc_min_fraction: f64,
}

impl BatterySpec {
    pub fn validate(&self) -> Result<(), String> {
        let costs = [
            ("capital_power", self.capital_power),
            ("capital_energy", self.capital_energy),
            ("om_power", self.om_power),
            ("om_energy", self.om_energy),
            ("salvage_power", self.salvage_power),
            ("salvage_energy", self.salvage_energy),
        ];
        for (name, v) in costs {
            if !(v.is_finite() && v >= 0.0) {
                return Err(format!("{name} must be a non-negative number, got {v}"));
            }
        }
        if self.salvage_power > self.capital_power {
            return Err("salvage_power exceeds capital_power".into());
        }
        if self.salvage_energy > self.capital_energy {
            return Err("salvage_energy exceeds capital_energy".into());
        }
        if !(self.lifetime_years >= 1.0 && self.lifetime_years.is_finite()) {
            return Err(format!(
                "lifetime_years must be at least 1, got {}",
                self.lifetime_years
            ));
        }
        for (name, v) in [("eff_power", self.eff_power), ("eff_energy", self.eff_energy)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(format!("{name} must be in (0, 1], got {v}"));
            }
        }
        if !(self.soc_min_fraction >= 0.0 && self.soc_min_fraction < 1.0) {
            return Err(format!(
                "soc_min_fraction must be in [0, 1), got {}",
                self.soc_min_fraction
            ));
        }
        Ok(())
    }

    /// Multiplies every monetary coefficient by `factor`.
    pub fn scale_prices(&self, factor: f64) -> BatterySpec {
        BatterySpec {
            capital_power: self.capital_power * factor,
            capital_energy: self.capital_energy * factor,
            om_power: self.om_power * factor,
            om_energy: self.om_energy * factor,
            salvage_power: self.salvage_power * factor,
            salvage_energy: self.salvage_energy * factor,
            ..self.clone()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DieselSpec {
    /// $/kW
    pub capital: f64,
    /// $/kW-yr
    pub om: f64,
    /// $/kW
    pub salvage: f64,
    /// Rated life in running hours (informational).
    pub lifetime_hours: f64,
    /// Life in years used for discounting and replacement counts.
    pub lifetime_years_effective: f64,
    /// L/kWh
    pub fuel_per_kwh: f64,
    /// $/L
    pub fuel_price: f64,
    /// Lumped emission charge over the study, $.
    pub emission_charge_total: f64,
    pub efficiency: f64,
    /// L/yr
    pub annual_fuel_cap_liters: f64,
}

impl DieselSpec {
    pub fn validate(&self) -> Result<(), String> {
        let costs = [
            ("capital", self.capital),
            ("om", self.om),
            ("salvage", self.salvage),
            ("fuel_price", self.fuel_price),
            ("emission_charge_total", self.emission_charge_total),
            ("annual_fuel_cap_liters", self.annual_fuel_cap_liters),
        ];
        for (name, v) in costs {
            if !(v.is_finite() && v >= 0.0) {
                return Err(format!("{name} must be a non-negative number, got {v}"));
            }
        }
        if self.salvage > self.capital {
            return Err("salvage exceeds capital".into());
        }
        if !(self.fuel_per_kwh > 0.0 && self.fuel_per_kwh.is_finite()) {
            return Err(format!("fuel_per_kwh must be positive, got {}", self.fuel_per_kwh));
        }
        if !(self.efficiency > 0.0 && self.efficiency <= 1.0) {
            return Err(format!("efficiency must be in (0, 1], got {}", self.efficiency));
        }
        if !(self.lifetime_years_effective > 0.0 && self.lifetime_years_effective.is_finite()) {
            return Err("lifetime_years_effective must be positive".into());
        }
        Ok(())
    }

    pub fn scale_prices(&self, factor: f64) -> DieselSpec {
        DieselSpec {
            capital: self.capital * factor,
            om: self.om * factor,
            salvage: self.salvage * factor,
            fuel_price: self.fuel_price * factor,
            emission_charge_total: self.emission_charge_total * factor,
            ..self.clone()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EconomicParams {
    /// $/kWh
    pub energy_price: f64,
    /// Annual discount rate.
    pub discount_rate: f64,
    pub horizon_years: u32,
    /// Run the O&M annuity over the whole horizon instead of one unit
    /// lifetime.
    pub om_full_horizon: bool,
}

impl Default for EconomicParams {
    fn default() -> Self {
        EconomicParams {
            energy_price: 0.45,
            discount_rate: 0.05,
            horizon_years: 18,
            om_full_horizon: false,
        }
    }
}

impl EconomicParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.energy_price >= 0.0 && self.energy_price.is_finite()) {
            return Err(format!("energy_price must be non-negative, got {}", self.energy_price));
        }
        if !(self.discount_rate >= 0.0 && self.discount_rate.is_finite()) {
            return Err(format!(
                "discount_rate must be non-negative, got {}",
                self.discount_rate
            ));
        }
        if self.horizon_years < 1 {
            return Err("horizon_years must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PresentWorthFactors {
    /// $/kW of battery power rating
    pub beta: f64,
    /// $/kWh of battery energy rating
    pub gamma: f64,
    /// $/kW of diesel rating
    pub sigma: f64,
    pub n_battery: u32,
    pub n_diesel: u32,
    pub revenue_multiplier: f64,
}

/// Number of purchases over the horizon, the initial unit included.
pub fn replacement_count(horizon_years: f64, lifetime_years: f64) -> u32 {
    assert!(horizon_years > 0.0 && lifetime_years > 0.0);
    // guard against 18 / 4.5 landing a hair above 4
    let ratio = horizon_years / lifetime_years;
    let rounded = ratio.round();
    if (ratio - rounded).abs() <= 1e-9 * ratio {
        rounded as u32
    } else {
        ratio.ceil() as u32
    }
}

/// Present worth of `n` years of unit annual payments,
/// `((1+S)^n - 1) / (S (1+S)^n)`, and `n` in the `S -> 0` limit.
pub fn annuity_factor(rate: f64, years: f64) -> f64 {
    if rate == 0.0 {
        years
    } else {
        let g = (1.0 + rate).powf(years);
        (g - 1.0) / (rate * g)
    }
}

/// Capital, O&M and salvage present worth for one capacity rating.
pub fn capacity_present_worth(
    capital: f64,
    om: f64,
    salvage: f64,
    lifetime_years: f64,
    econ: &EconomicParams,
) -> f64 {
    let horizon = econ.horizon_years as f64;
    let n = replacement_count(horizon, lifetime_years);
    let d = 1.0 + econ.discount_rate;
    let mut capital_pw = 0.0;
    let mut salvage_pw = 0.0;
    for i in 1..=n {
        capital_pw += capital * d.powf(-((i - 1) as f64) * lifetime_years);
        salvage_pw += salvage * d.powf(-(i as f64) * lifetime_years);
    }
    let om_years = if econ.om_full_horizon {
        horizon
    } else {
        lifetime_years
    };
    capital_pw + om * annuity_factor(econ.discount_rate, om_years) - salvage_pw
}

/// β, $/kW.
pub fn battery_power_pw(spec: &BatterySpec, econ: &EconomicParams) -> f64 {
    capacity_present_worth(
        spec.capital_power,
        spec.om_power,
        spec.salvage_power,
        spec.lifetime_years,
        econ,
    )
}

/// γ, $/kWh.
pub fn battery_energy_pw(spec: &BatterySpec, econ: &EconomicParams) -> f64 {
    capacity_present_worth(
        spec.capital_energy,
        spec.om_energy,
        spec.salvage_energy,
        spec.lifetime_years,
        econ,
    )
}

/// σ, $/kW.
pub fn diesel_power_pw(spec: &DieselSpec, econ: &EconomicParams) -> f64 {
    capacity_present_worth(
        spec.capital,
        spec.om,
        spec.salvage,
        spec.lifetime_years_effective,
        econ,
    )
}

/// `sum_{k=1..T} (1+S)^-k`, applied to one year of revenue.
pub fn revenue_multiplier(econ: &EconomicParams) -> f64 {
    annuity_factor(econ.discount_rate, econ.horizon_years as f64)
}

pub fn present_worth_factors(
    battery: &BatterySpec,
    diesel: &DieselSpec,
    econ: &EconomicParams,
) -> PresentWorthFactors {
    let horizon = econ.horizon_years as f64;
    PresentWorthFactors {
        beta: battery_power_pw(battery, econ),
        gamma: battery_energy_pw(battery, econ),
        sigma: diesel_power_pw(diesel, econ),
        n_battery: replacement_count(horizon, battery.lifetime_years),
        n_diesel: replacement_count(horizon, diesel.lifetime_years_effective),
        revenue_multiplier: revenue_multiplier(econ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    fn econ(rate: f64) -> EconomicParams {
        EconomicParams {
            discount_rate: rate,
            ..EconomicParams::default()
        }
    }

    #[test]
    fn replacement_counts() {
        assert_eq!(replacement_count(18.0, 6.0), 3);
        assert_eq!(replacement_count(18.0, 4.5), 4);
        assert_eq!(replacement_count(5.0, 6.0), 1);
        assert_eq!(replacement_count(18.0, 9.0), 2);
        assert_eq!(replacement_count(18.0, 7.0), 3);
    }

    #[test]
    fn undiscounted_closed_forms() {
        let nas = presets::battery("nas").unwrap();
        assert_eq!(battery_power_pw(&nas, &econ(0.0)), 2988.0);
        assert_eq!(battery_energy_pw(&nas, &econ(0.0)), 513.9);
        let diesel = presets::diesel("diesel").unwrap();
        assert_eq!(diesel_power_pw(&diesel, &econ(0.0)), 1368.0);
    }

    #[test]
    fn zero_cost_specs_are_free() {
        let free = presets::battery("nas").unwrap().scale_prices(0.0);
        assert_eq!(battery_power_pw(&free, &econ(0.05)), 0.0);
        assert_eq!(battery_energy_pw(&free, &econ(0.05)), 0.0);
        let diesel = presets::diesel("diesel").unwrap().scale_prices(0.0);
        assert_eq!(diesel_power_pw(&diesel, &econ(0.05)), 0.0);
    }

    #[test]
    fn revenue_multiplier_examples() {
        let e = EconomicParams {
            horizon_years: 18,
            discount_rate: 0.0,
            ..EconomicParams::default()
        };
        assert_eq!(revenue_multiplier(&e), 18.0);
        let e = EconomicParams {
            horizon_years: 1,
            discount_rate: 0.05,
            ..EconomicParams::default()
        };
        assert!((revenue_multiplier(&e) - 1.0 / 1.05).abs() < 1e-15);
    }

    #[test]
    fn om_full_horizon_uses_study_length() {
        let nas = presets::battery("nas").unwrap();
        let e = EconomicParams {
            discount_rate: 0.0,
            om_full_horizon: true,
            ..EconomicParams::default()
        };
        // 3 * 1000 + 3 * 18 - 3 * 10
        assert_eq!(battery_power_pw(&nas, &e), 3024.0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn spec(cp: f64, op: f64, sp: f64, life: f64) -> BatterySpec {
            BatterySpec {
                capital_power: cp,
                om_power: op,
                salvage_power: sp,
                lifetime_years: life,
                ..presets::battery("nas").unwrap()
            }
        }

        proptest! {
            #[test]
            fn non_increasing_in_rate_without_salvage(
                cp in 0.0f64..2000.0, op in 0.0f64..50.0, life in 1.0f64..20.0,
                r1 in 0.0f64..0.2, r2 in 0.0f64..0.2,
            ) {
                let s = spec(cp, op, 0.0, life);
                let (lo, hi) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
                prop_assert!(battery_power_pw(&s, &econ(hi)) <= battery_power_pw(&s, &econ(lo)) + 1e-9);
            }

            #[test]
            fn linear_in_cost_triple(
                cp in 0.0f64..2000.0, op in 0.0f64..50.0, frac in 0.0f64..1.0,
                life in 1.0f64..20.0, rate in 0.0f64..0.2,
            ) {
                let s = spec(cp, op, cp * frac, life);
                let doubled = s.scale_prices(2.0);
                let a = battery_power_pw(&s, &econ(rate));
                let b = battery_power_pw(&doubled, &econ(rate));
                prop_assert!((b - 2.0 * a).abs() <= 1e-9 * (1.0 + a.abs()));
            }

            #[test]
            fn revenue_multiplier_recursion(years in 2u32..40, rate in 0.0f64..0.3) {
                let e = |t| EconomicParams { horizon_years: t, discount_rate: rate, ..EconomicParams::default() };
                let lhs = revenue_multiplier(&e(years));
                let rhs = revenue_multiplier(&e(years - 1)) + (1.0 + rate).powi(-(years as i32));
                prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs);
            }

            #[test]
            fn undiscounted_limit_matches_counts(
                cp in 0.0f64..2000.0, op in 0.0f64..50.0, frac in 0.0f64..1.0, life in 1u32..20,
            ) {
                let s = spec(cp, op, cp * frac, life as f64);
                let n = replacement_count(18.0, life as f64) as f64;
                let expected = n * cp + op * life as f64 - n * cp * frac;
                let got = battery_power_pw(&s, &econ(0.0));
                prop_assert!((got - expected).abs() <= 1e-9 * (1.0 + expected.abs()));
            }
        }
    }
}

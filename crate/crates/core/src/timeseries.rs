//! Weather ingestion and synthesis, the PV power model, and the retained
//! optimization horizon.

use std::io::Read;
use std::path::Path;

use chrono::{DateTime, NaiveDateTime};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Ten-minute sampling.
pub const DEFAULT_STEP_HOURS: f64 = 1.0 / 6.0;
pub const DEFAULT_LOW_IRRADIANCE: f64 = 2.0;

#[derive(Debug, Error)]
pub enum WeatherError {
    #[error("row {row}, column `{column}`: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },
    #[error("non-uniform step at row {row}: gap of {gap_minutes} min, expected {expected_minutes} min")]
    NonUniformStep {
        row: usize,
        gap_minutes: f64,
        expected_minutes: f64,
    },
    #[error("weather series needs at least 2 samples, got {0}")]
    TooShort(usize),
    #[error("invalid weather series: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeatherSample {
    /// W/m²
    pub irradiance: f64,
    /// °C
    pub ambient_temp: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum WeatherOrigin {
    MeasuredFile { path: String },
    Synthetic { seed: u64 },
}

/// Fixed-step weather samples. `retained[i]` is false for samples excluded
/// from the optimization horizon (see [`filter_low_irradiance`]); excluded
/// samples keep their slot so step indices stay aligned with time.
#[derive(Clone, Debug, PartialEq)]
pub struct WeatherSeries {
    step_hours: f64,
    samples: Vec<WeatherSample>,
    retained: Vec<bool>,
    origin: WeatherOrigin,
}

impl WeatherSeries {
    pub fn new(
        step_hours: f64,
        samples: Vec<WeatherSample>,
        origin: WeatherOrigin,
    ) -> Result<Self, WeatherError> {
        if !(step_hours > 0.0 && step_hours.is_finite()) {
            return Err(WeatherError::Invalid(format!(
                "step must be positive, got {step_hours}"
            )));
        }
        if samples.len() < 2 {
            return Err(WeatherError::TooShort(samples.len()));
        }
        for (i, s) in samples.iter().enumerate() {
            if !(s.irradiance.is_finite() && s.irradiance >= 0.0) {
                return Err(WeatherError::Invalid(format!(
                    "sample {i}: irradiance {} must be finite and non-negative",
                    s.irradiance
                )));
            }
            if !s.ambient_temp.is_finite() {
                return Err(WeatherError::Invalid(format!(
                    "sample {i}: temperature is not finite"
                )));
            }
        }
        let retained = vec![true; samples.len()];
        Ok(WeatherSeries {
            step_hours,
            samples,
            retained,
            origin,
        })
    }

    pub fn step_hours(&self) -> f64 {
        self.step_hours
    }

    pub fn samples(&self) -> &[WeatherSample] {
        &self.samples
    }

    pub fn origin(&self) -> &WeatherOrigin {
        &self.origin
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn retained(&self) -> &[bool] {
        &self.retained
    }

    pub fn retained_count(&self) -> usize {
        self.retained.iter().filter(|&&r| r).count()
    }

    /// Total time covered by the series, retained or not.
    pub fn span_hours(&self) -> f64 {
        self.samples.len() as f64 * self.step_hours
    }
}

fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.naive_utc());
    }
    ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M:%S", "%Y-%m-%d %H:%M"]
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
}

/// Reads `timestamp,irradiance_wm2,temp_c` CSV. Row numbers in errors are
/// 1-based data rows (the header is row 0).
pub fn read_weather_csv<R: Read>(reader: R, origin: WeatherOrigin) -> Result<WeatherSeries, WeatherError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| -> Result<usize, WeatherError> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| WeatherError::Parse {
                row: 0,
                column: name.to_string(),
                message: "missing column".into(),
            })
    };
    let (ts_col, irr_col, temp_col) = (find("timestamp")?, find("irradiance_wm2")?, find("temp_c")?);

    let mut times = Vec::new();
    let mut samples = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let row = k + 1;
        let rec = rec?;
        let field = |idx: usize, name: &str| -> Result<&str, WeatherError> {
            match rec.get(idx) {
                Some(v) if !v.is_empty() => Ok(v),
                _ => Err(WeatherError::Parse {
                    row,
                    column: name.to_string(),
                    message: "missing value".into(),
                }),
            }
        };
        let ts = field(ts_col, "timestamp")?;
        let t = parse_timestamp(ts).ok_or_else(|| WeatherError::Parse {
            row,
            column: "timestamp".into(),
            message: format!("not an ISO-8601 timestamp: `{ts}`"),
        })?;
        let num = |idx: usize, name: &str| -> Result<f64, WeatherError> {
            let v = field(idx, name)?;
            v.parse::<f64>().map_err(|_| WeatherError::Parse {
                row,
                column: name.to_string(),
                message: format!("not a number: `{v}`"),
            })
        };
        let irradiance = num(irr_col, "irradiance_wm2")?;
        let ambient_temp = num(temp_col, "temp_c")?;
        if !(irradiance.is_finite() && irradiance >= 0.0) {
            return Err(WeatherError::Parse {
                row,
                column: "irradiance_wm2".into(),
                message: format!("irradiance must be non-negative, got {irradiance}"),
            });
        }
        times.push(t);
        samples.push(WeatherSample {
            irradiance,
            ambient_temp,
        });
    }
    if samples.len() < 2 {
        return Err(WeatherError::TooShort(samples.len()));
    }
    let step = (times[1] - times[0]).num_seconds();
    if step <= 0 {
        return Err(WeatherError::NonUniformStep {
            row: 2,
            gap_minutes: step as f64 / 60.0,
            expected_minutes: step as f64 / 60.0,
        });
    }
    for k in 2..times.len() {
        let gap = (times[k] - times[k - 1]).num_seconds();
        if gap != step {
            return Err(WeatherError::NonUniformStep {
                row: k + 1,
                gap_minutes: gap as f64 / 60.0,
                expected_minutes: step as f64 / 60.0,
            });
        }
    }
    WeatherSeries::new(step as f64 / 3600.0, samples, origin)
}

/// Loads a weather CSV file. Only the CSV layout is supported.
pub fn load_weather(path: impl AsRef<Path>) -> Result<WeatherSeries, WeatherError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)?;
    read_weather_csv(
        file,
        WeatherOrigin::MeasuredFile {
            path: path.display().to_string(),
        },
    )
}

/// Parameters of the synthetic generator. The defaults are the ones the
/// golden tests are locked against.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthParams {
    pub peak_irradiance: f64,
    pub sunrise_hour: f64,
    pub sunset_hour: f64,
    pub mean_temp: f64,
    pub temp_swing: f64,
    /// Expected number of cloud occlusions per daylight hour at
    /// variability 1.
    pub clouds_per_hour: f64,
    pub min_cloud_minutes: f64,
    pub max_cloud_minutes: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            peak_irradiance: 1000.0,
            sunrise_hour: 6.0,
            sunset_hour: 18.0,
            mean_temp: 15.0,
            temp_swing: 8.0,
            clouds_per_hour: 1.5,
            min_cloud_minutes: 10.0,
            max_cloud_minutes: 60.0,
        }
    }
}

/// Clear-sky irradiance at `hour` of day: a half sine between sunrise and
/// sunset, exactly zero at night.
pub fn clear_sky(params: &SynthParams, hour: f64) -> f64 {
    if hour <= params.sunrise_hour || hour >= params.sunset_hour {
        return 0.0;
    }
    let phase = (hour - params.sunrise_hour) / (params.sunset_hour - params.sunrise_hour);
    params.peak_irradiance * (std::f64::consts::PI * phase).sin()
}

/// Deterministic synthetic weather at ten-minute resolution.
pub fn synth_weather(days: usize, seed: u64, variability: f64) -> WeatherSeries {
    synth_weather_with(days, seed, variability, &SynthParams::default())
}

pub fn synth_weather_with(
    days: usize,
    seed: u64,
    variability: f64,
    params: &SynthParams,
) -> WeatherSeries {
    assert!(days >= 1, "at least one day of weather is required");
    let variability = variability.clamp(0.0, 1.0);
    let per_day = 144;
    let n = days * per_day;
    let step_hours = DEFAULT_STEP_HOURS;
    let mut attenuation = vec![1.0f64; n];

    if variability > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let daylight = params.sunset_hour - params.sunrise_hour;
        let per_step = params.clouds_per_hour * variability * step_hours;
        for day in 0..days {
            let first = day * per_day + (params.sunrise_hour / step_hours).ceil() as usize;
            let last = day * per_day + (params.sunset_hour / step_hours).floor() as usize;
            let mut i = first;
            while i < last.min(n) {
                if rng.gen::<f64>() < per_step {
                    let minutes = rng.gen_range(params.min_cloud_minutes..=params.max_cloud_minutes);
                    let len = ((minutes / 60.0) / step_hours).round().max(1.0) as usize;
                    // opacity between 40% and 90% of the clear-sky value at full variability
                    let depth = variability * rng.gen_range(0.4..0.9);
                    for a in attenuation.iter_mut().skip(i).take(len) {
                        *a = a.min(1.0 - depth);
                    }
                    i += len;
                } else {
                    i += 1;
                }
            }
            debug_assert!(daylight > 0.0);
        }
    }

    let samples = (0..n)
        .map(|i| {
            let hour = (i % per_day) as f64 * step_hours;
            let irradiance = clear_sky(params, hour) * attenuation[i];
            // warmest mid-afternoon
            let ambient_temp = params.mean_temp
                + params.temp_swing * (2.0 * std::f64::consts::PI * (hour - 9.0) / 24.0).sin();
            WeatherSample {
                irradiance,
                ambient_temp,
            }
        })
        .collect();
    WeatherSeries::new(step_hours, samples, WeatherOrigin::Synthetic { seed })
        .expect("synthetic series is valid by construction")
}

/// PV plant parameters for the NOCT cell-temperature model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PvPlantSpec {
    /// kW, also the grid injection limit of the plant.
    pub rated_power: f64,
    pub inverter_efficiency: f64,
    /// Power derate per °C of cell temperature above `reference_temp`.
    pub temp_coefficient: f64,
    pub noct: f64,
    pub reference_temp: f64,
    pub reference_irradiance: f64,
}

impl Default for PvPlantSpec {
    fn default() -> Self {
        PvPlantSpec {
            rated_power: 10_000.0,
            inverter_efficiency: 0.9,
            temp_coefficient: -0.004,
            noct: 45.0,
            reference_temp: 25.0,
            reference_irradiance: 1000.0,
        }
    }
}

impl PvPlantSpec {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.rated_power > 0.0 && self.rated_power.is_finite()) {
            return Err("rated_power must be positive".into());
        }
        if !(self.inverter_efficiency > 0.0 && self.inverter_efficiency <= 1.0) {
            return Err("inverter_efficiency must be in (0, 1]".into());
        }
        if !(self.reference_irradiance > 0.0) {
            return Err("reference_irradiance must be positive".into());
        }
        if !self.temp_coefficient.is_finite() || !self.noct.is_finite() || !self.reference_temp.is_finite() {
            return Err("temperature parameters must be finite".into());
        }
        Ok(())
    }

    /// AC output in kW for one weather sample.
    pub fn output(&self, s: &WeatherSample) -> f64 {
        let cell_temp = s.ambient_temp + s.irradiance * (self.noct - 20.0) / 800.0;
        let dc = self.rated_power
            * (s.irradiance / self.reference_irradiance)
            * (1.0 + self.temp_coefficient * (cell_temp - self.reference_temp));
        dc.clamp(0.0, self.rated_power) * self.inverter_efficiency
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerSeries {
    pub step_hours: f64,
    /// kW
    pub values: Vec<f64>,
}

impl PowerSeries {
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("step_index,p_kw\n");
        for (i, v) in self.values.iter().enumerate() {
            out.push_str(&format!("{i},{v}\n"));
        }
        out
    }
}

pub fn pv_power(weather: &WeatherSeries, plant: &PvPlantSpec) -> PowerSeries {
    PowerSeries {
        step_hours: weather.step_hours(),
        values: weather.samples().iter().map(|s| plant.output(s)).collect(),
    }
}

/// Marks samples below `threshold` W/m² as excluded from the horizon.
/// Samples already excluded stay excluded, so the operation is idempotent.
pub fn filter_low_irradiance(weather: &WeatherSeries, threshold: f64) -> WeatherSeries {
    let mut out = weather.clone();
    for (keep, s) in out.retained.iter_mut().zip(&weather.samples) {
        if s.irradiance < threshold {
            *keep = false;
        }
    }
    out
}

/// The optimization horizon: retained PV samples in time order together
/// with their original step indices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Horizon {
    pub step_hours: f64,
    /// Index of each retained sample in the full series.
    pub steps: Vec<usize>,
    /// kW
    pub p_pv: Vec<f64>,
    /// Hours covered by the full series the horizon was sampled from.
    pub span_hours: f64,
}

impl Horizon {
    /// Contiguous horizon over all values.
    pub fn contiguous(step_hours: f64, p_pv: Vec<f64>) -> Horizon {
        Horizon {
            step_hours,
            steps: (0..p_pv.len()).collect(),
            span_hours: p_pv.len() as f64 * step_hours,
            p_pv,
        }
    }

    pub fn from_series(weather: &WeatherSeries, power: &PowerSeries) -> Horizon {
        let mut steps = Vec::new();
        let mut p_pv = Vec::new();
        for (i, (&keep, &p)) in weather.retained().iter().zip(&power.values).enumerate() {
            if keep {
                steps.push(i);
                p_pv.push(p);
            }
        }
        Horizon {
            step_hours: power.step_hours,
            steps,
            p_pv,
            span_hours: weather.span_hours(),
        }
    }

    pub fn len(&self) -> usize {
        self.p_pv.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p_pv.is_empty()
    }

    /// True when step `k` directly follows step `k - 1` in time, i.e. the
    /// ramp limit applies between them.
    pub fn continues(&self, k: usize) -> bool {
        k > 0 && self.steps[k] == self.steps[k - 1] + 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(irr: &[f64]) -> WeatherSeries {
        WeatherSeries::new(
            DEFAULT_STEP_HOURS,
            irr.iter()
                .map(|&irradiance| WeatherSample {
                    irradiance,
                    ambient_temp: 20.0,
                })
                .collect(),
            WeatherOrigin::Synthetic { seed: 0 },
        )
        .unwrap()
    }

    #[test]
    fn reads_well_formed_csv() {
        let csv = "timestamp,irradiance_wm2,temp_c\n\
                   2010-01-01T10:00:00,500,12.5\n\
                   2010-01-01T10:10:00,520,12.7\n\
                   2010-01-01T10:20:00,480,12.9\n";
        let w = read_weather_csv(csv.as_bytes(), WeatherOrigin::Synthetic { seed: 0 }).unwrap();
        assert_eq!(w.len(), 3);
        assert!((w.step_hours() - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(w.samples()[1].irradiance, 520.0);
    }

    #[test]
    fn rejects_eleven_minute_gap() {
        let csv = "timestamp,irradiance_wm2,temp_c\n\
                   2010-01-01T10:00:00,500,12.5\n\
                   2010-01-01T10:10:00,520,12.7\n\
                   2010-01-01T10:21:00,480,12.9\n";
        let err = read_weather_csv(csv.as_bytes(), WeatherOrigin::Synthetic { seed: 0 }).unwrap_err();
        match err {
            WeatherError::NonUniformStep {
                row, gap_minutes, ..
            } => {
                assert_eq!(row, 3);
                assert_eq!(gap_minutes, 11.0);
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn empty_and_header_only_files_are_too_short() {
        let err = read_weather_csv("".as_bytes(), WeatherOrigin::Synthetic { seed: 0 }).unwrap_err();
        assert!(matches!(err, WeatherError::Parse { .. } | WeatherError::TooShort(0)));
        let err = read_weather_csv(
            "timestamp,irradiance_wm2,temp_c\n".as_bytes(),
            WeatherOrigin::Synthetic { seed: 0 },
        )
        .unwrap_err();
        assert!(matches!(err, WeatherError::TooShort(0)));
    }

    #[test]
    fn missing_field_names_row_and_column() {
        let csv = "timestamp,irradiance_wm2,temp_c\n\
                   2010-01-01T10:00:00,500,12.5\n\
                   2010-01-01T10:10:00,,12.7\n";
        let err = read_weather_csv(csv.as_bytes(), WeatherOrigin::Synthetic { seed: 0 }).unwrap_err();
        match err {
            WeatherError::Parse { row, column, .. } => {
                assert_eq!(row, 2);
                assert_eq!(column, "irradiance_wm2");
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn clear_sky_day_shape() {
        let w = synth_weather(1, 7, 0.0);
        assert_eq!(w.len(), 144);
        let irr: Vec<f64> = w.samples().iter().map(|s| s.irradiance).collect();
        let (imax, _) = irr
            .iter()
            .enumerate()
            .fold((0, f64::MIN), |b, (i, &v)| if v > b.1 { (i, v) } else { b });
        assert_eq!(imax, 72, "peak at solar noon");
        assert!(irr[..=36].iter().all(|&v| v == 0.0));
        assert!(irr[108..].iter().all(|&v| v == 0.0));
        // rising in the morning, falling in the afternoon
        assert!(irr[37..=72].windows(2).all(|p| p[1] > p[0]));
        assert!(irr[72..108].windows(2).all(|p| p[1] < p[0]));
    }

    #[test]
    fn synthetic_is_deterministic() {
        assert_eq!(synth_weather(1, 7, 0.8), synth_weather(1, 7, 0.8));
        assert_ne!(synth_weather(2, 7, 0.8), synth_weather(2, 8, 0.8));
    }

    #[test]
    fn synthetic_has_sharp_transients() {
        let w = synth_weather(3, 7, 0.8);
        let peak = SynthParams::default().peak_irradiance;
        let biggest = w
            .samples()
            .windows(2)
            .map(|p| (p[1].irradiance - p[0].irradiance).abs())
            .fold(0.0, f64::max);
        assert!(biggest > 0.3 * peak, "largest step {biggest}");
    }

    #[test]
    fn pv_identity_point_and_zero() {
        let plant = PvPlantSpec::default();
        let zero = WeatherSample {
            irradiance: 0.0,
            ambient_temp: 40.0,
        };
        assert_eq!(plant.output(&zero), 0.0);
        // ambient chosen so the cell sits exactly at the reference temperature
        let s = WeatherSample {
            irradiance: 1000.0,
            ambient_temp: 25.0 - 1000.0 * (45.0 - 20.0) / 800.0,
        };
        assert!((plant.output(&s) - 9000.0).abs() < 1e-9);
    }

    #[test]
    fn pv_golden_half_sun() {
        // cell = 25 + 500 * 25 / 800 = 40.625 C
        // dc = 10000 * 0.5 * (1 - 0.004 * 15.625) = 4687.5 kW
        // ac = 4687.5 * 0.9
        let plant = PvPlantSpec::default();
        let s = WeatherSample {
            irradiance: 500.0,
            ambient_temp: 25.0,
        };
        assert!((plant.output(&s) - 4218.75).abs() < 1e-9);
    }

    #[test]
    fn filter_examples() {
        let night = series(&[0.0, 1.0, 0.5]);
        assert_eq!(filter_low_irradiance(&night, 2.0).retained_count(), 0);
        let day = synth_weather(1, 3, 0.5);
        assert_eq!(filter_low_irradiance(&day, 0.0), day);
        let expected = day.samples().iter().filter(|s| s.irradiance >= 2.0).count();
        assert_eq!(filter_low_irradiance(&day, 2.0).retained_count(), expected);
    }

    #[test]
    fn horizon_blocks_follow_gaps() {
        let w = filter_low_irradiance(&series(&[5.0, 6.0, 0.0, 7.0, 8.0]), 2.0);
        let h = Horizon::from_series(&w, &pv_power(&w, &PvPlantSpec::default()));
        assert_eq!(h.steps, vec![0, 1, 3, 4]);
        assert!(h.continues(1));
        assert!(!h.continues(2));
        assert!(h.continues(3));
        assert!((h.span_hours - 5.0 / 6.0).abs() < 1e-12);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn pv_output_within_rating(irr in 0.0f64..1500.0, temp in -20.0f64..50.0) {
                let plant = PvPlantSpec::default();
                let p = plant.output(&WeatherSample { irradiance: irr, ambient_temp: temp });
                prop_assert!(p >= 0.0);
                prop_assert!(p <= plant.rated_power * plant.inverter_efficiency + 1e-9);
            }

            #[test]
            fn pv_monotone_in_irradiance(a in 0.0f64..1000.0, b in 0.0f64..1000.0, temp in -20.0f64..45.0) {
                let plant = PvPlantSpec::default();
                let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
                let p_lo = plant.output(&WeatherSample { irradiance: lo, ambient_temp: temp });
                let p_hi = plant.output(&WeatherSample { irradiance: hi, ambient_temp: temp });
                prop_assert!(p_hi >= p_lo - 1e-9);
            }

            #[test]
            fn filter_is_idempotent(seed in 0u64..1000, threshold in 0.0f64..200.0) {
                let w = synth_weather(1, seed, 0.7);
                let once = filter_low_irradiance(&w, threshold);
                prop_assert_eq!(filter_low_irradiance(&once, threshold), once);
            }
        }
    }
}

use std::f64::consts::PI;
use std::path::Path;

use chrono::{Datelike, Duration, NaiveDateTime, Timelike};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::calendar::STEP_SECONDS;
use crate::error::{Error, Result};

pub const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";
pub const WEATHER_HEADER: [&str; 6] = ["timestamp", "t_out_c", "rh_pct", "wind_mps", "dni_wm2", "dhi_wm2"];

pub const T_OUT_RANGE: (f64, f64) = (-30.0, 40.0);
pub const RH_RANGE: (f64, f64) = (0.0, 100.0);
pub const WIND_RANGE: (f64, f64) = (0.0, 25.0);
pub const RADIATION_RANGE: (f64, f64) = (0.0, 1300.0);

#[derive(Clone, Debug, PartialEq)]
pub struct WeatherRecord {
    pub timestamp: NaiveDateTime,
    pub t_out: f64,
    pub rh: f64,
    pub wind: f64,
    pub dni: f64,
    pub dhi: f64,
}

impl WeatherRecord {
    fn check(&self) -> std::result::Result<(), String> {
        let fields = [
            ("t_out_c", self.t_out, T_OUT_RANGE),
            ("rh_pct", self.rh, RH_RANGE),
            ("wind_mps", self.wind, WIND_RANGE),
            ("dni_wm2", self.dni, RADIATION_RANGE),
            ("dhi_wm2", self.dhi, RADIATION_RANGE),
        ];
        for (name, v, (lo, hi)) in fields {
            if !(v >= lo && v <= hi) {
                return Err(format!("{name} = {v} outside [{lo}, {hi}]"));
            }
        }
        Ok(())
    }
}

/// Synthetic climate knobs. Defaults describe a mild maritime climate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClimateParams {
    pub mean_temp: f64,
    pub seasonal_amplitude: f64,
    pub diurnal_amplitude: f64,
    pub temp_noise_sd: f64,
    pub temp_noise_corr: f64,
    pub mean_wind: f64,
    pub wind_noise_sd: f64,
    pub wind_corr: f64,
    pub mean_rh: f64,
    pub cloud_corr: f64,
    pub peak_dni: f64,
}

impl Default for ClimateParams {
    fn default() -> Self {
        Self {
            mean_temp: 11.0,
            seasonal_amplitude: 7.0,
            diurnal_amplitude: 3.5,
            temp_noise_sd: 2.0,
            temp_noise_corr: 0.995,
            mean_wind: 3.0,
            wind_noise_sd: 1.5,
            wind_corr: 0.98,
            mean_rh: 72.0,
            cloud_corr: 0.99,
            peak_dni: 850.0,
        }
    }
}

impl ClimateParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("temp_noise_corr", self.temp_noise_corr), ("wind_corr", self.wind_corr), ("cloud_corr", self.cloud_corr)]
        {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::config(format!("weather.{name} must lie in [0, 1), got {v}")));
            }
        }
        for (name, v) in [
            ("temp_noise_sd", self.temp_noise_sd),
            ("wind_noise_sd", self.wind_noise_sd),
            ("mean_wind", self.mean_wind),
            ("peak_dni", self.peak_dni),
            ("seasonal_amplitude", self.seasonal_amplitude),
            ("diurnal_amplitude", self.diurnal_amplitude),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(format!("weather.{name} must be non-negative, got {v}")));
            }
        }
        if !self.mean_temp.is_finite() || !(0.0..=100.0).contains(&self.mean_rh) {
            return Err(Error::config("weather.mean_temp must be finite and weather.mean_rh in [0, 100]"));
        }
        Ok(())
    }
}

/// Solar altitude and azimuth (radians, azimuth from south, positive west)
/// at local solar time.
pub fn solar_position(ts: NaiveDateTime, latitude_deg: f64) -> (f64, f64) {
    let doy = ts.ordinal() as f64;
    let hour = ts.hour() as f64 + ts.minute() as f64 / 60.0;
    let decl = (23.45f64).to_radians() * (2.0 * PI * (284.0 + doy) / 365.0).sin();
    let omega = (15.0 * (hour - 12.0)).to_radians();
    let phi = latitude_deg.to_radians();
    let sin_alt = phi.sin() * decl.sin() + phi.cos() * decl.cos() * omega.cos();
    let alt = sin_alt.clamp(-1.0, 1.0).asin();
    let az = omega.sin().atan2(omega.cos() * phi.sin() - decl.tan() * phi.cos());
    (alt, az)
}

/// Irradiance on a vertical facade with the given azimuth (W/m²).
pub fn facade_irradiance(rec: &WeatherRecord, azimuth_deg: f64, latitude_deg: f64) -> f64 {
    let (alt, az) = solar_position(rec.timestamp, latitude_deg);
    let beam = if alt > 0.0 { rec.dni * (alt.cos() * (az - azimuth_deg.to_radians()).cos()).max(0.0) } else { 0.0 };
    beam + 0.5 * rec.dhi
}

fn gauss(rng: &mut impl Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// 15-minute synthetic weather starting at `start`.
pub fn synth_weather(
    rng: &mut impl Rng,
    start: NaiveDateTime,
    days: usize,
    climate: &ClimateParams,
    latitude_deg: f64,
) -> Result<Vec<WeatherRecord>> {
    if days == 0 {
        return Err(Error::config("weather days must be at least 1"));
    }
    climate.validate()?;
    let c = climate;
    let steps = days * super::STEPS_PER_DAY;
    let innov = |corr: f64, sd: f64| sd * (1.0 - corr * corr).sqrt();
    let mut temp_noise = c.temp_noise_sd * gauss(rng);
    let mut wind = c.mean_wind;
    let mut cloud_latent = gauss(rng);
    let mut out = Vec::with_capacity(steps);
    for k in 0..steps {
        let ts = start + Duration::seconds(STEP_SECONDS * k as i64);
        let doy = ts.ordinal() as f64;
        let hour = ts.hour() as f64 + ts.minute() as f64 / 60.0;
        let seasonal = -c.seasonal_amplitude * (2.0 * PI * (doy - 20.0) / 365.0).cos();
        let diurnal = -c.diurnal_amplitude * (2.0 * PI * (hour - 4.0) / 24.0).cos();
        temp_noise = c.temp_noise_corr * temp_noise + innov(c.temp_noise_corr, c.temp_noise_sd) * gauss(rng);
        let t_out = (c.mean_temp + seasonal + diurnal + temp_noise).clamp(T_OUT_RANGE.0, T_OUT_RANGE.1);

        wind = (c.mean_wind + c.wind_corr * (wind - c.mean_wind) + innov(c.wind_corr, c.wind_noise_sd) * gauss(rng)).abs();
        wind = wind.min(WIND_RANGE.1);

        cloud_latent = c.cloud_corr * cloud_latent + innov(c.cloud_corr, 1.0) * gauss(rng);
        let cloud = 1.0 / (1.0 + (-1.5 * cloud_latent).exp());

        let (alt, _) = solar_position(ts, latitude_deg);
        let (dni, dhi) = if alt > 0.0 {
            let s = alt.sin();
            let clear = c.peak_dni * s.powf(0.3);
            (clear * (1.0 - cloud).powf(1.5), (60.0 + 250.0 * cloud) * s)
        } else {
            (0.0, 0.0)
        };
        let rh = c.mean_rh - 2.0 * diurnal + 15.0 * (cloud - 0.5) - 1.0 * temp_noise;
        out.push(WeatherRecord {
            timestamp: ts,
            t_out,
            rh: rh.clamp(RH_RANGE.0, RH_RANGE.1),
            wind,
            dni: dni.clamp(RADIATION_RANGE.0, RADIATION_RANGE.1),
            dhi: dhi.clamp(RADIATION_RANGE.0, RADIATION_RANGE.1),
        });
    }
    Ok(out)
}

pub fn write_weather_csv(path: &Path, records: &[WeatherRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::io(path, e.into()))?;
    let io = |e: csv::Error| Error::io(path, e.into());
    w.write_record(WEATHER_HEADER).map_err(io)?;
    for r in records {
        w.write_record([
            r.timestamp.format(TIMESTAMP_FORMAT).to_string(),
            r.t_out.to_string(),
            r.rh.to_string(),
            r.wind.to_string(),
            r.dni.to_string(),
            r.dhi.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_weather_csv(path: &Path) -> Result<Vec<WeatherRecord>> {
    let source = path.display().to_string();
    let parse_err = |row: usize, reason: String| Error::Parse { source_name: source.clone(), row, reason };
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::io(path, e.into()))?;
    let headers = rdr.headers().map_err(|e| parse_err(0, e.to_string()))?.clone();
    let mut index = [0usize; 6];
    for (slot, name) in index.iter_mut().zip(WEATHER_HEADER) {
        *slot = headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| parse_err(0, format!("missing column `{name}`")))?;
    }
    let mut out: Vec<WeatherRecord> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| parse_err(row, e.to_string()))?;
        let field = |k: usize| rec.get(index[k]).map(str::trim).unwrap_or("");
        let num = |k: usize| -> Result<f64> {
            field(k).parse::<f64>().map_err(|_| parse_err(row, format!("`{}` is not a number: `{}`", WEATHER_HEADER[k], field(k))))
        };
        let timestamp = NaiveDateTime::parse_from_str(field(0), TIMESTAMP_FORMAT)
            .map_err(|e| parse_err(row, format!("bad timestamp `{}`: {e}", field(0))))?;
        let r = WeatherRecord { timestamp, t_out: num(1)?, rh: num(2)?, wind: num(3)?, dni: num(4)?, dhi: num(5)? };
        r.check().map_err(|m| parse_err(row, m))?;
        if let Some(prev) = out.last() {
            let gap = (r.timestamp - prev.timestamp).num_seconds();
            if gap <= 0 {
                return Err(parse_err(row, "timestamps are not increasing".into()));
            }
            if gap != STEP_SECONDS {
                return Err(parse_err(row, format!("gap of {gap} s, expected {STEP_SECONDS} s")));
            }
        }
        out.push(r);
    }
    if out.is_empty() {
        return Err(parse_err(0, "no weather records".into()));
    }
    Ok(out)
}

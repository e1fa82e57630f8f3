use serde::{Deserialize, Serialize};

use super::calendar::STEP_SECONDS;
use super::dataset::{SimulatedDataset, DATASET_COLUMNS};
use super::signals::{ScheduleSet, SignalSet};
use super::thermal::{step_zone, ZoneInputs, ZoneState};
use super::weather::{facade_irradiance, WeatherRecord};
use super::{BuildingSpec, WINDOW_COUNT, ZONE_COUNT};
use crate::error::{Error, Result};

pub use super::thermal::Integrator;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationOptions {
    pub inner_step_s: f64,
    pub integrator: Integrator,
    pub initial_temp: f64,
}

impl Default for SimulationOptions {
    fn default() -> Self {
        Self { inner_step_s: 60.0, integrator: Integrator::Exponential, initial_temp: 20.0 }
    }
}

impl SimulationOptions {
    pub fn substeps(&self) -> Result<usize> {
        let n = STEP_SECONDS as f64 / self.inner_step_s;
        if !(self.inner_step_s > 0.0) || (n - n.round()).abs() > 1e-9 || n.round() < 1.0 {
            return Err(Error::config(format!(
                "simulator.inner_step_s must divide {STEP_SECONDS} s, got {}",
                self.inner_step_s
            )));
        }
        Ok(n.round() as usize)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SimulationReport {
    /// Largest relative mismatch between stored heat and summed fluxes over any inner step.
    pub max_energy_residual: f64,
    pub min_t_in: f64,
    pub max_t_in: f64,
    /// Heating and cooling energy per zone (kWh).
    pub heating_kwh: Vec<f64>,
    pub cooling_kwh: Vec<f64>,
}

pub fn simulate(
    spec: &BuildingSpec,
    weather: &[WeatherRecord],
    schedules: &ScheduleSet,
    signals: &SignalSet,
    duration: usize,
    options: &SimulationOptions,
) -> Result<SimulatedDataset> {
    simulate_detailed(spec, weather, schedules, signals, duration, options).map(|(d, _)| d)
}

/// Runs the building for `duration` 15-minute records. Inputs of record `k`
/// apply over `[t_k, t_k + 15 min)` and `t_in` in row `k` is the temperature
/// at the end of that interval.
pub fn simulate_detailed(
    spec: &BuildingSpec,
    weather: &[WeatherRecord],
    schedules: &ScheduleSet,
    signals: &SignalSet,
    duration: usize,
    options: &SimulationOptions,
) -> Result<(SimulatedDataset, SimulationReport)> {
    spec.validate()?;
    let substeps = options.substeps()?;
    let lengths = [
        ("weather", weather.len()),
        ("occupancy", schedules.occupancy.iter().map(Vec::len).min().unwrap_or(0)),
        ("equipment", schedules.equipment.iter().map(Vec::len).min().unwrap_or(0)),
        ("lighting", schedules.lighting.len()),
        ("holiday", schedules.holiday.len()),
        ("heating setpoints", signals.setpoints.heating.iter().map(Vec::len).min().unwrap_or(0)),
        ("cooling setpoints", signals.setpoints.cooling.iter().map(Vec::len).min().unwrap_or(0)),
        ("window signals", signals.windows.open.iter().map(Vec::len).min().unwrap_or(0)),
    ];
    for (name, len) in lengths {
        if len < duration {
            return Err(Error::config(format!("{name} series covers {len} steps, simulation needs {duration}")));
        }
    }
    let zoned = [
        schedules.occupancy.len(),
        schedules.equipment.len(),
        signals.setpoints.heating.len(),
        signals.setpoints.cooling.len(),
    ];
    if zoned.iter().any(|&n| n != ZONE_COUNT) || signals.windows.open.len() != WINDOW_COUNT {
        return Err(Error::config(format!("expected {ZONE_COUNT} zone series and {WINDOW_COUNT} window series")));
    }
    if duration == 0 {
        return Err(Error::config("simulation duration must be at least one step"));
    }

    let zones = spec.zones();
    let ua = spec.interior_ua();
    let dt = options.inner_step_s;
    let mut states = [ZoneState::new(options.initial_temp); ZONE_COUNT];
    let mut report = SimulationReport {
        min_t_in: f64::INFINITY,
        max_t_in: f64::NEG_INFINITY,
        heating_kwh: vec![0.0; ZONE_COUNT],
        cooling_kwh: vec![0.0; ZONE_COUNT],
        ..Default::default()
    };
    let mut t_in: Vec<Vec<f64>> = (0..ZONE_COUNT).map(|_| Vec::with_capacity(duration)).collect();
    let mut neighbors: Vec<(f64, f64)> = Vec::with_capacity(ZONE_COUNT);

    for (k, rec) in weather.iter().enumerate().take(duration) {
        let irradiance: Vec<f64> = zones
            .iter()
            .map(|z| z.azimuth_deg.map_or(0.0, |az| facade_irradiance(rec, az, spec.latitude_deg)))
            .collect();
        for _ in 0..substeps {
            let prev = states;
            for (i, zone) in zones.iter().enumerate() {
                neighbors.clear();
                neighbors.extend((0..ZONE_COUNT).filter(|&j| ua[i][j] > 0.0).map(|j| (ua[i][j], prev[j].t_in)));
                let inp = ZoneInputs {
                    step: k,
                    t_out: rec.t_out,
                    wind: rec.wind,
                    irradiance: irradiance[i],
                    occupants: schedules.occupancy[i][k],
                    equipment_w: schedules.equipment[i][k],
                    lights_on: schedules.lighting[k],
                    window_open: i < WINDOW_COUNT && signals.windows.open[i][k],
                    heat_sp: signals.setpoints.heating[i][k],
                    cool_sp: signals.setpoints.cooling[i][k],
                    neighbors: &neighbors,
                };
                let (next, flux) = step_zone(zone, spec, &prev[i], &inp, dt, options.integrator)?;
                let residual = flux.audit(zone.capacitance, next.t_in - prev[i].t_in, dt);
                report.max_energy_residual = report.max_energy_residual.max(residual);
                let kwh = flux.hvac.abs() * dt / 3.6e6;
                if flux.hvac > 0.0 {
                    report.heating_kwh[i] += kwh;
                } else {
                    report.cooling_kwh[i] += kwh;
                }
                states[i] = next;
            }
        }
        for (series, s) in t_in.iter_mut().zip(&states) {
            report.min_t_in = report.min_t_in.min(s.t_in);
            report.max_t_in = report.max_t_in.max(s.t_in);
            series.push(s.t_in);
        }
    }

    let flag = |b: bool| if b { 1.0 } else { 0.0 };
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(DATASET_COLUMNS.len());
    let w = &weather[..duration];
    columns.push(w.iter().map(|r| r.t_out).collect());
    columns.push(w.iter().map(|r| r.rh).collect());
    columns.push(w.iter().map(|r| r.wind).collect());
    columns.push(w.iter().map(|r| r.dni).collect());
    columns.push(w.iter().map(|r| r.dhi).collect());
    columns.push(schedules.holiday[..duration].iter().map(|&b| flag(b)).collect());
    columns.extend(schedules.occupancy.iter().map(|s| s[..duration].to_vec()));
    columns.extend(schedules.equipment.iter().map(|s| s[..duration].to_vec()));
    columns.extend(signals.windows.open.iter().map(|s| s[..duration].iter().map(|&b| flag(b)).collect()));
    columns.extend(signals.setpoints.heating.iter().map(|s| s[..duration].to_vec()));
    columns.extend(signals.setpoints.cooling.iter().map(|s| s[..duration].to_vec()));
    columns.extend(t_in);
    let dataset = SimulatedDataset::new(w.iter().map(|r| r.timestamp).collect(), columns)?;
    Ok((dataset, report))
}

/// Everything needed to generate a dataset from one seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub days: usize,
    pub start: chrono::NaiveDateTime,
    pub holidays: super::HolidayCalendar,
    pub window_open_probability: f64,
    pub building: BuildingSpec,
    pub climate: super::ClimateParams,
    pub options: SimulationOptions,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            days: 365,
            start: super::Calendar::default_start(),
            holidays: super::HolidayCalendar::default(),
            window_open_probability: 0.05,
            building: BuildingSpec::default(),
            climate: super::ClimateParams::default(),
            options: SimulationOptions::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.days == 0 {
            return Err(Error::config("simulator.days must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.window_open_probability) {
            return Err(Error::config("simulator.window_open_probability must lie in [0, 1]"));
        }
        self.holidays.validate()?;
        self.building.validate()?;
        self.climate.validate()?;
        self.options.substeps()?;
        Ok(())
    }

    pub fn calendar(&self) -> super::Calendar {
        super::Calendar::new(self.start, self.days, self.holidays.clone())
    }
}

/// Inputs drawn for a scenario, each from its own stream of the seed.
pub struct ScenarioInputs {
    pub weather: Vec<WeatherRecord>,
    pub schedules: ScheduleSet,
    pub signals: SignalSet,
}

pub fn scenario_inputs(cfg: &ScenarioConfig, seed: u64) -> Result<ScenarioInputs> {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    cfg.validate()?;
    let stream = |s: u64| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(s);
        rng
    };
    let cal = cfg.calendar();
    let weather = super::synth_weather(&mut stream(1), cfg.start, cfg.days, &cfg.climate, cfg.building.latitude_deg)?;
    let schedules = super::generate_schedules(&mut stream(2), &cal, &cfg.building.zones());
    let setpoints = super::generate_mprs_setpoints(&mut stream(3), &cal);
    let windows = super::generate_prbs_windows(&mut stream(4), &cal, cfg.window_open_probability)?;
    Ok(ScenarioInputs { weather, schedules, signals: SignalSet { setpoints, windows } })
}

pub fn run_scenario(cfg: &ScenarioConfig, seed: u64) -> Result<(SimulatedDataset, SimulationReport)> {
    let inputs = scenario_inputs(cfg, seed)?;
    simulate_detailed(
        &cfg.building,
        &inputs.weather,
        &inputs.schedules,
        &inputs.signals,
        cfg.calendar().steps,
        &cfg.options,
    )
}

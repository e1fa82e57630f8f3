//! Five-zone lumped-capacitance office model used as the data source.

pub mod calendar;
pub mod dataset;
pub mod signals;
pub mod simulate;
pub mod thermal;
pub mod ventilation;
pub mod weather;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use calendar::{Calendar, HolidayCalendar, STEPS_PER_DAY, STEP_SECONDS};
pub use dataset::{SimulatedDataset, DATASET_COLUMNS};
pub use signals::{
    generate_mprs_setpoints, generate_prbs_windows, generate_schedules, ScheduleSet, SetpointSeries,
    SignalSet, WindowSignals,
};
pub use simulate::{
    run_scenario, scenario_inputs, simulate, simulate_detailed, ScenarioConfig, ScenarioInputs, SimulationOptions,
    SimulationReport,
};
pub use thermal::{step_zone, zone_derivative, FluxBreakdown, Integrator, ZoneInputs, ZoneState};
pub use ventilation::{ventilation_flow, VentilationParams};
pub use weather::{load_weather_csv, synth_weather, write_weather_csv, ClimateParams, WeatherRecord};

pub const ZONE_COUNT: usize = 5;
pub const WINDOW_COUNT: usize = 4;
pub const GRAVITY: f64 = 9.81;

/// Geometry and derived thermal properties of one zone.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ZoneSpec {
    pub name: String,
    pub floor_area: f64,
    pub volume: f64,
    /// Opaque exterior wall area (gross wall minus glazing).
    pub wall_area: f64,
    pub window_area: f64,
    /// Facade azimuth measured from south, positive towards west (degrees).
    pub azimuth_deg: Option<f64>,
    pub capacitance: f64,
    pub heating_capacity: f64,
    pub cooling_capacity: f64,
    /// Proportional thermostat gain (W/K).
    pub thermostat_gain: f64,
}

impl ZoneSpec {
    pub fn has_window(&self) -> bool {
        self.window_area > 0.0
    }

    /// Conductance to outside through walls and glazing (W/K).
    pub fn ua_ext(&self, spec: &BuildingSpec) -> f64 {
        spec.u_ext * self.wall_area + spec.u_window * self.window_area
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BuildingSpec {
    pub length: f64,
    pub width: f64,
    pub height: f64,
    pub perimeter_depth: f64,
    pub u_ext: f64,
    pub u_int: f64,
    pub u_window: f64,
    pub window_to_wall: f64,
    pub g_value: f64,
    pub shade_threshold: f64,
    /// Fraction of solar gain transmitted while the shade is down.
    pub shade_factor: f64,
    pub capacitance_multiplier: f64,
    pub air_density: f64,
    pub air_cp: f64,
    pub occupant_gain_w: f64,
    pub lighting_w_m2: f64,
    pub heating_w_m2: f64,
    pub cooling_w_m2: f64,
    /// Closed-loop time constant of the thermostat; sets its gain as `C / tau`.
    pub thermostat_tau_s: f64,
    pub latitude_deg: f64,
    pub ventilation: VentilationParams,
}

impl Default for BuildingSpec {
    fn default() -> Self {
        Self {
            length: 30.0,
            width: 15.0,
            height: 2.4,
            perimeter_depth: 3.7,
            u_ext: 2.8,
            u_int: 1.6,
            u_window: 0.7,
            window_to_wall: 0.3,
            g_value: 0.4,
            shade_threshold: 23.0,
            shade_factor: 0.35,
            capacitance_multiplier: 5.0,
            air_density: 1.2,
            air_cp: 1005.0,
            occupant_gain_w: 100.0,
            lighting_w_m2: 8.0,
            heating_w_m2: 1000.0,
            cooling_w_m2: 250.0,
            thermostat_tau_s: 60.0,
            latitude_deg: 59.9,
            ventilation: VentilationParams::default(),
        }
    }
}

impl BuildingSpec {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("length", self.length),
            ("width", self.width),
            ("height", self.height),
            ("perimeter_depth", self.perimeter_depth),
            ("u_ext", self.u_ext),
            ("u_int", self.u_int),
            ("u_window", self.u_window),
            ("capacitance_multiplier", self.capacitance_multiplier),
            ("air_density", self.air_density),
            ("air_cp", self.air_cp),
            ("thermostat_tau_s", self.thermostat_tau_s),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(format!("simulator.{name} must be positive, got {v}")));
            }
        }
        let non_negative = [
            ("g_value", self.g_value),
            ("occupant_gain_w", self.occupant_gain_w),
            ("lighting_w_m2", self.lighting_w_m2),
            ("heating_w_m2", self.heating_w_m2),
            ("cooling_w_m2", self.cooling_w_m2),
        ];
        for (name, v) in non_negative {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(format!("simulator.{name} must be non-negative, got {v}")));
            }
        }
        for (name, v) in [("window_to_wall", self.window_to_wall), ("shade_factor", self.shade_factor)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::config(format!("simulator.{name} must lie in [0, 1], got {v}")));
            }
        }
        if 2.0 * self.perimeter_depth >= self.width.min(self.length) {
            return Err(Error::config("simulator.perimeter_depth leaves no core zone"));
        }
        if !(-90.0..=90.0).contains(&self.latitude_deg) {
            return Err(Error::config("simulator.latitude_deg must lie in [-90, 90]"));
        }
        self.ventilation.validate()
    }

    fn zone_capacitance(&self, volume: f64) -> f64 {
        self.capacitance_multiplier * self.air_density * self.air_cp * volume
    }

    /// Zones in order south, east, north, west, core. Exterior zones are
    /// trapezoids of the given perimeter depth.
    pub fn zones(&self) -> Vec<ZoneSpec> {
        let (l, w, h, p) = (self.length, self.width, self.height, self.perimeter_depth);
        let facade = |name: &str, side: f64, azimuth: f64| {
            let floor = (side + side - 2.0 * p) / 2.0 * p;
            let gross = side * h;
            let glazing = self.window_to_wall * gross;
            let volume = floor * h;
            ZoneSpec {
                name: name.to_string(),
                floor_area: floor,
                volume,
                wall_area: gross - glazing,
                window_area: glazing,
                azimuth_deg: Some(azimuth),
                capacitance: self.zone_capacitance(volume),
                heating_capacity: self.heating_w_m2 * floor,
                cooling_capacity: self.cooling_w_m2 * floor,
                thermostat_gain: self.zone_capacitance(volume) / self.thermostat_tau_s,
            }
        };
        let core_floor = (l - 2.0 * p) * (w - 2.0 * p);
        vec![
            facade("south", l, 0.0),
            facade("east", w, -90.0),
            facade("north", l, 180.0),
            facade("west", w, 90.0),
            ZoneSpec {
                name: "core".to_string(),
                floor_area: core_floor,
                volume: core_floor * h,
                wall_area: 0.0,
                window_area: 0.0,
                azimuth_deg: None,
                capacitance: self.zone_capacitance(core_floor * h),
                heating_capacity: self.heating_w_m2 * core_floor,
                cooling_capacity: self.cooling_w_m2 * core_floor,
                thermostat_gain: self.zone_capacitance(core_floor * h) / self.thermostat_tau_s,
            },
        ]
    }

    /// Interior partitions as `(zone_a, zone_b, area)`.
    pub fn partitions(&self) -> Vec<(usize, usize, f64)> {
        let (l, w, h, p) = (self.length, self.width, self.height, self.perimeter_depth);
        let corner = p * std::f64::consts::SQRT_2 * h;
        vec![
            (0, 1, corner),
            (1, 2, corner),
            (2, 3, corner),
            (3, 0, corner),
            (0, 4, (l - 2.0 * p) * h),
            (1, 4, (w - 2.0 * p) * h),
            (2, 4, (l - 2.0 * p) * h),
            (3, 4, (w - 2.0 * p) * h),
        ]
    }

    /// Symmetric interior conductance matrix (W/K).
    pub fn interior_ua(&self) -> [[f64; ZONE_COUNT]; ZONE_COUNT] {
        let mut ua = [[0.0; ZONE_COUNT]; ZONE_COUNT];
        for (a, b, area) in self.partitions() {
            ua[a][b] += self.u_int * area;
            ua[b][a] += self.u_int * area;
        }
        ua
    }
}

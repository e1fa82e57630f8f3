use serde::{Deserialize, Serialize};

use super::GRAVITY;
use crate::error::{Error, Result};

/// Wind-and-stack opening coefficients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VentilationParams {
    pub open_area: f64,
    pub wind_coefficient: f64,
    pub discharge_coefficient: f64,
    pub stack_height: f64,
}

impl Default for VentilationParams {
    fn default() -> Self {
        Self { open_area: 1.0, wind_coefficient: 0.3, discharge_coefficient: 0.6, stack_height: 0.8 }
    }
}

impl VentilationParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("open_area", self.open_area),
            ("wind_coefficient", self.wind_coefficient),
            ("discharge_coefficient", self.discharge_coefficient),
            ("stack_height", self.stack_height),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(format!("simulator.ventilation.{name} must be non-negative, got {v}")));
            }
        }
        Ok(())
    }

    pub fn flow(&self, wind: f64, t_in: f64, t_out: f64) -> f64 {
        ventilation_flow(self.open_area, wind, t_in, t_out, self)
    }
}

/// Volumetric airflow (m³/s) through an opening of `a_open` m².
pub fn ventilation_flow(a_open: f64, wind: f64, t_in: f64, t_out: f64, p: &VentilationParams) -> f64 {
    let a = a_open.max(0.0);
    let q_wind = p.wind_coefficient * a * wind.max(0.0);
    let dt = (t_in - t_out).abs();
    let q_stack = p.discharge_coefficient * a * (2.0 * GRAVITY * p.stack_height * dt / (t_in + 273.15)).sqrt();
    q_wind.hypot(q_stack)
}

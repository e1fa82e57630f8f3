use serde::{Deserialize, Serialize};

use super::{BuildingSpec, ZoneSpec};
use crate::error::{Error, Result};

pub const DIVERGENCE_BOUNDS: (f64, f64) = (-50.0, 60.0);

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Integrator {
    /// Exact solution of the linear zone ODE with coefficients frozen over the step.
    #[default]
    Exponential,
    Euler,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ZoneState {
    pub t_in: f64,
    pub shade_active: bool,
    pub window_open: bool,
    /// Signed HVAC power, positive when heating (W).
    pub hvac_power: f64,
}

impl ZoneState {
    pub fn new(t_in: f64) -> Self {
        Self { t_in, shade_active: false, window_open: false, hvac_power: 0.0 }
    }
}

/// Boundary conditions for one zone over one step.
#[derive(Clone, Debug)]
pub struct ZoneInputs<'a> {
    pub step: usize,
    pub t_out: f64,
    pub wind: f64,
    /// Irradiance on the zone's facade (W/m²).
    pub irradiance: f64,
    pub occupants: f64,
    pub equipment_w: f64,
    pub lights_on: bool,
    pub window_open: bool,
    pub heat_sp: f64,
    pub cool_sp: f64,
    /// `(conductance W/K, neighbour temperature)` for each adjacent zone.
    pub neighbors: &'a [(f64, f64)],
}

/// Heat flows into the zone, averaged over a step (W).
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FluxBreakdown {
    pub envelope: f64,
    pub interior: f64,
    pub ventilation: f64,
    pub solar: f64,
    pub internal: f64,
    pub hvac: f64,
}

impl FluxBreakdown {
    pub fn total(&self) -> f64 {
        self.envelope + self.interior + self.ventilation + self.solar + self.internal + self.hvac
    }

    /// Sum of magnitudes, the scale for round-off in [`Self::total`].
    pub fn gross(&self) -> f64 {
        [self.envelope, self.interior, self.ventilation, self.solar, self.internal, self.hvac].iter().map(|v| v.abs()).sum()
    }

    /// Relative mismatch between heat stored over `dt` and the supplied fluxes.
    pub fn audit(&self, capacitance: f64, delta_t: f64, dt: f64) -> f64 {
        let stored = capacitance * delta_t;
        let supplied = self.total() * dt;
        let scale = stored.abs().max(self.gross() * dt);
        if scale == 0.0 { 0.0 } else { (stored - supplied).abs() / scale }
    }
}

/// Linear form `dT/dt = (drive - conductance * T + hvac) / C` of the zone balance.
struct Balance {
    ua_ext: f64,
    ua_int: f64,
    g_vent: f64,
    solar: f64,
    internal: f64,
    t_out: f64,
    t_adj: f64,
}

impl Balance {
    fn new(zone: &ZoneSpec, spec: &BuildingSpec, t_in: f64, inp: &ZoneInputs) -> Self {
        let ua_int: f64 = inp.neighbors.iter().map(|(ua, _)| ua).sum();
        let t_adj = if ua_int > 0.0 { inp.neighbors.iter().map(|(ua, t)| ua * t).sum::<f64>() / ua_int } else { 0.0 };
        let g_vent = if zone.has_window() && inp.window_open {
            spec.air_density * spec.air_cp * spec.ventilation.flow(inp.wind, t_in, inp.t_out)
        } else {
            0.0
        };
        let shade = if zone.has_window() && inp.t_out > spec.shade_threshold { spec.shade_factor } else { 1.0 };
        let lights = if inp.lights_on { spec.lighting_w_m2 * zone.floor_area } else { 0.0 };
        Self {
            ua_ext: zone.ua_ext(spec),
            ua_int,
            g_vent,
            solar: spec.g_value * zone.window_area * inp.irradiance.max(0.0) * shade,
            internal: spec.occupant_gain_w * inp.occupants + inp.equipment_w + lights,
            t_out: inp.t_out,
            t_adj,
        }
    }

    fn conductance(&self) -> f64 {
        self.ua_ext + self.ua_int + self.g_vent
    }

    fn drive(&self) -> f64 {
        (self.ua_ext + self.g_vent) * self.t_out + self.ua_int * self.t_adj + self.solar + self.internal
    }

    fn fluxes(&self, t: f64, hvac: f64) -> FluxBreakdown {
        FluxBreakdown {
            envelope: self.ua_ext * (self.t_out - t),
            interior: self.ua_int * (self.t_adj - t),
            ventilation: self.g_vent * (self.t_out - t),
            solar: self.solar,
            internal: self.internal,
            hvac,
        }
    }
}

/// Instantaneous `dT/dt` (K/s) using the state's current HVAC output.
pub fn zone_derivative(zone: &ZoneSpec, spec: &BuildingSpec, state: &ZoneState, inp: &ZoneInputs) -> f64 {
    let b = Balance::new(zone, spec, state.t_in, inp);
    b.fluxes(state.t_in, state.hvac_power).total() / zone.capacitance
}

/// Proportional thermostat output at temperature `t`, clipped to capacity.
pub fn thermostat_power(zone: &ZoneSpec, t: f64, heat_sp: f64, cool_sp: f64) -> f64 {
    let k = zone.thermostat_gain;
    if t < heat_sp {
        (k * (heat_sp - t)).min(zone.heating_capacity)
    } else if t > cool_sp {
        -(k * (t - cool_sp)).min(zone.cooling_capacity)
    } else {
        0.0
    }
}

/// Thermostat as `q = offset + slope * T` on one of its five linear pieces.
struct Regime {
    offset: f64,
    slope: f64,
    lo: f64,
    hi: f64,
}

fn regimes(zone: &ZoneSpec, heat_sp: f64, cool_sp: f64) -> [Regime; 5] {
    let k = zone.thermostat_gain;
    let (ch, cc) = (zone.heating_capacity, zone.cooling_capacity);
    let sat_heat = if k > 0.0 { heat_sp - ch / k } else { f64::NEG_INFINITY };
    let sat_cool = if k > 0.0 { cool_sp + cc / k } else { f64::INFINITY };
    [
        Regime { offset: ch, slope: 0.0, lo: f64::NEG_INFINITY, hi: sat_heat },
        Regime { offset: k * heat_sp, slope: -k, lo: sat_heat, hi: heat_sp },
        Regime { offset: 0.0, slope: 0.0, lo: heat_sp, hi: cool_sp },
        Regime { offset: k * cool_sp, slope: -k, lo: cool_sp, hi: sat_cool },
        Regime { offset: -cc, slope: 0.0, lo: sat_cool, hi: f64::INFINITY },
    ]
}

/// Advances one zone by `dt` seconds. Neighbour temperatures and airflow are
/// held at their start-of-step values. The exponential integrator follows the
/// thermostat piecewise, switching pieces at the exact crossing times.
pub fn step_zone(
    zone: &ZoneSpec,
    spec: &BuildingSpec,
    state: &ZoneState,
    inp: &ZoneInputs,
    dt: f64,
    integrator: Integrator,
) -> Result<(ZoneState, FluxBreakdown)> {
    if !(dt > 0.0) {
        return Err(Error::config(format!("simulation step must be positive, got {dt}")));
    }
    if inp.heat_sp > inp.cool_sp {
        return Err(Error::Simulation {
            step: inp.step,
            reason: format!("heating setpoint {} above cooling setpoint {}", inp.heat_sp, inp.cool_sp),
        });
    }
    let t0 = state.t_in;
    let bal = Balance::new(zone, spec, t0, inp);
    let c = zone.capacitance;
    let (cond, drive) = (bal.conductance(), bal.drive());

    let (t1, t_mean, hvac_mean) = match integrator {
        Integrator::Euler => {
            let q = thermostat_power(zone, t0, inp.heat_sp, inp.cool_sp);
            (t0 + dt / c * (drive - cond * t0 + q), t0, q)
        }
        Integrator::Exponential => {
            let pieces = regimes(zone, inp.heat_sp, inp.cool_sp);
            let (mut t, mut left) = (t0, dt);
            let (mut t_int, mut q_int) = (0.0, 0.0);
            // The right-hand side is continuous and decreasing in T, so each
            // boundary is crossed at most once.
            for _ in 0..=pieces.len() {
                if left <= 0.0 {
                    break;
                }
                let rising = drive - cond * t + thermostat_power(zone, t, inp.heat_sp, inp.cool_sp) > 0.0;
                let r = pieces
                    .iter()
                    .find(|r| if rising { t >= r.lo && t < r.hi } else { t > r.lo && t <= r.hi })
                    .unwrap_or(&pieces[2]);
                let cond_r = cond - r.slope;
                let lambda = cond_r / c;
                let t_eq = (drive + r.offset) / cond_r;
                let bound = if t_eq > r.hi { Some(r.hi) } else if t_eq < r.lo { Some(r.lo) } else { None };
                let seg = match bound {
                    Some(b) if (t - t_eq) != 0.0 => {
                        let ratio = (t - t_eq) / (b - t_eq);
                        if ratio > 1.0 { (ratio.ln() / lambda).min(left) } else { 0.0 }
                    }
                    _ => left,
                };
                let frac = -(-lambda * seg).exp_m1();
                let seg_int = t_eq * seg + (t - t_eq) * frac / lambda;
                t_int += seg_int;
                q_int += r.offset * seg + r.slope * seg_int;
                t = if seg < left { bound.unwrap_or(t) } else { t_eq + (t - t_eq) * (1.0 - frac) };
                left -= seg;
            }
            (t, t_int / dt, q_int / dt)
        }
    };
    let (lo, hi) = DIVERGENCE_BOUNDS;
    if !(t1 >= lo && t1 <= hi) {
        return Err(Error::Simulation {
            step: inp.step,
            reason: format!("zone {} temperature {t1:.3} °C left [{lo}, {hi}]", zone.name),
        });
    }
    let next = ZoneState {
        t_in: t1,
        shade_active: zone.has_window() && inp.t_out > spec.shade_threshold,
        window_open: zone.has_window() && inp.window_open,
        hvac_power: hvac_mean,
    };
    Ok((next, bal.fluxes(t_mean, hvac_mean)))
}

use rand::Rng;

use super::calendar::Calendar;
use super::{ZoneSpec, WINDOW_COUNT, ZONE_COUNT};
use crate::error::{Error, Result};

pub const SETBACK_HEATING: f64 = 15.0;
pub const SETBACK_COOLING: f64 = 30.0;
pub const COOLING_OFFSET: f64 = 5.0;
pub const MPRS_LEVELS: usize = 9;
pub const MPRS_MAX_HOLD: usize = 16;
/// Steps each window stays open after a trigger.
pub const PULSE_STEPS: usize = 2;

pub fn mprs_level(i: usize) -> f64 {
    18.0 + 0.5 * i as f64
}

/// Heating and cooling setpoints, indexed `[zone][step]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SetpointSeries {
    pub heating: Vec<Vec<f64>>,
    pub cooling: Vec<Vec<f64>>,
}

/// Window opening signals, indexed `[window][step]`.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowSignals {
    pub open: Vec<Vec<bool>>,
}

impl WindowSignals {
    /// Number of triggers: each run of open steps holds `len / PULSE_STEPS` events.
    pub fn event_count(&self, window: usize) -> usize {
        let mut events = 0;
        let mut run = 0usize;
        for &o in self.open[window].iter().chain(std::iter::once(&false)) {
            if o {
                run += 1;
            } else {
                events += run.div_ceil(PULSE_STEPS);
                run = 0;
            }
        }
        events
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SignalSet {
    pub setpoints: SetpointSeries,
    pub windows: WindowSignals,
}

/// Occupancy and internal-load schedules, indexed `[zone][step]` where zoned.
#[derive(Clone, Debug, PartialEq)]
pub struct ScheduleSet {
    pub occupancy: Vec<Vec<f64>>,
    pub equipment: Vec<Vec<f64>>,
    pub lighting: Vec<bool>,
    pub holiday: Vec<bool>,
}

impl ScheduleSet {
    pub fn len(&self) -> usize {
        self.lighting.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lighting.is_empty()
    }
}

/// Randomly held setpoint levels while occupied, setback otherwise. Each
/// occupied period starts with a fresh draw.
pub fn generate_mprs_setpoints(rng: &mut impl Rng, calendar: &Calendar) -> SetpointSeries {
    let steps = calendar.steps;
    let occupied: Vec<bool> = (0..steps).map(|s| calendar.is_occupied(s)).collect();
    let mut heating = vec![vec![SETBACK_HEATING; steps]; ZONE_COUNT];
    let mut cooling = vec![vec![SETBACK_COOLING; steps]; ZONE_COUNT];
    for z in 0..ZONE_COUNT {
        let mut hold = 0usize;
        let mut level = SETBACK_HEATING;
        for s in 0..steps {
            if !occupied[s] {
                hold = 0;
                continue;
            }
            if hold == 0 {
                level = mprs_level(rng.random_range(0..MPRS_LEVELS));
                hold = rng.random_range(1..=MPRS_MAX_HOLD);
            }
            heating[z][s] = level;
            cooling[z][s] = level + COOLING_OFFSET;
            hold -= 1;
        }
    }
    SetpointSeries { heating, cooling }
}

/// Each step outside an open pulse triggers a new pulse with probability `p_open`.
pub fn generate_prbs_windows(rng: &mut impl Rng, calendar: &Calendar, p_open: f64) -> Result<WindowSignals> {
    if !(0.0..=1.0).contains(&p_open) {
        return Err(Error::config(format!("window open probability must lie in [0, 1], got {p_open}")));
    }
    let mut open = vec![vec![false; calendar.steps]; WINDOW_COUNT];
    for series in open.iter_mut() {
        let mut remaining = 0usize;
        for slot in series.iter_mut() {
            if remaining == 0 && rng.random_bool(p_open) {
                remaining = PULSE_STEPS;
            }
            if remaining > 0 {
                *slot = true;
                remaining -= 1;
            }
        }
    }
    Ok(WindowSignals { open })
}

/// Two-state occupancy: each regular occupant arrives between 07:00 and
/// 09:00, leaves between 16:00 and 19:00 and may step out around lunch.
pub fn generate_schedules(rng: &mut impl Rng, calendar: &Calendar, zones: &[ZoneSpec]) -> ScheduleSet {
    const STANDBY_W: f64 = 60.0;
    const PER_OCCUPANT_W: f64 = 80.0;
    let steps = calendar.steps;
    let per_hour = 4usize;
    let day_steps = super::STEPS_PER_DAY;
    let mut occupancy = vec![vec![0.0; steps]; zones.len()];
    let mut equipment = vec![vec![0.0; steps]; zones.len()];
    let days = steps.div_ceil(day_steps);
    for (z, zone) in zones.iter().enumerate() {
        let staff = ((zone.floor_area / 8.0).round() as usize).clamp(1, 30);
        for day in 0..days {
            let day_start = day * day_steps;
            if day_start >= steps || !calendar.is_working_day(day_start) {
                continue;
            }
            for _ in 0..staff {
                if !rng.random_bool(0.9) {
                    continue;
                }
                let arrive = 7 * per_hour + rng.random_range(0..2 * per_hour);
                let leave = 16 * per_hour + rng.random_range(0..=3 * per_hour);
                let lunch_start = 11 * per_hour + rng.random_range(0..6);
                let lunch_len = if rng.random_bool(0.7) { rng.random_range(2..=4) } else { 0 };
                for k in arrive..leave {
                    if (lunch_start..lunch_start + lunch_len).contains(&k) {
                        continue;
                    }
                    let s = day_start + k;
                    if s < steps && calendar.is_occupied(s) {
                        occupancy[z][s] += 1.0;
                    }
                }
            }
        }
        for s in 0..steps {
            let jitter = rng.random_range(0.9..1.1);
            equipment[z][s] = ((STANDBY_W + PER_OCCUPANT_W * occupancy[z][s]) * jitter).min(1000.0);
        }
    }
    ScheduleSet {
        occupancy,
        equipment,
        lighting: (0..steps).map(|s| calendar.is_occupied(s)).collect(),
        holiday: (0..steps).map(|s| calendar.is_holiday(s)).collect(),
    }
}

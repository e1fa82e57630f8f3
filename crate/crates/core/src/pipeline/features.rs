use std::f64::consts::PI;

use chrono::{Datelike, NaiveDateTime, Timelike};

use crate::building_sim::HolidayCalendar;

/// Version tag for the feature layout below; stored in checkpoints.
pub const FEATURE_LAYOUT_VERSION: u32 = 1;

pub const WEATHER_FEATURES: [&str; 5] = ["t_out", "h_out", "w_out", "l_norm", "l_hor"];
pub const TIME_FEATURES: [&str; 6] = ["hour_sin", "hour_cos", "dow_sin", "dow_cos", "month_sin", "month_cos"];

/// Encoder inputs in model column order.
pub fn past_features() -> Vec<String> {
    let mut f: Vec<String> = WEATHER_FEATURES.iter().chain(&TIME_FEATURES).map(|s| s.to_string()).collect();
    f.push("hol".into());
    f.extend((1..=5).map(|z| format!("e_{z}")));
    f.extend((1..=5).map(|z| format!("occu_{z}")));
    f.extend((1..=4).map(|w| format!("ws_{w}")));
    f.extend((1..=5).map(|z| format!("sp_heat_{z}")));
    f.extend(target_features());
    f
}

/// Decoder inputs: values known over the forecast horizon.
pub fn future_features() -> Vec<String> {
    let mut f: Vec<String> = WEATHER_FEATURES.iter().chain(&TIME_FEATURES).map(|s| s.to_string()).collect();
    f.push("hol".into());
    f.extend((1..=4).map(|w| format!("ws_{w}")));
    f.extend((1..=5).map(|z| format!("sp_heat_{z}")));
    f
}

pub fn target_features() -> Vec<String> {
    (1..=5).map(|z| format!("t_in_{z}")).collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeFeatures {
    pub hour: (f64, f64),
    pub day_of_week: (f64, f64),
    pub month: (f64, f64),
    pub holiday: f64,
}

impl TimeFeatures {
    /// Values in [`TIME_FEATURES`] order.
    pub fn cyclic(&self) -> [f64; 6] {
        [self.hour.0, self.hour.1, self.day_of_week.0, self.day_of_week.1, self.month.0, self.month.1]
    }
}

fn cycle(u: f64, period: f64) -> (f64, f64) {
    let a = 2.0 * PI * u / period;
    (a.sin(), a.cos())
}

/// Fractional hour of day, weekday from Monday = 0, month from January = 0.
pub fn encode_time_features(ts: NaiveDateTime, holidays: &HolidayCalendar) -> TimeFeatures {
    let hour = ts.hour() as f64 + ts.minute() as f64 / 60.0 + ts.second() as f64 / 3600.0;
    TimeFeatures {
        hour: cycle(hour, 24.0),
        day_of_week: cycle(ts.weekday().num_days_from_monday() as f64, 7.0),
        month: cycle(ts.month0() as f64, 12.0),
        holiday: if holidays.is_holiday(ts.date()) { 1.0 } else { 0.0 },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::building_sim::Calendar;
    use chrono::Duration;

    #[test]
    fn layout_sizes() {
        assert_eq!(past_features().len(), 36);
        assert_eq!(future_features().len(), 21);
        let all = past_features();
        assert_eq!(all.iter().collect::<std::collections::BTreeSet<_>>().len(), 36);
    }

    #[test]
    fn quarter_periods() {
        let cal = HolidayCalendar::default();
        let midnight = Calendar::default_start();
        let tf = encode_time_features(midnight, &cal);
        assert_eq!(tf.hour, (0.0, 1.0));
        assert_eq!(tf.holiday, 1.0);
        let six = encode_time_features(midnight + Duration::hours(6), &cal);
        assert!((six.hour.0 - 1.0).abs() < 1e-15 && six.hour.1.abs() < 1e-15);
        // 2023-01-02 is a Monday.
        let monday = encode_time_features(midnight + Duration::days(1), &cal);
        assert_eq!(monday.day_of_week, (0.0, 1.0));
        assert_eq!(monday.month, (0.0, 1.0));
        assert_eq!(monday.holiday, 0.0);
    }

    #[test]
    fn unit_circle_for_a_year() {
        let cal = HolidayCalendar::default();
        let start = Calendar::default_start();
        for k in 0..35040 {
            let tf = encode_time_features(start + Duration::minutes(15 * k), &cal);
            for (s, c) in [tf.hour, tf.day_of_week, tf.month] {
                assert!((s * s + c * c - 1.0).abs() < 1e-12);
            }
        }
    }
}

use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime, Timelike, Weekday};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Length of one record in seconds.
pub const STEP_SECONDS: i64 = 900;
/// Records per day at 15-minute granularity.
pub const STEPS_PER_DAY: usize = 96;

/// Fixed-date public holidays given as `MM-DD`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HolidayCalendar {
    dates: Vec<String>,
}

impl Default for HolidayCalendar {
    fn default() -> Self {
        Self::new(["01-01", "05-01", "05-17", "12-24", "12-25", "12-26", "12-31"]).expect("valid defaults")
    }
}

impl HolidayCalendar {
    pub fn new<S: AsRef<str>>(dates: impl IntoIterator<Item = S>) -> Result<Self> {
        let dates: Vec<String> = dates.into_iter().map(|s| s.as_ref().to_string()).collect();
        let cal = Self { dates };
        cal.validate()?;
        Ok(cal)
    }

    pub fn empty() -> Self {
        Self { dates: Vec::new() }
    }

    pub fn validate(&self) -> Result<()> {
        for d in &self.dates {
            Self::parse(d)?;
        }
        Ok(())
    }

    fn parse(s: &str) -> Result<(u32, u32)> {
        let bad = || Error::config(format!("holiday `{s}` is not MM-DD"));
        let (m, d) = s.split_once('-').ok_or_else(bad)?;
        let (m, d): (u32, u32) = (m.parse().map_err(|_| bad())?, d.parse().map_err(|_| bad())?);
        // 2024 is a leap year, so 02-29 is accepted.
        NaiveDate::from_ymd_opt(2024, m, d).ok_or_else(bad)?;
        Ok((m, d))
    }

    pub fn is_holiday(&self, date: NaiveDate) -> bool {
        self.dates.iter().filter_map(|s| Self::parse(s).ok()).any(|(m, d)| date.month() == m && date.day() == d)
    }

    pub fn dates(&self) -> &[String] {
        &self.dates
    }
}

/// Regular 15-minute time axis with working-day and occupied-hour rules.
#[derive(Clone, Debug)]
pub struct Calendar {
    pub start: NaiveDateTime,
    pub steps: usize,
    pub holidays: HolidayCalendar,
    /// Occupied hours on working days, `[open, close)` in hours.
    pub open_hour: u32,
    pub close_hour: u32,
}

impl Calendar {
    pub fn new(start: NaiveDateTime, days: usize, holidays: HolidayCalendar) -> Self {
        Self { start, steps: days * STEPS_PER_DAY, holidays, open_hour: 7, close_hour: 19 }
    }

    pub fn default_start() -> NaiveDateTime {
        NaiveDate::from_ymd_opt(2023, 1, 1).and_then(|d| d.and_hms_opt(0, 0, 0)).expect("valid date")
    }

    pub fn timestamp(&self, step: usize) -> NaiveDateTime {
        self.start + Duration::seconds(STEP_SECONDS * step as i64)
    }

    pub fn timestamps(&self) -> Vec<NaiveDateTime> {
        (0..self.steps).map(|s| self.timestamp(s)).collect()
    }

    pub fn is_holiday(&self, step: usize) -> bool {
        self.holidays.is_holiday(self.timestamp(step).date())
    }

    pub fn is_working_day(&self, step: usize) -> bool {
        let date = self.timestamp(step).date();
        !matches!(date.weekday(), Weekday::Sat | Weekday::Sun) && !self.holidays.is_holiday(date)
    }

    pub fn is_occupied(&self, step: usize) -> bool {
        let h = self.timestamp(step).hour();
        self.is_working_day(step) && h >= self.open_hour && h < self.close_hour
    }

    /// Fractional hour of day at the start of the step.
    pub fn hour_of_day(&self, step: usize) -> f64 {
        let t = self.timestamp(step);
        t.hour() as f64 + t.minute() as f64 / 60.0
    }
}

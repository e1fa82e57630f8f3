use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-feature `(min, max)` intervals mapped onto `[-1, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ScalerSpec {
    intervals: BTreeMap<String, (f64, f64)>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Scaled {
    pub value: f64,
    pub clamped: bool,
}

impl Default for ScalerSpec {
    fn default() -> Self {
        Self::standard()
    }
}

impl ScalerSpec {
    /// Fixed intervals for every model input and output.
    pub fn standard() -> Self {
        let mut m = BTreeMap::new();
        let mut put = |name: &str, lo: f64, hi: f64| {
            m.insert(name.to_string(), (lo, hi));
        };
        put("t_out", -30.0, 40.0);
        put("h_out", 0.0, 100.0);
        put("w_out", 0.0, 25.0);
        put("l_norm", 0.0, 1300.0);
        put("l_hor", 0.0, 1300.0);
        for t in ["hour_sin", "hour_cos", "dow_sin", "dow_cos", "month_sin", "month_cos"] {
            put(t, -1.0, 1.0);
        }
        put("hol", 0.0, 1.0);
        for z in 1..=5 {
            put(&format!("e_{z}"), 0.0, 1000.0);
            put(&format!("occu_{z}"), 0.0, 30.0);
            put(&format!("sp_heat_{z}"), 15.0, 30.0);
            put(&format!("t_in_{z}"), 10.0, 40.0);
        }
        for w in 1..=4 {
            put(&format!("ws_{w}"), 0.0, 1.0);
        }
        Self { intervals: m }
    }

    pub fn from_intervals(intervals: BTreeMap<String, (f64, f64)>) -> Result<Self> {
        let s = Self { intervals };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, &(lo, hi)) in &self.intervals {
            if !(lo.is_finite() && hi.is_finite() && hi > lo) {
                return Err(Error::config(format!("scaler interval for `{name}` must have max > min, got [{lo}, {hi}]")));
            }
        }
        Ok(())
    }

    pub fn interval(&self, feature: &str) -> Result<(f64, f64)> {
        self.intervals
            .get(feature)
            .copied()
            .ok_or_else(|| Error::config(format!("no scaling interval for feature `{feature}`")))
    }

    pub fn features(&self) -> impl Iterator<Item = &str> {
        self.intervals.keys().map(String::as_str)
    }

    /// Maps `[min, max]` onto `[-1, 1]`, clamping values outside the interval.
    pub fn scale(&self, feature: &str, value: f64) -> Result<Scaled> {
        let (lo, hi) = self.interval(feature)?;
        Ok(scale_with(value, lo, hi))
    }

    pub fn inverse_scale(&self, feature: &str, scaled: f64) -> Result<f64> {
        let (lo, hi) = self.interval(feature)?;
        Ok(inverse_with(scaled, lo, hi))
    }
}

pub(crate) fn scale_with(value: f64, lo: f64, hi: f64) -> Scaled {
    let clamped = !(value >= lo && value <= hi);
    let v = value.clamp(lo, hi);
    // Endpoints land exactly on -1 and +1.
    let value = if v == lo {
        -1.0
    } else if v == hi {
        1.0
    } else {
        2.0 * (v - lo) / (hi - lo) - 1.0
    };
    Scaled { value, clamped }
}

pub(crate) fn inverse_with(scaled: f64, lo: f64, hi: f64) -> f64 {
    (scaled + 1.0) * 0.5 * (hi - lo) + lo
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn endpoints_and_midpoint() {
        let s = ScalerSpec::standard();
        assert_eq!(s.scale("t_out", -30.0).unwrap().value, -1.0);
        assert_eq!(s.scale("t_out", 40.0).unwrap().value, 1.0);
        assert_eq!(s.scale("t_out", 5.0).unwrap().value, 0.0);
        for f in s.features() {
            let (lo, hi) = s.interval(f).unwrap();
            assert_eq!(s.scale(f, lo).unwrap().value, -1.0);
            assert_eq!(s.scale(f, hi).unwrap().value, 1.0);
        }
    }

    #[test]
    fn clamping_is_flagged() {
        let s = ScalerSpec::standard();
        let r = s.scale("t_in_1", 45.0).unwrap();
        assert_eq!(r, Scaled { value: 1.0, clamped: true });
        assert!(!s.scale("t_in_1", 20.0).unwrap().clamped);
        assert!(s.scale("t_in_1", f64::NAN).unwrap().clamped);
    }

    #[test]
    fn unknown_feature() {
        assert!(matches!(ScalerSpec::standard().scale("co2", 1.0), Err(Error::Config(_))));
    }

    #[test]
    fn round_trip_ten_thousand() {
        let s = ScalerSpec::standard();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let names: Vec<&str> = s.features().collect();
        for _ in 0..10_000 {
            let f = names[rng.random_range(0..names.len())];
            let (lo, hi) = s.interval(f).unwrap();
            let v = rng.random_range(lo..=hi);
            let back = s.inverse_scale(f, s.scale(f, v).unwrap().value).unwrap();
            assert!((back - v).abs() <= 1e-12, "{f}: {v} -> {back}");
        }
    }

    #[test]
    fn invalid_interval_rejected() {
        let mut m = BTreeMap::new();
        m.insert("x".to_string(), (1.0, 1.0));
        assert!(ScalerSpec::from_intervals(m).is_err());
    }

    proptest! {
        #[test]
        fn scaled_values_stay_in_unit_band(v in -1e6f64..1e6) {
            let s = ScalerSpec::standard();
            let r = s.scale("w_out", v).unwrap();
            prop_assert!((-1.0..=1.0).contains(&r.value));
            prop_assert_eq!(r.clamped, !(0.0..=25.0).contains(&v));
        }
    }
}

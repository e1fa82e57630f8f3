use crate::error::{Error, Result};
use crate::numerics::{NumericsError, Tensor};

/// `100 * RMSE / mean(actual)`, in percent.
pub fn cvrmse(actual: &[f64], predicted: &[f64]) -> Result<f64> {
    if actual.is_empty() || actual.len() != predicted.len() {
        return Err(Error::Numerics(NumericsError::Shape(format!(
            "CVRMSE needs equal non-empty series, got {} and {}",
            actual.len(),
            predicted.len()
        ))));
    }
    let n = actual.len() as f64;
    let mean = actual.iter().sum::<f64>() / n;
    if mean == 0.0 || !mean.is_finite() {
        return Err(Error::UndefinedMetric(format!("CVRMSE with mean actual {mean}")));
    }
    let mse = actual.iter().zip(predicted).map(|(a, p)| (a - p) * (a - p)).sum::<f64>() / n;
    Ok(100.0 * mse.sqrt() / mean)
}

/// One forecast with its ground truth, both in °C.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalInstance {
    pub instance: usize,
    /// `horizon x zones x levels`.
    pub quantiles: Tensor,
    /// `horizon x zones`.
    pub actual: Tensor,
}

impl EvalInstance {
    fn dims(&self) -> (usize, usize, usize) {
        let s = self.quantiles.shape();
        (s[0], s[1], s[2])
    }

    pub fn quantile(&self, step: usize, zone: usize, level: usize) -> f64 {
        let (_, z, q) = self.dims();
        self.quantiles.data()[(step * z + zone) * q + level]
    }

    pub fn actual_at(&self, step: usize, zone: usize) -> f64 {
        self.actual.data()[step * self.dims().1 + zone]
    }
}

/// Forecasts sharing horizon, zone count and quantile levels.
#[derive(Clone, Debug, PartialEq)]
pub struct ForecastSet {
    pub levels: Vec<f64>,
    pub instances: Vec<EvalInstance>,
}

impl ForecastSet {
    pub fn new(levels: Vec<f64>, instances: Vec<EvalInstance>) -> Result<Self> {
        let set = Self { levels, instances };
        set.validate()?;
        Ok(set)
    }

    /// `(horizon, zones)` of the shared layout.
    pub fn dims(&self) -> Result<(usize, usize)> {
        let first = self.instances.first().ok_or_else(|| Error::config("forecast set has no instances"))?;
        let (h, z, _) = first.dims();
        Ok((h, z))
    }

    pub fn validate(&self) -> Result<()> {
        let (h, z) = self.dims()?;
        let q = self.levels.len();
        if self.levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config(format!("quantile levels must be strictly ascending, got {:?}", self.levels)));
        }
        for inst in &self.instances {
            if inst.quantiles.shape() != [h, z, q] || inst.actual.shape() != [h, z] {
                return Err(Error::config(format!(
                    "instance {} has shapes {:?}/{:?}, expected [{h}, {z}, {q}]/[{h}, {z}]",
                    inst.instance,
                    inst.quantiles.shape(),
                    inst.actual.shape()
                )));
            }
        }
        Ok(())
    }

    pub fn median_index(&self) -> Result<usize> {
        self.levels
            .iter()
            .position(|&l| (l - 0.5).abs() < 1e-12)
            .ok_or_else(|| Error::config("forecast set has no 0.5 quantile"))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HorizonMetrics {
    /// `[zone][step]`, percent.
    pub per_zone: Vec<Vec<f64>>,
    /// Zone curves averaged per step.
    pub mean_curve: Vec<f64>,
    /// Per zone over every step and instance.
    pub zone_aggregate: Vec<f64>,
    /// Every pair of every zone.
    pub overall: f64,
    pub instances: usize,
}

impl HorizonMetrics {
    pub fn horizon(&self) -> usize {
        self.mean_curve.len()
    }
}

/// CVRMSE of the median forecast per zone and step across instances.
pub fn per_horizon_cvrmse(set: &ForecastSet) -> Result<HorizonMetrics> {
    set.validate()?;
    let (h, z) = set.dims()?;
    let med = set.median_index()?;
    let mut per_zone = vec![vec![0.0; h]; z];
    let mut zone_aggregate = vec![0.0; z];
    let (mut all_a, mut all_p) = (Vec::new(), Vec::new());
    for (zone, curve) in per_zone.iter_mut().enumerate() {
        let (mut za, mut zp) = (Vec::new(), Vec::new());
        for (step, slot) in curve.iter_mut().enumerate() {
            let a: Vec<f64> = set.instances.iter().map(|i| i.actual_at(step, zone)).collect();
            let p: Vec<f64> = set.instances.iter().map(|i| i.quantile(step, zone, med)).collect();
            *slot = cvrmse(&a, &p)?;
            za.extend(a);
            zp.extend(p);
        }
        zone_aggregate[zone] = cvrmse(&za, &zp)?;
        all_a.extend(za);
        all_p.extend(zp);
    }
    let mean_curve = (0..h).map(|s| per_zone.iter().map(|c| c[s]).sum::<f64>() / z as f64).collect();
    Ok(HorizonMetrics { per_zone, mean_curve, zone_aggregate, overall: cvrmse(&all_a, &all_p)?, instances: set.instances.len() })
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoverageRow {
    /// Nominal central probability, e.g. 0.9.
    pub level: f64,
    pub lower_quantile: f64,
    pub upper_quantile: f64,
    pub coverage: f64,
    pub crossing_freq: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoverageReport {
    pub rows: Vec<CoverageRow>,
    /// Fraction of (instance, step, zone) triples whose quantiles needed reordering.
    pub crossing_freq: f64,
    pub triples: usize,
}

fn level_index(levels: &[f64], q: f64) -> Option<usize> {
    levels.iter().position(|&l| (l - q).abs() < 1e-9)
}

/// Central intervals whose paired quantiles are present in `levels`.
pub fn central_levels_present(levels: &[f64]) -> Vec<f64> {
    [0.9, 0.95, 0.99]
        .into_iter()
        .filter(|&c| {
            let tail = (1.0 - c) / 2.0;
            level_index(levels, tail).is_some() && level_index(levels, 1.0 - tail).is_some()
        })
        .collect()
}

/// Empirical coverage of central intervals after sorting each triple's
/// quantiles ascending.
pub fn interval_coverage(set: &ForecastSet, central: &[f64]) -> Result<CoverageReport> {
    set.validate()?;
    let (h, z) = set.dims()?;
    let mut bounds = Vec::with_capacity(central.len());
    for &c in central {
        if !(c > 0.0 && c < 1.0) {
            return Err(Error::config(format!("central interval level must lie in (0, 1), got {c}")));
        }
        let tail = (1.0 - c) / 2.0;
        match (level_index(&set.levels, tail), level_index(&set.levels, 1.0 - tail)) {
            (Some(lo), Some(hi)) => bounds.push((lo, hi)),
            _ => {
                return Err(Error::config(format!(
                    "{}% interval needs quantiles {tail} and {} among {:?}",
                    c * 100.0,
                    1.0 - tail,
                    set.levels
                )))
            }
        }
    }
    let q = set.levels.len();
    let mut hits = vec![0usize; central.len()];
    let (mut crossed, mut triples) = (0usize, 0usize);
    let mut buf = vec![0.0; q];
    for inst in &set.instances {
        for step in 0..h {
            for zone in 0..z {
                buf.copy_from_slice(&inst.quantiles.data()[(step * z + zone) * q..(step * z + zone + 1) * q]);
                if buf.windows(2).any(|w| w[0] > w[1]) {
                    crossed += 1;
                    buf.sort_by(f64::total_cmp);
                }
                let a = inst.actual_at(step, zone);
                for (k, &(lo, hi)) in bounds.iter().enumerate() {
                    hits[k] += (buf[lo] <= a && a <= buf[hi]) as usize;
                }
                triples += 1;
            }
        }
    }
    let crossing_freq = crossed as f64 / triples as f64;
    let rows = central
        .iter()
        .zip(&hits)
        .map(|(&c, &n)| CoverageRow {
            level: c,
            lower_quantile: (1.0 - c) / 2.0,
            upper_quantile: 1.0 - (1.0 - c) / 2.0,
            coverage: n as f64 / triples as f64,
            crossing_freq,
        })
        .collect();
    Ok(CoverageReport { rows, crossing_freq, triples })
}

/// Mean pinball loss in °C over every instance, step, zone and level.
pub fn mean_pinball_celsius(set: &ForecastSet) -> Result<f64> {
    set.validate()?;
    let mut sum = 0.0;
    for inst in &set.instances {
        sum += crate::training::total_quantile_loss(&inst.actual, &inst.quantiles, &set.levels)?;
    }
    Ok(sum / set.instances.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    const LEVELS: [f64; 7] = [0.005, 0.025, 0.05, 0.5, 0.95, 0.975, 0.995];

    fn instance(id: usize, h: usize, z: usize, actual: impl Fn(usize, usize) -> f64, q: impl Fn(usize, usize, usize) -> f64) -> EvalInstance {
        let mut qs = Vec::new();
        let mut a = Vec::new();
        for s in 0..h {
            for zone in 0..z {
                a.push(actual(s, zone));
                for k in 0..LEVELS.len() {
                    qs.push(q(s, zone, k));
                }
            }
        }
        EvalInstance {
            instance: id,
            quantiles: Tensor::new(&[h, z, LEVELS.len()], qs).unwrap(),
            actual: Tensor::new(&[h, z], a).unwrap(),
        }
    }

    #[test]
    fn cvrmse_hand_values() {
        assert_eq!(cvrmse(&[20.0, 20.0], &[21.0, 19.0]).unwrap(), 5.0);
        assert_eq!(cvrmse(&[3.0, 4.0], &[3.0, 4.0]).unwrap(), 0.0);
        assert!(matches!(cvrmse(&[1.0, -1.0], &[0.0, 0.0]), Err(Error::UndefinedMetric(_))));
    }

    proptest! {
        #[test]
        fn cvrmse_scale_free(c in 0.01f64..100.0, seed in 0u64..500) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a: Vec<f64> = (0..20).map(|_| rng.random_range(15.0..25.0)).collect();
            let p: Vec<f64> = (0..20).map(|_| rng.random_range(15.0..25.0)).collect();
            let sa: Vec<f64> = a.iter().map(|v| v * c).collect();
            let sp: Vec<f64> = p.iter().map(|v| v * c).collect();
            let (x, y) = (cvrmse(&a, &p).unwrap(), cvrmse(&sa, &sp).unwrap());
            prop_assert!((x - y).abs() < 1e-9 * x.max(1.0));
        }
    }

    #[test]
    fn constant_bias_curve() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let insts: Vec<EvalInstance> = (0..40)
            .map(|i| {
                let base: Vec<f64> = (0..96 * 5).map(|_| 20.0 + rng.random_range(-0.5..0.5)).collect();
                let b2 = base.clone();
                instance(i, 96, 5, move |s, z| base[s * 5 + z], move |s, z, _| b2[s * 5 + z] + 0.4)
            })
            .collect();
        let m = per_horizon_cvrmse(&ForecastSet::new(LEVELS.to_vec(), insts.clone()).unwrap()).unwrap();
        assert_eq!(m.horizon(), 96);
        for zone in &m.per_zone {
            for &v in zone {
                // mean actual is within 0.5 of 20
                assert!((v - 2.0).abs() < 0.06, "{v}");
            }
        }
        // Last-step value equals a direct CVRMSE over the 96th-step pairs.
        for zone in 0..5 {
            let a: Vec<f64> = insts.iter().map(|i| i.actual_at(95, zone)).collect();
            let p: Vec<f64> = insts.iter().map(|i| i.quantile(95, zone, 3)).collect();
            assert_eq!(m.per_zone[zone][95], cvrmse(&a, &p).unwrap());
        }
    }

    #[test]
    fn perfect_forecast_is_zero() {
        let inst = instance(0, 12, 5, |s, z| 20.0 + s as f64 * 0.1 + z as f64, |s, z, _| 20.0 + s as f64 * 0.1 + z as f64);
        let m = per_horizon_cvrmse(&ForecastSet::new(LEVELS.to_vec(), vec![inst]).unwrap()).unwrap();
        assert!(m.per_zone.iter().flatten().all(|&v| v == 0.0));
        assert_eq!(m.overall, 0.0);
    }

    #[test]
    fn single_instance_matches_direct() {
        let inst = instance(0, 6, 2, |s, z| 19.0 + (s * z) as f64 * 0.3, |s, z, _| 19.5 + s as f64 * 0.05 - z as f64 * 0.1);
        let m = per_horizon_cvrmse(&ForecastSet::new(LEVELS.to_vec(), vec![inst.clone()]).unwrap()).unwrap();
        for s in 0..6 {
            for z in 0..2 {
                let direct = cvrmse(&[inst.actual_at(s, z)], &[inst.quantile(s, z, 3)]).unwrap();
                assert_eq!(m.per_zone[z][s], direct);
            }
        }
    }

    #[test]
    fn ordering_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut insts: Vec<EvalInstance> = (0..10)
            .map(|i| {
                let v: Vec<f64> = (0..4 * 3 * 8).map(|_| rng.random_range(18.0..22.0)).collect();
                instance(i, 4, 3, move |s, z| v[s * 3 + z], {
                    let w: Vec<f64> = (0..4 * 3 * 7).map(|k| 20.0 + (k % 7) as f64 * 0.3 - 1.0).collect();
                    move |s, z, k| w[(s * 3 + z) * 7 + k]
                })
            })
            .collect();
        let a = ForecastSet::new(LEVELS.to_vec(), insts.clone()).unwrap();
        insts.reverse();
        let b = ForecastSet::new(LEVELS.to_vec(), insts).unwrap();
        let (ha, hb) = (per_horizon_cvrmse(&a).unwrap(), per_horizon_cvrmse(&b).unwrap());
        for (x, y) in ha.per_zone.iter().flatten().zip(hb.per_zone.iter().flatten()) {
            assert!((x - y).abs() < 1e-12);
        }
        assert_eq!(interval_coverage(&a, &[0.9]).unwrap(), interval_coverage(&b, &[0.9]).unwrap());
    }

    #[test]
    fn wide_and_degenerate_intervals() {
        let wide = instance(0, 4, 5, |_, _| 20.0, |_, _, k| (k as f64 - 3.0) * 1e6);
        let r = interval_coverage(&ForecastSet::new(LEVELS.to_vec(), vec![wide]).unwrap(), &[0.9, 0.95, 0.99]).unwrap();
        assert!(r.rows.iter().all(|row| row.coverage == 1.0));
        assert_eq!(r.crossing_freq, 0.0);
        let flat = instance(0, 4, 5, |_, _| 20.0, |_, _, _| 21.0);
        let r = interval_coverage(&ForecastSet::new(LEVELS.to_vec(), vec![flat]).unwrap(), &[0.9]).unwrap();
        assert_eq!(r.rows[0].coverage, 0.0);
    }

    #[test]
    fn crossings_are_reordered_and_counted() {
        // Quantiles in descending order: every triple crosses, and after
        // sorting the interval brackets the actual.
        let inst = instance(0, 2, 5, |_, _| 20.0, |_, _, k| 23.0 - k as f64);
        let r = interval_coverage(&ForecastSet::new(LEVELS.to_vec(), vec![inst]).unwrap(), &[0.9]).unwrap();
        assert_eq!(r.crossing_freq, 1.0);
        assert_eq!(r.rows[0].coverage, 1.0);
    }

    #[test]
    fn missing_quantile_pair() {
        let levels = vec![0.05, 0.5, 0.95];
        let inst = EvalInstance { instance: 0, quantiles: Tensor::zeros(&[1, 1, 3]), actual: Tensor::zeros(&[1, 1]) };
        let set = ForecastSet::new(levels.clone(), vec![inst]).unwrap();
        assert!(matches!(interval_coverage(&set, &[0.99]), Err(Error::Config(_))));
        assert_eq!(central_levels_present(&levels), vec![0.9]);
    }

    #[test]
    fn gaussian_coverage_near_nominal() {
        // True quantiles of N(20, 1): 100 instances x 200 steps x 5 zones = 1e5 triples.
        let z = [-2.5758293035489, -1.959963984540054, -1.6448536269514722, 0.0, 1.6448536269514722, 1.959963984540054, 2.5758293035489];
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let insts: Vec<EvalInstance> = (0..100)
            .map(|i| {
                let draws: Vec<f64> = (0..200 * 5).map(|_| 20.0 + rng.sample::<f64, _>(StandardNormal)).collect();
                instance(i, 200, 5, move |s, zone| draws[s * 5 + zone], move |_, _, k| 20.0 + z[k])
            })
            .collect();
        let r = interval_coverage(&ForecastSet::new(LEVELS.to_vec(), insts).unwrap(), &[0.9, 0.95, 0.99]).unwrap();
        assert_eq!(r.triples, 100_000);
        for row in &r.rows {
            assert!((row.coverage - row.level).abs() < 0.02, "{row:?}");
        }
    }

    proptest! {
        #[test]
        fn widening_never_reduces_coverage(seed in 0u64..200, widen in 0.0f64..2.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a: Vec<f64> = (0..30).map(|_| rng.random_range(18.0..22.0)).collect();
            let c: Vec<f64> = (0..30).map(|_| rng.random_range(18.0..22.0)).collect();
            let (a2, c2) = (a.clone(), c.clone());
            let narrow = instance(0, 6, 5, move |s, z| a[s * 5 + z], move |s, z, k| c[s * 5 + z] + (k as f64 - 3.0) * 0.3);
            let wide = instance(0, 6, 5, move |s, z| a2[s * 5 + z], move |s, z, k| c2[s * 5 + z] + (k as f64 - 3.0) * (0.3 + widen));
            let rn = interval_coverage(&ForecastSet::new(LEVELS.to_vec(), vec![narrow]).unwrap(), &[0.9, 0.95, 0.99]).unwrap();
            let rw = interval_coverage(&ForecastSet::new(LEVELS.to_vec(), vec![wide]).unwrap(), &[0.9, 0.95, 0.99]).unwrap();
            for (n, w) in rn.rows.iter().zip(&rw.rows) {
                prop_assert!(w.coverage >= n.coverage);
            }
        }
    }
}

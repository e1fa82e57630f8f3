//! Forecast dump: `instance,step,zone,q_level,value_c,actual_c`, one row
//! per instance, 1-based step, 1-based zone and level.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::metrics::{EvalInstance, ForecastSet};
use crate::error::{Error, Result};
use crate::numerics::Tensor;

pub const DUMP_HEADER: [&str; 6] = ["instance", "step", "zone", "q_level", "value_c", "actual_c"];

/// Values use the shortest exact decimal form, so a dump reads back bitwise.
pub fn write_forecast_dump(set: &ForecastSet, path: &Path) -> Result<()> {
    set.validate()?;
    let (h, z) = set.dims()?;
    let mut out = DUMP_HEADER.join(",");
    out.push('\n');
    for inst in &set.instances {
        for s in 0..h {
            for zone in 0..z {
                let a = inst.actual_at(s, zone);
                for (k, q) in set.levels.iter().enumerate() {
                    let v = inst.quantile(s, zone, k);
                    writeln!(out, "{},{},{},{q},{v},{a}", inst.instance, s + 1, zone + 1).expect("string write");
                }
            }
        }
    }
    crate::training::write_atomic(path, out.as_bytes())
}

struct Partial {
    cells: BTreeMap<(usize, usize, usize), f64>,
    actual: BTreeMap<(usize, usize), f64>,
}

pub fn read_forecast_dump(path: &Path) -> Result<ForecastSet> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let name = path.display().to_string();
    let fail = |row: usize, reason: String| Error::Parse { source_name: name.clone(), row, reason };
    let mut r = csv::ReaderBuilder::new().flexible(true).from_reader(text.as_bytes());
    let header: Vec<String> = r.headers().map_err(|e| fail(1, e.to_string()))?.iter().map(String::from).collect();
    if header != DUMP_HEADER {
        return Err(fail(1, format!("expected header {}, got {}", DUMP_HEADER.join(","), header.join(","))));
    }
    let mut levels: Vec<f64> = Vec::new();
    let mut parts: BTreeMap<usize, Partial> = BTreeMap::new();
    for (i, rec) in r.records().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| fail(row, e.to_string()))?;
        if rec.len() != 6 {
            return Err(fail(row, format!("expected 6 fields, got {}", rec.len())));
        }
        let int = |j: usize| {
            rec[j].parse::<usize>().map_err(|_| fail(row, format!("`{}` is not a non-negative integer: `{}`", DUMP_HEADER[j], &rec[j])))
        };
        let num = |j: usize| {
            rec[j]
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| fail(row, format!("`{}` is not a finite number: `{}`", DUMP_HEADER[j], &rec[j])))
        };
        let (inst, step, zone, q, v, a) = (int(0)?, int(1)?, int(2)?, num(3)?, num(4)?, num(5)?);
        if step == 0 || zone == 0 {
            return Err(fail(row, "step and zone are 1-based".into()));
        }
        if !(q > 0.0 && q < 1.0) {
            return Err(fail(row, format!("q_level {q} outside (0, 1)")));
        }
        let k = match levels.iter().position(|&l| l == q) {
            Some(k) => k,
            None => {
                levels.push(q);
                levels.len() - 1
            }
        };
        let p = parts.entry(inst).or_insert_with(|| Partial { cells: BTreeMap::new(), actual: BTreeMap::new() });
        if p.cells.insert((step - 1, zone - 1, k), v).is_some() {
            return Err(fail(row, format!("duplicate entry for instance {inst} step {step} zone {zone} q {q}")));
        }
        if let Some(prev) = p.actual.insert((step - 1, zone - 1), a) {
            if prev != a {
                return Err(fail(row, format!("actual_c {a} disagrees with {prev} for instance {inst} step {step} zone {zone}")));
            }
        }
    }
    if parts.is_empty() {
        return Err(fail(2, "dump has no rows".into()));
    }
    let mut order: Vec<usize> = (0..levels.len()).collect();
    order.sort_by(|&x, &y| levels[x].total_cmp(&levels[y]));
    let sorted: Vec<f64> = order.iter().map(|&k| levels[k]).collect();
    let (h, z) = parts.values().flat_map(|p| p.actual.keys()).fold((0, 0), |(h, z), &(s, zn)| (h.max(s + 1), z.max(zn + 1)));
    let q = levels.len();
    let mut instances = Vec::with_capacity(parts.len());
    for (id, p) in parts {
        if p.cells.len() != h * z * q {
            return Err(fail(
                0,
                format!("instance {id} has {} rows, expected {h} steps x {z} zones x {q} levels", p.cells.len()),
            ));
        }
        let mut values = Vec::with_capacity(h * z * q);
        for s in 0..h {
            for zn in 0..z {
                for &k in &order {
                    values.push(p.cells[&(s, zn, k)]);
                }
            }
        }
        let actual = (0..h).flat_map(|s| (0..z).map(move |zn| (s, zn))).map(|key| p.actual[&key]).collect();
        instances.push(EvalInstance {
            instance: id,
            quantiles: Tensor::new(&[h, z, q], values)?,
            actual: Tensor::new(&[h, z], actual)?,
        });
    }
    ForecastSet::new(sorted, instances)
}

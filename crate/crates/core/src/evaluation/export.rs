use std::fs;
use std::path::Path;

use serde_json::{Map, Value};

use super::metrics::{CoverageReport, HorizonMetrics};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MetricsFormat {
    Csv,
    JsonLines,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Text(String),
    Int(usize),
    Num(f64),
}

impl Cell {
    /// Six significant digits, in a form that is the same on every platform.
    fn render(&self) -> String {
        match self {
            Cell::Text(s) => s.clone(),
            Cell::Int(i) => i.to_string(),
            Cell::Num(v) => format!("{v:.5e}"),
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Num(v) => Some(*v),
            Cell::Int(i) => Some(*i as f64),
            Cell::Text(_) => None,
        }
    }
}

/// Rows under a fixed column order.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl MetricsTable {
    pub fn new(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    /// Values as they read back after export.
    pub fn rounded(&self) -> Self {
        let rows = self
            .rows
            .iter()
            .map(|r| {
                r.iter()
                    .map(|c| match c {
                        Cell::Num(v) => Cell::Num(c.render().parse().unwrap_or(*v)),
                        other => other.clone(),
                    })
                    .collect()
            })
            .collect();
        Self { columns: self.columns.clone(), rows }
    }
}

impl HorizonMetrics {
    /// `zone,step,cvrmse_pct` with 1-based steps; zone curves then the mean.
    pub fn table(&self) -> MetricsTable {
        let mut t = MetricsTable::new(&["zone", "step", "cvrmse_pct"]);
        let curves = self.per_zone.iter().enumerate().map(|(z, c)| ((z + 1).to_string(), c));
        for (zone, curve) in curves.chain(std::iter::once(("mean".to_string(), &self.mean_curve))) {
            for (s, &v) in curve.iter().enumerate() {
                t.rows.push(vec![Cell::Text(zone.clone()), Cell::Int(s + 1), Cell::Num(v)]);
            }
        }
        t
    }
}

impl CoverageReport {
    /// `level,coverage,crossing_freq`.
    pub fn table(&self) -> MetricsTable {
        let mut t = MetricsTable::new(&["level", "coverage", "crossing_freq"]);
        for r in &self.rows {
            t.rows.push(vec![Cell::Num(r.level), Cell::Num(r.coverage), Cell::Num(r.crossing_freq)]);
        }
        t
    }
}

pub fn export_metrics(table: &MetricsTable, path: &Path, format: MetricsFormat) -> Result<()> {
    let mut out = String::new();
    match format {
        MetricsFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let io = |e: csv::Error| Error::io(path, e.into());
            w.write_record(&table.columns).map_err(io)?;
            for r in &table.rows {
                w.write_record(r.iter().map(Cell::render)).map_err(io)?;
            }
            let bytes = w.into_inner().map_err(|e| Error::io(path, e.into_error()))?;
            out.push_str(&String::from_utf8(bytes).expect("csv output is UTF-8"));
        }
        MetricsFormat::JsonLines => {
            for r in &table.rows {
                let mut m = Map::new();
                for (c, cell) in table.columns.iter().zip(r) {
                    let v = match cell {
                        Cell::Text(s) => Value::String(s.clone()),
                        Cell::Int(i) => Value::from(*i),
                        // Numbers keep the printed precision.
                        Cell::Num(_) => Value::Number(
                            serde_json::Number::from_f64(cell.render().parse().expect("rendered number"))
                                .ok_or_else(|| Error::UndefinedMetric(format!("non-finite `{c}` value")))?,
                        ),
                    };
                    m.insert(c.clone(), v);
                }
                out.push_str(&Value::Object(m).to_string());
                out.push('\n');
            }
        }
    }
    crate::training::write_atomic(path, out.as_bytes())
}

/// Reads a CSV written by [`export_metrics`]. Integer-looking fields come
/// back as `Int`, other numbers as `Num`.
pub fn read_metrics_csv(path: &Path) -> Result<MetricsTable> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let parse = |row: usize, e: csv::Error| Error::Parse {
        source_name: path.display().to_string(),
        row,
        reason: e.to_string(),
    };
    let columns = r.headers().map_err(|e| parse(1, e))?.iter().map(String::from).collect();
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| parse(i + 2, e))?;
        rows.push(
            rec.iter()
                .map(|f| {
                    if let Ok(n) = f.parse::<usize>() {
                        Cell::Int(n)
                    } else if let Ok(v) = f.parse::<f64>() {
                        Cell::Num(v)
                    } else {
                        Cell::Text(f.to_string())
                    }
                })
                .collect(),
        );
    }
    Ok(MetricsTable { columns, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn horizon() -> HorizonMetrics {
        let per_zone: Vec<Vec<f64>> = (0..5).map(|z| (0..96).map(|s| 1.0 / 3.0 + z as f64 + s as f64 * 0.0123).collect()).collect();
        let mean_curve = (0..96).map(|s| per_zone.iter().map(|c| c[s]).sum::<f64>() / 5.0).collect();
        HorizonMetrics { per_zone, mean_curve, zone_aggregate: vec![1.0; 5], overall: 1.0, instances: 3 }
    }

    #[test]
    fn csv_round_trip_at_printed_precision() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("h.csv");
        let mut t = horizon().table();
        // Zone labels read back as integers when numeric.
        export_metrics(&t, &p, MetricsFormat::Csv).unwrap();
        let back = read_metrics_csv(&p).unwrap();
        t = t.rounded();
        assert_eq!(back.columns, t.columns);
        for (a, b) in back.rows.iter().zip(&t.rows) {
            assert_eq!(a[1], b[1]);
            assert_eq!(a[2], b[2]);
        }
        let per_zone = back.rows.iter().filter(|r| r[0] == Cell::Int(3)).count();
        assert_eq!(per_zone, 96);
    }

    #[test]
    fn json_lines_parse_independently() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("h.jsonl");
        export_metrics(&horizon().table(), &p, MetricsFormat::JsonLines).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 6 * 96);
        for l in lines {
            let v: Value = serde_json::from_str(l).unwrap();
            assert!(v["cvrmse_pct"].is_f64() && v["step"].is_u64() && v["zone"].is_string());
        }
    }

    #[test]
    fn rendering_is_six_significant_digits() {
        assert_eq!(Cell::Num(1.0 / 3.0).render(), "3.33333e-1");
        assert_eq!(Cell::Num(0.0).render(), "0.00000e0");
    }

    #[test]
    fn unwritable_path_names_path() {
        let e = export_metrics(&horizon().table(), Path::new("/nonexistent/dir/x.csv"), MetricsFormat::Csv).unwrap_err();
        assert!(e.to_string().contains("/nonexistent/dir"), "{e}");
    }
}

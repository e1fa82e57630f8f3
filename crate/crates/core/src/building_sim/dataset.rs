use std::path::Path;

use chrono::NaiveDateTime;

use super::weather::TIMESTAMP_FORMAT;
use crate::error::{Error, Result};

pub const DATASET_COLUMNS: [&str; 35] = [
    "t_out", "h_out", "w_out", "l_norm", "l_hor", "hol",
    "occu_1", "occu_2", "occu_3", "occu_4", "occu_5",
    "e_1", "e_2", "e_3", "e_4", "e_5",
    "ws_1", "ws_2", "ws_3", "ws_4",
    "sp_heat_1", "sp_heat_2", "sp_heat_3", "sp_heat_4", "sp_heat_5",
    "sp_cool_1", "sp_cool_2", "sp_cool_3", "sp_cool_4", "sp_cool_5",
    "t_in_1", "t_in_2", "t_in_3", "t_in_4", "t_in_5",
];

/// One row per 15-minute step, columns in [`DATASET_COLUMNS`] order.
#[derive(Clone, Debug, PartialEq)]
pub struct SimulatedDataset {
    pub timestamps: Vec<NaiveDateTime>,
    columns: Vec<Vec<f64>>,
}

impl SimulatedDataset {
    pub fn new(timestamps: Vec<NaiveDateTime>, columns: Vec<Vec<f64>>) -> Result<Self> {
        if columns.len() != DATASET_COLUMNS.len() {
            return Err(Error::config(format!("dataset needs {} columns, got {}", DATASET_COLUMNS.len(), columns.len())));
        }
        if let Some((i, _)) = columns.iter().enumerate().find(|(_, c)| c.len() != timestamps.len()) {
            return Err(Error::config(format!("column `{}` length differs from the time axis", DATASET_COLUMNS[i])));
        }
        Ok(Self { timestamps, columns })
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        DATASET_COLUMNS.iter().position(|c| *c == name).map(|i| self.columns[i].as_slice())
    }

    /// Column lookup that reports the missing name.
    pub fn require(&self, name: &str) -> Result<&[f64]> {
        self.column(name).ok_or_else(|| Error::config(format!("dataset has no column `{name}`")))
    }

    /// Rows `[start, end)` as a new dataset.
    pub fn slice(&self, start: usize, end: usize) -> Self {
        Self {
            timestamps: self.timestamps[start..end].to_vec(),
            columns: self.columns.iter().map(|c| c[start..end].to_vec()).collect(),
        }
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let io = |e: csv::Error| Error::io(path, e.into());
        let mut w = csv::Writer::from_path(path).map_err(io)?;
        let mut header = vec!["timestamp"];
        header.extend(DATASET_COLUMNS);
        w.write_record(&header).map_err(io)?;
        let mut row = Vec::with_capacity(header.len());
        for (r, ts) in self.timestamps.iter().enumerate() {
            row.clear();
            row.push(ts.format(TIMESTAMP_FORMAT).to_string());
            row.extend(self.columns.iter().map(|c| c[r].to_string()));
            w.write_record(&row).map_err(io)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Header-driven reader: column order in the file does not matter.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let source = path.display().to_string();
        let parse_err = |row: usize, reason: String| Error::Parse { source_name: source.clone(), row, reason };
        let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::io(path, e.into()))?;
        let headers = rdr.headers().map_err(|e| parse_err(0, e.to_string()))?.clone();
        let find = |name: &str| {
            headers.iter().position(|h| h.trim() == name).ok_or_else(|| parse_err(0, format!("missing column `{name}`")))
        };
        let ts_idx = find("timestamp")?;
        let idx: Vec<usize> = DATASET_COLUMNS.iter().map(|c| find(c)).collect::<Result<_>>()?;
        let mut timestamps = Vec::new();
        let mut columns = vec![Vec::new(); DATASET_COLUMNS.len()];
        for (i, rec) in rdr.records().enumerate() {
            let row = i + 1;
            let rec = rec.map_err(|e| parse_err(row, e.to_string()))?;
            let ts = rec.get(ts_idx).unwrap_or("").trim();
            let ts = NaiveDateTime::parse_from_str(ts, TIMESTAMP_FORMAT)
                .map_err(|e| parse_err(row, format!("bad timestamp `{ts}`: {e}")))?;
            if timestamps.last().is_some_and(|prev| *prev >= ts) {
                return Err(parse_err(row, "timestamps are not increasing".into()));
            }
            timestamps.push(ts);
            for ((col, &j), name) in columns.iter_mut().zip(&idx).zip(DATASET_COLUMNS) {
                let raw = rec.get(j).unwrap_or("").trim();
                let v: f64 = raw.parse().map_err(|_| parse_err(row, format!("`{name}` is not a number: `{raw}`")))?;
                if !v.is_finite() {
                    return Err(parse_err(row, format!("`{name}` is not finite")));
                }
                col.push(v);
            }
        }
        if timestamps.is_empty() {
            return Err(parse_err(0, "dataset has no rows".into()));
        }
        Self::new(timestamps, columns)
    }
}

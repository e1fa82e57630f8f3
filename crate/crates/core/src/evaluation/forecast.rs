use super::metrics::{EvalInstance, ForecastSet};
use crate::error::{Error, Result};
use crate::model::{to_celsius, Model};
use crate::numerics::Tensor;
use crate::pipeline::Windows;

/// Runs the model over every window and pairs each forecast with its
/// targets, both in °C. `ids[i]` labels window `i`.
pub fn forecast_windows(model: &Model, windows: &Windows, ids: &[usize]) -> Result<ForecastSet> {
    if ids.len() != windows.len() {
        return Err(Error::config(format!("{} instance ids for {} windows", ids.len(), windows.len())));
    }
    if windows.is_empty() {
        return Err(Error::config("no instances selected"));
    }
    let table = windows.table();
    let mut instances = Vec::with_capacity(windows.len());
    for (s, &id) in windows.iter().zip(ids) {
        let scaled = model.predict_scaled(&s.past, &s.future)?;
        instances.push(EvalInstance {
            instance: id,
            quantiles: to_celsius(&scaled, &table.scaler)?,
            actual: Tensor::new(s.target.shape(), s.target_celsius(table))?,
        });
    }
    ForecastSet::new(model.config.quantile_levels.clone(), instances)
}

//! Forecast accuracy: CVRMSE overall and per horizon step, central
//! interval coverage, and file exports.

mod dump;
mod export;
mod forecast;
mod metrics;

pub use dump::{read_forecast_dump, write_forecast_dump, DUMP_HEADER};
pub use forecast::forecast_windows;
pub use export::{export_metrics, read_metrics_csv, Cell, MetricsFormat, MetricsTable};
pub use metrics::{
    central_levels_present, cvrmse, interval_coverage, mean_pinball_celsius, per_horizon_cvrmse, CoverageReport,
    CoverageRow, EvalInstance, ForecastSet, HorizonMetrics,
};

//! Error indices, frequency metrics, parameter sweeps and the impact-factor
//! (Table I) sensitivity matrix.

mod metrics;
mod sweep;

pub use metrics::{dominant_frequency, error_index, frequency_metrics, ErrorIndex, ErrorOptions, FrequencyMetrics, Series};
pub use sweep::{
    run_sweep, table_i_sensitivity, trend, EquivalentBase, Quantity, Sensitivity, SensitivityCell, SweepBase,
    SweepParameter, SweepRow, SweepSpec, SweepTable, SystemBase, TableItem, Trend, NONZERO_SENSITIVITY, TABLE_I,
    TABLE_I_PARAMETERS, TREND_TOL, ZERO_SENSITIVITY,
};

use crate::gfl::GflError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnalysisError {
    #[error("series {name} has {time} time stamps but {values} values")]
    Length { name: String, time: usize, values: usize },
    #[error("series {name} has {len} samples, need at least {needed}")]
    TooShort { name: String, len: usize, needed: usize },
    #[error("{0}")]
    Grid(String),
    #[error("window [{start}, {end}] is not inside both series")]
    Window { start: f64, end: f64 },
    #[error("reference {0} never deviates from its initial value")]
    FlatReference(String),
    #[error("unknown sweep parameter {0:?}")]
    UnknownParameter(String),
    #[error("invalid sweep: {0}")]
    Spec(String),
    #[error(transparent)]
    Gfl(#[from] GflError),
}

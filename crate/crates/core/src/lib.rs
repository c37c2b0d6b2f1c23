// `!(x > 0.0)` style checks are used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bp;
pub mod detector;
pub mod error;
pub mod gaussian;
pub mod metrics;
pub mod models;
pub mod radar;
pub mod scalar;

#[cfg(test)]
mod test_util;

pub use error::{Error, Result};

pub type Sensor = radar::RadarSensor<f64>;
pub type CVec = scalar::CVector<f64>;
pub type CMat = scalar::CMatrix<f64>;

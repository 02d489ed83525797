use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("skew matrix order must be even and at least 2, got {0}")]
    OddOrder(usize),
    #[error("matrix has non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("brute-force Pfaffian refused for order {0} (limit 12)")]
    OrderTooLarge(usize),
    #[error("points must be strictly increasing")]
    NotIncreasing,
    #[error("time must be positive, got {0}")]
    NonPositiveTime(f64),
    #[error("theta must lie in [0, 1], got {0}")]
    ThetaOutOfRange(f64),
    #[error("initial data {variant} is not valid for theta = {theta}")]
    InvalidForTheta { variant: &'static str, theta: f64 },
    #[error("invalid initial data: {0}")]
    InvalidData(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("finite-difference stencil is not admissible: {0}")]
    Stencil(String),
    #[error("test function value {0} lies outside [0, 1)")]
    PhiOutOfRange(f64),
    #[error("empty bin grid")]
    EmptyGrid,
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_theta(theta: f64) -> Result<()> {
    if (0.0..=1.0).contains(&theta) {
        Ok(())
    } else {
        Err(Error::ThetaOutOfRange(theta))
    }
}

pub(crate) fn check_time(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::NonPositiveTime(t))
    }
}

pub(crate) fn check_increasing(points: &[f64]) -> Result<()> {
    if points.iter().any(|p| !p.is_finite()) || points.windows(2).any(|w| w[0] >= w[1]) {
        Err(Error::NotIncreasing)
    } else {
        Ok(())
    }
}

//! Simulation and optimization toolkit for sensor-aided, self-powered
//! reconfigurable intelligent surfaces (RIS) serving integrated sensing,
//! communication and powering.
//!
//! The crate is organised bottom-up:
//!
//! * [`channel`] synthesises seeded channel realisations for the scenario.
//! * [`protocol`] models the element-, time- and power-splitting protocols
//!   and the RIS self-powering budget.
//! * [`metrics`] evaluates communication rate, sensing rate and harvested
//!   power for a given beamforming design.
//! * [`conic`] holds a second-order cone solver and the generalized
//!   Rayleigh-quotient eigensolver.
//! * [`optimizer`] minimises the transmit power by alternating optimization
//!   with SCA-convexified SOCP steps.
//! * [`pareto`] traces metric tradeoff fronts under a power budget.
//! * [`experiment`] runs Monte-Carlo sweeps and persists their results.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod conic;
mod error;
pub mod experiment;
pub mod linalg;
pub mod metrics;
pub mod optimizer;
pub mod pareto;
pub mod protocol;

pub use error::{Error, Result};
pub use num_complex::Complex64;

/// Converts a power in dBm to Watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Converts a power in Watts to dBm.
pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * watts.log10() + 30.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dbm_conversions() {
        assert_eq!(watts_to_dbm(1e-3), 0.0);
        assert!((dbm_to_watts(30.0) - 1.0).abs() < 1e-15);
        assert!((watts_to_dbm(dbm_to_watts(-90.0)) + 90.0).abs() < 1e-9);
    }
}

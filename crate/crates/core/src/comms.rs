//! Downlink channel generation and closed-form link metrics.

use crate::error::{Error, Result};
use crate::numerics::{complex_gaussian_vector, ComplexMatrix, ComplexVector, Rng};

/// Channel vector `h` between the RHS and the user.
#[derive(Debug, Clone, PartialEq)]
pub struct Channel(pub ComplexVector);

impl Channel {
    pub fn gains(&self) -> &ComplexVector {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// i.i.d. CN(0, 1) Rayleigh channel.
pub fn rayleigh_channel(elements: usize, rng: &mut Rng) -> Channel {
    Channel(complex_gaussian_vector(elements, rng))
}

fn check(op: &'static str, rows: usize, w: &ComplexMatrix, v: &ComplexVector) -> Result<()> {
    if w.nrows() != rows || w.ncols() != v.len() {
        return Err(Error::DimensionMismatch {
            op,
            expected: (rows, v.len()),
            found: w.shape(),
        });
    }
    Ok(())
}

/// `|hᴴ W v|²`.
pub fn received_power(h: &Channel, w: &ComplexMatrix, v: &ComplexVector) -> Result<f64> {
    check("received_power", h.len(), w, v)?;
    Ok(h.0.dotc(&(w * v)).norm_sqr())
}

/// `log₂(1 + |hᴴ W v|² / σ_n²)` in bits/s/Hz.
pub fn rate(h: &Channel, w: &ComplexMatrix, v: &ComplexVector, noise_var: f64) -> Result<f64> {
    if !(noise_var > 0.0) {
        return Err(Error::NonPositive("noise variance", noise_var));
    }
    let p = received_power(h, w, v)?;
    Ok(rate_from_power(p, noise_var))
}

pub fn rate_from_power(received: f64, noise_var: f64) -> f64 {
    libm::log2(1.0 + received / noise_var)
}

/// `‖W v‖²`.
pub fn tx_power(w: &ComplexMatrix, v: &ComplexVector) -> Result<f64> {
    check("tx_power", w.nrows(), w, v)?;
    Ok((w * v).norm_squared())
}

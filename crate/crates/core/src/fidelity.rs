//! Single-pixel teleportation fidelity for coherent-state inputs.

use alloc::vec::Vec;

use crate::error::{invalid, Result};

/// Fidelity of a unit-gain teleported coherent state whose quadratures
/// carry added noise `c_diag` on top of the vacuum variance 1:
/// `2 / (2 + C)`.
pub fn coherent_fidelity(c_diag: f64) -> f64 {
    2.0 / (2.0 + c_diag)
}

/// [`coherent_fidelity`] per pixel; rejects negative or non-finite noise.
pub fn fidelity_map(c_diag: &[f64]) -> Result<Vec<f64>> {
    if c_diag.iter().any(|c| !(*c >= 0.0) || !c.is_finite()) {
        return Err(invalid(
            "c_diag",
            "added noise must be finite and non-negative",
        ));
    }
    Ok(c_diag.iter().map(|&c| coherent_fidelity(c)).collect())
}

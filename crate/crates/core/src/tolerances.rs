//! Numerical tolerances used throughout the crate.

/// Maximum supported ambient dimension.
pub const MAX_DIM: usize = 16;

/// Relative factor of the membership band.
pub const MEMBERSHIP_REL: f64 = 1e-9;

/// Shift sizes used to decide interiorhood along the monotonicity direction.
pub const ETA_GRID: [f64; 3] = [1e-6, 1e-4, 1e-2];

/// Jacobi convergence threshold relative to the Frobenius norm.
pub const JACOBI_REL: f64 = 1e-13;

/// Jacobi sweep budget.
pub const JACOBI_SWEEPS: usize = 30;

/// Membership band for a jet of norm `scale`.
pub fn tau_mem(scale: f64) -> f64 {
    MEMBERSHIP_REL * (1.0 + scale.abs())
}

/// Finite-difference tolerance `10 h^2 (1 + scale)`.
pub fn tol_fd(h: f64, scale: f64) -> f64 {
    10.0 * h * h * (1.0 + scale.abs())
}

pub fn check_dim(n: usize) -> crate::Result<()> {
    if (1..=MAX_DIM).contains(&n) {
        Ok(())
    } else {
        Err(crate::Error::DimensionOutOfRange(n))
    }
}

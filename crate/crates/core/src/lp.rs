//! Dyadic Littlewood-Paley decomposition on the integer frequency lattice.
//!
//! The radial cutoff omega is 1 on [0,1], a C^2 quintic smoothstep on
//! [1,2], and 0 beyond. The annulus profile phi(s) = omega(s) - omega(2s)
//! is supported in [1/2, 2], and phi_j(s) = phi(s/2^j). Telescoping gives
//! the partition omega(s) + sum_{j>=1} phi_j(s) = 1 pointwise.
//!
//! On nonzero integer modes phi_0(n) = omega(n) because omega(2|n|) = 0
//! once |n| >= 1; so the j = 0 block is exactly the mean-subtracted
//! low-pass block, which is the convention the Holder estimators use.

use crate::error::{CoreError, Result};
use crate::grid::TorusGrid;
use crate::spectral::SpectralField;
use num_complex::Complex64;

/// Radial cutoff: 1 on [0,1], quintic smoothstep to 0 on [1,2].
pub fn omega(s: f64) -> f64 {
    if s <= 1.0 {
        1.0
    } else if s >= 2.0 {
        0.0
    } else {
        let t = s - 1.0;
        1.0 - t * t * t * (10.0 - 15.0 * t + 6.0 * t * t)
    }
}

/// Annulus profile phi(s) = omega(s) - omega(2s), supported in [1/2, 2].
pub fn phi(s: f64) -> f64 {
    omega(s) - omega(2.0 * s)
}

#[derive(Debug, Clone, Copy)]
pub struct LittlewoodPaleyFamily {
    grid: TorusGrid,
    j_max: usize,
}

impl LittlewoodPaleyFamily {
    pub fn build(grid: TorusGrid) -> Self {
        // largest block whose annulus [2^{j-1}, 2^{j+1}] still fits under
        // the axis Nyquist frequency N/2
        let j_max = (grid.n() / 2).ilog2() as usize - 1;
        LittlewoodPaleyFamily { grid, j_max }
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    pub fn j_max(&self) -> usize {
        self.j_max
    }

    /// phi_j(s) = phi(s / 2^j); j = 0 is phi itself.
    pub fn phi_j(&self, j: usize, s: f64) -> f64 {
        phi(s / (1u64 << j) as f64)
    }

    /// omega(s) + sum_{j >= 1} phi_j(s), truncated where terms vanish.
    /// Telescopes to omega(s / 2^J) = 1 for any s >= 0.
    pub fn partition(&self, s: f64) -> f64 {
        let mut total = omega(s);
        let mut scale = 2.0;
        loop {
            total += phi(s / scale);
            if s / scale <= 1.0 {
                return total;
            }
            scale *= 2.0;
        }
    }
}

fn mode_norm(n: &[i64]) -> f64 {
    n.iter().map(|&v| (v * v) as f64).sum::<f64>().sqrt()
}

/// Block projection Delta_j: multiply modewise by phi_j(|n|).
pub fn lp_project(
    field: &SpectralField,
    j: usize,
    fam: &LittlewoodPaleyFamily,
) -> Result<SpectralField> {
    if j > fam.j_max() {
        return Err(CoreError::InvalidParam {
            name: "j",
            reason: format!("block index {} exceeds j_max = {}", j, fam.j_max()),
        });
    }
    let mut out = field.clone();
    out.map_modes(|n| Complex64::new(fam.phi_j(j, mode_norm(n)), 0.0));
    Ok(out)
}

/// Low-pass block Delta_omega: multiply modewise by omega(|n|); keeps the
/// mean (omega(0) = 1).
pub fn lowpass(field: &SpectralField, _fam: &LittlewoodPaleyFamily) -> SpectralField {
    let mut out = field.clone();
    out.map_modes(|n| Complex64::new(omega(mode_norm(n)), 0.0));
    out
}

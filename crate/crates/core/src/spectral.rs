//! Spectral representation of real fields and the Fourier multiplier
//! operators of the model: Riesz transforms, the fractional Laplacian,
//! derivatives, dealiasing and the pseudo-spectral advection product.
//!
//! Coefficient convention: f(x) = sum_n c_n e^{i n.x} with
//! c_n ~ (2pi)^{-d} integral f e^{-i n.x} dx, modes n in {-N/2..N/2-1}^d.
//! Storage is FFT order (index m, signed frequency m or m-N), and the
//! grid offset x_0 = -pi enters as a (-1)^{sum m_j} phase on both
//! directions of the transform.

use crate::error::{CoreError, Result};
use crate::fft;
use crate::grid::{GridField, TorusGrid};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct SpectralField {
    grid: TorusGrid,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn zero(grid: TorusGrid) -> Self {
        SpectralField {
            grid,
            coeffs: vec![Complex64::default(); grid.len()],
        }
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    /// Signed frequency along one axis for a storage index.
    pub fn freq(grid: TorusGrid, m: usize) -> i64 {
        let n = grid.n();
        if m < n / 2 {
            m as i64
        } else {
            m as i64 - n as i64
        }
    }

    fn storage_index(&self, n: &[i64]) -> usize {
        let g = self.grid;
        let nn = g.n() as i64;
        let mut i = 0usize;
        for ax in (0..g.dim()).rev() {
            let m = n[ax].rem_euclid(nn) as usize;
            i = i * g.n() + m;
        }
        i
    }

    pub fn mode(&self, n: &[i64]) -> Complex64 {
        self.coeffs[self.storage_index(n)]
    }

    pub fn set_mode(&mut self, n: &[i64], c: Complex64) {
        let i = self.storage_index(n);
        self.coeffs[i] = c;
    }

    /// Set coefficients at n and -n so the underlying field stays real.
    pub fn set_mode_pair(&mut self, n: &[i64], c: Complex64) {
        self.set_mode(n, c);
        let neg: Vec<i64> = n.iter().map(|v| -v).collect();
        self.set_mode(&neg, c.conj());
    }

    /// Apply a multiplier m(n) modewise; m receives the signed frequency
    /// vector in `n[..d]`.
    pub fn map_modes(&mut self, mut m: impl FnMut(&[i64]) -> Complex64) {
        let g = self.grid;
        let mut idx = [0usize; 3];
        let mut n = [0i64; 3];
        for i in 0..g.len() {
            g.unindex(i, &mut idx);
            for ax in 0..g.dim() {
                n[ax] = Self::freq(g, idx[ax]);
            }
            self.coeffs[i] *= m(&n[..g.dim()]);
        }
    }

    /// Max deviation from coeff(-n) = conj(coeff(n)), relative to the
    /// largest coefficient.
    pub fn hermitian_residual(&self) -> f64 {
        let g = self.grid;
        let nn = g.n();
        let mut idx = [0usize; 3];
        let mut worst = 0.0f64;
        let mut scale = 0.0f64;
        for i in 0..g.len() {
            g.unindex(i, &mut idx);
            let mut j = 0usize;
            for ax in (0..g.dim()).rev() {
                let m = (nn - idx[ax]) % nn;
                j = j * nn + m;
            }
            let r = (self.coeffs[i] - self.coeffs[j].conj()).norm();
            if r > worst {
                worst = r;
            }
            let a = self.coeffs[i].norm();
            if a > scale {
                scale = a;
            }
        }
        if scale > 0.0 {
            worst / scale
        } else {
            0.0
        }
    }

    pub fn scale(&mut self, a: f64) {
        for c in &mut self.coeffs {
            *c *= a;
        }
    }

    pub fn add_scaled(&mut self, other: &SpectralField, a: f64) {
        assert_eq!(self.grid, other.grid, "grid mismatch");
        for (c, o) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *c += a * o;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }
}

fn apply_offset_phase(grid: TorusGrid, coeffs: &mut [Complex64]) {
    let mut idx = [0usize; 3];
    for (i, c) in coeffs.iter_mut().enumerate() {
        grid.unindex(i, &mut idx);
        let parity: usize = idx[..grid.dim()].iter().sum();
        if parity % 2 == 1 {
            *c = -*c;
        }
    }
}

pub fn to_spectral(f: &GridField) -> SpectralField {
    let grid = f.grid();
    let mut coeffs: Vec<Complex64> = f.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft::transform_all(&mut coeffs, grid.n(), grid.dim(), true);
    let scale = 1.0 / grid.len() as f64;
    for c in &mut coeffs {
        *c *= scale;
    }
    apply_offset_phase(grid, &mut coeffs);
    SpectralField { grid, coeffs }
}

pub fn to_grid(field: &SpectralField) -> Result<GridField> {
    let grid = field.grid;
    let mut buf = field.coeffs.clone();
    apply_offset_phase(grid, &mut buf);
    fft::transform_all(&mut buf, grid.n(), grid.dim(), false);
    let mut max_re = 0.0f64;
    let mut max_im = 0.0f64;
    for c in &buf {
        max_re = max_re.max(c.re.abs());
        max_im = max_im.max(c.im.abs());
    }
    if max_im > 1e-10 * max_re.max(1.0) {
        return Err(CoreError::SymmetryViolation(format!(
            "imaginary residue {max_im:.3e} exceeds tolerance (field scale {max_re:.3e})"
        )));
    }
    GridField::from_values(grid, buf.into_iter().map(|c| c.re).collect())
}

fn mode_norm(n: &[i64]) -> f64 {
    n.iter().map(|&v| (v * v) as f64).sum::<f64>().sqrt()
}

/// Numerator component for odd (imaginary) multipliers. The Nyquist
/// frequency -N/2 is self-conjugate, so an odd multiplier there would
/// break the Hermitian symmetry of real fields; the standard convention
/// zeroes it.
fn odd_component(v: i64, n: usize) -> f64 {
    if v == -((n / 2) as i64) {
        0.0
    } else {
        v as f64
    }
}

/// Riesz transform R_j: multiplier i n_j / |n|, zero mode annihilated.
pub fn riesz(field: &SpectralField, j: usize) -> Result<SpectralField> {
    if j == 0 || j > field.grid().dim() {
        return Err(CoreError::InvalidParam {
            name: "j",
            reason: format!("component must be in 1..={}, got {j}", field.grid().dim()),
        });
    }
    let nn = field.grid().n();
    let mut out = field.clone();
    out.map_modes(|n| {
        let r = mode_norm(n);
        if r == 0.0 {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(0.0, odd_component(n[j - 1], nn) / r)
        }
    });
    Ok(out)
}

/// u = (-R_2 theta, R_1 theta); divergence-free by construction.
pub fn riesz_perp_velocity(field: &SpectralField) -> Result<(SpectralField, SpectralField)> {
    if field.grid().dim() != 2 {
        return Err(CoreError::InvalidParam {
            name: "d",
            reason: "perpendicular Riesz velocity requires d = 2".into(),
        });
    }
    let mut u1 = riesz(field, 2)?;
    u1.scale(-1.0);
    let u2 = riesz(field, 1)?;
    Ok((u1, u2))
}

/// Fractional Laplacian: multiplier |n|^alpha, zero mode annihilated.
pub fn fractional_laplacian(field: &SpectralField, alpha: f64) -> Result<SpectralField> {
    if !(alpha > 0.0 && alpha <= 2.0) {
        return Err(CoreError::InvalidParam {
            name: "alpha",
            reason: format!("must lie in (0, 2], got {alpha}"),
        });
    }
    let mut out = field.clone();
    out.map_modes(|n| {
        let r = mode_norm(n);
        Complex64::new(if r == 0.0 { 0.0 } else { r.powf(alpha) }, 0.0)
    });
    Ok(out)
}

/// Spectral partial derivative along axis j (1-based): multiplier i n_j.
pub fn spectral_derivative(field: &SpectralField, j: usize) -> Result<SpectralField> {
    if j == 0 || j > field.grid().dim() {
        return Err(CoreError::InvalidParam {
            name: "j",
            reason: format!("component must be in 1..={}, got {j}", field.grid().dim()),
        });
    }
    let nn = field.grid().n();
    let mut out = field.clone();
    out.map_modes(|n| Complex64::new(0.0, odd_component(n[j - 1], nn)));
    Ok(out)
}

/// Component j of grad (-Laplace)^{-1}: multiplier i n_j / |n|^2, zero mode
/// annihilated. The vector field V with div V = -f used by the transport
/// upper bound.
pub fn inv_laplacian_gradient(field: &SpectralField, j: usize) -> Result<SpectralField> {
    if j == 0 || j > field.grid().dim() {
        return Err(CoreError::InvalidParam {
            name: "j",
            reason: format!("component must be in 1..={}, got {j}", field.grid().dim()),
        });
    }
    let nn = field.grid().n();
    let mut out = field.clone();
    out.map_modes(|n| {
        let r2: f64 = n.iter().map(|&v| (v * v) as f64).sum();
        if r2 == 0.0 {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(0.0, odd_component(n[j - 1], nn) / r2)
        }
    });
    Ok(out)
}

/// 2/3-rule dealiasing: zero every mode with any |n_i| > N/3.
pub fn dealias(field: &mut SpectralField) {
    let cutoff = field.grid().n() as f64 / 3.0;
    field.map_modes(|n| {
        if n.iter().any(|&v| (v.abs() as f64) > cutoff) {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(1.0, 0.0)
        }
    });
}

/// Zero all modes with |n| > kmax (sharp low-pass; test helper).
pub fn band_limit(field: &mut SpectralField, kmax: f64) {
    field.map_modes(|n| {
        if mode_norm(n) > kmax {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(1.0, 0.0)
        }
    });
}

/// Pseudo-spectral advection term (u . grad) theta with 2/3 dealiasing,
/// returned spectrally. The zero mode is forced to exactly 0: for the
/// divergence-free velocities of the model the true term has zero mean,
/// and pinning it keeps the solver's mean conservation exact.
pub fn advection_spectral(u: &[GridField], theta_hat: &SpectralField) -> Result<SpectralField> {
    let grid = theta_hat.grid();
    if u.len() != grid.dim() {
        return Err(CoreError::GridMismatch(format!(
            "velocity has {} components on a d={} grid",
            u.len(),
            grid.dim()
        )));
    }
    let mut product = GridField::zero(grid);
    for (j, uj) in u.iter().enumerate() {
        if uj.grid() != grid {
            return Err(CoreError::GridMismatch("velocity component grid".into()));
        }
        let dtheta = to_grid(&spectral_derivative(theta_hat, j + 1)?)?;
        for ((p, uv), dv) in product
            .values_mut()
            .iter_mut()
            .zip(uj.values())
            .zip(dtheta.values())
        {
            *p += uv * dv;
        }
    }
    let mut out = to_spectral(&product);
    dealias(&mut out);
    let zero = vec![0i64; grid.dim()];
    out.set_mode(&zero, Complex64::new(0.0, 0.0));
    Ok(out)
}

/// Grid-level wrapper around [`advection_spectral`].
pub fn advection_term(u: &[GridField], theta: &GridField) -> Result<GridField> {
    let theta_hat = to_spectral(theta);
    to_grid(&advection_spectral(u, &theta_hat)?)
}

/// Sum over n of |coeff(n)|^2; Parseval partner of the quadrature of f^2.
pub fn parseval_sum(field: &SpectralField) -> f64 {
    field.coeffs.iter().map(|c| c.norm_sqr()).sum()
}

/// Band-limited pseudo-random real field: modes 0 < |n| <= kmax get
/// amplitudes ~ 1/(1+|n|) with seeded phases, the result is scaled to the
/// requested sup norm. Mean is exactly zero.
pub fn random_band_limited(grid: TorusGrid, kmax: f64, seed: u64, target_linf: f64) -> GridField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hat = SpectralField::zero(grid);
    let mut idx = [0usize; 3];
    let mut n = [0i64; 3];
    for i in 0..grid.len() {
        grid.unindex(i, &mut idx);
        for ax in 0..grid.dim() {
            n[ax] = SpectralField::freq(grid, idx[ax]);
        }
        let nv = &n[..grid.dim()];
        let r = mode_norm(nv);
        if r == 0.0 || r > kmax {
            continue;
        }
        // one representative per conjugate pair: first nonzero component > 0
        let lead = *nv.iter().find(|&&v| v != 0).unwrap();
        if lead < 0 {
            continue;
        }
        let amp = rng.gen_range(0.2..1.0) / (1.0 + r);
        let phase = rng.gen_range(0.0..std::f64::consts::TAU);
        hat.set_mode_pair(nv, 0.5 * amp * Complex64::new(phase.cos(), phase.sin()));
    }
    let mut f = to_grid(&hat).expect("synthesized field is Hermitian");
    let linf = f.linf();
    if linf > 0.0 {
        f.scale(target_linf / linf);
    }
    f
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{pair, TAU};

    fn grid2(n: usize) -> TorusGrid {
        TorusGrid::new(2, n).unwrap()
    }

    #[test]
    fn constant_field_transforms_to_mode_zero() {
        let f = GridField::from_fn(grid2(16), |_| 1.0);
        let hat = to_spectral(&f);
        assert!((hat.mode(&[0, 0]) - Complex64::new(1.0, 0.0)).norm() < 1e-13);
        let total: f64 = hat.coeffs().iter().map(|c| c.norm()).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cosine_hits_the_expected_pair() {
        let f = GridField::from_fn(grid2(32), |x| x[0].cos());
        let hat = to_spectral(&f);
        assert!((hat.mode(&[1, 0]) - Complex64::new(0.5, 0.0)).norm() < 1e-13);
        assert!((hat.mode(&[-1, 0]) - Complex64::new(0.5, 0.0)).norm() < 1e-13);
        // everything else vanishes
        let rest: f64 = parseval_sum(&hat) - 2.0 * 0.25;
        assert!(rest.abs() < 1e-13);
    }

    #[test]
    fn round_trip_is_identity() {
        let f = random_band_limited(grid2(64), 10.0, 7, 1.0);
        let g = to_grid(&to_spectral(&f)).unwrap();
        let err = f
            .values()
            .iter()
            .zip(g.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(err < 1e-12, "round trip error {err}");
    }

    #[test]
    fn hermitian_symmetry_of_real_fields() {
        let f = random_band_limited(grid2(32), 9.0, 3, 2.0);
        let hat = to_spectral(&f);
        assert!(hat.hermitian_residual() < 1e-12);
    }

    #[test]
    fn to_grid_rejects_broken_symmetry() {
        let mut hat = SpectralField::zero(grid2(16));
        hat.set_mode(&[1, 0], Complex64::new(0.0, 1.0)); // no conjugate partner
        assert!(to_grid(&hat).is_err());
    }

    #[test]
    fn parseval_matches_quadrature() {
        let f = random_band_limited(grid2(64), 12.0, 11, 1.0);
        let hat = to_spectral(&f);
        let lhs = TAU.powi(2) * parseval_sum(&hat);
        let rhs = pair(&f, &f);
        assert!((lhs - rhs).abs() <= 1e-10 * rhs.abs().max(1.0));
    }

    #[test]
    fn riesz_on_cosine() {
        let f = GridField::from_fn(grid2(32), |x| x[0].cos());
        let hat = to_spectral(&f);
        let r1 = to_grid(&riesz(&hat, 1).unwrap()).unwrap();
        let expect = GridField::from_fn(grid2(32), |x| -x[0].sin());
        let err = r1
            .values()
            .iter()
            .zip(expect.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(err < 1e-12, "R1 cos x1 != -sin x1, err {err}");
        let r2 = to_grid(&riesz(&hat, 2).unwrap()).unwrap();
        assert!(r2.linf() < 1e-13);
    }

    #[test]
    fn riesz_squared_sums_to_minus_identity() {
        let f = random_band_limited(grid2(32), 8.0, 5, 1.0);
        let hat = to_spectral(&f);
        let mut acc = SpectralField::zero(hat.grid());
        for j in 1..=2 {
            let rr = riesz(&riesz(&hat, j).unwrap(), j).unwrap();
            acc.add_scaled(&rr, 1.0);
        }
        acc.add_scaled(&hat, 1.0); // should cancel on mean-zero fields
        let resid: f64 = acc.coeffs().iter().map(|c| c.norm()).fold(0.0, f64::max);
        assert!(resid < 1e-12, "sum_j R_j R_j f + f = {resid}");
    }

    #[test]
    fn riesz_perp_is_divergence_free() {
        let f = random_band_limited(grid2(32), 8.0, 9, 1.0);
        let hat = to_spectral(&f);
        let (u1, u2) = riesz_perp_velocity(&hat).unwrap();
        let mut div = spectral_derivative(&u1, 1).unwrap();
        div.add_scaled(&spectral_derivative(&u2, 2).unwrap(), 1.0);
        let resid: f64 = div.coeffs().iter().map(|c| c.norm()).fold(0.0, f64::max);
        assert!(resid < 1e-14);
    }

    #[test]
    fn riesz_perp_on_cosine() {
        let f = GridField::from_fn(grid2(32), |x| x[0].cos());
        let (u1, u2) = riesz_perp_velocity(&to_spectral(&f)).unwrap();
        assert!(to_grid(&u1).unwrap().linf() < 1e-13);
        let u2g = to_grid(&u2).unwrap();
        let expect = GridField::from_fn(grid2(32), |x| -x[0].sin());
        let err = u2g
            .values()
            .iter()
            .zip(expect.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(err < 1e-12);
    }

    #[test]
    fn fractional_laplacian_multiplier_values() {
        let g = grid2(32);
        let alpha = 0.8;
        let f1 = GridField::from_fn(g, |x| x[0].cos());
        let out1 = to_grid(&fractional_laplacian(&to_spectral(&f1), alpha).unwrap()).unwrap();
        let e1 = out1
            .values()
            .iter()
            .zip(f1.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(e1 < 1e-12, "unit frequency should be fixed point, err {e1}");

        let f2 = GridField::from_fn(g, |x| (2.0 * x[0]).cos());
        let out2 = to_grid(&fractional_laplacian(&to_spectral(&f2), alpha).unwrap()).unwrap();
        let scale = 2.0f64.powf(alpha);
        let e2 = out2
            .values()
            .iter()
            .zip(f2.values())
            .map(|(a, b)| (a - scale * b).abs())
            .fold(0.0f64, f64::max);
        assert!(e2 < 1e-12, "multiplier 2^alpha, err {e2}");

        let c = GridField::from_fn(g, |_| 4.0);
        let out = to_grid(&fractional_laplacian(&to_spectral(&c), alpha).unwrap()).unwrap();
        assert!(out.linf() < 1e-13);

        assert!(fractional_laplacian(&to_spectral(&c), 2.5).is_err());
    }

    #[test]
    fn dealias_kills_high_modes_only() {
        let g = grid2(16); // cutoff N/3 = 5.33
        let mut hat = SpectralField::zero(g);
        hat.set_mode_pair(&[5, 0], Complex64::new(0.3, 0.0));
        hat.set_mode_pair(&[6, 0], Complex64::new(0.4, 0.0));
        dealias(&mut hat);
        assert!((hat.mode(&[5, 0]).norm() - 0.3).abs() < 1e-15);
        assert!(hat.mode(&[6, 0]).norm() == 0.0);
    }

    #[test]
    fn advection_simple_cases() {
        let g = grid2(64);
        // u = (0, -sin x1), theta = cos x1: no x2 dependence, term vanishes
        let u = [
            GridField::zero(g),
            GridField::from_fn(g, |x| -x[0].sin()),
        ];
        let theta = GridField::from_fn(g, |x| x[0].cos());
        let out = advection_term(&u, &theta).unwrap();
        assert!(out.linf() < 1e-12);

        // u = (1, 0), theta = cos x1: d1 cos x1 = -sin x1
        let u = [GridField::from_fn(g, |_| 1.0), GridField::zero(g)];
        let out = advection_term(&u, &theta).unwrap();
        let expect = GridField::from_fn(g, |x| -x[0].sin());
        let err = out
            .values()
            .iter()
            .zip(expect.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(err < 1e-12, "constant transport, err {err}");
    }

    #[test]
    fn advection_skew_symmetry_and_mean() {
        let g = grid2(64);
        // band-limit inputs below N/3 so the quadratic product is alias-free
        let theta = random_band_limited(g, 10.0, 21, 1.0);
        let th_hat = to_spectral(&theta);
        let (u1, u2) = riesz_perp_velocity(&th_hat).unwrap();
        let u = [to_grid(&u1).unwrap(), to_grid(&u2).unwrap()];
        let adv_hat = advection_spectral(&u, &th_hat).unwrap();
        assert_eq!(adv_hat.mode(&[0, 0]), Complex64::new(0.0, 0.0));
        let adv = to_grid(&adv_hat).unwrap();
        assert!(adv.mean().abs() < 1e-15);
        let sk = pair(&adv, &theta);
        assert!(sk.abs() < 1e-10, "skew symmetry <(u.grad)theta, theta> = {sk}");
    }

    #[test]
    fn random_band_limited_is_reproducible() {
        let g = grid2(32);
        let a = random_band_limited(g, 8.0, 42, 1.0);
        let b = random_band_limited(g, 8.0, 42, 1.0);
        assert_eq!(a.values(), b.values());
        assert!((a.linf() - 1.0).abs() < 1e-12);
        assert!(a.mean().abs() < 1e-13);
        let c = random_band_limited(g, 8.0, 43, 1.0);
        assert!(a.values() != c.values());
    }
}

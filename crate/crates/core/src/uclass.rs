//! The test-function class U(r): mean-zero fields whose L^p mass is at
//! most A r^{-(p-1)d} and whose pairing against every 1-Lipschitz function
//! is at most r. Membership is decided through a size quadrature plus
//! upper/lower bounds on the Lipschitz-dual pairing supremum; canonical
//! members (dipole bumps, Littlewood-Paley kernels) and the mean-zero
//! power witness are constructed here.

use crate::error::{CoreError, Result};
use crate::grid::{GridField, TorusGrid};
use crate::lp::LittlewoodPaleyFamily;
use crate::mollifier::bump_profile;
use crate::spectral::{self, SpectralField};
use crate::transport;
use num_complex::Complex64;

#[derive(Debug, Clone, Copy)]
pub struct ClassParams {
    pub a: f64,
    pub p: f64,
    pub q: f64,
    pub d: usize,
}

impl ClassParams {
    pub fn new(a: f64, p: f64, d: usize) -> Result<Self> {
        if a.is_nan() || a <= 1.0 {
            return Err(CoreError::InvalidParam {
                name: "A",
                reason: format!("size constant must exceed 1, got {a}"),
            });
        }
        if !(p > 1.0 && p.is_finite()) {
            return Err(CoreError::InvalidParam {
                name: "p",
                reason: format!("integrability exponent must exceed 1, got {p}"),
            });
        }
        let q = p / (p - 1.0);
        debug_assert!((1.0 / p + 1.0 / q - 1.0).abs() <= 1e-14);
        Ok(ClassParams { a, p, q, d })
    }

    /// A r^{-(p-1)d}, the right-hand side of the size condition.
    pub fn size_bound(&self, r: f64) -> f64 {
        self.a * r.powf(-(self.p - 1.0) * self.d as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Member,
    Nonmember,
    Undecided,
}

#[derive(Debug, Clone)]
pub struct MembershipReport {
    pub r: f64,
    pub size_lhs: f64,
    pub size_rhs: f64,
    pub lip_upper: f64,
    pub lip_lower: f64,
    pub verdict: Verdict,
    pub size_margin: f64,
    pub pairing_margin: f64,
}

fn validate_scale(r: f64) -> Result<()> {
    if !(r > 0.0 && r <= 1.0) {
        return Err(CoreError::InvalidParam {
            name: "r",
            reason: format!("scale must lie in (0, 1], got {r}"),
        });
    }
    Ok(())
}

/// Size condition: integral of |psi|^p against A r^{-(p-1)d}.
pub fn check_size(psi: &GridField, r: f64, params: &ClassParams) -> Result<(bool, f64)> {
    validate_scale(r)?;
    let lhs = psi.lp_norm(params.p).powf(params.p);
    let rhs = params.size_bound(r);
    Ok((lhs <= rhs, rhs - lhs))
}

fn require_mean_zero(psi: &GridField) -> Result<()> {
    let tol = 1e-10 * psi.linf().max(1.0);
    if psi.mean().abs() > tol {
        return Err(CoreError::InvalidParam {
            name: "psi",
            reason: format!("pairing bound needs mean zero, got mean {:.3e}", psi.mean()),
        });
    }
    Ok(())
}

/// Upper bound on sup { <f, psi> : f in Lip(1) }: for any vector field V
/// with div V = psi the pairing is at most ||V||_L1; take
/// V = grad (-Laplace)^{-1} psi spectrally.
pub fn lip_dual_upper(psi: &GridField) -> Result<f64> {
    require_mean_zero(psi)?;
    let g = psi.grid();
    let hat = spectral::to_spectral(psi);
    let mut mag_sq = vec![0.0f64; g.len()];
    for j in 1..=g.dim() {
        let vj = spectral::to_grid(&spectral::inv_laplacian_gradient(&hat, j)?)?;
        for (acc, v) in mag_sq.iter_mut().zip(vj.values()) {
            *acc += v * v;
        }
    }
    Ok(g.cell() * mag_sq.iter().map(|s| s.sqrt()).sum::<f64>())
}

/// Lower bound by exhibiting a feasible competitor: coordinate ascent on
/// the Kantorovich dual. Cells carrying positive mass are pushed up to
/// min_j (f_j + d_ij), negative ones down to max_j (f_j - d_ij); both
/// updates preserve feasibility (triangle inequality), and a final
/// measured-Lipschitz shrink toward the mean absorbs rounding. Cost is
/// O(cells^2) per sweep.
pub fn lip_dual_lower(psi: &GridField, iterations: usize) -> Result<f64> {
    require_mean_zero(psi)?;
    let g = psi.grid();
    let cell = g.cell();
    let mut active: Vec<(usize, f64)> = psi
        .values()
        .iter()
        .enumerate()
        .filter(|(_, &v)| v != 0.0)
        .map(|(i, &v)| (i, v))
        .collect();
    if active.is_empty() {
        return Ok(0.0);
    }
    // order sources before sinks: sources then pull sinks apart faster
    active.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
    let pts: Vec<[f64; 3]> = active
        .iter()
        .map(|&(i, _)| {
            let mut x = [0.0f64; 3];
            g.point(i, &mut x);
            x
        })
        .collect();
    let m = active.len();
    let dist = |a: usize, b: usize| g.periodic_distance(&pts[a][..g.dim()], &pts[b][..g.dim()]);
    let mut f = vec![0.0f64; m];
    let mut prev_obj = 0.0f64;
    for _ in 0..iterations {
        for i in 0..m {
            if active[i].1 > 0.0 {
                let mut lo = f64::INFINITY;
                for (j, fj) in f.iter().enumerate() {
                    if j != i {
                        lo = lo.min(fj + dist(i, j));
                    }
                }
                f[i] = lo;
            } else {
                let mut hi = f64::NEG_INFINITY;
                for (j, fj) in f.iter().enumerate() {
                    if j != i {
                        hi = hi.max(fj - dist(i, j));
                    }
                }
                f[i] = hi;
            }
        }
        let obj: f64 = f.iter().zip(&active).map(|(fv, &(_, w))| fv * w).sum();
        if (obj - prev_obj).abs() <= 1e-12 * obj.abs().max(1.0) {
            break;
        }
        prev_obj = obj;
    }
    // safety shrink: measure the all-pairs Lipschitz ratio and rescale
    let mut ratio = 0.0f64;
    for i in 0..m {
        for j in (i + 1)..m {
            let d = dist(i, j);
            if d > 0.0 {
                ratio = ratio.max((f[i] - f[j]).abs() / d);
            }
        }
    }
    if ratio > 1.0 {
        let mean = f.iter().sum::<f64>() / m as f64;
        for v in &mut f {
            *v = mean + (*v - mean) / ratio;
        }
    }
    let obj: f64 = f.iter().zip(&active).map(|(fv, &(_, w))| fv * w).sum();
    Ok((cell * obj).max(0.0))
}

/// Exact value of the pairing supremum on small grids: by
/// Kantorovich-Rubinstein duality it is the W1 transport cost between the
/// positive and negative parts.
pub fn lip_dual_exact_small(psi: &GridField) -> Result<f64> {
    if psi.grid().len() > 256 {
        return Err(CoreError::InvalidParam {
            name: "grid",
            reason: format!(
                "exact transport oracle is limited to 256 cells, got {}",
                psi.grid().len()
            ),
        });
    }
    require_mean_zero(psi)?;
    transport::w1_split(psi)
}

/// Assemble the size and pairing checks into a verdict. The lower bound
/// is only computed when it could flip the verdict to nonmember (size
/// passed but the upper bound exceeds r) and the grid is small enough for
/// the quadratic ascent; otherwise it is reported as the trivial bound 0.
pub fn check_membership(psi: &GridField, r: f64, params: &ClassParams) -> Result<MembershipReport> {
    validate_scale(r)?;
    let (size_ok, size_margin) = check_size(psi, r, params)?;
    let mean_tol = 1e-10 * psi.linf().max(1.0);
    if psi.mean().abs() > mean_tol {
        // constants pair unboundedly against Lipschitz functions
        return Ok(MembershipReport {
            r,
            size_lhs: params.size_bound(r) - size_margin,
            size_rhs: params.size_bound(r),
            lip_upper: f64::INFINITY,
            lip_lower: f64::INFINITY,
            verdict: Verdict::Nonmember,
            size_margin,
            pairing_margin: f64::NEG_INFINITY,
        });
    }
    let lip_upper = lip_dual_upper(psi)?;
    let mut lip_lower = 0.0;
    let verdict = if size_ok && lip_upper <= r {
        Verdict::Member
    } else if !size_ok {
        Verdict::Nonmember
    } else {
        if psi.grid().len() <= 4096 {
            lip_lower = lip_dual_lower(psi, 64)?;
        }
        if lip_lower > r {
            Verdict::Nonmember
        } else {
            Verdict::Undecided
        }
    };
    Ok(MembershipReport {
        r,
        size_lhs: params.size_bound(r) - size_margin,
        size_rhs: params.size_bound(r),
        lip_upper,
        lip_lower,
        verdict,
        size_margin,
        pairing_margin: r - lip_upper,
    })
}

/// Canonical member: a dipole of two opposite smooth bumps inside B_r,
/// normalized so ||psi||_p = 0.9 r^{-d/q}. The two lobes are exact grid
/// translates of each other, so the discrete mean vanishes identically.
/// The lobes sit close together (separation ~0.4 r, radius ~0.4 r): the
/// normalization fixes the L^1 mass at O(1) regardless of r, so only a
/// short transport distance keeps the pairing bound below r.
pub fn make_bump(grid: TorusGrid, r: f64, params: &ClassParams) -> Result<GridField> {
    validate_scale(r)?;
    let h = grid.spacing();
    if r / h < 4.0 {
        return Err(CoreError::InvalidParam {
            name: "r",
            reason: format!("scale {r} spans under four cells at spacing {h:.4}"),
        });
    }
    let cells = (0.2 * r / h).round().max(1.0);
    let offset = cells * h;
    let radius = (0.4 * r).min(r - offset);
    if radius < 2.0 * h {
        return Err(CoreError::InvalidParam {
            name: "r",
            reason: format!("bump lobe at scale {r} is unresolved at spacing {h:.4}"),
        });
    }
    let mut center = vec![0.0; grid.dim()];
    center[0] = offset;
    let plus = GridField::from_fn(grid, |x| {
        bump_profile(grid.periodic_distance(x, &center) / radius)
    });
    let mut shift = vec![0i64; grid.dim()];
    shift[0] = -2 * cells as i64;
    let minus = plus.translate_cells(&shift)?;
    let mut psi = plus;
    psi.add_scaled(&minus, -1.0);
    let target = 0.9 * r.powf(-(grid.dim() as f64) / params.q);
    let norm = psi.lp_norm(params.p);
    if norm == 0.0 {
        return Err(CoreError::Degenerate("bump sampled to zero".into()));
    }
    psi.scale(target / norm);
    Ok(psi)
}

/// Littlewood-Paley kernel Phi_j: the periodization of the j-th annulus
/// kernel, synthesized from its Fourier coefficients c (2pi)^{-d}
/// phi_j(n). Pairing a field g against translates of Phi_j evaluates
/// c Delta_j g at the translate point.
pub fn make_lp_kernel(fam: &LittlewoodPaleyFamily, j: usize, c: f64) -> Result<GridField> {
    if j > fam.j_max() {
        return Err(CoreError::InvalidParam {
            name: "j",
            reason: format!("block index {} exceeds j_max = {}", j, fam.j_max()),
        });
    }
    let grid = fam.grid();
    let mut hat = SpectralField::zero(grid);
    let scale = c / grid.volume();
    let mut idx = [0usize; 3];
    let mut n = [0i64; 3];
    for i in 0..grid.len() {
        grid.unindex(i, &mut idx);
        for ax in 0..grid.dim() {
            n[ax] = SpectralField::freq(grid, idx[ax]);
        }
        let norm = n[..grid.dim()]
            .iter()
            .map(|&v| (v * v) as f64)
            .sum::<f64>()
            .sqrt();
        hat.coeffs_mut()[i] = Complex64::new(scale * fam.phi_j(j, norm), 0.0);
    }
    spectral::to_grid(&hat)
}

/// Largest dyadic scaling 2^{-m} for which every Phi_j is a member of
/// U(2^{-j}); recorded with the family so kernels and pairings use one
/// reproducible constant.
pub fn calibrate_lp_constant(fam: &LittlewoodPaleyFamily, params: &ClassParams) -> Result<f64> {
    'outer: for m in 0..=12 {
        let c = 0.5f64.powi(m);
        for j in 0..=fam.j_max() {
            let psi = make_lp_kernel(fam, j, c)?;
            let r = 0.5f64.powi(j as i32);
            if check_membership(&psi, r, params)?.verdict != Verdict::Member {
                continue 'outer;
            }
        }
        return Ok(c);
    }
    Err(CoreError::NoConvergence(
        "lp-kernel calibration",
        "no dyadic scaling down to 2^-12 passes membership for all blocks".into(),
    ))
}

/// Cells whose centers lie within periodic distance rho of `center`.
pub fn ball_indices(grid: TorusGrid, center: &[f64], rho: f64) -> Vec<usize> {
    let mut x = [0.0f64; 3];
    (0..grid.len())
        .filter(|&i| {
            grid.point(i, &mut x);
            grid.periodic_distance(&x[..grid.dim()], center) <= rho
        })
        .collect()
}

/// The optimal mean-zero witness on a ball: finds the unique c with
/// sum over the ball of (theta - c)^{q-1} = 0 (strictly decreasing in c,
/// bisection), and returns psi = lambda (theta - c)^{q-1} 1_ball with
/// lambda = rho^{-d/q} ||(theta - c) 1_ball||_q^{-q/p}. The pairing
/// identity rho^{d/q} <theta, psi> = ||(theta - c) 1_ball||_q and the
/// norm identity ||psi||_p^p = rho^{-(p-1)d} then hold in quadrature.
pub fn mean_zero_witness(
    theta: &GridField,
    rho: f64,
    center: &[f64],
    q: f64,
) -> Result<(f64, GridField)> {
    let grid = theta.grid();
    if !(q >= 2.0 && q.fract() == 0.0 && (q as u64).is_power_of_two()) {
        return Err(CoreError::InvalidParam {
            name: "q",
            reason: format!("witness exponent must be a power of two >= 2, got {q}"),
        });
    }
    if !(rho > 0.0 && rho <= std::f64::consts::PI) {
        return Err(CoreError::InvalidParam {
            name: "rho",
            reason: format!("ball radius must lie in (0, pi], got {rho}"),
        });
    }
    let ball = ball_indices(grid, center, rho);
    if ball.len() < (1 << grid.dim()) {
        return Err(CoreError::InvalidParam {
            name: "rho",
            reason: format!("ball holds only {} cells; unresolved", ball.len()),
        });
    }
    let vals = theta.values();
    let (mut lo, mut hi) = ball.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &i| {
        (l.min(vals[i]), h.max(vals[i]))
    });
    if hi - lo < 1e-14 * hi.abs().max(1.0) {
        return Err(CoreError::Degenerate(
            "witness needs a nonconstant field on the ball".into(),
        ));
    }
    let e = q as i32 - 1; // odd, so the signed power is a plain power
    let moment = |c: f64| ball.iter().map(|&i| (vals[i] - c).powi(e)).sum::<f64>();
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if moment(mid) >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * (hi.abs().max(lo.abs()).max(1.0)) {
            break;
        }
    }
    let c = 0.5 * (lo + hi);
    let d = grid.dim() as f64;
    let norm_q_pow: f64 = grid.cell() * ball.iter().map(|&i| (vals[i] - c).powi(e + 1)).sum::<f64>();
    if norm_q_pow <= 0.0 {
        return Err(CoreError::Degenerate("witness norm vanished".into()));
    }
    let ln_norm_q = norm_q_pow.ln() / q;
    // lambda = rho^{-d/q} ||.||_q^{-(q-1)}, assembled in log space
    let lambda = (-(d / q) * rho.ln() - (q - 1.0) * ln_norm_q).exp();
    let mut psi = GridField::zero(grid);
    for &i in &ball {
        psi.values_mut()[i] = lambda * (vals[i] - c).powi(e);
    }
    Ok((c, psi))
}

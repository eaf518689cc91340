//! Time integration: the forward dissipative equation with active
//! (Riesz-perpendicular), mollified, or resting velocity; the backward
//! dual equation driven by a recorded velocity history; and the passive
//! scalar with an externally prescribed divergence-free velocity.
//!
//! One integrating-factor RK4 engine serves all three: the linear symbol
//! |n|^alpha + eps |n|^2 is integrated exactly, the advection term is
//! evaluated pseudo-spectrally with 2/3-rule dealiasing, and the time
//! step adapts to a CFL bound of 0.5 cells per step.

use crate::error::{CoreError, Result};
use crate::grid::{GridField, TorusGrid};
use crate::mollifier::{build_mollifier, Mollifier};
use crate::spectral::{
    self, advection_spectral, dealias, random_band_limited, riesz_perp_velocity, to_grid,
    to_spectral, SpectralField,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VelocityMode {
    /// u = (-R2 theta, R1 theta), the active d=2 coupling.
    RieszPerp,
    /// Externally prescribed velocity. simulate_forward treats this as
    /// rest (u = 0, pure fractional diffusion); time-dependent fields go
    /// through simulate_passive.
    Prescribed,
    /// u = Riesz-perp of theta * chi_r.
    Mollified { r: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitKind {
    Zero,
    /// Band-limited modes |n| <= kmax, seeded amplitudes, mean zero,
    /// scaled to the target sup norm.
    RandomMeanZero { kmax: f64, linf: f64 },
    Shear,
    VortexPair,
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub alpha: f64,
    pub epsilon: f64,
    pub d: usize,
    pub n: usize,
    pub dt_max: f64,
    pub t_end: f64,
    pub velocity_mode: VelocityMode,
    pub snapshot_stride: usize,
    pub seed: u64,
    pub init: InitKind,
    /// exponent of the ||theta||_q column in the scalar time series
    pub series_q: f64,
}

impl SolverConfig {
    pub fn validate(&self) -> Result<TorusGrid> {
        let grid = TorusGrid::new(self.d, self.n)?;
        if !(self.alpha > 0.0 && self.alpha <= 2.0) {
            return Err(CoreError::InvalidParam {
                name: "alpha",
                reason: format!("must lie in (0, 2], got {}", self.alpha),
            });
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(CoreError::InvalidParam {
                name: "epsilon",
                reason: format!("must be finite and >= 0, got {}", self.epsilon),
            });
        }
        if !(self.dt_max > 0.0 && self.dt_max.is_finite()) {
            return Err(CoreError::InvalidParam {
                name: "dt",
                reason: format!("must be positive, got {}", self.dt_max),
            });
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(CoreError::InvalidParam {
                name: "t_end",
                reason: format!("must be finite and >= 0, got {}", self.t_end),
            });
        }
        if self.snapshot_stride == 0 {
            return Err(CoreError::InvalidParam {
                name: "snapshot_stride",
                reason: "must be at least 1".into(),
            });
        }
        if self.series_q.is_nan() || self.series_q < 1.0 {
            return Err(CoreError::InvalidParam {
                name: "series_q",
                reason: format!("norm exponent must be >= 1, got {}", self.series_q),
            });
        }
        if self.d != 2 && !matches!(self.velocity_mode, VelocityMode::Prescribed) {
            return Err(CoreError::InvalidParam {
                name: "velocity_mode",
                reason: "Riesz-based velocities need d = 2".into(),
            });
        }
        Ok(grid)
    }
}

/// Builds the configured initial state (Custom data bypasses this and
/// goes straight to simulate_forward).
pub fn initial_condition(cfg: &SolverConfig) -> Result<GridField> {
    let grid = cfg.validate()?;
    Ok(match cfg.init {
        InitKind::Zero => GridField::zero(grid),
        InitKind::RandomMeanZero { kmax, linf } => random_band_limited(grid, kmax, cfg.seed, linf),
        InitKind::Shear => GridField::from_fn(grid, |x| x[1].sin()),
        InitKind::VortexPair => {
            let w = 0.6f64;
            let cp = [std::f64::consts::FRAC_PI_2, 0.0];
            let cm = [-std::f64::consts::FRAC_PI_2, 0.0];
            let mut f = GridField::from_fn(grid, |x| {
                let dp = grid.periodic_distance(x, &cp);
                let dm = grid.periodic_distance(x, &cm);
                (-dp * dp / (2.0 * w * w)).exp() - (-dm * dm / (2.0 * w * w)).exp()
            });
            let mean = f.mean();
            let flat = GridField::from_fn(grid, |_| 1.0);
            f.add_scaled(&flat, -mean);
            let linf = f.linf();
            f.scale(1.0 / linf);
            f
        }
    })
}

#[derive(Debug, Clone, Copy)]
pub struct SeriesPoint {
    pub t: f64,
    pub linf: f64,
    pub l2: f64,
    pub lq: f64,
    pub mean: f64,
    pub dt: f64,
}

#[derive(Debug, Clone)]
pub struct VelocityRecord {
    pub t: f64,
    pub u: Vec<GridField>,
}

/// Velocity data retained for dual replay: every accepted step when the
/// snapshot stride is 1, otherwise spectral checkpoints from which the
/// deterministic step sequence is re-integrated on demand.
#[derive(Debug, Clone)]
pub enum VelocityHistory {
    Dense(Vec<VelocityRecord>),
    Checkpoints(Vec<(f64, SpectralField)>),
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub cfg: SolverConfig,
    pub t0: f64,
    pub snapshots: Vec<(f64, GridField)>,
    pub history: VelocityHistory,
    pub series: Vec<SeriesPoint>,
}

impl Trajectory {
    pub fn grid(&self) -> TorusGrid {
        self.snapshots[0].1.grid()
    }

    pub fn final_time(&self) -> f64 {
        self.snapshots.last().unwrap().0
    }

    pub fn final_state(&self) -> &GridField {
        &self.snapshots.last().unwrap().1
    }

    /// Velocity records covering [a, b]: cloned from the dense history,
    /// or re-integrated from the latest checkpoint at or before a. The
    /// replay repeats the original adaptive step sequence exactly, since
    /// each dt depends only on the current state and the global horizon.
    pub fn velocity_records_covering(&self, a: f64, b: f64) -> Result<Vec<VelocityRecord>> {
        if a < self.t0 - 1e-9 || b > self.final_time() + 1e-9 || a > b + 1e-9 {
            return Err(CoreError::NotCovered(format!(
                "[{a}, {b}] outside recorded [{}, {}]",
                self.t0,
                self.final_time()
            )));
        }
        match &self.history {
            VelocityHistory::Dense(recs) => {
                if recs.first().is_none_or(|r| r.t > a + 1e-9)
                    || recs.last().is_none_or(|r| r.t < b - 1e-9)
                {
                    return Err(CoreError::NotCovered(format!(
                        "dense history does not span [{a}, {b}]"
                    )));
                }
                Ok(recs.clone())
            }
            VelocityHistory::Checkpoints(cps) => {
                let start = cps
                    .iter()
                    .rev()
                    .find(|(t, _)| *t <= a + 1e-9)
                    .ok_or_else(|| {
                        CoreError::NotCovered(format!("no checkpoint at or before {a}"))
                    })?;
                let grid = self.grid();
                let lambda = dissipation_symbol(grid, self.cfg.alpha, self.cfg.epsilon);
                let mut vel = forward_velocity(grid, &self.cfg)?;
                let mut records = Vec::new();
                let mut observe = |ev: StepEvent| -> Result<()> {
                    records.push(VelocityRecord {
                        t: ev.t_before,
                        u: ev.u_start.to_vec(),
                    });
                    Ok(())
                };
                let (tf, state) = integrate(
                    &lambda,
                    1.0,
                    self.cfg.dt_max,
                    self.cfg.t_end,
                    b,
                    &[],
                    start.0,
                    start.1.clone(),
                    &mut vel,
                    &mut observe,
                )?;
                records.push(VelocityRecord {
                    t: tf,
                    u: vel(tf, &state)?,
                });
                Ok(records)
            }
        }
    }
}

fn dissipation_symbol(grid: TorusGrid, alpha: f64, epsilon: f64) -> Vec<f64> {
    let mut out = vec![0.0f64; grid.len()];
    let mut idx = [0usize; 3];
    for (i, v) in out.iter_mut().enumerate() {
        grid.unindex(i, &mut idx);
        let mut nsq = 0.0f64;
        for &ix in idx.iter().take(grid.dim()) {
            let f = SpectralField::freq(grid, ix) as f64;
            nsq += f * f;
        }
        *v = if nsq > 0.0 {
            nsq.powf(alpha * 0.5) + epsilon * nsq
        } else {
            0.0
        };
    }
    out
}

struct StepEvent<'a> {
    step: usize,
    t_before: f64,
    t_after: f64,
    dt: f64,
    u_start: &'a [GridField],
    state_after: &'a SpectralField,
}

/// One Lawson (integrating factor) RK4 step sequence. dt adapts per step
/// to min(dt_max, 0.5, CFL, horizon, next landing target); landing
/// targets are times the integration must hit exactly.
#[allow(clippy::too_many_arguments)]
fn integrate<V, O>(
    lambda: &[f64],
    adv_sign: f64,
    dt_max: f64,
    clamp_end: f64,
    stop_after: f64,
    targets: &[f64],
    start_t: f64,
    mut state: SpectralField,
    vel: &mut V,
    observe: &mut O,
) -> Result<(f64, SpectralField)>
where
    V: FnMut(f64, &SpectralField) -> Result<Vec<GridField>>,
    O: FnMut(StepEvent) -> Result<()>,
{
    let grid = state.grid();
    let h = grid.spacing();
    let m = state.coeffs().len();
    let mut t = start_t;
    let mut step = 0usize;
    let mut e1 = vec![0.0f64; m];
    let mut e2 = vec![0.0f64; m];
    while t < stop_after - 1e-12 {
        let u_start = vel(t, &state)?;
        let mut maxu = 0.0f64;
        for i in 0..grid.len() {
            let s: f64 = u_start.iter().map(|c| c.values()[i] * c.values()[i]).sum();
            maxu = maxu.max(s);
        }
        maxu = maxu.sqrt();
        let mut dt = dt_max.min(0.5).min(clamp_end - t);
        if maxu > 0.0 {
            dt = dt.min(0.5 * h / maxu);
        }
        if let Some(&tg) = targets.iter().find(|&&tg| tg > t + 1e-12) {
            dt = dt.min(tg - t);
        }
        if dt.is_nan() || dt <= 1e-12 {
            return Err(CoreError::StepFloor { t, dt });
        }
        for ((a, b), &l) in e1.iter_mut().zip(&mut e2).zip(lambda) {
            *a = (-l * dt * 0.5).exp();
            *b = *a * *a;
        }
        let half = dt * 0.5;
        let mut k1 = advection_spectral(&u_start, &state)?;
        k1.scale(adv_sign);
        // arg2 = E (state + dt/2 k1)
        let mut arg = state.clone();
        for (i, &e) in e1.iter().enumerate() {
            let c = (arg.coeffs()[i] + k1.coeffs()[i] * half) * e;
            arg.coeffs_mut()[i] = c;
        }
        let u = vel(t + half, &arg)?;
        let mut k2 = advection_spectral(&u, &arg)?;
        k2.scale(adv_sign);
        // arg3 = E state + dt/2 k2
        for (i, &e) in e1.iter().enumerate() {
            let c = state.coeffs()[i] * e + k2.coeffs()[i] * half;
            arg.coeffs_mut()[i] = c;
        }
        let u = vel(t + half, &arg)?;
        let mut k3 = advection_spectral(&u, &arg)?;
        k3.scale(adv_sign);
        // arg4 = E^2 state + dt E k3
        for i in 0..m {
            let c = state.coeffs()[i] * e2[i] + k3.coeffs()[i] * e1[i] * dt;
            arg.coeffs_mut()[i] = c;
        }
        let u = vel(t + dt, &arg)?;
        let mut k4 = advection_spectral(&u, &arg)?;
        k4.scale(adv_sign);
        let sixth = dt / 6.0;
        for i in 0..m {
            let c = state.coeffs()[i] * e2[i]
                + (k1.coeffs()[i] * e2[i]
                    + (k2.coeffs()[i] + k3.coeffs()[i]) * (2.0 * e1[i])
                    + k4.coeffs()[i])
                    * sixth;
            state.coeffs_mut()[i] = c;
        }
        dealias(&mut state);
        if !state.is_finite() {
            return Err(CoreError::NonFinite(format!(
                "state lost finiteness at t = {:.6}",
                t + dt
            )));
        }
        let t_after = t + dt;
        step += 1;
        observe(StepEvent {
            step,
            t_before: t,
            t_after,
            dt,
            u_start: &u_start,
            state_after: &state,
        })?;
        t = t_after;
    }
    Ok((t, state))
}

type VelocityFn<'a> = Box<dyn FnMut(f64, &SpectralField) -> Result<Vec<GridField>> + 'a>;

fn forward_velocity(grid: TorusGrid, cfg: &SolverConfig) -> Result<VelocityFn<'static>> {
    match cfg.velocity_mode {
        VelocityMode::RieszPerp => Ok(Box::new(move |_t, s: &SpectralField| {
            let (u1, u2) = riesz_perp_velocity(s)?;
            Ok(vec![to_grid(&u1)?, to_grid(&u2)?])
        })),
        VelocityMode::Mollified { r } => {
            let moll: Mollifier = build_mollifier(grid, r)?;
            Ok(Box::new(move |_t, s: &SpectralField| {
                crate::mollifier::mollified_velocity_spectral(s, &moll)
            }))
        }
        VelocityMode::Prescribed => {
            let rest: Vec<GridField> = (0..grid.dim()).map(|_| GridField::zero(grid)).collect();
            Ok(Box::new(move |_t, _s: &SpectralField| Ok(rest.clone())))
        }
    }
}

fn series_point(t: f64, g: &GridField, mean: f64, q: f64, dt: f64) -> SeriesPoint {
    SeriesPoint {
        t,
        linf: g.linf(),
        l2: g.l2(),
        lq: g.lp_norm(q),
        mean,
        dt,
    }
}

/// Forward integration from theta0 at t = 0 to cfg.t_end, recording
/// snapshots, scalar series, and the velocity history for dual replay.
pub fn simulate_forward(cfg: &SolverConfig, theta0: &GridField) -> Result<Trajectory> {
    let grid = cfg.validate()?;
    if theta0.grid() != grid {
        return Err(CoreError::GridMismatch(
            "initial state disagrees with configured grid".into(),
        ));
    }
    let mut hat = to_spectral(theta0);
    dealias(&mut hat);
    if !hat.is_finite() {
        return Err(CoreError::NonFinite("initial state".into()));
    }
    let lambda = dissipation_symbol(grid, cfg.alpha, cfg.epsilon);
    let mut vel = forward_velocity(grid, cfg)?;
    let dense_mode = cfg.snapshot_stride == 1;
    let g0 = to_grid(&hat)?;
    let mut snapshots = vec![(0.0, g0)];
    let mut series = vec![series_point(
        0.0,
        &snapshots[0].1,
        hat.coeffs()[0].re,
        cfg.series_q,
        0.0,
    )];
    let mut dense: Vec<VelocityRecord> = Vec::new();
    let mut checkpoints: Vec<(f64, SpectralField)> = vec![(0.0, hat.clone())];
    let stride = cfg.snapshot_stride;
    let series_q = cfg.series_q;
    let (tf, state) = {
        let mut observe = |ev: StepEvent| -> Result<()> {
            if dense_mode {
                dense.push(VelocityRecord {
                    t: ev.t_before,
                    u: ev.u_start.to_vec(),
                });
            }
            let g = to_grid(ev.state_after)?;
            series.push(series_point(
                ev.t_after,
                &g,
                ev.state_after.coeffs()[0].re,
                series_q,
                ev.dt,
            ));
            if ev.step.is_multiple_of(stride) {
                snapshots.push((ev.t_after, g));
                if !dense_mode {
                    checkpoints.push((ev.t_after, ev.state_after.clone()));
                }
            }
            Ok(())
        };
        integrate(
            &lambda,
            1.0,
            cfg.dt_max,
            cfg.t_end,
            cfg.t_end,
            &[],
            0.0,
            hat,
            &mut vel,
            &mut observe,
        )?
    };
    if snapshots.last().unwrap().0 < tf - 1e-12 {
        snapshots.push((tf, to_grid(&state)?));
        if !dense_mode {
            checkpoints.push((tf, state.clone()));
        }
    }
    let history = if dense_mode {
        dense.push(VelocityRecord {
            t: tf,
            u: vel(tf, &state)?,
        });
        VelocityHistory::Dense(dense)
    } else {
        VelocityHistory::Checkpoints(checkpoints)
    };
    Ok(Trajectory {
        cfg: cfg.clone(),
        t0: 0.0,
        snapshots,
        history,
        series,
    })
}

/// Velocity at an arbitrary time inside a record sequence, linearly
/// interpolated between the bracketing records.
pub fn interpolate_velocity(records: &[VelocityRecord], time: f64) -> Result<Vec<GridField>> {
    let first = records.first().ok_or_else(|| {
        CoreError::NotCovered("velocity history is empty".into())
    })?;
    let last = records.last().unwrap();
    if time < first.t - 1e-9 || time > last.t + 1e-9 {
        return Err(CoreError::NotCovered(format!(
            "velocity requested at {time}, recorded [{}, {}]",
            first.t, last.t
        )));
    }
    let time = time.clamp(first.t, last.t);
    let hi = records.partition_point(|r| r.t < time).min(records.len() - 1);
    let lo = hi.saturating_sub(if records[hi].t > time { 1 } else { 0 });
    let (ra, rb) = (&records[lo], &records[hi.max(lo)]);
    let span = rb.t - ra.t;
    let w = if span > 0.0 { (time - ra.t) / span } else { 0.0 };
    Ok(ra
        .u
        .iter()
        .zip(&rb.u)
        .map(|(a, b)| {
            let mut out = a.clone();
            out.scale(1.0 - w);
            out.add_scaled(b, w);
            out
        })
        .collect())
}

#[derive(Debug, Clone)]
pub struct DualRun {
    /// psi(. , t - s)
    pub field: GridField,
    /// requested intermediate states as (forward time tau, psi(. , tau))
    pub captures: Vec<(f64, GridField)>,
}

/// Backward dual evolution: from terminal data psi at forward time t,
/// integrate s time units back along the recorded velocity. Under
/// sigma = t - tau this is forward advection-diffusion with the reversed
/// advection sign and the same dissipation symbol; velocity at
/// intermediate sigma is linearly interpolated between records.
pub fn simulate_dual_backward_captured(
    traj: &Trajectory,
    psi_t: &GridField,
    t: f64,
    s: f64,
    capture_times: &[f64],
) -> Result<DualRun> {
    if !(s >= 0.0 && s.is_finite()) {
        return Err(CoreError::InvalidParam {
            name: "s",
            reason: format!("backward duration must be >= 0, got {s}"),
        });
    }
    if psi_t.grid() != traj.grid() {
        return Err(CoreError::GridMismatch(
            "dual data disagrees with trajectory grid".into(),
        ));
    }
    let mut targets: Vec<f64> = Vec::new();
    for &tau in capture_times {
        if tau < t - s - 1e-9 || tau > t + 1e-9 {
            return Err(CoreError::NotCovered(format!(
                "capture time {tau} outside [{}, {t}]",
                t - s
            )));
        }
        targets.push((t - tau).clamp(0.0, s));
    }
    targets.sort_by(|a, b| a.partial_cmp(b).unwrap());
    targets.dedup_by(|a, b| (*a - *b).abs() <= 1e-12);
    let mut captures = Vec::new();
    if s == 0.0 {
        for &sg in &targets {
            debug_assert!(sg <= 1e-12);
            let _ = sg;
            captures.push((t, psi_t.clone()));
        }
        return Ok(DualRun {
            field: psi_t.clone(),
            captures,
        });
    }
    let records = traj.velocity_records_covering(t - s, t)?;
    let mut hat = to_spectral(psi_t);
    dealias(&mut hat);
    if !hat.is_finite() {
        return Err(CoreError::NonFinite("dual terminal state".into()));
    }
    if targets.first().is_some_and(|&sg| sg <= 1e-12) {
        captures.push((t, to_grid(&hat)?));
        targets.remove(0);
    }
    let grid = traj.grid();
    let lambda = dissipation_symbol(grid, traj.cfg.alpha, traj.cfg.epsilon);
    let mut vel = |sigma: f64, _state: &SpectralField| -> Result<Vec<GridField>> {
        interpolate_velocity(&records, t - sigma)
    };
    // the integrator scans landing targets in order, so they must stay
    // sorted ascending; reuse the capture schedule
    let landing = targets.clone();
    let mut pending = targets.into_iter().peekable();
    let (_, state) = {
        let mut observe = |ev: StepEvent| -> Result<()> {
            while let Some(&sg) = pending.peek() {
                if sg <= ev.t_after + 1e-9 {
                    if (sg - ev.t_after).abs() > 1e-6 {
                        return Err(CoreError::NotCovered(format!(
                            "integration missed capture at sigma = {sg}"
                        )));
                    }
                    captures.push((t - sg, to_grid(ev.state_after)?));
                    pending.next();
                } else {
                    break;
                }
            }
            Ok(())
        };
        integrate(
            &lambda,
            -1.0,
            traj.cfg.dt_max,
            s,
            s,
            &landing,
            0.0,
            hat,
            &mut vel,
            &mut observe,
        )?
    };
    Ok(DualRun {
        field: to_grid(&state)?,
        captures,
    })
}

pub fn simulate_dual_backward(
    traj: &Trajectory,
    psi_t: &GridField,
    t: f64,
    s: f64,
) -> Result<GridField> {
    Ok(simulate_dual_backward_captured(traj, psi_t, t, s, &[])?.field)
}

fn divergence_sup(u: &[GridField]) -> Result<f64> {
    let grid = u[0].grid();
    let mut div = SpectralField::zero(grid);
    for (j, comp) in u.iter().enumerate() {
        let hat = to_spectral(comp);
        let dj = spectral::spectral_derivative(&hat, j + 1)?;
        for (a, b) in div.coeffs_mut().iter_mut().zip(dj.coeffs()) {
            *a += b;
        }
    }
    Ok(to_grid(&div)?.linf())
}

/// Passive scalar under an external velocity supplier: same scheme and
/// recording as simulate_forward, divergence checked spectrally on every
/// supplied field. `dissipate = false` switches the fractional term off
/// (pure transport, the rigid-translation test mode).
pub fn simulate_passive<V>(
    cfg: &SolverConfig,
    mut velocity: V,
    f0: &GridField,
    t0: f64,
    t1: f64,
    dissipate: bool,
) -> Result<Trajectory>
where
    V: FnMut(f64) -> Result<Vec<GridField>>,
{
    let grid = cfg.validate()?;
    if f0.grid() != grid {
        return Err(CoreError::GridMismatch(
            "initial state disagrees with configured grid".into(),
        ));
    }
    if t1.is_nan() || t0.is_nan() || t1 < t0 {
        return Err(CoreError::InvalidParam {
            name: "t1",
            reason: format!("interval end {t1} precedes start {t0}"),
        });
    }
    let mut hat = to_spectral(f0);
    dealias(&mut hat);
    let lambda = if dissipate {
        dissipation_symbol(grid, cfg.alpha, cfg.epsilon)
    } else {
        vec![0.0; grid.len()]
    };
    let mut vel = |t: f64, _state: &SpectralField| -> Result<Vec<GridField>> {
        let u = velocity(t)?;
        if u.len() != grid.dim() {
            return Err(CoreError::GridMismatch(format!(
                "velocity has {} components on a d={} grid",
                u.len(),
                grid.dim()
            )));
        }
        let scale = u.iter().map(|c| c.linf()).fold(1.0f64, f64::max);
        let div = divergence_sup(&u)?;
        if div > 1e-8 * scale {
            return Err(CoreError::Degenerate(format!(
                "prescribed velocity is not divergence-free: |div| = {div:.3e}"
            )));
        }
        Ok(u)
    };
    let dense_mode = cfg.snapshot_stride == 1;
    let g0 = to_grid(&hat)?;
    let mut snapshots = vec![(t0, g0)];
    let mut series = vec![series_point(
        t0,
        &snapshots[0].1,
        hat.coeffs()[0].re,
        cfg.series_q,
        0.0,
    )];
    let mut dense: Vec<VelocityRecord> = Vec::new();
    let mut checkpoints: Vec<(f64, SpectralField)> = vec![(t0, hat.clone())];
    let stride = cfg.snapshot_stride;
    let series_q = cfg.series_q;
    let (tf, state) = {
        let mut observe = |ev: StepEvent| -> Result<()> {
            if dense_mode {
                dense.push(VelocityRecord {
                    t: ev.t_before,
                    u: ev.u_start.to_vec(),
                });
            }
            let g = to_grid(ev.state_after)?;
            series.push(series_point(
                ev.t_after,
                &g,
                ev.state_after.coeffs()[0].re,
                series_q,
                ev.dt,
            ));
            if ev.step.is_multiple_of(stride) {
                snapshots.push((ev.t_after, g));
                if !dense_mode {
                    checkpoints.push((ev.t_after, ev.state_after.clone()));
                }
            }
            Ok(())
        };
        integrate(
            &lambda, 1.0, cfg.dt_max, t1, t1, &[], t0, hat, &mut vel, &mut observe,
        )?
    };
    if snapshots.last().unwrap().0 < tf - 1e-12 {
        snapshots.push((tf, to_grid(&state)?));
        if !dense_mode {
            checkpoints.push((tf, state.clone()));
        }
    }
    let history = if dense_mode {
        dense.push(VelocityRecord {
            t: tf,
            u: vel(tf, &state)?,
        });
        VelocityHistory::Dense(dense)
    } else {
        VelocityHistory::Checkpoints(checkpoints)
    };
    Ok(Trajectory {
        cfg: cfg.clone(),
        t0,
        snapshots,
        history,
        series,
    })
}

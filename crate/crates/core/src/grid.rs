//! Uniform grids on the torus [-pi, pi)^d and real scalar fields on them.
//!
//! Grid points are x_k = -pi + k * (2pi/N) per component, with the flat
//! storage index running fastest over the first coordinate. All integrals
//! are trapezoidal quadrature, which on the periodic grid is the plain
//! cell sum (2pi/N)^d * sum.

use crate::error::{CoreError, Result};

pub const TAU: f64 = 2.0 * std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TorusGrid {
    d: usize,
    n: usize,
}

impl TorusGrid {
    pub fn new(d: usize, n: usize) -> Result<Self> {
        if !(1..=3).contains(&d) {
            return Err(CoreError::InvalidGrid(format!("d must be 1, 2 or 3, got {d}")));
        }
        if n < 8 || !n.is_power_of_two() {
            return Err(CoreError::InvalidGrid(format!(
                "N must be a power of two >= 8, got {n}"
            )));
        }
        Ok(TorusGrid { d, n })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Points per dimension.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        TAU / self.n as f64
    }

    /// Quadrature weight of one cell, (2pi/N)^d.
    pub fn cell(&self) -> f64 {
        self.spacing().powi(self.d as i32)
    }

    pub fn volume(&self) -> f64 {
        TAU.powi(self.d as i32)
    }

    /// Coordinate of index k along one axis.
    pub fn coord(&self, k: usize) -> f64 {
        -std::f64::consts::PI + k as f64 * self.spacing()
    }

    /// Decompose a flat index into per-axis indices (x1 fastest).
    pub fn unindex(&self, mut i: usize, out: &mut [usize]) {
        for o in out.iter_mut().take(self.d) {
            *o = i % self.n;
            i /= self.n;
        }
    }

    pub fn index(&self, k: &[usize]) -> usize {
        let mut i = 0;
        for ax in (0..self.d).rev() {
            i = i * self.n + k[ax];
        }
        i
    }

    /// Position of a flat index, written into `out[..d]`.
    pub fn point(&self, i: usize, out: &mut [f64]) {
        let mut idx = [0usize; 3];
        self.unindex(i, &mut idx);
        for ax in 0..self.d {
            out[ax] = self.coord(idx[ax]);
        }
    }

    /// Shortest periodic distance between two points of the torus.
    pub fn periodic_distance(&self, a: &[f64], b: &[f64]) -> f64 {
        let mut s = 0.0;
        for ax in 0..self.d {
            let mut dx = (a[ax] - b[ax]).abs() % TAU;
            if dx > TAU / 2.0 {
                dx = TAU - dx;
            }
            s += dx * dx;
        }
        s.sqrt()
    }
}

#[derive(Debug, Clone)]
pub struct GridField {
    grid: TorusGrid,
    values: Vec<f64>,
}

impl GridField {
    pub fn zero(grid: TorusGrid) -> Self {
        GridField {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn from_values(grid: TorusGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(CoreError::GridMismatch(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(CoreError::NonFinite("grid field values".into()));
        }
        Ok(GridField { grid, values })
    }

    /// Sample a function of the point coordinates.
    pub fn from_fn(grid: TorusGrid, f: impl Fn(&[f64]) -> f64) -> Self {
        let mut x = [0.0f64; 3];
        let values = (0..grid.len())
            .map(|i| {
                grid.point(i, &mut x);
                f(&x[..grid.dim()])
            })
            .collect();
        GridField { grid, values }
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn integral(&self) -> f64 {
        self.grid.cell() * self.values.iter().sum::<f64>()
    }

    /// Average value over the torus.
    pub fn mean(&self) -> f64 {
        self.integral() / self.grid.volume()
    }

    pub fn linf(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// L^p norm by quadrature, p >= 1 finite.
    pub fn lp_norm(&self, p: f64) -> f64 {
        assert!(p >= 1.0 && p.is_finite());
        let s: f64 = self.values.iter().map(|v| v.abs().powf(p)).sum();
        (self.grid.cell() * s).powf(1.0 / p)
    }

    pub fn l2(&self) -> f64 {
        let s: f64 = self.values.iter().map(|v| v * v).sum();
        (self.grid.cell() * s).sqrt()
    }

    pub fn scale(&mut self, a: f64) {
        for v in &mut self.values {
            *v *= a;
        }
    }

    pub fn add_scaled(&mut self, other: &GridField, a: f64) {
        assert_eq!(self.grid, other.grid, "grid mismatch");
        for (v, o) in self.values.iter_mut().zip(&other.values) {
            *v += a * o;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Exact circular shift by whole cells: out(x) = f(x - shift*h).
    pub fn translate_cells(&self, shift: &[i64]) -> Result<GridField> {
        if shift.len() != self.grid.dim() {
            return Err(CoreError::GridMismatch(format!(
                "translate shift has {} components on a d={} grid",
                shift.len(),
                self.grid.dim()
            )));
        }
        let g = self.grid;
        let n = g.n() as i64;
        let mut idx = [0usize; 3];
        let mut out = vec![0.0; g.len()];
        for (i, o) in out.iter_mut().enumerate() {
            g.unindex(i, &mut idx);
            let mut j = 0usize;
            for ax in (0..g.dim()).rev() {
                let k = (idx[ax] as i64 - shift[ax]).rem_euclid(n) as usize;
                j = j * g.n() + k;
            }
            *o = self.values[j];
        }
        Ok(GridField { grid: g, values: out })
    }
}

/// L^2 pairing <f, g> = integral of f*g by quadrature.
pub fn pair(f: &GridField, g: &GridField) -> f64 {
    assert_eq!(f.grid(), g.grid(), "grid mismatch");
    let s: f64 = f
        .values()
        .iter()
        .zip(g.values())
        .map(|(a, b)| a * b)
        .sum();
    f.grid().cell() * s
}

/// Offset directions used by the measured Lipschitz/Hoelder constants:
/// axes and diagonals of the unit cell, i.e. nonzero vectors in {-1,0,1}^d
/// up to sign.
pub fn offset_directions(d: usize) -> Vec<Vec<i64>> {
    let mut dirs = Vec::new();
    let span: &[i64] = &[-1, 0, 1];
    let mut push_unique = |v: Vec<i64>| {
        if v.iter().all(|&c| c == 0) {
            return;
        }
        // canonical sign: first nonzero component positive
        let first = *v.iter().find(|&&c| c != 0).unwrap();
        let canon: Vec<i64> = if first < 0 { v.iter().map(|c| -c).collect() } else { v };
        if !dirs.contains(&canon) {
            dirs.push(canon);
        }
    };
    match d {
        1 => push_unique(vec![1]),
        2 => {
            for &a in span {
                for &b in span {
                    push_unique(vec![a, b]);
                }
            }
        }
        3 => {
            for &a in span {
                for &b in span {
                    for &c in span {
                        push_unique(vec![a, b, c]);
                    }
                }
            }
        }
        _ => unreachable!(),
    }
    dirs
}

/// All sampled offsets (in cells) for difference quotients: each direction
/// at dyadic lengths 1, 2, 4, ... while the Euclidean length stays <= pi.
pub fn dyadic_offsets(grid: TorusGrid) -> Vec<(Vec<i64>, f64)> {
    let h = grid.spacing();
    let mut out = Vec::new();
    for dir in offset_directions(grid.dim()) {
        let norm: f64 = dir.iter().map(|&c| (c * c) as f64).sum::<f64>().sqrt();
        let mut m = 1i64;
        while (m as f64) * norm * h <= std::f64::consts::PI * (1.0 + 1e-12) {
            let off: Vec<i64> = dir.iter().map(|&c| c * m).collect();
            out.push((off, m as f64 * norm * h));
            m *= 2;
        }
    }
    out
}

fn max_abs_difference(f: &GridField, off: &[i64]) -> f64 {
    let grid = f.grid();
    let n = grid.n() as i64;
    let vals = f.values();
    let mut idx = [0usize; 3];
    let mut best = 0.0f64;
    for i in 0..grid.len() {
        grid.unindex(i, &mut idx);
        let mut j = 0usize;
        for ax in (0..grid.dim()).rev() {
            let k = (idx[ax] as i64 + off[ax]).rem_euclid(n) as usize;
            j = j * grid.n() + k;
        }
        let d = (vals[j] - vals[i]).abs();
        if d > best {
            best = d;
        }
    }
    best
}

/// Measured grid Lipschitz constant: max over axis/diagonal offsets at
/// dyadic lengths up to |h| = pi of |f(x+h)-f(x)| / |h|.
pub fn lipschitz_constant(f: &GridField) -> f64 {
    let mut best = 0.0f64;
    for (off, len) in dyadic_offsets(f.grid()) {
        let q = max_abs_difference(f, &off) / len;
        if q > best {
            best = q;
        }
    }
    best
}

/// Measured Hoelder quotient at exponent beta over the same offset set.
pub fn holder_quotient(f: &GridField, beta: f64) -> f64 {
    assert!(beta > 0.0 && beta <= 1.0);
    let mut best = 0.0f64;
    for (off, len) in dyadic_offsets(f.grid()) {
        let q = max_abs_difference(f, &off) / len.powf(beta);
        if q > best {
            best = q;
        }
    }
    best
}

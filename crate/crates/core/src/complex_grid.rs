//! Sampled fields on a rectangle in the complex plane `z = u + iv`, with
//! the discrete calculus the rest of the crate is built on: Wirtinger
//! derivatives, real-part path integration, and the solid Cauchy transform.

use std::f64::consts::PI;
use std::io::{BufRead, Write};
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GridError {
    #[error("grid needs at least {min} samples per axis, got {nu}x{nv}")]
    TooSmall { nu: usize, nv: usize, min: usize },
    #[error("degenerate or non-finite rectangle [{u_min}, {u_max}] x [{v_min}, {v_max}]")]
    BadRectangle { u_min: f64, u_max: f64, v_min: f64, v_max: f64 },
    #[error("field has {got} samples, grid expects {expected}")]
    SizeMismatch { got: usize, expected: usize },
    #[error("fields live on different grids")]
    GridMismatch,
}

#[derive(Debug, Error)]
pub enum CsvError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("samples do not form a complete rectangular lattice: {0}")]
    NotALattice(String),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Uniform rectangular sampling of `[u_min,u_max] x [v_min,v_max]`.
/// Sample `(i, j)` sits at `u_min + i*du + i(v_min + j*dv)`, endpoints included.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DomainGrid {
    pub u_min: f64,
    pub u_max: f64,
    pub v_min: f64,
    pub v_max: f64,
    pub nu: usize,
    pub nv: usize,
}

/// Fewest samples per axis any derivative stencil here needs.
pub const MIN_SAMPLES: usize = 4;

impl DomainGrid {
    pub fn new(u_min: f64, u_max: f64, v_min: f64, v_max: f64, nu: usize, nv: usize) -> Result<Self, GridError> {
        if nu < MIN_SAMPLES || nv < MIN_SAMPLES {
            return Err(GridError::TooSmall { nu, nv, min: MIN_SAMPLES });
        }
        let ok = [u_min, u_max, v_min, v_max].iter().all(|x| x.is_finite()) && u_max > u_min && v_max > v_min;
        if !ok {
            return Err(GridError::BadRectangle { u_min, u_max, v_min, v_max });
        }
        Ok(DomainGrid { u_min, u_max, v_min, v_max, nu, nv })
    }

    /// Square grid `[-half, half]^2` with `n` samples per side.
    pub fn centered_square(half: f64, n: usize) -> Result<Self, GridError> {
        DomainGrid::new(-half, half, -half, half, n, n)
    }

    /// Same rectangle with `2n - 1` samples per axis; old samples are kept.
    pub fn refined(&self) -> Self {
        DomainGrid { nu: 2 * self.nu - 1, nv: 2 * self.nv - 1, ..*self }
    }

    pub fn du(&self) -> f64 {
        (self.u_max - self.u_min) / (self.nu - 1) as f64
    }

    pub fn dv(&self) -> f64 {
        (self.v_max - self.v_min) / (self.nv - 1) as f64
    }

    pub fn spacing(&self) -> f64 {
        self.du().max(self.dv())
    }

    pub fn len(&self) -> usize {
        self.nu * self.nv
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nu + i
    }

    #[inline]
    pub fn coords(&self, k: usize) -> (usize, usize) {
        (k % self.nu, k / self.nu)
    }

    pub fn point(&self, i: usize, j: usize) -> Complex64 {
        Complex64::new(self.u_min + i as f64 * self.du(), self.v_min + j as f64 * self.dv())
    }

    /// Grid index of the sample closest to `z` (clamped to the rectangle).
    pub fn nearest_index(&self, z: Complex64) -> (usize, usize) {
        let fi = ((z.re - self.u_min) / self.du()).round();
        let fj = ((z.im - self.v_min) / self.dv()).round();
        let i = fi.clamp(0.0, (self.nu - 1) as f64) as usize;
        let j = fj.clamp(0.0, (self.nv - 1) as f64) as usize;
        (i, j)
    }

    pub fn is_interior(&self, i: usize, j: usize) -> bool {
        i > 0 && j > 0 && i + 1 < self.nu && j + 1 < self.nv
    }

    pub fn interior_mask(&self) -> Field<bool> {
        Field::from_fn(*self, |i, j, _| self.is_interior(i, j))
    }
}

/// Samples of a function on a [`DomainGrid`], row-major in `v`.
#[derive(Clone, Debug, PartialEq)]
pub struct Field<T> {
    grid: DomainGrid,
    samples: Vec<T>,
}

pub type ComplexField = Field<Complex64>;
pub type RealField = Field<f64>;
pub type Mask = Field<bool>;

impl<T: Copy + Send + Sync> Field<T> {
    pub fn new(grid: DomainGrid, samples: Vec<T>) -> Result<Self, GridError> {
        if samples.len() != grid.len() {
            return Err(GridError::SizeMismatch { got: samples.len(), expected: grid.len() });
        }
        Ok(Field { grid, samples })
    }

    pub fn constant(grid: DomainGrid, value: T) -> Self {
        Field { grid, samples: vec![value; grid.len()] }
    }

    /// Builds a field from `f(i, j, z)`.
    pub fn from_fn(grid: DomainGrid, f: impl Fn(usize, usize, Complex64) -> T + Sync) -> Self {
        let samples = (0..grid.len())
            .into_par_iter()
            .map(|k| {
                let (i, j) = grid.coords(k);
                f(i, j, grid.point(i, j))
            })
            .collect();
        Field { grid, samples }
    }

    pub fn grid(&self) -> &DomainGrid {
        &self.grid
    }

    pub fn samples(&self) -> &[T] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [T] {
        &mut self.samples
    }

    pub fn into_samples(self) -> Vec<T> {
        self.samples
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.samples[self.grid.index(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: T) {
        let k = self.grid.index(i, j);
        self.samples[k] = value;
    }

    pub fn map<U: Copy + Send + Sync>(&self, f: impl Fn(T) -> U + Sync) -> Field<U> {
        Field { grid: self.grid, samples: self.samples.par_iter().map(|&x| f(x)).collect() }
    }

    pub fn zip_with<U: Copy + Send + Sync, V: Copy + Send + Sync>(
        &self,
        other: &Field<U>,
        f: impl Fn(T, U) -> V + Sync,
    ) -> Field<V> {
        assert_eq!(self.grid, other.grid, "zip_with on mismatched grids");
        let samples = self.samples.par_iter().zip(other.samples.par_iter()).map(|(&a, &b)| f(a, b)).collect();
        Field { grid: self.grid, samples }
    }
}

impl Mask {
    pub fn and(&self, other: &Mask) -> Mask {
        self.zip_with(other, |a, b| a && b)
    }

    pub fn count(&self) -> usize {
        self.samples.iter().filter(|&&b| b).count()
    }

    pub fn all_set(grid: DomainGrid) -> Mask {
        Field::constant(grid, true)
    }
}

impl ComplexField {
    pub fn re(&self) -> RealField {
        self.map(|c| c.re)
    }

    pub fn im(&self) -> RealField {
        self.map(|c| c.im)
    }

    pub fn abs(&self) -> RealField {
        self.map(|c| c.norm())
    }

    pub fn conj(&self) -> ComplexField {
        self.map(|c| c.conj())
    }

    pub fn sup_norm(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, c| m.max(c.norm()))
    }

    pub fn to_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "u,v,re,im")?;
        for k in 0..self.grid.len() {
            let (i, j) = self.grid.coords(k);
            let z = self.grid.point(i, j);
            let c = self.samples[k];
            writeln!(out, "{:.16e},{:.16e},{:.16e},{:.16e}", z.re, z.im, c.re, c.im)?;
        }
        Ok(())
    }

    /// Reads the `u,v,re,im` format written by [`ComplexField::to_csv`].
    /// Rows may come in any order but must cover a full uniform lattice.
    pub fn from_csv<R: BufRead>(input: R) -> Result<ComplexField, CsvError> {
        let mut rows: Vec<[f64; 4]> = Vec::new();
        let mut saw_header = false;
        for (n, line) in input.lines().enumerate() {
            let line = line?;
            let lineno = n + 1;
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            if !saw_header {
                let cols: Vec<&str> = t.split(',').map(|s| s.trim()).collect();
                if cols != ["u", "v", "re", "im"] {
                    return Err(CsvError::Parse { line: lineno, message: "expected header `u,v,re,im`".into() });
                }
                saw_header = true;
                continue;
            }
            let mut vals = [0.0; 4];
            let mut parts = t.split(',');
            for (c, slot) in vals.iter_mut().enumerate() {
                let p = parts
                    .next()
                    .ok_or_else(|| CsvError::Parse { line: lineno, message: format!("missing column {}", c + 1) })?;
                *slot = p.trim().parse::<f64>().map_err(|e| CsvError::Parse {
                    line: lineno,
                    message: format!("column {}: {e}", c + 1),
                })?;
                if !slot.is_finite() {
                    return Err(CsvError::Parse { line: lineno, message: format!("column {} is not finite", c + 1) });
                }
            }
            if parts.next().is_some() {
                return Err(CsvError::Parse { line: lineno, message: "too many columns".into() });
            }
            rows.push(vals);
        }
        if !saw_header {
            return Err(CsvError::Parse { line: 1, message: "empty input".into() });
        }
        lattice_from_rows(&rows)
    }
}

fn distinct_sorted(mut xs: Vec<f64>) -> Vec<f64> {
    xs.sort_by(|a, b| a.total_cmp(b));
    xs.dedup();
    xs
}

fn lattice_from_rows(rows: &[[f64; 4]]) -> Result<ComplexField, CsvError> {
    let us = distinct_sorted(rows.iter().map(|r| r[0]).collect());
    let vs = distinct_sorted(rows.iter().map(|r| r[1]).collect());
    let (nu, nv) = (us.len(), vs.len());
    if nu < MIN_SAMPLES || nv < MIN_SAMPLES {
        return Err(GridError::TooSmall { nu, nv, min: MIN_SAMPLES }.into());
    }
    if rows.len() != nu * nv {
        return Err(CsvError::NotALattice(format!("{} rows for {nu}x{nv} distinct coordinates", rows.len())));
    }
    let grid = DomainGrid::new(us[0], us[nu - 1], vs[0], vs[nv - 1], nu, nv)?;
    let uniform = |xs: &[f64], step: f64, lo: f64| {
        xs.iter().enumerate().all(|(k, &x)| (x - (lo + k as f64 * step)).abs() <= 1e-9 * (1.0 + x.abs()))
    };
    if !uniform(&us, grid.du(), grid.u_min) || !uniform(&vs, grid.dv(), grid.v_min) {
        return Err(CsvError::NotALattice("coordinates are not uniformly spaced".into()));
    }
    let mut samples = vec![Complex64::new(f64::NAN, f64::NAN); grid.len()];
    let mut seen = vec![false; grid.len()];
    for r in rows {
        let i = us.binary_search_by(|x| x.total_cmp(&r[0])).map_err(|_| CsvError::NotALattice("u lookup".into()))?;
        let j = vs.binary_search_by(|x| x.total_cmp(&r[1])).map_err(|_| CsvError::NotALattice("v lookup".into()))?;
        let k = grid.index(i, j);
        if seen[k] {
            return Err(CsvError::NotALattice(format!("duplicate sample at ({}, {})", r[0], r[1])));
        }
        seen[k] = true;
        samples[k] = Complex64::new(r[2], r[3]);
    }
    Ok(Field::new(grid, samples)?)
}

/// Which Wirtinger derivative to take.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Wirtinger {
    /// `d/dz = (d/du - i d/dv) / 2`
    Dz,
    /// `d/dzbar = (d/du + i d/dv) / 2`
    DzBar,
}

/// Second-order first derivative along one axis: central inside, one-sided at
/// the ends. `at(k)` reads sample `k` along the axis.
#[inline]
fn first_diff<T>(at: impl Fn(usize) -> T, k: usize, n: usize, h: f64) -> T
where
    T: std::ops::Sub<Output = T> + std::ops::Mul<f64, Output = T> + std::ops::Add<Output = T>,
{
    if k == 0 {
        (at(1) * 4.0 - at(0) * 3.0 - at(2)) * (0.5 / h)
    } else if k == n - 1 {
        (at(n - 1) * 3.0 - at(n - 2) * 4.0 + at(n - 3)) * (0.5 / h)
    } else {
        (at(k + 1) - at(k - 1)) * (0.5 / h)
    }
}

#[inline]
fn second_diff<T>(at: impl Fn(usize) -> T, k: usize, n: usize, h: f64) -> T
where
    T: std::ops::Sub<Output = T> + std::ops::Mul<f64, Output = T> + std::ops::Add<Output = T>,
{
    let s = 1.0 / (h * h);
    if k == 0 {
        (at(0) * 2.0 - at(1) * 5.0 + at(2) * 4.0 - at(3)) * s
    } else if k == n - 1 {
        (at(n - 1) * 2.0 - at(n - 2) * 5.0 + at(n - 3) * 4.0 - at(n - 4)) * s
    } else {
        (at(k + 1) - at(k) * 2.0 + at(k - 1)) * s
    }
}

/// Partial derivatives of a sampled field.
pub trait GridCalculus: Sized {
    fn d_u(&self) -> Self;
    fn d_v(&self) -> Self;
    fn d_uu(&self) -> Self;
    fn d_vv(&self) -> Self;
    fn d_uv(&self) -> Self;
}

macro_rules! impl_calculus {
    ($t:ty) => {
        impl GridCalculus for Field<$t> {
            fn d_u(&self) -> Self {
                let g = self.grid;
                Field::from_fn(g, |i, j, _| first_diff(|k| self.get(k, j), i, g.nu, g.du()))
            }
            fn d_v(&self) -> Self {
                let g = self.grid;
                Field::from_fn(g, |i, j, _| first_diff(|k| self.get(i, k), j, g.nv, g.dv()))
            }
            fn d_uu(&self) -> Self {
                let g = self.grid;
                Field::from_fn(g, |i, j, _| second_diff(|k| self.get(k, j), i, g.nu, g.du()))
            }
            fn d_vv(&self) -> Self {
                let g = self.grid;
                Field::from_fn(g, |i, j, _| second_diff(|k| self.get(i, k), j, g.nv, g.dv()))
            }
            fn d_uv(&self) -> Self {
                self.d_u().d_v()
            }
        }
    };
}

impl_calculus!(f64);
impl_calculus!(Complex64);

/// Wirtinger derivative by second-order finite differences.
pub fn wirtinger(field: &ComplexField, which: Wirtinger) -> ComplexField {
    let du = field.d_u();
    let dv = field.d_v();
    let i = Complex64::i();
    match which {
        Wirtinger::Dz => du.zip_with(&dv, |a, b| 0.5 * (a - i * b)),
        Wirtinger::DzBar => du.zip_with(&dv, |a, b| 0.5 * (a + i * b)),
    }
}

/// `d^2/(dz dzbar) = (d_uu + d_vv) / 4`, with the 5-point stencil.
pub fn mixed_wirtinger(field: &ComplexField) -> ComplexField {
    field.d_uu().zip_with(&field.d_vv(), |a, b| 0.25 * (a + b))
}

pub fn to_complex(field: &RealField) -> ComplexField {
    field.map(|x| Complex64::new(x, 0.0))
}

/// Output of [`potential_from_form`].
#[derive(Clone, Debug)]
pub struct Potential {
    pub values: RealField,
    /// Largest absolute circulation of `2 Re(omega dz)` around a grid cell.
    pub loop_residual: f64,
}

/// Real potential `F(z) = 2 Re int_{z0}^{z} omega dz`.
///
/// Integration is trapezoidal along the basepoint row first, then up or down
/// each column. `F` vanishes at the basepoint.
pub fn potential_from_form(omega: &ComplexField, basepoint: (usize, usize)) -> Potential {
    potential_with_order(omega, basepoint, PathOrder::RowsFirst)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PathOrder {
    RowsFirst,
    ColumnsFirst,
}

pub fn potential_with_order(omega: &ComplexField, basepoint: (usize, usize), order: PathOrder) -> Potential {
    let g = *omega.grid();
    let (bi, bj) = basepoint;
    assert!(bi < g.nu && bj < g.nv, "basepoint outside grid");
    // 2Re(omega dz): du-leg integrand 2Re(omega), dv-leg integrand -2Im(omega).
    let hu = g.du();
    let hv = g.dv();
    let u_step = |i0: usize, i1: usize, j: usize| (omega.get(i0, j).re + omega.get(i1, j).re) * hu;
    let v_step = |i: usize, j0: usize, j1: usize| -(omega.get(i, j0).im + omega.get(i, j1).im) * hv;

    let mut f = vec![0.0; g.len()];
    match order {
        PathOrder::RowsFirst => {
            walk_line(g.nu, bi, |a, b| u_step(a, b, bj), |k, val| f[g.index(k, bj)] = val);
            for i in 0..g.nu {
                let start = f[g.index(i, bj)];
                let mut col = vec![0.0; g.nv];
                walk_line(g.nv, bj, |a, b| v_step(i, a, b), |k, val| col[k] = val);
                for (j, c) in col.into_iter().enumerate() {
                    f[g.index(i, j)] = start + c;
                }
            }
        }
        PathOrder::ColumnsFirst => {
            let mut col = vec![0.0; g.nv];
            walk_line(g.nv, bj, |a, b| v_step(bi, a, b), |k, val| col[k] = val);
            for (j, start) in col.into_iter().enumerate() {
                let mut row = vec![0.0; g.nu];
                walk_line(g.nu, bi, |a, b| u_step(a, b, j), |k, val| row[k] = val);
                for (i, r) in row.into_iter().enumerate() {
                    f[g.index(i, j)] = start + r;
                }
            }
        }
    }

    let loop_residual = (0..g.nv - 1)
        .flat_map(|j| (0..g.nu - 1).map(move |i| (i, j)))
        .map(|(i, j)| {
            let circ = u_step(i, i + 1, j) + v_step(i + 1, j, j + 1) - u_step(i, i + 1, j + 1) - v_step(i, j, j + 1);
            circ.abs()
        })
        .fold(0.0, f64::max);

    Potential { values: Field { grid: g, samples: f }, loop_residual }
}

/// Cumulative trapezoid from `start` outward in both directions along a line
/// of `n` samples. `step(a, b)` is the integral between neighbours `a < b`.
fn walk_line(n: usize, start: usize, step: impl Fn(usize, usize) -> f64, mut put: impl FnMut(usize, f64)) {
    put(start, 0.0);
    let mut acc = 0.0;
    for k in start + 1..n {
        acc += step(k - 1, k);
        put(k, acc);
    }
    acc = 0.0;
    for k in (0..start).rev() {
        acc -= step(k, k + 1);
        put(k, acc);
    }
}

// Antiderivatives F with d^2F/dxdy equal to the named integrand. Each is
// continuous with a continuous y-partial, which is all the corner formula needs.
fn prim_x_over_r2(x: f64, y: f64) -> f64 {
    // x / (x^2 + y^2)
    let r2 = x * x + y * y;
    let log_term = if r2 > 0.0 { 0.5 * y * r2.ln() } else { 0.0 };
    let atan_term = if x != 0.0 { x * (y / x).atan() } else { 0.0 };
    log_term - y + atan_term
}

fn prim_diff_over_r2(x: f64, y: f64) -> f64 {
    // (x^2 - y^2) / (x^2 + y^2)
    let a = if x != 0.0 { x * x * (y / x).atan() } else { 0.0 };
    let b = if y != 0.0 { y * y * (x / y).atan() } else { 0.0 };
    a - b
}

fn prim_xy_over_r2(x: f64, y: f64) -> f64 {
    // x y / (x^2 + y^2)
    let r2 = x * x + y * y;
    let l = if r2 > 0.0 { r2 * r2.ln() } else { 0.0 };
    0.25 * (l - y * y)
}

fn rect_integral(f: impl Fn(f64, f64) -> f64, x1: f64, x2: f64, y1: f64, y2: f64) -> f64 {
    (f(x2, y2) - f(x1, y2)) - (f(x2, y1) - f(x1, y1))
}

fn prim_xy2_over_r2(x: f64, y: f64) -> f64 {
    // x y^2 / (x^2 + y^2)
    let r2 = x * x + y * y;
    let l = if r2 > 0.0 { y * y * y * r2.ln() / 6.0 } else { 0.0 };
    let atan_term = if x != 0.0 { x * x * x * (y / x).atan() / 3.0 } else { 0.0 };
    x * x * y / 3.0 - atan_term + l
}

fn prim_cubic_over_r2(x: f64, y: f64) -> f64 {
    // (x^3 - 3 x y^2) / (x^2 + y^2) = x - 4 x y^2 / (x^2 + y^2)
    0.5 * x * x * y - 4.0 * prim_xy2_over_r2(x, y)
}

/// `(int dA / w, int conj(w)/w dA, int conj(w)^2/w dA)` over
/// `[x1,x2] x [y1,y2]`, `w = x + iy`.
pub(crate) fn cell_kernel_moments(x1: f64, x2: f64, y1: f64, y2: f64) -> [Complex64; 3] {
    let re0 = rect_integral(prim_x_over_r2, x1, x2, y1, y2);
    // y/(x^2+y^2) is the x/(x^2+y^2) primitive with the axes swapped
    let im0 = -rect_integral(|x, y| prim_x_over_r2(y, x), x1, x2, y1, y2);
    let re1 = rect_integral(prim_diff_over_r2, x1, x2, y1, y2);
    let im1 = -2.0 * rect_integral(prim_xy_over_r2, x1, x2, y1, y2);
    // conj(w)^3 / |w|^2: real part (x^3 - 3xy^2)/r^2, imaginary part the same
    // with the axes swapped
    let re2 = rect_integral(prim_cubic_over_r2, x1, x2, y1, y2);
    let im2 = rect_integral(|x, y| prim_cubic_over_r2(y, x), x1, x2, y1, y2);
    [Complex64::new(re0, im0), Complex64::new(re1, im1), Complex64::new(re2, im2)]
}

/// Integral of `conj(w)/w` over the rectangle `[-a,a] x [-b,b]`.
pub(crate) fn centered_cell_moment(a: f64, b: f64) -> f64 {
    // int int (x^2 - y^2)/(x^2 + y^2) = 4ab - 8 int_0^b y atan(a/y) dy
    let inner = 0.5 * b * b * (a / b).atan() + 0.5 * a * (b - a * (b / a).atan());
    4.0 * a * b - 8.0 * inner
}

/// Offset-indexed weights of the discrete Cauchy transform on one grid, one
/// table per term of the cell model
/// `h0 + a s + b conj(s) + A s^2/2 + B |s|^2 + C conj(s)^2/2`, `s = zeta - c`.
struct CauchyTables {
    width: usize,
    height: usize,
    terms: [Vec<Complex64>; 6],
}

impl CauchyTables {
    fn new(g: &DomainGrid) -> Self {
        let (hu, hv) = (g.du(), g.dv());
        let area = Complex64::new(hu * hv, 0.0);
        let width = 2 * g.nu - 1;
        let height = 2 * g.nv - 1;
        let n = width * height;
        let entries: Vec<[Complex64; 6]> = (0..n)
            .into_par_iter()
            .map(|idx| {
                let a = (idx % width) as f64 - (g.nu - 1) as f64;
                let b = (idx / width) as f64 - (g.nv - 1) as f64;
                // cell centre relative to the evaluation point
                let wc = Complex64::new(a * hu, b * hv);
                let [j0, j1, j2] = if a == 0.0 && b == 0.0 {
                    let zero = Complex64::new(0.0, 0.0);
                    [zero, Complex64::new(centered_cell_moment(0.5 * hu, 0.5 * hv), 0.0), zero]
                } else {
                    cell_kernel_moments(wc.re - 0.5 * hu, wc.re + 0.5 * hu, wc.im - 0.5 * hv, wc.im + 0.5 * hv)
                };
                let wb = wc.conj();
                let s = -1.0 / PI;
                [
                    j0 * s,
                    (area - wc * j0) * s,
                    (j1 - wb * j0) * s,
                    0.5 * (wc * wc * j0 - wc * area) * s,
                    (wc.norm_sqr() * j0 - wc * j1) * s,
                    0.5 * (j2 - 2.0 * wb * j1 + wb * wb * j0) * s,
                ]
            })
            .collect();
        let mut terms: [Vec<Complex64>; 6] = Default::default();
        for e in entries {
            for (t, v) in terms.iter_mut().zip(e) {
                t.push(v);
            }
        }
        CauchyTables { width, height, terms }
    }
}

/// Smooth outward extension of a field by `pad` samples per side:
/// quadratic extrapolation from the three nearest samples, rolled off to zero
/// with a taper that is flat to all orders at both ends. Rows are extended
/// first, then columns.
pub(crate) fn smooth_extension(h: &ComplexField, pad: usize) -> ComplexField {
    let g = *h.grid();
    let big = DomainGrid {
        u_min: g.u_min - pad as f64 * g.du(),
        u_max: g.u_max + pad as f64 * g.du(),
        v_min: g.v_min - pad as f64 * g.dv(),
        v_max: g.v_max + pad as f64 * g.dv(),
        nu: g.nu + 2 * pad,
        nv: g.nv + 2 * pad,
    };
    // 1 - s(t) with s the C-infinity step, flat to all orders at both ends
    let taper = |k: usize| {
        let t = k as f64 / (pad + 1) as f64;
        if t <= 0.0 {
            return 1.0;
        }
        if t >= 1.0 {
            return 0.0;
        }
        let a = (-1.0 / t).exp();
        let b = (-1.0 / (1.0 - t)).exp();
        b / (a + b)
    };
    // f(-k) from the quadratic through f(0), f(1), f(2)
    let extrapolate = |f0: Complex64, f1: Complex64, f2: Complex64, k: usize| {
        let x = -(k as f64);
        let l0 = 0.5 * (x - 1.0) * (x - 2.0);
        let l1 = -x * (x - 2.0);
        let l2 = 0.5 * x * (x - 1.0);
        (f0 * l0 + f1 * l1 + f2 * l2) * taper(k)
    };
    let extend_line = |line: &[Complex64]| -> Vec<Complex64> {
        let n = line.len();
        let mut out = vec![Complex64::new(0.0, 0.0); n + 2 * pad];
        out[pad..pad + n].copy_from_slice(line);
        for k in 1..=pad {
            out[pad - k] = extrapolate(line[0], line[1], line[2], k);
            out[pad + n - 1 + k] = extrapolate(line[n - 1], line[n - 2], line[n - 3], k);
        }
        out
    };
    let rows: Vec<Vec<Complex64>> =
        (0..g.nv).map(|j| extend_line(&h.samples()[j * g.nu..(j + 1) * g.nu])).collect();
    let mut samples = vec![Complex64::new(0.0, 0.0); big.len()];
    for i in 0..big.nu {
        let col: Vec<Complex64> = rows.iter().map(|r| r[i]).collect();
        for (j, v) in extend_line(&col).into_iter().enumerate() {
            samples[big.index(i, j)] = v;
        }
    }
    Field { grid: big, samples }
}

/// In-place unnormalised 2D FFT of a row-major `lu x lv` array.
fn fft2(data: &mut [Complex64], lu: usize, lv: usize, plans: &(Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>)) {
    data.par_chunks_mut(lu).for_each(|row| plans.0.process(row));
    let mut cols = vec![Complex64::new(0.0, 0.0); lu * lv];
    for j in 0..lv {
        for i in 0..lu {
            cols[i * lv + j] = data[j * lu + i];
        }
    }
    cols.par_chunks_mut(lv).for_each(|col| plans.1.process(col));
    for i in 0..lu {
        for j in 0..lv {
            data[j * lu + i] = cols[i * lv + j];
        }
    }
}

/// Solid Cauchy transform `(Th)(z) = (1/pi) int h(zeta) / (z - zeta) dA(zeta)`,
/// so that `d(Th)/dzbar = h` on the grid.
///
/// The density is first continued smoothly a few cells past the rectangle
/// ([`smooth_extension`]); a sharp cut-off at the edge would put corner and
/// edge singularities into the derivatives of `Th`. Each sample then owns the
/// `du x dv` cell centred on it, `h` is replaced on that cell by its
/// second-order Taylor model, and the kernel is integrated against the model
/// exactly on every cell, the singular one included.
pub fn cauchy_transform(h: &ComplexField) -> ComplexField {
    let g = *h.grid();
    let pad = g.nu.max(g.nv).max(16);
    let ext = smooth_extension(h, pad);
    let big = *ext.grid();
    let tables = CauchyTables::new(&big);
    let (huu, hvv, huv) = (ext.d_uu(), ext.d_vv(), ext.d_uv());
    let i = Complex64::i();
    let model: [Vec<Complex64>; 6] = [
        ext.samples().to_vec(),
        wirtinger(&ext, Wirtinger::Dz).into_samples(),
        wirtinger(&ext, Wirtinger::DzBar).into_samples(),
        (0..big.len()).map(|k| 0.25 * (huu.samples()[k] - hvv.samples()[k] - 2.0 * i * huv.samples()[k])).collect(),
        (0..big.len()).map(|k| 0.25 * (huu.samples()[k] + hvv.samples()[k])).collect(),
        (0..big.len()).map(|k| 0.25 * (huu.samples()[k] - hvv.samples()[k] + 2.0 * i * huv.samples()[k])).collect(),
    ];
    let (nu, nv) = (big.nu, big.nv);
    // out(i, j) = sum_t sum_(ii, jj) T_t(ii - i, jj - j) m_t(ii, jj), a sum of
    // correlations evaluated as one zero-padded circular convolution
    let lu = (2 * nu - 1).next_power_of_two();
    let lv = (2 * nv - 1).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = (planner.plan_fft_forward(lu), planner.plan_fft_forward(lv));
    let inv = (planner.plan_fft_inverse(lu), planner.plan_fft_inverse(lv));
    let zero = Complex64::new(0.0, 0.0);
    let mut acc = vec![zero; lu * lv];
    for (t, m) in tables.terms.iter().zip(model.iter()) {
        let mut kern = vec![zero; lu * lv];
        for b in 0..tables.height {
            // reflected offsets: kern(a, b) = T(-a, -b), indices taken mod L
            let rb = (lv + nv - 1 - b) % lv;
            for a in 0..tables.width {
                let ra = (lu + nu - 1 - a) % lu;
                kern[rb * lu + ra] = t[b * tables.width + a];
            }
        }
        let mut dens = vec![zero; lu * lv];
        for jj in 0..nv {
            dens[jj * lu..jj * lu + nu].copy_from_slice(&m[jj * nu..(jj + 1) * nu]);
        }
        fft2(&mut kern, lu, lv, &fwd);
        fft2(&mut dens, lu, lv, &fwd);
        for ((a, k), d) in acc.iter_mut().zip(&kern).zip(&dens) {
            *a += k * d;
        }
    }
    fft2(&mut acc, lu, lv, &inv);
    let scale = 1.0 / (lu * lv) as f64;
    let out: Vec<Complex64> = (0..g.len())
        .map(|k| {
            let (gi, gj) = g.coords(k);
            acc[(gj + pad) * lu + gi + pad] * scale
        })
        .collect();
    Field { grid: g, samples: out }
}

/// Reductions over masked samples. Sums use Neumaier compensation in index
/// order so reported norms do not depend on evaluation order.
#[derive(Clone, Copy, Debug, Default, PartialEq, serde::Serialize)]
pub struct NormStats {
    pub sup: f64,
    pub l2_mean: f64,
    pub count: usize,
}

pub fn neumaier_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for x in values {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

impl NormStats {
    pub fn of_magnitudes(mags: &[f64], mask: &Mask) -> NormStats {
        let picked: Vec<f64> = mags.iter().zip(mask.samples()).filter(|(_, &m)| m).map(|(&x, _)| x).collect();
        let count = picked.len();
        if count == 0 {
            return NormStats::default();
        }
        let sup = picked.iter().fold(0.0f64, |m, &x| if x.is_nan() { f64::NAN } else { m.max(x) });
        let l2 = (neumaier_sum(picked.iter().map(|x| x * x)) / count as f64).sqrt();
        NormStats { sup, l2_mean: l2, count }
    }

    pub fn complex(field: &ComplexField, mask: &Mask) -> NormStats {
        let mags: Vec<f64> = field.samples().iter().map(|c| c.norm()).collect();
        NormStats::of_magnitudes(&mags, mask)
    }

    pub fn real(field: &RealField, mask: &Mask) -> NormStats {
        let mags: Vec<f64> = field.samples().iter().map(|x| x.abs()).collect();
        NormStats::of_magnitudes(&mags, mask)
    }

    pub fn max_of(stats: &[NormStats]) -> NormStats {
        let count = stats.iter().map(|s| s.count).max().unwrap_or(0);
        let sup = stats.iter().fold(0.0f64, |m, s| m.max(s.sup));
        let l2 = stats.iter().fold(0.0f64, |m, s| m.max(s.l2_mean));
        NormStats { sup, l2_mean: l2, count }
    }
}

/// Observed convergence order from errors on grids with spacing ratio 2.
pub fn observed_order(coarse: f64, fine: f64) -> f64 {
    (coarse / fine).log2()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn grid(n: usize) -> DomainGrid {
        DomainGrid::centered_square(1.0, n).unwrap()
    }

    fn interior_sup(f: &ComplexField) -> f64 {
        NormStats::complex(f, &f.grid().interior_mask()).sup
    }

    fn all_sup(f: &ComplexField) -> f64 {
        NormStats::complex(f, &Mask::all_set(*f.grid())).sup
    }

    #[test]
    fn grid_validation() {
        assert!(matches!(DomainGrid::new(0.0, 1.0, 0.0, 1.0, 2, 9), Err(GridError::TooSmall { .. })));
        assert!(matches!(DomainGrid::new(1.0, 1.0, 0.0, 1.0, 9, 9), Err(GridError::BadRectangle { .. })));
        assert!(matches!(DomainGrid::new(0.0, f64::NAN, 0.0, 1.0, 9, 9), Err(GridError::BadRectangle { .. })));
        let g = grid(9);
        assert_eq!(g.point(4, 4), c(0.0, 0.0));
        assert_eq!(g.nearest_index(c(0.01, -0.02)), (4, 4));
        assert_eq!(g.nearest_index(c(50.0, -50.0)), (8, 0));
        assert!(Field::new(g, vec![0.0; 3]).is_err());
    }

    #[test]
    fn wirtinger_examples() {
        let g = grid(17);
        let z = ComplexField::from_fn(g, |_, _, z| z);
        assert!(all_sup(&wirtinger(&z, Wirtinger::DzBar)) < 1e-12);
        let zb = z.conj();
        let d = wirtinger(&zb, Wirtinger::DzBar);
        assert!(all_sup(&d.map(|x| x - 1.0)) < 1e-12);
        // |z|^2 -> d/dz = conj(z); quadratics are differentiated exactly
        let r2 = ComplexField::from_fn(g, |_, _, z| c(z.norm_sqr(), 0.0));
        let d = wirtinger(&r2, Wirtinger::Dz);
        assert!(all_sup(&d.zip_with(&zb, |a, b| a - b)) < 1e-12);
    }

    #[test]
    fn wirtinger_second_order() {
        let err = |n: usize| {
            let g = grid(n);
            let f = ComplexField::from_fn(g, |_, _, z| (z * 0.7).exp() * z.conj());
            let exact = ComplexField::from_fn(g, |_, _, z| (z * 0.7).exp());
            all_sup(&wirtinger(&f, Wirtinger::DzBar).zip_with(&exact, |a, b| a - b))
        };
        let order = observed_order(err(17), err(33));
        assert!(order > 1.8, "order {order}");
    }

    #[test]
    fn mixed_derivative() {
        let g = grid(17);
        let f = ComplexField::from_fn(g, |_, _, z| c(z.norm_sqr() * z.re, 0.0));
        // d_z d_zbar (u^3 + u v^2) = (6u + 2u)/4 = 2u
        let m = mixed_wirtinger(&f);
        let exact = ComplexField::from_fn(g, |_, _, z| c(2.0 * z.re, 0.0));
        assert!(all_sup(&m.zip_with(&exact, |a, b| a - b)) < 1e-10);
    }

    #[test]
    fn potential_examples() {
        let g = grid(17);
        let base = g.nearest_index(c(0.0, 0.0));
        let p = potential_from_form(&ComplexField::constant(g, c(0.5, 0.0)), base);
        let u = RealField::from_fn(g, |_, _, z| z.re);
        assert!(p.values.zip_with(&u, |a, b| (a - b).abs()).samples().iter().all(|&d| d < 1e-14));
        assert!(p.loop_residual < 1e-15);

        let p = potential_from_form(&ComplexField::constant(g, c(0.0, 0.5)), base);
        let v = RealField::from_fn(g, |_, _, z| -z.im);
        assert!(p.values.zip_with(&v, |a, b| (a - b).abs()).samples().iter().all(|&d| d < 1e-14));

        // omega = i conj(z): d(2Re(omega dz)) = -4 du dv, circulation 4 * cell area
        let w = ComplexField::from_fn(g, |_, _, z| c(0.0, 1.0) * z.conj());
        let p = potential_from_form(&w, base);
        let cell = g.du() * g.dv();
        assert!((p.loop_residual - 4.0 * cell).abs() < 1e-12, "{}", p.loop_residual);
    }

    #[test]
    fn potential_basepoint_shift_is_constant() {
        let g = DomainGrid::new(-0.5, 0.7, -0.4, 0.6, 21, 17).unwrap();
        let w = ComplexField::from_fn(g, |_, _, z| (z * 1.3).exp() + z * z);
        let a = potential_from_form(&w, (3, 2));
        let b = potential_from_form(&w, (15, 11));
        let shift = a.values.get(15, 11);
        let dev = a.values.zip_with(&b.values, |x, y| (x - shift - y).abs());
        let bound = 1e-10f64.max(a.loop_residual * (g.len() as f64));
        assert!(dev.samples().iter().all(|&d| d <= bound), "basepoint shift deviates");
        let cols = potential_with_order(&w, (3, 2), PathOrder::ColumnsFirst);
        let diff = a.values.zip_with(&cols.values, |x, y| (x - y).abs());
        assert!(diff.samples().iter().all(|&d| d <= bound));
    }

    #[test]
    fn cell_moment_matches_quadrature() {
        for &(a, b) in &[(0.5, 0.5), (0.3, 0.7), (1.0, 0.2)] {
            let n = 2000;
            let mut s = 0.0;
            for p in 0..n {
                for q in 0..n {
                    let x = -a + (p as f64 + 0.5) * 2.0 * a / n as f64;
                    let y = -b + (q as f64 + 0.5) * 2.0 * b / n as f64;
                    s += (x * x - y * y) / (x * x + y * y);
                }
            }
            s *= 4.0 * a * b / (n * n) as f64;
            assert!((s - centered_cell_moment(a, b)).abs() < 1e-5, "({a},{b}) {s}");
        }
        assert!(centered_cell_moment(0.25, 0.25).abs() < 1e-15);
    }

    fn brute_moments(x1: f64, x2: f64, y1: f64, y2: f64) -> [Complex64; 3] {
        let n = 1500;
        let (hx, hy) = ((x2 - x1) / n as f64, (y2 - y1) / n as f64);
        let mut m = [c(0.0, 0.0); 3];
        for p in 0..n {
            for q in 0..n {
                let w = c(x1 + (p as f64 + 0.5) * hx, y1 + (q as f64 + 0.5) * hy);
                m[0] += w.inv();
                m[1] += w.conj() / w;
                m[2] += w.conj() * w.conj() / w;
            }
        }
        m.map(|x| x * hx * hy)
    }

    #[test]
    fn kernel_moments_match_quadrature() {
        for &(x1, x2, y1, y2) in &[(0.5, 0.8, 0.1, 0.3), (-0.8, -0.2, 0.4, 0.9), (-0.3, 0.2, 0.25, 0.6), (0.1, 0.4, -0.5, 0.3), (-0.2, 0.4, -0.7, -0.1)] {
            let j = cell_kernel_moments(x1, x2, y1, y2);
            let b = brute_moments(x1, x2, y1, y2);
            for k in 0..3 {
                assert!((j[k] - b[k]).norm() < 1e-5, "{k}: {} vs {}", j[k], b[k]);
            }
        }
    }

    #[test]
    fn cauchy_transform_examples() {
        let g = grid(33);
        let zero = cauchy_transform(&ComplexField::constant(g, c(0.0, 0.0)));
        assert_eq!(all_sup(&zero), 0.0);

        let one = ComplexField::constant(g, c(1.0, 0.0));
        let u = cauchy_transform(&one);
        let r = wirtinger(&u, Wirtinger::DzBar).zip_with(&one, |a, b| a - b);
        assert!(interior_sup(&r) < 1e-3, "{}", interior_sup(&r));

        let zb = ComplexField::from_fn(g, |_, _, z| z.conj());
        let u = cauchy_transform(&zb);
        let r = wirtinger(&u, Wirtinger::DzBar).zip_with(&zb, |a, b| a - b);
        assert!(interior_sup(&r) < 1e-3, "{}", interior_sup(&r));
    }

    #[test]
    fn cauchy_transform_refines() {
        let err = |n: usize| {
            let g = grid(n);
            let h = ComplexField::from_fn(g, |_, _, z| (z * 0.8).exp() * z.conj() + z.norm_sqr());
            let u = cauchy_transform(&h);
            interior_sup(&wirtinger(&u, Wirtinger::DzBar).zip_with(&h, |a, b| a - b))
        };
        let (e1, e2) = (err(17), err(33));
        assert!(e2 < e1, "{e1} -> {e2}");
    }

    #[test]
    fn csv_round_trip_and_errors() {
        let g = DomainGrid::new(-0.5, 0.5, 0.0, 1.0, 5, 4).unwrap();
        let f = ComplexField::from_fn(g, |_, _, z| z * z + 0.1);
        let mut buf = Vec::new();
        f.to_csv(&mut buf).unwrap();
        let back = ComplexField::from_csv(&buf[..]).unwrap();
        assert_eq!(back.grid().nu, 5);
        assert_eq!(back.grid().nv, 4);
        assert!(back.zip_with(&f, |a, b| (a - b).norm()).samples().iter().all(|&d| d < 1e-14));

        assert!(ComplexField::from_csv(&b"x,y\n"[..]).is_err());
        assert!(ComplexField::from_csv(&b""[..]).is_err());
        let text = String::from_utf8(buf).unwrap();
        let truncated: String = text.lines().take(10).collect::<Vec<_>>().join("\n");
        assert!(ComplexField::from_csv(truncated.as_bytes()).is_err());
        let dup = text.replacen("\n", "\n-5.0000000000000000e-1,0.0000000000000000e0,1,1\n", 1);
        assert!(matches!(ComplexField::from_csv(dup.as_bytes()), Err(CsvError::NotALattice(_))));
    }

    proptest! {
        #[test]
        fn real_field_wirtinger_conjugate(a in -2.0..2.0f64, b in -2.0..2.0f64, k in 0.1..2.0f64) {
            let g = grid(9);
            let f = ComplexField::from_fn(g, |_, _, z| c((a * z.re + b * z.im * z.im + (k * z.re).sin()).cos(), 0.0));
            let dz = wirtinger(&f, Wirtinger::Dz);
            let dzb = wirtinger(&f, Wirtinger::DzBar);
            prop_assert!(dz.zip_with(&dzb, |x, y| (x - y.conj()).norm()).samples().iter().all(|&d| d < 1e-12));
        }

        #[test]
        fn cauchy_transform_linear(a in -3.0..3.0f64, s in 0.1..2.0f64) {
            let g = grid(9);
            let h1 = ComplexField::from_fn(g, |_, _, z| (z * s).sin());
            let h2 = ComplexField::from_fn(g, |_, _, z| z.conj() * z + s);
            let lhs = cauchy_transform(&h1.zip_with(&h2, |x, y| x * a + y));
            let rhs = cauchy_transform(&h1).zip_with(&cauchy_transform(&h2), |x, y| x * a + y);
            let scale = 1.0 + all_sup(&rhs);
            prop_assert!(lhs.zip_with(&rhs, |x, y| (x - y).norm()).samples().iter().all(|&d| d < 1e-12 * scale));
        }
    }
}

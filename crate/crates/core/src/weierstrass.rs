//! Weierstrass data: the spinor triple `(psi0, psi1, psi2)` of the (1,0)-forms
//! `omega^k = psi^k dz`, the pair `(f, g)`, the residuals of their
//! dbar-systems, and a Picard solver that manufactures solutions from
//! holomorphic seeds.
//!
//! Parameter pairing: `mu1` goes with `psi0` (the `x0` direction) and `mu2`
//! with `psi1`, matching the coordinate harmonic-map equations.

use num_complex::Complex64;
use thiserror::Error;

use crate::complex_grid::{cauchy_transform, wirtinger, ComplexField, DomainGrid, Field, Mask, NormStats, Wirtinger};
use crate::lie_group::ModelParams;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Coefficients of `omega^0, omega^1, omega^2`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpinorTriple {
    pub psi0: ComplexField,
    pub psi1: ComplexField,
    pub psi2: ComplexField,
}

/// `f = psi1 - i psi2`, `g = psi0 / f`.
#[derive(Clone, Debug, PartialEq)]
pub struct WeierstrassPair {
    pub f: ComplexField,
    pub g: ComplexField,
}

impl WeierstrassPair {
    pub fn from_fns(
        grid: DomainGrid,
        f: impl Fn(Complex64) -> Complex64 + Sync,
        g: impl Fn(Complex64) -> Complex64 + Sync,
    ) -> Self {
        WeierstrassPair { f: Field::from_fn(grid, |_, _, z| f(z)), g: Field::from_fn(grid, |_, _, z| g(z)) }
    }

    pub fn grid(&self) -> &DomainGrid {
        self.f.grid()
    }

    /// Samples where the surface can be a spacelike immersion: `f != 0` and
    /// `|g| != 1`.
    pub fn regular_mask(&self) -> Mask {
        self.f.zip_with(&self.g, |f, g| {
            f.is_finite() && g.is_finite() && f.norm() > 0.0 && (g.norm_sqr() - 1.0).abs() > 1e-12
        })
    }
}

impl SpinorTriple {
    pub fn grid(&self) -> &DomainGrid {
        self.psi0.grid()
    }

    pub fn components(&self) -> [&ComplexField; 3] {
        [&self.psi0, &self.psi1, &self.psi2]
    }

    /// `-(psi0)^2 + (psi1)^2 + (psi2)^2`, zero for conformal data.
    pub fn conformality_residual(&self) -> ComplexField {
        Field::from_fn(*self.grid(), |i, j, _| {
            let (a, b, c) = (self.psi0.get(i, j), self.psi1.get(i, j), self.psi2.get(i, j));
            -a * a + b * b + c * c
        })
    }

    /// `2(-|psi0|^2 + |psi1|^2 + |psi2|^2)`, the induced-metric coefficient.
    pub fn metric_factor(&self) -> crate::complex_grid::RealField {
        Field::from_fn(*self.grid(), |i, j, _| {
            2.0 * (-self.psi0.get(i, j).norm_sqr() + self.psi1.get(i, j).norm_sqr() + self.psi2.get(i, j).norm_sqr())
        })
    }
}

/// `(psi0, psi1, psi2) = (f g, f(1+g^2)/2, i f(1-g^2)/2)`.
pub fn triple_from_pair(pair: &WeierstrassPair) -> SpinorTriple {
    let psi0 = pair.f.zip_with(&pair.g, |f, g| f * g);
    let psi1 = pair.f.zip_with(&pair.g, |f, g| 0.5 * f * (1.0 + g * g));
    let psi2 = pair.f.zip_with(&pair.g, |f, g| 0.5 * I * f * (1.0 - g * g));
    SpinorTriple { psi0, psi1, psi2 }
}

/// Result of [`pair_from_triple`]; `g` is NaN where `defined` is false.
#[derive(Clone, Debug)]
pub struct PairExtraction {
    pub pair: WeierstrassPair,
    pub defined: Mask,
}

/// Inverts [`triple_from_pair`]. Samples where `psi1 - i psi2` vanishes are
/// masked rather than rejected.
pub fn pair_from_triple(t: &SpinorTriple) -> PairExtraction {
    let f = t.psi1.zip_with(&t.psi2, |a, b| a - I * b);
    let scale = t.psi1.zip_with(&t.psi2, |a, b| a.norm() + b.norm());
    let defined = f.zip_with(&scale, |f, s| f.norm() > 1e-13 * s.max(1e-300));
    let g = Field::from_fn(*t.grid(), |i, j, _| {
        if defined.get(i, j) {
            t.psi0.get(i, j) / f.get(i, j)
        } else {
            Complex64::new(f64::NAN, f64::NAN)
        }
    });
    PairExtraction { pair: WeierstrassPair { f, g }, defined }
}

/// Right-hand sides of the triple system:
/// `psi0_zbar = mu1 conj(psi0) psi2`, `psi1_zbar = mu2 conj(psi1) psi2`,
/// `psi2_zbar = mu1 |psi0|^2 - mu2 |psi1|^2`.
pub fn hme_rhs(t: &SpinorTriple, p: &ModelParams) -> [ComplexField; 3] {
    let g = *t.grid();
    let r0 = Field::from_fn(g, |i, j, _| p.mu1 * t.psi0.get(i, j).conj() * t.psi2.get(i, j));
    let r1 = Field::from_fn(g, |i, j, _| p.mu2 * t.psi1.get(i, j).conj() * t.psi2.get(i, j));
    let r2 = Field::from_fn(g, |i, j, _| {
        Complex64::new(p.mu1 * t.psi0.get(i, j).norm_sqr() - p.mu2 * t.psi1.get(i, j).norm_sqr(), 0.0)
    });
    [r0, r1, r2]
}

/// `dbar psi^k - rhs^k` for the three components.
pub fn hme_residual(t: &SpinorTriple, p: &ModelParams) -> [ComplexField; 3] {
    let rhs = hme_rhs(t, p);
    let mut out = t.components().map(|c| wirtinger(c, Wirtinger::DzBar));
    for (r, s) in out.iter_mut().zip(rhs.iter()) {
        *r = r.zip_with(s, |a, b| a - b);
    }
    out
}

/// Right-hand sides of the `(f, g)` system:
/// `f_zbar = -i |f|^2 (mu1 |g|^2 - mu2 (1 + conj(g)^2) / 2)`,
/// `g_zbar = (i/2) conj(f) (mu1 conj(g)(1+g^2) - mu2 g (1+conj(g)^2))`.
pub fn fg_rhs(f: Complex64, g: Complex64, p: &ModelParams) -> (Complex64, Complex64) {
    let gb = g.conj();
    let rf = -I * f.norm_sqr() * (p.mu1 * g.norm_sqr() - 0.5 * p.mu2 * (1.0 + gb * gb));
    let rg = 0.5 * I * f.conj() * (p.mu1 * gb * (1.0 + g * g) - p.mu2 * g * (1.0 + gb * gb));
    (rf, rg)
}

/// `(dbar f - rhs_f, dbar g - rhs_g)`.
pub fn fg_residual(pair: &WeierstrassPair, p: &ModelParams) -> [ComplexField; 2] {
    let df = wirtinger(&pair.f, Wirtinger::DzBar);
    let dg = wirtinger(&pair.g, Wirtinger::DzBar);
    let grid = *pair.grid();
    let rf = Field::from_fn(grid, |i, j, _| df.get(i, j) - fg_rhs(pair.f.get(i, j), pair.g.get(i, j), p).0);
    let rg = Field::from_fn(grid, |i, j, _| dg.get(i, j) - fg_rhs(pair.f.get(i, j), pair.g.get(i, j), p).1);
    [rf, rg]
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { tol: 1e-8, max_iter: 200 }
    }
}

/// Non-fatal findings about the seed.
#[derive(Clone, Debug)]
pub struct SeedWarnings {
    /// Interior sup of `dbar` of the seed, relative to its size.
    pub holomorphy_defect: f64,
    pub nonholomorphic: bool,
    /// Samples with `|g| >= 1` in the seed.
    pub degenerate: Mask,
    pub degenerate_fraction: f64,
}

#[derive(Clone, Debug)]
pub struct DbarSolution {
    pub triple: SpinorTriple,
    pub pair: WeierstrassPair,
    pub iterations: usize,
    /// Successive-iterate sup-norms, one per iteration.
    pub history: Vec<f64>,
    /// Interior sup-norm of [`hme_residual`] on the returned triple.
    pub final_residual: f64,
    pub warnings: SeedWarnings,
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("tolerance must be positive and finite, got {0}")]
    BadTolerance(f64),
    #[error("no convergence after {iterations} iterations (last step {last_step:e})")]
    NoConvergence { iterations: usize, last_step: f64, history: Vec<f64> },
    #[error("seed contains non-finite samples")]
    NonFiniteSeed,
}

/// Holomorphy defect above which a seed is reported as non-holomorphic.
pub const SEED_HOLOMORPHY_TOL: f64 = 1e-3;

/// Holomorphy and degeneracy findings about a seed, as reported by the solver.
pub fn seed_warnings(seed: &WeierstrassPair) -> SeedWarnings {
    let interior = seed.grid().interior_mask();
    let mut defect: f64 = 0.0;
    for c in [&seed.f, &seed.g] {
        let bar = NormStats::complex(&wirtinger(c, Wirtinger::DzBar), &interior).sup;
        let hol = NormStats::complex(&wirtinger(c, Wirtinger::Dz), &interior).sup;
        defect = defect.max(bar / (1.0 + hol));
    }
    let degenerate = seed.g.map(|g| g.norm() >= 1.0);
    let degenerate_fraction = degenerate.count() as f64 / seed.grid().len() as f64;
    SeedWarnings { holomorphy_defect: defect, nonholomorphic: defect > SEED_HOLOMORPHY_TOL, degenerate, degenerate_fraction }
}

fn transform_or_zero(h: &ComplexField) -> ComplexField {
    if h.samples().iter().all(|c| *c == Complex64::new(0.0, 0.0)) {
        Field::constant(*h.grid(), Complex64::new(0.0, 0.0))
    } else {
        cauchy_transform(h)
    }
}

fn sup_diff(a: &ComplexField, b: &ComplexField) -> f64 {
    a.samples().iter().zip(b.samples()).fold(0.0, |m, (x, y)| {
        let d = (x - y).norm();
        if d.is_nan() { f64::NAN } else { m.max(d) }
    })
}

/// Builds Weierstrass data from a holomorphic seed `(f_h, g_h)`.
///
/// Fixed-point iteration `f <- f_h + T(rhs_f(f, g))`, `g <- g_h + T(rhs_g(f, g))`
/// with `T` the Cauchy transform. The triple is `triple_from_pair(f, g)`, so
/// it is conformal identically; on a fixed point it solves the triple system.
/// Stops when the sup-norm change of the triple drops below `tol`.
pub fn solve_dbar_system(
    seed: &WeierstrassPair,
    p: &ModelParams,
    opts: SolverOptions,
) -> Result<DbarSolution, SolveError> {
    if !(opts.tol > 0.0 && opts.tol.is_finite()) {
        return Err(SolveError::BadTolerance(opts.tol));
    }
    if seed.f.samples().iter().chain(seed.g.samples()).any(|c| !c.is_finite()) {
        return Err(SolveError::NonFiniteSeed);
    }
    let warnings = seed_warnings(seed);
    let grid = *seed.grid();

    let mut pair = seed.clone();
    let mut triple = triple_from_pair(&pair);
    let mut history = Vec::new();
    for iter in 1..=opts.max_iter.max(1) {
        let rf = Field::from_fn(grid, |i, j, _| fg_rhs(pair.f.get(i, j), pair.g.get(i, j), p).0);
        let rg = Field::from_fn(grid, |i, j, _| fg_rhs(pair.f.get(i, j), pair.g.get(i, j), p).1);
        let next = WeierstrassPair {
            f: seed.f.zip_with(&transform_or_zero(&rf), |a, b| a + b),
            g: seed.g.zip_with(&transform_or_zero(&rg), |a, b| a + b),
        };
        let next_triple = triple_from_pair(&next);
        let step = triple
            .components()
            .iter()
            .zip(next_triple.components())
            .map(|(a, b)| sup_diff(a, b))
            .fold(0.0f64, |m, d| if d.is_nan() { f64::NAN } else { m.max(d) });
        history.push(step);
        pair = next;
        triple = next_triple;
        if !step.is_finite() {
            return Err(SolveError::NoConvergence { iterations: iter, last_step: step, history });
        }
        if step < opts.tol {
            let interior = grid.interior_mask();
            let final_residual = hme_residual(&triple, p)
                .iter()
                .map(|r| NormStats::complex(r, &interior).sup)
                .fold(0.0, f64::max);
            return Ok(DbarSolution { triple, pair, iterations: iter, history, final_residual, warnings });
        }
    }
    let last_step = history.last().copied().unwrap_or(f64::NAN);
    Err(SolveError::NoConvergence { iterations: history.len(), last_step, history })
}

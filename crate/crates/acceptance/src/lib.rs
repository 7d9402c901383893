//! Shared fixtures for the acceptance suite: closed-form Minkowski surfaces,
//! the solved reference datasets, and the verdict line format.

use std::time::Duration;

use num_complex::Complex64;

use maxsurf::complex_grid::{DomainGrid, Field, Mask};
use maxsurf::lie_group::ModelParams;
use maxsurf::synthesis::{synthesize, ImmersionField};
use maxsurf::weierstrass::{solve_dbar_system, triple_from_pair, DbarSolution, SolverOptions, WeierstrassPair};

/// The square every dataset lives on.
pub fn square(n: usize) -> DomainGrid {
    DomainGrid::centered_square(0.8, n).expect("valid grid")
}

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Holomorphic Minkowski data with a closed-form primitive of
/// `(f g, f (1 + g^2) / 2, i f (1 - g^2) / 2)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MinkowskiData {
    /// `(1, 0)`, a spacelike plane.
    Plane,
    /// `(1, z)`, lightlike along `|z| = 1`.
    Enneper,
    /// `(e^z, 0.3 z)`.
    ExpLinear,
}

impl MinkowskiData {
    pub const ALL: [MinkowskiData; 3] = [MinkowskiData::Plane, MinkowskiData::Enneper, MinkowskiData::ExpLinear];

    pub fn label(self) -> &'static str {
        match self {
            MinkowskiData::Plane => "(1,0)",
            MinkowskiData::Enneper => "(1,z)",
            MinkowskiData::ExpLinear => "(e^z,0.3z)",
        }
    }

    pub fn is_polynomial(self) -> bool {
        self != MinkowskiData::ExpLinear
    }

    pub fn pair(self, grid: DomainGrid) -> WeierstrassPair {
        match self {
            MinkowskiData::Plane => WeierstrassPair::from_fns(grid, |_| c(1.0, 0.0), |_| c(0.0, 0.0)),
            MinkowskiData::Enneper => WeierstrassPair::from_fns(grid, |_| c(1.0, 0.0), |z| z),
            MinkowskiData::ExpLinear => WeierstrassPair::from_fns(grid, |z| z.exp(), |z| 0.3 * z),
        }
    }

    /// Holomorphic primitives vanishing at 0.
    fn primitive(self, z: Complex64) -> [Complex64; 3] {
        let i = Complex64::i();
        match self {
            MinkowskiData::Plane => [c(0.0, 0.0), 0.5 * z, 0.5 * i * z],
            MinkowskiData::Enneper => {
                let z3 = z * z * z / 3.0;
                [0.5 * z * z, 0.5 * (z + z3), 0.5 * i * (z - z3)]
            }
            MinkowskiData::ExpLinear => {
                // int e^z z = e^z (z - 1) + 1, int e^z z^2 = e^z (z^2 - 2z + 2) - 2
                let e = z.exp();
                let m1 = e * (z - 1.0) + 1.0;
                let m2 = e * (z * z - 2.0 * z + 2.0) - 2.0;
                let m0 = e - 1.0;
                [0.3 * m1, 0.5 * (m0 + 0.09 * m2), 0.5 * i * (m0 - 0.09 * m2)]
            }
        }
    }

    /// `2 Re` of the primitive, relative to the grid centre.
    pub fn exact_immersion(self, grid: DomainGrid) -> ImmersionField {
        let centre = grid.point(grid.nu / 2, grid.nv / 2);
        let at = |z: Complex64, k: usize| 2.0 * (self.primitive(z)[k] - self.primitive(centre)[k]).re;
        ImmersionField {
            x0: Field::from_fn(grid, |_, _, z| at(z, 0)),
            x1: Field::from_fn(grid, |_, _, z| at(z, 1)),
            x2: Field::from_fn(grid, |_, _, z| at(z, 2)),
            regular_mask: Mask::all_set(grid),
            basepoint: (grid.nu / 2, grid.nv / 2),
            loop_residuals: [0.0; 3],
            path_dependent: false,
        }
    }

    pub fn synthesized(self, grid: DomainGrid) -> ImmersionField {
        let t = triple_from_pair(&self.pair(grid));
        synthesize(&t, &ModelParams::new(0.0, 0.0), (grid.nu / 2, grid.nv / 2))
    }
}

/// Samples with `|z| < radius`.
pub fn disc_mask(grid: DomainGrid, radius: f64) -> Mask {
    Field::from_fn(grid, |_, _, z| z.norm() < radius)
}

/// Parameter pairs of the solver criteria.
pub const SOLVER_PARAMS: [(f64, f64); 3] = [(0.1, 0.1), (0.1, -0.1), (0.1, 0.2)];

/// A converged reference dataset: seed `(1, 0.3 z)` on [`square`].
pub struct Dataset {
    pub params: ModelParams,
    pub n: usize,
    pub solution: DbarSolution,
    pub immersion: ImmersionField,
}

pub fn solve_dataset(mu1: f64, mu2: f64, n: usize) -> Result<Dataset, String> {
    let grid = square(n);
    let params = ModelParams::new(mu1, mu2);
    let seed = WeierstrassPair::from_fns(grid, |_| c(1.0, 0.0), |z| 0.3 * z);
    let solution = solve_dbar_system(&seed, &params, SolverOptions { tol: 1e-8, max_iter: 200 })
        .map_err(|e| format!("mu=({mu1},{mu2}) n={n}: {e}"))?;
    let immersion = synthesize(&solution.triple, &params, (n / 2, n / 2));
    Ok(Dataset { params, n, solution, immersion })
}

/// Result of one criterion.
pub struct Verdict {
    pub pass: bool,
    pub detail: String,
}

impl Verdict {
    pub fn new(pass: bool, detail: impl Into<String>) -> Self {
        Verdict { pass, detail: detail.into() }
    }
}

pub fn verdict_line(index: usize, title: &str, v: &Verdict, elapsed: Duration) -> String {
    let status = if v.pass { "PASS" } else { "FAIL" };
    format!("criterion {index:>2} {status}  {title} [{:.1}s]: {}", elapsed.as_secs_f64(), v.detail)
}

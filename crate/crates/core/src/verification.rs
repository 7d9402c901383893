//! Independent checks on synthesized surfaces: coordinate harmonic-map
//! residuals, mean curvature, the normal Gauss map, the second-order PDE
//! satisfied by `g`, tension-field residuals for the two harmonic cases, and
//! the holomorphy report for `mu1 = mu2`.

use num_complex::Complex64;
use thiserror::Error;

use crate::complex_grid::{
    mixed_wirtinger, to_complex, wirtinger, ComplexField, Field, GridCalculus, Mask, NormStats, RealField,
    Wirtinger,
};
use crate::lie_group::ModelParams;
use crate::synthesis::{frame_tangents, lorentz, ImmersionField};
use crate::weierstrass::{fg_residual, triple_from_pair, WeierstrassPair};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// A residual field with the samples on which it is meaningful.
#[derive(Clone, Debug)]
pub struct MaskedResidual {
    pub values: ComplexField,
    pub valid: Mask,
}

impl MaskedResidual {
    /// Norms over valid interior samples.
    pub fn interior_stats(&self) -> NormStats {
        NormStats::complex(&self.values, &self.valid.and(&self.values.grid().interior_mask()))
    }
}

/// Left sides of the coordinate harmonic-map equations:
///
/// ```text
/// x0_zzbar - mu1 (x0_zbar x2_z + x0_z x2_zbar)
/// x1_zzbar - mu2 (x1_zbar x2_z + x1_z x2_zbar)
/// x2_zzbar - mu1 exp(-2 mu1 x2) |x0_z|^2 + mu2 exp(-2 mu2 x2) |x1_z|^2
/// ```
pub fn harmonic_residuals(phi: &ImmersionField, p: &ModelParams) -> [ComplexField; 3] {
    let x = phi.components().map(to_complex);
    let dz = x.clone().map(|c| wirtinger(&c, Wirtinger::Dz));
    let dzb = x.clone().map(|c| wirtinger(&c, Wirtinger::DzBar));
    let lap = x.map(|c| mixed_wirtinger(&c));
    let g = *phi.grid();
    let twisted = |k: usize, mu: f64| {
        Field::from_fn(g, |i, j, _| {
            lap[k].get(i, j) - mu * (dzb[k].get(i, j) * dz[2].get(i, j) + dz[k].get(i, j) * dzb[2].get(i, j))
        })
    };
    let r2 = Field::from_fn(g, |i, j, _| {
        let h = phi.x2.get(i, j);
        lap[2].get(i, j) - p.mu1 * (-2.0 * p.mu1 * h).exp() * dz[0].get(i, j) * dzb[0].get(i, j)
            + p.mu2 * (-2.0 * p.mu2 * h).exp() * dz[1].get(i, j) * dzb[1].get(i, j)
    });
    [twisted(0, p.mu1), twisted(1, p.mu2), r2]
}

/// Mean curvature and unit normal of a spacelike immersion.
#[derive(Clone, Debug)]
pub struct MeanCurvature {
    /// `tr II / tr I`, the mean curvature in conformal coordinates.
    pub h: RealField,
    /// `tr(I^-1 II) / 2`, valid for any parametrization. On conformal
    /// coordinates it agrees with `h` but its truncation error grows like
    /// curvature over conformal factor.
    pub h_general: RealField,
    /// `(|E - G| + 2|F|) / (E + G)`; `h` is only meaningful where this is small.
    pub anisotropy: RealField,
    /// Future unit normal in the left-invariant frame.
    pub normal: [RealField; 3],
    /// Interior regular samples with a positive definite induced metric.
    pub valid: Mask,
}

impl MeanCurvature {
    pub fn stats(&self) -> NormStats {
        NormStats::real(&self.h, &self.valid)
    }
}

/// Mean curvature from finite-difference derivatives of `phi`, with the second
/// fundamental form taken against the future unit normal. Covariant
/// derivatives use the exact connection table in the frame.
pub fn mean_curvature(phi: &ImmersionField, p: &ModelParams) -> MeanCurvature {
    let grid = *phi.grid();
    let (au, av) = frame_tangents(phi, p);
    let d1u = phi.components().map(|c| c.d_u());
    let d1v = phi.components().map(|c| c.d_v());
    let duu = phi.components().map(|c| c.d_uu());
    let dvv = phi.components().map(|c| c.d_vv());
    let duv = phi.components().map(|c| c.d_uv());
    let gamma: Vec<[f64; 3]> = (0..9).map(|k| p.connection_coefficient(k / 3, k % 3).to_array()).collect();
    let mus = [p.mu1, p.mu2, 0.0];

    let mut h = vec![f64::NAN; grid.len()];
    let mut h_general = vec![f64::NAN; grid.len()];
    let mut anisotropy = vec![f64::NAN; grid.len()];
    let mut normal = [vec![f64::NAN; grid.len()], vec![f64::NAN; grid.len()], vec![f64::NAN; grid.len()]];
    let mut valid = vec![false; grid.len()];
    for k in 0..grid.len() {
        let (i, j) = grid.coords(k);
        let x2 = phi.x2.get(i, j);
        let x2u = d1u[2].get(i, j);
        let x2v = d1v[2].get(i, j);
        let a_u = [au[0].get(i, j), au[1].get(i, j), au[2].get(i, j)];
        let a_v = [av[0].get(i, j), av[1].get(i, j), av[2].get(i, j)];
        // d/da of exp(-mu x2) x_b = exp(-mu x2) (x_ab - mu x2_a x_b)
        let second = |dd: &[RealField; 3], xa2: f64, b: &[RealField; 3]| -> [f64; 3] {
            let mut out = [0.0; 3];
            for c in 0..3 {
                out[c] = (-mus[c] * x2).exp() * (dd[c].get(i, j) - mus[c] * xa2 * b[c].get(i, j));
            }
            out
        };
        let cov = |mut base: [f64; 3], x: [f64; 3], y: [f64; 3]| -> [f64; 3] {
            for a in 0..3 {
                for b in 0..3 {
                    let w = x[a] * y[b];
                    if w != 0.0 {
                        for c in 0..3 {
                            base[c] += w * gamma[3 * a + b][c];
                        }
                    }
                }
            }
            base
        };
        let nuu = cov(second(&duu, x2u, &d1u), a_u, a_u);
        let nuv = cov(second(&duv, x2u, &d1v), a_u, a_v);
        let nvv = cov(second(&dvv, x2v, &d1v), a_v, a_v);

        let e = lorentz(a_u, a_u);
        let f = lorentz(a_u, a_v);
        let g = lorentz(a_v, a_v);
        let det = e * g - f * f;
        let cross = [
            a_u[1] * a_v[2] - a_u[2] * a_v[1],
            a_u[2] * a_v[0] - a_u[0] * a_v[2],
            a_u[0] * a_v[1] - a_u[1] * a_v[0],
        ];
        let mut n = [-cross[0], cross[1], cross[2]];
        let nn = -lorentz(n, n);
        if !(nn > 0.0 && det > 0.0 && e > 0.0) {
            continue;
        }
        let s = nn.sqrt().copysign(n[0]);
        for c in n.iter_mut() {
            *c /= s;
        }
        let (huu, huv, hvv) = (lorentz(nuu, n), lorentz(nuv, n), lorentz(nvv, n));
        h[k] = (huu + hvv) / (e + g);
        h_general[k] = (g * huu - 2.0 * f * huv + e * hvv) / (2.0 * det);
        anisotropy[k] = ((e - g).abs() + 2.0 * f.abs()) / (e + g);
        for c in 0..3 {
            normal[c][k] = n[c];
        }
        valid[k] = phi.regular_mask.samples()[k] && grid.is_interior(i, j);
    }
    let wrap = |v: Vec<f64>| Field::new(grid, v).expect("grid sized");
    let [n0, n1, n2] = normal;
    MeanCurvature {
        h: wrap(h),
        h_general: wrap(h_general),
        anisotropy: wrap(anisotropy),
        normal: [wrap(n0), wrap(n1), wrap(n2)],
        valid: Field::new(grid, valid).expect("grid sized"),
    }
}

/// `phi^{-1} N` in the frame and its projection `w = (n1 + i n2) / (1 + n0)`.
#[derive(Clone, Debug)]
pub struct GaussMapField {
    pub n0: RealField,
    pub n1: RealField,
    pub n2: RealField,
    pub w: ComplexField,
    /// `|g| < 1`, the future sheet.
    pub valid: Mask,
}

/// Projection from `-E0` of the unit hyperbolic plane.
pub fn project_plus(n: [f64; 3]) -> Complex64 {
    Complex64::new(n[1], n[2]) / (1.0 + n[0])
}

/// `((1 + |g|^2), 2 Re g, 2 Im g) / (1 - |g|^2)`.
pub fn normal_from_g(g: Complex64) -> [f64; 3] {
    let r = g.norm_sqr();
    let d = 1.0 - r;
    if d == 0.0 {
        return [f64::NAN; 3];
    }
    [(1.0 + r) / d, 2.0 * g.re / d, 2.0 * g.im / d]
}

pub fn normal_gauss_map(pair: &WeierstrassPair) -> GaussMapField {
    let n = pair.g.map(normal_from_g);
    GaussMapField {
        n0: n.map(|v| v[0]),
        n1: n.map(|v| v[1]),
        n2: n.map(|v| v[2]),
        w: n.map(project_plus),
        valid: pair.g.map(|g| g.norm() < 1.0),
    }
}

/// Denominators below this fraction of `|mu1| + |mu2|` are treated as singular.
pub const SINGULAR_TOL: f64 = 0.05;

/// Coefficients of the second-order PDE for `g`:
/// `g_zzbar - a |g_zbar|^2 - b g_z g_zbar = 0`, or `None` near a vanishing
/// denominator.
fn gauss_pde_coefficients(g: Complex64, p: &ModelParams, tol: f64) -> Option<(Complex64, Complex64)> {
    let (m1, m2) = (p.mu1, p.mu2);
    let gb = g.conj();
    let d1 = m1 * g * (1.0 + gb * gb) - m2 * gb * (1.0 + g * g);
    let d2 = m1 * gb * (1.0 + g * g) - m2 * g * (1.0 + gb * gb);
    let scale = (m1.abs() + m2.abs()) * tol;
    if !(d1.norm() > scale && d2.norm() > scale) {
        return None;
    }
    let a = (m1 * m1 - m2 * m2) * g * (1.0 + g * g) * (1.0 - gb * gb) / (d1 * d2);
    let b = (2.0 * m1 * g.norm_sqr() - m2 * (1.0 + gb * gb)) / d2;
    Some((a, b))
}

/// Left side of the Gauss-map PDE implied by the `(f, g)` system. For
/// `mu = (0, 0)` this is `g_zzbar`.
pub fn gauss_pde_residual(g: &ComplexField, f: &ComplexField, p: &ModelParams) -> MaskedResidual {
    gauss_pde_residual_with(g, f, p, SINGULAR_TOL)
}

pub fn gauss_pde_residual_with(g: &ComplexField, f: &ComplexField, p: &ModelParams, tol: f64) -> MaskedResidual {
    let gz = wirtinger(g, Wirtinger::Dz);
    let gzb = wirtinger(g, Wirtinger::DzBar);
    let gzzb = mixed_wirtinger(g);
    let grid = *g.grid();
    let nan = Complex64::new(f64::NAN, f64::NAN);
    let flat = p.mu1 == 0.0 && p.mu2 == 0.0;
    let mut valid = Field::constant(grid, false);
    let values = Field::from_fn(grid, |i, j, _| {
        if flat {
            return gzzb.get(i, j);
        }
        match gauss_pde_coefficients(g.get(i, j), p, tol) {
            Some((a, b)) => {
                gzzb.get(i, j) - a * gzb.get(i, j).norm_sqr() - b * gz.get(i, j) * gzb.get(i, j)
            }
            None => nan,
        }
    });
    for k in 0..grid.len() {
        valid.samples_mut()[k] = values.samples()[k].is_finite() && f.samples()[k].norm() > 0.0;
    }
    MaskedResidual { values, valid }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub enum TensionCase {
    /// Target metric `2 dw dwbar / |(wbar - w)(1 - |w|^2)|`.
    MuEqual,
    /// Target metric `2 dw dwbar / |(w + wbar)(1 + |w|^2)|`.
    MuOpposite,
}

impl TensionCase {
    /// `(wbar - w)(1 - |w|^2)` or `(w + wbar)(1 + |w|^2)`.
    pub fn denominator(self, w: Complex64) -> Complex64 {
        match self {
            TensionCase::MuEqual => (w.conj() - w) * (1.0 - w.norm_sqr()),
            TensionCase::MuOpposite => (w + w.conj()) * (1.0 + w.norm_sqr()),
        }
    }

    /// Christoffel symbol `Gamma^w_ww` of the target.
    pub fn christoffel(self, w: Complex64) -> Complex64 {
        let wb = w.conj();
        let r = w.norm_sqr();
        match self {
            TensionCase::MuEqual => (1.0 + wb * wb - 2.0 * r) / self.denominator(w),
            TensionCase::MuOpposite => -(1.0 + wb * wb + 2.0 * r) / self.denominator(w),
        }
    }

    /// Coefficient of `dw dwbar` in the target metric, up to the constant 2.
    pub fn target_metric(self, w: Complex64) -> f64 {
        1.0 / self.denominator(w).norm()
    }
}

#[derive(Clone, Debug)]
pub struct TensionInput {
    pub g: ComplexField,
    /// Conformal factor of the domain metric.
    pub lambda2: RealField,
    pub case: TensionCase,
}

#[derive(Clone, Debug)]
pub struct TensionResult {
    /// `g_zzbar + Gamma(g) g_z g_zbar`.
    pub residual: MaskedResidual,
    /// `4 lambda^-2` times the residual.
    pub tau: ComplexField,
    pub target_metric: RealField,
}

/// Samples whose denominator is within this distance of zero are singular.
pub const TENSION_SINGULAR_TOL: f64 = 1e-2;

pub fn tension_residual(t: &TensionInput) -> TensionResult {
    tension_residual_with(t, TENSION_SINGULAR_TOL)
}

pub fn tension_residual_with(t: &TensionInput, tol: f64) -> TensionResult {
    let gz = wirtinger(&t.g, Wirtinger::Dz);
    let gzb = wirtinger(&t.g, Wirtinger::DzBar);
    let gzzb = mixed_wirtinger(&t.g);
    let grid = *t.g.grid();
    let values = Field::from_fn(grid, |i, j, _| {
        let w = t.g.get(i, j);
        gzzb.get(i, j) + t.case.christoffel(w) * gz.get(i, j) * gzb.get(i, j)
    });
    let valid = Field::from_fn(grid, |i, j, _| {
        let w = t.g.get(i, j);
        t.case.denominator(w).norm() > tol && t.lambda2.get(i, j) > 0.0 && values.get(i, j).is_finite()
    });
    let tau = values.zip_with(&t.lambda2, |r, l| 4.0 * r / l);
    let target_metric = t.g.map(|w| t.case.target_metric(w));
    TensionResult { residual: MaskedResidual { values, valid }, tau, target_metric }
}

#[derive(Debug, Error, PartialEq)]
pub enum ObstructionError {
    #[error("holomorphy report needs mu1 = mu2 != 0, got ({0}, {1})")]
    NotApplicable(f64, f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub enum ObstructionVerdict {
    /// `dbar g` is not small.
    NotHolomorphic,
    /// `g` is holomorphic but `(f, g)` does not solve the AdS system.
    InvalidData,
    /// Holomorphic valid data with vanishing first fundamental form.
    Degenerate,
    /// Holomorphic valid data with a nondegenerate first fundamental form.
    Nondegenerate,
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct ObstructionReport {
    /// Interior sup of `|g_zbar|`.
    pub holomorphy_defect: f64,
    /// Interior sup of the `g` equation residual.
    pub g_equation_residual: f64,
    /// Interior sup of both `(f, g)` residuals.
    pub system_residual: f64,
    /// Every sample has `g` real or `|g| = 1` (within `tol`).
    pub alternative_holds: bool,
    pub psi2_sup: f64,
    /// Sup of `|f|^2 (1 - |g|^2)^2`.
    pub conformal_factor_sup: f64,
    /// Sup of `2(-|psi0|^2 + |psi1|^2 + |psi2|^2)` from the triple.
    pub triple_factor_sup: f64,
    pub verdict: ObstructionVerdict,
}

/// Threshold below which the conformal factor counts as zero.
pub const DEGENERATE_FACTOR: f64 = 1e-10;

/// Holomorphy report for `mu1 = mu2 = c`. Derivative-based quantities are
/// judged against `tol`.
pub fn holomorphy_obstruction(
    pair: &WeierstrassPair,
    p: &ModelParams,
    tol: f64,
) -> Result<ObstructionReport, ObstructionError> {
    if !(p.mu1 == p.mu2 && p.mu1 != 0.0) {
        return Err(ObstructionError::NotApplicable(p.mu1, p.mu2));
    }
    let c = p.mu1;
    let grid = *pair.grid();
    let interior = grid.interior_mask();
    let gzb = wirtinger(&pair.g, Wirtinger::DzBar);
    let holomorphy_defect = NormStats::complex(&gzb, &interior).sup;
    let g_eq = Field::from_fn(grid, |i, j, _| {
        let (f, g) = (pair.f.get(i, j), pair.g.get(i, j));
        gzb.get(i, j) - 0.5 * I * c * f.conj() * (g.conj() - g) * (1.0 - g.norm_sqr())
    });
    let g_equation_residual = NormStats::complex(&g_eq, &interior).sup;
    let system_residual = fg_residual(pair, p).iter().map(|r| NormStats::complex(r, &interior).sup).fold(0.0, f64::max);
    let alternative_holds = pair.g.samples().iter().all(|g| g.im.abs() <= tol || (g.norm_sqr() - 1.0).abs() <= tol);
    let triple = triple_from_pair(pair);
    let all = Mask::all_set(grid);
    let psi2_sup = NormStats::complex(&triple.psi2, &all).sup;
    let factor = pair.f.zip_with(&pair.g, |f, g| f.norm_sqr() * (1.0 - g.norm_sqr()).powi(2));
    let conformal_factor_sup = NormStats::real(&factor, &all).sup;
    let triple_factor_sup = NormStats::real(&triple.metric_factor(), &all).sup;

    let verdict = if !(holomorphy_defect <= tol) {
        ObstructionVerdict::NotHolomorphic
    } else if conformal_factor_sup <= DEGENERATE_FACTOR {
        ObstructionVerdict::Degenerate
    } else if !(system_residual <= tol) {
        ObstructionVerdict::InvalidData
    } else {
        ObstructionVerdict::Nondegenerate
    };
    Ok(ObstructionReport {
        holomorphy_defect,
        g_equation_residual,
        system_residual,
        alternative_holds,
        psi2_sup,
        conformal_factor_sup,
        triple_factor_sup,
        verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex_grid::{observed_order, DomainGrid};
    use crate::synthesis::{induced_metric, synthesize};
    use crate::weierstrass::{solve_dbar_system, SolverOptions};
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn grid(n: usize) -> DomainGrid {
        DomainGrid::centered_square(0.5, n).unwrap()
    }

    fn immersion(g: DomainGrid, x: impl Fn(Complex64) -> [f64; 3] + Sync) -> ImmersionField {
        ImmersionField {
            x0: Field::from_fn(g, |_, _, z| x(z)[0]),
            x1: Field::from_fn(g, |_, _, z| x(z)[1]),
            x2: Field::from_fn(g, |_, _, z| x(z)[2]),
            regular_mask: Mask::all_set(g),
            basepoint: (0, 0),
            loop_residuals: [0.0; 3],
            path_dependent: false,
        }
    }

    fn solved(n: usize, p: &ModelParams) -> (WeierstrassPair, ImmersionField) {
        let g = grid(n);
        let seed = WeierstrassPair::from_fns(g, |_| c(1.0, 0.0), |z| 0.3 * z);
        let sol = solve_dbar_system(&seed, p, SolverOptions::default()).unwrap();
        let phi = synthesize(&sol.triple, p, (n / 2, n / 2));
        (sol.pair, phi)
    }

    fn interior_sup(f: &ComplexField) -> f64 {
        NormStats::complex(f, &f.grid().interior_mask()).sup
    }

    #[test]
    fn harmonic_residual_examples() {
        let g = grid(9);
        let p = ModelParams::new(0.0, 0.0);
        let plane = immersion(g, |z| [0.0, z.re, -z.im]);
        for r in harmonic_residuals(&plane, &p) {
            assert!(r.sup_norm() < 1e-13);
        }
        let p = ModelParams::new(0.0, 0.7);
        let bent = immersion(g, |z| [z.re * z.re, z.re, -z.im]);
        let r = harmonic_residuals(&bent, &p);
        assert!(r[0].map(|x| x - 0.5).sup_norm() < 1e-12);
    }

    #[test]
    fn mean_curvature_oracles() {
        let g = grid(17);
        // x0 = const slice is totally geodesic in every G(mu1, mu2)
        for &(m1, m2) in &[(0.0, 0.0), (0.3, 0.3), (0.2, -0.5), (1.0, 2.0)] {
            let p = ModelParams::new(m1, m2);
            let slice = immersion(g, |z| [0.25, z.re, z.im]);
            let mc = mean_curvature(&slice, &p);
            assert_eq!(mc.valid.count(), 15 * 15);
            assert!(mc.stats().sup < 1e-12, "{m1} {m2}: {}", mc.stats().sup);
        }
        // unit hyperbolic plane in Minkowski space has |H| = 1 and N = position
        let hyp = immersion(g, |z| [(1.0 + z.norm_sqr()).sqrt(), z.re, z.im]);
        let mc = mean_curvature(&hyp, &ModelParams::new(0.0, 0.0));
        let (i, j) = (8, 8);
        assert!((mc.h_general.get(i, j).abs() - 1.0).abs() < 1e-3);
        // the centre sample is conformal, off-centre ones are not
        assert!((mc.h.get(i, j).abs() - 1.0).abs() < 1e-3);
        assert!(mc.anisotropy.get(14, 14) > 0.1);
        assert!(mc.anisotropy.get(i, j) < 1e-3);
        assert!((mc.normal[0].get(i, j) - 1.0).abs() < 1e-3);
    }

    #[test]
    fn mean_curvature_minkowski_converges() {
        let p = ModelParams::new(0.0, 0.0);
        let sup = |n: usize, general: bool| {
            let g = DomainGrid::centered_square(0.8, n).unwrap();
            let t = triple_from_pair(&WeierstrassPair::from_fns(g, |z| z.exp(), |z| 0.3 * z));
            let phi = synthesize(&t, &p, (n / 2, n / 2));
            let mc = mean_curvature(&phi, &p);
            NormStats::real(if general { &mc.h_general } else { &mc.h }, &mc.valid).sup
        };
        for general in [false, true] {
            let (a, b) = (sup(33, general), sup(65, general));
            assert!(b <= 5e-3, "{b}");
            assert!(observed_order(a, b) >= 1.8, "{a} {b}");
        }
        // cubic data is differenced exactly by the trace form
        let g = DomainGrid::centered_square(0.8, 65).unwrap();
        let t = triple_from_pair(&WeierstrassPair::from_fns(g, |_| c(1.0, 0.0), |z| z));
        let mut phi = synthesize(&t, &p, (32, 32));
        phi.regular_mask = phi.regular_mask.and(&Field::from_fn(g, |_, _, z| z.norm() < 0.9));
        assert!(mean_curvature(&phi, &p).stats().sup < 1e-9);
    }

    #[test]
    fn solved_surfaces_are_maximal() {
        for &(m1, m2) in &[(0.1, 0.1), (0.1, 0.2)] {
            let p = ModelParams::new(m1, m2);
            let (pair, phi) = solved(33, &p);
            let mc = mean_curvature(&phi, &p);
            assert!(mc.stats().sup < 5e-3, "{}", mc.stats().sup);
            // the normal matches the Gauss map of the data
            let gm = normal_gauss_map(&pair);
            let mut worst: f64 = 0.0;
            for k in 0..phi.grid().len() {
                if mc.valid.samples()[k] {
                    worst = worst.max((mc.normal[1].samples()[k] - gm.n1.samples()[k]).abs());
                    worst = worst.max((mc.normal[2].samples()[k] - gm.n2.samples()[k]).abs());
                }
            }
            assert!(worst < 1e-3, "{worst}");
        }
    }

    #[test]
    fn harmonic_residuals_of_solved_data() {
        let p = ModelParams::new(0.1, 0.2);
        let (_, coarse) = solved(33, &p);
        let (_, fine) = solved(65, &p);
        let a = harmonic_residuals(&coarse, &p).iter().map(interior_sup).fold(0.0, f64::max);
        let b = harmonic_residuals(&fine, &p).iter().map(interior_sup).fold(0.0, f64::max);
        assert!(b < 1e-3, "{b}");
        assert!(observed_order(a, b) > 1.8, "{a} {b}");
    }

    #[test]
    fn gauss_map_examples() {
        assert_eq!(normal_from_g(c(0.0, 0.0)), [1.0, 0.0, 0.0]);
        let n = normal_from_g(c(0.5, 0.0));
        assert!((n[0] - 5.0 / 3.0).abs() < 1e-15 && (n[1] - 4.0 / 3.0).abs() < 1e-15 && n[2] == 0.0);
        assert!((project_plus(n) - c(0.5, 0.0)).norm() < 1e-15);
        assert!(normal_from_g(c(0.6, 0.8)).iter().all(|x| x.is_nan()));

        let g = grid(5);
        let mut pair = WeierstrassPair::from_fns(g, |_| c(1.0, 0.0), |z| z);
        pair.g.set(0, 0, c(0.0, 1.0));
        let gm = normal_gauss_map(&pair);
        assert!(!gm.valid.get(0, 0));
        assert!(gm.valid.get(2, 2));
    }

    #[test]
    fn gauss_pde_flat_is_laplacian() {
        let g = grid(9);
        let gg = Field::from_fn(g, |_, _, z| z * z);
        let f = Field::constant(g, c(1.0, 0.0));
        let r = gauss_pde_residual(&gg, &f, &ModelParams::new(0.0, 0.0));
        assert!(r.values.sup_norm() < 1e-12);
        assert_eq!(r.valid.count(), g.len());
    }

    #[test]
    fn gauss_pde_matches_tension_forms() {
        let g = grid(17);
        let gg = Field::from_fn(g, |_, _, z| 0.3 * z + c(0.05, 0.02) * z.conj() * z + 0.1);
        let f = Field::constant(g, c(1.0, 0.0));
        let lambda2 = Field::constant(g, 1.0);
        for (p, case) in [
            (ModelParams::new(0.3, 0.3), TensionCase::MuEqual),
            (ModelParams::new(0.3, -0.3), TensionCase::MuOpposite),
        ] {
            let pde = gauss_pde_residual(&gg, &f, &p);
            let ten = tension_residual(&TensionInput { g: gg.clone(), lambda2: lambda2.clone(), case });
            let both = pde.valid.and(&ten.residual.valid);
            assert!(both.count() > g.len() / 2);
            for k in 0..g.len() {
                if both.samples()[k] {
                    let (a, b) = (pde.values.samples()[k], ten.residual.values.samples()[k]);
                    assert!((a - b).norm() <= 1e-12 * (1.0 + a.norm()), "{case:?} {a} {b}");
                }
            }
        }
    }

    #[test]
    fn gauss_pde_small_on_solved_data() {
        for &(m1, m2) in &[(0.1, 0.1), (0.1, -0.1), (0.1, 0.2)] {
            let p = ModelParams::new(m1, m2);
            let (pair, _) = solved(33, &p);
            let r = gauss_pde_residual(&pair.g, &pair.f, &p);
            assert!(r.interior_stats().sup < 1e-3, "{m1} {m2}: {}", r.interior_stats().sup);
        }
    }

    #[test]
    fn christoffel_is_log_derivative_of_target_metric() {
        let h = 1e-6;
        for case in [TensionCase::MuEqual, TensionCase::MuOpposite] {
            for &w in &[c(0.3, 0.4), c(-0.2, 0.7), c(0.5, -0.1), c(1.5, 0.9)] {
                let l = |w: Complex64| case.target_metric(w).ln();
                // d/dw = (d/du - i d/dv) / 2
                let du = (l(w + h) - l(w - h)) / (2.0 * h);
                let dv = (l(w + I * h) - l(w - I * h)) / (2.0 * h);
                let fd = 0.5 * Complex64::new(du, -dv);
                assert!((fd - case.christoffel(w)).norm() < 1e-6, "{case:?} {w}");
            }
        }
    }

    #[test]
    fn tension_constant_map() {
        let g = grid(9);
        let t = TensionInput { g: Field::constant(g, c(0.3, 0.4)), lambda2: Field::constant(g, 2.0), case: TensionCase::MuEqual };
        let r = tension_residual(&t);
        assert!(r.residual.values.sup_norm() < 1e-12);
        assert_eq!(r.residual.valid.count(), g.len());
        let on_axis = TensionInput { g: Field::constant(g, c(0.3, 0.0)), ..t };
        assert_eq!(tension_residual(&on_axis).residual.valid.count(), 0);
    }

    #[test]
    fn tension_small_in_harmonic_cases() {
        for (p, case) in [
            (ModelParams::new(0.1, 0.1), TensionCase::MuEqual),
            (ModelParams::new(0.1, -0.1), TensionCase::MuOpposite),
        ] {
            let (pair, _) = solved(33, &p);
            let lambda2 = induced_metric(&pair).conformal_factor;
            let r = tension_residual(&TensionInput { g: pair.g.clone(), lambda2, case });
            assert!(r.residual.interior_stats().sup < 1e-3, "{case:?} {}", r.residual.interior_stats().sup);
        }
    }

    #[test]
    fn obstruction_not_applicable() {
        let g = grid(5);
        let pair = WeierstrassPair::from_fns(g, |_| c(1.0, 0.0), |_| c(0.0, 0.0));
        assert_eq!(
            holomorphy_obstruction(&pair, &ModelParams::new(0.1, 0.2), 1e-6).unwrap_err(),
            ObstructionError::NotApplicable(0.1, 0.2)
        );
    }

    #[test]
    fn obstruction_unit_circle_is_degenerate() {
        let g = grid(17);
        let pair = WeierstrassPair::from_fns(g, |_| c(1.0, 0.0), |_| Complex64::from_polar(1.0, 0.7));
        let r = holomorphy_obstruction(&pair, &ModelParams::new(0.1, 0.1), 1e-6).unwrap();
        assert!(r.conformal_factor_sup <= 1e-10);
        assert!(r.alternative_holds);
        assert_eq!(r.verdict, ObstructionVerdict::Degenerate);
    }

    #[test]
    fn obstruction_imaginary_constant_is_invalid() {
        let g = grid(17);
        let pair = WeierstrassPair::from_fns(g, |_| c(1.0, 0.0), |_| c(0.0, 0.3));
        let r = holomorphy_obstruction(&pair, &ModelParams::new(0.1, 0.1), 1e-6).unwrap();
        assert_eq!(r.holomorphy_defect, 0.0);
        assert!(r.g_equation_residual > 1e-3);
        assert!(!r.alternative_holds);
        assert_eq!(r.verdict, ObstructionVerdict::InvalidData);
    }

    /// A real constant `g` forces `psi2 = i f (1 - g^2) / 2`, which only
    /// vanishes for `g = +-1`; the first fundamental form stays positive.
    #[test]
    fn obstruction_real_constant_keeps_metric() {
        let g = grid(17);
        let pair = WeierstrassPair::from_fns(g, |_| c(1.0, 0.0), |_| c(0.5, 0.0));
        let r = holomorphy_obstruction(&pair, &ModelParams::new(0.1, 0.1), 1e-6).unwrap();
        assert!(r.alternative_holds);
        assert!((r.psi2_sup - 0.375).abs() < 1e-15);
        assert!((r.conformal_factor_sup - 0.5625).abs() < 1e-15);
        assert!((r.triple_factor_sup - 0.5625).abs() < 1e-14);
    }

    /// `g = r` real with `f = tan(k v) + i`, `k = c(1 - r^2)`, solves the AdS
    /// system exactly, has holomorphic `g`, and a nondegenerate metric.
    #[test]
    fn holomorphic_gauss_map_with_nondegenerate_metric() {
        let cc = 0.1;
        let g = grid(33);
        for &r in &[0.0, 0.5] {
            let k = cc * (1.0 - r * r);
            let pair = WeierstrassPair::from_fns(g, |z| c((k * z.im).tan(), 1.0), |_| c(r, 0.0));
            let p = ModelParams::new(cc, cc);
            let rep = holomorphy_obstruction(&pair, &p, 1e-5).unwrap();
            assert_eq!(rep.holomorphy_defect, 0.0);
            assert!(rep.system_residual < 1e-5, "{}", rep.system_residual);
            assert!(rep.conformal_factor_sup > 0.5);
            assert_eq!(rep.verdict, ObstructionVerdict::Nondegenerate);
            // and the synthesized surface is maximal
            let t = triple_from_pair(&pair);
            let phi = synthesize(&t, &p, (16, 16));
            assert!(mean_curvature(&phi, &p).stats().sup < 1e-4);
        }
    }

    proptest! {
        #[test]
        fn gauss_map_identities(re in -0.99..0.99f64, th in 0.0..std::f64::consts::TAU) {
            let g = Complex64::from_polar(re.abs(), th);
            let n = normal_from_g(g);
            let scale = n[0] * n[0];
            prop_assert!((-n[0] * n[0] + n[1] * n[1] + n[2] * n[2] + 1.0).abs() < 1e-12 * scale.max(1.0));
            prop_assert!(n[0] > 0.0);
            prop_assert!((project_plus(n) - g).norm() < 1e-12);
        }

        #[test]
        fn gauss_map_is_normal_to_data(fr in -2.0..2.0f64, fi in -2.0..2.0f64, r in 0.0..0.95f64, th in 0.0..6.3f64) {
            let f = c(fr, fi);
            let g = Complex64::from_polar(r, th);
            let psi = [f * g, 0.5 * f * (1.0 + g * g), 0.5 * I * f * (1.0 - g * g)];
            let n = normal_from_g(g);
            let dot = -psi[0] * n[0] + psi[1] * n[1] + psi[2] * n[2];
            prop_assert!(dot.norm() < 1e-12 * (1.0 + f.norm()) * n[0]);
        }
    }
}

//! Reconstruction of the immersion `phi = (x0, x1, x2)` from Weierstrass data.
//!
//! `x2` is a plain potential of `psi2`. With `x2` known, `x0` and `x1` are
//! potentials of `exp(mu1 x2) psi0` and `exp(mu2 x2) psi1`.

use std::io::{self, Write};

use crate::complex_grid::{
    potential_from_form, ComplexField, DomainGrid, Field, GridCalculus, Mask, RealField,
};
use crate::lie_group::{GroupElement, ModelParams};
use crate::weierstrass::{pair_from_triple, SpinorTriple, WeierstrassPair};

/// Cell circulation above which the result is flagged path dependent.
pub const LOOP_RESIDUAL_WARN: f64 = 1e-6;

/// Relative cutoff for the degenerate mask, times the median conformal factor.
pub const DEGENERACY_RATIO: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct ImmersionField {
    pub x0: RealField,
    pub x1: RealField,
    pub x2: RealField,
    /// `f != 0`, `|g| < 1` and conformal factor above the degeneracy cutoff.
    pub regular_mask: Mask,
    pub basepoint: (usize, usize),
    /// Largest cell circulation of the forms for `x0, x1, x2`.
    pub loop_residuals: [f64; 3],
    pub path_dependent: bool,
}

impl ImmersionField {
    pub fn grid(&self) -> &DomainGrid {
        self.x0.grid()
    }

    pub fn point(&self, i: usize, j: usize) -> GroupElement {
        GroupElement::new(self.x0.get(i, j), self.x1.get(i, j), self.x2.get(i, j))
    }

    pub fn components(&self) -> [&RealField; 3] {
        [&self.x0, &self.x1, &self.x2]
    }

    /// Applies `q -> L_a q` pointwise.
    pub fn left_translate(&self, p: &ModelParams, a: GroupElement) -> ImmersionField {
        let g = *self.grid();
        let moved: Vec<GroupElement> = (0..g.len())
            .map(|k| {
                let (i, j) = g.coords(k);
                p.group_mul(a, self.point(i, j))
            })
            .collect();
        let pick = |f: fn(&GroupElement) -> f64| Field::new(g, moved.iter().map(f).collect()).expect("same grid");
        ImmersionField {
            x0: pick(|q| q.x0),
            x1: pick(|q| q.x1),
            x2: pick(|q| q.x2),
            ..self.clone()
        }
    }
}

#[derive(Clone, Debug)]
pub struct MetricReport {
    /// Coefficient of `dz dzbar` in the first fundamental form.
    pub conformal_factor: RealField,
    pub degenerate_mask: Mask,
    pub threshold: f64,
}

/// `x2 = 2 Re int psi2 dz`, with the cell loop residual.
pub fn height_potential(t: &SpinorTriple, basepoint: (usize, usize)) -> (RealField, f64) {
    let p = potential_from_form(&t.psi2, basepoint);
    (p.values, p.loop_residual)
}

/// `phi = 2 Re int (exp(mu1 x2) psi0, exp(mu2 x2) psi1, psi2) dz`, normalised
/// to vanish at `basepoint`.
pub fn synthesize(t: &SpinorTriple, p: &ModelParams, basepoint: (usize, usize)) -> ImmersionField {
    let (x2, r2) = height_potential(t, basepoint);
    let twisted = |psi: &ComplexField, mu: f64| psi.zip_with(&x2, |w, h| w * (mu * h).exp());
    let p0 = potential_from_form(&twisted(&t.psi0, p.mu1), basepoint);
    let p1 = potential_from_form(&twisted(&t.psi1, p.mu2), basepoint);
    let loop_residuals = [p0.loop_residual, p1.loop_residual, r2];
    let path_dependent = loop_residuals.iter().any(|r| !(*r <= LOOP_RESIDUAL_WARN));

    let extraction = pair_from_triple(t);
    let metric = metric_from_triple(t);
    let regular_mask = Field::from_fn(*t.grid(), |i, j, _| {
        extraction.defined.get(i, j) && extraction.pair.g.get(i, j).norm() < 1.0 && !metric.degenerate_mask.get(i, j)
    });
    ImmersionField { x0: p0.values, x1: p1.values, x2, regular_mask, basepoint, loop_residuals, path_dependent }
}

fn median(values: &[f64]) -> f64 {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) }
}

fn report_from_factor(conformal_factor: RealField) -> MetricReport {
    let threshold = DEGENERACY_RATIO * median(conformal_factor.samples());
    let degenerate_mask = conformal_factor.map(|x| !(x > threshold));
    MetricReport { conformal_factor, degenerate_mask, threshold }
}

/// `I = |f|^2 (1 - |g|^2)^2 dz dzbar`.
pub fn induced_metric(pair: &WeierstrassPair) -> MetricReport {
    report_from_factor(pair.f.zip_with(&pair.g, |f, g| f.norm_sqr() * (1.0 - g.norm_sqr()).powi(2)))
}

/// Same factor from the triple, `2(-|psi0|^2 + |psi1|^2 + |psi2|^2)`.
pub fn metric_from_triple(t: &SpinorTriple) -> MetricReport {
    report_from_factor(t.metric_factor())
}

/// Derivatives `phi_u`, `phi_v` expressed in the left-invariant frame.
pub(crate) fn frame_tangents(phi: &ImmersionField, p: &ModelParams) -> ([RealField; 3], [RealField; 3]) {
    let du = phi.components().map(|c| c.d_u());
    let dv = phi.components().map(|c| c.d_v());
    let scale = |d: &[RealField; 3]| -> [RealField; 3] {
        let [a, b, c] = d;
        [
            a.zip_with(&phi.x2, |x, h| x * (-p.mu1 * h).exp()),
            b.zip_with(&phi.x2, |x, h| x * (-p.mu2 * h).exp()),
            c.clone(),
        ]
    };
    (scale(&du), scale(&dv))
}

pub(crate) fn lorentz(a: [f64; 3], b: [f64; 3]) -> f64 {
    -a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Pullback `E du^2 + 2F du dv + G dv^2` of the left-invariant metric.
#[derive(Clone, Debug)]
pub struct FirstFundamentalForm {
    pub e: RealField,
    pub f: RealField,
    pub g: RealField,
}

pub fn first_fundamental_form(phi: &ImmersionField, p: &ModelParams) -> FirstFundamentalForm {
    let (au, av) = frame_tangents(phi, p);
    let grid = *phi.grid();
    let at = |a: &[RealField; 3], i, j| [a[0].get(i, j), a[1].get(i, j), a[2].get(i, j)];
    FirstFundamentalForm {
        e: Field::from_fn(grid, |i, j, _| lorentz(at(&au, i, j), at(&au, i, j))),
        f: Field::from_fn(grid, |i, j, _| lorentz(at(&au, i, j), at(&av, i, j))),
        g: Field::from_fn(grid, |i, j, _| lorentz(at(&av, i, j), at(&av, i, j))),
    }
}

/// One `v` line per sample, quads over cells whose four corners are regular.
pub fn write_obj<W: Write>(phi: &ImmersionField, mut out: W) -> io::Result<()> {
    let g = *phi.grid();
    writeln!(out, "# maxsurf {}x{}", g.nu, g.nv)?;
    for k in 0..g.len() {
        writeln!(
            out,
            "v {:.16e} {:.16e} {:.16e}",
            phi.x0.samples()[k],
            phi.x1.samples()[k],
            phi.x2.samples()[k]
        )?;
    }
    let m = &phi.regular_mask;
    for j in 0..g.nv - 1 {
        for i in 0..g.nu - 1 {
            if m.get(i, j) && m.get(i + 1, j) && m.get(i + 1, j + 1) && m.get(i, j + 1) {
                let v = |i, j| g.index(i, j) + 1;
                writeln!(out, "f {} {} {} {}", v(i, j), v(i + 1, j), v(i + 1, j + 1), v(i, j + 1))?;
            }
        }
    }
    Ok(())
}

/// Columns `u,v,x0,x1,x2,regular`.
pub fn write_csv<W: Write>(phi: &ImmersionField, mut out: W) -> io::Result<()> {
    let g = *phi.grid();
    writeln!(out, "u,v,x0,x1,x2,regular")?;
    for k in 0..g.len() {
        let (i, j) = g.coords(k);
        let z = g.point(i, j);
        writeln!(
            out,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}",
            z.re,
            z.im,
            phi.x0.samples()[k],
            phi.x1.samples()[k],
            phi.x2.samples()[k],
            u8::from(phi.regular_mask.samples()[k])
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex_grid::NormStats;
    use crate::weierstrass::{solve_dbar_system, triple_from_pair, SolverOptions};
    use num_complex::Complex64;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn grid(n: usize) -> DomainGrid {
        DomainGrid::centered_square(0.5, n).unwrap()
    }

    fn centre(g: &DomainGrid) -> (usize, usize) {
        (g.nu / 2, g.nv / 2)
    }

    fn max_abs_diff(a: &RealField, b: impl Fn(Complex64) -> f64) -> f64 {
        let g = *a.grid();
        (0..g.len()).fold(0.0, |m, k| {
            let (i, j) = g.coords(k);
            m.max((a.get(i, j) - b(g.point(i, j))).abs())
        })
    }

    #[test]
    fn height_potential_examples() {
        let g = grid(9);
        let mk = |psi2: ComplexField| SpinorTriple {
            psi0: Field::constant(g, c(0.0, 0.0)),
            psi1: Field::constant(g, c(0.0, 0.0)),
            psi2,
        };
        let (x2, r) = height_potential(&mk(Field::constant(g, c(0.0, 0.5))), centre(&g));
        assert!(max_abs_diff(&x2, |z| -z.im) < 1e-15);
        assert!(r < 1e-15);
        let (x2, _) = height_potential(&mk(Field::constant(g, c(0.0, 0.0))), centre(&g));
        assert!(x2.samples().iter().all(|&x| x == 0.0));
        // trapezoid on a linear integrand is exact
        let (x2, _) = height_potential(&mk(Field::from_fn(g, |_, _, z| z * 0.5)), centre(&g));
        assert!(max_abs_diff(&x2, |z| 0.5 * (z.re * z.re - z.im * z.im)) < 1e-15);
    }

    #[test]
    fn spacelike_plane() {
        let g = grid(9);
        let t = triple_from_pair(&WeierstrassPair::from_fns(g, |_| c(1.0, 0.0), |_| c(0.0, 0.0)));
        let phi = synthesize(&t, &ModelParams::new(0.0, 0.0), centre(&g));
        assert!(max_abs_diff(&phi.x0, |_| 0.0) < 1e-15);
        assert!(max_abs_diff(&phi.x1, |z| z.re) < 1e-15);
        assert!(max_abs_diff(&phi.x2, |z| -z.im) < 1e-15);
        assert_eq!(phi.regular_mask.count(), g.len());
        assert!(!phi.path_dependent);
    }

    #[test]
    fn minkowski_matches_closed_form() {
        // f = 1, g = z: phi = (Re z^2, Re(z + z^3/3), Re(i(z - z^3/3)))
        let g = grid(33);
        let t = triple_from_pair(&WeierstrassPair::from_fns(g, |_| c(1.0, 0.0), |z| z));
        let phi = synthesize(&t, &ModelParams::new(0.0, 0.0), centre(&g));
        let h2 = g.spacing().powi(2);
        assert!(max_abs_diff(&phi.x0, |z| (z * z).re) < 1e-14);
        assert!(max_abs_diff(&phi.x1, |z| (z + z * z * z / 3.0).re) < h2);
        assert!(max_abs_diff(&phi.x2, |z| (c(0.0, 1.0) * (z - z * z * z / 3.0)).re) < h2);
    }

    #[test]
    fn triangularity() {
        let g = grid(17);
        let t = triple_from_pair(&WeierstrassPair::from_fns(g, |z| 1.0 + z, |z| 0.3 * z));
        let mut t2 = t.clone();
        t2.psi0 = t2.psi0.map(|x| x * 3.0 + 1.0);
        t2.psi1 = t2.psi1.map(|x| x.conj());
        let p = ModelParams::new(0.4, -0.7);
        assert_eq!(synthesize(&t, &p, (3, 5)).x2, synthesize(&t2, &p, (3, 5)).x2);
    }

    #[test]
    fn basepoint_shift_is_left_translation() {
        let g = grid(33);
        let t = triple_from_pair(&WeierstrassPair::from_fns(g, |_| c(1.0, 0.0), |z| z));
        let p = ModelParams::new(0.0, 0.0);
        let a = synthesize(&t, &p, centre(&g));
        let b = synthesize(&t, &p, (3, 29));
        let shifted = a.left_translate(&p, p.group_inverse(a.point(3, 29)));
        for (x, y) in shifted.components().iter().zip(b.components()) {
            assert!(x.zip_with(y, |s, t| (s - t).abs()).samples().iter().all(|&d| d < 1e-8));
        }
    }

    #[test]
    fn basepoint_shift_on_solved_data() {
        let g = grid(33);
        let p = ModelParams::new(0.1, 0.1);
        let seed = WeierstrassPair::from_fns(g, |_| c(1.0, 0.0), |z| 0.3 * z);
        let sol = solve_dbar_system(&seed, &p, SolverOptions::default()).unwrap();
        let a = synthesize(&sol.triple, &p, centre(&g));
        let b = synthesize(&sol.triple, &p, (3, 29));
        let shifted = a.left_translate(&p, p.group_inverse(a.point(3, 29)));
        // loops close only to discretisation accuracy here
        let tol = 50.0 * g.spacing().powi(2) * (a.loop_residuals[0] + 1.0);
        for (x, y) in shifted.components().iter().zip(b.components()) {
            let d = x.zip_with(y, |s, t| s - t);
            assert!(NormStats::real(&d, &Mask::all_set(g)).sup < tol);
        }
    }

    #[test]
    fn induced_metric_examples() {
        let g = grid(9);
        let m = induced_metric(&WeierstrassPair::from_fns(g, |_| c(1.0, 0.0), |_| c(0.0, 0.0)));
        assert!(m.conformal_factor.samples().iter().all(|&x| x == 1.0));
        assert_eq!(m.degenerate_mask.count(), 0);

        let mut pair = WeierstrassPair::from_fns(g, |_| c(1.0, 0.0), |z| 0.5 * z);
        pair.g.set(2, 2, c(0.6, 0.8));
        let m = induced_metric(&pair);
        assert_eq!(m.conformal_factor.get(2, 2), 0.0);
        assert!(m.degenerate_mask.get(2, 2));
        assert_eq!(m.degenerate_mask.count(), 1);

        let pair = WeierstrassPair::from_fns(g, |z| (z * 2.0).exp(), |z| z * c(0.3, 0.8));
        let a = induced_metric(&pair).conformal_factor;
        let b = metric_from_triple(&triple_from_pair(&pair)).conformal_factor;
        assert!(a.zip_with(&b, |x, y| (x - y).abs()).samples().iter().all(|&d| d < 1e-12));
    }

    fn conformality_defect(n: usize, p: &ModelParams) -> f64 {
        let g = grid(n);
        let seed = WeierstrassPair::from_fns(g, |_| c(1.0, 0.0), |z| 0.3 * z);
        let sol = solve_dbar_system(&seed, p, SolverOptions::default()).unwrap();
        let phi = synthesize(&sol.triple, p, centre(&g));
        let ff = first_fundamental_form(&phi, p);
        let lam = induced_metric(&sol.pair).conformal_factor;
        let mask = phi.regular_mask.and(&g.interior_mask());
        let defect = Field::from_fn(g, |i, j, _| {
            let (e, f, gg, l) = (ff.e.get(i, j), ff.f.get(i, j), ff.g.get(i, j), lam.get(i, j));
            (e - l).abs().max((gg - l).abs()).max(f.abs())
        });
        NormStats::real(&defect, &mask).sup
    }

    #[test]
    fn pullback_is_conformal_and_spacelike() {
        let p = ModelParams::new(0.1, 0.2);
        let coarse = conformality_defect(17, &p);
        let fine = conformality_defect(33, &p);
        assert!(fine < 1e-3, "{fine}");
        assert!(crate::complex_grid::observed_order(coarse, fine) > 1.5, "{coarse} {fine}");
    }

    #[test]
    fn exports() {
        let g = grid(4);
        let mut pair = WeierstrassPair::from_fns(g, |_| c(1.0, 0.0), |_| c(0.0, 0.0));
        pair.f.set(3, 3, c(0.0, 0.0));
        let phi = synthesize(&triple_from_pair(&pair), &ModelParams::new(0.0, 0.0), (0, 0));
        let mut obj = Vec::new();
        write_obj(&phi, &mut obj).unwrap();
        let obj = String::from_utf8(obj).unwrap();
        assert_eq!(obj.lines().filter(|l| l.starts_with("v ")).count(), 16);
        // the corner cell loses its face
        assert_eq!(obj.lines().filter(|l| l.starts_with("f ")).count(), 8);
        assert!(obj.contains("f 1 2 6 5"));

        let mut csv = Vec::new();
        write_csv(&phi, &mut csv).unwrap();
        let csv = String::from_utf8(csv).unwrap();
        assert_eq!(csv.lines().next(), Some("u,v,x0,x1,x2,regular"));
        assert_eq!(csv.lines().count(), 17);
        assert!(csv.lines().last().unwrap().ends_with(",0"));
    }
}

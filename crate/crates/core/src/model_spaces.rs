//! Isometric models of the special members of the family.
//!
//! G(c,c) is the flat chart of anti-de Sitter space: the region
//! `c(u1 + u2) > 0` of the quadric `-u0^2 - u1^2 + u2^2 + u3^2 = -1/c^2` in
//! E^4_2, and also a Poincare-style half space. The maps here are exact; the
//! pullback helpers differentiate them numerically so the isometries can be
//! checked rather than assumed.

use std::io::{self, Write};

use serde::Serialize;
use thiserror::Error;

use crate::lie_group::{CurvatureReport, GroupElement, ModelParams, SpaceClass};
use crate::synthesis::ImmersionField;

/// A point of E^4_2 with product `-du0^2 - du1^2 + du2^2 + du3^2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct QuadricPoint {
    pub u0: f64,
    pub u1: f64,
    pub u2: f64,
    pub u3: f64,
}

impl QuadricPoint {
    pub fn new(u0: f64, u1: f64, u2: f64, u3: f64) -> Self {
        QuadricPoint { u0, u1, u2, u3 }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.u0, self.u1, self.u2, self.u3]
    }

    /// `|<u,u> + 1/c^2|`.
    pub fn quadric_residual(self, c: f64) -> f64 {
        (e42_inner(self.to_array(), self.to_array()) + 1.0 / (c * c)).abs()
    }

    /// `c (u1 + u2)`; the flat chart covers the points where this is positive.
    pub fn region_sign(self, c: f64) -> f64 {
        c * (self.u1 + self.u2)
    }
}

#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum ModelError {
    #[error("the curvature scale c must be finite and nonzero, got {0}")]
    BadScale(f64),
    #[error("point outside the flat chart: c(u1+u2) = {0} is not positive")]
    RegionViolation(f64),
}

fn check_scale(c: f64) -> Result<(), ModelError> {
    if c == 0.0 || !c.is_finite() {
        return Err(ModelError::BadScale(c));
    }
    Ok(())
}

fn e42_inner(a: [f64; 4], b: [f64; 4]) -> f64 {
    -a[0] * b[0] - a[1] * b[1] + a[2] * b[2] + a[3] * b[3]
}

/// Embeds a chart point of G(c,c) into the quadric. Uses
/// `c(u1+u2) = e^{-c x2}`, `u0 = x0 e^{-c x2}`, `u3 = x1 e^{-c x2}`, and the
/// quadric itself for `u2 - u1`.
pub fn ads_chart_to_quadric(q: GroupElement, c: f64) -> Result<QuadricPoint, ModelError> {
    check_scale(c)?;
    let s = (-c * q.x2).exp();
    let u0 = q.x0 * s;
    let u3 = q.x1 * s;
    let sum = s / c;
    let diff = (u0 * u0 - u3 * u3 - 1.0 / (c * c)) * c / s;
    Ok(QuadricPoint { u0, u1: 0.5 * (sum - diff), u2: 0.5 * (sum + diff), u3 })
}

/// Chart coordinates of a quadric point:
/// `x0 = u0 / (c(u1+u2))`, `x1 = u3 / (c(u1+u2))`, `x2 = -ln(c(u1+u2)) / c`.
pub fn ads_quadric_to_chart(u: QuadricPoint, c: f64) -> Result<GroupElement, ModelError> {
    check_scale(c)?;
    let r = u.region_sign(c);
    if r.is_nan() || r <= 0.0 {
        return Err(ModelError::RegionViolation(r));
    }
    Ok(GroupElement { x0: u.u0 / r, x1: u.u3 / r, x2: -r.ln() / c })
}

/// Half-space coordinates `(c x0, c x1, e^{c x2})`, in which the metric of
/// G(c,c) reads `(-dy0^2 + dy1^2 + dy2^2) / (c y2)^2`.
pub fn half_space_map(q: GroupElement, c: f64) -> Result<[f64; 3], ModelError> {
    check_scale(c)?;
    Ok([c * q.x0, c * q.x1, (c * q.x2).exp()])
}

/// Pullback of a metric along `map` at `q`, with the tangent vectors taken by
/// central differences of step `h`.
fn pullback<const N: usize>(
    q: GroupElement,
    h: f64,
    map: impl Fn(GroupElement) -> [f64; N],
    inner: impl Fn(&[f64; N], [f64; N], [f64; N]) -> f64,
) -> [[f64; 3]; 3] {
    let base = map(q);
    let x = q.to_array();
    let tangent = |k: usize| {
        let (mut a, mut b) = (x, x);
        a[k] += h;
        b[k] -= h;
        let (fa, fb) = (map(GroupElement::new(a[0], a[1], a[2])), map(GroupElement::new(b[0], b[1], b[2])));
        std::array::from_fn(|n| (fa[n] - fb[n]) / (2.0 * h))
    };
    let t: [[f64; N]; 3] = [tangent(0), tangent(1), tangent(2)];
    std::array::from_fn(|i| std::array::from_fn(|j| inner(&base, t[i], t[j])))
}

/// Finite-difference pullback of the E^4_2 product along [`ads_chart_to_quadric`].
pub fn quadric_pullback(q: GroupElement, c: f64, h: f64) -> Result<[[f64; 3]; 3], ModelError> {
    check_scale(c)?;
    Ok(pullback(
        q,
        h,
        |p| ads_chart_to_quadric(p, c).map(QuadricPoint::to_array).unwrap_or([f64::NAN; 4]),
        |_, a, b| e42_inner(a, b),
    ))
}

/// Finite-difference pullback of the half-space metric along [`half_space_map`].
pub fn half_space_pullback(q: GroupElement, c: f64, h: f64) -> Result<[[f64; 3]; 3], ModelError> {
    check_scale(c)?;
    Ok(pullback(
        q,
        h,
        |p| half_space_map(p, c).unwrap_or([f64::NAN; 3]),
        |y, a, b| (-a[0] * b[0] + a[1] * b[1] + a[2] * b[2]) / (c * c * y[2] * y[2]),
    ))
}

/// Largest entrywise gap between a 3x3 metric and the diagonal metric of
/// G(c,c) at `q`.
pub fn metric_defect(m: &[[f64; 3]; 3], q: GroupElement, c: f64) -> f64 {
    let diag = ModelParams::new(c, c).metric_coefficients(q);
    let mut worst = 0.0f64;
    for i in 0..3 {
        for j in 0..3 {
            let want = if i == j { diag[i] } else { 0.0 };
            worst = worst.max((m[i][j] - want).abs());
        }
    }
    worst
}

/// Quadric image of every sample of an immersion into G(c,c). Non-regular
/// samples map to NaN.
pub fn immersion_to_quadric(phi: &ImmersionField, c: f64) -> Result<Vec<QuadricPoint>, ModelError> {
    check_scale(c)?;
    let nan = QuadricPoint::new(f64::NAN, f64::NAN, f64::NAN, f64::NAN);
    let g = phi.grid();
    let mut out = Vec::with_capacity(g.len());
    for j in 0..g.nv {
        for i in 0..g.nu {
            out.push(if phi.regular_mask.get(i, j) { ads_chart_to_quadric(phi.point(i, j), c)? } else { nan });
        }
    }
    Ok(out)
}

/// Largest quadric residual over the finite points.
pub fn max_quadric_residual(points: &[QuadricPoint], c: f64) -> f64 {
    points.iter().map(|p| p.quadric_residual(c)).filter(|r| !r.is_nan()).fold(0.0, f64::max)
}

/// CSV with header `u0,u1,u2,u3`, one row per grid sample in row-major order.
pub fn write_quadric_csv<W: Write>(points: &[QuadricPoint], mut out: W) -> io::Result<()> {
    writeln!(out, "u0,u1,u2,u3")?;
    for p in points {
        writeln!(out, "{:.16e},{:.16e},{:.16e},{:.16e}", p.u0, p.u1, p.u2, p.u3)?;
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Classification {
    pub class: SpaceClass,
    pub name: &'static str,
    pub description: &'static str,
    pub curvatures: CurvatureReport,
}

pub fn classify(p: &ModelParams) -> Classification {
    let class = p.classify();
    Classification { class, name: class.name(), description: class.description(), curvatures: p.sectional_curvatures() }
}

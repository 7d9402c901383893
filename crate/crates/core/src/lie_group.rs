//! The solvable group G(mu1, mu2) in closed form.
//!
//! Points are global coordinates (x0, x1, x2) on R^3 with the Lorentzian metric
//! `-e^{-2 mu1 x2} dx0^2 + e^{-2 mu2 x2} dx1^2 + dx2^2`. The Lie algebra is
//! identified with Minkowski 3-space through the orthonormal basis
//! {E0, E1, E2}, E0 timelike. Everything here is exact; the numerical modules
//! use it as their reference.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::Serialize;

/// The pair (mu1, mu2) selecting the spacetime G(mu1, mu2).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ModelParams {
    pub mu1: f64,
    pub mu2: f64,
}

/// A point of the group in global coordinates.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct GroupElement {
    pub x0: f64,
    pub x1: f64,
    pub x2: f64,
}

/// Coefficients of `y0 E0 + y1 E1 + y2 E2` in the Lie algebra.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct AlgebraVector {
    pub y0: f64,
    pub y1: f64,
    pub y2: f64,
}

/// Named members of the family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum SpaceClass {
    /// G(0,0), Minkowski 3-space.
    Minkowski,
    /// G(c,c), flat chart of anti-de Sitter 3-space.
    AntiDeSitter,
    /// G(0,c), hyperbolic plane times the timeline.
    HyperbolicTimesTimeline,
    /// G(c,0), anti-de Sitter plane times the real line.
    AdsPlaneTimesLine,
    /// G(c,-c).
    OppositeWarp,
    Generic,
}

impl SpaceClass {
    pub fn description(self) -> &'static str {
        match self {
            SpaceClass::Minkowski => "Minkowski 3-space E^3_1",
            SpaceClass::AntiDeSitter => "anti-de Sitter 3-space H^3_1(-c^2), flat chart",
            SpaceClass::HyperbolicTimesTimeline => {
                "direct product H^2(-c^2) x E^1_1 of the hyperbolic plane and the timeline"
            }
            SpaceClass::AdsPlaneTimesLine => {
                "direct product H^2_1(-c^2) x E^1 of anti-de Sitter 2-space and the real line"
            }
            SpaceClass::OppositeWarp => "homogeneous spacetime G(c,-c)",
            SpaceClass::Generic => "generic member of the family G(mu1,mu2)",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SpaceClass::Minkowski => "Minkowski",
            SpaceClass::AntiDeSitter => "AntiDeSitter",
            SpaceClass::HyperbolicTimesTimeline => "H2xE1_1",
            SpaceClass::AdsPlaneTimesLine => "H2_1xE1",
            SpaceClass::OppositeWarp => "GcMinusC",
            SpaceClass::Generic => "Generic",
        }
    }
}

impl fmt::Display for SpaceClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Sectional curvatures of the coordinate frame planes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CurvatureReport {
    pub k01: f64,
    pub k12: f64,
    pub k02: f64,
    pub constant_curvature: bool,
    pub space_class: SpaceClass,
}

impl GroupElement {
    pub const IDENTITY: GroupElement = GroupElement { x0: 0.0, x1: 0.0, x2: 0.0 };

    pub fn new(x0: f64, x1: f64, x2: f64) -> Self {
        GroupElement { x0, x1, x2 }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x0, self.x1, self.x2]
    }
}

impl AlgebraVector {
    pub const ZERO: AlgebraVector = AlgebraVector { y0: 0.0, y1: 0.0, y2: 0.0 };
    pub const E0: AlgebraVector = AlgebraVector { y0: 1.0, y1: 0.0, y2: 0.0 };
    pub const E1: AlgebraVector = AlgebraVector { y0: 0.0, y1: 1.0, y2: 0.0 };
    pub const E2: AlgebraVector = AlgebraVector { y0: 0.0, y1: 0.0, y2: 1.0 };

    pub fn new(y0: f64, y1: f64, y2: f64) -> Self {
        AlgebraVector { y0, y1, y2 }
    }

    /// Basis vector `E_i`.
    ///
    /// Panics if `i > 2`.
    pub fn basis(i: usize) -> Self {
        match i {
            0 => Self::E0,
            1 => Self::E1,
            2 => Self::E2,
            _ => panic!("frame index {i} out of range"),
        }
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        AlgebraVector::new(a[0], a[1], a[2])
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.y0, self.y1, self.y2]
    }

    /// Lorentzian product with signature (-,+,+).
    pub fn inner(self, other: AlgebraVector) -> f64 {
        -self.y0 * other.y0 + self.y1 * other.y1 + self.y2 * other.y2
    }

    pub fn max_abs(self) -> f64 {
        self.y0.abs().max(self.y1.abs()).max(self.y2.abs())
    }
}

impl Add for AlgebraVector {
    type Output = AlgebraVector;
    fn add(self, o: AlgebraVector) -> AlgebraVector {
        AlgebraVector::new(self.y0 + o.y0, self.y1 + o.y1, self.y2 + o.y2)
    }
}

impl Sub for AlgebraVector {
    type Output = AlgebraVector;
    fn sub(self, o: AlgebraVector) -> AlgebraVector {
        AlgebraVector::new(self.y0 - o.y0, self.y1 - o.y1, self.y2 - o.y2)
    }
}

impl Neg for AlgebraVector {
    type Output = AlgebraVector;
    fn neg(self) -> AlgebraVector {
        AlgebraVector::new(-self.y0, -self.y1, -self.y2)
    }
}

impl Mul<AlgebraVector> for f64 {
    type Output = AlgebraVector;
    fn mul(self, v: AlgebraVector) -> AlgebraVector {
        AlgebraVector::new(self * v.y0, self * v.y1, self * v.y2)
    }
}

impl ModelParams {
    pub fn new(mu1: f64, mu2: f64) -> Self {
        ModelParams { mu1, mu2 }
    }

    pub fn is_finite(&self) -> bool {
        self.mu1.is_finite() && self.mu2.is_finite()
    }

    /// `a . b = (a0 + e^{mu1 a2} b0, a1 + e^{mu2 a2} b1, a2 + b2)`.
    pub fn group_mul(&self, a: GroupElement, b: GroupElement) -> GroupElement {
        GroupElement {
            x0: a.x0 + (self.mu1 * a.x2).exp() * b.x0,
            x1: a.x1 + (self.mu2 * a.x2).exp() * b.x1,
            x2: a.x2 + b.x2,
        }
    }

    pub fn group_inverse(&self, a: GroupElement) -> GroupElement {
        GroupElement {
            x0: -(-self.mu1 * a.x2).exp() * a.x0,
            x1: -(-self.mu2 * a.x2).exp() * a.x1,
            x2: -a.x2,
        }
    }

    /// Diagonal of the metric tensor at `q` in the coordinate basis.
    pub fn metric_coefficients(&self, q: GroupElement) -> [f64; 3] {
        [
            -(-2.0 * self.mu1 * q.x2).exp(),
            (-2.0 * self.mu2 * q.x2).exp(),
            1.0,
        ]
    }

    /// Scale factors taking coordinate velocity components to frame
    /// components: `e0 = e^{mu1 x2} d/dx0`, `e1 = e^{mu2 x2} d/dx1`, `e2 = d/dx2`.
    pub fn frame_scaling(&self, x2: f64) -> [f64; 3] {
        [(-self.mu1 * x2).exp(), (-self.mu2 * x2).exp(), 1.0]
    }

    /// Lie bracket; `[E0,E1] = 0`, `[E1,E2] = -mu2 E1`, `[E2,E0] = mu1 E0`.
    pub fn bracket(&self, x: AlgebraVector, y: AlgebraVector) -> AlgebraVector {
        AlgebraVector {
            y0: self.mu1 * (x.y2 * y.y0 - x.y0 * y.y2),
            y1: self.mu2 * (x.y2 * y.y1 - x.y1 * y.y2),
            y2: 0.0,
        }
    }

    /// Metric adjoint of `ad(X)`: `<[X,Y],Z> = <Y, ad(X)^*(Z)>`.
    pub fn ad_star(&self, x: AlgebraVector, z: AlgebraVector) -> AlgebraVector {
        AlgebraVector {
            y0: self.mu1 * x.y2 * z.y0,
            y1: self.mu2 * x.y2 * z.y1,
            y2: self.mu1 * x.y0 * z.y0 - self.mu2 * x.y1 * z.y1,
        }
    }

    /// `U(X,Y) = (ad(X)^* Y + ad(Y)^* X) / 2`.
    pub fn u_operator(&self, x: AlgebraVector, y: AlgebraVector) -> AlgebraVector {
        0.5 * (self.ad_star(x, y) + self.ad_star(y, x))
    }

    /// `nabla_{e_i} e_j` in frame components.
    ///
    /// Obtained from the Koszul formula for left-invariant fields,
    /// `nabla_X Y = ([X,Y] - ad(X)^* Y - ad(Y)^* X) / 2`. The e2 row vanishes:
    /// the coordinate Christoffel symbol `Gamma^0_{20} = -mu1` is cancelled by
    /// the derivative of the frame scaling `e^{mu1 x2}`.
    ///
    /// Panics if an index exceeds 2.
    pub fn connection_coefficient(&self, i: usize, j: usize) -> AlgebraVector {
        let (m1, m2) = (self.mu1, self.mu2);
        match (i, j) {
            (0, 0) => AlgebraVector::new(0.0, 0.0, -m1),
            (0, 1) | (1, 0) => AlgebraVector::ZERO,
            (0, 2) => AlgebraVector::new(-m1, 0.0, 0.0),
            (1, 1) => AlgebraVector::new(0.0, 0.0, m2),
            (1, 2) => AlgebraVector::new(0.0, -m2, 0.0),
            (2, 0) | (2, 1) | (2, 2) => AlgebraVector::ZERO,
            _ => panic!("frame indices ({i},{j}) out of range"),
        }
    }

    /// Covariant derivative of a constant-coefficient (left-invariant) field.
    pub fn covariant(&self, x: AlgebraVector, y: AlgebraVector) -> AlgebraVector {
        let xs = x.to_array();
        let ys = y.to_array();
        let mut out = AlgebraVector::ZERO;
        for (i, xi) in xs.iter().enumerate() {
            for (j, yj) in ys.iter().enumerate() {
                if *xi != 0.0 && *yj != 0.0 {
                    out = out + (xi * yj) * self.connection_coefficient(i, j);
                }
            }
        }
        out
    }

    /// Sectional curvatures `K(e0,e1) = -mu1 mu2`, `K(e1,e2) = -mu2^2`,
    /// `K(e0,e2) = -mu1^2`.
    pub fn sectional_curvatures(&self) -> CurvatureReport {
        let (m1, m2) = (self.mu1, self.mu2);
        let k01 = -m1 * m2;
        let k12 = -m2 * m2;
        let k02 = -m1 * m1;
        CurvatureReport {
            k01,
            k12,
            k02,
            constant_curvature: m1 * m1 == m2 * m2 && m2 * m2 == m1 * m2,
            space_class: self.classify(),
        }
    }

    pub fn classify(&self) -> SpaceClass {
        let (m1, m2) = (self.mu1, self.mu2);
        if m1 == 0.0 && m2 == 0.0 {
            SpaceClass::Minkowski
        } else if m1 == m2 {
            SpaceClass::AntiDeSitter
        } else if m1 == 0.0 {
            SpaceClass::HyperbolicTimesTimeline
        } else if m2 == 0.0 {
            SpaceClass::AdsPlaneTimesLine
        } else if m1 == -m2 {
            SpaceClass::OppositeWarp
        } else {
            SpaceClass::Generic
        }
    }

    /// True when `mu1^2 = mu2^2` with at least one parameter nonzero.
    pub fn has_harmonic_gauss_map_target(&self) -> bool {
        self.mu1 * self.mu1 == self.mu2 * self.mu2 && self.mu1 != 0.0
    }
}

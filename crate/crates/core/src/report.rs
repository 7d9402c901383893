//! The JSON run report.
//!
//! Field order is fixed by the struct layout and every float is written as
//! `{:.16e}`, so the same inputs give the same bytes. Non-finite numbers
//! become `null`.

use serde::{Serialize, Serializer};
use serde_json::value::RawValue;

use crate::complex_grid::NormStats;

/// A float serialized with 17 significant digits.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sci(pub f64);

impl Serialize for Sci {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if !self.0.is_finite() {
            return s.serialize_none();
        }
        let raw = RawValue::from_string(format!("{:.16e}", self.0)).map_err(serde::ser::Error::custom)?;
        raw.serialize(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    NotApplicable,
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub status: Status,
    /// Interior sup-norm.
    pub norm: Option<Sci>,
    pub l2_mean: Option<Sci>,
    pub samples: usize,
    pub threshold: Option<Sci>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Check {
    /// Passes when at least one sample was measured and the sup-norm is
    /// within `threshold`.
    pub fn measured(name: &str, stats: NormStats, threshold: f64) -> Check {
        let pass = stats.count > 0 && stats.sup <= threshold;
        Check {
            name: name.to_string(),
            status: if pass { Status::Pass } else { Status::Fail },
            norm: Some(Sci(stats.sup)),
            l2_mean: Some(Sci(stats.l2_mean)),
            samples: stats.count,
            threshold: Some(Sci(threshold)),
            note: if stats.count == 0 { Some("no valid samples".into()) } else { None },
        }
    }

    pub fn not_applicable(name: &str, note: &str) -> Check {
        Check {
            name: name.to_string(),
            status: Status::NotApplicable,
            norm: None,
            l2_mean: None,
            samples: 0,
            threshold: None,
            note: Some(note.to_string()),
        }
    }

    pub fn failed(&self) -> bool {
        self.status == Status::Fail
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ModelSection {
    pub mu1: Sci,
    pub mu2: Sci,
    pub class: &'static str,
    pub description: &'static str,
    /// `K(e0,e1)`, `K(e1,e2)`, `K(e0,e2)`.
    pub sectional_curvatures: [Sci; 3],
    pub constant_curvature: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct GridSection {
    pub nu: usize,
    pub nv: usize,
    pub u_min: Sci,
    pub u_max: Sci,
    pub v_min: Sci,
    pub v_max: Sci,
}

#[derive(Clone, Debug, Serialize)]
pub struct SeedSection {
    pub f: String,
    pub g: String,
    pub holomorphy_defect: Sci,
    pub nonholomorphic: bool,
    pub degenerate_fraction: Sci,
}

#[derive(Clone, Debug, Serialize)]
pub struct SolverSection {
    pub converged: bool,
    pub iterations: usize,
    pub tol: Sci,
    pub max_iter: usize,
    pub last_step: Sci,
    /// Interior sup of the triple-system residual.
    pub final_residual: Option<Sci>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SynthesisSection {
    pub basepoint: [usize; 2],
    pub loop_residuals: [Sci; 3],
    pub path_dependent: bool,
    pub regular_fraction: Sci,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub model: ModelSection,
    pub grid: GridSection,
    pub seed: SeedSection,
    pub solver: SolverSection,
    pub synthesis: Option<SynthesisSection>,
    pub checks: Vec<Check>,
    pub passed: bool,
}

impl Report {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_use_seventeen_digits() {
        assert_eq!(serde_json::to_string(&Sci(0.1)).unwrap(), "1.0000000000000001e-1");
        assert_eq!(serde_json::to_string(&Sci(-2.0)).unwrap(), "-2.0000000000000000e0");
        assert_eq!(serde_json::to_string(&Sci(f64::NAN)).unwrap(), "null");
        let back: f64 = serde_json::from_str(&serde_json::to_string(&Sci(1.0 / 3.0)).unwrap()).unwrap();
        assert_eq!(back, 1.0 / 3.0);
    }

    #[test]
    fn check_status() {
        let stats = NormStats { sup: 1e-4, l2_mean: 1e-5, count: 10 };
        assert_eq!(Check::measured("a", stats, 1e-3).status, Status::Pass);
        assert_eq!(Check::measured("a", stats, 1e-5).status, Status::Fail);
        let nan = NormStats { sup: f64::NAN, ..stats };
        assert_eq!(Check::measured("a", nan, 1.0).status, Status::Fail);
        let empty = NormStats { sup: 0.0, l2_mean: 0.0, count: 0 };
        assert!(Check::measured("a", empty, 1.0).failed());
        let na = Check::not_applicable("t", "not applicable: mu1^2 != mu2^2");
        assert!(!na.failed());
        let json = serde_json::to_string(&na).unwrap();
        assert!(json.contains("\"status\":\"not_applicable\""), "{json}");
    }
}

//! Run configuration files.
//!
//! A config is a list of `[section]` headers followed by `key = value` lines.
//! Blank lines and lines starting with `#` are ignored. Every key is optional
//! except `mu1` and `mu2`.
//!
//! ```text
//! [model]
//! mu1 = 0.1                 # real
//! mu2 = 0.1
//!
//! [grid]
//! size = 33x33              # samples per axis, at least 8
//! u_min = -0.8              # rectangle, default [-0.8, 0.8]^2
//! u_max = 0.8
//! v_min = -0.8
//! v_max = 0.8
//!
//! [seed]
//! f = 1                     # expression in z, default 1
//! g = 0.3*z                 # default 0
//! # f_csv = f.csv           # or a u,v,re,im sample file; sets the grid
//!
//! [solver]
//! tol = 1e-8
//! max_iter = 200
//!
//! [synthesis]
//! basepoint = 0             # constant expression, snapped to the grid
//!
//! [thresholds]              # pass limits for the verification checks
//! hme = 1e-3
//!
//! [output]
//! dir = out                 # relative to the config file
//! products = mesh, report, fields, quadric
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use thiserror::Error;

use crate::complex_grid::{ComplexField, CsvError, DomainGrid};
use crate::expr::{parse_expression, Expr, ParseError};

/// Fewest samples per axis a config may ask for.
pub const MIN_CONFIG_GRID: usize = 8;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: unknown section [{name}]")]
    UnknownSection { line: usize, name: String },
    #[error("line {line}: unknown key `{key}` in [{section}]")]
    UnknownKey { line: usize, section: String, key: String },
    #[error("line {line}: `{key}` given twice")]
    Duplicate { line: usize, key: String },
    #[error("line {line}: bad value for `{key}`: {message}")]
    Value { line: usize, key: String, message: String },
    #[error("line {line}: expression for `{key}`: {source}")]
    Expression { line: usize, key: String, source: ParseError },
    #[error("missing required key `{0}`")]
    Missing(&'static str),
    #[error("{0}")]
    Invalid(String),
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: CsvError },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Product {
    Mesh,
    Report,
    Fields,
    Quadric,
}

impl Product {
    pub fn name(self) -> &'static str {
        match self {
            Product::Mesh => "mesh",
            Product::Report => "report",
            Product::Fields => "fields",
            Product::Quadric => "quadric",
        }
    }
}

#[derive(Clone, Debug)]
pub enum SeedSource {
    Expression { text: String, expr: Expr },
    Samples { path: PathBuf, field: ComplexField },
}

impl SeedSource {
    pub fn to_field(&self, grid: DomainGrid) -> ComplexField {
        match self {
            SeedSource::Expression { expr, .. } => expr.to_field(grid),
            SeedSource::Samples { field, .. } => field.clone(),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            SeedSource::Expression { text, .. } => text.clone(),
            SeedSource::Samples { path, .. } => format!("csv:{}", path.display()),
        }
    }

    fn expression(text: &str) -> SeedSource {
        SeedSource::Expression { text: text.to_string(), expr: parse_expression(text).expect("literal seed") }
    }
}

/// Pass limits, compared against interior sup-norms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Thresholds {
    pub conformality: f64,
    pub hme: f64,
    pub loop_closure: f64,
    pub harmonic: f64,
    pub mean_curvature: f64,
    pub gauss_pde: f64,
    pub tension: f64,
    pub quadric: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            conformality: 1e-10,
            hme: 1e-3,
            loop_closure: 1e-6,
            harmonic: 1e-3,
            mean_curvature: 5e-3,
            gauss_pde: 1e-3,
            tension: 1e-3,
            quadric: 1e-6,
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub mu1: f64,
    pub mu2: f64,
    pub grid: DomainGrid,
    pub seed_f: SeedSource,
    pub seed_g: SeedSource,
    pub basepoint: Complex64,
    pub tol: f64,
    pub max_iter: usize,
    pub thresholds: Thresholds,
    pub out_dir: PathBuf,
    pub outputs: Vec<Product>,
}

/// Command-line values that replace file keys.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub mu1: Option<f64>,
    pub mu2: Option<f64>,
    pub grid: Option<(usize, usize)>,
    pub out: Option<PathBuf>,
}

/// Parses `<nu>x<nv>`.
pub fn parse_grid_size(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.trim().split_once(['x', 'X']).ok_or_else(|| format!("expected <nu>x<nv>, got `{s}`"))?;
    let nu = a.trim().parse::<usize>().map_err(|e| format!("`{a}`: {e}"))?;
    let nv = b.trim().parse::<usize>().map_err(|e| format!("`{b}`: {e}"))?;
    Ok((nu, nv))
}

const SECTIONS: [(&str, &[&str]); 7] = [
    ("model", &["mu1", "mu2"]),
    ("grid", &["size", "u_min", "u_max", "v_min", "v_max"]),
    ("seed", &["f", "g", "f_csv", "g_csv"]),
    ("solver", &["tol", "max_iter"]),
    ("synthesis", &["basepoint"]),
    (
        "thresholds",
        &["conformality", "hme", "loop", "harmonic", "mean_curvature", "gauss_pde", "tension", "quadric"],
    ),
    ("output", &["dir", "products"]),
];

/// `section.key -> (line, value)` after syntax checks.
type Entries = BTreeMap<String, (usize, String)>;

fn read_entries(text: &str) -> Result<Entries, ConfigError> {
    let mut entries = Entries::new();
    let mut section: Option<&'static str> = None;
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let t = strip_comment(raw).trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        if let Some(rest) = t.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| ConfigError::Syntax { line, message: "unterminated section header".into() })?
                .trim();
            let known = SECTIONS
                .iter()
                .find(|(s, _)| *s == name)
                .ok_or_else(|| ConfigError::UnknownSection { line, name: name.to_string() })?;
            section = Some(known.0);
            continue;
        }
        let (key, value) =
            t.split_once('=').ok_or_else(|| ConfigError::Syntax { line, message: "expected `key = value`".into() })?;
        let (key, value) = (key.trim(), value.trim());
        let sec = section.ok_or_else(|| ConfigError::Syntax { line, message: "key outside any section".into() })?;
        let keys = SECTIONS.iter().find(|(s, _)| *s == sec).map(|(_, k)| *k).unwrap_or(&[]);
        if !keys.contains(&key) {
            return Err(ConfigError::UnknownKey { line, section: sec.to_string(), key: key.to_string() });
        }
        if value.is_empty() {
            return Err(ConfigError::Value { line, key: key.to_string(), message: "empty value".into() });
        }
        let full = format!("{sec}.{key}");
        if entries.contains_key(&full) {
            return Err(ConfigError::Duplicate { line, key: full });
        }
        entries.insert(full, (line, value.to_string()));
    }
    Ok(entries)
}

fn strip_comment(v: &str) -> &str {
    match v.find(" #") {
        Some(k) => &v[..k],
        None => v,
    }
}

struct Lookup<'a> {
    entries: &'a Entries,
}

impl Lookup<'_> {
    fn raw(&self, key: &str) -> Option<(usize, &str)> {
        self.entries.get(key).map(|(l, v)| (*l, v.as_str()))
    }

    fn real(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        let Some((line, v)) = self.raw(key) else { return Ok(None) };
        match v.parse::<f64>() {
            Ok(x) if x.is_finite() => Ok(Some(x)),
            Ok(_) => Err(ConfigError::Value { line, key: key.into(), message: "not finite".into() }),
            Err(e) => Err(ConfigError::Value { line, key: key.into(), message: e.to_string() }),
        }
    }

    fn positive(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        let v = self.real(key)?;
        if let (Some(x), Some((line, _))) = (v, self.raw(key)) {
            if x <= 0.0 {
                return Err(ConfigError::Value { line, key: key.into(), message: "must be positive".into() });
            }
        }
        Ok(v)
    }

    fn expression(&self, key: &str) -> Result<Option<(String, Expr)>, ConfigError> {
        let Some((line, v)) = self.raw(key) else { return Ok(None) };
        let e = parse_expression(v).map_err(|source| ConfigError::Expression { line, key: key.into(), source })?;
        Ok(Some((v.to_string(), e)))
    }
}

fn load_csv(base: &Path, rel: &str) -> Result<(PathBuf, ComplexField), ConfigError> {
    let path = base.join(rel);
    let file = std::fs::File::open(&path).map_err(|source| ConfigError::Io { path: path.clone(), source })?;
    let field = ComplexField::from_csv(std::io::BufReader::new(file))
        .map_err(|source| ConfigError::Csv { path: path.clone(), source })?;
    Ok((path, field))
}

/// Parses config text. Relative paths resolve against `base_dir`.
pub fn parse_config(text: &str, base_dir: &Path, overrides: &Overrides) -> Result<RunConfig, ConfigError> {
    let entries = read_entries(text)?;
    let look = Lookup { entries: &entries };

    let mu1 = match overrides.mu1 {
        Some(x) => x,
        None => look.real("model.mu1")?.ok_or(ConfigError::Missing("model.mu1"))?,
    };
    let mu2 = match overrides.mu2 {
        Some(x) => x,
        None => look.real("model.mu2")?.ok_or(ConfigError::Missing("model.mu2"))?,
    };
    if !(mu1.is_finite() && mu2.is_finite()) {
        return Err(ConfigError::Invalid("mu1 and mu2 must be finite".into()));
    }

    let mut seeds = Vec::new();
    for (name, default) in [("f", "1"), ("g", "0")] {
        let expr_key = format!("seed.{name}");
        let csv_key = format!("seed.{name}_csv");
        let seed = match (look.expression(&expr_key)?, look.raw(&csv_key)) {
            (Some(_), Some((line, _))) => {
                return Err(ConfigError::Value {
                    line,
                    key: csv_key,
                    message: format!("`{expr_key}` is also given"),
                })
            }
            (Some((text, expr)), None) => SeedSource::Expression { text, expr },
            (None, Some((_, rel))) => {
                let (path, field) = load_csv(base_dir, rel)?;
                SeedSource::Samples { path, field }
            }
            (None, None) => SeedSource::expression(default),
        };
        seeds.push(seed);
    }
    let seed_g = seeds.pop().expect("two seeds");
    let seed_f = seeds.pop().expect("two seeds");

    let sampled: Vec<DomainGrid> = [&seed_f, &seed_g]
        .iter()
        .filter_map(|s| match s {
            SeedSource::Samples { field, .. } => Some(*field.grid()),
            _ => None,
        })
        .collect();
    let grid = if let Some(first) = sampled.first() {
        if sampled.iter().any(|g| g != first) {
            return Err(ConfigError::Invalid("f_csv and g_csv sample different grids".into()));
        }
        let conflicting = ["grid.size", "grid.u_min", "grid.u_max", "grid.v_min", "grid.v_max"]
            .iter()
            .find_map(|k| look.raw(k).map(|(l, _)| (l, *k)));
        if let Some((line, key)) = conflicting {
            return Err(ConfigError::Value { line, key: key.into(), message: "grid is fixed by the seed samples".into() });
        }
        if overrides.grid.is_some() {
            return Err(ConfigError::Invalid("--grid cannot override a grid fixed by seed samples".into()));
        }
        *first
    } else {
        let (nu, nv) = match (overrides.grid, look.raw("grid.size")) {
            (Some(size), _) => size,
            (None, Some((line, v))) => {
                parse_grid_size(v).map_err(|message| ConfigError::Value { line, key: "grid.size".into(), message })?
            }
            (None, None) => (33, 33),
        };
        let u_min = look.real("grid.u_min")?.unwrap_or(-0.8);
        let u_max = look.real("grid.u_max")?.unwrap_or(0.8);
        let v_min = look.real("grid.v_min")?.unwrap_or(-0.8);
        let v_max = look.real("grid.v_max")?.unwrap_or(0.8);
        DomainGrid::new(u_min, u_max, v_min, v_max, nu, nv).map_err(|e| ConfigError::Invalid(e.to_string()))?
    };
    if grid.nu < MIN_CONFIG_GRID || grid.nv < MIN_CONFIG_GRID {
        return Err(ConfigError::Invalid(format!(
            "grid {}x{} is below the minimum {MIN_CONFIG_GRID}x{MIN_CONFIG_GRID}",
            grid.nu, grid.nv
        )));
    }

    let tol = look.positive("solver.tol")?.unwrap_or(1e-8);
    let max_iter = match look.raw("solver.max_iter") {
        None => 200,
        Some((line, v)) => match v.parse::<usize>() {
            Ok(n) if n > 0 => n,
            _ => {
                return Err(ConfigError::Value {
                    line,
                    key: "solver.max_iter".into(),
                    message: "expected a positive integer".into(),
                })
            }
        },
    };

    let basepoint = match look.expression("synthesis.basepoint")? {
        None => grid.point(grid.nu / 2, grid.nv / 2),
        Some((_, e)) => {
            let (line, _) = look.raw("synthesis.basepoint").expect("present");
            if e.uses_z() {
                return Err(ConfigError::Value {
                    line,
                    key: "synthesis.basepoint".into(),
                    message: "must be a constant".into(),
                });
            }
            let b = e.eval(Complex64::new(0.0, 0.0));
            if !b.is_finite() {
                return Err(ConfigError::Value { line, key: "synthesis.basepoint".into(), message: "not finite".into() });
            }
            b
        }
    };

    let mut thresholds = Thresholds::default();
    for (key, slot) in [
        ("thresholds.conformality", &mut thresholds.conformality),
        ("thresholds.hme", &mut thresholds.hme),
        ("thresholds.loop", &mut thresholds.loop_closure),
        ("thresholds.harmonic", &mut thresholds.harmonic),
        ("thresholds.mean_curvature", &mut thresholds.mean_curvature),
        ("thresholds.gauss_pde", &mut thresholds.gauss_pde),
        ("thresholds.tension", &mut thresholds.tension),
        ("thresholds.quadric", &mut thresholds.quadric),
    ] {
        if let Some(x) = look.positive(key)? {
            *slot = x;
        }
    }

    let out_dir = match (&overrides.out, look.raw("output.dir")) {
        (Some(p), _) => p.clone(),
        (None, Some((_, v))) => base_dir.join(v),
        (None, None) => base_dir.join("out"),
    };
    let mut outputs = vec![Product::Mesh, Product::Report, Product::Fields, Product::Quadric];
    if let Some((line, v)) = look.raw("output.products") {
        outputs.clear();
        for name in v.split(',').map(str::trim) {
            let p = match name {
                "mesh" => Product::Mesh,
                "report" => Product::Report,
                "fields" => Product::Fields,
                "quadric" => Product::Quadric,
                other => {
                    return Err(ConfigError::Value {
                        line,
                        key: "output.products".into(),
                        message: format!("unknown product `{other}`"),
                    })
                }
            };
            if !outputs.contains(&p) {
                outputs.push(p);
            }
        }
        outputs.sort();
    }

    Ok(RunConfig { mu1, mu2, grid, seed_f, seed_g, basepoint, tol, max_iter, thresholds, out_dir, outputs })
}

/// Reads and parses a config file.
pub fn load_config(path: &Path, overrides: &Overrides) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    parse_config(&text, &base, overrides)
}

//! Solve, synthesize, verify and export in one pass.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use thiserror::Error;

use crate::complex_grid::{to_complex, ComplexField, Mask, NormStats};
use crate::config::{Product, RunConfig};
use crate::lie_group::ModelParams;
use crate::model_spaces::{immersion_to_quadric, max_quadric_residual, write_quadric_csv, QuadricPoint};
use crate::report::{
    Check, GridSection, ModelSection, Report, Sci, SeedSection, SolverSection, SynthesisSection,
};
use crate::synthesis::{induced_metric, synthesize, write_csv, write_obj, ImmersionField};
use crate::verification::{
    gauss_pde_residual, harmonic_residuals, mean_curvature, tension_residual, TensionCase, TensionInput,
};
use crate::weierstrass::{
    hme_residual, seed_warnings, solve_dbar_system, DbarSolution, SeedWarnings, SolveError, SolverOptions,
    WeierstrassPair,
};

/// Process exit codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExitCode {
    Success = 0,
    ChecksFailed = 1,
    ConfigInvalid = 2,
    NoConvergence = 3,
    Io = 4,
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("solver: {0}")]
    Solve(#[from] SolveError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

impl PipelineError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            PipelineError::Solve(SolveError::NoConvergence { .. }) => ExitCode::NoConvergence,
            PipelineError::Solve(_) => ExitCode::ConfigInvalid,
            PipelineError::Io { .. } => ExitCode::Io,
        }
    }
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, fill: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> Result<(), PipelineError> {
    let err = |source| PipelineError::Io { path: path.to_path_buf(), source };
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(err)?;
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    let result = (|| {
        let file = fs::File::create(&tmp)?;
        let mut w = BufWriter::new(file);
        fill(&mut w)?;
        let file = w.into_inner().map_err(|e| e.into_error())?;
        file.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result.map_err(err)
}

pub fn params(cfg: &RunConfig) -> ModelParams {
    ModelParams::new(cfg.mu1, cfg.mu2)
}

pub fn seed_pair(cfg: &RunConfig) -> WeierstrassPair {
    WeierstrassPair { f: cfg.seed_f.to_field(cfg.grid), g: cfg.seed_g.to_field(cfg.grid) }
}

pub fn solve(cfg: &RunConfig) -> Result<DbarSolution, SolveError> {
    solve_dbar_system(&seed_pair(cfg), &params(cfg), SolverOptions { tol: cfg.tol, max_iter: cfg.max_iter })
}

pub fn basepoint_index(cfg: &RunConfig) -> (usize, usize) {
    cfg.grid.nearest_index(cfg.basepoint)
}

pub fn synthesize_solution(cfg: &RunConfig, sol: &DbarSolution) -> ImmersionField {
    synthesize(&sol.triple, &params(cfg), basepoint_index(cfg))
}

/// Residual fields kept for export next to the report.
#[derive(Clone, Debug, Default)]
pub struct ResidualFields {
    pub fields: Vec<(String, ComplexField)>,
}

fn interior(f: &ComplexField) -> NormStats {
    NormStats::complex(f, &f.grid().interior_mask())
}

fn masked(f: &ComplexField, mask: &Mask) -> ComplexField {
    f.zip_with(mask, |v, m| if m { v } else { Complex64::new(f64::NAN, f64::NAN) })
}

fn tension_check(
    p: &ModelParams,
    case: TensionCase,
    pair: &WeierstrassPair,
    threshold: f64,
) -> (Check, Option<ComplexField>) {
    let name = match case {
        TensionCase::MuEqual => "tension_residual(MuEqual)",
        TensionCase::MuOpposite => "tension_residual(MuOpposite)",
    };
    let applies = match case {
        TensionCase::MuEqual => p.mu1 == p.mu2,
        TensionCase::MuOpposite => p.mu1 == -p.mu2,
    };
    if p.mu1 * p.mu1 != p.mu2 * p.mu2 {
        return (Check::not_applicable(name, "not applicable: mu1^2 != mu2^2"), None);
    }
    if p.mu1 == 0.0 {
        return (Check::not_applicable(name, "not applicable: mu1 = mu2 = 0"), None);
    }
    if !applies {
        let note = match case {
            TensionCase::MuEqual => "not applicable: mu1 != mu2",
            TensionCase::MuOpposite => "not applicable: mu1 != -mu2",
        };
        return (Check::not_applicable(name, note), None);
    }
    let t = tension_residual(&TensionInput { g: pair.g.clone(), lambda2: induced_metric(pair).conformal_factor, case });
    let check = Check::measured(name, t.residual.interior_stats(), threshold);
    (check, Some(masked(&t.residual.values, &t.residual.valid)))
}

/// Every verification check on a solved and synthesized surface.
pub fn verify(cfg: &RunConfig, sol: &DbarSolution, phi: &ImmersionField) -> (Vec<Check>, ResidualFields) {
    let p = params(cfg);
    let th = &cfg.thresholds;
    let mut checks = Vec::new();
    let mut out = ResidualFields::default();

    checks.push(Check::measured("conformality", interior(&sol.triple.conformality_residual()), th.conformality));

    let hme = hme_residual(&sol.triple, &p);
    checks.push(Check::measured("hme_residual", NormStats::max_of(&hme.each_ref().map(interior)), th.hme));
    for (k, r) in hme.into_iter().enumerate() {
        out.fields.push((format!("hme_{k}"), r));
    }

    let loop_sup = phi.loop_residuals.iter().fold(0.0f64, |m, &x| if x.is_nan() { x } else { m.max(x) });
    checks.push(Check::measured(
        "loop_closure",
        NormStats { sup: loop_sup, l2_mean: loop_sup, count: cfg.grid.len() },
        th.loop_closure,
    ));

    let regular = phi.regular_mask.and(&cfg.grid.interior_mask());
    let harm = harmonic_residuals(phi, &p);
    let harm_stats = harm.each_ref().map(|r| NormStats::complex(r, &regular));
    checks.push(Check::measured("harmonic_residual", NormStats::max_of(&harm_stats), th.harmonic));
    for (k, r) in harm.into_iter().enumerate() {
        out.fields.push((format!("harmonic_{k}"), masked(&r, &regular)));
    }

    let mc = mean_curvature(phi, &p);
    checks.push(Check::measured("mean_curvature", mc.stats(), th.mean_curvature));
    out.fields.push(("mean_curvature".into(), masked(&to_complex(&mc.h), &mc.valid)));

    let gp = gauss_pde_residual(&sol.pair.g, &sol.pair.f, &p);
    checks.push(Check::measured("gauss_pde_residual", gp.interior_stats(), th.gauss_pde));
    out.fields.push(("gauss_pde".into(), masked(&gp.values, &gp.valid)));

    for (case, file) in [(TensionCase::MuEqual, "tension_mu_equal"), (TensionCase::MuOpposite, "tension_mu_opposite")] {
        let (check, field) = tension_check(&p, case, &sol.pair, th.tension);
        checks.push(check);
        if let Some(f) = field {
            out.fields.push((file.into(), f));
        }
    }

    if is_ads(&p) {
        let q = immersion_to_quadric(phi, p.mu1).expect("nonzero scale");
        let stats = NormStats { sup: max_quadric_residual(&q, p.mu1), l2_mean: 0.0, count: regular_count(phi) };
        let mut check = Check::measured("quadric_residual", stats, th.quadric);
        check.l2_mean = None;
        checks.push(check);
    } else {
        checks.push(Check::not_applicable("quadric_residual", "not applicable: mu1 != mu2 or mu1 = 0"));
    }
    (checks, out)
}

fn regular_count(phi: &ImmersionField) -> usize {
    phi.regular_mask.count()
}

pub fn is_ads(p: &ModelParams) -> bool {
    p.mu1 == p.mu2 && p.mu1 != 0.0
}

fn model_section(p: &ModelParams) -> ModelSection {
    let k = p.sectional_curvatures();
    let class = p.classify();
    ModelSection {
        mu1: Sci(p.mu1),
        mu2: Sci(p.mu2),
        class: class.name(),
        description: class.description(),
        sectional_curvatures: [Sci(k.k01), Sci(k.k12), Sci(k.k02)],
        constant_curvature: k.constant_curvature,
    }
}

fn seed_section(cfg: &RunConfig, w: &SeedWarnings) -> SeedSection {
    SeedSection {
        f: cfg.seed_f.describe(),
        g: cfg.seed_g.describe(),
        holomorphy_defect: Sci(w.holomorphy_defect),
        nonholomorphic: w.nonholomorphic,
        degenerate_fraction: Sci(w.degenerate_fraction),
    }
}

/// Everything a full run produced.
pub struct RunOutcome {
    pub report: Report,
    pub solution: Option<DbarSolution>,
    pub immersion: Option<ImmersionField>,
    pub residuals: ResidualFields,
    pub exit: ExitCode,
}

/// Solve, synthesize and verify without touching the disk. A solver failure
/// still yields a report, with `passed = false`.
pub fn execute(cfg: &RunConfig) -> RunOutcome {
    let p = params(cfg);
    let g = cfg.grid;
    let grid = GridSection {
        nu: g.nu,
        nv: g.nv,
        u_min: Sci(g.u_min),
        u_max: Sci(g.u_max),
        v_min: Sci(g.v_min),
        v_max: Sci(g.v_max),
    };
    let seed = seed_pair(cfg);
    let warnings = seed_warnings(&seed);
    match solve(cfg) {
        Ok(sol) => {
            let phi = synthesize_solution(cfg, &sol);
            let (checks, residuals) = verify(cfg, &sol, &phi);
            let passed = !checks.iter().any(Check::failed);
            let regular = regular_count(&phi) as f64 / g.len() as f64;
            let report = Report {
                model: model_section(&p),
                grid,
                seed: seed_section(cfg, &sol.warnings),
                solver: SolverSection {
                    converged: true,
                    iterations: sol.iterations,
                    tol: Sci(cfg.tol),
                    max_iter: cfg.max_iter,
                    last_step: Sci(sol.history.last().copied().unwrap_or(0.0)),
                    final_residual: Some(Sci(sol.final_residual)),
                    error: None,
                },
                synthesis: Some(SynthesisSection {
                    basepoint: [phi.basepoint.0, phi.basepoint.1],
                    loop_residuals: phi.loop_residuals.map(Sci),
                    path_dependent: phi.path_dependent,
                    regular_fraction: Sci(regular),
                }),
                checks,
                passed,
            };
            let exit = if passed { ExitCode::Success } else { ExitCode::ChecksFailed };
            RunOutcome { report, solution: Some(sol), immersion: Some(phi), residuals, exit }
        }
        Err(e) => {
            let (iterations, last_step) = match &e {
                SolveError::NoConvergence { iterations, last_step, .. } => (*iterations, *last_step),
                _ => (0, f64::NAN),
            };
            let exit = match e {
                SolveError::NoConvergence { .. } => ExitCode::NoConvergence,
                _ => ExitCode::ConfigInvalid,
            };
            let report = Report {
                model: model_section(&p),
                grid,
                seed: seed_section(cfg, &warnings),
                solver: SolverSection {
                    converged: false,
                    iterations,
                    tol: Sci(cfg.tol),
                    max_iter: cfg.max_iter,
                    last_step: Sci(last_step),
                    final_residual: None,
                    error: Some(e.to_string()),
                },
                synthesis: None,
                checks: Vec::new(),
                passed: false,
            };
            RunOutcome { report, solution: None, immersion: None, residuals: ResidualFields::default(), exit }
        }
    }
}

pub fn write_report(dir: &Path, report: &Report) -> Result<PathBuf, PipelineError> {
    let path = dir.join("report.json");
    write_atomic(&path, |w| w.write_all(report.to_json().as_bytes()))?;
    Ok(path)
}

pub fn write_mesh(dir: &Path, phi: &ImmersionField) -> Result<PathBuf, PipelineError> {
    let path = dir.join("surface.obj");
    write_atomic(&path, |w| write_obj(phi, w))?;
    Ok(path)
}

/// `surface.csv`, `pair_f.csv`, `pair_g.csv`.
pub fn write_solution_fields(
    dir: &Path,
    sol: Option<&DbarSolution>,
    phi: Option<&ImmersionField>,
) -> Result<Vec<PathBuf>, PipelineError> {
    let mut written = Vec::new();
    if let Some(phi) = phi {
        let path = dir.join("surface.csv");
        write_atomic(&path, |w| write_csv(phi, w))?;
        written.push(path);
    }
    if let Some(sol) = sol {
        for (name, field) in [("pair_f.csv", &sol.pair.f), ("pair_g.csv", &sol.pair.g)] {
            let path = dir.join(name);
            write_atomic(&path, |w| field.to_csv(w))?;
            written.push(path);
        }
    }
    Ok(written)
}

pub fn write_residuals(dir: &Path, residuals: &ResidualFields) -> Result<Vec<PathBuf>, PipelineError> {
    let sub = dir.join("residuals");
    let mut written = Vec::new();
    for (name, field) in &residuals.fields {
        let path = sub.join(format!("{name}.csv"));
        write_atomic(&path, |w| field.to_csv(w))?;
        written.push(path);
    }
    Ok(written)
}

/// `quadric.csv` for surfaces in G(c,c); `None` for other parameters.
pub fn write_quadric(dir: &Path, p: &ModelParams, phi: &ImmersionField) -> Result<Option<PathBuf>, PipelineError> {
    if !is_ads(p) {
        return Ok(None);
    }
    let points: Vec<QuadricPoint> = immersion_to_quadric(phi, p.mu1).expect("nonzero scale");
    let path = dir.join("quadric.csv");
    write_atomic(&path, |w| write_quadric_csv(&points, w))?;
    Ok(Some(path))
}

/// Writes the requested products of a finished run. The report is always
/// written.
pub fn write_outputs(cfg: &RunConfig, outcome: &RunOutcome) -> Result<Vec<PathBuf>, PipelineError> {
    let dir = &cfg.out_dir;
    let mut written = vec![write_report(dir, &outcome.report)?];
    let Some(phi) = &outcome.immersion else { return Ok(written) };
    for product in &cfg.outputs {
        match product {
            Product::Report => {}
            Product::Mesh => written.push(write_mesh(dir, phi)?),
            Product::Fields => {
                written.extend(write_solution_fields(dir, outcome.solution.as_ref(), Some(phi))?);
                written.extend(write_residuals(dir, &outcome.residuals)?);
            }
            Product::Quadric => written.extend(write_quadric(dir, &params(cfg), phi)?),
        }
    }
    Ok(written)
}

/// Full pipeline: [`execute`] then [`write_outputs`].
pub fn run(cfg: &RunConfig) -> Result<RunOutcome, PipelineError> {
    let outcome = execute(cfg);
    write_outputs(cfg, &outcome)?;
    Ok(outcome)
}

/// Human-readable check table.
pub fn summary(report: &Report) -> String {
    let mut s = String::new();
    for c in &report.checks {
        let status = match c.status {
            crate::report::Status::Pass => "pass",
            crate::report::Status::Fail => "FAIL",
            crate::report::Status::NotApplicable => "n/a ",
        };
        let norm = c.norm.map(|x| format!("{:.3e}", x.0)).unwrap_or_else(|| "-".into());
        let th = c.threshold.map(|x| format!("{:.1e}", x.0)).unwrap_or_else(|| "-".into());
        s.push_str(&format!("{status}  {:<30} {norm:>10} <= {th}\n", c.name));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{parse_config, Overrides};

    fn config(text: &str, out: &Path) -> RunConfig {
        let o = Overrides { out: Some(out.to_path_buf()), ..Overrides::default() };
        parse_config(text, Path::new("."), &o).unwrap()
    }

    #[test]
    fn minkowski_plane_passes_everything() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config("[model]\nmu1 = 0\nmu2 = 0\n[grid]\nsize = 17x17\n[seed]\nf = 1\ng = 0\n", dir.path());
        let out = run(&cfg).unwrap();
        assert_eq!(out.exit, ExitCode::Success, "{}", summary(&out.report));
        for c in &out.report.checks {
            if let Some(n) = c.norm {
                assert!(n.0 <= 1e-10, "{} {}", c.name, n.0);
            }
        }
        for name in ["report.json", "surface.obj", "surface.csv", "residuals/hme_0.csv"] {
            assert!(dir.path().join(name).exists(), "{name}");
        }
        assert!(!dir.path().join("quadric.csv").exists());
    }

    #[test]
    fn generic_parameters_mark_tension_not_applicable() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config(
            "[model]\nmu1 = 1\nmu2 = 2\n[grid]\nsize = 9x9\nu_min = -0.2\nu_max = 0.2\nv_min = -0.2\nv_max = 0.2\n\
             [seed]\ng = 0.3*z\n[output]\nproducts = report\n",
            dir.path(),
        );
        let out = execute(&cfg);
        let r = &out.report;
        assert!(r.check("gauss_pde_residual").is_some());
        for name in ["tension_residual(MuEqual)", "tension_residual(MuOpposite)"] {
            let c = r.check(name).unwrap();
            assert_eq!(c.status, crate::report::Status::NotApplicable);
            assert_eq!(c.note.as_deref(), Some("not applicable: mu1^2 != mu2^2"));
        }
    }

    #[test]
    fn solver_failure_still_writes_report() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config("[model]\nmu1 = 0.1\nmu2 = 0.2\n[grid]\nsize = 9x9\n[seed]\ng = 0.3*z\n[solver]\nmax_iter = 1\n", dir.path());
        let out = run(&cfg).unwrap();
        assert_eq!(out.exit, ExitCode::NoConvergence);
        assert!(!out.report.passed);
        let text = std::fs::read_to_string(dir.path().join("report.json")).unwrap();
        assert!(text.contains("\"converged\": false"));
    }

    #[test]
    fn atomic_write_replaces_whole_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub/a.txt");
        write_atomic(&path, |w| w.write_all(b"first")).unwrap();
        write_atomic(&path, |w| w.write_all(b"second")).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "second");
        let failed = write_atomic(&path, |w| {
            w.write_all(b"partial")?;
            Err(io::Error::other("boom"))
        });
        assert!(failed.is_err());
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "second");
        let leftovers = std::fs::read_dir(dir.path().join("sub")).unwrap().count();
        assert_eq!(leftovers, 1);
    }
}

//! Subcommand runner: profile → eigen → solve → certify → verify → report.
//! Each case writes only to `<out>/<label>/`.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::analysis::{self, compare_to_cone, fit_rate, verify_theorem, BarrierCertificate, ConeReference, Prediction, RateFit, ReportRow};
use crate::blowup_solver::{self, cone_profile, solve_ball, BlowupError, MeridianMesh, Reduction, SolutionField};
use crate::cap_profile::{solve_profile, BlowupProfile};
use crate::config::{CaseConfig, ConfigError, ExperimentConfig};
use crate::io::{self, IoError};
use crate::spectral::{first_eigenpair, EigenResult};

#[derive(Debug, Parser)]
#[command(name = "lnlab", version, about = "Boundary blow-up experiments near singular boundary points")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// experiment configuration (TOML)
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// run only these case labels (repeatable)
    #[arg(long = "case", global = true)]
    pub cases: Vec<String>,
    /// worker threads (overrides the config)
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// output directory (overrides the config)
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// cone profiles g(θ) of the spherical sections
    Profile,
    /// first eigenpair of the linearized operator (needs profile)
    Eigen,
    /// truncated blow-up solves
    Solve,
    /// barrier certificates
    Certify,
    /// ratio fields and rate fits (needs solve, and eigen for cones)
    Verify,
    /// Markdown summary of verify and certify results
    Report,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("unknown case label '{0}'")]
    UnknownCase(String),
    #[error("missing artifact {0}")]
    Missing(PathBuf),
    #[error("numerical failure in {case}: {msg}")]
    Numerical { case: String, msg: String },
    #[error(transparent)]
    Io(IoError),
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        match e {
            IoError::Missing(p) => CliError::Missing(p),
            e => CliError::Io(e),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(ConfigError::UnknownFixture(_)) | CliError::UnknownCase(_) => 4,
            CliError::Config(_) => 3,
            CliError::Missing(_) => 5,
            CliError::Numerical { .. } => 6,
            CliError::Io(_) => 7,
        }
    }
}

fn numerical(case: &CaseConfig, e: impl std::fmt::Display) -> CliError {
    CliError::Numerical { case: case.label.clone(), msg: e.to_string() }
}

fn missing_section(case: &CaseConfig, what: &str) -> CliError {
    CliError::Config(ConfigError::Invalid(format!("case {} has no [{what}] section", case.label)))
}

/// Stored verify result.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerifyArtifact {
    pub row: ReportRow,
    pub fit: RateFit,
}

struct Runner {
    out: PathBuf,
}

impl Runner {
    fn dir(&self, case: &CaseConfig) -> PathBuf {
        self.out.join(&case.label)
    }

    fn profile(&self, case: &CaseConfig) -> Result<bool, CliError> {
        let p = case.profile.as_ref().ok_or_else(|| missing_section(case, "profile"))?;
        let section = case.section()?;
        let prof = solve_profile(&section, case.n, &p.schedule, &p.grid).map_err(|e| numerical(case, e))?;
        let g_min = prof.g.iter().copied().fold(f64::INFINITY, f64::min);
        let meta = json!({
            "label": case.label, "n": case.n, "domain": section.label, "m": prof.m,
            "nodes": prof.theta.len(), "g_first": prof.g[0], "g_min": g_min,
            "residual": prof.residual, "history": prof.history,
        });
        let dir = self.dir(case);
        io::write_csv(&dir.join("profile.csv"), &meta, &["theta", "g", "rho"], &[&prof.theta, &prof.g, &prof.rho])?;
        io::write_json(&dir.join("profile.json"), &prof)?;
        log::info!("{}: profile g(first node) = {:.9}", case.label, prof.g[0]);
        Ok(true)
    }

    fn eigen(&self, case: &CaseConfig) -> Result<bool, CliError> {
        let dir = self.dir(case);
        let prof: BlowupProfile = io::read_json(&dir.join("profile.json"))?;
        let eig = first_eigenpair(&prof).map_err(|e| numerical(case, e))?;
        let meta = json!({
            "label": case.label, "n": case.n, "lambda1": eig.lambda1, "mu1": eig.mu1,
            "regime": eig.regime, "nu_hat": eig.nu_hat,
        });
        io::write_csv(&dir.join("eigen.csv"), &meta, &["theta", "phi"], &[&eig.theta, &eig.phi])?;
        io::write_json(&dir.join("eigen.json"), &eig)?;
        log::info!("{}: lambda1 = {:.6}, mu1 = {:.6}", case.label, eig.lambda1, eig.mu1);
        Ok(true)
    }

    fn write_field(&self, case: &CaseConfig, f: &SolutionField) -> Result<(), CliError> {
        let dir = self.dir(case);
        let meta = json!({
            "label": case.label, "n": f.n, "reduction": f.reduction, "operator": f.operator,
            "m": f.m, "bracket_width": f.bracket.as_ref().map(|b| b.width),
            "history": f.history, "outside_theorem": f.outside_theorem,
        });
        io::write_csv(&dir.join("field.csv"), &meta, &["r", "theta", "u", "d"], &[&f.r, &f.theta, &f.u, &f.d])?;
        io::write_json(&dir.join("field.json"), f)?;
        Ok(())
    }

    fn solve(&self, case: &CaseConfig) -> Result<bool, CliError> {
        if let Some(ball) = case.ball_config()? {
            let f = solve_ball(&ball).map_err(|e| numerical(case, e))?;
            self.write_field(case, &f)?;
            return Ok(true);
        }
        let dom = case.domain()?.ok_or_else(|| missing_section(case, "solve"))?;
        let cfg = &case.solve.as_ref().expect("domain implies solve").config;
        let op = case.operator()?;
        match blowup_solver::solve(&dom, &op, case.n, cfg) {
            Ok(f) => {
                self.write_field(case, &f)?;
                Ok(true)
            }
            Err(BlowupError::Localization { width, tol, field }) => {
                // keep the field for inspection, then report the failure
                self.write_field(case, &field)?;
                Err(numerical(case, format!("bracket width {width:e} exceeds {tol:e}")))
            }
            Err(e) => Err(numerical(case, e)),
        }
    }

    fn certify(&self, case: &CaseConfig) -> Result<bool, CliError> {
        let c = case.certify.as_ref().ok_or_else(|| missing_section(case, "certify"))?;
        let search = case.search().expect("certify section present");
        let op = case.operator()?;
        let certs: Vec<BarrierCertificate> = c
            .forms
            .iter()
            .map(|f| analysis::certify_supersolution(&op, *f, case.n, &search).map_err(|e| numerical(case, e)))
            .collect::<Result<_, _>>()?;
        let dir = self.dir(case);
        io::write_json(&dir.join("certificates.json"), &certs)?;
        io::write_text(&dir.join("certificates.md"), &analysis::markdown_report(&[], &certs))?;
        for c in &certs {
            log::info!("{}: {} margin {:.3e} {}", case.label, c.label, c.margin, if c.pass { "PASS" } else { "FAIL" });
        }
        Ok(certs.iter().all(|c| c.pass))
    }

    fn verify(&self, case: &CaseConfig) -> Result<bool, CliError> {
        let spec = case.annuli().ok_or_else(|| missing_section(case, "fit"))?;
        let dir = self.dir(case);
        let field: SolutionField = io::read_json(&dir.join("field.json"))?;
        let (ratio, prediction) = if field.reduction == Reduction::Radial {
            (compare_to_cone(&field, ConeReference::HalfSpace, None).map_err(|e| numerical(case, e))?, Prediction::Curved)
        } else {
            let eig: EigenResult = io::read_json(&dir.join("eigen.json"))?;
            let dom = case.domain()?.ok_or_else(|| missing_section(case, "solve"))?;
            let cfg = &case.solve.as_ref().expect("domain implies solve").config;
            let mesh = MeridianMesh::build(&dom, cfg).map_err(|e| numerical(case, e))?;
            let prof = cone_profile(&dom, &mesh, case.n, 0.0, field.m).map_err(|e| numerical(case, e))?;
            let ratio = compare_to_cone(&field, ConeReference::Profile(&prof), None).map_err(|e| numerical(case, e))?;
            (ratio, Prediction::Cone { mu1: eig.mu1 })
        };
        let fit = fit_rate(&ratio, &spec).map_err(|e| numerical(case, e))?;
        let row = verify_theorem(&case.label, case.n, prediction, &fit, field.outside_theorem);
        let meta = json!({"label": case.label, "alpha": fit.alpha, "model": fit.model, "predicted": row.predicted});
        io::write_text(&dir.join("ratio.csv"), &analysis::annulus_csv(&fit, &meta))?;
        io::write_text(&dir.join("rate.svg"), &analysis::loglog_svg(&fit, &case.label))?;
        io::write_json(&dir.join("verify.json"), &VerifyArtifact { row: row.clone(), fit })?;
        log::info!("{}: alpha = {:.4} (predicted {:.3}) {}", case.label, row.alpha_hat, row.predicted, if row.pass { "PASS" } else { "FAIL" });
        Ok(row.pass)
    }
}

fn run_report(out: &Path, cases: &[&CaseConfig]) -> Result<bool, CliError> {
    let mut rows = Vec::new();
    let mut certs = Vec::new();
    for c in cases {
        let dir = out.join(&c.label);
        if c.fit.is_some() {
            let v: VerifyArtifact = io::read_json(&dir.join("verify.json"))?;
            rows.push(v.row);
        }
        if c.certify.is_some() {
            let cs: Vec<BarrierCertificate> = io::read_json(&dir.join("certificates.json"))?;
            certs.extend(cs);
        }
    }
    io::write_text(&out.join("report.md"), &analysis::markdown_report(&rows, &certs))?;
    Ok(rows.iter().all(|r| r.pass) && certs.iter().all(|c| c.pass))
}

fn execute(cli: &Cli) -> Result<bool, CliError> {
    let path = cli.config.as_ref().ok_or_else(|| CliError::Config(ConfigError::Invalid("--config is required".into())))?;
    let cfg = ExperimentConfig::load(path)?;
    let out = cli.out.clone().unwrap_or_else(|| cfg.out.clone());
    let jobs = cli.jobs.unwrap_or(cfg.jobs).max(1);
    for label in &cli.cases {
        if !cfg.cases.iter().any(|c| &c.label == label) {
            return Err(CliError::UnknownCase(label.clone()));
        }
    }
    let selected: Vec<&CaseConfig> = cfg.cases.iter().filter(|c| cli.cases.is_empty() || cli.cases.contains(&c.label)).collect();
    if cli.command == Command::Report {
        return run_report(&out, &selected);
    }
    let runner = Runner { out };
    let applicable = |c: &CaseConfig| match cli.command {
        Command::Profile | Command::Eigen => c.profile.is_some(),
        Command::Solve => c.solve.is_some() || c.ball.is_some(),
        Command::Certify => c.certify.is_some(),
        Command::Verify => c.fit.is_some(),
        Command::Report => unreachable!(),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Config(ConfigError::Invalid(format!("worker pool: {e}"))))?;
    let results: Vec<Result<bool, CliError>> = pool.install(|| {
        selected
            .par_iter()
            .filter(|c| applicable(c))
            .map(|c| match cli.command {
                Command::Profile => runner.profile(c),
                Command::Eigen => runner.eigen(c),
                Command::Solve => runner.solve(c),
                Command::Certify => runner.certify(c),
                Command::Verify => runner.verify(c),
                Command::Report => unreachable!(),
            })
            .collect()
    });
    let mut all_pass = true;
    let mut first_err = None;
    for r in results {
        match r {
            Ok(p) => all_pass &= p,
            Err(e) => {
                log::error!("{e}");
                first_err.get_or_insert(e);
            }
        }
    }
    match first_err {
        Some(e) => Err(e),
        None => Ok(all_pass),
    }
}

/// Parses arguments, runs the subcommand and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

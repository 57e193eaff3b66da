//! TOML experiment configuration. Tolerances have no defaults: every numeric
//! choice must appear in the file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{AnnuliSpec, BarrierForm, CertifySearch};
use crate::blowup_solver::{BallConfig, DomainShape, DomainSpec2D, SolveConfig};
use crate::cap_profile::{ProfileGrid, SphericalDomain1D, TruncationSchedule};
use crate::operator::{conformal_operator, MetricFamily, OperatorError, OperatorSpec};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("malformed config: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("unknown fixture '{0}'")]
    UnknownFixture(String),
    #[error(transparent)]
    Operator(#[from] OperatorError),
}

pub const DOMAIN_FIXTURES: &[&str] = &["half-space-cone", "cap-cone", "curved-cone", "wedge", "ball", "band", "cap-complement"];
pub const OPERATOR_FIXTURES: &[&str] = &["laplacian", "conformal-quadratic", "extremal", "drift"];

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub out: PathBuf,
    pub jobs: usize,
    #[serde(rename = "case")]
    pub cases: Vec<CaseConfig>,
}

/// Fixture parameters; which ones are required depends on the fixture.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixtureParams {
    pub theta0: Option<f64>,
    pub theta_b: Option<Vec<f64>>,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    pub t1: Option<f64>,
    pub t2: Option<f64>,
    pub r: Option<f64>,
    pub radius: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorConfig {
    pub name: String,
    pub q: Option<f64>,
    pub c: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileConfig {
    pub grid: ProfileGrid,
    pub schedule: TruncationSchedule,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveCase {
    pub r_min: f64,
    pub r_max: f64,
    #[serde(flatten)]
    pub config: SolveConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BallCase {
    pub m: f64,
    pub nodes: usize,
    pub floor: Option<f64>,
    pub blend: f64,
    pub newton_tol: f64,
    pub max_newton: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    pub r_lo: f64,
    pub r_hi: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertifyConfig {
    pub forms: Vec<BarrierForm>,
    pub samples: usize,
    pub constant_exponents: (i32, i32),
    pub radii: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseConfig {
    pub label: String,
    pub n: usize,
    pub fixture: String,
    #[serde(default)]
    pub params: FixtureParams,
    pub operator: OperatorConfig,
    pub profile: Option<ProfileConfig>,
    pub solve: Option<SolveCase>,
    pub ball: Option<BallCase>,
    pub fit: Option<FitConfig>,
    pub certify: Option<CertifyConfig>,
}

fn need(v: Option<f64>, name: &str, label: &str) -> Result<f64, ConfigError> {
    v.ok_or_else(|| ConfigError::Invalid(format!("case {label}: fixture needs '{name}'")))
}

fn positive(v: f64, name: &str, label: &str) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::Invalid(format!("case {label}: {name} must be positive, got {v}")))
    }
}

impl CaseConfig {
    /// Spherical section of the tangent cone (for balls, the half-sphere).
    pub fn section(&self) -> Result<SphericalDomain1D, ConfigError> {
        let p = &self.params;
        let l = &self.label;
        let d = match self.fixture.as_str() {
            "half-space-cone" | "ball" => SphericalDomain1D::cap(std::f64::consts::FRAC_PI_2),
            "cap-cone" => SphericalDomain1D::cap(need(p.theta0, "theta0", l)?),
            "curved-cone" => {
                let c = p.theta_b.as_ref().ok_or_else(|| ConfigError::Invalid(format!("case {l}: fixture needs 'theta_b'")))?;
                SphericalDomain1D::cap(*c.first().ok_or_else(|| ConfigError::Invalid(format!("case {l}: empty theta_b")))?)
            }
            "wedge" => SphericalDomain1D::arc(need(p.lo, "lo", l)?, need(p.hi, "hi", l)?),
            "band" => SphericalDomain1D::band(need(p.t1, "t1", l)?, need(p.t2, "t2", l)?),
            "cap-complement" => SphericalDomain1D::cap_complement(need(p.r, "r", l)?),
            other => return Err(ConfigError::UnknownFixture(other.into())),
        };
        Ok(d.with_label(l))
    }

    /// 2-D domain of the solve, None for balls and sphere-only fixtures.
    pub fn domain(&self) -> Result<Option<DomainSpec2D>, ConfigError> {
        let Some(s) = &self.solve else { return Ok(None) };
        let p = &self.params;
        let l = &self.label;
        let shape = match self.fixture.as_str() {
            "half-space-cone" => DomainShape::CapCone { theta_b: vec![std::f64::consts::FRAC_PI_2] },
            "cap-cone" => DomainShape::CapCone { theta_b: vec![need(p.theta0, "theta0", l)?] },
            "curved-cone" => DomainShape::CapCone { theta_b: p.theta_b.clone().unwrap_or_default() },
            "wedge" => DomainShape::Wedge { lo: need(p.lo, "lo", l)?, hi: need(p.hi, "hi", l)? },
            "ball" | "band" | "cap-complement" => {
                return Err(ConfigError::Invalid(format!("case {l}: fixture {} has no 2-D solve", self.fixture)))
            }
            other => return Err(ConfigError::UnknownFixture(other.into())),
        };
        Ok(Some(DomainSpec2D { shape, r_min: s.r_min, r_max: s.r_max, label: l.clone() }))
    }

    pub fn ball_config(&self) -> Result<Option<BallConfig>, ConfigError> {
        let Some(b) = &self.ball else { return Ok(None) };
        if self.fixture != "ball" {
            return Err(ConfigError::Invalid(format!("case {}: [ball] needs the ball fixture", self.label)));
        }
        Ok(Some(BallConfig {
            n: self.n,
            radius: need(self.params.radius, "radius", &self.label)?,
            m: b.m,
            nodes: b.nodes,
            floor: b.floor,
            blend: b.blend,
            newton_tol: b.newton_tol,
            max_newton: b.max_newton,
        }))
    }

    pub fn operator(&self) -> Result<OperatorSpec, ConfigError> {
        let o = &self.operator;
        let l = &self.label;
        Ok(match o.name.as_str() {
            "laplacian" => OperatorSpec::laplacian(self.n),
            "conformal-quadratic" => conformal_operator(&MetricFamily::conformal_quadratic(self.n, need(o.q, "q", l)?)?)?,
            "extremal" => OperatorSpec::extremal(self.n, need(o.c, "c", l)?)?,
            "drift" => OperatorSpec::drift(self.n)?,
            other => return Err(ConfigError::UnknownFixture(other.into())),
        })
    }

    pub fn annuli(&self) -> Option<AnnuliSpec> {
        self.fit.as_ref().map(|f| AnnuliSpec::between(f.r_lo, f.r_hi))
    }

    pub fn search(&self) -> Option<CertifySearch> {
        self.certify.as_ref().map(|c| CertifySearch { samples: c.samples, constant_exponents: c.constant_exponents, radii: c.radii })
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let l = &self.label;
        if l.is_empty() || l.contains(['/', '\\']) || l.starts_with('.') {
            return Err(ConfigError::Invalid(format!("label '{l}' is not a plain name")));
        }
        if !DOMAIN_FIXTURES.contains(&self.fixture.as_str()) {
            return Err(ConfigError::UnknownFixture(self.fixture.clone()));
        }
        if !OPERATOR_FIXTURES.contains(&self.operator.name.as_str()) {
            return Err(ConfigError::UnknownFixture(self.operator.name.clone()));
        }
        if self.n < 3 {
            return Err(ConfigError::Invalid(format!("case {l}: n must be at least 3")));
        }
        self.section()?;
        if let Some(p) = &self.profile {
            positive(p.schedule.tol, "profile schedule tol", l)?;
        }
        if let Some(s) = &self.solve {
            for (name, v) in [
                ("schedule_tol", s.config.schedule_tol),
                ("newton_tol", s.config.newton_tol),
                ("agreement_tol", s.config.agreement_tol),
                ("dt", s.config.mesh.dt),
            ] {
                positive(v, name, l)?;
            }
            self.domain()?;
        }
        if let Some(b) = &self.ball {
            positive(b.newton_tol, "ball newton_tol", l)?;
            positive(b.blend, "ball blend", l)?;
            self.ball_config()?;
        }
        if let Some(f) = &self.fit {
            positive(f.r_lo, "fit r_lo", l)?;
            if !(f.r_lo < f.r_hi) {
                return Err(ConfigError::Invalid(format!("case {l}: fit window needs r_lo < r_hi")));
            }
        }
        Ok(())
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.jobs == 0 {
            return Err(ConfigError::Invalid("jobs must be at least 1".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for c in &self.cases {
            if !seen.insert(c.label.as_str()) {
                return Err(ConfigError::Invalid(format!("duplicate case label '{}'", c.label)));
            }
            c.validate()?;
        }
        Ok(())
    }
}

//! Run configuration loaded from TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grape::{parse_angle, GrapeSettings};
use crate::inequality::{GridSpec, Via};
use crate::noise::NoiseParams;
use crate::operator::{Operator, C64};
use crate::state::{DensityMatrix, PurityFactor, SpinSystemConfig};

/// An angle given as a number or as an expression such as `"-pi/4"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Angle {
    Radians(f64),
    Expr(String),
}

impl Angle {
    pub fn value(&self) -> Result<f64> {
        match self {
            Angle::Radians(v) => Ok(*v),
            Angle::Expr(s) => parse_angle(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub start: Angle,
    pub stop: Angle,
    pub step: Angle,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            start: Angle::Expr("-pi".into()),
            stop: Angle::Expr("pi".into()),
            step: Angle::Expr("pi/4".into()),
        }
    }
}

impl GridConfig {
    pub fn spec(&self) -> Result<GridSpec> {
        GridSpec::new(self.start.value()?, self.stop.value()?, self.step.value()?)
    }
}

/// Parses `start:stop:step`, each part a number or `pi` expression.
pub fn parse_grid(text: &str) -> Result<GridSpec> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err(Error::Config(format!("grid '{text}' is not start:stop:step")));
    }
    GridSpec::new(parse_angle(parts[0])?, parse_angle(parts[1])?, parse_angle(parts[2])?)
}

/// Which pulse-design Hamiltonian to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HamiltonianChoice {
    /// The fast test register.
    Test,
    /// The configured molecule.
    Molecule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GrapeSection {
    pub target: String,
    /// JSON matrix file overriding `target`.
    pub target_file: Option<PathBuf>,
    pub hamiltonian: HamiltonianChoice,
    pub optimizer: GrapeSettings,
}

impl Default for GrapeSection {
    fn default() -> Self {
        Self {
            target: "cC".into(),
            target_file: None,
            hamiltonian: HamiltonianChoice::Test,
            optimizer: GrapeSettings::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub molecule: SpinSystemConfig,
    pub epsilon: f64,
    pub grid: GridConfig,
    pub noise_enabled: bool,
    pub noise: NoiseParams,
    pub via: Via,
    pub out: PathBuf,
    pub seed: u64,
    pub grape: GrapeSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            molecule: SpinSystemConfig::placeholder(),
            epsilon: PurityFactor::DEFAULT.value(),
            grid: GridConfig::default(),
            noise_enabled: false,
            noise: NoiseParams::experiment_defaults(),
            via: Via::Moussa,
            out: PathBuf::from("out"),
            seed: 7,
            grape: GrapeSection::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.molecule.validate()?;
        self.purity()?;
        self.grid.spec()?;
        self.noise.validate()?;
        self.grape.optimizer.validate()?;
        Ok(())
    }

    pub fn purity(&self) -> Result<PurityFactor> {
        PurityFactor::new(self.epsilon).map_err(|e| Error::Config(e.to_string()))
    }

    /// Noise parameters when enabled.
    pub fn active_noise(&self) -> Option<&NoiseParams> {
        self.noise_enabled.then_some(&self.noise)
    }
}

/// A complex matrix as separate real and imaginary row lists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixFile {
    pub re: Vec<Vec<f64>>,
    #[serde(default)]
    pub im: Option<Vec<Vec<f64>>>,
}

impl MatrixFile {
    pub fn from_operator(op: &Operator) -> Self {
        let d = op.dim();
        let rows = |f: fn(C64) -> f64| (0..d).map(|r| (0..d).map(|c| f(op.get(r, c))).collect()).collect();
        Self { re: rows(|z| z.re), im: Some(rows(|z| z.im)) }
    }

    pub fn to_operator(&self) -> Result<Operator> {
        let d = self.re.len();
        let shape_ok = |m: &Vec<Vec<f64>>| m.len() == d && m.iter().all(|r| r.len() == d);
        if !shape_ok(&self.re) || self.im.as_ref().is_some_and(|m| !shape_ok(m)) {
            return Err(Error::Config("matrix file is not square".into()));
        }
        let entries: Vec<C64> = (0..d * d)
            .map(|k| {
                let (r, c) = (k / d, k % d);
                C64::new(self.re[r][c], self.im.as_ref().map_or(0.0, |m| m[r][c]))
            })
            .collect();
        Operator::from_row_slice(d, &entries).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Operator> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let m: MatrixFile = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        m.to_operator()
    }
}

/// Density matrix stored in a matrix file.
pub fn load_state(path: &Path) -> Result<DensityMatrix> {
    let op = MatrixFile::load(path)?;
    DensityMatrix::new(op, path.display().to_string()).map_err(|e| Error::Config(e.to_string()))
}

//! Flat `key = value` experiment configuration.
//!
//! One assignment per line, `#` starts a comment, keys are dotted. Lists
//! are comma separated. Every key is optional except `preset`; unset keys
//! fall back to preset defaults.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::expr::Expression;
use crate::error::{Error, Result};
use crate::grid::DomainBox;
use crate::operators::OperatorKind;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    ArtificialBc,
    IrregularDirichlet,
    PuncturedNeumann,
    Obstacle,
    Stefan,
    Custom,
}

impl Preset {
    pub const ALL: [Preset; 6] = [
        Preset::ArtificialBc,
        Preset::IrregularDirichlet,
        Preset::PuncturedNeumann,
        Preset::Obstacle,
        Preset::Stefan,
        Preset::Custom,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::ArtificialBc => "artificial_bc",
            Preset::IrregularDirichlet => "irregular_dirichlet",
            Preset::PuncturedNeumann => "punctured_neumann",
            Preset::Obstacle => "obstacle",
            Preset::Stefan => "stefan",
            Preset::Custom => "custom",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolverKind {
    NewtonMultiscale,
    EulerEvolve,
}

impl SolverKind {
    pub fn name(self) -> &'static str {
        match self {
            SolverKind::NewtonMultiscale => "newton_multiscale",
            SolverKind::EulerEvolve => "euler_evolve",
        }
    }
}

/// Builtin refinement criteria by name.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CriterionName {
    /// No adaptation: the initial grid is kept.
    None,
    /// `|F[u]|`
    Operator,
    /// Both terms of the operator (obstacle or Stefan).
    Terms,
    /// Distance to target points, mapped through `refine.bands`.
    Distance,
    Slope,
}

impl CriterionName {
    pub fn name(self) -> &'static str {
        match self {
            CriterionName::None => "none",
            CriterionName::Operator => "operator",
            CriterionName::Terms => "terms",
            CriterionName::Distance => "distance",
            CriterionName::Slope => "slope",
        }
    }
}

fn from_names<T: Copy>(field: &str, v: &str, all: &[T], name: impl Fn(T) -> &'static str) -> Result<T> {
    all.iter().copied().find(|&t| name(t) == v).ok_or_else(|| {
        let names: Vec<&str> = all.iter().map(|&t| name(t)).collect();
        Error::config(field, format!("`{v}` is not one of {}", names.join(", ")))
    })
}

#[derive(Clone, Debug, Default)]
pub struct RefineConfig {
    pub criterion: Option<CriterionName>,
    pub thresholds: Option<Vec<f64>>,
    pub bands: Option<Vec<(f64, u32)>>,
    pub finest_scale: Option<u32>,
    pub padding: Option<u32>,
    pub max_regrids: Option<usize>,
    pub targets: Option<Vec<(f64, f64)>>,
    /// Length scale of the boundary-proximity weighting.
    pub proximity: Option<f64>,
}

#[derive(Clone, Debug, Default)]
pub struct StopConfig {
    pub thresholds: Option<Vec<f64>>,
    pub max_iterations: Option<usize>,
}

#[derive(Clone, Debug, Default)]
pub struct TimeConfig {
    pub final_time: Option<f64>,
    pub snapshots: Option<Vec<f64>>,
    pub regrid_every: Option<usize>,
    pub max_steps: Option<usize>,
}

#[derive(Clone, Debug, Default)]
pub struct CustomConfig {
    pub operator: Option<OperatorKind>,
    pub source: Option<Expression>,
    pub datum: Option<Expression>,
    /// Inside the domain where the expression is positive.
    pub indicator: Option<Expression>,
    pub initial: Option<Expression>,
    pub exact: Option<Expression>,
}

#[derive(Clone, Debug, Default)]
pub struct ConvergenceConfig {
    pub levels: Option<Vec<u32>>,
    /// Keep a band of coarser cells so every grid has dangling nodes.
    pub dangling: bool,
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub preset: Preset,
    pub solver: Option<SolverKind>,
    pub domain: Option<DomainBox>,
    pub depth: Option<u32>,
    /// Level of the uniform initial quadtree (`2^level` cells a side).
    pub initial_level: Option<u32>,
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub contour_level: Option<f64>,
    pub refine: RefineConfig,
    pub stop: StopConfig,
    pub time: TimeConfig,
    pub custom: CustomConfig,
    pub convergence: ConvergenceConfig,
}

impl ExperimentConfig {
    pub fn new(preset: Preset) -> Self {
        ExperimentConfig {
            preset,
            solver: None,
            domain: None,
            depth: None,
            initial_level: None,
            seed: 0,
            output: None,
            contour_level: None,
            refine: RefineConfig::default(),
            stop: StopConfig::default(),
            time: TimeConfig::default(),
            custom: CustomConfig::default(),
            convergence: ConvergenceConfig::default(),
        }
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config("<file>", format!("cannot read {}: {e}", path.display())))?;
        text.parse()
    }

    /// Apply one `key = value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "preset" => self.preset = from_names(key, v, &Preset::ALL, Preset::name)?,
            "solver" => {
                self.solver = Some(from_names(
                    key,
                    v,
                    &[SolverKind::NewtonMultiscale, SolverKind::EulerEvolve],
                    SolverKind::name,
                )?)
            }
            "domain" => {
                let b = list::<f64>(key, v)?;
                if b.len() != 4 {
                    return Err(Error::config(key, "expected x_min, x_max, y_min, y_max"));
                }
                self.domain = Some(
                    DomainBox::new(b[0], b[1], b[2], b[3]).map_err(|e| Error::config(key, e.to_string()))?,
                );
            }
            "domain.side" => {
                let s: f64 = scalar(key, v)?;
                self.domain = Some(DomainBox::centered_square(s).map_err(|e| Error::config(key, e.to_string()))?);
            }
            "depth" => self.depth = Some(scalar(key, v)?),
            "initial_level" => self.initial_level = Some(scalar(key, v)?),
            "seed" => self.seed = scalar(key, v)?,
            "output" => self.output = Some(PathBuf::from(v)),
            "contour.level" => self.contour_level = Some(scalar(key, v)?),
            "refine.criterion" => {
                use CriterionName::*;
                self.refine.criterion = Some(from_names(
                    key,
                    v,
                    &[None, Operator, Terms, Distance, Slope],
                    CriterionName::name,
                )?)
            }
            "refine.thresholds" => {
                let t = list::<f64>(key, v)?;
                if t.is_empty() || t.windows(2).any(|w| w[1] < w[0]) {
                    return Err(Error::config(key, "expected a nonempty nondecreasing list"));
                }
                self.refine.thresholds = Some(t);
            }
            "refine.bands" => {
                let mut bands = Vec::new();
                for item in v.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                    let (r, s) = item
                        .split_once(':')
                        .ok_or_else(|| Error::config(key, format!("`{item}` is not radius:scale")))?;
                    bands.push((scalar(key, r)?, scalar(key, s)?));
                }
                if bands.is_empty() {
                    return Err(Error::config(key, "expected at least one radius:scale band"));
                }
                self.refine.bands = Some(bands);
            }
            "refine.finest_scale" => self.refine.finest_scale = Some(scalar(key, v)?),
            "refine.padding" => self.refine.padding = Some(scalar(key, v)?),
            "refine.max_regrids" => self.refine.max_regrids = Some(scalar(key, v)?),
            "refine.targets" => {
                let mut pts = Vec::new();
                for item in v.split(';').map(str::trim).filter(|s| !s.is_empty()) {
                    let xy = list::<f64>(key, &item.replace(' ', ","))?;
                    if xy.len() != 2 {
                        return Err(Error::config(key, format!("`{item}` is not an `x y` pair")));
                    }
                    pts.push((xy[0], xy[1]));
                }
                self.refine.targets = Some(pts);
            }
            "refine.proximity" => {
                let l: f64 = scalar(key, v)?;
                if !(l > 0.0) {
                    return Err(Error::config(key, "must be positive"));
                }
                self.refine.proximity = Some(l);
            }
            "stop.thresholds" => {
                let t = list::<f64>(key, v)?;
                if t.is_empty() || t.iter().any(|x| !(*x > 0.0)) || t.windows(2).any(|w| w[1] > w[0]) {
                    return Err(Error::config(key, "expected a nonempty, positive, nonincreasing list"));
                }
                self.stop.thresholds = Some(t);
            }
            "stop.max_iterations" => self.stop.max_iterations = Some(scalar(key, v)?),
            "time.final" => {
                let t: f64 = scalar(key, v)?;
                if !(t > 0.0) {
                    return Err(Error::config(key, "must be positive"));
                }
                self.time.final_time = Some(t);
            }
            "time.snapshots" => self.time.snapshots = Some(list(key, v)?),
            "time.regrid_every" => self.time.regrid_every = Some(scalar(key, v)?),
            "time.max_steps" => self.time.max_steps = Some(scalar(key, v)?),
            "custom.operator" => {
                self.custom.operator = Some(v.parse().map_err(|e: Error| Error::config(key, e.to_string()))?)
            }
            "custom.source" => self.custom.source = Some(Expression::parse(key, v)?),
            "custom.datum" => self.custom.datum = Some(Expression::parse(key, v)?),
            "custom.indicator" => self.custom.indicator = Some(Expression::parse(key, v)?),
            "custom.initial" => self.custom.initial = Some(Expression::parse(key, v)?),
            "custom.exact" => self.custom.exact = Some(Expression::parse(key, v)?),
            "convergence.levels" => self.convergence.levels = Some(list(key, v)?),
            "convergence.dangling" => self.convergence.dangling = scalar(key, v)?,
            _ => return Err(Error::config(key, "unknown key")),
        }
        Ok(())
    }
}

fn scalar<T: FromStr>(field: &str, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| Error::config(field, format!("cannot parse `{}`", v.trim())))
}

fn list<T: FromStr>(field: &str, v: &str) -> Result<Vec<T>> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| scalar(field, s))
        .collect()
}

impl FromStr for ExperimentConfig {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut cfg: Option<ExperimentConfig> = None;
        let mut pending = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::config(format!("line {}", n + 1), format!("expected `key = value`, got `{line}`")))?;
            let k = k.trim();
            if !seen.insert(k.to_string()) {
                return Err(Error::config(k, "assigned more than once"));
            }
            if k == "preset" {
                cfg = Some(ExperimentConfig::new(from_names(k, v.trim(), &Preset::ALL, Preset::name)?));
            } else {
                pending.push((k.to_string(), v.to_string()));
            }
        }
        let mut cfg = cfg.ok_or_else(|| Error::config("preset", "missing"))?;
        for (k, v) in pending {
            cfg.set(&k, &v)?;
        }
        Ok(cfg)
    }
}

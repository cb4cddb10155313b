//! Builtin experiments and the resolution of a configuration into a
//! runnable [`Experiment`].

use std::f64::consts::PI;

use super::config::{CriterionName, ExperimentConfig, Preset, SolverKind};
use crate::adaptivity::{Criterion, RefinementPolicy, ScaleRule};
use crate::error::{Error, Result};
use crate::grid::{Direction, DomainBox, QuadtreeGrid};
use crate::operators::{field, Field, NeumannHole, OperatorKind, ProblemDefinition};
use crate::solvers::StoppingPolicy;
use crate::stencil::Robin;

/// Local maxima of the obstacle preset's obstacle.
pub const OBSTACLE_MAXIMA: [(f64, f64); 3] = [(2.0, 0.0), (-2.055_651, 0.488_297), (-2.055_651, -0.488_297)];

/// Centres of the three bumps in the Stefan preset's initial data.
pub const STEFAN_BUMPS: [(f64, f64); 3] = [(-0.4, -0.3), (0.35, -0.35), (0.0, 0.4)];
/// Width `σ` of each bump `exp(-|x - c|² / σ²)`.
pub const STEFAN_WIDTH: f64 = 0.25;
/// Constant subtracted from the bump sum, giving a negative extension.
pub const STEFAN_OFFSET: f64 = 0.3;

/// Obstacle `g = r² cos²θ`, times `2 sin²(πy)` for `x < 0` and `e^{-r}`
/// for `r > 1/4`.
pub fn obstacle_datum(x: f64, y: f64) -> f64 {
    let r = x.hypot(y);
    let mut g = x * x;
    if x < 0.0 {
        g *= 2.0 * (PI * y).sin().powi(2);
    }
    if r > 0.25 {
        g *= (-r).exp();
    }
    g
}

pub fn stefan_initial(x: f64, y: f64) -> f64 {
    let s2 = STEFAN_WIDTH * STEFAN_WIDTH;
    STEFAN_BUMPS
        .iter()
        .map(|&(cx, cy)| (-((x - cx).powi(2) + (y - cy).powi(2)) / s2).exp())
        .sum::<f64>()
        - STEFAN_OFFSET
}

/// `f = r (1 - r)^+ sin(5πr) cos(3θ)`
pub fn artificial_source(x: f64, y: f64) -> f64 {
    let r = x.hypot(y);
    if r >= 1.0 {
        return 0.0;
    }
    r * (1.0 - r) * (5.0 * PI * r).sin() * (3.0 * y.atan2(x)).cos()
}

/// `∂_r u + u / r = 0` projected on the wall normal: `A = (x·n)/r`,
/// `B = 1/r`, `C = 0`.
pub fn artificial_robin(dir: Direction, x: f64, y: f64) -> Robin {
    let r = x.hypot(y);
    let xn = match dir {
        Direction::East => x,
        Direction::West => -x,
        Direction::North => y,
        Direction::South => -y,
    };
    Robin {
        a: xn / r,
        b: 1.0 / r,
        c: 0.0,
    }
}

/// Radius of the curved domain of the irregular preset at angle `θ`.
pub fn irregular_radius(theta: f64) -> f64 {
    0.7 + 0.15 * (3.0 * theta).cos()
}

/// Signed radial distance to the curved boundary (negative inside).
pub fn irregular_level_set(x: f64, y: f64) -> f64 {
    x.hypot(y) - irregular_radius(y.atan2(x))
}

/// Boundary data with a positive blob near `θ = 0` and a negative one
/// near `θ = 2π/3`.
pub fn irregular_datum(x: f64, y: f64) -> f64 {
    let bump = |cx: f64, cy: f64| (-((x - cx).powi(2) + (y - cy).powi(2)) / 0.03).exp();
    let t = 2.0 * PI / 3.0;
    60.0 * bump(0.85, 0.0) - 100.0 * bump(0.85 * t.cos(), 0.85 * t.sin())
}

pub const PUNCTURE: NeumannHole = NeumannHole {
    cx: 0.5,
    cy: 0.5,
    radius: 0.15,
    flux: 1.0,
};

/// How the contour output is defined.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ContourSpec {
    /// `{u = level}`
    Level(f64),
    /// Boundary of the contact set `{u - g <= eps}`.
    Contact(f64),
}

/// Annulus `inner <= r < outer` around the origin, used by the resource
/// report.
#[derive(Clone, Debug, PartialEq)]
pub struct Region {
    pub name: String,
    pub inner: f64,
    pub outer: f64,
}

impl Region {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let r = x.hypot(y);
        r >= self.inner && r < self.outer
    }

    /// Area of the annulus clipped to `domain`.
    pub fn area_in(&self, domain: &DomainBox) -> f64 {
        disc_area_in(self.outer, domain) - disc_area_in(self.inner, domain)
    }
}

/// Area of `{r < radius} ∩ domain`, integrating chord lengths in `x`.
fn disc_area_in(radius: f64, domain: &DomainBox) -> f64 {
    if radius <= 0.0 {
        return 0.0;
    }
    if !radius.is_finite() {
        return domain.area();
    }
    let inside = domain.contains(-radius, -radius) && domain.contains(radius, radius);
    if inside {
        return PI * radius * radius;
    }
    let (a, b) = (domain.x_min.max(-radius), domain.x_max.min(radius));
    if b <= a {
        return 0.0;
    }
    let n = 200_000;
    let dx = (b - a) / n as f64;
    (0..n)
        .map(|k| {
            let x = a + (k as f64 + 0.5) * dx;
            let s = (radius * radius - x * x).max(0.0).sqrt();
            (domain.y_max.min(s) - domain.y_min.max(-s)).max(0.0) * dx
        })
        .sum()
}

fn annuli(radii: &[f64]) -> Vec<Region> {
    if radii.is_empty() {
        return vec![Region {
            name: "all".into(),
            inner: 0.0,
            outer: f64::INFINITY,
        }];
    }
    let mut out = Vec::new();
    let mut inner = 0.0;
    for &r in radii.iter().chain(std::iter::once(&f64::INFINITY)) {
        let name = match (inner == 0.0, r.is_finite()) {
            (true, _) => format!("r<{r}"),
            (false, true) => format!("{inner}<r<{r}"),
            (false, false) => format!("r>{inner}"),
        };
        out.push(Region { name, inner, outer: r });
        inner = r;
    }
    out
}

/// A fully resolved experiment.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub preset: Preset,
    pub kind: OperatorKind,
    pub problem: ProblemDefinition,
    pub grid0: QuadtreeGrid,
    /// Initial data (parabolic) or initial guess (elliptic).
    pub initial: Option<FieldDebug>,
    pub policy: Option<RefinementPolicy>,
    pub stopping: StoppingPolicy,
    pub max_regrids: usize,
    pub solver: SolverKind,
    pub final_time: f64,
    pub snapshots: Vec<f64>,
    pub regrid_every: usize,
    pub max_steps: usize,
    pub seed: u64,
    pub contour: Option<ContourSpec>,
    pub regions: Vec<Region>,
}

/// A [`Field`] that prints as `<field>`.
#[derive(Clone)]
pub struct FieldDebug(pub Field);

impl std::fmt::Debug for FieldDebug {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("<field>")
    }
}

struct Defaults {
    kind: OperatorKind,
    problem: ProblemDefinition,
    domain: DomainBox,
    depth: u32,
    initial_level: u32,
    solver: SolverKind,
    criterion: CriterionName,
    thresholds: Vec<f64>,
    /// Criteria whose default thresholds differ from `thresholds`.
    thresholds_for: Vec<(CriterionName, Vec<f64>)>,
    bands: Vec<(f64, u32)>,
    targets: Vec<(f64, f64)>,
    /// Distance function for proximity weighting, if the preset has one.
    proximity: Option<(Field, f64)>,
    padding: u32,
    stop: Vec<f64>,
    initial: Option<Field>,
    final_time: f64,
    contour: Option<ContourSpec>,
    regions: Vec<Region>,
}

impl Defaults {
    fn base(kind: OperatorKind, problem: ProblemDefinition, domain: DomainBox) -> Self {
        Defaults {
            kind,
            problem,
            domain,
            depth: 7,
            initial_level: 3,
            solver: SolverKind::NewtonMultiscale,
            criterion: CriterionName::None,
            thresholds: vec![1.0],
            thresholds_for: Vec::new(),
            bands: Vec::new(),
            targets: Vec::new(),
            proximity: None,
            padding: 0,
            stop: vec![1e-8],
            initial: None,
            final_time: 0.0,
            contour: None,
            regions: annuli(&[]),
        }
    }
}

fn preset_defaults(cfg: &ExperimentConfig) -> Result<Defaults> {
    Ok(match cfg.preset {
        Preset::ArtificialBc => {
            let problem = ProblemDefinition::new(field(artificial_source), field(|_, _| 0.0))
                .with_boundary(artificial_robin);
            let mut d = Defaults::base(OperatorKind::BcComposite, problem, DomainBox::centered_square(200.0)?);
            d.depth = 13;
            d.criterion = CriterionName::Distance;
            d.targets = vec![(0.0, 0.0)];
            d.bands = vec![(1.0, 0)];
            d.regions = annuli(&[1.0, 10.0, 100.0]);
            d.contour = Some(ContourSpec::Level(0.0));
            d
        }
        Preset::IrregularDirichlet => {
            let problem = ProblemDefinition::new(field(|_, _| 0.0), field(irregular_datum))
                .with_indicator(|x, y| irregular_level_set(x, y) < 0.0);
            let mut d = Defaults::base(OperatorKind::BcComposite, problem, DomainBox::new(-1.0, 1.0, -1.0, 1.0)?);
            d.depth = 8;
            d.initial_level = 4;
            d.criterion = CriterionName::Operator;
            d.thresholds = vec![100.0, 1000.0, 10000.0];
            d.proximity = Some((field(irregular_level_set), 0.05));
            d.contour = Some(ContourSpec::Level(0.0));
            d
        }
        Preset::PuncturedNeumann => {
            let problem = ProblemDefinition::zero().with_hole(PUNCTURE);
            let mut d = Defaults::base(OperatorKind::BcComposite, problem, DomainBox::unit());
            d.depth = 8;
            d.initial_level = 4;
            d.criterion = CriterionName::Slope;
            d.thresholds = vec![0.05, 0.1, 0.2];
            let h = PUNCTURE;
            d.proximity = Some((field(move |x, y| (x - h.cx).hypot(y - h.cy) - h.radius), 0.05));
            d.contour = Some(ContourSpec::Level(0.05));
            d
        }
        Preset::Obstacle => {
            let problem = ProblemDefinition::new(field(|_, _| 0.0), field(obstacle_datum));
            let mut d = Defaults::base(OperatorKind::Obstacle, problem, DomainBox::new(-3.0, 3.0, -1.0, 1.0)?);
            d.depth = 8;
            d.initial_level = 3;
            d.criterion = CriterionName::Distance;
            d.targets = OBSTACLE_MAXIMA.to_vec();
            d.bands = vec![(0.6, 0), (1.0, 1), (1.4, 2)];
            d.thresholds = vec![0.3, 1.0, 3.0];
            d.thresholds_for = vec![(CriterionName::Terms, vec![0.02, 0.06, 0.2])];
            d.stop = vec![1e-9];
            d.initial = Some(field(obstacle_datum));
            d.contour = Some(ContourSpec::Contact(1e-8));
            d
        }
        Preset::Stefan => {
            let mut d = Defaults::base(
                OperatorKind::Stefan,
                ProblemDefinition::new(field(|_, _| 0.0), field(stefan_initial)),
                DomainBox::new(-1.0, 1.0, -1.0, 1.0)?,
            );
            d.depth = 8;
            d.initial_level = 5;
            d.solver = SolverKind::EulerEvolve;
            d.criterion = CriterionName::None;
            d.thresholds = vec![1.0, 4.0, 16.0];
            d.initial = Some(field(stefan_initial));
            d.final_time = 0.005;
            d.contour = Some(ContourSpec::Level(0.0));
            d
        }
        Preset::Custom => {
            let c = &cfg.custom;
            let source = c.source.as_ref().map(|e| e.to_field()).unwrap_or_else(|| field(|_, _| 0.0));
            let datum = c.datum.as_ref().map(|e| e.to_field()).unwrap_or_else(|| field(|_, _| 0.0));
            let mut problem = ProblemDefinition::new(source, datum);
            if let Some(chi) = &c.indicator {
                let chi = chi.clone();
                problem = problem.with_indicator(move |x, y| chi.eval(x, y) > 0.0);
            }
            let kind = c.operator.unwrap_or(OperatorKind::PoissonDirichlet);
            let mut d = Defaults::base(kind, problem, DomainBox::unit());
            d.depth = 5;
            d.initial_level = 5;
            d.initial = c.initial.as_ref().map(|e| e.to_field());
            d.contour = Some(ContourSpec::Level(0.0));
            if kind == OperatorKind::Stefan {
                d.solver = SolverKind::EulerEvolve;
                d.final_time = 0.01;
            }
            d
        }
    })
}

/// Resolve `cfg` against its preset's defaults.
pub fn resolve(cfg: &ExperimentConfig) -> Result<Experiment> {
    let d = preset_defaults(cfg)?;
    let domain = cfg.domain.unwrap_or(d.domain);
    let depth = cfg.depth.unwrap_or(d.depth);
    let level = cfg.initial_level.unwrap_or(d.initial_level.min(depth));
    if level > depth {
        return Err(Error::config("initial_level", format!("{level} exceeds depth {depth}")));
    }
    let grid0 = QuadtreeGrid::uniform(domain, depth, level).map_err(|e| Error::config("depth", e.to_string()))?;
    let r = &cfg.refine;
    let criterion = r.criterion.unwrap_or(d.criterion);
    let finest = r.finest_scale.unwrap_or(0);
    if finest > depth {
        return Err(Error::config("refine.finest_scale", format!("{finest} exceeds depth {depth}")));
    }
    let policy = match criterion {
        CriterionName::None => None,
        name => {
            let targets = r.targets.clone().unwrap_or(d.targets.clone());
            let inner = match name {
                CriterionName::Operator => Criterion::OperatorResidual,
                CriterionName::Terms => match d.kind {
                    OperatorKind::Obstacle => Criterion::ObstacleTerms,
                    OperatorKind::Stefan => Criterion::StefanTerms,
                    _ => {
                        return Err(Error::config(
                            "refine.criterion",
                            "`terms` needs an obstacle or Stefan operator",
                        ))
                    }
                },
                CriterionName::Distance => {
                    if targets.is_empty() {
                        return Err(Error::config("refine.targets", "distance criterion needs targets"));
                    }
                    Criterion::Distance(targets)
                }
                CriterionName::Slope => Criterion::Slope,
                CriterionName::None => unreachable!(),
            };
            let rule = if name == CriterionName::Distance {
                let bands = r.bands.clone().unwrap_or(d.bands.clone());
                if bands.is_empty() {
                    return Err(Error::config("refine.bands", "distance criterion needs bands"));
                }
                if let Some(&(_, s)) = bands.iter().find(|b| b.1 > depth) {
                    return Err(Error::config("refine.bands", format!("scale {s} exceeds depth {depth}")));
                }
                ScaleRule::Bands(bands)
            } else {
                let preset = d
                    .thresholds_for
                    .iter()
                    .find(|(c, _)| *c == name)
                    .map_or(&d.thresholds, |(_, t)| t);
                ScaleRule::Thresholds(r.thresholds.clone().unwrap_or(preset.clone()))
            };
            let criterion = match (&d.proximity, name) {
                (Some((dist, len)), CriterionName::Operator | CriterionName::Slope) => Criterion::Proximity {
                    inner: Box::new(inner),
                    distance: dist.clone(),
                    length: r.proximity.unwrap_or(*len),
                },
                _ => inner,
            };
            Some(
                RefinementPolicy::new(criterion, rule, finest)
                    .with_padding(r.padding.unwrap_or(d.padding))
                    .with_initial(&grid0),
            )
        }
    };
    let mut stopping = StoppingPolicy::new(cfg.stop.thresholds.clone().unwrap_or(d.stop))
        .map_err(|e| Error::config("stop.thresholds", e.to_string()))?;
    if let Some(m) = cfg.stop.max_iterations {
        stopping.max_iterations = m;
    }
    let solver = cfg.solver.unwrap_or(d.solver);
    let final_time = cfg.time.final_time.unwrap_or(d.final_time);
    let mut snapshots = cfg.time.snapshots.clone().unwrap_or_default();
    if solver == SolverKind::EulerEvolve {
        if !(final_time > 0.0) {
            return Err(Error::config("time.final", "required by euler_evolve"));
        }
        if let Some(t) = snapshots.iter().find(|t| !(0.0..=final_time).contains(*t)) {
            return Err(Error::config("time.snapshots", format!("{t} lies outside [0, {final_time}]")));
        }
        if !snapshots.contains(&final_time) {
            snapshots.push(final_time);
        }
        snapshots.sort_by(f64::total_cmp);
        if d.initial.is_none() && cfg.custom.initial.is_none() && cfg.preset == Preset::Custom {
            return Err(Error::config("custom.initial", "required by euler_evolve"));
        }
    }
    let contour = match cfg.contour_level {
        Some(l) => match d.contour {
            Some(ContourSpec::Contact(_)) => Some(ContourSpec::Contact(l)),
            _ => Some(ContourSpec::Level(l)),
        },
        None => d.contour,
    };
    Ok(Experiment {
        preset: cfg.preset,
        kind: d.kind,
        problem: d.problem,
        grid0,
        initial: d.initial.map(FieldDebug),
        policy,
        stopping,
        max_regrids: r.max_regrids.unwrap_or(1),
        solver,
        final_time,
        snapshots,
        regrid_every: cfg.time.regrid_every.unwrap_or(1),
        max_steps: cfg.time.max_steps.unwrap_or(10_000_000),
        seed: cfg.seed,
        contour,
        regions: d.regions,
    })
}

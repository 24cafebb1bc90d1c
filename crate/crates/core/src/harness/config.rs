//! Scenario files: TOML with the sections listed in `docs/config.md`.

use std::path::Path;

use serde::Deserialize;

use crate::defect::RunOptions;
use crate::error::{Error, Result};
use crate::literal::{labeled_point, parse_mass, parse_number, MeasureLiteral};
use crate::measure::{Domain, Point};
use crate::mollifier::KernelShape;
use crate::reduced::NonlinearityKind;
use crate::schedule::{MIndexRule, ScheduleKind};
use crate::solver::SolverConfig;

/// A number written either as a TOML float or as a string such as `"3pi"` or `"1/512"`.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
enum Num {
    F(f64),
    I(i64),
    S(String),
}

impl Num {
    fn mass(&self) -> Result<f64> {
        match self {
            Num::F(x) => Ok(*x),
            Num::I(x) => Ok(*x as f64),
            Num::S(s) => parse_mass(s),
        }
    }

    fn length(&self) -> Result<f64> {
        match self {
            Num::S(s) if s.contains('/') => {
                let (a, b) = s.split_once('/').expect("checked");
                let (a, b) = (parse_number(a)?, parse_number(b)?);
                if b == 0.0 {
                    return Err(Error::Parse(format!("division by zero in `{s}`")));
                }
                Ok(a / b)
            }
            Num::S(s) => parse_number(s),
            other => other.mass(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    name: String,
    #[serde(default)]
    description: String,
    #[serde(default)]
    domain: RawDomain,
    data: RawData,
    #[serde(default)]
    mollifier: RawMollifier,
    #[serde(default)]
    grids: RawGrids,
    #[serde(default)]
    solver: RawSolver,
    #[serde(default)]
    run: RawRun,
    #[serde(default)]
    schedule: Vec<RawSchedule>,
    #[serde(default)]
    probe: Vec<RawProbe>,
    #[serde(default)]
    expect: Vec<RawExpect>,
    #[serde(default)]
    separate: Vec<RawSeparate>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDomain {
    #[serde(default = "origin0")]
    origin: [f64; 2],
    #[serde(default = "one")]
    width: f64,
    #[serde(default = "one")]
    height: f64,
    d: Option<f64>,
}

fn origin0() -> [f64; 2] {
    [0.0, 0.0]
}

fn one() -> f64 {
    1.0
}

impl Default for RawDomain {
    fn default() -> Self {
        Self {
            origin: origin0(),
            width: 1.0,
            height: 1.0,
            d: None,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawData {
    problem: String,
    nonlinearity: Option<String>,
    mu: String,
    nu: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMollifier {
    #[serde(default)]
    kernel: Option<String>,
    #[serde(default)]
    widths: Option<Vec<Num>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrids {
    h: Option<Vec<Num>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    newton_tol: Option<f64>,
    newton_max_iters: Option<usize>,
    min_step: Option<f64>,
    linear_solver_tol: Option<f64>,
    linear_max_iters: Option<usize>,
    outer_gs_tol: Option<f64>,
    outer_gs_max_iters: Option<usize>,
    monotone_max_iters: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRun {
    warm_start: Option<bool>,
    report_tol: Option<f64>,
    comparison_c: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSchedule {
    id: String,
    kind: String,
    m_index: Option<String>,
    alpha: Option<Num>,
    beta: Option<Num>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
#[serde(untagged)]
enum RawPoint {
    Label(String),
    Xy([f64; 2]),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProbe {
    id: String,
    at: RawPoint,
    radii: Vec<Num>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExpect {
    schedule: Option<String>,
    probe: String,
    #[serde(default = "field_u")]
    field: String,
    target: Num,
    rel_tol: Option<f64>,
    abs_tol: Option<f64>,
    approach: Option<String>,
}

fn field_u() -> String {
    "u".into()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSeparate {
    probe: String,
    #[serde(default = "field_u")]
    field: String,
    schedules: [String; 2],
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProblemKind {
    Scalar(NonlinearityKind),
    System,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Field {
    U,
    V,
    Sum,
}

impl Field {
    fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "u" | "mu" => Ok(Self::U),
            "v" | "nu" => Ok(Self::V),
            "sum" | "u+v" => Ok(Self::Sum),
            other => Err(Error::Parse(format!(
                "unknown field `{other}` (u, v or sum)"
            ))),
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            Self::U => "u",
            Self::V => "v",
            Self::Sum => "sum",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScheduleSpec {
    pub id: String,
    pub kind: ScheduleKind,
    pub m_index: MIndexRule,
    pub alpha: f64,
    pub beta: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProbeSpec {
    pub id: String,
    pub center: Point<f64>,
    pub radii: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Expectation {
    pub schedule: String,
    pub probe: String,
    pub field: Field,
    pub target: f64,
    pub rel_tol: Option<f64>,
    pub abs_tol: Option<f64>,
    /// Require the per-term estimates on the finest grid to be nonincreasing
    /// and to stay above the lower end of the tolerance band.
    pub from_above: bool,
}

impl Expectation {
    pub fn tolerance(&self) -> f64 {
        self.abs_tol
            .unwrap_or(0.0)
            .max(self.rel_tol.map_or(0.0, |r| r * self.target.abs()))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Separation {
    pub probe: String,
    pub field: Field,
    pub schedules: [String; 2],
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub description: String,
    pub origin: Point<f64>,
    pub width: f64,
    pub height: f64,
    pub d: Option<f64>,
    pub problem: ProblemKind,
    pub mu: MeasureLiteral,
    pub nu: Option<MeasureLiteral>,
    pub kernel: KernelShape,
    pub widths: Vec<f64>,
    pub grids: Vec<f64>,
    pub solver: SolverConfig,
    pub options: RunOptions,
    pub schedules: Vec<ScheduleSpec>,
    pub probes: Vec<ProbeSpec>,
    pub expectations: Vec<Expectation>,
    pub separations: Vec<Separation>,
}

pub const DEFAULT_WIDTHS: [f64; 4] = [0.1, 0.05, 0.025, 0.0125];
pub const DEFAULT_GRIDS: [f64; 3] = [1.0 / 128.0, 1.0 / 256.0, 1.0 / 512.0];

fn point(p: &RawPoint) -> Result<Point<f64>> {
    match p {
        RawPoint::Xy([x, y]) => Ok(Point::new(*x, *y)),
        RawPoint::Label(l) => labeled_point(l.trim())
            .map(|(x, y)| Point::new(x, y))
            .ok_or_else(|| Error::Parse(format!("unknown point label `{l}`"))),
    }
}

impl Scenario {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Parse(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let raw: RawScenario = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        Self::from_raw(raw)
    }

    fn from_raw(raw: RawScenario) -> Result<Self> {
        if raw.name.trim().is_empty() || raw.name.contains(['/', '\\']) {
            return Err(Error::Parse(format!(
                "scenario name `{}` must be a plain file name",
                raw.name
            )));
        }
        let problem = match raw.data.problem.trim() {
            "scalar" => {
                let nl = raw.data.nonlinearity.as_deref().unwrap_or("chern-simons");
                ProblemKind::Scalar(NonlinearityKind::parse(nl)?)
            }
            "system" => {
                if raw.data.nonlinearity.is_some() {
                    return Err(Error::Parse(
                        "`nonlinearity` only applies to scalar problems".into(),
                    ));
                }
                ProblemKind::System
            }
            other => {
                return Err(Error::Parse(format!(
                    "unknown problem `{other}` (scalar or system)"
                )))
            }
        };
        let mu = MeasureLiteral::parse(&raw.data.mu)?;
        let nu = raw
            .data
            .nu
            .as_deref()
            .map(MeasureLiteral::parse)
            .transpose()?;
        match (problem, &nu) {
            (ProblemKind::System, None) => {
                return Err(Error::Parse("system problems need `nu`".into()))
            }
            (ProblemKind::Scalar(_), Some(_)) => {
                return Err(Error::Parse("scalar problems take no `nu`".into()))
            }
            _ => {}
        }
        let kernel = raw
            .mollifier
            .kernel
            .as_deref()
            .map_or(Ok(KernelShape::CompactBump), str::parse)?;
        let widths = match &raw.mollifier.widths {
            Some(w) => w.iter().map(Num::length).collect::<Result<Vec<_>>>()?,
            None => DEFAULT_WIDTHS.to_vec(),
        };
        if widths.is_empty()
            || widths.windows(2).any(|w| !(w[1] < w[0]))
            || widths.iter().any(|w| !(*w > 0.0))
        {
            return Err(Error::Parse(
                "mollifier widths must be positive and strictly decreasing".into(),
            ));
        }
        let grids = match &raw.grids.h {
            Some(h) => h.iter().map(Num::length).collect::<Result<Vec<_>>>()?,
            None => DEFAULT_GRIDS.to_vec(),
        };
        check_grids(&grids)?;
        let defaults = SolverConfig::default();
        let s = &raw.solver;
        let solver = SolverConfig {
            newton_tol: s.newton_tol.unwrap_or(defaults.newton_tol),
            newton_max_iters: s.newton_max_iters.unwrap_or(defaults.newton_max_iters),
            min_step: s.min_step.unwrap_or(defaults.min_step),
            linear_solver_tol: s.linear_solver_tol.unwrap_or(defaults.linear_solver_tol),
            linear_max_iters: s.linear_max_iters.unwrap_or(defaults.linear_max_iters),
            outer_gs_tol: s.outer_gs_tol.unwrap_or(defaults.outer_gs_tol),
            outer_gs_max_iters: s.outer_gs_max_iters.unwrap_or(defaults.outer_gs_max_iters),
            monotone_max_iters: s.monotone_max_iters.unwrap_or(defaults.monotone_max_iters),
        };
        solver.validate().map_err(|e| Error::Parse(e.to_string()))?;
        let od = RunOptions::default();
        let options = RunOptions {
            warm_start: raw.run.warm_start.unwrap_or(od.warm_start),
            check_invariants: true,
            report_tol: raw.run.report_tol.unwrap_or(od.report_tol),
            comparison_c: raw.run.comparison_c.unwrap_or(od.comparison_c),
        };

        let mut schedules = Vec::new();
        for rs in &raw.schedule {
            let kind: ScheduleKind = rs.kind.parse()?;
            if kind != ScheduleKind::Plain && problem != ProblemKind::System {
                return Err(Error::Parse(format!(
                    "schedule `{}`: diagonal schedules need a system problem",
                    rs.id
                )));
            }
            let m_index = match (&rs.m_index, kind) {
                (Some(s), ScheduleKind::Plain) => {
                    return Err(Error::Parse(format!(
                        "schedule `{}`: plain schedules take no m_index (got `{s}`)",
                        rs.id
                    )))
                }
                (Some(s), _) => s.parse()?,
                (None, ScheduleKind::Plain) => MIndexRule::Explicit(Vec::new()),
                (None, _) => MIndexRule::Adaptive,
            };
            let (alpha, beta) = if kind == ScheduleKind::Plain {
                if rs.alpha.is_some() || rs.beta.is_some() {
                    return Err(Error::Parse(format!(
                        "schedule `{}`: plain schedules take no alpha/beta",
                        rs.id
                    )));
                }
                (0.0, 0.0)
            } else {
                let single = |lit: &MeasureLiteral, what: &str| -> Result<f64> {
                    match (lit.diffuse.is_empty(), lit.merged_atoms().as_slice()) {
                        (true, [a]) => Ok(a[2]),
                        _ => Err(Error::Parse(format!(
                            "schedule `{}`: diagonal schedules need `{what}` to be a single atom",
                            rs.id
                        ))),
                    }
                };
                let alpha = match &rs.alpha {
                    Some(a) => a.mass()?,
                    None => single(&mu, "mu")?,
                };
                let beta = match &rs.beta {
                    Some(b) => b.mass()?,
                    None => single(nu.as_ref().expect("system"), "nu")?,
                };
                (alpha, beta)
            };
            schedules.push(ScheduleSpec {
                id: rs.id.clone(),
                kind,
                m_index,
                alpha,
                beta,
            });
        }
        if schedules.is_empty() {
            schedules.push(ScheduleSpec {
                id: "plain".into(),
                kind: ScheduleKind::Plain,
                m_index: MIndexRule::Explicit(Vec::new()),
                alpha: 0.0,
                beta: 0.0,
            });
        }
        for (i, s) in schedules.iter().enumerate() {
            if schedules[..i].iter().any(|t| t.id == s.id) {
                return Err(Error::Parse(format!("duplicate schedule id `{}`", s.id)));
            }
        }
        if schedules.iter().any(|s| s.kind != ScheduleKind::Plain) {
            let loc = |lit: &MeasureLiteral| lit.merged_atoms().first().map(|a| (a[0], a[1]));
            if loc(&mu) != nu.as_ref().and_then(loc) {
                return Err(Error::Parse(
                    "diagonal schedules need mu and nu atoms at the same point".into(),
                ));
            }
        }

        let mut probes = Vec::new();
        for rp in &raw.probe {
            if probes.iter().any(|p: &ProbeSpec| p.id == rp.id) {
                return Err(Error::Parse(format!("duplicate probe id `{}`", rp.id)));
            }
            let radii = rp
                .radii
                .iter()
                .map(Num::length)
                .collect::<Result<Vec<_>>>()?;
            probes.push(ProbeSpec {
                id: rp.id.clone(),
                center: point(&rp.at)?,
                radii,
            });
        }
        let find_probe = |id: &str| {
            probes
                .iter()
                .any(|p| p.id == id)
                .then_some(())
                .ok_or_else(|| Error::Parse(format!("unknown probe `{id}`")))
        };
        let find_schedule = |id: &str| {
            schedules
                .iter()
                .any(|s| s.id == id)
                .then_some(())
                .ok_or_else(|| Error::Parse(format!("unknown schedule `{id}`")))
        };
        let check_field = |f: Field| {
            if f != Field::U && problem != ProblemKind::System {
                Err(Error::Parse(format!(
                    "field `{}` needs a system problem",
                    f.tag()
                )))
            } else {
                Ok(f)
            }
        };
        let mut expectations = Vec::new();
        for e in &raw.expect {
            let schedule = e
                .schedule
                .clone()
                .unwrap_or_else(|| schedules[0].id.clone());
            find_schedule(&schedule)?;
            find_probe(&e.probe)?;
            if e.rel_tol.is_none() && e.abs_tol.is_none() {
                return Err(Error::Parse(format!(
                    "expectation on `{}` needs rel_tol or abs_tol",
                    e.probe
                )));
            }
            if e.rel_tol.is_some_and(|t| !(t >= 0.0)) || e.abs_tol.is_some_and(|t| !(t >= 0.0)) {
                return Err(Error::Parse("tolerances must be nonnegative".into()));
            }
            let from_above = match e.approach.as_deref() {
                None => false,
                Some("above") => true,
                Some(other) => {
                    return Err(Error::Parse(format!(
                        "unknown approach `{other}` (only `above`)"
                    )))
                }
            };
            expectations.push(Expectation {
                schedule,
                probe: e.probe.clone(),
                field: check_field(Field::parse(&e.field)?)?,
                target: e.target.mass()?,
                rel_tol: e.rel_tol,
                abs_tol: e.abs_tol,
                from_above,
            });
        }
        let mut separations = Vec::new();
        for s in &raw.separate {
            find_probe(&s.probe)?;
            for id in &s.schedules {
                find_schedule(id)?;
            }
            separations.push(Separation {
                probe: s.probe.clone(),
                field: check_field(Field::parse(&s.field)?)?,
                schedules: s.schedules.clone(),
            });
        }

        let sc = Scenario {
            name: raw.name,
            description: raw.description,
            origin: Point::new(raw.domain.origin[0], raw.domain.origin[1]),
            width: raw.domain.width,
            height: raw.domain.height,
            d: raw.domain.d,
            problem,
            mu,
            nu,
            kernel,
            widths,
            grids,
            solver,
            options,
            schedules,
            probes,
            expectations,
            separations,
        };
        // atom placement and grid compatibility are checked on every grid up front
        for &h in &sc.grids {
            let dom = sc.domain(h)?;
            sc.mu.build(dom)?;
            if let Some(nu) = &sc.nu {
                nu.build(dom)?;
            }
        }
        Ok(sc)
    }

    pub fn domain(&self, h: f64) -> Result<Domain<f64>> {
        let w = self.width.max(self.height);
        let diam = (self.width * self.width + self.height * self.height).sqrt();
        let d = self.d.unwrap_or(diam.max(w));
        Domain::new(self.origin, self.width, self.height, h, d)
            .map_err(|e| Error::Parse(e.to_string()))
    }

    /// Widths usable on a grid of spacing `h` (at least `4h`).
    pub fn widths_for(&self, h: f64) -> Vec<f64> {
        self.widths
            .iter()
            .copied()
            .filter(|w| *w >= 4.0 * h * (1.0 - 1e-12))
            .collect()
    }

    pub fn finest_grid(&self) -> f64 {
        self.grids.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

pub fn check_grids(grids: &[f64]) -> Result<()> {
    if grids.is_empty() || grids.iter().any(|h| !(*h > 0.0) || !h.is_finite()) {
        return Err(Error::Parse("grid spacings must be positive".into()));
    }
    Ok(())
}

/// `--grids` values: comma separated, each `1/n` or a decimal.
pub fn parse_grid_list(s: &str) -> Result<Vec<f64>> {
    let v = s
        .split(',')
        .map(|p| Num::S(p.trim().to_string()).length())
        .collect::<Result<Vec<_>>>()?;
    check_grids(&v)?;
    Ok(v)
}

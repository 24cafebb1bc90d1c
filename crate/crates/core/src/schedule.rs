//! Approximation schedules: sequences of mollified data fed to the solver.
//!
//! A plain schedule mollifies one target at decreasing widths. The diagonal
//! schedules mix two indices of a unit-mass schedule `f_n -> δ_a`:
//!
//! ```text
//! diagonal-1:  (α f_{m_n},                 β f_n)
//! diagonal-2:  (4π f_{m_n} + (α - 4π) f_n, β f_{m_n})
//! ```
//!
//! Both converge weakly-* to `(α δ_a, β δ_a)`.
//!
//! On disk a schedule is a directory holding `manifest.toml` and one
//! `RMLGRID1` density file per term component.

use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{read_binary, GridFunction};
use crate::literal::MeasureLiteral;
use crate::measure::{Atom, Domain, FiniteMeasure, Point};
use crate::mollifier::{mollify, KernelShape, MollifierFamily};
use crate::real::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScheduleKind {
    Plain,
    DiagonalOne,
    DiagonalTwo,
}

impl ScheduleKind {
    pub fn tag(self) -> &'static str {
        match self {
            Self::Plain => "plain",
            Self::DiagonalOne => "diagonal-1",
            Self::DiagonalTwo => "diagonal-2",
        }
    }
}

impl FromStr for ScheduleKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "plain" => Ok(Self::Plain),
            "diagonal-1" => Ok(Self::DiagonalOne),
            "diagonal-2" => Ok(Self::DiagonalTwo),
            other => Err(Error::Parse(format!("unknown schedule kind `{other}`"))),
        }
    }
}

/// One entry of a schedule. `nu` is present for system schedules.
#[derive(Clone, Debug, PartialEq)]
pub struct ScheduleTerm<T> {
    pub mu: FiniteMeasure<T>,
    pub nu: Option<FiniteMeasure<T>>,
    /// Smallest width entering `mu`.
    pub epsilon_mu: T,
    pub epsilon_nu: Option<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ApproximationSchedule<T> {
    kind: ScheduleKind,
    widths: Vec<T>,
    m_index: Vec<usize>,
    terms: Vec<ScheduleTerm<T>>,
    target_mu: FiniteMeasure<T>,
    target_nu: Option<FiniteMeasure<T>>,
}

impl<T: Real> ApproximationSchedule<T> {
    pub fn kind(&self) -> ScheduleKind {
        self.kind
    }

    pub fn widths(&self) -> &[T] {
        &self.widths
    }

    pub fn m_index(&self) -> &[usize] {
        &self.m_index
    }

    pub fn terms(&self) -> &[ScheduleTerm<T>] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn target_mu(&self) -> &FiniteMeasure<T> {
        &self.target_mu
    }

    pub fn target_nu(&self) -> Option<&FiniteMeasure<T>> {
        self.target_nu.as_ref()
    }

    pub fn is_system(&self) -> bool {
        self.target_nu.is_some()
    }

    pub fn domain(&self) -> &Domain<T> {
        self.target_mu.domain()
    }

    /// First `n` terms, keeping targets and the index rule consistent.
    pub fn truncated(&self, n: usize) -> Self {
        let mut s = self.clone();
        s.terms.truncate(n);
        if s.kind != ScheduleKind::Plain {
            s.m_index.truncate(n);
        }
        s
    }
}

fn check_widths<T: Real>(domain: &Domain<T>, widths: &[T]) -> Result<()> {
    if widths.is_empty() {
        return Err(Error::WidthGrid("no widths given".into()));
    }
    if widths.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::WidthGrid(
            "widths must be strictly decreasing".into(),
        ));
    }
    let min = widths[widths.len() - 1];
    let floor = domain.h() * T::lit(4.0);
    if !(min >= floor * (T::one() - T::lit(1e-12))) {
        return Err(Error::WidthGrid(format!(
            "smallest width {min} is below 4h = {floor}"
        )));
    }
    Ok(())
}

fn mollified_terms<T: Real>(
    m: &FiniteMeasure<T>,
    widths: &[T],
    shape: KernelShape,
) -> Result<Vec<FiniteMeasure<T>>> {
    check_widths(m.domain(), widths)?;
    widths
        .iter()
        .map(|&epsilon| mollify(m, &MollifierFamily { shape, epsilon }))
        .collect()
}

/// `[ρ_ε * m for ε in widths]`.
pub fn plain_schedule<T: Real>(
    m: &FiniteMeasure<T>,
    widths: &[T],
    shape: KernelShape,
) -> Result<ApproximationSchedule<T>> {
    let terms = mollified_terms(m, widths, shape)?
        .into_iter()
        .zip(widths)
        .map(|(mu, &e)| ScheduleTerm {
            mu,
            nu: None,
            epsilon_mu: e,
            epsilon_nu: None,
        })
        .collect();
    Ok(ApproximationSchedule {
        kind: ScheduleKind::Plain,
        widths: widths.to_vec(),
        m_index: Vec::new(),
        terms,
        target_mu: m.clone(),
        target_nu: None,
    })
}

/// Both components mollified with the same width at every step.
pub fn plain_pair_schedule<T: Real>(
    mu: &FiniteMeasure<T>,
    nu: &FiniteMeasure<T>,
    widths: &[T],
    shape: KernelShape,
) -> Result<ApproximationSchedule<T>> {
    if !mu.domain().same_grid(nu.domain()) {
        return Err(Error::DomainMismatch);
    }
    let a = mollified_terms(mu, widths, shape)?;
    let b = mollified_terms(nu, widths, shape)?;
    let terms = a
        .into_iter()
        .zip(b)
        .zip(widths)
        .map(|((mu, nu), &e)| ScheduleTerm {
            mu,
            nu: Some(nu),
            epsilon_mu: e,
            epsilon_nu: Some(e),
        })
        .collect();
    Ok(ApproximationSchedule {
        kind: ScheduleKind::Plain,
        widths: widths.to_vec(),
        m_index: Vec::new(),
        terms,
        target_mu: mu.clone(),
        target_nu: Some(nu.clone()),
    })
}

/// Outer index choice for the diagonal schedules.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MIndexRule {
    /// `m_n = (n + 1)^2` with `n` counted from zero.
    Square,
    /// `m_n = n + k`, `k >= 1`.
    Offset(usize),
    Explicit(Vec<usize>),
    /// Chosen at run time: the smallest `m > n` whose inner solution moves by
    /// at most `1/(n+1)` in L1 when `m` is increased once more.
    Adaptive,
}

impl MIndexRule {
    /// Indices for as many outer terms as `available` unit-mass terms allow.
    pub fn resolve(&self, available: usize) -> Result<Vec<usize>> {
        let take = |f: &dyn Fn(usize) -> usize| {
            (0..)
                .map(f)
                .enumerate()
                .take_while(|&(_, m)| m < available)
                .map(|(_, m)| m)
                .collect()
        };
        let out: Vec<usize> = match self {
            Self::Square => take(&|n| (n + 1) * (n + 1)),
            Self::Offset(0) => {
                return Err(Error::IndexOutOfRange("offset rule needs k >= 1".into()))
            }
            Self::Offset(k) => take(&|n| n + k),
            Self::Explicit(v) => v.clone(),
            Self::Adaptive => {
                return Err(Error::IndexOutOfRange(
                    "the adaptive rule is resolved by the schedule runner".into(),
                ))
            }
        };
        validate_m_index(&out, available)?;
        Ok(out)
    }
}

impl FromStr for MIndexRule {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if t == "square" {
            return Ok(Self::Square);
        }
        if t == "adaptive" {
            return Ok(Self::Adaptive);
        }
        if let Some(k) = t.strip_prefix("offset:") {
            return k
                .trim()
                .parse()
                .map(Self::Offset)
                .map_err(|_| Error::Parse(format!("bad offset in `{t}`")));
        }
        let list = t.trim_start_matches('[').trim_end_matches(']');
        list.split(',')
            .map(|p| p.trim().parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map(Self::Explicit)
            .map_err(|_| Error::Parse(format!("unknown m_index rule `{t}`")))
    }
}

pub fn validate_m_index(m_index: &[usize], available: usize) -> Result<()> {
    if m_index.is_empty() {
        return Err(Error::IndexOutOfRange("m_index is empty".into()));
    }
    for (n, &m) in m_index.iter().enumerate() {
        if m <= n {
            return Err(Error::IndexOutOfRange(format!(
                "m_index[{n}] = {m} must exceed {n}"
            )));
        }
        if m >= available {
            return Err(Error::IndexOutOfRange(format!(
                "m_index[{n}] = {m} but only {available} unit terms exist"
            )));
        }
    }
    if m_index.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::IndexOutOfRange(
            "m_index must be strictly increasing".into(),
        ));
    }
    Ok(())
}

/// Location of the unit atom a plain unit-mass schedule converges to.
fn unit_atom<T: Real>(f: &ApproximationSchedule<T>) -> Result<Point<T>> {
    let t = f.target_mu();
    let ok = f.kind == ScheduleKind::Plain
        && !f.is_system()
        && t.diffuse().is_none()
        && t.atoms().len() == 1
        && (t.atoms()[0].mass - T::one()).abs() <= T::lit(1e-12);
    if !ok {
        return Err(Error::InvalidProbe(
            "diagonal schedules need a plain schedule converging to a unit atom".into(),
        ));
    }
    Ok(t.atoms()[0].location)
}

/// Datum at position `(m, n)` of the double sequence behind a diagonal schedule;
/// no ordering between `m` and `n` is required.
pub fn diagonal_term<T: Real>(
    f: &ApproximationSchedule<T>,
    m: usize,
    n: usize,
    alpha: T,
    beta: T,
    kind: ScheduleKind,
) -> Result<ScheduleTerm<T>> {
    unit_atom(f)?;
    if m >= f.len() || n >= f.len() {
        return Err(Error::IndexOutOfRange(format!(
            "({m}, {n}) but only {} unit terms exist",
            f.len()
        )));
    }
    let w = f.widths();
    let (fm, fn_) = (&f.terms[m].mu, &f.terms[n].mu);
    Ok(match kind {
        ScheduleKind::DiagonalOne => ScheduleTerm {
            mu: fm.scale(alpha)?,
            nu: Some(fn_.scale(beta)?),
            epsilon_mu: w[m],
            epsilon_nu: Some(w[n]),
        },
        ScheduleKind::DiagonalTwo => ScheduleTerm {
            mu: FiniteMeasure::linear_combine(&[T::four_pi(), alpha - T::four_pi()], &[fm, fn_])?,
            nu: Some(fm.scale(beta)?),
            epsilon_mu: w[m],
            epsilon_nu: Some(w[m]),
        },
        ScheduleKind::Plain => {
            return Err(Error::Scenario(
                "plain schedules have no double index".into(),
            ))
        }
    })
}

fn diagonal<T: Real>(
    f: &ApproximationSchedule<T>,
    m_index: &[usize],
    alpha: T,
    beta: T,
    kind: ScheduleKind,
) -> Result<ApproximationSchedule<T>> {
    let a = unit_atom(f)?;
    validate_m_index(m_index, f.len())?;
    if alpha < T::zero() || beta < T::zero() {
        return Err(Error::NegativeInput("diagonal schedule masses".into()));
    }
    let cap = T::four_pi();
    if kind == ScheduleKind::DiagonalTwo && alpha < cap {
        return Err(Error::NegativeInput(format!(
            "diagonal-2 needs alpha >= 4pi, got {alpha}"
        )));
    }
    let w = f.widths();
    let mut terms = Vec::with_capacity(m_index.len());
    for (n, &m) in m_index.iter().enumerate() {
        terms.push(diagonal_term(f, m, n, alpha, beta, kind)?);
    }
    let dom = *f.domain();
    Ok(ApproximationSchedule {
        kind,
        widths: w.to_vec(),
        m_index: m_index.to_vec(),
        terms,
        target_mu: FiniteMeasure::from_atoms(dom, vec![Atom::new(a, alpha)])?,
        target_nu: Some(FiniteMeasure::from_atoms(dom, vec![Atom::new(a, beta)])?),
    })
}

/// `(α f_{m_n}, β f_n)`.
pub fn diagonal_schedule_one<T: Real>(
    f: &ApproximationSchedule<T>,
    m_index: &[usize],
    alpha: T,
    beta: T,
) -> Result<ApproximationSchedule<T>> {
    diagonal(f, m_index, alpha, beta, ScheduleKind::DiagonalOne)
}

/// `(4π f_{m_n} + (α - 4π) f_n, β f_{m_n})`; requires `α >= 4π`.
pub fn diagonal_schedule_two<T: Real>(
    f: &ApproximationSchedule<T>,
    m_index: &[usize],
    alpha: T,
    beta: T,
) -> Result<ApproximationSchedule<T>> {
    diagonal(f, m_index, alpha, beta, ScheduleKind::DiagonalTwo)
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    kind: String,
    widths: Vec<f64>,
    m_index: Vec<usize>,
    target_mu: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    target_nu: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    target_mu_diffuse: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    target_nu_diffuse: Option<String>,
    domain: ManifestDomain,
    terms: Vec<ManifestTerm>,
}

#[derive(Serialize, Deserialize)]
struct ManifestDomain {
    origin: [f64; 2],
    width: f64,
    height: f64,
    h: f64,
    d: f64,
}

#[derive(Serialize, Deserialize)]
struct ManifestTerm {
    epsilon_mu: f64,
    mu: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    epsilon_nu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    nu: Option<String>,
}

fn atoms_literal(m: &FiniteMeasure<f64>) -> String {
    MeasureLiteral {
        diffuse: Vec::new(),
        atoms: m
            .atoms()
            .iter()
            .map(|a| [a.location.x, a.location.y, a.mass])
            .collect(),
    }
    .to_string()
}

fn write_density(dir: &Path, name: &str, m: &FiniteMeasure<f64>) -> Result<String> {
    let values = m
        .diffuse()
        .map_or_else(|| vec![0.0; m.domain().len()], <[f64]>::to_vec);
    let file = format!("{name}.rmlgrid");
    let mut w = std::io::BufWriter::new(fs::File::create(dir.join(&file))?);
    GridFunction::from_raw(*m.domain(), values).write_binary(&mut w)?;
    Ok(file)
}

fn read_density(dir: &Path, file: &str, domain: &Domain<f64>) -> Result<Vec<f64>> {
    let (dom, values) = read_binary(std::io::BufReader::new(fs::File::open(dir.join(file))?))?;
    if !dom.same_grid(domain) {
        return Err(Error::GridFormat(format!(
            "{file} does not match the manifest grid"
        )));
    }
    Ok(values)
}

impl ApproximationSchedule<f64> {
    /// Writes `manifest.toml` plus one density file per term component into `dir`.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let d = self.domain();
        let mut terms = Vec::with_capacity(self.len());
        for (k, t) in self.terms.iter().enumerate() {
            terms.push(ManifestTerm {
                epsilon_mu: t.epsilon_mu,
                mu: write_density(dir, &format!("term_{k:03}_mu"), &t.mu)?,
                epsilon_nu: t.epsilon_nu,
                nu: t
                    .nu
                    .as_ref()
                    .map(|nu| write_density(dir, &format!("term_{k:03}_nu"), nu))
                    .transpose()?,
            });
        }
        let diffuse_file = |m: &FiniteMeasure<f64>, name: &str| -> Result<Option<String>> {
            m.diffuse().map(|_| write_density(dir, name, m)).transpose()
        };
        let manifest = Manifest {
            kind: self.kind.tag().into(),
            widths: self.widths.clone(),
            m_index: self.m_index.clone(),
            target_mu: atoms_literal(&self.target_mu),
            target_nu: self.target_nu.as_ref().map(atoms_literal),
            target_mu_diffuse: diffuse_file(&self.target_mu, "target_mu_diffuse")?,
            target_nu_diffuse: match &self.target_nu {
                Some(nu) => diffuse_file(nu, "target_nu_diffuse")?,
                None => None,
            },
            domain: ManifestDomain {
                origin: [d.origin().x, d.origin().y],
                width: d.width(),
                height: d.height(),
                h: d.h(),
                d: d.d(),
            },
            terms,
        };
        let text = toml::to_string(&manifest).map_err(|e| Error::Parse(e.to_string()))?;
        fs::write(dir.join("manifest.toml"), text)?;
        Ok(())
    }

    pub fn read_dir(dir: &Path) -> Result<Self> {
        let text = fs::read_to_string(dir.join("manifest.toml"))?;
        let m: Manifest = toml::from_str(&text).map_err(|e| Error::Parse(e.to_string()))?;
        let md = &m.domain;
        let domain = Domain::new(
            Point::new(md.origin[0], md.origin[1]),
            md.width,
            md.height,
            md.h,
            md.d,
        )?;
        let target = |lit: &str, diffuse: &Option<String>| -> Result<FiniteMeasure<f64>> {
            let atoms = MeasureLiteral::parse(lit)?.atoms;
            let density = diffuse
                .as_ref()
                .map(|f| read_density(dir, f, &domain))
                .transpose()?;
            FiniteMeasure::new(
                domain,
                density,
                atoms
                    .iter()
                    .map(|&[x, y, w]| Atom::new(Point::new(x, y), w))
                    .collect(),
            )
        };
        let target_mu = target(&m.target_mu, &m.target_mu_diffuse)?;
        let target_nu = m
            .target_nu
            .as_ref()
            .map(|t| target(t, &m.target_nu_diffuse))
            .transpose()?;
        let mut terms = Vec::with_capacity(m.terms.len());
        for t in &m.terms {
            let mu = FiniteMeasure::from_density(domain, read_density(dir, &t.mu, &domain)?)?;
            let nu =
                t.nu.as_ref()
                    .map(|f| {
                        read_density(dir, f, &domain)
                            .and_then(|v| FiniteMeasure::from_density(domain, v))
                    })
                    .transpose()?;
            terms.push(ScheduleTerm {
                mu,
                nu,
                epsilon_mu: t.epsilon_mu,
                epsilon_nu: t.epsilon_nu,
            });
        }
        Ok(Self {
            kind: m.kind.parse()?,
            widths: m.widths,
            m_index: m.m_index,
            terms,
            target_mu,
            target_nu,
        })
    }
}

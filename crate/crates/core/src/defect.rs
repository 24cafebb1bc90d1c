//! Atom recovery from converged solutions and schedule diagnostics.
//!
//! Contours are squares of half-width `(k + 1/2) h` around the node nearest to
//! the probe centre, running along cell edges. The flux through such a
//! contour is `sum over crossing edges of (u_in - u_out)`, which equals
//! `h^2 * sum of -Δ_h u` over the enclosed nodes exactly.

use std::io::{self, Write};

use crate::error::{Error, Result};
use crate::grid::{l1_gap, GridFunction};
use crate::measure::{Domain, FiniteMeasure, Point};
use crate::mollifier::{default_test_panel, weakstar_gap};
use crate::real::Real;
use crate::reduced::{Nonlinearity, NonlinearityKind};
use crate::schedule::ApproximationSchedule;
use crate::solver::{
    absorption, added_field_margin, newtonian_potential, solve_poisson, solve_scalar_detailed,
    solve_system_detailed, SolverConfig,
};

/// Node block `[ic - k, ic + k] x [jc - k, jc + k]` enclosed by a contour.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Contour {
    pub ic: usize,
    pub jc: usize,
    pub k: usize,
}

impl Contour {
    pub fn new<T: Real>(domain: &Domain<T>, center: Point<T>, r: T) -> Result<Self> {
        let outside = || Error::ContourOutside {
            x: center.x.as_f64(),
            y: center.y.as_f64(),
            radius: r.as_f64(),
        };
        if !(r > T::zero()) {
            return Err(outside());
        }
        let (ic, jc) = domain.nearest_node(center);
        let k = (r / domain.h() - T::lit(0.5))
            .round()
            .max(T::zero())
            .to_usize()
            .ok_or_else(outside)?;
        if ic < k + 1 || jc < k + 1 || ic + k + 1 > domain.nx() || jc + k + 1 > domain.ny() {
            return Err(outside());
        }
        Ok(Self { ic, jc, k })
    }

    pub fn half_width<T: Real>(&self, domain: &Domain<T>) -> T {
        (T::from_usize_lossy(self.k) + T::lit(0.5)) * domain.h()
    }

    /// `h^2 * sum` of node values over the enclosed block.
    pub fn enclosed<T: Real>(&self, domain: &Domain<T>, values: &[T]) -> T {
        let h2 = domain.h() * domain.h();
        let mut s = T::zero();
        for j in self.jc - self.k..=self.jc + self.k {
            for i in self.ic - self.k..=self.ic + self.k {
                s += values[domain.index(i, j)];
            }
        }
        s * h2
    }

    pub fn flux<T: Real>(&self, u: &GridFunction<T>) -> T {
        let (lo_i, hi_i, lo_j, hi_j) = (
            self.ic - self.k,
            self.ic + self.k,
            self.jc - self.k,
            self.jc + self.k,
        );
        let mut s = T::zero();
        for i in lo_i..=hi_i {
            s += u.at(i, lo_j) - u.at(i, lo_j - 1);
            s += u.at(i, hi_j) - u.at(i, hi_j + 1);
        }
        for j in lo_j..=hi_j {
            s += u.at(lo_i, j) - u.at(lo_i - 1, j);
            s += u.at(hi_i, j) - u.at(hi_i + 1, j);
        }
        s
    }
}

/// Outward flux of `-∇u` through the square contour of half-width about `r`.
pub fn contour_flux<T: Real>(u: &GridFunction<T>, center: Point<T>, r: T) -> Result<T> {
    Ok(Contour::new(u.domain(), center, r)?.flux(u))
}

/// Shrinking contours around one point and what was measured on them.
#[derive(Clone, Debug, PartialEq)]
pub struct FluxProbe<T> {
    pub id: String,
    pub center: Point<T>,
    /// Requested radii, strictly decreasing.
    pub radii: Vec<T>,
    /// Grid-aligned half-widths actually used, one per radius.
    pub half_widths: Vec<T>,
    pub fluxes: Vec<T>,
    pub enclosed_g: Vec<T>,
    pub enclosed_f: Vec<T>,
    pub estimates: Vec<T>,
    pub extrapolated: Option<T>,
    pub error_bar: Option<T>,
}

impl<T: Real> FluxProbe<T> {
    pub fn new(id: impl Into<String>, center: Point<T>, radii: Vec<T>) -> Result<Self> {
        let id = id.into();
        if radii.is_empty() || radii.iter().any(|r| !(*r > T::zero())) {
            return Err(Error::InvalidProbe(format!(
                "probe `{id}` needs positive radii"
            )));
        }
        if radii.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(Error::InvalidProbe(format!(
                "probe `{id}` radii must be strictly decreasing"
            )));
        }
        Ok(Self {
            id,
            center,
            radii,
            half_widths: Vec::new(),
            fluxes: Vec::new(),
            enclosed_g: Vec::new(),
            enclosed_f: Vec::new(),
            estimates: Vec::new(),
            extrapolated: None,
            error_bar: None,
        })
    }

    pub fn max_radius(&self) -> T {
        self.radii[0]
    }

    /// Same geometry with measurements cleared.
    pub fn blank(&self) -> Self {
        Self::new(self.id.clone(), self.center, self.radii.clone())
            .expect("validated on construction")
    }
}

/// Checks radii against the grid, contours against the domain, and pairwise exclusion zones.
pub fn validate_probes<T: Real>(domain: &Domain<T>, probes: &[FluxProbe<T>]) -> Result<()> {
    let floor = domain.h() * T::lit(4.0);
    for p in probes {
        if let Some(r) = p
            .radii
            .iter()
            .find(|r| **r < floor * (T::one() - T::lit(1e-12)))
        {
            return Err(Error::InvalidProbe(format!(
                "probe `{}` radius {r} is below 4h = {floor}",
                p.id
            )));
        }
        Contour::new(domain, p.center, p.max_radius())?;
    }
    for (i, a) in probes.iter().enumerate() {
        for (j, b) in probes.iter().enumerate().skip(i + 1) {
            let zone = T::lit(2.0) * a.max_radius().max(b.max_radius());
            if a.center.dist(&b.center) < zone {
                return Err(Error::ProbeOverlap(i, j));
            }
        }
    }
    Ok(())
}

/// Least-squares line through `(x, y)` evaluated at 0, with the residual norm.
pub fn linear_extrapolate<T: Real>(x: &[T], y: &[T]) -> (T, T) {
    let n = T::from_usize_lossy(x.len());
    if x.len() < 2 {
        return (y.first().copied().unwrap_or(T::zero()), T::zero());
    }
    let mx = x.iter().copied().sum::<T>() / n;
    let my = y.iter().copied().sum::<T>() / n;
    let sxx: T = x.iter().map(|v| (*v - mx) * (*v - mx)).sum();
    let sxy: T = x.iter().zip(y).map(|(a, b)| (*a - mx) * (*b - my)).sum();
    let slope = if sxx > T::zero() {
        sxy / sxx
    } else {
        T::zero()
    };
    let intercept = my - slope * mx;
    let res: T = x
        .iter()
        .zip(y)
        .map(|(a, b)| (intercept + slope * *a - *b).powi(2))
        .sum();
    (intercept, res.sqrt())
}

/// Measures the atom of `-Δu` concentrated at the probe centre.
///
/// Per radius the estimate is the contour flux minus the enclosed mass of
/// `target_diffuse` (the diffuse part of the limit datum, zero for purely
/// atomic targets). `g_of_u` only feeds the `enclosed_g` column. The
/// extrapolation is a line in the half-width through the three smallest
/// contours, read at 0; its residual is the error bar.
pub fn atom_estimate<T: Real>(
    u: &GridFunction<T>,
    g_of_u: &GridFunction<T>,
    target_diffuse: &FiniteMeasure<T>,
    probe: &FluxProbe<T>,
) -> Result<FluxProbe<T>> {
    let dom = u.domain();
    if !dom.same_grid(g_of_u.domain()) || !dom.same_grid(target_diffuse.domain()) {
        return Err(Error::GridMismatch);
    }
    if !target_diffuse.is_diffuse_only() {
        return Err(Error::NotDiffuse(target_diffuse.atoms().len()));
    }
    let f: Vec<T> = target_diffuse
        .diffuse()
        .map_or_else(|| vec![T::zero(); dom.len()], <[T]>::to_vec);
    let mut out = probe.blank();
    for &r in &probe.radii {
        let c = Contour::new(dom, probe.center, r)?;
        let flux = c.flux(u);
        let ef = c.enclosed(dom, &f);
        out.half_widths.push(c.half_width(dom));
        out.fluxes.push(flux);
        out.enclosed_g.push(c.enclosed(dom, g_of_u.values()));
        out.enclosed_f.push(ef);
        out.estimates.push(flux - ef);
    }
    let n = out.radii.len();
    let tail = n.saturating_sub(3);
    let (x, e) = linear_extrapolate(&out.half_widths[tail..], &out.estimates[tail..]);
    out.extrapolated = Some(x);
    out.error_bar = Some(e);
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Problem {
    Scalar(Nonlinearity),
    System,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunOptions {
    /// Start each Newton solve from the previous term's solution.
    pub warm_start: bool,
    pub check_invariants: bool,
    /// The run counts as converged once the last two L1 gaps are at most this.
    pub report_tol: f64,
    /// `C` in the comparison-chain slack `1e-6 + C h^2`.
    pub comparison_c: f64,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            warm_start: false,
            check_invariants: true,
            report_tol: 0.1,
            comparison_c: 10.0,
        }
    }
}

/// Pointwise invariants of one converged term.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct InvariantCheck {
    /// `max(-u, u - U, U - N)` over the nodes (scalar runs).
    pub comparison_violation: Option<f64>,
    pub comparison_tolerance: Option<f64>,
    /// `||g(u)||_1 / total_mass(f)` (scalar runs).
    pub absorption_ratio: Option<f64>,
    /// Minimum over interior nodes of the added-field inequality slack (system runs).
    pub added_field_margin: Option<f64>,
    pub added_field_tolerance: Option<f64>,
    pub min_value: f64,
}

impl InvariantCheck {
    pub fn comparison_ok(&self) -> bool {
        match (self.comparison_violation, self.comparison_tolerance) {
            (Some(v), Some(t)) => v <= t,
            _ => true,
        }
    }

    pub fn absorption_ok(&self) -> bool {
        self.absorption_ratio.is_none_or(|r| r <= 1.0 + 1e-6)
    }

    pub fn added_field_ok(&self) -> bool {
        match (self.added_field_margin, self.added_field_tolerance) {
            (Some(m), Some(t)) => m >= -t,
            _ => true,
        }
    }

    pub fn sign_ok(&self) -> bool {
        self.min_value >= -1e-8
    }

    pub fn all_ok(&self) -> bool {
        self.comparison_ok() && self.absorption_ok() && self.added_field_ok() && self.sign_ok()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TermDiagnostics<T> {
    pub index: usize,
    pub epsilon_mu: T,
    pub epsilon_nu: Option<T>,
    /// L1 distance to the previous term's solution.
    pub l1_gap_u: Option<T>,
    pub l1_gap_v: Option<T>,
    pub weakstar_gap_mu: T,
    pub weakstar_gap_nu: Option<T>,
    pub probes_u: Vec<FluxProbe<T>>,
    pub probes_v: Vec<FluxProbe<T>>,
    /// Newton iterations (scalar) or Gauss-Seidel sweeps (system).
    pub iterations: usize,
    pub invariants: Option<InvariantCheck>,
    pub error: Option<String>,
}

impl<T> TermDiagnostics<T> {
    pub fn solved(&self) -> bool {
        self.error.is_none()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceReport<T> {
    pub schedule: String,
    pub problem: Problem,
    pub terms: Vec<TermDiagnostics<T>>,
    /// Linear-in-ε extrapolation of the per-term estimates, per probe, using the last three terms.
    pub epsilon_extrapolated_u: Vec<Option<T>>,
    pub epsilon_extrapolated_v: Vec<Option<T>>,
    pub success: bool,
    /// Solution of the last term, if that term converged.
    pub final_u: Option<GridFunction<T>>,
    pub final_v: Option<GridFunction<T>>,
}

/// Field tag, probes, width, L1 gap and weak-* gap of one component.
type FieldColumns<'a, T> = (
    &'a str,
    &'a Vec<FluxProbe<T>>,
    Option<T>,
    Option<T>,
    Option<T>,
);

pub const REPORT_COLUMNS: [&str; 12] = [
    "term_index",
    "epsilon",
    "l1_gap",
    "probe_id",
    "radius",
    "flux",
    "enclosed_g",
    "enclosed_f",
    "atom_estimate",
    "extrapolated",
    "error_bar",
    "weakstar_gap",
];

fn opt<T: Real>(v: Option<T>) -> String {
    v.map_or_else(String::new, |x| format!("{}", x.as_f64()))
}

impl<T: Real> ConvergenceReport<T> {
    pub fn last(&self) -> Option<&TermDiagnostics<T>> {
        self.terms.last()
    }

    /// Final extrapolated estimate for probe `k` of the first (`u`) or second (`v`) field.
    pub fn final_estimate(&self, second: bool, k: usize) -> Option<(T, T)> {
        let t = self.terms.iter().rev().find(|t| t.solved())?;
        let p = if second {
            t.probes_v.get(k)?
        } else {
            t.probes_u.get(k)?
        };
        Some((p.extrapolated?, p.error_bar?))
    }

    /// Rows matching [`REPORT_COLUMNS`]: one per (term, probe, radius) plus
    /// a summary row with radius `-1` per (term, probe).
    pub fn rows(&self) -> Vec<Vec<String>> {
        let mut rows = Vec::new();
        let system = self.problem == Problem::System;
        for t in &self.terms {
            let fields: [FieldColumns<'_, T>; 2] = [
                (
                    "u",
                    &t.probes_u,
                    Some(t.epsilon_mu),
                    t.l1_gap_u,
                    Some(t.weakstar_gap_mu),
                ),
                (
                    "v",
                    &t.probes_v,
                    t.epsilon_nu,
                    t.l1_gap_v,
                    t.weakstar_gap_nu,
                ),
            ];
            for (field, probes, eps, gap, ws) in fields {
                for p in probes.iter() {
                    let id = if system {
                        format!("{}/{field}", p.id)
                    } else {
                        p.id.clone()
                    };
                    let head = |radius: String| {
                        vec![t.index.to_string(), opt(eps), opt(gap), id.clone(), radius]
                    };
                    for k in 0..p.estimates.len() {
                        let mut row = head(opt(Some(p.half_widths[k])));
                        row.extend([
                            opt(Some(p.fluxes[k])),
                            opt(Some(p.enclosed_g[k])),
                            opt(Some(p.enclosed_f[k])),
                            opt(Some(p.estimates[k])),
                            opt(p.extrapolated),
                            opt(p.error_bar),
                            opt(ws),
                        ]);
                        rows.push(row);
                    }
                    let mut row = head("-1".into());
                    row.extend([String::new(), String::new(), String::new(), String::new()]);
                    row.extend([opt(p.extrapolated), opt(p.error_bar), opt(ws)]);
                    rows.push(row);
                }
            }
        }
        rows
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{}", REPORT_COLUMNS.join(","))?;
        for row in self.rows() {
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

fn comparison_check<T: Real>(
    f: &FiniteMeasure<T>,
    u: &GridFunction<T>,
    nl: Nonlinearity,
    cfg: &SolverConfig,
    c: f64,
) -> Result<InvariantCheck> {
    let mut check = InvariantCheck {
        min_value: u.min().as_f64(),
        ..InvariantCheck::default()
    };
    let kind_ok = matches!(
        nl.kind(),
        NonlinearityKind::ChernSimonsScalar | NonlinearityKind::ExpMinusOne
    );
    if kind_ok {
        let big_u = solve_poisson(f, cfg)?;
        let pot = newtonian_potential(f);
        let mut worst = f64::NEG_INFINITY;
        for ((a, b), n) in u.values().iter().zip(big_u.values()).zip(pot.values()) {
            let (a, b, n) = (a.as_f64(), b.as_f64(), n.as_f64());
            worst = worst.max(-a).max(a - b).max(b - n);
        }
        let h = f.domain().h().as_f64();
        check.comparison_violation = Some(worst);
        check.comparison_tolerance = Some(1e-6 + c * h * h);
        let g = absorption(u, nl);
        let mass = f.total_mass().as_f64();
        let l1 = g.values().iter().map(|v| v.abs().as_f64()).sum::<f64>() * h * h;
        check.absorption_ratio = Some(if mass > 0.0 {
            l1 / mass
        } else if l1 == 0.0 {
            0.0
        } else {
            f64::INFINITY
        });
    }
    Ok(check)
}

fn probe_all<T: Real>(
    u: &GridFunction<T>,
    g: &GridFunction<T>,
    target: &FiniteMeasure<T>,
    probes: &[FluxProbe<T>],
) -> Result<Vec<FluxProbe<T>>> {
    let diffuse = target.diffuse_part();
    probes
        .iter()
        .map(|p| atom_estimate(u, g, &diffuse, p))
        .collect()
}

/// `e^v (e^u - 1)`, the absorption seen by the first system equation.
fn coupled_g<T: Real>(u: &GridFunction<T>, v: &GridFunction<T>) -> GridFunction<T> {
    u.zip_with(v, |a, b| b.exp() * a.exp_m1())
        .expect("same grid")
}

fn epsilon_fit<T: Real>(terms: &[TermDiagnostics<T>], second: bool, k: usize) -> Option<T> {
    let pts: Vec<(T, T)> = terms
        .iter()
        .filter(|t| t.solved())
        .filter_map(|t| {
            let eps = if second { t.epsilon_nu? } else { t.epsilon_mu };
            let p = if second {
                t.probes_v.get(k)?
            } else {
                t.probes_u.get(k)?
            };
            Some((eps, p.extrapolated?))
        })
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let tail = &pts[pts.len().saturating_sub(3)..];
    let (x, y): (Vec<T>, Vec<T>) = tail.iter().copied().unzip();
    Some(linear_extrapolate(&x, &y).0)
}

/// Solves every term in order and records the diagnostics.
///
/// Solver failures are recorded on the term and the run continues with the
/// next term; the report is always returned unless the inputs are malformed.
pub fn run_schedule<T: Real>(
    sched: &ApproximationSchedule<T>,
    problem: Problem,
    cfg: &SolverConfig,
    probes: &[FluxProbe<T>],
    opts: &RunOptions,
) -> Result<ConvergenceReport<T>> {
    if sched.is_empty() {
        return Err(Error::EmptySchedule(format!(
            "{} schedule has no terms",
            sched.kind().tag()
        )));
    }
    if (problem == Problem::System) != sched.is_system() {
        return Err(Error::Scenario(
            "schedule shape does not match the problem (scalar vs system)".into(),
        ));
    }
    let dom = *sched.domain();
    validate_probes(&dom, probes)?;
    let panel = default_test_panel();
    let mut terms = Vec::with_capacity(sched.len());
    let mut prev: Option<(GridFunction<T>, Option<GridFunction<T>>)> = None;
    for (index, term) in sched.terms().iter().enumerate() {
        let mut diag = TermDiagnostics {
            index,
            epsilon_mu: term.epsilon_mu,
            epsilon_nu: term.epsilon_nu,
            l1_gap_u: None,
            l1_gap_v: None,
            weakstar_gap_mu: weakstar_gap(&term.mu, sched.target_mu(), &panel),
            weakstar_gap_nu: match (&term.nu, sched.target_nu()) {
                (Some(nu), Some(t)) => Some(weakstar_gap(nu, t, &panel)),
                _ => None,
            },
            probes_u: Vec::new(),
            probes_v: Vec::new(),
            iterations: 0,
            invariants: None,
            error: None,
        };
        let outcome: Result<(GridFunction<T>, Option<GridFunction<T>>)> = (|| match problem {
            Problem::Scalar(nl) => {
                let init = if opts.warm_start {
                    prev.as_ref().map(|p| &p.0)
                } else {
                    None
                };
                let sol = solve_scalar_detailed(&term.mu, nl, cfg, init)?;
                diag.iterations = sol.stats.newton_iterations;
                let g = absorption(&sol.u, nl);
                diag.probes_u = probe_all(&sol.u, &g, sched.target_mu(), probes)?;
                if opts.check_invariants {
                    diag.invariants = Some(comparison_check(
                        &term.mu,
                        &sol.u,
                        nl,
                        cfg,
                        opts.comparison_c,
                    )?);
                }
                Ok((sol.u, None))
            }
            Problem::System => {
                let nu = term.nu.as_ref().expect("system schedule");
                let init = if opts.warm_start {
                    prev.as_ref().and_then(|(u, v)| v.as_ref().map(|v| (u, v)))
                } else {
                    None
                };
                let sol = solve_system_detailed(&term.mu, nu, cfg, init)?;
                diag.iterations = sol.sweeps;
                diag.probes_u = probe_all(
                    &sol.u,
                    &coupled_g(&sol.u, &sol.v),
                    sched.target_mu(),
                    probes,
                )?;
                let target_nu = sched.target_nu().expect("system schedule");
                diag.probes_v = probe_all(&sol.v, &coupled_g(&sol.v, &sol.u), target_nu, probes)?;
                if opts.check_invariants {
                    let margin = added_field_margin(&sol.u, &sol.v, &term.mu, nu)?;
                    diag.invariants = Some(InvariantCheck {
                        added_field_margin: Some(margin.as_f64()),
                        added_field_tolerance: Some(sol.tolerance_u + sol.tolerance_v),
                        min_value: sol.u.min().min(sol.v.min()).as_f64(),
                        ..InvariantCheck::default()
                    });
                }
                Ok((sol.u, Some(sol.v)))
            }
        })();
        match outcome {
            Ok((u, v)) => {
                if let Some((pu, pv)) = &prev {
                    diag.l1_gap_u = Some(l1_gap(&u, pu)?);
                    if let (Some(v), Some(pv)) = (&v, pv) {
                        diag.l1_gap_v = Some(l1_gap(v, pv)?);
                    }
                }
                prev = Some((u, v));
            }
            Err(e) => {
                diag.error = Some(e.to_string());
                prev = None;
            }
        }
        terms.push(diag);
    }
    let all_solved = terms.iter().all(TermDiagnostics::solved);
    let settled = {
        let gaps: Vec<f64> = terms
            .iter()
            .filter_map(|t| {
                t.l1_gap_u
                    .map(|g| g.as_f64() + t.l1_gap_v.map_or(0.0, |x| x.as_f64()))
            })
            .collect();
        gaps.len() < 2 || gaps[gaps.len() - 2..].iter().all(|g| *g <= opts.report_tol)
    };
    let np = probes.len();
    let epsilon_extrapolated_u = (0..np).map(|k| epsilon_fit(&terms, false, k)).collect();
    let epsilon_extrapolated_v = if problem == Problem::System {
        (0..np).map(|k| epsilon_fit(&terms, true, k)).collect()
    } else {
        Vec::new()
    };
    Ok(ConvergenceReport {
        schedule: sched.kind().tag().to_string(),
        problem,
        terms,
        epsilon_extrapolated_u,
        epsilon_extrapolated_v,
        success: all_solved && settled,
        final_u: prev.as_ref().map(|p| p.0.clone()),
        final_v: prev.and_then(|p| p.1),
    })
}

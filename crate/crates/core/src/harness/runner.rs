//! Executes a scenario over its grid ladder and writes the artifacts.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use super::config::{Field, ProblemKind, Scenario, ScheduleSpec};
use super::svg::{Plot, Series};
use crate::defect::{
    run_schedule, ConvergenceReport, FluxProbe, Problem, TermDiagnostics, REPORT_COLUMNS,
};
use crate::error::{Error, Result};
use crate::grid::l1_gap;
use crate::literal::format_mass;
use crate::measure::{Atom, FiniteMeasure, Point};
use crate::reduced::Nonlinearity;
use crate::schedule::{
    diagonal_schedule_one, diagonal_schedule_two, diagonal_term, plain_pair_schedule,
    plain_schedule, ApproximationSchedule, MIndexRule, ScheduleKind,
};
use crate::solver::{solve_system, SolverConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_EXPECTATION: i32 = 1;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;

/// Output root when `--out` is absent: `$RML_OUT`, else `rml-out`.
pub fn default_out_root() -> PathBuf {
    std::env::var_os("RML_OUT").map_or_else(|| PathBuf::from("rml-out"), PathBuf::from)
}

#[derive(Clone, Debug)]
pub struct RunArgs {
    pub out_root: PathBuf,
    pub grids: Option<Vec<f64>>,
    pub jobs: usize,
}

impl Default for RunArgs {
    fn default() -> Self {
        Self {
            out_root: default_out_root(),
            grids: None,
            jobs: 1,
        }
    }
}

/// One schedule on one grid.
#[derive(Clone, Debug)]
pub struct RunRecord {
    pub h: f64,
    pub schedule: String,
    pub widths: Vec<f64>,
    pub m_index: Vec<usize>,
    pub report: Option<ConvergenceReport<f64>>,
    pub error: Option<String>,
    pub notes: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub label: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug)]
pub struct ScenarioOutcome {
    pub name: String,
    pub dir: Option<PathBuf>,
    pub grids: Vec<f64>,
    pub records: Vec<RunRecord>,
    pub checks: Vec<Check>,
    pub solver_failures: Vec<String>,
}

impl ScenarioOutcome {
    pub fn exit_code(&self) -> i32 {
        if !self.solver_failures.is_empty() {
            EXIT_SOLVER
        } else if self.checks.iter().any(|c| !c.passed) {
            EXIT_EXPECTATION
        } else {
            EXIT_OK
        }
    }

    pub fn record(&self, h: f64, schedule: &str) -> Option<&RunRecord> {
        self.records
            .iter()
            .find(|r| r.h == h && r.schedule == schedule)
    }

    pub fn finest(&self, schedule: &str) -> Option<&RunRecord> {
        let h = self.grids.iter().copied().fold(f64::INFINITY, f64::min);
        self.record(h, schedule)
    }

    /// Final extrapolated estimate and error bar of a probe on the finest grid.
    pub fn estimate(&self, schedule: &str, probe: usize, field: Field) -> Option<(f64, f64)> {
        field_estimate(self.finest(schedule)?.report.as_ref()?, field, probe)
    }
}

pub fn h_label(h: f64) -> String {
    let n = 1.0 / h;
    if (n - n.round()).abs() < 1e-9 {
        format!("1/{}", n.round() as u64)
    } else {
        format!("{h}")
    }
}

fn pi_units(x: f64) -> String {
    format!("{:.4}pi", x / std::f64::consts::PI)
}

pub fn field_estimate(
    report: &ConvergenceReport<f64>,
    field: Field,
    k: usize,
) -> Option<(f64, f64)> {
    match field {
        Field::U => report.final_estimate(false, k),
        Field::V => report.final_estimate(true, k),
        Field::Sum => {
            let (a, ea) = report.final_estimate(false, k)?;
            let (b, eb) = report.final_estimate(true, k)?;
            Some((a + b, ea + eb))
        }
    }
}

fn term_estimate(t: &TermDiagnostics<f64>, field: Field, k: usize) -> Option<f64> {
    let u = || t.probes_u.get(k)?.extrapolated;
    let v = || t.probes_v.get(k)?.extrapolated;
    match field {
        Field::U => u(),
        Field::V => v(),
        Field::Sum => Some(u()? + v()?),
    }
}

fn problem_of(sc: &Scenario) -> Problem {
    match sc.problem {
        ProblemKind::Scalar(k) => Problem::Scalar(Nonlinearity::new(k)),
        ProblemKind::System => Problem::System,
    }
}

fn diagonal_point(sc: &Scenario) -> Result<Point<f64>> {
    let a = sc.mu.merged_atoms();
    let [x, y, _] = a
        .first()
        .copied()
        .ok_or_else(|| Error::Scenario("diagonal schedules need an atom".into()))?;
    Ok(Point::new(x, y))
}

/// Smallest `m > n` (and above the previous choice) whose inner solution moves
/// by at most `1/(n+1)` in L1 when `m` is increased once more.
fn adaptive_m_index(
    f: &ApproximationSchedule<f64>,
    spec: &ScheduleSpec,
    cfg: &SolverConfig,
    notes: &mut Vec<String>,
) -> Result<Vec<usize>> {
    let avail = f.len();
    let mut out = Vec::new();
    let mut floor = 1;
    for n in 0..avail {
        let lo = floor.max(n + 1);
        if lo >= avail {
            break;
        }
        let tol = 1.0 / (n as f64 + 1.0);
        let mut prev = None;
        let mut last_gap = f64::INFINITY;
        let mut chosen = None;
        for m in lo..avail {
            let t = diagonal_term(f, m, n, spec.alpha, spec.beta, spec.kind)?;
            let s = solve_system(&t.mu, t.nu.as_ref().expect("diagonal terms are pairs"), cfg)?;
            if let Some((pu, pv)) = &prev {
                let gap = l1_gap(&s.0, pu)? + l1_gap(&s.1, pv)?;
                if gap > last_gap {
                    notes.push(format!(
                        "adaptive m_index: inner gaps for n = {n} are not monotone in m"
                    ));
                }
                if gap <= tol {
                    chosen = Some(m - 1);
                    break;
                }
                last_gap = gap;
            }
            prev = Some(s);
        }
        let m = chosen.unwrap_or_else(|| {
            notes.push(format!(
                "adaptive m_index: n = {n} never reached the 1/(n+1) gap, using m = {}",
                avail - 1
            ));
            avail - 1
        });
        out.push(m);
        floor = m + 1;
    }
    if out.is_empty() {
        return Err(Error::IndexOutOfRange(
            "adaptive m_index found no admissible pair".into(),
        ));
    }
    Ok(out)
}

fn build_schedule(
    sc: &Scenario,
    spec: &ScheduleSpec,
    h: f64,
    notes: &mut Vec<String>,
) -> Result<(ApproximationSchedule<f64>, Vec<f64>)> {
    let dom = sc.domain(h)?;
    let widths = sc.widths_for(h);
    if widths.len() < sc.widths.len() {
        notes.push(format!("widths below 4h dropped on h = {}", h_label(h)));
    }
    let sched = match spec.kind {
        ScheduleKind::Plain => {
            let mu = sc.mu.build(dom)?;
            match &sc.nu {
                Some(nu) => plain_pair_schedule(&mu, &nu.build(dom)?, &widths, sc.kernel)?,
                None => plain_schedule(&mu, &widths, sc.kernel)?,
            }
        }
        kind => {
            let unit = FiniteMeasure::from_atoms(dom, vec![Atom::new(diagonal_point(sc)?, 1.0)])?;
            let f = plain_schedule(&unit, &widths, sc.kernel)?;
            let m_index = match &spec.m_index {
                MIndexRule::Adaptive => adaptive_m_index(&f, spec, &sc.solver, notes)?,
                rule => rule.resolve(f.len())?,
            };
            if kind == ScheduleKind::DiagonalOne {
                diagonal_schedule_one(&f, &m_index, spec.alpha, spec.beta)?
            } else {
                diagonal_schedule_two(&f, &m_index, spec.alpha, spec.beta)?
            }
        }
    };
    Ok((sched, widths))
}

fn run_one(sc: &Scenario, spec: &ScheduleSpec, h: f64) -> RunRecord {
    let mut notes = Vec::new();
    let mut rec = RunRecord {
        h,
        schedule: spec.id.clone(),
        widths: Vec::new(),
        m_index: Vec::new(),
        report: None,
        error: None,
        notes: Vec::new(),
    };
    let result = (|| -> Result<ConvergenceReport<f64>> {
        let (sched, widths) = build_schedule(sc, spec, h, &mut notes)?;
        rec.widths = widths;
        rec.m_index = sched.m_index().to_vec();
        let probes = sc
            .probes
            .iter()
            .map(|p| FluxProbe::new(p.id.clone(), p.center, p.radii.clone()))
            .collect::<Result<Vec<_>>>()?;
        run_schedule(&sched, problem_of(sc), &sc.solver, &probes, &sc.options)
    })();
    match result {
        Ok(r) => rec.report = Some(r),
        Err(e) => rec.error = Some(e.to_string()),
    }
    rec.notes = notes;
    rec
}

/// Checks that do not need a solve: every grid must admit a schedule.
fn preflight(sc: &Scenario, grids: &[f64]) -> Result<()> {
    for &h in grids {
        sc.domain(h)?;
        let w = sc.widths_for(h);
        let need = if sc.schedules.iter().any(|s| s.kind != ScheduleKind::Plain) {
            2
        } else {
            1
        };
        if w.len() < need {
            return Err(Error::Parse(format!(
                "no mollifier widths of at least 4h = {} on h = {}",
                4.0 * h,
                h_label(h)
            )));
        }
        for spec in sc
            .schedules
            .iter()
            .filter(|s| s.kind != ScheduleKind::Plain && s.m_index != MIndexRule::Adaptive)
        {
            spec.m_index.resolve(w.len()).map_err(|e| {
                Error::Parse(format!("schedule `{}` on h = {}: {e}", spec.id, h_label(h)))
            })?;
        }
        for p in &sc.probes {
            let dom = sc.domain(h)?;
            let probe = FluxProbe::new(p.id.clone(), p.center, p.radii.clone())
                .map_err(|e| Error::Parse(e.to_string()))?;
            crate::defect::validate_probes(&dom, std::slice::from_ref(&probe)).map_err(|e| {
                Error::Parse(format!("probe `{}` on h = {}: {e}", p.id, h_label(h)))
            })?;
        }
        let dom = sc.domain(h)?;
        let probes: Vec<_> = sc
            .probes
            .iter()
            .map(|p| FluxProbe::new(p.id.clone(), p.center, p.radii.clone()))
            .collect::<Result<_>>()
            .map_err(|e| Error::Parse(e.to_string()))?;
        crate::defect::validate_probes(&dom, &probes).map_err(|e| Error::Parse(e.to_string()))?;
    }
    Ok(())
}

fn parallel_runs(sc: &Scenario, grids: &[f64], jobs: usize) -> Vec<RunRecord> {
    let tasks: Vec<(f64, &ScheduleSpec)> = grids
        .iter()
        .flat_map(|&h| sc.schedules.iter().map(move |s| (h, s)))
        .collect();
    let slots: Vec<Mutex<Option<RunRecord>>> = tasks.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = jobs.clamp(1, tasks.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(h, spec)) = tasks.get(k) else {
                    break;
                };
                let rec = run_one(sc, spec, h);
                *slots[k].lock().expect("slot lock") = Some(rec);
            });
        }
    });
    slots
        .into_iter()
        .map(|s| s.into_inner().expect("slot lock").expect("every task ran"))
        .collect()
}

fn evaluate(sc: &Scenario, outcome: &mut ScenarioOutcome) {
    let probe_index = |id: &str| {
        sc.probes
            .iter()
            .position(|p| p.id == id)
            .expect("validated reference")
    };
    let mut checks = Vec::new();
    for e in &sc.expectations {
        let k = probe_index(&e.probe);
        let tol = e.tolerance();
        let label = format!(
            "expect {}:{}:{} = {}",
            e.schedule,
            e.probe,
            e.field.tag(),
            format_mass(e.target)
        );
        let Some(rec) = outcome.finest(&e.schedule) else {
            continue;
        };
        let Some(report) = rec.report.as_ref() else {
            checks.push(Check {
                label,
                passed: false,
                detail: "no report on the finest grid".into(),
            });
            continue;
        };
        let Some((est, bar)) = field_estimate(report, e.field, k) else {
            checks.push(Check {
                label,
                passed: false,
                detail: "no converged estimate".into(),
            });
            continue;
        };
        let mut passed = (est - e.target).abs() <= tol;
        let mut detail = format!(
            "estimate {} +- {:.4} on h = {}, target {} tol {}",
            pi_units(est),
            bar,
            h_label(rec.h),
            pi_units(e.target),
            pi_units(tol)
        );
        if e.from_above {
            let seq: Vec<f64> = report
                .terms
                .iter()
                .filter_map(|t| term_estimate(t, e.field, k))
                .collect();
            let nonincreasing = seq.windows(2).all(|w| w[1] <= w[0]);
            let floor = e.target - tol;
            let above = seq.iter().all(|v| *v >= floor);
            let shown: Vec<String> = seq.iter().map(|v| pi_units(*v)).collect();
            let _ = write!(
                detail,
                "; ladder [{}] nonincreasing {} above {} {}",
                shown.join(", "),
                nonincreasing,
                pi_units(floor),
                above
            );
            passed &= nonincreasing && above && seq.len() == report.terms.len();
        }
        checks.push(Check {
            label,
            passed,
            detail,
        });
    }
    for s in &sc.separations {
        let k = probe_index(&s.probe);
        let label = format!(
            "separate {}:{} between {} and {}",
            s.probe,
            s.field.tag(),
            s.schedules[0],
            s.schedules[1]
        );
        let a = outcome.estimate(&s.schedules[0], k, s.field);
        let b = outcome.estimate(&s.schedules[1], k, s.field);
        let (passed, detail) = match (a, b) {
            (Some((x, ex)), Some((y, ey))) => (
                (x - y).abs() > ex + ey,
                format!(
                    "|{} - {}| = {:.4} vs error bars {:.4}",
                    pi_units(x),
                    pi_units(y),
                    (x - y).abs(),
                    ex + ey
                ),
            ),
            _ => (false, "missing estimate".into()),
        };
        checks.push(Check {
            label,
            passed,
            detail,
        });
    }
    for rec in &outcome.records {
        let Some(report) = &rec.report else { continue };
        let mut bad = Vec::new();
        let mut checked = 0;
        for t in &report.terms {
            let Some(inv) = &t.invariants else { continue };
            checked += 1;
            if !inv.comparison_ok() {
                bad.push(format!(
                    "term {}: comparison chain off by {:e}",
                    t.index,
                    inv.comparison_violation.unwrap_or(0.0)
                ));
            }
            if !inv.absorption_ok() {
                bad.push(format!(
                    "term {}: absorption ratio {}",
                    t.index,
                    inv.absorption_ratio.unwrap_or(0.0)
                ));
            }
            if !inv.added_field_ok() {
                bad.push(format!(
                    "term {}: added-field margin {:e}",
                    t.index,
                    inv.added_field_margin.unwrap_or(0.0)
                ));
            }
            if !inv.sign_ok() {
                bad.push(format!("term {}: minimum {:e}", t.index, inv.min_value));
            }
        }
        checks.push(Check {
            label: format!("invariants {} h = {}", rec.schedule, h_label(rec.h)),
            passed: bad.is_empty(),
            detail: if bad.is_empty() {
                format!("{checked} converged terms checked")
            } else {
                bad.join("; ")
            },
        });
    }
    outcome.checks = checks;
}

/// Runs every (grid, schedule) pair and evaluates the expectations without touching the disk.
pub fn execute(sc: &Scenario, grids: &[f64], jobs: usize) -> Result<ScenarioOutcome> {
    preflight(sc, grids)?;
    let records = parallel_runs(sc, grids, jobs);
    let mut solver_failures = Vec::new();
    for r in &records {
        let tag = format!("{} h = {}", r.schedule, h_label(r.h));
        if let Some(e) = &r.error {
            solver_failures.push(format!("{tag}: {e}"));
        }
        if let Some(rep) = &r.report {
            for t in rep.terms.iter().filter(|t| !t.solved()) {
                solver_failures.push(format!(
                    "{tag} term {}: {}",
                    t.index,
                    t.error.as_deref().unwrap_or("")
                ));
            }
        }
    }
    let mut outcome = ScenarioOutcome {
        name: sc.name.clone(),
        dir: None,
        grids: grids.to_vec(),
        records,
        checks: Vec::new(),
        solver_failures,
    };
    evaluate(sc, &mut outcome);
    Ok(outcome)
}

fn write_report(path: &Path, outcome: &ScenarioOutcome) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "h,schedule,{}", REPORT_COLUMNS.join(","))?;
    for rec in &outcome.records {
        if let Some(rep) = &rec.report {
            for row in rep.rows() {
                writeln!(w, "{},{},{}", rec.h, rec.schedule, row.join(","))?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn summary_text(sc: &Scenario, outcome: &ScenarioOutcome) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "scenario {}", sc.name);
    if !sc.description.is_empty() {
        let _ = writeln!(s, "{}", sc.description.trim());
    }
    let _ = writeln!(s);
    for rec in &outcome.records {
        let widths: Vec<String> = rec.widths.iter().map(|w| w.to_string()).collect();
        let _ = write!(
            s,
            "run {} h = {} widths [{}]",
            rec.schedule,
            h_label(rec.h),
            widths.join(", ")
        );
        if !rec.m_index.is_empty() {
            let _ = write!(s, " m_index {:?}", rec.m_index);
        }
        let _ = writeln!(s);
        for n in &rec.notes {
            let _ = writeln!(s, "  note: {n}");
        }
        if let Some(e) = &rec.error {
            let _ = writeln!(s, "  error: {e}");
        }
        let Some(rep) = &rec.report else { continue };
        let solved = rep.terms.iter().filter(|t| t.solved()).count();
        let _ = writeln!(
            s,
            "  terms {} solved {} settled {}",
            rep.terms.len(),
            solved,
            rep.success
        );
        for t in &rep.terms {
            let gap = t.l1_gap_u.map(|g| g + t.l1_gap_v.unwrap_or(0.0));
            let _ = writeln!(
                s,
                "  term {} eps {} iterations {} l1_gap {}",
                t.index,
                t.epsilon_mu,
                t.iterations,
                gap.map_or_else(|| "-".into(), |g| format!("{g:.6e}"))
            );
        }
        let fields: &[Field] = if sc.problem == ProblemKind::System {
            &[Field::U, Field::V, Field::Sum]
        } else {
            &[Field::U]
        };
        for (k, p) in sc.probes.iter().enumerate() {
            for &f in fields {
                if let Some((e, bar)) = field_estimate(rep, f, k) {
                    let _ = write!(
                        s,
                        "  probe {}:{} final {} +- {:.4}",
                        p.id,
                        f.tag(),
                        pi_units(e),
                        bar
                    );
                    let eps_fit = match f {
                        Field::U => rep.epsilon_extrapolated_u.get(k).copied().flatten(),
                        Field::V => rep.epsilon_extrapolated_v.get(k).copied().flatten(),
                        Field::Sum => None,
                    };
                    if let Some(x) = eps_fit {
                        let _ = write!(
                            s,
                            " (eps-extrapolated {}, discrepancy {:.4})",
                            pi_units(x),
                            (x - e).abs()
                        );
                    }
                    let _ = writeln!(s);
                }
            }
        }
    }
    let _ = writeln!(s);
    for c in &outcome.checks {
        let _ = writeln!(
            s,
            "{} {}: {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.label,
            c.detail
        );
    }
    for f in &outcome.solver_failures {
        let _ = writeln!(s, "SOLVER FAILURE {f}");
    }
    let code = outcome.exit_code();
    let word = match code {
        EXIT_OK => "ok",
        EXIT_EXPECTATION => "expectation failure",
        _ => "solver failure",
    };
    let _ = writeln!(s, "status {code} ({word})");
    s
}

fn plots(sc: &Scenario, outcome: &ScenarioOutcome) -> Vec<(&'static str, Plot)> {
    let pi = std::f64::consts::PI;
    let fields: &[Field] = if sc.problem == ProblemKind::System {
        &[Field::U, Field::V]
    } else {
        &[Field::U]
    };
    let guides: Vec<(f64, String)> = sc
        .expectations
        .iter()
        .map(|e| {
            (
                e.target / pi,
                format!("{} {}", e.probe, format_mass(e.target)),
            )
        })
        .collect();

    let mut flux = Plot {
        title: format!("{}: extrapolated atom vs epsilon (finest grid)", sc.name),
        x_label: "epsilon".into(),
        y_label: "estimate / pi".into(),
        guides: guides.clone(),
        ..Plot::default()
    };
    for spec in &sc.schedules {
        let Some(rep) = outcome.finest(&spec.id).and_then(|r| r.report.as_ref()) else {
            continue;
        };
        for (k, p) in sc.probes.iter().enumerate() {
            for &f in fields {
                let pts = rep
                    .terms
                    .iter()
                    .filter_map(|t| {
                        let eps = if f == Field::V {
                            t.epsilon_nu?
                        } else {
                            t.epsilon_mu
                        };
                        Some((eps, term_estimate(t, f, k)? / pi))
                    })
                    .collect();
                flux.series.push(Series {
                    name: format!("{} {}:{}", spec.id, p.id, f.tag()),
                    points: pts,
                });
            }
        }
    }

    let mut gaps = Plot {
        title: format!("{}: L1 gap between consecutive terms", sc.name),
        x_label: "term index".into(),
        y_label: "L1 gap".into(),
        ..Plot::default()
    };
    for rec in &outcome.records {
        let Some(rep) = &rec.report else { continue };
        let pts = rep
            .terms
            .iter()
            .filter_map(|t| Some((t.index as f64, t.l1_gap_u? + t.l1_gap_v.unwrap_or(0.0))))
            .collect();
        gaps.series.push(Series {
            name: format!("{} h={}", rec.schedule, h_label(rec.h)),
            points: pts,
        });
    }

    let mut grids = Plot {
        title: format!("{}: final estimate across grids", sc.name),
        x_label: "h".into(),
        y_label: "estimate / pi".into(),
        guides,
        ..Plot::default()
    };
    for spec in &sc.schedules {
        for (k, p) in sc.probes.iter().enumerate() {
            for &f in fields {
                let pts = outcome
                    .records
                    .iter()
                    .filter(|r| r.schedule == spec.id)
                    .filter_map(|r| Some((r.h, field_estimate(r.report.as_ref()?, f, k)?.0 / pi)))
                    .collect();
                grids.series.push(Series {
                    name: format!("{} {}:{}", spec.id, p.id, f.tag()),
                    points: pts,
                });
            }
        }
    }
    vec![
        ("flux_vs_eps.svg", flux),
        ("l1_gap.svg", gaps),
        ("cross_grid.svg", grids),
    ]
}

fn save_solutions(dir: &Path, outcome: &ScenarioOutcome) -> Result<()> {
    for rec in &outcome.records {
        let Some(rep) = &rec.report else { continue };
        let n = (1.0 / rec.h).round() as u64;
        for (tag, g) in [("u", &rep.final_u), ("v", &rep.final_v)] {
            if let Some(g) = g {
                let path = dir.join(format!("{}_h{n}_{tag}.rmlgrid", rec.schedule));
                let mut w = BufWriter::new(fs::File::create(path)?);
                g.write_binary(&mut w)?;
                w.flush()?;
            }
        }
    }
    Ok(())
}

/// Writes `report.csv`, `summary.txt`, `plots/*.svg` and `grids/*.rmlgrid` under `dir`.
pub fn write_artifacts(sc: &Scenario, outcome: &ScenarioOutcome, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir.join("plots"))?;
    fs::create_dir_all(dir.join("grids"))?;
    write_report(&dir.join("report.csv"), outcome)?;
    fs::write(dir.join("summary.txt"), summary_text(sc, outcome))?;
    for (name, plot) in plots(sc, outcome) {
        fs::write(dir.join("plots").join(name), plot.render())?;
    }
    save_solutions(&dir.join("grids"), outcome)
}

pub fn run_scenario(sc: &Scenario, args: &RunArgs) -> Result<ScenarioOutcome> {
    let grids = args.grids.clone().unwrap_or_else(|| sc.grids.clone());
    let mut outcome = execute(sc, &grids, args.jobs)?;
    let dir = args.out_root.join(&sc.name);
    write_artifacts(sc, &outcome, &dir)?;
    outcome.dir = Some(dir);
    Ok(outcome)
}

/// Parses and runs a scenario file; returns the process exit status.
pub fn run_scenario_file(path: &Path, args: &RunArgs, log: &mut dyn Write) -> i32 {
    let sc = match Scenario::from_file(path) {
        Ok(sc) => sc,
        Err(e) => {
            let _ = writeln!(log, "error: {e}");
            return EXIT_PARSE;
        }
    };
    match run_scenario(&sc, args) {
        Ok(outcome) => {
            for c in &outcome.checks {
                let _ = writeln!(
                    log,
                    "{} {}: {}",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.label,
                    c.detail
                );
            }
            for f in &outcome.solver_failures {
                let _ = writeln!(log, "SOLVER FAILURE {f}");
            }
            if let Some(dir) = &outcome.dir {
                let _ = writeln!(log, "artifacts in {}", dir.display());
            }
            outcome.exit_code()
        }
        Err(Error::Parse(m)) => {
            let _ = writeln!(log, "error: parse error: {m}");
            EXIT_PARSE
        }
        Err(e) => {
            let _ = writeln!(log, "error: {e}");
            EXIT_SOLVER
        }
    }
}

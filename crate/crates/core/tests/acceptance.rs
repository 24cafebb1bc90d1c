//! Acceptance criteria, one test per criterion.
//!
//! Every check prints a `criterion N: PASS|FAIL` line; the test fails if any
//! of its lines is a FAIL. Run with `--nocapture` to see the lines, or
//! `--test-threads=1` to keep them in order.

use std::f64::consts::PI;
use std::path::PathBuf;
use std::sync::OnceLock;
use std::time::Instant;

use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rml_core::defect::TermDiagnostics;
use rml_core::harness::{execute, Field, ProblemKind, Scenario, ScenarioOutcome};
use rml_core::solver::{jacobian_apply, scalar_residual};
use rml_core::{
    contour_flux, newtonian_potential, scalar_reduced, solve_poisson, system_reduced_atoms, Atom,
    Domain, FiniteMeasure, GridFunction, Nonlinearity, Point, ResolutionStatus, SolverConfig,
};

const TWO_PI: f64 = 2.0 * PI;
const FOUR_PI: f64 = 4.0 * PI;

// criterion 1
const ALGEBRA_BUDGET_SECS: f64 = 1.0;
const SWEEP_CASES: u32 = 10_000;
// criterion 2
const CLIP_REL: f64 = 0.10;
const SUBCRITICAL_REL: f64 = 0.05;
// criterion 3
const COMPARISON_ABS: f64 = 1e-6;
const COMPARISON_C: f64 = 10.0;
const ABSORPTION_REL: f64 = 1e-6;
// criteria 4 and 5
const SYSTEM_REL: f64 = 0.10;
const CASE_I_V_ABS: f64 = 0.2;
// criterion 6
const NONUNIQUE_REL: f64 = 0.12;
// criterion 7
const SIGN_TOL: f64 = 1e-8;
// criterion 8
const POISSON_ABS: f64 = 1e-4;
const JACOBIAN_REL: f64 = 1e-5;
const LOG_FLUX_REL: f64 = 0.005;
const DIVERGENCE_ABS: f64 = 1e-8;
const VERIFICATION_BUDGET_SECS: f64 = 60.0;

struct Tally {
    criterion: u32,
    failures: Vec<String>,
}

impl Tally {
    fn new(criterion: u32) -> Self {
        Self {
            criterion,
            failures: Vec::new(),
        }
    }

    fn check(&mut self, label: &str, ok: bool, detail: impl AsRef<str>) {
        let status = if ok { "PASS" } else { "FAIL" };
        println!(
            "criterion {}: {status} {label}: {}",
            self.criterion,
            detail.as_ref()
        );
        if !ok {
            self.failures.push(format!("{label}: {}", detail.as_ref()));
        }
    }

    fn finish(self) {
        assert!(
            self.failures.is_empty(),
            "criterion {} failed:\n{}",
            self.criterion,
            self.failures.join("\n")
        );
    }
}

fn pi(x: f64) -> String {
    format!("{:.4}pi", x / PI)
}

fn within(value: f64, target: f64, tol: f64) -> bool {
    (value - target).abs() <= tol
}

const SCENARIOS: [&str; 8] = [
    "scalar_subcritical_pi",
    "scalar_clipping_3pi",
    "scalar_clipping_5pi",
    "system_sum_3pi_3pi",
    "system_atoms_case_i",
    "system_atoms_case_ii_3pi_3pi",
    "nonuniqueness_5pi_2pi",
    "added_field_inequality",
];

static OUTCOMES: [OnceLock<(Scenario, ScenarioOutcome, f64)>; 8] = [const { OnceLock::new() }; 8];

/// Scenario, its outcome and the wall time of the run; each bundled scenario runs once per test binary.
fn scenario(name: &str) -> &'static (Scenario, ScenarioOutcome, f64) {
    let idx = SCENARIOS
        .iter()
        .position(|s| *s == name)
        .expect("bundled scenario");
    OUTCOMES[idx].get_or_init(|| {
        let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
            .join("../../scenarios")
            .join(format!("{name}.cfg"));
        let sc = Scenario::from_file(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let jobs = std::thread::available_parallelism().map_or(1, |n| n.get());
        let start = Instant::now();
        let outcome = execute(&sc, &sc.grids, jobs).unwrap_or_else(|e| panic!("{name}: {e}"));
        (sc, outcome, start.elapsed().as_secs_f64())
    })
}

fn finest_estimate(name: &str, schedule: &str, field: Field) -> Option<(f64, f64)> {
    scenario(name).1.estimate(schedule, 0, field)
}

fn first_schedule(name: &str) -> String {
    scenario(name).0.schedules[0].id.clone()
}

/// Checks a finest-grid estimate against `target +- tol` and returns it.
fn check_estimate(
    t: &mut Tally,
    name: &str,
    schedule: &str,
    field: Field,
    target: f64,
    tol: f64,
) -> Option<f64> {
    let label = format!("{name} {schedule} {}", field.tag());
    match finest_estimate(name, schedule, field) {
        Some((est, bar)) => {
            t.check(
                &label,
                within(est, target, tol),
                format!(
                    "{} +- {} vs {} +- {}",
                    pi(est),
                    pi(bar),
                    pi(target),
                    pi(tol)
                ),
            );
            Some(est)
        }
        None => {
            t.check(&label, false, "no estimate on the finest grid");
            None
        }
    }
}

fn solved_terms(out: &ScenarioOutcome) -> impl Iterator<Item = (f64, &str, &TermDiagnostics<f64>)> {
    out.records.iter().flat_map(|r| {
        r.report.iter().flat_map(move |rep| {
            rep.terms
                .iter()
                .filter(|t| t.solved())
                .map(move |t| (r.h, r.schedule.as_str(), t))
        })
    })
}

#[test]
fn criterion_1_reduced_algebra() {
    let mut t = Tally::new(1);
    let start = Instant::now();

    let dom = Domain::unit_square(1.0 / 32.0).unwrap();
    let masses = [5.0 * PI, PI, TWO_PI, TWO_PI + 1e-9];
    let expected = [TWO_PI, PI, TWO_PI, TWO_PI];
    let spots = [(0.25, 0.25), (0.75, 0.25), (0.25, 0.75), (0.75, 0.75)];
    let atoms = spots
        .iter()
        .zip(masses)
        .map(|(&(x, y), m)| Atom::new(Point::new(x, y), m))
        .collect();
    let m = FiniteMeasure::from_atoms(dom, atoms).unwrap();
    let reduced = scalar_reduced(&m, Nonlinearity::CHERN_SIMONS);
    for (&(x, y), want) in spots.iter().zip(expected) {
        let got = reduced.atom_mass(Point::new(x, y));
        let ok = if want == TWO_PI {
            (got - want).abs() <= TWO_PI * f64::EPSILON
        } else {
            got == want
        };
        t.check(
            &format!("scalar atom at ({x}, {y})"),
            ok,
            format!("{} vs {}", pi(got), pi(want)),
        );
    }
    t.check(
        "scalar atom count",
        reduced.atoms().len() == 4,
        format!("{}", reduced.atoms().len()),
    );

    let pair = |a: f64, b: f64| system_reduced_atoms(a, b).unwrap();
    let r = pair(3.0 * PI, 3.0 * PI);
    t.check(
        "system (3pi, 3pi)",
        r.pair() == Some((TWO_PI, TWO_PI)),
        format!("{:?}", r.pair()),
    );
    let r = pair(0.0, 6.0 * PI);
    t.check(
        "system (0, 6pi)",
        r.pair() == Some((0.0, FOUR_PI)),
        format!("{:?}", r.pair()),
    );
    let r = pair(5.0 * PI, TWO_PI);
    let want = vec![(3.0 * PI, PI), (7.0 * PI / 2.0, PI / 2.0)];
    t.check(
        "system (5pi, 2pi)",
        r.status == ResolutionStatus::Indeterminate
            && r.pair().is_none()
            && r.attainable_examples == want,
        format!("{:?}, examples {:?}", r.status, r.attainable_examples),
    );

    let mut runner = TestRunner::new(Config {
        cases: SWEEP_CASES,
        failure_persistence: None,
        ..Config::default()
    });
    let mass = prop_oneof![1 => Just(0.0), 1 => Just(FOUR_PI), 8 => 0.0..8.0 * PI];
    let sweep = runner.run(&(mass.clone(), mass), |(mu, nu)| {
        let r = system_reduced_atoms(mu, nu).unwrap();
        let s = system_reduced_atoms(nu, mu).unwrap();
        prop_assert_eq!(r.status, s.status);
        if let Some((a, b)) = r.pair() {
            prop_assert!(
                (0.0..=mu).contains(&a) && (0.0..=nu).contains(&b),
                "({mu}, {nu}) -> ({a}, {b})"
            );
            let want = (mu + nu).min(FOUR_PI);
            prop_assert!(
                (a + b - want).abs() <= 4.0 * f64::EPSILON * want.max(1.0),
                "({mu}, {nu}) sum {}",
                a + b
            );
            prop_assert_eq!(s.pair(), Some((b, a)));
        }
        Ok(())
    });
    t.check(
        "system property sweep",
        sweep.is_ok(),
        format!("{SWEEP_CASES} pairs: {sweep:?}"),
    );

    let secs = start.elapsed().as_secs_f64();
    t.check("runtime", secs < ALGEBRA_BUDGET_SECS, format!("{secs:.3}s"));
    t.finish();
}

#[test]
fn criterion_2_scalar_clipping() {
    let mut t = Tally::new(2);
    for (name, target, rel) in [
        ("scalar_clipping_3pi", TWO_PI, CLIP_REL),
        ("scalar_subcritical_pi", PI, SUBCRITICAL_REL),
        ("scalar_clipping_5pi", TWO_PI, CLIP_REL),
    ] {
        let schedule = first_schedule(name);
        check_estimate(&mut t, name, &schedule, Field::U, target, rel * target);
        let (sc, out, secs) = scenario(name);
        t.check(
            &format!("{name} finest grid"),
            sc.finest_grid() <= 1.0 / 512.0,
            format!("h = {}", sc.finest_grid()),
        );
        println!("criterion 2: {name} ran in {secs:.1}s");
        if name == "scalar_clipping_3pi" {
            let ladder: Vec<f64> = out
                .finest(&schedule)
                .and_then(|r| r.report.as_ref())
                .map(|rep| {
                    rep.terms
                        .iter()
                        .filter_map(|t| t.probes_u.first().and_then(|p| p.extrapolated))
                        .collect()
                })
                .unwrap_or_default();
            let floor = target * (1.0 - rel);
            let monotone = ladder.windows(2).all(|w| w[1] <= w[0]);
            let above = ladder.iter().all(|&e| e >= floor);
            let shown: Vec<String> = ladder.iter().map(|&e| pi(e)).collect();
            t.check(
                "scalar_clipping_3pi approach from above",
                ladder.len() >= 2 && monotone && above,
                format!("[{}], floor {}", shown.join(", "), pi(floor)),
            );
        }
    }
    t.finish();
}

#[test]
fn criterion_3_scalar_invariants() {
    let mut t = Tally::new(3);
    let mut count = 0;
    for name in SCENARIOS {
        let (sc, out, _) = scenario(name);
        if !matches!(sc.problem, ProblemKind::Scalar(_)) {
            continue;
        }
        let (mut worst_cmp, mut worst_abs) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for (h, schedule, term) in solved_terms(out) {
            count += 1;
            let label = format!("{name} {schedule} h={h} term {}", term.index);
            let Some(inv) = term.invariants.as_ref() else {
                t.check(&label, false, "invariants missing");
                continue;
            };
            let tol = COMPARISON_ABS + COMPARISON_C * h * h;
            let (Some(cmp), Some(ratio)) = (inv.comparison_violation, inv.absorption_ratio) else {
                t.check(&label, false, "comparison or absorption not measured");
                continue;
            };
            let sign = -inv.min_value;
            let violation = cmp.max(sign);
            if violation > tol {
                t.check(
                    &format!("{label} comparison"),
                    false,
                    format!("violation {violation:.3e} > {tol:.3e}"),
                );
            }
            if ratio > 1.0 + ABSORPTION_REL {
                t.check(
                    &format!("{label} absorption"),
                    false,
                    format!("ratio {ratio}"),
                );
            }
            worst_cmp = worst_cmp.max(violation - tol);
            worst_abs = worst_abs.max(ratio);
        }
        t.check(
            &format!("{name} invariants"),
            worst_cmp <= 0.0 && worst_abs <= 1.0 + ABSORPTION_REL,
            format!(
                "max(violation - tolerance) {worst_cmp:.3e}, max absorption ratio {worst_abs:.6}"
            ),
        );
    }
    t.check("converged scalar solves", count > 0, format!("{count}"));
    t.finish();
}

#[test]
fn criterion_4_system_sum() {
    let mut t = Tally::new(4);
    let name = "system_sum_3pi_3pi";
    let schedule = first_schedule(name);
    check_estimate(
        &mut t,
        name,
        &schedule,
        Field::Sum,
        FOUR_PI,
        SYSTEM_REL * FOUR_PI,
    );
    check_estimate(
        &mut t,
        name,
        &schedule,
        Field::U,
        TWO_PI,
        SYSTEM_REL * TWO_PI,
    );
    check_estimate(
        &mut t,
        name,
        &schedule,
        Field::V,
        TWO_PI,
        SYSTEM_REL * TWO_PI,
    );
    println!("criterion 4: {name} ran in {:.1}s", scenario(name).2);
    t.finish();
}

#[test]
fn criterion_5_case_i() {
    let mut t = Tally::new(5);
    let name = "system_atoms_case_i";
    let schedule = first_schedule(name);
    check_estimate(
        &mut t,
        name,
        &schedule,
        Field::U,
        FOUR_PI,
        SYSTEM_REL * FOUR_PI,
    );
    check_estimate(&mut t, name, &schedule, Field::V, 0.0, CASE_I_V_ABS);
    t.finish();
}

#[test]
fn criterion_6_nonuniqueness() {
    let mut t = Tally::new(6);
    let name = "nonuniqueness_5pi_2pi";
    let targets = [("one", 3.0 * PI, PI), ("two", 3.5 * PI, 0.5 * PI)];
    for (schedule, a, b) in targets {
        check_estimate(&mut t, name, schedule, Field::U, a, NONUNIQUE_REL * a);
        check_estimate(&mut t, name, schedule, Field::V, b, NONUNIQUE_REL * b);
    }
    match (
        finest_estimate(name, "one", Field::U),
        finest_estimate(name, "two", Field::U),
    ) {
        (Some((x, ex)), Some((y, ey))) => t.check(
            "u estimates separated",
            (x - y).abs() > ex + ey,
            format!(
                "|{} - {}| = {:.4} vs error bars {:.4}",
                pi(x),
                pi(y),
                (x - y).abs(),
                ex + ey
            ),
        ),
        _ => t.check("u estimates separated", false, "missing estimate"),
    }
    println!("criterion 6: {name} ran in {:.1}s", scenario(name).2);
    t.finish();
}

#[test]
fn criterion_7_added_field() {
    let mut t = Tally::new(7);
    let mut count = 0;
    for name in SCENARIOS {
        let (sc, out, _) = scenario(name);
        if sc.problem != ProblemKind::System {
            continue;
        }
        let mut worst = f64::INFINITY;
        let mut ok = true;
        for (h, schedule, term) in solved_terms(out) {
            count += 1;
            let label = format!("{name} {schedule} h={h} term {}", term.index);
            let Some(inv) = term.invariants.as_ref() else {
                t.check(&label, false, "invariants missing");
                continue;
            };
            let (Some(margin), Some(tol)) = (inv.added_field_margin, inv.added_field_tolerance)
            else {
                t.check(&label, false, "added-field margin not measured");
                continue;
            };
            if margin < -tol || inv.min_value < -SIGN_TOL {
                ok = false;
                t.check(
                    &label,
                    false,
                    format!(
                        "margin {margin:.3e}, tolerance {tol:.3e}, min {:.3e}",
                        inv.min_value
                    ),
                );
            }
            worst = worst.min(margin + tol);
        }
        t.check(
            &format!("{name} added field"),
            ok,
            format!("min(margin + tolerance) {worst:.3e}"),
        );
    }
    t.check("converged system solves", count > 0, format!("{count}"));
    t.finish();
}

/// `-Δu = c` on the unit square with zero boundary values, at `(x, y)`, by double sine series.
fn poisson_series(c: f64, x: f64, y: f64, terms: usize) -> f64 {
    let mut s = 0.0;
    for m in (1..terms).step_by(2) {
        for n in (1..terms).step_by(2) {
            let (m, n) = (m as f64, n as f64);
            s += (m * PI * x).sin() * (n * PI * y).sin() / (m * n * (m * m + n * n));
        }
    }
    16.0 * c / PI.powi(4) * s
}

fn five_point(u: &GridFunction<f64>, i: usize, j: usize) -> f64 {
    let h = u.domain().h();
    (4.0 * u.at(i, j) - u.at(i - 1, j) - u.at(i + 1, j) - u.at(i, j - 1) - u.at(i, j + 1)) / (h * h)
}

#[test]
fn criterion_8_solver_verification() {
    let mut t = Tally::new(8);
    let start = Instant::now();

    let dom = Domain::unit_square(1.0 / 256.0).unwrap();
    let f = FiniteMeasure::from_density_fn(dom, |_| 2.0).unwrap();
    let u = solve_poisson(&f, &SolverConfig::default()).unwrap();
    let (ic, jc) = dom.nearest_node(Point::new(0.5, 0.5));
    let oracle = poisson_series(2.0, 0.5, 0.5, 4001);
    let got = u.at(ic, jc);
    t.check(
        "poisson centre value",
        within(got, oracle, POISSON_ABS),
        format!("{got:.6} vs series {oracle:.6}"),
    );

    let dom = Domain::unit_square(1.0 / 64.0).unwrap();
    let f = FiniteMeasure::from_density_fn(dom, |p| 10.0 * (PI * p.x).sin() * (PI * p.y).sin())
        .unwrap();
    let nl = Nonlinearity::CHERN_SIMONS;
    let coeffs = (-1.0..1.0f64, -1.0..1.0f64, 1usize..6, 1usize..6);
    let mut runner = TestRunner::new(Config {
        cases: 24,
        failure_persistence: None,
        ..Config::default()
    });
    let worst = std::cell::Cell::new(0.0f64);
    let jac = runner.run(&coeffs, |(a, b, k, l)| {
        let (k, l) = (k as f64, l as f64);
        let base = GridFunction::from_fn(dom, |p| {
            a * (k * PI * p.x).sin() * (PI * p.y).sin() + 0.3 * p.x * (1.0 - p.x)
        });
        let w = GridFunction::from_fn(dom, |p| {
            b * (PI * p.x).sin() * (l * PI * p.y).sin() + 0.1 * p.y
        });
        let step = 1e-4;
        let plus =
            scalar_residual(&base.zip_with(&w, |x, y| x + step * y).unwrap(), &f, nl).unwrap();
        let minus =
            scalar_residual(&base.zip_with(&w, |x, y| x - step * y).unwrap(), &f, nl).unwrap();
        let fd = plus
            .zip_with(&minus, |p, m| (p - m) / (2.0 * step))
            .unwrap();
        let exact = jacobian_apply(&base, nl, &w).unwrap();
        let diff = exact.zip_with(&fd, |x, y| x - y).unwrap();
        let rel = diff.max_abs() / exact.max_abs();
        worst.set(worst.get().max(rel));
        prop_assert!(rel <= JACOBIAN_REL, "relative error {rel:.3e}");
        Ok(())
    });
    t.check(
        "jacobian vs central differences",
        jac.is_ok(),
        format!("worst relative error {:.3e}", worst.get()),
    );

    let dom = Domain::unit_square(1.0 / 512.0).unwrap();
    let a = Point::new(0.5, 0.5);
    let m = FiniteMeasure::from_atoms(dom, vec![Atom::new(a, TWO_PI)]).unwrap();
    let pot = newtonian_potential(&m);
    let flux = contour_flux(&pot, a, 0.1).unwrap();
    t.check(
        "log potential flux",
        (flux - TWO_PI).abs() <= LOG_FLUX_REL * TWO_PI,
        format!(
            "{} vs 2pi, relative {:.3e}",
            pi(flux),
            (flux - TWO_PI).abs() / TWO_PI
        ),
    );

    let dom = Domain::unit_square(1.0 / 128.0).unwrap();
    let b = Point::new(0.4, 0.55);
    let m = FiniteMeasure::from_atoms(
        dom,
        vec![Atom::new(b, 3.0 * PI), Atom::new(Point::new(0.6, 0.45), PI)],
    )
    .unwrap();
    let field = newtonian_potential(&m)
        .zip_with(
            &GridFunction::from_fn(dom, |p| (3.0 * p.x).cos() * p.y),
            |x, y| x + y,
        )
        .unwrap();
    let (bi, bj) = dom.nearest_node(b);
    let mut worst = 0.0f64;
    for (r_in, r_out) in [(0.05, 0.2), (0.1, 0.15), (0.02, 0.3)] {
        let outer = contour_flux(&field, b, r_out).unwrap();
        let inner = contour_flux(&field, b, r_in).unwrap();
        let (k_in, k_out) = (
            (r_in / dom.h() - 0.5).round() as usize,
            (r_out / dom.h() - 0.5).round() as usize,
        );
        let mut between = 0.0;
        for j in bj - k_out..=bj + k_out {
            for i in bi - k_out..=bi + k_out {
                if i.abs_diff(bi).max(j.abs_diff(bj)) > k_in {
                    between += five_point(&field, i, j);
                }
            }
        }
        between *= dom.h() * dom.h();
        worst = worst.max((outer - inner - between).abs());
    }
    t.check(
        "divergence identity",
        worst <= DIVERGENCE_ABS,
        format!("max defect {worst:.3e}"),
    );

    let secs = start.elapsed().as_secs_f64();
    t.check(
        "runtime",
        secs < VERIFICATION_BUDGET_SECS,
        format!("{secs:.2}s"),
    );
    t.finish();
}

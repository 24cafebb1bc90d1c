//! Finite-difference Dirichlet solvers on the node grid of a [`Domain`].
//!
//! All operators use the 5-point Laplacian. Scalar problems
//! `-Δ_h u + g(u) = f` are solved by damped Newton started from the Poisson
//! supersolution, with the relaxation `(-Δ_h + λ) u_{k+1} = f + λ u_k - g(u_k)`
//! as a fallback. The system is solved by block Gauss-Seidel on its two
//! scalar equations.

mod multigrid;
pub mod potential;

use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::measure::{Domain, FiniteMeasure};
use crate::real::Real;
use crate::reduced::Nonlinearity;

use multigrid::{apply_into, pcg, Multigrid};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverConfig {
    /// Newton stops once `max|F(u)| <= newton_tol * max(1, max|f|)`.
    pub newton_tol: f64,
    pub newton_max_iters: usize,
    /// Smallest line-search step before Newton gives up.
    pub min_step: f64,
    /// Relative max-norm residual for every linear solve.
    pub linear_solver_tol: f64,
    pub linear_max_iters: usize,
    /// L1 distance between successive Gauss-Seidel sweeps (both components summed).
    pub outer_gs_tol: f64,
    pub outer_gs_max_iters: usize,
    /// Iteration cap of the relaxation fallback.
    pub monotone_max_iters: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            newton_tol: 1e-8,
            newton_max_iters: 60,
            min_step: 2f64.powi(-20),
            linear_solver_tol: 1e-10,
            linear_max_iters: 500,
            outer_gs_tol: 1e-8,
            outer_gs_max_iters: 200,
            monotone_max_iters: 2000,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.newton_tol,
            self.min_step,
            self.linear_solver_tol,
            self.outer_gs_tol,
        ];
        if positive.iter().any(|t| !(*t > 0.0)) {
            return Err(Error::Scenario("solver tolerances must be positive".into()));
        }
        if self.newton_max_iters == 0 || self.linear_max_iters == 0 || self.outer_gs_max_iters == 0
        {
            return Err(Error::Scenario(
                "solver iteration limits must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SolveStats {
    pub newton_iterations: usize,
    pub linear_iterations: usize,
    /// Final `max|F(u)|`.
    pub residual: f64,
    /// Tolerance the residual was held to.
    pub tolerance: f64,
    pub used_fallback: bool,
    /// Relaxation iterates were pointwise nonincreasing (always true without fallback).
    pub monotone: bool,
}

#[derive(Clone, Debug)]
pub struct ScalarSolution<T> {
    pub u: GridFunction<T>,
    pub stats: SolveStats,
}

#[derive(Clone, Debug)]
pub struct SystemSolution<T> {
    pub u: GridFunction<T>,
    pub v: GridFunction<T>,
    pub sweeps: usize,
    /// L1 gap after each sweep.
    pub gaps: Vec<f64>,
    pub residual_u: f64,
    pub residual_v: f64,
    pub tolerance_u: f64,
    pub tolerance_v: f64,
}

/// Pointwise absorption term of one scalar equation.
#[derive(Clone, Copy)]
enum Absorption<'a, T> {
    Kind(Nonlinearity),
    /// `e^{w_p} (e^t - 1)` with `w` frozen.
    Coupled(&'a [T]),
}

impl<T: Real> Absorption<'_, T> {
    #[inline]
    fn g(&self, p: usize, t: T) -> T {
        match self {
            Self::Kind(nl) => nl.eval(t),
            Self::Coupled(w) => w[p].exp() * t.exp_m1(),
        }
    }

    #[inline]
    fn dg(&self, p: usize, t: T) -> T {
        match self {
            Self::Kind(nl) => nl.derivative(t),
            Self::Coupled(w) => (w[p] + t).exp(),
        }
    }

    /// Exponent guard: `false` once `g` would overflow.
    #[inline]
    fn admissible(&self, p: usize, t: T) -> bool {
        let limit = T::lit(700.0);
        match self {
            Self::Kind(nl) => t * T::lit(nl.growth_rate()) <= limit,
            Self::Coupled(w) => w[p] + t <= limit && w[p] <= limit,
        }
    }
}

struct Problem<'a, T> {
    dom: Domain<T>,
    rhs: &'a [T],
    abs: Absorption<'a, T>,
    cfg: &'a SolverConfig,
}

fn interior(dom: &Domain<impl Real>) -> impl Iterator<Item = usize> + '_ {
    let cols = dom.cols();
    (1..dom.ny()).flat_map(move |j| (1..dom.nx()).map(move |i| j * cols + i))
}

fn max_abs<T: Real>(a: &[T]) -> T {
    a.iter().fold(T::zero(), |m, v| m.max(v.abs()))
}

#[derive(Debug)]
enum NewtonFailure {
    Linear(Error),
    Stalled { residual: f64 },
}

impl<T: Real> Problem<'_, T> {
    fn inv_h2(&self) -> T {
        T::one() / (self.dom.h() * self.dom.h())
    }

    fn tolerance(&self) -> T {
        T::lit(self.cfg.newton_tol) * T::one().max(max_abs(self.rhs))
    }

    fn zeros(&self) -> Vec<T> {
        vec![T::zero(); self.dom.len()]
    }

    fn residual(&self, u: &[T], out: &mut [T]) {
        apply_into(self.dom.nx(), self.dom.ny(), self.inv_h2(), None, u, out);
        for p in interior(&self.dom) {
            out[p] += self.abs.g(p, u[p]) - self.rhs[p];
        }
    }

    fn admissible(&self, u: &[T]) -> bool {
        interior(&self.dom).all(|p| u[p].is_finite() && self.abs.admissible(p, u[p]))
    }

    fn l2(&self, r: &[T]) -> T {
        r.iter().map(|v| *v * *v).sum::<T>().sqrt() * self.dom.h()
    }

    fn linear(&self, c: Vec<T>, b: &[T], x: &mut [T]) -> Result<usize> {
        let mut mg = Multigrid::new(self.dom.nx(), self.dom.ny(), self.dom.h(), c);
        pcg(
            &mut mg,
            b,
            x,
            T::lit(self.cfg.linear_solver_tol),
            self.cfg.linear_max_iters,
        )
    }

    /// Damped Newton from `u`. On failure `u` holds the last accepted iterate.
    fn newton(
        &self,
        u: &mut Vec<T>,
        stats: &mut SolveStats,
    ) -> std::result::Result<(), NewtonFailure> {
        let tol = self.tolerance();
        stats.tolerance = tol.as_f64();
        let mut f = self.zeros();
        self.residual(u, &mut f);
        let mut norm = self.l2(&f);
        let mut cand = self.zeros();
        let mut fc = self.zeros();
        for _ in 0..self.cfg.newton_max_iters {
            let res = max_abs(&f);
            stats.residual = res.as_f64();
            if res <= tol {
                return Ok(());
            }
            stats.newton_iterations += 1;
            let mut c = self.zeros();
            for p in interior(&self.dom) {
                c[p] = self.abs.dg(p, u[p]);
            }
            let mut delta = self.zeros();
            stats.linear_iterations += self
                .linear(c, &f, &mut delta)
                .map_err(NewtonFailure::Linear)?;
            let mut theta = T::one();
            let min_step = T::lit(self.cfg.min_step);
            loop {
                for k in 0..u.len() {
                    cand[k] = u[k] - theta * delta[k];
                }
                if self.admissible(&cand) {
                    self.residual(&cand, &mut fc);
                    let n = self.l2(&fc);
                    if n < norm || max_abs(&fc) <= tol {
                        norm = n;
                        break;
                    }
                }
                theta *= T::lit(0.5);
                if theta < min_step {
                    return Err(NewtonFailure::Stalled {
                        residual: res.as_f64(),
                    });
                }
            }
            std::mem::swap(u, &mut cand);
            std::mem::swap(&mut f, &mut fc);
        }
        let res = max_abs(&f);
        stats.residual = res.as_f64();
        if res <= tol {
            Ok(())
        } else {
            Err(NewtonFailure::Stalled {
                residual: res.as_f64(),
            })
        }
    }

    /// Relaxation `(-Δ_h + λ) u_{k+1} = f + λ u_k - g(u_k)` from the supersolution `u`.
    fn monotone(&self, u: &mut [T], stats: &mut SolveStats) -> Result<()> {
        let tol = self.tolerance();
        stats.tolerance = tol.as_f64();
        stats.used_fallback = true;
        stats.monotone = true;
        let lambda = interior(&self.dom)
            .map(|p| self.abs.dg(p, u[p]))
            .fold(T::zero(), T::max);
        let mut c = self.zeros();
        for p in interior(&self.dom) {
            c[p] = lambda;
        }
        let mut mg = Multigrid::new(self.dom.nx(), self.dom.ny(), self.dom.h(), c);
        let mut f = self.zeros();
        let mut b = self.zeros();
        let mut next = u.to_vec();
        for _ in 0..self.cfg.monotone_max_iters {
            self.residual(u, &mut f);
            let res = max_abs(&f);
            stats.residual = res.as_f64();
            if res <= tol {
                return Ok(());
            }
            for p in interior(&self.dom) {
                b[p] = self.rhs[p] + lambda * u[p] - self.abs.g(p, u[p]);
            }
            stats.linear_iterations += pcg(
                &mut mg,
                &b,
                &mut next,
                T::lit(self.cfg.linear_solver_tol),
                self.cfg.linear_max_iters,
            )?;
            let slack = T::lit(1e-12) * T::one().max(max_abs(u));
            if interior(&self.dom).any(|p| next[p] > u[p] + slack) {
                stats.monotone = false;
            }
            u.copy_from_slice(&next);
        }
        Err(Error::NonConvergence {
            reason: format!(
                "relaxation stalled after {} iterations",
                self.cfg.monotone_max_iters
            ),
            residual: stats.residual,
            last_iterate: u.iter().map(|v| v.as_f64()).collect(),
        })
    }

    /// Newton from `start`, retried from `sup` and finally relaxed monotonically from `sup`.
    fn solve(&self, start: Option<&[T]>, sup: &[T]) -> Result<(Vec<T>, SolveStats)> {
        let mut stats = SolveStats {
            monotone: true,
            ..SolveStats::default()
        };
        if let Some(s) = start {
            let mut u = s.to_vec();
            if self.admissible(&u) && self.newton(&mut u, &mut stats).is_ok() {
                return Ok((u, stats));
            }
        }
        let mut u = sup.to_vec();
        let failure = match self.newton(&mut u, &mut stats) {
            Ok(()) => return Ok((u, stats)),
            Err(e) => e,
        };
        let mut relaxed = sup.to_vec();
        match self.monotone(&mut relaxed, &mut stats) {
            Ok(()) => Ok((relaxed, stats)),
            Err(Error::NonConvergence {
                reason,
                residual,
                last_iterate,
            }) => {
                let newton = match failure {
                    NewtonFailure::Linear(e) => e.to_string(),
                    NewtonFailure::Stalled { residual } => {
                        format!("Newton stalled at residual {residual:e}")
                    }
                };
                Err(Error::NonConvergence {
                    reason: format!("{newton}; {reason}"),
                    residual,
                    last_iterate,
                })
            }
            Err(e) => Err(e),
        }
    }
}

fn diffuse_values<T: Real>(f: &FiniteMeasure<T>) -> Result<Vec<T>> {
    if !f.is_diffuse_only() {
        return Err(Error::NotDiffuse(f.atoms().len()));
    }
    Ok(f.diffuse()
        .map_or_else(|| vec![T::zero(); f.domain().len()], <[T]>::to_vec))
}

fn poisson_values<T: Real>(dom: &Domain<T>, rhs: &[T], cfg: &SolverConfig) -> Result<Vec<T>> {
    let mut b = vec![T::zero(); dom.len()];
    for p in interior(dom) {
        b[p] = rhs[p];
    }
    let mut mg = Multigrid::new(dom.nx(), dom.ny(), dom.h(), vec![T::zero(); dom.len()]);
    let mut x = vec![T::zero(); dom.len()];
    pcg(
        &mut mg,
        &b,
        &mut x,
        T::lit(cfg.linear_solver_tol),
        cfg.linear_max_iters,
    )?;
    Ok(x)
}

/// `-Δ_h U = f` with `U = 0` on the boundary.
pub fn solve_poisson<T: Real>(f: &FiniteMeasure<T>, cfg: &SolverConfig) -> Result<GridFunction<T>> {
    let rhs = diffuse_values(f)?;
    Ok(GridFunction::from_raw(
        *f.domain(),
        poisson_values(f.domain(), &rhs, cfg)?,
    ))
}

/// `N(m)` at every node, boundary included (the potential does not vanish there).
pub fn newtonian_potential<T: Real>(m: &FiniteMeasure<T>) -> GridFunction<T> {
    let values = potential::potential_f64(&potential::to_f64_measure(m));
    GridFunction::from_raw(*m.domain(), values.into_iter().map(T::lit).collect())
}

/// Solves `-Δ_h u + g(u) = f + offset` for diffuse `f`.
pub fn solve_scalar<T: Real>(
    f: &FiniteMeasure<T>,
    nl: Nonlinearity,
    cfg: &SolverConfig,
) -> Result<GridFunction<T>> {
    solve_scalar_detailed(f, nl, cfg, None).map(|s| s.u)
}

/// As [`solve_scalar`], optionally starting Newton from `initial`, and returning iteration statistics.
pub fn solve_scalar_detailed<T: Real>(
    f: &FiniteMeasure<T>,
    nl: Nonlinearity,
    cfg: &SolverConfig,
    initial: Option<&GridFunction<T>>,
) -> Result<ScalarSolution<T>> {
    cfg.validate()?;
    let dom = *f.domain();
    let mut rhs = diffuse_values(f)?;
    let offset = nl.source_offset::<T>();
    for v in &mut rhs {
        *v += offset;
    }
    let positive: Vec<T> = rhs.iter().map(|v| v.max(T::zero())).collect();
    let sup = poisson_values(&dom, &positive, cfg)?;
    let problem = Problem {
        dom,
        rhs: &rhs,
        abs: Absorption::Kind(nl),
        cfg,
    };
    if let Some(init) = initial {
        if !init.domain().same_grid(&dom) {
            return Err(Error::GridMismatch);
        }
    }
    let (u, stats) = problem.solve(initial.map(GridFunction::values), &sup)?;
    Ok(ScalarSolution {
        u: GridFunction::from_raw(dom, u),
        stats,
    })
}

/// Block Gauss-Seidel for `-Δu + e^v(e^u - 1) = f_μ`, `-Δv + e^u(e^v - 1) = f_ν`.
pub fn solve_system<T: Real>(
    fmu: &FiniteMeasure<T>,
    fnu: &FiniteMeasure<T>,
    cfg: &SolverConfig,
) -> Result<(GridFunction<T>, GridFunction<T>)> {
    solve_system_detailed(fmu, fnu, cfg, None).map(|s| (s.u, s.v))
}

pub fn solve_system_detailed<T: Real>(
    fmu: &FiniteMeasure<T>,
    fnu: &FiniteMeasure<T>,
    cfg: &SolverConfig,
    initial: Option<(&GridFunction<T>, &GridFunction<T>)>,
) -> Result<SystemSolution<T>> {
    cfg.validate()?;
    if !fmu.domain().same_grid(fnu.domain()) {
        return Err(Error::DomainMismatch);
    }
    let dom = *fmu.domain();
    let rhs_u = diffuse_values(fmu)?;
    let rhs_v = diffuse_values(fnu)?;
    let sup_u = poisson_values(&dom, &rhs_u, cfg)?;
    let sup_v = poisson_values(&dom, &rhs_v, cfg)?;
    let (mut u, mut v) = match initial {
        Some((u0, v0)) => {
            if !u0.domain().same_grid(&dom) || !v0.domain().same_grid(&dom) {
                return Err(Error::GridMismatch);
            }
            (Some(u0.values().to_vec()), Some(v0.values().to_vec()))
        }
        None => (None, None),
    };
    let h2 = (dom.h() * dom.h()).as_f64();
    let l1 = |a: &[T], b: Option<&Vec<T>>| -> f64 {
        match b {
            Some(b) => {
                a.iter()
                    .zip(b)
                    .map(|(x, y)| (*x - *y).abs().as_f64())
                    .sum::<f64>()
                    * h2
            }
            None => f64::INFINITY,
        }
    };
    let zeros = vec![T::zero(); dom.len()];
    let mut gaps = Vec::new();
    for sweep in 1..=cfg.outer_gs_max_iters {
        let v_frozen = v.clone().unwrap_or_else(|| zeros.clone());
        let pu = Problem {
            dom,
            rhs: &rhs_u,
            abs: Absorption::Coupled(&v_frozen),
            cfg,
        };
        let (u_new, _) = pu
            .solve(u.as_deref(), &sup_u)
            .map_err(|e| e.at_sweep(sweep))?;
        let pv = Problem {
            dom,
            rhs: &rhs_v,
            abs: Absorption::Coupled(&u_new),
            cfg,
        };
        let (v_new, _) = pv
            .solve(v.as_deref(), &sup_v)
            .map_err(|e| e.at_sweep(sweep))?;
        let gap = l1(&u_new, u.as_ref()) + l1(&v_new, v.as_ref());
        gaps.push(gap);
        u = Some(u_new);
        v = Some(v_new);
        let (uu, vv) = (
            u.as_ref().expect("set above"),
            v.as_ref().expect("set above"),
        );
        let pu = Problem {
            dom,
            rhs: &rhs_u,
            abs: Absorption::Coupled(vv),
            cfg,
        };
        let pv = Problem {
            dom,
            rhs: &rhs_v,
            abs: Absorption::Coupled(uu),
            cfg,
        };
        let mut r = vec![T::zero(); dom.len()];
        pu.residual(uu, &mut r);
        let residual_u = max_abs(&r).as_f64();
        pv.residual(vv, &mut r);
        let residual_v = max_abs(&r).as_f64();
        let (tolerance_u, tolerance_v) = (pu.tolerance().as_f64(), pv.tolerance().as_f64());
        if gap <= cfg.outer_gs_tol && residual_u <= tolerance_u && residual_v <= tolerance_v {
            return Ok(SystemSolution {
                u: GridFunction::from_raw(dom, u.expect("set above")),
                v: GridFunction::from_raw(dom, v.expect("set above")),
                sweeps: sweep,
                gaps,
                residual_u,
                residual_v,
                tolerance_u,
                tolerance_v,
            });
        }
    }
    Err(Error::OuterNonConvergence {
        sweeps: cfg.outer_gs_max_iters,
        gap: gaps.last().copied().unwrap_or(f64::NAN),
    })
}

/// `-Δ_h u` on interior nodes, zero on the boundary.
pub fn neg_laplacian<T: Real>(u: &GridFunction<T>) -> GridFunction<T> {
    let dom = *u.domain();
    let mut out = vec![T::zero(); dom.len()];
    apply_into(
        dom.nx(),
        dom.ny(),
        T::one() / (dom.h() * dom.h()),
        None,
        u.values(),
        &mut out,
    );
    GridFunction::from_raw(dom, out)
}

/// `g(u)` on interior nodes, zero on the boundary.
pub fn absorption<T: Real>(u: &GridFunction<T>, nl: Nonlinearity) -> GridFunction<T> {
    u.map(|t| nl.eval(t))
}

/// `-Δ_h u + g(u) - (f + offset)` on interior nodes.
pub fn scalar_residual<T: Real>(
    u: &GridFunction<T>,
    f: &FiniteMeasure<T>,
    nl: Nonlinearity,
) -> Result<GridFunction<T>> {
    if !u.domain().same_grid(f.domain()) {
        return Err(Error::GridMismatch);
    }
    let mut rhs = diffuse_values(f)?;
    let offset = nl.source_offset::<T>();
    rhs.iter_mut().for_each(|v| *v += offset);
    let cfg = SolverConfig::default();
    let problem = Problem {
        dom: *u.domain(),
        rhs: &rhs,
        abs: Absorption::Kind(nl),
        cfg: &cfg,
    };
    let mut out = vec![T::zero(); rhs.len()];
    problem.residual(u.values(), &mut out);
    Ok(GridFunction::from_raw(*u.domain(), out))
}

/// Action of the Newton Jacobian `-Δ_h + diag(g'(u))` on `w`.
pub fn jacobian_apply<T: Real>(
    u: &GridFunction<T>,
    nl: Nonlinearity,
    w: &GridFunction<T>,
) -> Result<GridFunction<T>> {
    if !u.domain().same_grid(w.domain()) {
        return Err(Error::GridMismatch);
    }
    let dom = *u.domain();
    let mut c = vec![T::zero(); dom.len()];
    for p in interior(&dom) {
        c[p] = nl.derivative(u.values()[p]);
    }
    let mut out = vec![T::zero(); dom.len()];
    apply_into(
        dom.nx(),
        dom.ny(),
        T::one() / (dom.h() * dom.h()),
        Some(&c),
        w.values(),
        &mut out,
    );
    Ok(GridFunction::from_raw(dom, out))
}

/// Max-norm residuals of the two system equations.
pub fn system_residuals<T: Real>(
    u: &GridFunction<T>,
    v: &GridFunction<T>,
    fmu: &FiniteMeasure<T>,
    fnu: &FiniteMeasure<T>,
) -> Result<(T, T)> {
    let dom = *u.domain();
    if !dom.same_grid(v.domain()) || !dom.same_grid(fmu.domain()) || !dom.same_grid(fnu.domain()) {
        return Err(Error::GridMismatch);
    }
    let (a, b) = (diffuse_values(fmu)?, diffuse_values(fnu)?);
    let cfg = SolverConfig::default();
    let mut r = vec![T::zero(); dom.len()];
    Problem {
        dom,
        rhs: &a,
        abs: Absorption::Coupled(v.values()),
        cfg: &cfg,
    }
    .residual(u.values(), &mut r);
    let ru = max_abs(&r);
    Problem {
        dom,
        rhs: &b,
        abs: Absorption::Coupled(u.values()),
        cfg: &cfg,
    }
    .residual(v.values(), &mut r);
    Ok((ru, max_abs(&r)))
}

/// `min` over interior nodes of `-Δ_h s + 2(e^s - 1) - (f_μ + f_ν - 2)` with `s = u + v`.
pub fn added_field_margin<T: Real>(
    u: &GridFunction<T>,
    v: &GridFunction<T>,
    fmu: &FiniteMeasure<T>,
    fnu: &FiniteMeasure<T>,
) -> Result<T> {
    let s = u.zip_with(v, |a, b| a + b)?;
    let lap = neg_laplacian(&s);
    let (a, b) = (diffuse_values(fmu)?, diffuse_values(fnu)?);
    let two = T::lit(2.0);
    let dom = *u.domain();
    Ok(interior(&dom)
        .map(|p| lap.values()[p] + two * s.values()[p].exp_m1() - (a[p] + b[p] - two))
        .fold(T::infinity(), T::min))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{Atom, Point};
    use crate::mollifier::{mollify, MollifierFamily};

    fn bump(h: f64, mass: f64, eps: f64) -> FiniteMeasure<f64> {
        let dom = Domain::unit_square(h).unwrap();
        let m =
            FiniteMeasure::from_atoms(dom, vec![Atom::new(Point::new(0.5, 0.5), mass)]).unwrap();
        mollify(&m, &MollifierFamily::bump(eps)).unwrap()
    }

    #[test]
    fn zero_data_gives_zero() {
        let dom = Domain::unit_square(1.0 / 32.0).unwrap();
        let z = FiniteMeasure::<f64>::zero(dom);
        let cfg = SolverConfig::default();
        assert_eq!(solve_poisson(&z, &cfg).unwrap().max_abs(), 0.0);
        for nl in [Nonlinearity::CHERN_SIMONS, Nonlinearity::EXP_MINUS_ONE] {
            assert_eq!(solve_scalar(&z, nl, &cfg).unwrap().max_abs(), 0.0);
        }
        let (u, v) = solve_system(&z, &z, &cfg).unwrap();
        assert_eq!(u.max_abs() + v.max_abs(), 0.0);
        assert_eq!(newtonian_potential(&z).max_abs(), 0.0);
    }

    #[test]
    fn atoms_are_rejected() {
        let dom = Domain::unit_square(1.0 / 32.0).unwrap();
        let m = FiniteMeasure::from_atoms(dom, vec![Atom::new(Point::new(0.5, 0.5), 1.0)]).unwrap();
        assert!(matches!(
            solve_scalar(&m, Nonlinearity::CHERN_SIMONS, &SolverConfig::default()),
            Err(Error::NotDiffuse(1))
        ));
    }

    #[test]
    fn scalar_newton_converges_and_is_bracketed() {
        let f = bump(1.0 / 64.0, 3.0 * std::f64::consts::PI, 0.1);
        let cfg = SolverConfig::default();
        let sol = solve_scalar_detailed(&f, Nonlinearity::CHERN_SIMONS, &cfg, None).unwrap();
        assert!(sol.stats.residual <= sol.stats.tolerance);
        assert!(!sol.stats.used_fallback);
        let big_u = solve_poisson(&f, &cfg).unwrap();
        for (a, b) in sol.u.values().iter().zip(big_u.values()) {
            assert!(*a >= -1e-12 && *a <= *b + 1e-10);
        }
    }

    #[test]
    fn relaxation_fallback_is_monotone() {
        let f = bump(1.0 / 32.0, 2.0, 0.25);
        let dom = *f.domain();
        let rhs = diffuse_values(&f).unwrap();
        let cfg = SolverConfig::default();
        let sup = poisson_values(&dom, &rhs, &cfg).unwrap();
        let problem = Problem {
            dom,
            rhs: &rhs,
            abs: Absorption::Kind(Nonlinearity::CHERN_SIMONS),
            cfg: &cfg,
        };
        let mut u = sup.clone();
        let mut stats = SolveStats::default();
        problem.monotone(&mut u, &mut stats).unwrap();
        assert!(stats.monotone && stats.used_fallback);
        let newton = solve_scalar(&f, Nonlinearity::CHERN_SIMONS, &cfg).unwrap();
        let diff = u
            .iter()
            .zip(newton.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(diff < 1e-7, "{diff}");
    }

    #[test]
    fn symmetric_system_data_gives_equal_components() {
        let f = bump(1.0 / 32.0, 2.0 * std::f64::consts::PI, 0.2);
        let cfg = SolverConfig::default();
        let sol = solve_system_detailed(&f, &f, &cfg, None).unwrap();
        let gap = crate::grid::l1_gap(&sol.u, &sol.v).unwrap();
        assert!(gap <= cfg.outer_gs_tol, "{gap}");
        assert!(sol.u.min() >= -1e-8 && sol.v.min() >= -1e-8);
    }

    #[test]
    fn runs_in_single_precision() {
        let dom = Domain::<f32>::unit_square(1.0 / 16.0).unwrap();
        let f = FiniteMeasure::from_density_fn(dom, |_| 3.0f32).unwrap();
        let cfg = SolverConfig {
            newton_tol: 1e-4,
            linear_solver_tol: 1e-5,
            ..SolverConfig::default()
        };
        let u = solve_scalar(&f, Nonlinearity::CHERN_SIMONS, &cfg).unwrap();
        // below the Poisson value 3 * 0.0737 at the centre
        assert!(u.max() > 0.1 && u.max() < 0.221, "{}", u.max());
    }
}

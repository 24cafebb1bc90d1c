//! Radial shooting for `-u'' - u'/r + g(u) = source` on a disk with `u(R) = 0`.
//!
//! Two modes. [`radial_singular`] puts an atom of mass `α` at the origin and
//! shoots on the constant `c` in `u ~ (α/2π) log(1/r) + c`; it only exists
//! below the atom capacity of `g`. [`radial_mollified`] spreads the same mass
//! with a mollifier and shoots on `u(0)`; it exists for every `α`.

use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::mollifier::MollifierFamily;
use crate::reduced::{Nonlinearity, NonlinearityKind};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShootingConfig {
    /// Integration steps between the inner radius and `R`.
    pub steps: usize,
    /// Inner radius as a fraction of `R` (singular mode only).
    pub inner_fraction: f64,
    pub max_bisections: usize,
}

impl Default for ShootingConfig {
    fn default() -> Self {
        Self {
            steps: 20_000,
            inner_fraction: 1e-6,
            max_bisections: 200,
        }
    }
}

/// Solution samples; `flux[k] = -2π r u'(r)` at `r[k]`.
#[derive(Clone, Debug, PartialEq)]
pub struct RadialProfile {
    pub alpha: f64,
    pub radius: f64,
    /// Log constant (singular mode) or central value (mollified mode).
    pub shooting_parameter: f64,
    pub bisections: usize,
    pub r: Vec<f64>,
    pub u: Vec<f64>,
    pub flux: Vec<f64>,
}

impl RadialProfile {
    /// Linear interpolation of the flux at `r`.
    pub fn flux_at(&self, r: f64) -> f64 {
        let k = self.r.partition_point(|x| *x < r);
        if k == 0 {
            return self.flux[0];
        }
        if k >= self.r.len() {
            return *self.flux.last().unwrap();
        }
        let t = (r - self.r[k - 1]) / (self.r[k] - self.r[k - 1]);
        self.flux[k - 1] + t * (self.flux[k] - self.flux[k - 1])
    }

    /// `n` rows `(r, u, flux)` spread evenly over the samples, first and last included.
    pub fn table(&self, n: usize) -> Vec<(f64, f64, f64)> {
        let len = self.r.len();
        let n = n.clamp(1, len);
        let pick = |k: usize| {
            if n == 1 {
                len - 1
            } else {
                k * (len - 1) / (n - 1)
            }
        };
        (0..n)
            .map(pick)
            .map(|k| (self.r[k], self.u[k], self.flux[k]))
            .collect()
    }
}

/// `g` as a sum of `coef * e^(q u)`.
fn exp_terms(nl: Nonlinearity) -> [(f64, f64); 2] {
    match nl.kind() {
        NonlinearityKind::ChernSimonsScalar => [(1.0, 2.0), (-1.0, 1.0)],
        NonlinearityKind::ExpMinusOne => [(1.0, 1.0), (-1.0, 0.0)],
        NonlinearityKind::TwoExpMinusOneShifted => [(2.0, 1.0), (-2.0, 0.0)],
    }
}

fn overflow_level(nl: Nonlinearity) -> f64 {
    700.0 / nl.growth_rate()
}

type State = [f64; 2];

fn rk4(y: State, t: f64, dt: f64, f: &impl Fn(f64, State) -> State) -> State {
    let k1 = f(t, y);
    let k2 = f(
        t + dt / 2.0,
        [y[0] + dt / 2.0 * k1[0], y[1] + dt / 2.0 * k1[1]],
    );
    let k3 = f(
        t + dt / 2.0,
        [y[0] + dt / 2.0 * k2[0], y[1] + dt / 2.0 * k2[1]],
    );
    let k4 = f(t + dt, [y[0] + dt * k3[0], y[1] + dt * k3[1]]);
    [
        y[0] + dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        y[1] + dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
    ]
}

/// Outcome of one trajectory; `None` when `u` ran past the overflow level.
type Trajectory = Option<(Vec<f64>, Vec<f64>, Vec<f64>)>;

/// Bisection on a parameter whose endpoint value `u(R)` is increasing; blow-ups count as `+∞`.
fn shoot(
    mut lo: f64,
    mut hi: f64,
    cfg: &ShootingConfig,
    end_value: impl Fn(f64) -> Option<f64>,
) -> Result<(f64, usize)> {
    let val = |p: f64| end_value(p).unwrap_or(f64::INFINITY);
    let mut grow = 1.0;
    let mut tries = 0;
    while val(lo) > 0.0 {
        lo -= grow;
        grow *= 2.0;
        tries += 1;
        if tries > 60 {
            return Err(Error::Shooting("no lower bracket".into()));
        }
    }
    grow = 1.0;
    tries = 0;
    while val(hi) < 0.0 {
        hi += grow;
        grow *= 2.0;
        tries += 1;
        if tries > 60 {
            return Err(Error::Shooting("no upper bracket".into()));
        }
    }
    for it in 0..cfg.max_bisections {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return Ok((mid, it));
        }
        let v = val(mid);
        if v == 0.0 {
            return Ok((mid, it));
        }
        if v < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if (hi - lo).abs() <= 1e-12 * (1.0 + lo.abs()) {
        Ok((0.5 * (lo + hi), cfg.max_bisections))
    } else {
        Err(Error::Shooting(format!(
            "bracket [{lo}, {hi}] still open after {} bisections",
            cfg.max_bisections
        )))
    }
}

fn check_inputs(alpha: f64, radius: f64, cfg: &ShootingConfig) -> Result<()> {
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(Error::Shooting(format!(
            "mass must be finite and nonnegative, got {alpha}"
        )));
    }
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::Shooting(format!(
            "radius must be positive, got {radius}"
        )));
    }
    if cfg.steps < 10 || !(cfg.inner_fraction > 0.0 && cfg.inner_fraction < 1.0) {
        return Err(Error::Shooting("invalid shooting configuration".into()));
    }
    Ok(())
}

fn zero_profile(alpha: f64, radius: f64, steps: usize) -> RadialProfile {
    let r: Vec<f64> = (0..=steps)
        .map(|k| radius * k as f64 / steps as f64)
        .collect();
    RadialProfile {
        alpha,
        radius,
        shooting_parameter: 0.0,
        bisections: 0,
        u: vec![0.0; r.len()],
        flux: vec![0.0; r.len()],
        r,
    }
}

/// Atom of mass `alpha` at the origin; requires `alpha` below the capacity of `nl`.
///
/// Integrates in `s = log r` with `w = r u'`, so `u_s = w`, `w_s = r^2 g(u)`.
/// The start values at the inner radius include the first correction from
/// integrating each exponential term of `g` against the pure log profile.
pub fn radial_singular(
    alpha: f64,
    nl: Nonlinearity,
    radius: f64,
    cfg: &ShootingConfig,
) -> Result<RadialProfile> {
    check_inputs(alpha, radius, cfg)?;
    let cap: f64 = nl.atom_capacity();
    if alpha >= cap {
        return Err(Error::Shooting(format!(
            "no solution with a point mass {alpha} at or above the capacity {cap} of {}",
            nl.kind().name()
        )));
    }
    if alpha == 0.0 {
        return Ok(zero_profile(alpha, radius, cfg.steps));
    }
    let a = alpha / TAU;
    let terms = exp_terms(nl);
    let (s0, s1) = ((radius * cfg.inner_fraction).ln(), radius.ln());
    let ds = (s1 - s0) / cfg.steps as f64;
    let limit = overflow_level(nl);
    let rhs = |s: f64, y: State| -> State { [y[1], (2.0 * s).exp() * nl.eval(y[0])] };
    let run = |c: f64, keep: bool| -> Trajectory {
        let (mut u0, mut w0) = (c - a * s0, -a);
        for (coef, q) in terms {
            let p = 2.0 - q * a;
            let e = coef * (q * c + p * s0).exp();
            w0 += e / p;
            u0 += e / (p * p);
        }
        let mut y = [u0, w0];
        let mut out = keep.then(|| (Vec::with_capacity(cfg.steps + 1), Vec::new(), Vec::new()));
        for k in 0..=cfg.steps {
            let s = s0 + ds * k as f64;
            if let Some((r, u, f)) = out.as_mut() {
                r.push(s.exp());
                u.push(y[0]);
                f.push(-TAU * y[1]);
            }
            if k < cfg.steps {
                y = rk4(y, s, ds, &rhs);
                if !(y[0] < limit) {
                    return None;
                }
            }
        }
        Some(out.unwrap_or_else(|| (Vec::new(), vec![y[0]], Vec::new())))
    };
    let end = |c: f64| run(c, false).map(|(_, u, _)| u[0]);
    let (c, bisections) = shoot(a * s1 - 1.0, a * s1 + 1.0, cfg, end)?;
    let (r, u, flux) =
        run(c, true).ok_or_else(|| Error::Shooting("converged trajectory overflowed".into()))?;
    Ok(RadialProfile {
        alpha,
        radius,
        shooting_parameter: c,
        bisections,
        r,
        u,
        flux,
    })
}

/// Source `alpha * ρ_ε(r)` with the 2D-normalized kernel of `family`; any `alpha ≥ 0`.
pub fn radial_mollified(
    alpha: f64,
    nl: Nonlinearity,
    radius: f64,
    family: &MollifierFamily<f64>,
    cfg: &ShootingConfig,
) -> Result<RadialProfile> {
    check_inputs(alpha, radius, cfg)?;
    let eps = family.epsilon;
    if !(eps > 0.0 && eps < radius) {
        return Err(Error::Shooting(format!(
            "mollifier width {eps} must lie in (0, {radius})"
        )));
    }
    if alpha == 0.0 {
        return Ok(zero_profile(alpha, radius, cfg.steps));
    }
    // normalize ∫ ρ 2πr dr = 1 by composite Simpson
    let n = 4000;
    let dr = eps / n as f64;
    let mut norm = 0.0;
    for k in 0..=n {
        let r = dr * k as f64;
        let w = if k == 0 || k == n {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        norm += w * family.profile(r) * TAU * r;
    }
    norm *= dr / 3.0;
    let source = |r: f64| alpha * family.profile(r) / norm;
    let dr = radius / cfg.steps as f64;
    let limit = overflow_level(nl);
    let rhs = |r: f64, y: State| -> State { [y[1], nl.eval(y[0]) - source(r) - y[1] / r] };
    let run = |u_center: f64, keep: bool| -> Trajectory {
        // Taylor start one step off the centre
        let curv = 0.5 * (nl.eval(u_center) - source(0.0));
        let mut y = [u_center + 0.5 * curv * dr * dr, curv * dr];
        let mut out = keep.then(|| (vec![0.0], vec![u_center], vec![0.0]));
        for k in 1..=cfg.steps {
            let r = dr * k as f64;
            if let Some((rs, us, fs)) = out.as_mut() {
                rs.push(r);
                us.push(y[0]);
                fs.push(-TAU * r * y[1]);
            }
            if k < cfg.steps {
                y = rk4(y, r, dr, &rhs);
                if !(y[0] < limit) {
                    return None;
                }
            }
        }
        Some(out.unwrap_or_else(|| (Vec::new(), vec![y[0]], Vec::new())))
    };
    let end = |p: f64| run(p, false).map(|(_, u, _)| u[0]);
    let (p, bisections) = shoot(0.0, 1.0, cfg, end)?;
    let (r, u, flux) =
        run(p, true).ok_or_else(|| Error::Shooting("converged trajectory overflowed".into()))?;
    Ok(RadialProfile {
        alpha,
        radius,
        shooting_parameter: p,
        bisections,
        r,
        u,
        flux,
    })
}

//! Discrete mollifiers and weak-* distances between measures.

use std::str::FromStr;

use crate::error::{Error, Result};
use crate::measure::{Domain, FiniteMeasure, Point};
use crate::real::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum KernelShape {
    /// `exp(-1 / (1 - |x/ε|^2))` on `|x| < ε`.
    #[default]
    CompactBump,
    /// Gaussian with standard deviation `ε/3`, truncated at radius `ε`.
    TruncatedGaussian,
}

impl FromStr for KernelShape {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "bump" | "compact-bump" | "compactbump" => Ok(Self::CompactBump),
            "gaussian" | "truncated-gaussian" | "truncatedgaussian" => Ok(Self::TruncatedGaussian),
            other => Err(Error::Parse(format!("unknown kernel shape `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MollifierFamily<T> {
    pub shape: KernelShape,
    pub epsilon: T,
}

impl<T: Real> MollifierFamily<T> {
    pub fn bump(epsilon: T) -> Self {
        Self {
            shape: KernelShape::CompactBump,
            epsilon,
        }
    }

    /// Unnormalized profile at distance `r`.
    pub fn profile(&self, r: T) -> T {
        let s = r / self.epsilon;
        if s >= T::one() {
            return T::zero();
        }
        match self.shape {
            KernelShape::CompactBump => (-T::one() / (T::one() - s * s)).exp(),
            KernelShape::TruncatedGaussian => (-T::lit(4.5) * s * s).exp(),
        }
    }

    /// Kernel translated to `center`, sampled at nodes and scaled so that
    /// `h^2 * sum = 1`. Returns `(i, j, weight)` with weights already divided by `h^2`.
    pub fn stencil(&self, domain: &Domain<T>, center: Point<T>) -> Result<Vec<(usize, usize, T)>> {
        let h = domain.h();
        let reach = (self.epsilon / h).ceil().to_usize().unwrap_or(0) + 1;
        let (ci, cj) = domain.nearest_node(center);
        let i0 = ci.saturating_sub(reach);
        let j0 = cj.saturating_sub(reach);
        let i1 = (ci + reach).min(domain.nx());
        let j1 = (cj + reach).min(domain.ny());
        let mut out = Vec::new();
        let mut sum = T::zero();
        for j in j0..=j1 {
            for i in i0..=i1 {
                let w = self.profile(domain.node(i, j).dist(&center));
                if w > T::zero() {
                    sum += w;
                    out.push((i, j, w));
                }
            }
        }
        if sum <= T::zero() {
            return Err(Error::WidthGrid(format!(
                "epsilon = {} does not reach any node at spacing h = {h}",
                self.epsilon
            )));
        }
        let scale = T::one() / (sum * h * h);
        for e in &mut out {
            e.2 *= scale;
        }
        Ok(out)
    }
}

/// `ρ_ε * m` as a purely diffuse measure.
///
/// Atoms contribute renormalized kernel translates; the diffuse part is
/// convolved with the node-centred kernel using trapezoidal node masses.
pub fn mollify<T: Real>(
    m: &FiniteMeasure<T>,
    family: &MollifierFamily<T>,
) -> Result<FiniteMeasure<T>> {
    let dom = *m.domain();
    if !(family.epsilon > T::zero()) {
        return Err(Error::WidthGrid(format!(
            "epsilon = {} must be positive",
            family.epsilon
        )));
    }
    let margin = family.epsilon + dom.h() * T::lit(2.0);
    for a in m.atoms() {
        if dom.boundary_distance(a.location) <= margin {
            return Err(Error::AtomNearBoundary {
                x: a.location.x.as_f64(),
                y: a.location.y.as_f64(),
                epsilon: family.epsilon.as_f64(),
            });
        }
    }
    let mut out = vec![T::zero(); dom.len()];
    for a in m.atoms() {
        if a.mass == T::zero() {
            continue;
        }
        for (i, j, w) in family.stencil(&dom, a.location)? {
            out[dom.index(i, j)] += a.mass * w;
        }
    }
    if let Some(density) = m.diffuse() {
        convolve_diffuse(&dom, density, family, &mut out)?;
    }
    FiniteMeasure::from_density(dom, out)
}

fn convolve_diffuse<T: Real>(
    dom: &Domain<T>,
    density: &[T],
    family: &MollifierFamily<T>,
    out: &mut [T],
) -> Result<()> {
    // node-centred stencil as offsets
    let centre = dom.node(dom.nx() / 2, dom.ny() / 2);
    let (ci, cj) = (dom.nx() / 2, dom.ny() / 2);
    let stencil: Vec<(isize, isize, T)> = MollifierFamily {
        shape: family.shape,
        epsilon: family.epsilon,
    }
    .stencil(dom, centre)?
    .into_iter()
    .map(|(i, j, w)| (i as isize - ci as isize, j as isize - cj as isize, w))
    .collect();
    let h2 = dom.h() * dom.h();
    let (cols, rows) = (dom.cols() as isize, dom.rows() as isize);
    for j in 0..dom.rows() {
        for i in 0..dom.cols() {
            let v = density[dom.index(i, j)];
            if v == T::zero() {
                continue;
            }
            // trapezoid weight / h^2 * density = node mass / h^2
            let mass = v * dom.trapezoid_weight(i, j) / h2;
            for &(di, dj, w) in &stencil {
                let (ti, tj) = (i as isize + di, j as isize + dj);
                if ti >= 0 && tj >= 0 && ti < cols && tj < rows {
                    out[tj as usize * cols as usize + ti as usize] += mass * w * h2;
                }
            }
        }
    }
    Ok(())
}

/// Continuous test function vanishing on the boundary of the domain.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TestFunction {
    /// `b(s) b(t) * P` in normalized coordinates with `b(s) = 4 s (1 - s)`;
    /// `P` is `1`, `(2s - 1)`, `(2t - 1)`, `(2s - 1)(2t - 1)` or `b(s) b(t)`.
    Bubble(BubbleFactor),
    /// Cone `max(0, 1 - |p - c| / ρ)` in normalized coordinates.
    Cone { cx: f64, cy: f64, radius: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BubbleFactor {
    One,
    OddX,
    OddY,
    OddXY,
    Squared,
}

impl TestFunction {
    pub fn eval<T: Real>(&self, domain: &Domain<T>, p: Point<T>) -> T {
        let q = domain.normalized(p);
        let (s, t) = (q.x.as_f64(), q.y.as_f64());
        let v = match *self {
            TestFunction::Bubble(f) => {
                if !(0.0..=1.0).contains(&s) || !(0.0..=1.0).contains(&t) {
                    0.0
                } else {
                    let b = 16.0 * s * (1.0 - s) * t * (1.0 - t);
                    match f {
                        BubbleFactor::One => b,
                        BubbleFactor::OddX => b * (2.0 * s - 1.0),
                        BubbleFactor::OddY => b * (2.0 * t - 1.0),
                        BubbleFactor::OddXY => b * (2.0 * s - 1.0) * (2.0 * t - 1.0),
                        BubbleFactor::Squared => b * b,
                    }
                }
            }
            TestFunction::Cone { cx, cy, radius } => {
                (1.0 - (s - cx).hypot(t - cy) / radius).max(0.0)
            }
        };
        T::lit(v)
    }

    /// Upper bound of the Lipschitz constant in physical units.
    pub fn lipschitz_bound<T: Real>(&self, domain: &Domain<T>) -> T {
        let side = domain.width().min(domain.height()).as_f64();
        let normalized = match *self {
            TestFunction::Bubble(BubbleFactor::One) => 4.0 * std::f64::consts::SQRT_2,
            TestFunction::Bubble(BubbleFactor::OddX) | TestFunction::Bubble(BubbleFactor::OddY) => {
                52f64.sqrt()
            }
            TestFunction::Bubble(BubbleFactor::OddXY) => 72f64.sqrt(),
            TestFunction::Bubble(BubbleFactor::Squared) => 8.0 * std::f64::consts::SQRT_2,
            TestFunction::Cone { radius, .. } => 1.0 / radius,
        };
        T::lit(normalized / side)
    }
}

pub const TEST_PANEL_VERSION: u32 = 1;

/// Fixed panel used to certify weak-* convergence (version [`TEST_PANEL_VERSION`]).
pub fn default_test_panel() -> Vec<TestFunction> {
    use BubbleFactor::*;
    vec![
        TestFunction::Bubble(One),
        TestFunction::Bubble(OddX),
        TestFunction::Bubble(OddY),
        TestFunction::Bubble(OddXY),
        TestFunction::Bubble(Squared),
        TestFunction::Cone {
            cx: 0.5,
            cy: 0.5,
            radius: 0.25,
        },
        TestFunction::Cone {
            cx: 0.5,
            cy: 0.5,
            radius: 0.1,
        },
        TestFunction::Cone {
            cx: 0.3,
            cy: 0.3,
            radius: 0.2,
        },
        TestFunction::Cone {
            cx: 0.7,
            cy: 0.6,
            radius: 0.2,
        },
    ]
}

/// `∫ ζ dm` with trapezoidal quadrature for the diffuse part.
pub fn integrate<T: Real>(m: &FiniteMeasure<T>, zeta: &TestFunction) -> T {
    let dom = m.domain();
    let mut sum = T::zero();
    if let Some(values) = m.diffuse() {
        for j in 0..dom.rows() {
            for i in 0..dom.cols() {
                let v = values[dom.index(i, j)];
                if v != T::zero() {
                    sum += dom.trapezoid_weight(i, j) * v * zeta.eval(dom, dom.node(i, j));
                }
            }
        }
    }
    for a in m.atoms() {
        sum += a.mass * zeta.eval(dom, a.location);
    }
    sum
}

/// `max_ζ |∫ζ dm1 - ∫ζ dm2|` over the panel.
pub fn weakstar_gap<T: Real>(
    m1: &FiniteMeasure<T>,
    m2: &FiniteMeasure<T>,
    tests: &[TestFunction],
) -> T {
    tests
        .iter()
        .map(|z| (integrate(m1, z) - integrate(m2, z)).abs())
        .fold(T::zero(), T::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::Atom;
    use std::f64::consts::PI;

    fn dom(h: f64) -> Domain<f64> {
        Domain::unit_square(h).unwrap()
    }

    #[test]
    fn kernel_normalization() {
        let d = dom(1.0 / 128.0);
        for shape in [KernelShape::CompactBump, KernelShape::TruncatedGaussian] {
            for c in [Point::new(0.5, 0.5), Point::new(0.4013, 0.6377)] {
                let st = MollifierFamily {
                    shape,
                    epsilon: 0.05,
                }
                .stencil(&d, c)
                .unwrap();
                let total: f64 = st.iter().map(|e| e.2).sum::<f64>() * d.h() * d.h();
                assert!((total - 1.0).abs() < 1e-10);
                assert!(st
                    .iter()
                    .all(|e| e.2 >= 0.0 && d.node(e.0, e.1).dist(&c) < 0.05));
            }
        }
    }

    #[test]
    fn mollified_atom_keeps_mass_and_centre() {
        let d = dom(1.0 / 128.0);
        let a = Point::new(0.5, 0.5);
        let alpha = 3.0 * PI;
        let m = FiniteMeasure::from_atoms(d, vec![Atom::new(a, alpha)]).unwrap();
        let eps = 0.05;
        let f = mollify(&m, &MollifierFamily::bump(eps)).unwrap();
        assert!(f.is_diffuse_only());
        assert!((f.total_mass() - alpha).abs() <= 1e-8 * alpha);
        let (ci, cj) = d.nearest_node(a);
        let peak = f.density_at(ci, cj);
        let max = f.diffuse().unwrap().iter().copied().fold(0.0, f64::max);
        assert_eq!(peak, max);
        // continuous normalization: peak = alpha e^{-1} / (c eps^2) with c = ∫ exp(-1/(1-|x|^2)) ≈ 0.46651
        let expect = alpha * (-1.0f64).exp() / (0.466512391 * eps * eps);
        assert!((peak / expect - 1.0).abs() < 0.02);
    }

    #[test]
    fn zero_and_constant_inputs() {
        let d = dom(1.0 / 64.0);
        let fam = MollifierFamily::bump(0.1);
        assert!(mollify(&FiniteMeasure::zero(d), &fam).unwrap().is_zero());
        let c = FiniteMeasure::from_density_fn(d, |_| 2.5).unwrap();
        let out = mollify(&c, &fam).unwrap();
        let reach = 8;
        for j in reach..=d.ny() - reach {
            for i in reach..=d.nx() - reach {
                assert!((out.density_at(i, j) - 2.5).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn rejects_atoms_near_boundary() {
        let d = dom(1.0 / 64.0);
        let m = FiniteMeasure::from_atoms(d, vec![Atom::new(Point::new(0.1, 0.5), 1.0)]).unwrap();
        assert!(matches!(
            mollify(&m, &MollifierFamily::bump(0.1)),
            Err(Error::AtomNearBoundary { .. })
        ));
        assert!(mollify(&m, &MollifierFamily::bump(0.05)).is_ok());
    }

    #[test]
    fn gap_examples() {
        let d = dom(1.0 / 128.0);
        let panel = default_test_panel();
        assert!(panel.len() >= 8);
        let a = Point::new(0.5, 0.5);
        let alpha = 2.0;
        let m = FiniteMeasure::from_atoms(d, vec![Atom::new(a, alpha)]).unwrap();
        assert_eq!(weakstar_gap(&m, &m, &panel), 0.0);
        for eps in [0.1, 0.05, 0.02] {
            let f = mollify(&m, &MollifierFamily::bump(eps)).unwrap();
            for z in &panel {
                let gap = weakstar_gap(&f, &m, std::slice::from_ref(z));
                assert!(
                    gap <= alpha * z.lipschitz_bound(&d) * eps * (1.0 + 1e-9),
                    "{z:?} {gap}"
                );
            }
        }
        let b = Point::new(0.25, 0.25);
        let ma = FiniteMeasure::from_atoms(d, vec![Atom::new(a, 1.0)]).unwrap();
        let mb = FiniteMeasure::from_atoms(d, vec![Atom::new(b, 1.0)]).unwrap();
        let z = TestFunction::Cone {
            cx: 0.5,
            cy: 0.5,
            radius: 0.25,
        };
        let gap = weakstar_gap(&ma, &mb, &[z]);
        assert!(gap >= (z.eval(&d, a) - z.eval(&d, b)).abs());
    }

    #[test]
    fn lipschitz_bounds_hold_on_samples() {
        let d = dom(1.0 / 16.0);
        for z in default_test_panel() {
            let lip = z.lipschitz_bound(&d);
            let mut worst: f64 = 0.0;
            let n = 60;
            for a in 0..n {
                for b in 0..n {
                    let p = Point::new(a as f64 / n as f64, b as f64 / n as f64);
                    let q = Point::new(p.x + 1e-4, p.y + 0.7e-4);
                    worst = worst.max((z.eval(&d, p) - z.eval(&d, q)).abs() / p.dist(&q));
                }
            }
            assert!(worst <= lip * (1.0 + 1e-9), "{z:?}: {worst} > {lip}");
        }
    }
}

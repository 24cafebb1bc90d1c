//! Finite nonnegative measures on a rectangle: a grid-sampled diffuse density
//! plus finitely many weighted atoms.

use crate::error::{Error, Result};
use crate::real::Real;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Point<T> {
    pub x: T,
    pub y: T,
}

impl<T: Real> Point<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    pub fn dist(&self, other: &Self) -> T {
        (self.x - other.x).hypot(self.y - other.y)
    }

    fn bits_eq(&self, other: &Self) -> bool {
        self.x == other.x && self.y == other.y
    }
}

/// Rectangle `[x0, x0 + width] x [y0, y0 + height]` with a uniform node grid of
/// spacing `h`, and the length `d >= diam` used by the logarithmic potential.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Domain<T> {
    origin: Point<T>,
    width: T,
    height: T,
    h: T,
    d: T,
    nx: usize,
    ny: usize,
}

fn cells_along<T: Real>(len: T, h: T, name: &str) -> Result<usize> {
    let q = len / h;
    let n = q.round();
    if (q - n).abs() > T::lit(1e-6) * n.max(T::one()) {
        return Err(Error::InvalidDomain(format!(
            "{name}/h = {q} is not an integer"
        )));
    }
    let n = n.to_usize().unwrap_or(0);
    if n < 4 {
        return Err(Error::InvalidDomain(format!(
            "{name}/h = {n} must be at least 4"
        )));
    }
    Ok(n)
}

impl<T: Real> Domain<T> {
    pub fn new(origin: Point<T>, width: T, height: T, h: T, d: T) -> Result<Self> {
        let all_finite = [origin.x, origin.y, width, height, h, d]
            .iter()
            .all(|v| v.is_finite());
        if !all_finite || width <= T::zero() || height <= T::zero() || h <= T::zero() {
            return Err(Error::InvalidDomain(
                "width, height and h must be positive and finite".into(),
            ));
        }
        let nx = cells_along(width, h, "width")?;
        let ny = cells_along(height, h, "height")?;
        let diag = width.hypot(height);
        // one ulp of slack so that `d = diag` computed elsewhere is accepted
        if d < diag * (T::one() - T::epsilon() * T::lit(4.0)) {
            return Err(Error::InvalidDomain(format!(
                "d = {d} is smaller than the diagonal {diag}"
            )));
        }
        Ok(Self {
            origin,
            width,
            height,
            h,
            d: d.max(diag),
            nx,
            ny,
        })
    }

    /// Rectangle with `d` set to its diagonal.
    pub fn rectangle(origin: Point<T>, width: T, height: T, h: T) -> Result<Self> {
        Self::new(origin, width, height, h, width.hypot(height))
    }

    pub fn unit_square(h: T) -> Result<Self> {
        Self::rectangle(Point::new(T::zero(), T::zero()), T::one(), T::one(), h)
    }

    pub fn origin(&self) -> Point<T> {
        self.origin
    }
    pub fn width(&self) -> T {
        self.width
    }
    pub fn height(&self) -> T {
        self.height
    }
    pub fn h(&self) -> T {
        self.h
    }
    pub fn d(&self) -> T {
        self.d
    }
    /// Number of cells along x; there are `nx + 1` node columns.
    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn ny(&self) -> usize {
        self.ny
    }
    pub fn cols(&self) -> usize {
        self.nx + 1
    }
    pub fn rows(&self) -> usize {
        self.ny + 1
    }
    pub fn len(&self) -> usize {
        self.cols() * self.rows()
    }
    pub fn is_empty(&self) -> bool {
        false
    }
    pub fn area(&self) -> T {
        self.width * self.height
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.cols() + i
    }

    #[inline]
    pub fn node(&self, i: usize, j: usize) -> Point<T> {
        Point::new(
            self.origin.x + T::from_usize_lossy(i) * self.h,
            self.origin.y + T::from_usize_lossy(j) * self.h,
        )
    }

    #[inline]
    pub fn is_boundary(&self, i: usize, j: usize) -> bool {
        i == 0 || j == 0 || i == self.nx || j == self.ny
    }

    /// Nearest node to `p`, clamped to the grid.
    pub fn nearest_node(&self, p: Point<T>) -> (usize, usize) {
        let fi = ((p.x - self.origin.x) / self.h).round().max(T::zero());
        let fj = ((p.y - self.origin.y) / self.h).round().max(T::zero());
        (
            fi.to_usize().unwrap_or(0).min(self.nx),
            fj.to_usize().unwrap_or(0).min(self.ny),
        )
    }

    /// Distance from `p` to the boundary; negative outside.
    pub fn boundary_distance(&self, p: Point<T>) -> T {
        let dx = (p.x - self.origin.x).min(self.origin.x + self.width - p.x);
        let dy = (p.y - self.origin.y).min(self.origin.y + self.height - p.y);
        dx.min(dy)
    }

    /// Trapezoidal quadrature weight of node `(i, j)`, including the `h^2` factor.
    #[inline]
    pub fn trapezoid_weight(&self, i: usize, j: usize) -> T {
        let half = T::lit(0.5);
        let wi = if i == 0 || i == self.nx {
            half
        } else {
            T::one()
        };
        let wj = if j == 0 || j == self.ny {
            half
        } else {
            T::one()
        };
        wi * wj * self.h * self.h
    }

    /// Same grid geometry; `d` may differ.
    pub fn same_grid(&self, other: &Self) -> bool {
        self.origin == other.origin
            && self.h == other.h
            && self.nx == other.nx
            && self.ny == other.ny
    }

    /// Node in normalized coordinates `((x - x0)/W, (y - y0)/H)`.
    pub fn normalized(&self, p: Point<T>) -> Point<T> {
        Point::new(
            (p.x - self.origin.x) / self.width,
            (p.y - self.origin.y) / self.height,
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Atom<T> {
    pub location: Point<T>,
    pub mass: T,
}

impl<T: Real> Atom<T> {
    pub fn new(location: Point<T>, mass: T) -> Self {
        Self { location, mass }
    }
}

/// Nonnegative finite measure: node-sampled density (mass per area) plus atoms
/// with pairwise-distinct locations. Immutable after construction.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteMeasure<T> {
    domain: Domain<T>,
    diffuse: Option<Vec<T>>,
    atoms: Vec<Atom<T>>,
}

impl<T: Real> FiniteMeasure<T> {
    pub fn zero(domain: Domain<T>) -> Self {
        Self {
            domain,
            diffuse: None,
            atoms: Vec::new(),
        }
    }

    /// Validates and normalizes the input. Atoms at bitwise-equal locations are
    /// merged by summing masses; distinct atoms closer than `h/2` are rejected.
    pub fn new(domain: Domain<T>, diffuse: Option<Vec<T>>, atoms: Vec<Atom<T>>) -> Result<Self> {
        if let Some(values) = &diffuse {
            if values.len() != domain.len() {
                return Err(Error::InvalidDensity(format!(
                    "expected {} node values, got {}",
                    domain.len(),
                    values.len()
                )));
            }
            if let Some(bad) = values.iter().find(|v| !v.is_finite() || **v < T::zero()) {
                return Err(Error::InvalidDensity(format!(
                    "density value {bad} is negative or not finite"
                )));
            }
        }
        let min_gap = domain.h * T::lit(2.0);
        let mut merged: Vec<Atom<T>> = Vec::with_capacity(atoms.len());
        for atom in atoms {
            let Atom { location: p, mass } = atom;
            let invalid = |reason: String| Error::InvalidAtom {
                x: p.x.as_f64(),
                y: p.y.as_f64(),
                reason,
            };
            if !mass.is_finite() || mass < T::zero() {
                return Err(invalid(format!(
                    "mass {mass} must be finite and nonnegative"
                )));
            }
            if !(p.x.is_finite() && p.y.is_finite()) || domain.boundary_distance(p) < min_gap {
                return Err(invalid(
                    "location must lie at distance >= 2h inside the domain".into(),
                ));
            }
            if let Some(existing) = merged.iter_mut().find(|a| a.location.bits_eq(&p)) {
                existing.mass += mass;
                continue;
            }
            if merged
                .iter()
                .any(|a| a.location.dist(&p) < domain.h * T::lit(0.5))
            {
                return Err(invalid("closer than h/2 to another atom".into()));
            }
            merged.push(atom);
        }
        let diffuse = diffuse.filter(|v| v.iter().any(|x| *x != T::zero()));
        Ok(Self {
            domain,
            diffuse,
            atoms: merged,
        })
    }

    pub fn from_atoms(domain: Domain<T>, atoms: Vec<Atom<T>>) -> Result<Self> {
        Self::new(domain, None, atoms)
    }

    pub fn from_density(domain: Domain<T>, density: Vec<T>) -> Result<Self> {
        Self::new(domain, Some(density), Vec::new())
    }

    /// Samples `f` at every node.
    pub fn from_density_fn(domain: Domain<T>, f: impl Fn(Point<T>) -> T) -> Result<Self> {
        let mut values = Vec::with_capacity(domain.len());
        for j in 0..domain.rows() {
            for i in 0..domain.cols() {
                values.push(f(domain.node(i, j)));
            }
        }
        Self::from_density(domain, values)
    }

    pub fn domain(&self) -> &Domain<T> {
        &self.domain
    }

    pub fn atoms(&self) -> &[Atom<T>] {
        &self.atoms
    }

    /// Node density values, `None` when the diffuse part vanishes.
    pub fn diffuse(&self) -> Option<&[T]> {
        self.diffuse.as_deref()
    }

    #[inline]
    pub fn density_at(&self, i: usize, j: usize) -> T {
        self.diffuse
            .as_ref()
            .map_or(T::zero(), |v| v[self.domain.index(i, j)])
    }

    pub fn is_diffuse_only(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.diffuse.is_none() && self.atoms.iter().all(|a| a.mass == T::zero())
    }

    /// Same measure with the atoms removed.
    pub fn diffuse_part(&self) -> Self {
        Self {
            domain: self.domain,
            diffuse: self.diffuse.clone(),
            atoms: Vec::new(),
        }
    }

    pub fn diffuse_mass(&self) -> T {
        let Some(values) = &self.diffuse else {
            return T::zero();
        };
        let dom = &self.domain;
        let mut sum = T::zero();
        for j in 0..dom.rows() {
            for i in 0..dom.cols() {
                sum += dom.trapezoid_weight(i, j) * values[dom.index(i, j)];
            }
        }
        sum
    }

    pub fn total_mass(&self) -> T {
        self.diffuse_mass() + self.atoms.iter().map(|a| a.mass).sum::<T>()
    }

    /// `m({x})`; zero unless `x` is (bitwise) an atom location.
    pub fn atom_mass(&self, x: Point<T>) -> T {
        self.atoms
            .iter()
            .find(|a| a.location.bits_eq(&x))
            .map_or(T::zero(), |a| a.mass)
    }

    /// `sum_k c_k m_k`. Coefficients must be nonnegative.
    pub fn linear_combine(coeffs: &[T], ms: &[&Self]) -> Result<Self> {
        let Some(first) = ms.first() else {
            return Err(Error::InvalidDensity(
                "linear_combine needs at least one measure".into(),
            ));
        };
        if coeffs.len() != ms.len() {
            return Err(Error::InvalidDensity(
                "coefficient count differs from measure count".into(),
            ));
        }
        if let Some(c) = coeffs.iter().find(|c| !(**c >= T::zero())) {
            return Err(Error::NegativeInput(format!("coefficient {c}")));
        }
        let domain = first.domain;
        if ms.iter().any(|m| m.domain != domain) {
            return Err(Error::DomainMismatch);
        }
        let mut diffuse: Option<Vec<T>> = None;
        let mut atoms = Vec::new();
        for (&c, m) in coeffs.iter().zip(ms) {
            if c == T::zero() {
                continue;
            }
            if let Some(values) = &m.diffuse {
                let acc = diffuse.get_or_insert_with(|| vec![T::zero(); domain.len()]);
                for (a, v) in acc.iter_mut().zip(values) {
                    *a += c * *v;
                }
            }
            atoms.extend(m.atoms.iter().map(|a| Atom::new(a.location, c * a.mass)));
        }
        Self::new(domain, diffuse, atoms)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        Self::linear_combine(&[T::one(), T::one()], &[self, other])
    }

    pub fn scale(&self, c: T) -> Result<Self> {
        Self::linear_combine(&[c], &[self])
    }

    /// Restriction to the closed disk `B_r(center)`: density kept at nodes
    /// inside the disk, atoms outside dropped.
    pub fn restrict(&self, center: Point<T>, r: T) -> Self {
        let dom = &self.domain;
        let diffuse = self.diffuse.as_ref().map(|values| {
            let mut out = values.clone();
            for j in 0..dom.rows() {
                for i in 0..dom.cols() {
                    if dom.node(i, j).dist(&center) > r {
                        out[dom.index(i, j)] = T::zero();
                    }
                }
            }
            out
        });
        let atoms = self
            .atoms
            .iter()
            .copied()
            .filter(|a| a.location.dist(&center) <= r)
            .collect();
        Self {
            domain: self.domain,
            diffuse: diffuse.filter(|v| v.iter().any(|x| *x != T::zero())),
            atoms,
        }
    }

    /// Atom locations with mass at least `threshold`.
    pub fn overweight_atoms(&self, threshold: T) -> Vec<Point<T>> {
        self.atoms
            .iter()
            .filter(|a| a.mass >= threshold)
            .map(|a| a.location)
            .collect()
    }

    /// Same diffuse part, atoms transformed by `f` (used by the reduction maps).
    pub(crate) fn map_atoms(&self, f: impl Fn(&Atom<T>) -> T) -> Self {
        let atoms = self
            .atoms
            .iter()
            .map(|a| Atom::new(a.location, f(a)))
            .collect();
        Self {
            domain: self.domain,
            diffuse: self.diffuse.clone(),
            atoms,
        }
    }

    /// All atom locations of `self` and `other`, without duplicates.
    pub fn atom_locations_union(&self, other: &Self) -> Vec<Point<T>> {
        let mut pts: Vec<Point<T>> = self.atoms.iter().map(|a| a.location).collect();
        for a in &other.atoms {
            if !pts.iter().any(|p| p.bits_eq(&a.location)) {
                pts.push(a.location);
            }
        }
        pts
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn unit(h: f64) -> Domain<f64> {
        Domain::unit_square(h).unwrap()
    }

    #[test]
    fn domain_validation() {
        assert!(Domain::unit_square(0.25).is_ok());
        assert!(Domain::unit_square(0.3).is_err());
        assert!(Domain::unit_square(0.5).is_err());
        let o = Point::new(0.0, 0.0);
        assert!(Domain::new(o, 1.0, 1.0, 0.125, 1.0).is_err());
        let dom = Domain::new(o, 2.0, 1.0, 0.125, 3.0).unwrap();
        assert_eq!((dom.nx(), dom.ny()), (16, 8));
    }

    #[test]
    fn total_mass_examples() {
        let dom = unit(1.0 / 16.0);
        assert_eq!(FiniteMeasure::zero(dom).total_mass(), 0.0);
        let a = Point::new(0.5, 0.5);
        let b = Point::new(0.25, 0.75);
        let m =
            FiniteMeasure::from_atoms(dom, vec![Atom::new(a, 5.0 * PI), Atom::new(b, PI)]).unwrap();
        assert!((m.total_mass() - 6.0 * PI).abs() < 1e-15);
        let u = FiniteMeasure::from_density_fn(dom, |_| 1.0).unwrap();
        assert!((u.total_mass() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn atom_lookup_and_merge() {
        let dom = unit(1.0 / 16.0);
        let a = Point::new(0.5, 0.5);
        let m = FiniteMeasure::from_atoms(dom, vec![Atom::new(a, 5.0 * PI)]).unwrap();
        assert_eq!(m.atom_mass(a), 5.0 * PI);
        assert_eq!(m.atom_mass(Point::new(0.25, 0.5)), 0.0);
        let dup = FiniteMeasure::from_atoms(dom, vec![Atom::new(a, PI), Atom::new(a, PI)]).unwrap();
        assert_eq!(dup.atoms().len(), 1);
        assert_eq!(dup.atom_mass(a), 2.0 * PI);
    }

    #[test]
    fn rejects_bad_atoms() {
        let dom = unit(1.0 / 16.0);
        let near = FiniteMeasure::from_atoms(dom, vec![Atom::new(Point::new(0.1, 0.5), 1.0)]);
        assert!(matches!(near, Err(Error::InvalidAtom { .. })));
        let neg = FiniteMeasure::from_atoms(dom, vec![Atom::new(Point::new(0.5, 0.5), -1.0)]);
        assert!(neg.is_err());
        let close = FiniteMeasure::from_atoms(
            dom,
            vec![
                Atom::new(Point::new(0.5, 0.5), 1.0),
                Atom::new(Point::new(0.51, 0.5), 1.0),
            ],
        );
        assert!(close.is_err());
    }

    #[test]
    fn linear_combine_examples() {
        let dom = unit(1.0 / 32.0);
        let a = Point::new(0.5, 0.5);
        let mu = FiniteMeasure::from_atoms(dom, vec![Atom::new(a, 3.0)]).unwrap();
        let nu = FiniteMeasure::from_density_fn(dom, |_| 2.0).unwrap();
        assert_eq!(
            FiniteMeasure::linear_combine(&[1.0, 0.0], &[&mu, &nu]).unwrap(),
            mu
        );
        let half = FiniteMeasure::linear_combine(&[0.5, 0.5], &[&mu, &mu]).unwrap();
        assert_eq!(half.atom_mass(a), 3.0);
        assert_eq!(half.atoms().len(), 1);

        let other = unit(1.0 / 16.0);
        let z = FiniteMeasure::zero(other);
        assert!(matches!(
            FiniteMeasure::linear_combine(&[1.0, 1.0], &[&mu, &z]),
            Err(Error::DomainMismatch)
        ));
    }

    #[test]
    fn restrict_examples() {
        let dom = unit(1.0 / 64.0);
        let c = Point::new(0.5, 0.5);
        let m = FiniteMeasure::from_atoms(dom, vec![Atom::new(c, 2.0)]).unwrap();
        assert_eq!(m.restrict(c, 1.0), m);
        assert!(m.restrict(Point::new(0.2, 0.2), 0.1).is_zero());

        let fine = unit(1.0 / 256.0);
        let u = FiniteMeasure::from_density_fn(fine, |_| 1.0).unwrap();
        let disk = u.restrict(c, 0.25).total_mass();
        let area = PI * 0.0625;
        // boundary cells contribute O(h) relative error
        assert!((disk - area).abs() < 2.0 * PI * 0.25 * fine.h());
    }

    #[test]
    fn overweight_examples() {
        let dom = unit(1.0 / 16.0);
        let a = Point::new(0.5, 0.5);
        let b = Point::new(0.25, 0.25);
        let m =
            FiniteMeasure::from_atoms(dom, vec![Atom::new(a, 5.0 * PI), Atom::new(b, PI)]).unwrap();
        assert_eq!(m.overweight_atoms(2.0 * PI), vec![a]);
        assert!(FiniteMeasure::zero(dom)
            .overweight_atoms(2.0 * PI)
            .is_empty());
        let edge = FiniteMeasure::from_atoms(dom, vec![Atom::new(a, 2.0 * PI)]).unwrap();
        assert_eq!(edge.overweight_atoms(2.0 * PI), vec![a]);
    }

    #[test]
    fn works_in_single_precision() {
        let dom = Domain::<f32>::unit_square(0.125).unwrap();
        let m =
            FiniteMeasure::from_atoms(dom, vec![Atom::new(Point::new(0.5, 0.5), 1.5f32)]).unwrap();
        assert_eq!(m.total_mass(), 1.5);
    }
}

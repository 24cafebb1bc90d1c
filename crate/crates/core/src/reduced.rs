//! Closed-form reduced measures and good-measure predicates.
//!
//! Scalar equation `-Δu + g(u) = μ`: an atom of mass `α` survives as
//! `min{α, c}` where `c` is the atom capacity of `g` (2π for `e^t(e^t - 1)`,
//! 4π for the single-exponential kinds). System: atom sums are capped at 4π,
//! and the split between the two components is resolved by
//! [`system_reduced_atoms`] when it is determined by the data alone.

use std::fmt;

use crate::error::{Error, Result};
use crate::measure::FiniteMeasure;
use crate::real::{exp_expm1, Real};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NonlinearityKind {
    /// `g(t) = e^t (e^t - 1)`
    ChernSimonsScalar,
    /// `g(t) = e^t - 1`
    ExpMinusOne,
    /// `g(t) = 2 (e^t - 1)`, paired with a `-2` source offset.
    TwoExpMinusOneShifted,
}

impl NonlinearityKind {
    pub const ALL: [NonlinearityKind; 3] = [
        Self::ChernSimonsScalar,
        Self::ExpMinusOne,
        Self::TwoExpMinusOneShifted,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::ChernSimonsScalar => "chern-simons",
            Self::ExpMinusOne => "exp-minus-one",
            Self::TwoExpMinusOneShifted => "two-exp-minus-one-shifted",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('_', "-");
        match key.as_str() {
            "chern-simons" | "chernsimonsscalar" | "cs" | "scalar" => Ok(Self::ChernSimonsScalar),
            "exp-minus-one" | "expminusone" | "exp" => Ok(Self::ExpMinusOne),
            "two-exp-minus-one-shifted" | "twoexpminusoneshifted" | "shifted" => {
                Ok(Self::TwoExpMinusOneShifted)
            }
            _ => Err(Error::Parse(format!("unknown nonlinearity kind `{s}`"))),
        }
    }
}

impl fmt::Display for NonlinearityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Absorption term `g`. Capacity and source offset are fixed by the kind.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Nonlinearity {
    kind: NonlinearityKind,
}

impl Nonlinearity {
    pub const CHERN_SIMONS: Self = Self {
        kind: NonlinearityKind::ChernSimonsScalar,
    };
    pub const EXP_MINUS_ONE: Self = Self {
        kind: NonlinearityKind::ExpMinusOne,
    };
    pub const TWO_EXP_SHIFTED: Self = Self {
        kind: NonlinearityKind::TwoExpMinusOneShifted,
    };

    pub fn new(kind: NonlinearityKind) -> Self {
        Self { kind }
    }

    pub fn kind(&self) -> NonlinearityKind {
        self.kind
    }

    /// Largest atom that still admits a solution.
    pub fn atom_capacity<T: Real>(&self) -> T {
        match self.kind {
            NonlinearityKind::ChernSimonsScalar => T::two_pi(),
            NonlinearityKind::ExpMinusOne | NonlinearityKind::TwoExpMinusOneShifted => T::four_pi(),
        }
    }

    /// Constant added to the caller's source before solving.
    pub fn source_offset<T: Real>(&self) -> T {
        match self.kind {
            NonlinearityKind::TwoExpMinusOneShifted => T::lit(-2.0),
            _ => T::zero(),
        }
    }

    #[inline]
    pub fn eval<T: Real>(&self, t: T) -> T {
        match self.kind {
            NonlinearityKind::ChernSimonsScalar => exp_expm1(t),
            NonlinearityKind::ExpMinusOne => t.exp_m1(),
            NonlinearityKind::TwoExpMinusOneShifted => T::lit(2.0) * t.exp_m1(),
        }
    }

    #[inline]
    pub fn derivative<T: Real>(&self, t: T) -> T {
        match self.kind {
            NonlinearityKind::ChernSimonsScalar => {
                let e = t.exp();
                e * (e + t.exp_m1())
            }
            NonlinearityKind::ExpMinusOne => t.exp(),
            NonlinearityKind::TwoExpMinusOneShifted => T::lit(2.0) * t.exp(),
        }
    }

    /// Exponential growth rate of `g` for large `t` (2 for `e^{2t}`, 1 otherwise).
    pub fn growth_rate(&self) -> f64 {
        match self.kind {
            NonlinearityKind::ChernSimonsScalar => 2.0,
            _ => 1.0,
        }
    }

    /// `g` is increasing on the whole line (false only for the Chern-Simons kind,
    /// which decreases below `-ln 2`).
    pub fn is_monotone(&self) -> bool {
        !matches!(self.kind, NonlinearityKind::ChernSimonsScalar)
    }
}

impl Default for Nonlinearity {
    fn default() -> Self {
        Self::CHERN_SIMONS
    }
}

/// Every atom is at most the capacity of `nl`.
pub fn good_measure_scalar<T: Real>(m: &FiniteMeasure<T>, nl: Nonlinearity) -> bool {
    let cap = nl.atom_capacity::<T>();
    m.atoms().iter().all(|a| a.mass <= cap)
}

/// `μ({x}) + ν({x}) <= 4π` at every atom of either measure.
pub fn good_measure_system<T: Real>(mu: &FiniteMeasure<T>, nu: &FiniteMeasure<T>) -> Result<bool> {
    if mu.domain() != nu.domain() {
        return Err(Error::DomainMismatch);
    }
    let cap = T::four_pi();
    Ok(mu
        .atom_locations_union(nu)
        .into_iter()
        .all(|x| mu.atom_mass(x) + nu.atom_mass(x) <= cap))
}

/// Diffuse part unchanged, each atom clipped to the capacity of `nl`.
pub fn scalar_reduced<T: Real>(m: &FiniteMeasure<T>, nl: Nonlinearity) -> FiniteMeasure<T> {
    reduced_with_capacity(m, nl.atom_capacity())
}

pub fn reduced_with_capacity<T: Real>(m: &FiniteMeasure<T>, capacity: T) -> FiniteMeasure<T> {
    m.map_atoms(|a| a.mass.min(capacity))
}

/// `μ# + ν#`: the sum measure with atom sums capped at 4π.
pub fn system_reduced_sum<T: Real>(
    mu: &FiniteMeasure<T>,
    nu: &FiniteMeasure<T>,
) -> Result<FiniteMeasure<T>> {
    if mu.domain() != nu.domain() {
        return Err(Error::DomainMismatch);
    }
    Ok(reduced_with_capacity(&mu.add(nu)?, T::four_pi()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ResolutionStatus {
    Determined,
    Indeterminate,
}

/// Reduced atom pair `(μ#({a}), ν#({a}))` when the data determine it.
#[derive(Clone, Debug, PartialEq)]
pub struct SystemAtomResolution<T> {
    pub status: ResolutionStatus,
    pub mu_atom: Option<T>,
    pub nu_atom: Option<T>,
    /// Limits known to be attainable by some approximating sequence.
    pub attainable_examples: Vec<(T, T)>,
}

impl<T: Real> SystemAtomResolution<T> {
    fn determined(mu: T, nu: T) -> Self {
        Self {
            status: ResolutionStatus::Determined,
            mu_atom: Some(mu),
            nu_atom: Some(nu),
            attainable_examples: Vec::new(),
        }
    }

    pub fn is_determined(&self) -> bool {
        self.status == ResolutionStatus::Determined
    }

    pub fn pair(&self) -> Option<(T, T)> {
        self.mu_atom.zip(self.nu_atom)
    }
}

fn approx_eq<T: Real>(a: T, b: T) -> bool {
    (a - b).abs() <= T::lit(1e-12) * b.abs().max(T::one())
}

/// Resolves the reduced atoms at a single point from `μ({a})`, `ν({a})`.
pub fn system_reduced_atoms<T: Real>(mu_a: T, nu_a: T) -> Result<SystemAtomResolution<T>> {
    if !(mu_a >= T::zero()) || !(nu_a >= T::zero()) {
        return Err(Error::NegativeInput(format!(
            "atom masses ({mu_a}, {nu_a})"
        )));
    }
    let cap = T::four_pi();
    let sum = mu_a + nu_a;
    if sum <= cap {
        return Ok(SystemAtomResolution::determined(mu_a, nu_a));
    }
    if mu_a == T::zero() || nu_a == T::zero() {
        return Ok(SystemAtomResolution::determined(
            mu_a.min(cap),
            nu_a.min(cap),
        ));
    }
    if mu_a <= cap && nu_a <= cap {
        let excess = (sum - cap) / T::lit(2.0);
        return Ok(SystemAtomResolution::determined(
            (mu_a).min(mu_a - excess),
            (nu_a).min(nu_a - excess),
        ));
    }
    let pi = T::PI();
    let known = [(T::lit(3.0) * pi, pi), (T::lit(3.5) * pi, T::lit(0.5) * pi)];
    let (five, two) = (T::lit(5.0) * pi, T::lit(2.0) * pi);
    let attainable_examples = if approx_eq(mu_a, five) && approx_eq(nu_a, two) {
        known.to_vec()
    } else if approx_eq(mu_a, two) && approx_eq(nu_a, five) {
        known.iter().map(|&(a, b)| (b, a)).collect()
    } else {
        Vec::new()
    };
    Ok(SystemAtomResolution {
        status: ResolutionStatus::Indeterminate,
        mu_atom: None,
        nu_atom: None,
        attainable_examples,
    })
}

/// Applies [`system_reduced_atoms`] at every atom; returns `None` if any
/// atom is indeterminate.
pub fn system_reduced_pair<T: Real>(
    mu: &FiniteMeasure<T>,
    nu: &FiniteMeasure<T>,
) -> Result<Option<(FiniteMeasure<T>, FiniteMeasure<T>)>> {
    if mu.domain() != nu.domain() {
        return Err(Error::DomainMismatch);
    }
    let mut mu_atoms = Vec::new();
    let mut nu_atoms = Vec::new();
    for x in mu.atom_locations_union(nu) {
        let res = system_reduced_atoms(mu.atom_mass(x), nu.atom_mass(x))?;
        let Some((a, b)) = res.pair() else {
            return Ok(None);
        };
        mu_atoms.push(crate::measure::Atom::new(x, a));
        nu_atoms.push(crate::measure::Atom::new(x, b));
    }
    let rebuild = |m: &FiniteMeasure<T>, atoms: Vec<crate::measure::Atom<T>>| {
        FiniteMeasure::new(*m.domain(), m.diffuse().map(<[T]>::to_vec), atoms)
    };
    Ok(Some((rebuild(mu, mu_atoms)?, rebuild(nu, nu_atoms)?)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{Atom, Domain, Point};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn dom() -> Domain<f64> {
        Domain::unit_square(1.0 / 32.0).unwrap()
    }

    fn pts() -> [Point<f64>; 4] {
        [
            Point::new(0.5, 0.5),
            Point::new(0.25, 0.25),
            Point::new(0.75, 0.25),
            Point::new(0.25, 0.75),
        ]
    }

    #[test]
    fn scalar_goodness() {
        let a = pts()[0];
        let good = FiniteMeasure::from_atoms(dom(), vec![Atom::new(a, 2.0 * PI)]).unwrap();
        assert!(good_measure_scalar(&good, Nonlinearity::CHERN_SIMONS));
        let bad = FiniteMeasure::from_atoms(dom(), vec![Atom::new(a, 2.0 * PI + 1e-9)]).unwrap();
        assert!(!good_measure_scalar(&bad, Nonlinearity::CHERN_SIMONS));
        let diffuse = FiniteMeasure::from_density_fn(dom(), |_| 1e6).unwrap();
        assert!(good_measure_scalar(&diffuse, Nonlinearity::CHERN_SIMONS));
    }

    #[test]
    fn system_goodness() {
        let a = pts()[0];
        let mu = FiniteMeasure::from_atoms(dom(), vec![Atom::new(a, 3.0 * PI)]).unwrap();
        let nu = FiniteMeasure::from_atoms(dom(), vec![Atom::new(a, PI)]).unwrap();
        assert!(good_measure_system(&mu, &nu).unwrap());
        let big = FiniteMeasure::from_atoms(dom(), vec![Atom::new(a, 5.0 * PI)]).unwrap();
        assert!(!good_measure_system(&big, &FiniteMeasure::zero(dom())).unwrap());
        let d = FiniteMeasure::from_density_fn(dom(), |_| 50.0).unwrap();
        assert!(good_measure_system(&d, &d).unwrap());
    }

    #[test]
    fn scalar_clipping_formula() {
        let [a, b, c, _] = pts();
        let m = FiniteMeasure::from_atoms(
            dom(),
            vec![
                Atom::new(a, 5.0 * PI),
                Atom::new(b, PI),
                Atom::new(c, 2.0 * PI),
            ],
        )
        .unwrap();
        let r = scalar_reduced(&m, Nonlinearity::CHERN_SIMONS);
        assert_eq!(r.atom_mass(a), 2.0 * PI);
        assert_eq!(r.atom_mass(b), PI);
        assert_eq!(r.atom_mass(c), 2.0 * PI);
        assert_eq!(scalar_reduced(&r, Nonlinearity::CHERN_SIMONS), r);

        let six = FiniteMeasure::from_atoms(dom(), vec![Atom::new(a, 6.0 * PI)]).unwrap();
        assert_eq!(
            scalar_reduced(&six, Nonlinearity::EXP_MINUS_ONE).atom_mass(a),
            4.0 * PI
        );
    }

    #[test]
    fn system_sum_examples() {
        let a = pts()[0];
        let at = |m: f64| FiniteMeasure::from_atoms(dom(), vec![Atom::new(a, m)]).unwrap();
        assert_eq!(
            system_reduced_sum(&at(5.0 * PI), &at(2.0 * PI))
                .unwrap()
                .atom_mass(a),
            4.0 * PI
        );
        assert_eq!(
            system_reduced_sum(&at(3.0 * PI), &at(PI))
                .unwrap()
                .atom_mass(a),
            4.0 * PI
        );
        let d = FiniteMeasure::from_density_fn(dom(), |_| 1.0).unwrap();
        let s = system_reduced_sum(&d, &at(6.0 * PI)).unwrap();
        assert_eq!(s.atom_mass(a), 4.0 * PI);
        assert!((s.diffuse_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn system_atom_cases() {
        let r = system_reduced_atoms(3.0 * PI, 3.0 * PI).unwrap();
        assert_eq!(r.pair(), Some((2.0 * PI, 2.0 * PI)));
        assert_eq!(
            system_reduced_atoms(0.0, 6.0 * PI).unwrap().pair(),
            Some((0.0, 4.0 * PI))
        );
        assert_eq!(
            system_reduced_atoms(PI, 2.0 * PI).unwrap().pair(),
            Some((PI, 2.0 * PI))
        );
        let ind = system_reduced_atoms(5.0 * PI, 2.0 * PI).unwrap();
        assert_eq!(ind.status, ResolutionStatus::Indeterminate);
        assert_eq!(
            ind.attainable_examples,
            vec![(3.0 * PI, PI), (3.5 * PI, 0.5 * PI)]
        );
        assert!(system_reduced_atoms(7.0 * PI, 1.0)
            .unwrap()
            .attainable_examples
            .is_empty());
        // max exactly 4π takes the determined branch
        assert!(system_reduced_atoms(4.0 * PI, PI).unwrap().is_determined());
        assert!(system_reduced_atoms(-1.0, 1.0).is_err());
    }

    #[test]
    fn single_precision_cases() {
        let r =
            system_reduced_atoms(3.0 * std::f32::consts::PI, 3.0 * std::f32::consts::PI).unwrap();
        let (a, b) = r.pair().unwrap();
        assert!((a - 2.0 * std::f32::consts::PI).abs() < 1e-5 && a == b);
    }

    #[test]
    fn nonlinearity_values() {
        for kind in NonlinearityKind::ALL {
            let nl = Nonlinearity::new(kind);
            assert_eq!(nl.eval(0.0f64), 0.0);
            for t in [-2.0f64, -0.3, 0.0, 0.7, 3.0] {
                let fd = (nl.eval(t + 1e-6) - nl.eval(t - 1e-6)) / 2e-6;
                assert!((fd - nl.derivative(t)).abs() < 1e-6 * nl.derivative(t).abs().max(1.0));
            }
        }
        assert_eq!(Nonlinearity::TWO_EXP_SHIFTED.source_offset::<f64>(), -2.0);
        assert_eq!(
            NonlinearityKind::parse("exp_minus_one").unwrap(),
            NonlinearityKind::ExpMinusOne
        );
    }

    fn arb_measure() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.0..8.0 * PI, 4)
    }

    proptest! {
        #[test]
        fn scalar_reduction_properties(masses in arb_measure(), bumps in prop::collection::vec(0.0..2.0f64, 4)) {
            let ps = pts();
            let build = |ms: &[f64]| FiniteMeasure::from_atoms(
                dom(), ps.iter().zip(ms).map(|(p, m)| Atom::new(*p, *m)).collect()).unwrap();
            let m = build(&masses);
            let bigger: Vec<f64> = masses.iter().zip(&bumps).map(|(a, b)| a + b).collect();
            let mb = build(&bigger);
            let nl = Nonlinearity::CHERN_SIMONS;
            let r = scalar_reduced(&m, nl);
            prop_assert_eq!(&scalar_reduced(&r, nl), &r);
            prop_assert!(good_measure_scalar(&r, nl));
            let rb = scalar_reduced(&mb, nl);
            let cap = 2.0 * PI;
            let mut excess = 0.0;
            for (p, a) in ps.iter().zip(&masses) {
                prop_assert!(r.atom_mass(*p) <= m.atom_mass(*p));
                prop_assert!(r.atom_mass(*p) <= rb.atom_mass(*p));
                excess += (a - cap).max(0.0);
            }
            let lost = m.total_mass() - r.total_mass();
            prop_assert!((lost - excess).abs() <= 1e-12 * m.total_mass().max(1.0));
        }

        #[test]
        fn system_sum_is_symmetric(a in 0.0..8.0 * PI, b in 0.0..8.0 * PI) {
            let p = pts()[0];
            let mu = FiniteMeasure::from_atoms(dom(), vec![Atom::new(p, a)]).unwrap();
            let nu = FiniteMeasure::from_atoms(dom(), vec![Atom::new(p, b)]).unwrap();
            prop_assert_eq!(system_reduced_sum(&mu, &nu).unwrap(), system_reduced_sum(&nu, &mu).unwrap());
        }

        #[test]
        fn determined_atoms_obey_bounds(a in 0.0..6.0 * PI, b in 0.0..6.0 * PI) {
            let r = system_reduced_atoms(a, b).unwrap();
            if let Some((x, y)) = r.pair() {
                prop_assert!(0.0 <= x && x <= a);
                prop_assert!(0.0 <= y && y <= b);
                let want = (a + b).min(4.0 * PI);
                prop_assert!((x + y - want).abs() <= 8.0 * f64::EPSILON * want.max(1.0));
                let swapped = system_reduced_atoms(b, a).unwrap().pair().unwrap();
                prop_assert_eq!(swapped, (y, x));
            } else {
                prop_assert!(a.max(b) > 4.0 * PI && a > 0.0 && b > 0.0);
            }
        }
    }
}

use std::f64::consts::PI;

use proptest::prelude::*;
use rml_core::{
    good_measure_scalar, good_measure_system, scalar_reduced, system_reduced_atoms,
    system_reduced_sum, Atom, Domain, FiniteMeasure, Nonlinearity, Point, ResolutionStatus,
};

fn dom() -> Domain<f64> {
    Domain::unit_square(1.0 / 64.0).unwrap()
}

fn a() -> Point<f64> {
    Point::new(0.5, 0.5)
}

fn b() -> Point<f64> {
    Point::new(0.25, 0.25)
}

fn c() -> Point<f64> {
    Point::new(0.75, 0.25)
}

fn atoms(list: &[(Point<f64>, f64)]) -> FiniteMeasure<f64> {
    FiniteMeasure::from_atoms(dom(), list.iter().map(|&(p, m)| Atom::new(p, m)).collect()).unwrap()
}

fn uniform(value: f64) -> FiniteMeasure<f64> {
    FiniteMeasure::from_density_fn(dom(), |_| value).unwrap()
}

#[test]
fn total_mass_cases() {
    assert_eq!(FiniteMeasure::zero(dom()).total_mass(), 0.0);
    assert!((atoms(&[(a(), 5.0 * PI), (b(), PI)]).total_mass() - 6.0 * PI).abs() < 1e-14);
    assert!((uniform(1.0).total_mass() - 1.0).abs() <= 1e-12);
}

#[test]
fn atom_lookup_and_merge() {
    let m = atoms(&[(a(), 5.0 * PI)]);
    assert_eq!(m.atom_mass(a()), 5.0 * PI);
    assert_eq!(m.atom_mass(b()), 0.0);
    let merged = atoms(&[(a(), PI), (a(), PI)]);
    assert_eq!(merged.atoms().len(), 1);
    assert_eq!(merged.atom_mass(a()), 2.0 * PI);
}

#[test]
fn linear_combination_cases() {
    let mu = atoms(&[(a(), 3.0 * PI), (b(), PI)]);
    let nu = uniform(2.0);
    assert_eq!(
        FiniteMeasure::linear_combine(&[1.0, 0.0], &[&mu, &nu])
            .unwrap()
            .atoms(),
        mu.atoms()
    );
    let half = atoms(&[(a(), 2.0 * PI)]);
    let whole = FiniteMeasure::linear_combine(&[0.5, 0.5], &[&half, &half]).unwrap();
    assert_eq!(whole.atoms().len(), 1);
    assert!((whole.atom_mass(a()) - 2.0 * PI).abs() < 1e-15);
    let f = uniform(1.0);
    let g = FiniteMeasure::from_density_fn(dom(), |p| 2.0 * p.x).unwrap();
    let combo = FiniteMeasure::linear_combine(&[4.0 * PI, PI], &[&f, &g]).unwrap();
    assert!((combo.total_mass() - 5.0 * PI).abs() <= 1e-12);
}

#[test]
fn restriction_cases() {
    let m = atoms(&[(a(), 3.0 * PI), (b(), PI)]);
    let all = m.restrict(a(), 1.0);
    assert_eq!(all.atoms(), m.atoms());
    assert!(atoms(&[(a(), PI)]).restrict(b(), 0.1).is_zero());
    let h = 1.0 / 256.0;
    let fine = FiniteMeasure::from_density_fn(Domain::unit_square(h).unwrap(), |_| 1.0).unwrap();
    let disk = fine.restrict(a(), 0.25).total_mass();
    assert!(
        (disk - PI * 0.0625).abs() < 4.0 * 2.0 * PI * 0.25 * h,
        "{disk}"
    );
}

#[test]
fn overweight_atoms_cases() {
    assert_eq!(
        atoms(&[(a(), 5.0 * PI), (b(), PI)]).overweight_atoms(2.0 * PI),
        vec![a()]
    );
    assert!(FiniteMeasure::zero(dom())
        .overweight_atoms(2.0 * PI)
        .is_empty());
    assert_eq!(
        atoms(&[(a(), 2.0 * PI)]).overweight_atoms(2.0 * PI),
        vec![a()]
    );
}

#[test]
fn good_measure_cases() {
    let cs = Nonlinearity::CHERN_SIMONS;
    assert!(good_measure_scalar(&atoms(&[(a(), 2.0 * PI)]), cs));
    assert!(!good_measure_scalar(&atoms(&[(a(), 2.0 * PI + 1e-9)]), cs));
    assert!(good_measure_scalar(&uniform(1e6), cs));
    assert!(good_measure_system(&atoms(&[(a(), 3.0 * PI)]), &atoms(&[(a(), PI)])).unwrap());
    assert!(!good_measure_system(&atoms(&[(a(), 5.0 * PI)]), &FiniteMeasure::zero(dom())).unwrap());
    assert!(good_measure_system(&uniform(100.0), &uniform(50.0)).unwrap());
}

#[test]
fn scalar_reduction_cases() {
    let m = atoms(&[(a(), 5.0 * PI), (b(), PI), (c(), 2.0 * PI)]);
    let r = scalar_reduced(&m, Nonlinearity::CHERN_SIMONS);
    assert_eq!(
        [r.atom_mass(a()), r.atom_mass(b()), r.atom_mass(c())],
        [2.0 * PI, PI, 2.0 * PI]
    );
    let r = scalar_reduced(&atoms(&[(a(), 6.0 * PI)]), Nonlinearity::EXP_MINUS_ONE);
    assert_eq!(r.atom_mass(a()), 4.0 * PI);
}

#[test]
fn system_sum_cases() {
    let four = 4.0 * PI;
    let r = system_reduced_sum(&atoms(&[(a(), 5.0 * PI)]), &atoms(&[(a(), 2.0 * PI)])).unwrap();
    assert!((r.atom_mass(a()) - four).abs() < 1e-14);
    let r = system_reduced_sum(&atoms(&[(a(), 3.0 * PI)]), &atoms(&[(a(), PI)])).unwrap();
    assert!((r.atom_mass(a()) - four).abs() < 1e-14);
    let r = system_reduced_sum(&uniform(1.0), &atoms(&[(a(), 6.0 * PI)])).unwrap();
    assert!((r.atom_mass(a()) - four).abs() < 1e-14);
    assert!((r.diffuse_mass() - 1.0).abs() < 1e-12);
}

#[test]
fn system_atom_cases() {
    let r = system_reduced_atoms(PI, 2.0 * PI).unwrap();
    assert_eq!(r.pair(), Some((PI, 2.0 * PI)));
    let r = system_reduced_atoms(2.0 * PI, 5.0 * PI).unwrap();
    assert_eq!(r.status, ResolutionStatus::Indeterminate);
    assert_eq!(
        r.attainable_examples,
        vec![(PI, 3.0 * PI), (PI / 2.0, 3.5 * PI)]
    );
    assert!(system_reduced_atoms(-1.0, PI).is_err());
}

fn atom_list() -> impl Strategy<Value = Vec<(usize, f64)>> {
    prop::collection::vec((0usize..4, 0.0..8.0 * PI), 0..6)
}

fn build(list: &[(usize, f64)]) -> FiniteMeasure<f64> {
    let spots = [a(), b(), c(), Point::new(0.25, 0.75)];
    atoms(&list.iter().map(|&(k, m)| (spots[k], m)).collect::<Vec<_>>())
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn scalar_reduction_is_largest_good_minorant(list in atom_list(), kind in 0usize..3) {
        let nl = [Nonlinearity::CHERN_SIMONS, Nonlinearity::EXP_MINUS_ONE, Nonlinearity::TWO_EXP_SHIFTED][kind];
        let m = build(&list);
        let r = scalar_reduced(&m, nl);
        prop_assert!(good_measure_scalar(&r, nl));
        for at in m.atoms() {
            let got = r.atom_mass(at.location);
            prop_assert!(got <= at.mass);
            prop_assert_eq!(got, at.mass.min(nl.atom_capacity()));
        }
        prop_assert_eq!(scalar_reduced(&r, nl), r);
    }

    #[test]
    fn system_sum_is_good_and_idempotent(mu in atom_list(), nu in atom_list()) {
        let (mu, nu) = (build(&mu), build(&nu));
        let s = system_reduced_sum(&mu, &nu).unwrap();
        for at in s.atoms() {
            prop_assert!(at.mass <= 4.0 * PI * (1.0 + 1e-15));
            let raw = mu.atom_mass(at.location) + nu.atom_mass(at.location);
            prop_assert!((at.mass - raw.min(4.0 * PI)).abs() <= 1e-12);
        }
    }
}

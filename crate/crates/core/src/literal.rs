//! Text literals for measures, shared by scenario files, schedule manifests
//! and the `reduce` command.
//!
//! ```text
//! literal  := clause (";" clause)*
//! clause   := "diffuse=" diffuse ("+" diffuse)* | "atoms=" "[" atom ("," atom)* "]" | label ":" mass
//! diffuse  := "none" | "uniform:" c | "gaussian:" cx "," cy "," sigma "," mass
//! atom     := "[" x "," y "," mass "]"
//! mass     := decimal | decimal? "pi"
//! ```
//!
//! `label:mass` places an atom at a fixed named point (`a` is the centre of
//! the unit square, `b`..`e` are the quarter points).

use std::fmt;

use crate::error::{Error, Result};
use crate::measure::{Atom, Domain, FiniteMeasure, Point};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DiffuseSpec {
    Uniform(f64),
    Gaussian {
        cx: f64,
        cy: f64,
        sigma: f64,
        mass: f64,
    },
}

impl DiffuseSpec {
    pub fn density(&self, x: f64, y: f64) -> f64 {
        match *self {
            DiffuseSpec::Uniform(c) => c,
            DiffuseSpec::Gaussian {
                cx,
                cy,
                sigma,
                mass,
            } => {
                let r2 = (x - cx).powi(2) + (y - cy).powi(2);
                mass / (2.0 * std::f64::consts::PI * sigma * sigma)
                    * (-r2 / (2.0 * sigma * sigma)).exp()
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct MeasureLiteral {
    pub diffuse: Vec<DiffuseSpec>,
    pub atoms: Vec<[f64; 3]>,
}

/// Named points available to `label:mass` clauses.
pub fn labeled_point(label: &str) -> Option<(f64, f64)> {
    match label {
        "a" => Some((0.5, 0.5)),
        "b" => Some((0.25, 0.25)),
        "c" => Some((0.75, 0.25)),
        "d" => Some((0.25, 0.75)),
        "e" => Some((0.75, 0.75)),
        _ => None,
    }
}

fn label_of(x: f64, y: f64) -> Option<&'static str> {
    ["a", "b", "c", "d", "e"]
        .into_iter()
        .find(|l| labeled_point(l) == Some((x, y)))
}

pub fn parse_number(s: &str) -> Result<f64> {
    let t = s.trim();
    t.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::Parse(format!("expected a number, found `{t}`")))
}

/// Parses `3`, `0.25`, `5pi`, `3.5pi`, `pi`; `q pi` is computed as `q * PI`.
pub fn parse_mass(s: &str) -> Result<f64> {
    let t = s.trim().trim_matches('"');
    if let Some(q) = t.strip_suffix("pi") {
        let q = q.trim();
        let q = if q.is_empty() { 1.0 } else { parse_number(q)? };
        Ok(q * std::f64::consts::PI)
    } else {
        parse_number(t)
    }
}

/// Shortest text that [`parse_mass`] maps back to exactly `m`.
pub fn format_mass(m: f64) -> String {
    let q = m / std::f64::consts::PI;
    if m != 0.0 {
        let text = format!("{q}");
        if text.len() <= 8 && text.parse::<f64>().map(|v| v * std::f64::consts::PI) == Ok(m) {
            return if text == "1" {
                "pi".into()
            } else {
                format!("{text}pi")
            };
        }
    }
    format!("{m}")
}

/// Coordinates print without a leading zero: `.5`, `-.25`.
fn format_coord(x: f64) -> String {
    let t = format!("{x}");
    if let Some(rest) = t.strip_prefix("0.") {
        format!(".{rest}")
    } else if let Some(rest) = t.strip_prefix("-0.") {
        format!("-.{rest}")
    } else {
        t
    }
}

fn parse_diffuse(s: &str) -> Result<Vec<DiffuseSpec>> {
    let mut out = Vec::new();
    for part in s.split('+') {
        let part = part.trim();
        if part == "none" || part.is_empty() {
            continue;
        }
        let (kind, args) = part
            .split_once(':')
            .ok_or_else(|| Error::Parse(format!("diffuse spec `{part}` needs `kind:args`")))?;
        let nums = args
            .split(',')
            .map(parse_mass)
            .collect::<Result<Vec<_>>>()?;
        let spec = match (kind.trim(), nums.as_slice()) {
            ("uniform", [c]) => DiffuseSpec::Uniform(*c),
            ("gaussian", [cx, cy, sigma, mass]) => DiffuseSpec::Gaussian {
                cx: *cx,
                cy: *cy,
                sigma: *sigma,
                mass: *mass,
            },
            _ => return Err(Error::Parse(format!("malformed diffuse spec `{part}`"))),
        };
        let (DiffuseSpec::Uniform(c) | DiffuseSpec::Gaussian { mass: c, .. }) = spec;
        if c < 0.0 {
            return Err(Error::Parse(format!("negative diffuse mass in `{part}`")));
        }
        if let DiffuseSpec::Gaussian { sigma, .. } = spec {
            if sigma <= 0.0 {
                return Err(Error::Parse(format!(
                    "gaussian sigma must be positive in `{part}`"
                )));
            }
        }
        out.push(spec);
    }
    Ok(out)
}

fn parse_atom_list(s: &str) -> Result<Vec<[f64; 3]>> {
    let t = s.trim();
    let inner = t
        .strip_prefix('[')
        .and_then(|r| r.strip_suffix(']'))
        .ok_or_else(|| Error::Parse(format!("atom list `{t}` must be bracketed")))?;
    let mut atoms = Vec::new();
    let mut rest = inner.trim();
    while !rest.is_empty() {
        let body = rest
            .strip_prefix('[')
            .ok_or_else(|| Error::Parse(format!("expected `[x, y, mass]` at `{rest}`")))?;
        let end = body
            .find(']')
            .ok_or_else(|| Error::Parse("unterminated atom".into()))?;
        let fields: Vec<&str> = body[..end].split(',').collect();
        let [x, y, m] = fields.as_slice() else {
            return Err(Error::Parse(format!(
                "atom `[{}]` needs three fields",
                &body[..end]
            )));
        };
        atoms.push([parse_number(x)?, parse_number(y)?, parse_mass(m)?]);
        rest = body[end + 1..]
            .trim_start()
            .trim_start_matches(',')
            .trim_start();
    }
    Ok(atoms)
}

impl MeasureLiteral {
    pub fn parse(s: &str) -> Result<Self> {
        let mut lit = MeasureLiteral::default();
        for clause in s.split(';') {
            let clause = clause.trim();
            if clause.is_empty() {
                continue;
            }
            if let Some(v) = clause
                .strip_prefix("diffuse=")
                .or_else(|| clause.strip_prefix("diffuse ="))
            {
                lit.diffuse
                    .extend(parse_diffuse(v.trim().trim_matches('"'))?);
            } else if let Some(v) = clause
                .strip_prefix("atoms=")
                .or_else(|| clause.strip_prefix("atoms ="))
            {
                lit.atoms.extend(parse_atom_list(v)?);
            } else if let Some((label, mass)) = clause.split_once(':') {
                for (label, mass) in std::iter::once((label, mass)) {
                    let (x, y) = labeled_point(label.trim()).ok_or_else(|| {
                        Error::Parse(format!("unknown point label `{}`", label.trim()))
                    })?;
                    lit.atoms.push([x, y, parse_mass(mass)?]);
                }
            } else {
                return Err(Error::Parse(format!("unrecognized clause `{clause}`")));
            }
        }
        Ok(lit)
    }

    /// Samples the diffuse specs at the nodes of `domain` and validates atom positions.
    pub fn build(&self, domain: Domain<f64>) -> Result<FiniteMeasure<f64>> {
        for &[x, y, _] in &self.atoms {
            let p = Point::new(x, y);
            if domain.boundary_distance(p) < 2.0 * domain.h() {
                return Err(Error::Parse(format!(
                    "atom at ({x}, {y}) lies outside the domain interior (needs distance >= 2h from the boundary)"
                )));
            }
        }
        let diffuse = if self.diffuse.is_empty() {
            None
        } else {
            let mut v = Vec::with_capacity(domain.len());
            for j in 0..domain.rows() {
                for i in 0..domain.cols() {
                    let p = domain.node(i, j);
                    v.push(self.diffuse.iter().map(|d| d.density(p.x, p.y)).sum());
                }
            }
            Some(v)
        };
        let atoms = self
            .atoms
            .iter()
            .map(|&[x, y, m]| Atom::new(Point::new(x, y), m))
            .collect();
        FiniteMeasure::new(domain, diffuse, atoms)
    }

    /// Atoms merged by exact location, in first-appearance order.
    pub fn merged_atoms(&self) -> Vec<[f64; 3]> {
        let mut out: Vec<[f64; 3]> = Vec::new();
        for a in &self.atoms {
            match out.iter_mut().find(|b| b[0] == a[0] && b[1] == a[1]) {
                Some(b) => b[2] += a[2],
                None => out.push(*a),
            }
        }
        out
    }

    pub fn atom_mass_at(&self, x: f64, y: f64) -> f64 {
        self.merged_atoms()
            .iter()
            .find(|a| a[0] == x && a[1] == y)
            .map_or(0.0, |a| a[2])
    }

    pub fn point_name(x: f64, y: f64) -> String {
        label_of(x, y).map_or_else(|| format!("({x},{y})"), str::to_string)
    }
}

impl fmt::Display for DiffuseSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            DiffuseSpec::Uniform(c) => write!(f, "uniform:{c}"),
            DiffuseSpec::Gaussian {
                cx,
                cy,
                sigma,
                mass,
            } => {
                write!(f, "gaussian:{cx},{cy},{sigma},{}", format_mass(mass))
            }
        }
    }
}

impl fmt::Display for MeasureLiteral {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut clauses = Vec::new();
        if !self.diffuse.is_empty() {
            let parts: Vec<String> = self.diffuse.iter().map(ToString::to_string).collect();
            clauses.push(format!("diffuse={}", parts.join("+")));
        }
        let atoms: Vec<String> = self
            .atoms
            .iter()
            .map(|[x, y, m]| {
                format!(
                    "[{},{},{}]",
                    format_coord(*x),
                    format_coord(*y),
                    format_mass(*m)
                )
            })
            .collect();
        clauses.push(format!("atoms=[{}]", atoms.join(",")));
        f.write_str(&clauses.join("; "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn parses_cli_forms() {
        let lit = MeasureLiteral::parse("atoms=[[.5,.5,5pi]]").unwrap();
        assert_eq!(lit.atoms, vec![[0.5, 0.5, 5.0 * PI]]);
        let lab = MeasureLiteral::parse("a:3pi").unwrap();
        assert_eq!(lab.atoms, vec![[0.5, 0.5, 3.0 * PI]]);
        let mixed = MeasureLiteral::parse(
            "diffuse=uniform:1+gaussian:0.3,0.3,0.05,2pi; atoms=[[0.5, 0.5, 2], [0.25,0.25,pi]]",
        )
        .unwrap();
        assert_eq!(mixed.diffuse.len(), 2);
        assert_eq!(mixed.atoms[1][2], PI);
        assert!(MeasureLiteral::parse("atoms=[[0.5,0.5]]").is_err());
        assert!(MeasureLiteral::parse("z:1").is_err());
        assert!(MeasureLiteral::parse("diffuse=uniform:-1").is_err());
        assert_eq!(
            MeasureLiteral::parse("diffuse=none").unwrap(),
            MeasureLiteral::default()
        );
    }

    #[test]
    fn mass_formatting() {
        assert_eq!(format_mass(2.0 * PI), "2pi");
        assert_eq!(format_mass(3.5 * PI), "3.5pi");
        assert_eq!(format_mass(0.0), "0");
        assert_eq!(format_mass(1.25), "1.25");
        let odd = 2.0 * PI + 1e-9;
        assert_eq!(parse_mass(&format_mass(odd)).unwrap(), odd);
    }

    #[test]
    fn builds_on_grid() {
        let dom = Domain::unit_square(1.0 / 32.0).unwrap();
        let m = MeasureLiteral::parse("diffuse=uniform:1; atoms=[[0.5,0.5,pi]]")
            .unwrap()
            .build(dom)
            .unwrap();
        assert!((m.total_mass() - 1.0 - PI).abs() < 1e-12);
        let outside = MeasureLiteral::parse("atoms=[[1.5,0.5,pi]]")
            .unwrap()
            .build(dom);
        let msg = outside.unwrap_err().to_string();
        assert!(msg.contains("(1.5, 0.5)"), "{msg}");
    }

    proptest! {
        #[test]
        fn display_round_trips(q in prop::collection::vec((0.05..0.95f64, 0.05..0.95f64, 0.0..40.0f64), 0..5),
                               c in prop::option::of(0.0..3.0f64)) {
            let lit = MeasureLiteral {
                diffuse: c.map(DiffuseSpec::Uniform).into_iter().collect(),
                atoms: q.iter().map(|(x, y, m)| [*x, *y, *m]).collect(),
            };
            let back = MeasureLiteral::parse(&lit.to_string()).unwrap();
            prop_assert_eq!(back, lit);
        }
    }
}

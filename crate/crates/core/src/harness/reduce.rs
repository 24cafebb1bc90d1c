//! `rml reduce`: exact reduced measures of literals, no solver involved.

use std::fmt::Write;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::literal::{format_mass, MeasureLiteral};
use crate::reduced::{system_reduced_atoms, Nonlinearity, ResolutionStatus};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReduceMode {
    Scalar,
    SystemSum,
    SystemAtom,
}

impl FromStr for ReduceMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "scalar" => Ok(Self::Scalar),
            "system-sum" => Ok(Self::SystemSum),
            "system-atom" => Ok(Self::SystemAtom),
            other => Err(Error::Parse(format!(
                "unknown mode `{other}` (scalar, system-sum, system-atom)"
            ))),
        }
    }
}

fn clipped(lit: &MeasureLiteral, cap: f64) -> MeasureLiteral {
    MeasureLiteral {
        diffuse: lit.diffuse.clone(),
        atoms: lit
            .merged_atoms()
            .into_iter()
            .map(|[x, y, m]| [x, y, m.min(cap)])
            .collect(),
    }
}

/// Text printed by `rml reduce`. Measure lines parse back with [`MeasureLiteral::parse`].
pub fn reduce_command(
    mu: &str,
    nu: Option<&str>,
    mode: ReduceMode,
    nl: Nonlinearity,
) -> Result<String> {
    let mu = MeasureLiteral::parse(mu)?;
    let nu = nu.map(MeasureLiteral::parse).transpose()?;
    let check_sign = |lit: &MeasureLiteral| {
        if lit.atoms.iter().any(|a| a[2] < 0.0) {
            Err(Error::Parse("atom masses must be nonnegative".into()))
        } else {
            Ok(())
        }
    };
    check_sign(&mu)?;
    if let Some(nu) = &nu {
        check_sign(nu)?;
    }
    let mut out = String::new();
    match mode {
        ReduceMode::Scalar => {
            if nu.is_some() {
                return Err(Error::Parse("scalar mode takes only --mu".into()));
            }
            let _ = writeln!(out, "{}", clipped(&mu, nl.atom_capacity()));
        }
        ReduceMode::SystemSum => {
            let nu = nu.ok_or_else(|| Error::Parse("system-sum mode needs --nu".into()))?;
            let sum = MeasureLiteral {
                diffuse: mu.diffuse.iter().chain(&nu.diffuse).copied().collect(),
                atoms: mu.atoms.iter().chain(&nu.atoms).copied().collect(),
            };
            let _ = writeln!(out, "{}", clipped(&sum, 4.0 * std::f64::consts::PI));
        }
        ReduceMode::SystemAtom => {
            let nu = nu.ok_or_else(|| Error::Parse("system-atom mode needs --nu".into()))?;
            let mut points: Vec<(f64, f64)> = Vec::new();
            for a in mu.merged_atoms().iter().chain(nu.merged_atoms().iter()) {
                if !points.contains(&(a[0], a[1])) {
                    points.push((a[0], a[1]));
                }
            }
            let mut mu_red = MeasureLiteral {
                diffuse: mu.diffuse.clone(),
                atoms: Vec::new(),
            };
            let mut nu_red = MeasureLiteral {
                diffuse: nu.diffuse.clone(),
                atoms: Vec::new(),
            };
            let mut determined = true;
            for (x, y) in points {
                let res = system_reduced_atoms(mu.atom_mass_at(x, y), nu.atom_mass_at(x, y))?;
                let name = MeasureLiteral::point_name(x, y);
                match res.status {
                    ResolutionStatus::Determined => {
                        let (a, b) = res.pair().expect("determined");
                        let _ = writeln!(
                            out,
                            "{name}: Determined ({}, {})",
                            format_mass(a),
                            format_mass(b)
                        );
                        mu_red.atoms.push([x, y, a]);
                        nu_red.atoms.push([x, y, b]);
                    }
                    ResolutionStatus::Indeterminate => {
                        determined = false;
                        let ex: Vec<String> = res
                            .attainable_examples
                            .iter()
                            .map(|(a, b)| format!("({}, {})", format_mass(*a), format_mass(*b)))
                            .collect();
                        if ex.is_empty() {
                            let _ = writeln!(out, "{name}: Indeterminate");
                        } else {
                            let _ =
                                writeln!(out, "{name}: Indeterminate, examples {}", ex.join(", "));
                        }
                    }
                }
            }
            if determined {
                let _ = writeln!(out, "mu# = {mu_red}");
                let _ = writeln!(out, "nu# = {nu_red}");
            }
        }
    }
    Ok(out)
}

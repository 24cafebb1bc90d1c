//! Node-valued fields with homogeneous Dirichlet boundary, and their file formats.
//!
//! Binary layout (`RMLGRID1`), all little-endian:
//!
//! ```text
//! magic[8] = "RMLGRID1"
//! rows: u64, cols: u64
//! h: f64, origin_x: f64, origin_y: f64
//! rows * cols f64 values, row-major (row j = fixed y)
//! ```

use std::io::{self, Read, Write};

use crate::error::{Error, Result};
use crate::measure::{Domain, Point};
use crate::real::Real;

pub const GRID_MAGIC: &[u8; 8] = b"RMLGRID1";

#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction<T> {
    domain: Domain<T>,
    values: Vec<T>,
}

impl<T: Real> GridFunction<T> {
    pub fn zeros(domain: Domain<T>) -> Self {
        Self {
            domain,
            values: vec![T::zero(); domain.len()],
        }
    }

    /// Wraps node values. Boundary nodes are forced to zero.
    pub fn from_values(domain: Domain<T>, mut values: Vec<T>) -> Result<Self> {
        if values.len() != domain.len() {
            return Err(Error::GridMismatch);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidDensity(
                "grid function has non-finite values".into(),
            ));
        }
        zero_boundary(&domain, &mut values);
        Ok(Self { domain, values })
    }

    /// Unchecked constructor for solver internals; caller guarantees the invariants.
    pub(crate) fn from_raw(domain: Domain<T>, values: Vec<T>) -> Self {
        debug_assert_eq!(values.len(), domain.len());
        Self { domain, values }
    }

    pub fn from_fn(domain: Domain<T>, f: impl Fn(Point<T>) -> T) -> Self {
        let mut values = Vec::with_capacity(domain.len());
        for j in 0..domain.rows() {
            for i in 0..domain.cols() {
                values.push(if domain.is_boundary(i, j) {
                    T::zero()
                } else {
                    f(domain.node(i, j))
                });
            }
        }
        Self { domain, values }
    }

    pub fn domain(&self) -> &Domain<T> {
        &self.domain
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> T {
        self.values[self.domain.index(i, j)]
    }

    pub fn max(&self) -> T {
        self.values.iter().copied().fold(T::neg_infinity(), T::max)
    }

    pub fn min(&self) -> T {
        self.values.iter().copied().fold(T::infinity(), T::min)
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    /// `h^2 * sum |u|` over the nodes.
    pub fn l1_norm(&self) -> T {
        let h2 = self.domain.h() * self.domain.h();
        self.values.iter().map(|v| v.abs()).sum::<T>() * h2
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        let mut values: Vec<T> = self.values.iter().map(|v| f(*v)).collect();
        zero_boundary(&self.domain, &mut values);
        Self {
            domain: self.domain,
            values,
        }
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        if !self.domain.same_grid(&other.domain) {
            return Err(Error::GridMismatch);
        }
        let mut values: Vec<T> = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| f(*a, *b))
            .collect();
        zero_boundary(&self.domain, &mut values);
        Ok(Self {
            domain: self.domain,
            values,
        })
    }

    pub fn to_f64(&self) -> GridFunction<f64> {
        let d = &self.domain;
        let domain = Domain::new(
            Point::new(d.origin().x.as_f64(), d.origin().y.as_f64()),
            d.width().as_f64(),
            d.height().as_f64(),
            d.h().as_f64(),
            d.d().as_f64(),
        )
        .expect("valid domain stays valid in f64");
        GridFunction {
            domain,
            values: self.values.iter().map(|v| v.as_f64()).collect(),
        }
    }

    pub fn write_binary<W: Write>(&self, mut w: W) -> io::Result<()> {
        let g = self.to_f64();
        let d = g.domain;
        w.write_all(GRID_MAGIC)?;
        w.write_all(&(d.rows() as u64).to_le_bytes())?;
        w.write_all(&(d.cols() as u64).to_le_bytes())?;
        for v in [d.h(), d.origin().x, d.origin().y] {
            w.write_all(&v.to_le_bytes())?;
        }
        let mut buf = Vec::with_capacity(8 * g.values.len());
        for v in &g.values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)
    }

    /// `x,y,value` with a header line, one row per node.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "x,y,value")?;
        let d = &self.domain;
        for j in 0..d.rows() {
            for i in 0..d.cols() {
                let p = d.node(i, j);
                writeln!(
                    w,
                    "{},{},{}",
                    p.x.as_f64(),
                    p.y.as_f64(),
                    self.at(i, j).as_f64()
                )?;
            }
        }
        Ok(())
    }
}

/// Stored values need not vanish on the boundary (measure densities use the
/// same layout), so reading does not enforce the Dirichlet condition.
pub fn read_binary<R: Read>(mut r: R) -> Result<(Domain<f64>, Vec<f64>)> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)
        .map_err(|e| Error::GridFormat(format!("header: {e}")))?;
    if &magic != GRID_MAGIC {
        return Err(Error::GridFormat("bad magic".into()));
    }
    let mut u = [0u8; 8];
    let mut next_u64 = |r: &mut R| -> Result<u64> {
        r.read_exact(&mut u)
            .map_err(|e| Error::GridFormat(format!("header: {e}")))?;
        Ok(u64::from_le_bytes(u))
    };
    let rows = next_u64(&mut r)? as usize;
    let cols = next_u64(&mut r)? as usize;
    let mut f = [0u8; 8];
    let mut next_f64 = |r: &mut R| -> Result<f64> {
        r.read_exact(&mut f)
            .map_err(|e| Error::GridFormat(format!("header: {e}")))?;
        Ok(f64::from_le_bytes(f))
    };
    let h = next_f64(&mut r)?;
    let ox = next_f64(&mut r)?;
    let oy = next_f64(&mut r)?;
    if rows < 5 || cols < 5 || rows.checked_mul(cols).is_none_or(|n| n > 1 << 28) {
        return Err(Error::GridFormat(format!(
            "implausible dimensions {rows}x{cols}"
        )));
    }
    let dom = Domain::rectangle(
        Point::new(ox, oy),
        (cols - 1) as f64 * h,
        (rows - 1) as f64 * h,
        h,
    )
    .map_err(|e| Error::GridFormat(e.to_string()))?;
    let mut bytes = vec![0u8; rows * cols * 8];
    r.read_exact(&mut bytes)
        .map_err(|e| Error::GridFormat(format!("payload: {e}")))?;
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((dom, values))
}

pub fn read_grid_function<R: Read>(r: R) -> Result<GridFunction<f64>> {
    let (dom, values) = read_binary(r)?;
    GridFunction::from_values(dom, values)
}

pub(crate) fn zero_boundary<T: Real>(domain: &Domain<T>, values: &mut [T]) {
    let (cols, rows) = (domain.cols(), domain.rows());
    for i in 0..cols {
        values[i] = T::zero();
        values[(rows - 1) * cols + i] = T::zero();
    }
    for j in 0..rows {
        values[j * cols] = T::zero();
        values[j * cols + cols - 1] = T::zero();
    }
}

/// Discrete L1 distance `h^2 sum |u1 - u2|`.
pub fn l1_gap<T: Real>(u1: &GridFunction<T>, u2: &GridFunction<T>) -> Result<T> {
    if !u1.domain.same_grid(&u2.domain) {
        return Err(Error::GridMismatch);
    }
    let h2 = u1.domain.h() * u1.domain.h();
    Ok(u1
        .values
        .iter()
        .zip(&u2.values)
        .map(|(a, b)| (*a - *b).abs())
        .sum::<T>()
        * h2)
}

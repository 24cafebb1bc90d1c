//! Logarithmic potential `N(m)(x) = (1/2π) ∫ log(d/|x-y|) dm(y)`.
//!
//! Diffuse parts are convolved with the node-sampled kernel by FFT; atoms are
//! summed directly. Where the kernel is singular (the node whose cell holds
//! the source) the cell average of the kernel is used instead.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::measure::{Domain, FiniteMeasure, Point};
use crate::real::Real;

/// Mean of `ln|x|` over the square `[-1/2, 1/2]^2`.
pub const LOG_CELL_MEAN: f64 = -1.061_175_426_882_524_4;

/// Cell-averaged kernel `(1/2π) log(d/|x|)` over a square of side `h`.
pub fn self_cell_kernel(d: f64, h: f64) -> f64 {
    (d.ln() - h.ln() - LOG_CELL_MEAN) / std::f64::consts::TAU
}

fn kernel(d: f64, h: f64, r: f64) -> f64 {
    if r == 0.0 {
        self_cell_kernel(d, h)
    } else {
        (d / r).ln() / std::f64::consts::TAU
    }
}

fn fft2(data: &mut [Complex<f64>], p: usize, q: usize, inverse: bool) {
    let mut planner = FftPlanner::new();
    let (row_fft, col_fft) = if inverse {
        (planner.plan_fft_inverse(p), planner.plan_fft_inverse(q))
    } else {
        (planner.plan_fft_forward(p), planner.plan_fft_forward(q))
    };
    for row in data.chunks_exact_mut(p) {
        row_fft.process(row);
    }
    let mut col = vec![Complex::new(0.0, 0.0); q];
    for i in 0..p {
        for j in 0..q {
            col[j] = data[j * p + i];
        }
        col_fft.process(&mut col);
        for j in 0..q {
            data[j * p + i] = col[j];
        }
    }
}

/// Node masses (trapezoidal weight times density) convolved with the kernel.
pub(crate) fn diffuse_potential_fft(domain: &Domain<f64>, density: &[f64]) -> Vec<f64> {
    let (cols, rows) = (domain.cols(), domain.rows());
    let (p, q) = (2 * cols, 2 * rows);
    let (h, d) = (domain.h(), domain.d());
    let mut a = vec![Complex::new(0.0, 0.0); p * q];
    for j in 0..rows {
        for i in 0..cols {
            a[j * p + i].re = density[domain.index(i, j)] * domain.trapezoid_weight(i, j);
        }
    }
    let mut k = vec![Complex::new(0.0, 0.0); p * q];
    for dj in -(rows as isize - 1)..rows as isize {
        for di in -(cols as isize - 1)..cols as isize {
            let r = h * ((di * di + dj * dj) as f64).sqrt();
            let (ii, jj) = (
                di.rem_euclid(p as isize) as usize,
                dj.rem_euclid(q as isize) as usize,
            );
            k[jj * p + ii].re = kernel(d, h, r);
        }
    }
    fft2(&mut a, p, q, false);
    fft2(&mut k, p, q, false);
    for (x, y) in a.iter_mut().zip(&k) {
        *x *= *y;
    }
    fft2(&mut a, p, q, true);
    let scale = 1.0 / (p * q) as f64;
    let mut out = vec![0.0; domain.len()];
    for j in 0..rows {
        for i in 0..cols {
            out[domain.index(i, j)] = a[j * p + i].re * scale;
        }
    }
    out
}

/// Same sum evaluated pair by pair; quadratic cost, used to cross-check the FFT path.
pub fn diffuse_potential_direct(domain: &Domain<f64>, density: &[f64]) -> Vec<f64> {
    let (h, d) = (domain.h(), domain.d());
    let mut out = vec![0.0; domain.len()];
    for j in 0..domain.rows() {
        for i in 0..domain.cols() {
            let mut s = 0.0;
            for jj in 0..domain.rows() {
                for ii in 0..domain.cols() {
                    let mass = density[domain.index(ii, jj)] * domain.trapezoid_weight(ii, jj);
                    if mass != 0.0 {
                        let r = h
                            * (((i as f64) - ii as f64).powi(2) + ((j as f64) - jj as f64).powi(2))
                                .sqrt();
                        s += mass * kernel(d, h, r);
                    }
                }
            }
            out[domain.index(i, j)] = s;
        }
    }
    out
}

fn atom_potential_into(domain: &Domain<f64>, at: Point<f64>, mass: f64, out: &mut [f64]) {
    let (h, d) = (domain.h(), domain.d());
    let (si, sj) = domain.nearest_node(at);
    let c = mass / std::f64::consts::TAU;
    for j in 0..domain.rows() {
        for i in 0..domain.cols() {
            let v = if (i, j) == (si, sj) {
                mass * self_cell_kernel(d, h)
            } else {
                c * (d / domain.node(i, j).dist(&at)).ln()
            };
            out[domain.index(i, j)] += v;
        }
    }
}

pub(crate) fn potential_f64(m: &FiniteMeasure<f64>) -> Vec<f64> {
    let dom = m.domain();
    let mut out = match m.diffuse() {
        Some(density) => diffuse_potential_fft(dom, density),
        None => vec![0.0; dom.len()],
    };
    for a in m.atoms() {
        atom_potential_into(dom, a.location, a.mass, &mut out);
    }
    out
}

pub(crate) fn to_f64_measure<T: Real>(m: &FiniteMeasure<T>) -> FiniteMeasure<f64> {
    let d = m.domain();
    let dom = Domain::new(
        Point::new(d.origin().x.as_f64(), d.origin().y.as_f64()),
        d.width().as_f64(),
        d.height().as_f64(),
        d.h().as_f64(),
        d.d().as_f64(),
    )
    .expect("valid domain stays valid in f64");
    let atoms = m
        .atoms()
        .iter()
        .map(|a| {
            crate::measure::Atom::new(
                Point::new(a.location.x.as_f64(), a.location.y.as_f64()),
                a.mass.as_f64(),
            )
        })
        .collect();
    let diffuse = m.diffuse().map(|v| v.iter().map(|x| x.as_f64()).collect());
    FiniteMeasure::new(dom, diffuse, atoms).expect("valid measure stays valid in f64")
}

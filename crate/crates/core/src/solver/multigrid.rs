//! `-Δ_h + diag(c)` on node grids with homogeneous Dirichlet boundary, solved
//! by conjugate gradients preconditioned with one symmetric geometric V-cycle.

use crate::error::{Error, Result};
use crate::real::Real;

#[derive(Clone, Debug)]
struct Level<T> {
    nx: usize,
    ny: usize,
    inv_h2: T,
    c: Vec<T>,
    x: Vec<T>,
    b: Vec<T>,
    r: Vec<T>,
}

impl<T: Real> Level<T> {
    fn new(nx: usize, ny: usize, h: T, c: Vec<T>) -> Self {
        let n = (nx + 1) * (ny + 1);
        Self {
            nx,
            ny,
            inv_h2: T::one() / (h * h),
            c,
            x: vec![T::zero(); n],
            b: vec![T::zero(); n],
            r: vec![T::zero(); n],
        }
    }

    #[inline]
    fn cols(&self) -> usize {
        self.nx + 1
    }

    /// One red-black half sweep over nodes with `(i + j) % 2 == colour`.
    fn relax_colour(&mut self, colour: usize) {
        let cols = self.cols();
        let four = T::lit(4.0) * self.inv_h2;
        for j in 1..self.ny {
            let start = 1 + (j + 1 + colour) % 2;
            let row = j * cols;
            let mut i = start;
            while i < self.nx {
                let p = row + i;
                let nb = self.x[p - 1] + self.x[p + 1] + self.x[p - cols] + self.x[p + cols];
                self.x[p] = (self.b[p] + nb * self.inv_h2) / (four + self.c[p]);
                i += 2;
            }
        }
    }

    fn residual(&mut self) {
        let cols = self.cols();
        apply_into(
            self.nx,
            self.ny,
            self.inv_h2,
            Some(&self.c),
            &self.x,
            &mut self.r,
        );
        for j in 1..self.ny {
            for i in 1..self.nx {
                let p = j * cols + i;
                self.r[p] = self.b[p] - self.r[p];
            }
        }
    }
}

/// `out = (-Δ_h + c) x` on interior nodes, zero on the boundary.
pub(crate) fn apply_into<T: Real>(
    nx: usize,
    ny: usize,
    inv_h2: T,
    c: Option<&[T]>,
    x: &[T],
    out: &mut [T],
) {
    let cols = nx + 1;
    let four = T::lit(4.0);
    for i in 0..cols {
        out[i] = T::zero();
        out[ny * cols + i] = T::zero();
    }
    for j in 1..ny {
        let row = j * cols;
        out[row] = T::zero();
        out[row + nx] = T::zero();
        for i in 1..nx {
            let p = row + i;
            let lap = four * x[p] - x[p - 1] - x[p + 1] - x[p - cols] - x[p + cols];
            out[p] = match c {
                Some(c) => lap * inv_h2 + c[p] * x[p],
                None => lap * inv_h2,
            };
        }
    }
}

/// Full-weighting restriction of a nodal field onto the next coarser grid.
fn restrict_into<T: Real>(nx: usize, ny: usize, fine: &[T], coarse: &mut [T]) {
    let (cnx, cny) = (nx / 2, ny / 2);
    let (fc, cc) = (nx + 1, cnx + 1);
    let (two, four, sixteenth) = (T::lit(2.0), T::lit(4.0), T::lit(1.0 / 16.0));
    coarse.iter_mut().for_each(|v| *v = T::zero());
    for jc in 1..cny {
        for ic in 1..cnx {
            let p = 2 * jc * fc + 2 * ic;
            let edge = fine[p - 1] + fine[p + 1] + fine[p - fc] + fine[p + fc];
            let corner = fine[p - fc - 1] + fine[p - fc + 1] + fine[p + fc - 1] + fine[p + fc + 1];
            coarse[jc * cc + ic] = (four * fine[p] + two * edge + corner) * sixteenth;
        }
    }
}

/// Bilinear interpolation of the coarse correction, added to `fine`.
fn prolong_add<T: Real>(nx: usize, ny: usize, coarse: &[T], fine: &mut [T]) {
    let (cnx, cny) = (nx / 2, ny / 2);
    let (fc, cc) = (nx + 1, cnx + 1);
    let half = T::lit(0.5);
    let quarter = T::lit(0.25);
    for jc in 0..cny {
        for ic in 0..cnx {
            let a = coarse[jc * cc + ic];
            let b = coarse[jc * cc + ic + 1];
            let c = coarse[(jc + 1) * cc + ic];
            let d = coarse[(jc + 1) * cc + ic + 1];
            let p = 2 * jc * fc + 2 * ic;
            if jc > 0 && ic > 0 {
                fine[p] += a;
            }
            if jc > 0 {
                fine[p + 1] += (a + b) * half;
            }
            if ic > 0 {
                fine[p + fc] += (a + c) * half;
            }
            fine[p + fc + 1] += (a + b + c + d) * quarter;
        }
    }
}

/// Grid hierarchy for one operator `-Δ_h + diag(c)`.
#[derive(Clone, Debug)]
pub(crate) struct Multigrid<T> {
    levels: Vec<Level<T>>,
    sweeps: usize,
    coarse_sweeps: usize,
}

impl<T: Real> Multigrid<T> {
    pub(crate) fn new(nx: usize, ny: usize, h: T, c: Vec<T>) -> Self {
        let mut levels = vec![Level::new(nx, ny, h, c)];
        loop {
            let last = levels.last().expect("at least one level");
            if last.nx % 2 != 0 || last.ny % 2 != 0 || last.nx < 4 || last.ny < 4 {
                break;
            }
            let (cnx, cny) = (last.nx / 2, last.ny / 2);
            let mut cc = vec![T::zero(); (cnx + 1) * (cny + 1)];
            restrict_into(last.nx, last.ny, &last.c, &mut cc);
            let ch = T::one() / last.inv_h2.sqrt() * T::lit(2.0);
            levels.push(Level::new(cnx, cny, ch, cc));
        }
        let coarsest = levels.last().expect("at least one level");
        let coarse_sweeps = (coarsest.nx.max(coarsest.ny) * 4).max(2);
        Self {
            levels,
            sweeps: 2,
            coarse_sweeps,
        }
    }

    pub(crate) fn apply(&self, x: &[T], out: &mut [T]) {
        let l = &self.levels[0];
        apply_into(l.nx, l.ny, l.inv_h2, Some(&l.c), x, out);
    }

    /// `z = V(r)`, symmetric: red-black pre-smoothing, black-red post-smoothing.
    pub(crate) fn precondition(&mut self, r: &[T], z: &mut [T]) {
        self.levels[0].b.copy_from_slice(r);
        self.vcycle(0);
        z.copy_from_slice(&self.levels[0].x);
    }

    fn vcycle(&mut self, k: usize) {
        let last = k + 1 == self.levels.len();
        let sweeps = if last {
            self.coarse_sweeps
        } else {
            self.sweeps
        };
        {
            let l = &mut self.levels[k];
            l.x.iter_mut().for_each(|v| *v = T::zero());
            for _ in 0..sweeps {
                l.relax_colour(0);
                l.relax_colour(1);
            }
        }
        if last {
            let l = &mut self.levels[k];
            for _ in 0..sweeps {
                l.relax_colour(1);
                l.relax_colour(0);
            }
            return;
        }
        let (head, tail) = self.levels.split_at_mut(k + 1);
        let (fine, coarse) = (&mut head[k], &mut tail[0]);
        fine.residual();
        restrict_into(fine.nx, fine.ny, &fine.r, &mut coarse.b);
        self.vcycle(k + 1);
        let (head, tail) = self.levels.split_at_mut(k + 1);
        let (fine, coarse) = (&mut head[k], &tail[0]);
        prolong_add(fine.nx, fine.ny, &coarse.x, &mut fine.x);
        for _ in 0..self.sweeps {
            fine.relax_colour(1);
            fine.relax_colour(0);
        }
    }
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(x, y)| *x * *y).sum()
}

fn max_abs<T: Real>(a: &[T]) -> T {
    a.iter().fold(T::zero(), |m, v| m.max(v.abs()))
}

/// Solves `A x = b` in place from the initial `x`, stopping when
/// `max|b - A x| <= tol * max|b|`. Returns the iteration count.
pub(crate) fn pcg<T: Real>(
    mg: &mut Multigrid<T>,
    b: &[T],
    x: &mut [T],
    tol: T,
    max_iters: usize,
) -> Result<usize> {
    let n = b.len();
    let bnorm = max_abs(b);
    if bnorm == T::zero() {
        x.iter_mut().for_each(|v| *v = T::zero());
        return Ok(0);
    }
    let target = tol * bnorm;
    let mut r = vec![T::zero(); n];
    mg.apply(x, &mut r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = *bi - *ri;
    }
    if max_abs(&r) <= target {
        return Ok(0);
    }
    let mut z = vec![T::zero(); n];
    mg.precondition(&r, &mut z);
    let mut p = z.clone();
    let mut q = vec![T::zero(); n];
    let mut rz = dot(&r, &z);
    for it in 1..=max_iters {
        mg.apply(&p, &mut q);
        let pq = dot(&p, &q);
        if !(pq > T::zero()) {
            return Err(Error::LinearSolve {
                iterations: it,
                residual: (max_abs(&r) / bnorm).as_f64(),
            });
        }
        let alpha = rz / pq;
        for k in 0..n {
            x[k] += alpha * p[k];
            r[k] -= alpha * q[k];
        }
        if max_abs(&r) <= target {
            return Ok(it);
        }
        mg.precondition(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..n {
            p[k] = z[k] + beta * p[k];
        }
    }
    Err(Error::LinearSolve {
        iterations: max_iters,
        residual: (max_abs(&r) / bnorm).as_f64(),
    })
}

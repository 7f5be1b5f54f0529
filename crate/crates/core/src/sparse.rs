//! Minimal sparse linear algebra: CSR matrices and a Jacobi-preconditioned
//! conjugate gradient solver for the SPD Newton systems.

/// Compressed sparse row matrix, square.
pub struct Csr {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

/// Builder accumulating (row, col, value) triplets with duplicate summing.
pub struct CsrBuilder {
    n: usize,
    triplets: Vec<(u32, u32, f64)>,
}

impl CsrBuilder {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            triplets: Vec::new(),
        }
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        if v != 0.0 {
            self.triplets.push((i as u32, j as u32, v));
        }
    }

    pub fn build(mut self) -> Csr {
        self.triplets.sort_unstable_by_key(|t| (t.0, t.1));
        let mut row_counts = vec![0usize; self.n + 1];
        let mut col_idx: Vec<usize> = Vec::with_capacity(self.triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(self.triplets.len());
        let mut last: Option<(u32, u32)> = None;
        for &(i, j, v) in &self.triplets {
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(j as usize);
                values.push(v);
                row_counts[i as usize + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..self.n {
            row_counts[i + 1] += row_counts[i];
        }
        Csr {
            n: self.n,
            row_ptr: row_counts,
            col_idx,
            values,
        }
    }
}

impl Csr {
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        for i in 0..self.n {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            y[i] = acc;
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n];
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                if self.col_idx[k] == i {
                    d[i] = self.values[k];
                }
            }
        }
        d
    }
}

pub struct CgResult {
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

/// Jacobi-preconditioned conjugate gradient for SPD systems. Iterates until
/// the residual 2-norm drops below `rel_tol * |b|` (with a tiny absolute
/// floor) or `max_iter` is reached.
pub fn pcg(a: &Csr, b: &[f64], x: &mut [f64], rel_tol: f64, max_iter: usize) -> CgResult {
    let n = a.n;
    let mut diag = a.diagonal();
    for d in diag.iter_mut() {
        if *d <= 0.0 {
            *d = 1.0;
        }
    }
    let b_norm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let target = rel_tol * b_norm + 1e-300;

    let mut r = vec![0.0; n];
    a.matvec(x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let mut z: Vec<f64> = (0..n).map(|i| r[i] / diag[i]).collect();
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(z.iter()).map(|(a, b)| a * b).sum();
    let mut ap = vec![0.0; n];

    let mut res = r.iter().map(|v| v * v).sum::<f64>().sqrt();
    for it in 0..max_iter {
        if res <= target {
            return CgResult {
                iterations: it,
                residual: res,
                converged: true,
            };
        }
        a.matvec(&p, &mut ap);
        let pap: f64 = p.iter().zip(ap.iter()).map(|(a, b)| a * b).sum();
        if pap <= 0.0 {
            break; // lost positive definiteness numerically
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        let rz_new: f64 = r.iter().zip(z.iter()).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        res = r.iter().map(|v| v * v).sum::<f64>().sqrt();
    }
    CgResult {
        iterations: max_iter,
        residual: res,
        converged: res <= target,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn csr_build_and_matvec() {
        let mut b = CsrBuilder::new(3);
        b.add(0, 0, 2.0);
        b.add(0, 1, -1.0);
        b.add(1, 1, 2.0);
        b.add(1, 0, -1.0);
        b.add(1, 2, -1.0);
        b.add(2, 2, 2.0);
        b.add(2, 1, -1.0);
        b.add(0, 0, 1.0); // duplicate accumulates
        let m = b.build();
        let mut y = vec![0.0; 3];
        m.matvec(&[1.0, 2.0, 3.0], &mut y);
        assert_relative_eq!(y[0], 3.0 - 2.0);
        assert_relative_eq!(y[1], -1.0 + 4.0 - 3.0);
        assert_relative_eq!(y[2], -2.0 + 6.0);
    }

    #[test]
    fn pcg_solves_tridiagonal() {
        let n = 50;
        let mut b = CsrBuilder::new(n);
        for i in 0..n {
            b.add(i, i, 2.0);
            if i > 0 {
                b.add(i, i - 1, -1.0);
            }
            if i + 1 < n {
                b.add(i, i + 1, -1.0);
            }
        }
        let m = b.build();
        let x_true: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).sin()).collect();
        let mut rhs = vec![0.0; n];
        m.matvec(&x_true, &mut rhs);
        let mut x = vec![0.0; n];
        let res = pcg(&m, &rhs, &mut x, 1e-14, 10 * n);
        assert!(res.converged);
        for i in 0..n {
            assert_relative_eq!(x[i], x_true[i], epsilon = 1e-9);
        }
    }
}

//! Compressed sparse row storage for the nodal-block stiffness pattern and
//! a Jacobi-preconditioned conjugate-gradient solver.

use super::mesh::Mesh;
use super::FemError;

#[derive(Clone, Debug)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    /// Zero matrix with the two-dof-per-node pattern induced by `mesh`.
    pub fn for_mesh(mesh: &Mesh) -> Self {
        let nn = mesh.num_nodes();
        let mut adj: Vec<Vec<usize>> = (0..nn).map(|i| vec![i]).collect();
        for t in &mesh.triangles {
            for &a in t {
                for &b in t {
                    if a != b {
                        adj[a].push(b);
                    }
                }
            }
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        let n = 2 * nn;
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for list in &adj {
            for _ in 0..2 {
                for &b in list {
                    col_idx.push(2 * b);
                    col_idx.push(2 * b + 1);
                }
                row_ptr.push(col_idx.len());
            }
        }
        let values = vec![0.0; col_idx.len()];
        CsrMatrix { n, row_ptr, col_idx, values }
    }

    pub fn clear(&mut self) {
        self.values.iter_mut().for_each(|v| *v = 0.0);
    }

    fn position(&self, row: usize, col: usize) -> usize {
        let (lo, hi) = (self.row_ptr[row], self.row_ptr[row + 1]);
        match self.col_idx[lo..hi].binary_search(&col) {
            Ok(k) => lo + k,
            Err(_) => panic!("entry ({row}, {col}) outside sparsity pattern"),
        }
    }

    pub fn add(&mut self, row: usize, col: usize, v: f64) {
        let k = self.position(row, col);
        self.values[k] += v;
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        let (lo, hi) = (self.row_ptr[row], self.row_ptr[row + 1]);
        match self.col_idx[lo..hi].binary_search(&col) {
            Ok(k) => self.values[lo + k],
            Err(_) => 0.0,
        }
    }

    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        for (row, out) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_ptr[row]..self.row_ptr[row + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *out = acc;
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// Symmetric elimination of prescribed dofs: rows and columns of
    /// constrained dofs are replaced by identity, and their coupling is
    /// moved to `rhs`, which receives the prescribed values in those rows.
    pub fn eliminate(&mut self, prescribed: &[Option<f64>], rhs: &mut [f64]) {
        for row in 0..self.n {
            if prescribed[row].is_some() {
                continue;
            }
            for k in self.row_ptr[row]..self.row_ptr[row + 1] {
                if let Some(g) = prescribed[self.col_idx[k]] {
                    rhs[row] -= self.values[k] * g;
                    self.values[k] = 0.0;
                }
            }
        }
        for (row, p) in prescribed.iter().enumerate() {
            if let Some(g) = p {
                for k in self.row_ptr[row]..self.row_ptr[row + 1] {
                    self.values[k] = if self.col_idx[k] == row { 1.0 } else { 0.0 };
                }
                rhs[row] = *g;
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CgStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Solves `A x = b` for symmetric positive-definite `A`, starting from `x`.
/// Converges when `‖b − A x‖ ≤ rel_tol · ‖b‖`.
pub fn conjugate_gradient(
    a: &CsrMatrix,
    b: &[f64],
    x: &mut [f64],
    rel_tol: f64,
    max_iters: usize,
) -> Result<CgStats, FemError> {
    let n = a.n;
    let b_norm = dot(b, b).sqrt();
    if b_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(CgStats { iterations: 0, relative_residual: 0.0 });
    }
    let inv_diag: Vec<f64> = a
        .diagonal()
        .into_iter()
        .map(|d| if d > 0.0 { 1.0 / d } else { f64::NAN })
        .collect();
    if let Some(i) = inv_diag.iter().position(|d| !d.is_finite()) {
        return Err(FemError::Numerical(format!(
            "non-positive diagonal entry at dof {i}; the operator is not positive definite"
        )));
    }
    let mut ax = vec![0.0; n];
    a.mul_vec(x, &mut ax);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(ri, di)| ri * di).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let target = rel_tol * b_norm;
    let mut r_norm = dot(&r, &r).sqrt();
    let mut it = 0;
    while r_norm > target {
        if it >= max_iters {
            return Err(FemError::Numerical(format!(
                "conjugate gradient did not reach relative residual {rel_tol:e} in {max_iters} iterations (at {:e})",
                r_norm / b_norm
            )));
        }
        a.mul_vec(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(FemError::Numerical(format!(
                "conjugate gradient breakdown at iteration {it} (p·Ap = {pap:e}); the operator is singular or indefinite"
            )));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        r_norm = dot(&r, &r).sqrt();
        it += 1;
    }
    // Recurrence residuals drift; confirm against the true residual.
    a.mul_vec(x, &mut ax);
    let true_norm = b.iter().zip(&ax).map(|(bi, ai)| (bi - ai) * (bi - ai)).sum::<f64>().sqrt();
    Ok(CgStats { iterations: it, relative_residual: true_norm / b_norm })
}

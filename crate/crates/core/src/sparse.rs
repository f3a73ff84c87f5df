//! Compressed sparse row matrices and the linear solvers behind the
//! Dirichlet solve: sparse LU with iterative refinement, and a
//! Jacobi-preconditioned BiCGSTAB fallback.

use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    /// Build from per-row entries; duplicate columns within a row are summed.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|e| e.0);
            let mut last: Option<usize> = None;
            for (c, v) in row {
                if last == Some(c) {
                    *vals.last_mut().expect("entry") += v;
                } else {
                    cols.push(c);
                    vals.push(v);
                    last = Some(c);
                }
            }
            row_ptr.push(cols.len());
        }
        CsrMatrix {
            n,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()]
            .iter()
            .copied()
            .zip(self.vals[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|e| e.0 == j).map_or(0.0, |e| e.1)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .into_par_iter()
            .map(|i| self.row(i).map(|(j, v)| v * x[j]).sum())
            .collect()
    }

    /// `b - A x`
    pub fn residual(&self, x: &[f64], b: &[f64]) -> Vec<f64> {
        self.matvec(x)
            .iter()
            .zip(b)
            .map(|(ax, bi)| bi - ax)
            .collect()
    }

    fn to_faer(&self) -> Result<SparseColMat<usize, f64>> {
        let triplets: Vec<Triplet<usize, usize, f64>> = (0..self.n)
            .flat_map(|i| self.row(i).map(move |(j, v)| Triplet::new(i, j, v)))
            .collect();
        SparseColMat::try_new_from_triplets(self.n, self.n, &triplets)
            .map_err(|e| Error::Solve(format!("sparse matrix assembly: {e:?}")))
    }
}

/// Sup norm; infinite if any entry is not finite.
pub fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m: f64, x| {
        if x.is_finite() {
            m.max(x.abs())
        } else {
            f64::INFINITY
        }
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverStats {
    pub method: String,
    pub unknowns: usize,
    pub nonzeros: usize,
    pub iterations: usize,
    pub residual_inf: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            tolerance: 1e-10,
            max_iterations: 2000,
        }
    }
}

/// Solve `A x = b`: sparse LU plus refinement, falling back to BiCGSTAB.
pub fn solve(
    a: &CsrMatrix,
    b: &[f64],
    settings: &SolverSettings,
) -> Result<(Vec<f64>, SolverStats)> {
    match solve_lu(a, b, settings) {
        Ok(r) => Ok(r),
        Err(lu_err) => bicgstab(a, b, settings)
            .map_err(|e| Error::Solve(format!("LU failed ({lu_err}); BiCGSTAB failed ({e})"))),
    }
}

pub fn solve_lu(
    a: &CsrMatrix,
    b: &[f64],
    settings: &SolverSettings,
) -> Result<(Vec<f64>, SolverStats)> {
    let n = a.n();
    let lu = a
        .to_faer()?
        .sp_lu()
        .map_err(|e| Error::Solve(format!("sparse LU: {e:?}")))?;
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut best = f64::INFINITY;
    let mut iterations = 0;
    // refinement stops once the residual no longer shrinks
    for _ in 0..4 {
        let rhs = Mat::from_fn(n, 1, |i, _| r[i]);
        let dx = lu.solve(&rhs);
        let trial: Vec<f64> = (0..n).map(|i| x[i] + dx[(i, 0)]).collect();
        let tr = a.residual(&trial, b);
        let res = inf_norm(&tr);
        if !res.is_finite() {
            return Err(Error::Solve("sparse LU produced non-finite values".into()));
        }
        if res >= best {
            break;
        }
        iterations += 1;
        best = res;
        x = trial;
        r = tr;
        if best < 0.01 * settings.tolerance {
            break;
        }
    }
    if !(best < settings.tolerance) {
        return Err(Error::Solve(format!(
            "residual {best:e} above tolerance {:e} after LU",
            settings.tolerance
        )));
    }
    Ok((
        x,
        SolverStats {
            method: "sparse-lu".into(),
            unknowns: n,
            nonzeros: a.nnz(),
            iterations,
            residual_inf: best,
        },
    ))
}

/// Jacobi-preconditioned BiCGSTAB.
pub fn bicgstab(
    a: &CsrMatrix,
    b: &[f64],
    settings: &SolverSettings,
) -> Result<(Vec<f64>, SolverStats)> {
    let n = a.n();
    let dinv: Vec<f64> = a
        .diagonal()
        .iter()
        .map(|d| if *d != 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let precond = |v: &[f64]| -> Vec<f64> { v.iter().zip(&dinv).map(|(x, d)| x * d).collect() };
    let dot = |u: &[f64], v: &[f64]| -> f64 { u.iter().zip(v).map(|(x, y)| x * y).sum() };

    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let r0 = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    for it in 1..=settings.max_iterations {
        let rho_new = dot(&r0, &r);
        if rho_new == 0.0 {
            return Err(Error::Solve("BiCGSTAB breakdown".into()));
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        let ph = precond(&p);
        v = a.matvec(&ph);
        alpha = rho / dot(&r0, &v);
        let s: Vec<f64> = (0..n).map(|i| r[i] - alpha * v[i]).collect();
        let sh = precond(&s);
        let t = a.matvec(&sh);
        let tt = dot(&t, &t);
        omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
        for i in 0..n {
            x[i] += alpha * ph[i] + omega * sh[i];
            r[i] = s[i] - omega * t[i];
        }
        if inf_norm(&r) < settings.tolerance {
            let res = inf_norm(&a.residual(&x, b));
            if res < settings.tolerance {
                return Ok((
                    x,
                    SolverStats {
                        method: "bicgstab-jacobi".into(),
                        unknowns: n,
                        nonzeros: a.nnz(),
                        iterations: it,
                        residual_inf: res,
                    },
                ));
            }
            r = a.residual(&x, b);
        }
        if omega == 0.0 || !x.iter().all(|v| v.is_finite()) {
            return Err(Error::Solve("BiCGSTAB stagnated".into()));
        }
    }
    Err(Error::Solve(format!(
        "BiCGSTAB did not reach {:e} in {} iterations",
        settings.tolerance, settings.max_iterations
    )))
}

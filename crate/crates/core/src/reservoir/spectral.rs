//! Spectral radius of large sparse matrices.
//!
//! Plain power iteration stalls on real matrices whose dominant eigenvalues
//! form a complex pair or crowd together in modulus, as they do for random
//! reservoirs. This uses thick-restarted Arnoldi: a power-iteration Krylov
//! basis whose Ritz values resolve complex pairs. At each restart the
//! invariant subspace of the leading Ritz values is kept, and iteration stops
//! once the dominant Ritz pair has a small residual and its modulus is stable
//! across restarts.
//!
//! Sparse matrices are first split into the strongly connected components of
//! their sparsity graph. Eigenvalues of the whole matrix are those of the
//! diagonal blocks, acyclic components contribute exact zeros, and the
//! iteration only ever sees irreducible blocks.

use nalgebra::{Complex, DMatrix, DVector};
use rand::Rng;

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;

use super::sparse::CsrMatrix;
use crate::error::{Error, Result};
use crate::rng;

/// A square matrix that can be applied to vectors.
pub trait SquareOperator {
    fn dim(&self) -> usize;
    /// `out = self * x`.
    fn apply(&self, x: &[f64], out: &mut [f64]);
}

impl SquareOperator for CsrMatrix {
    fn dim(&self) -> usize {
        self.n_rows()
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        self.mul_add(x, out);
    }
}

impl SquareOperator for DMatrix<f64> {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        let y = self * DVector::from_column_slice(x);
        out.copy_from_slice(y.as_slice());
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SpectralOptions {
    /// Relative residual tolerance of the dominant Ritz pair.
    pub tol: f64,
    /// Matrix-vector products per attempt before declaring stagnation.
    pub max_matvecs: usize,
    /// Random restarts after stagnation.
    pub restarts: usize,
    pub krylov_dim: usize,
    pub seed: u64,
}

impl Default for SpectralOptions {
    fn default() -> Self {
        Self { tol: 1e-9, max_matvecs: 10_000, restarts: 10, krylov_dim: 60, seed: 0x005e_ed0f_5ec7 }
    }
}

pub fn spectral_radius(w: &CsrMatrix) -> Result<f64> {
    spectral_radius_with(w, &SpectralOptions::default())
}

/// Spectral radius of a sparse matrix, block by block over the strongly
/// connected components of its sparsity pattern.
pub fn spectral_radius_with(w: &CsrMatrix, opts: &SpectralOptions) -> Result<f64> {
    if w.n_rows() != w.n_cols() {
        return Err(Error::shape(format!("spectral radius of a {}x{} matrix", w.n_rows(), w.n_cols())));
    }
    let n = w.n_rows();
    let mut graph = DiGraph::<(), ()>::with_capacity(n, w.nnz());
    let nodes: Vec<_> = (0..n).map(|_| graph.add_node(())).collect();
    let mut self_loop = vec![false; n];
    for (r, c, v) in w.triplets() {
        if v != 0.0 {
            graph.add_edge(nodes[r as usize], nodes[c as usize], ());
            if r == c {
                self_loop[r as usize] = true;
            }
        }
    }
    let mut rho = 0.0f64;
    for component in tarjan_scc(&graph) {
        if component.len() == 1 {
            let i = component[0].index();
            if self_loop[i] {
                let diag = w.triplets().filter(|&(r, c, _)| r as usize == i && c as usize == i);
                rho = rho.max(diag.map(|(_, _, v)| v).sum::<f64>().abs());
            }
            continue;
        }
        let mut index = vec![u32::MAX; n];
        for (k, node) in component.iter().enumerate() {
            index[node.index()] = k as u32;
        }
        let block: Vec<(u32, u32, f64)> = w
            .triplets()
            .filter_map(|(r, c, v)| {
                let (br, bc) = (index[r as usize], index[c as usize]);
                (br != u32::MAX && bc != u32::MAX).then_some((br, bc, v))
            })
            .collect();
        let sub = CsrMatrix::from_triplets(component.len(), component.len(), &block)?;
        rho = rho.max(operator_spectral_radius(&sub, opts)?);
    }
    Ok(rho)
}

/// Spectral radius of any square operator by restarted Arnoldi.
pub fn operator_spectral_radius(op: &dyn SquareOperator, opts: &SpectralOptions) -> Result<f64> {
    let n = op.dim();
    if n == 0 {
        return Ok(0.0);
    }
    for attempt in 0..=opts.restarts {
        let mut r = rng::seeded(rng::derive(opts.seed, attempt as u64));
        let v0: Vec<f64> = (0..n).map(|_| r.random_range(-1.0..1.0)).collect();
        if let Some(rho) = restarted_arnoldi(op, v0, opts) {
            return Ok(rho);
        }
        log::debug!("spectral radius attempt {attempt} stagnated, restarting");
    }
    Err(Error::Numerical {
        step: 0,
        msg: format!(
            "spectral radius did not converge after {} restarts of {} iterations",
            opts.restarts, opts.max_matvecs
        ),
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn restarted_arnoldi(op: &dyn SquareOperator, v0: Vec<f64>, opts: &SpectralOptions) -> Option<f64> {
    let n = op.dim();
    let m = opts.krylov_dim.clamp(1, n);
    let keep_target = (m / 2).max(1);
    let nv = norm(&v0);
    if nv == 0.0 || !nv.is_finite() {
        return None;
    }
    let mut basis: Vec<Vec<f64>> = vec![v0.iter().map(|x| x / nv).collect()];
    // g[(i, j)] = <u_i, A u_j>; row m holds the residual coupling.
    let mut g = DMatrix::<f64>::zeros(m + 1, m);
    let mut filled = 0;
    let mut matvecs = 0;
    let mut previous: Option<f64> = None;
    let mut w = vec![0.0; n];
    loop {
        for j in filled..m {
            op.apply(&basis[j], &mut w);
            matvecs += 1;
            let scale = norm(&w);
            // Two passes of modified Gram-Schmidt against the whole basis.
            for _ in 0..2 {
                for (i, q) in basis.iter().enumerate() {
                    let c = dot(q, &w);
                    g[(i, j)] += c;
                    w.iter_mut().zip(q).for_each(|(a, b)| *a -= c * b);
                }
            }
            let beta = norm(&w);
            g[(j + 1, j)] = beta;
            if j + 1 == n || beta <= 1e-12 * scale.max(f64::MIN_POSITIVE) {
                // Invariant subspace: its eigenvalues are exact.
                let k = j + 1;
                let eigs = g.view((0, 0), (k, k)).into_owned().complex_eigenvalues();
                return Some(eigs.iter().map(|c| c.norm()).fold(0.0, f64::max));
            }
            basis.push(w.iter().map(|x| x / beta).collect());
        }

        let gm = g.view((0, 0), (m, m)).into_owned();
        let eigs = gm.clone().complex_eigenvalues();
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| eigs[b].norm().total_cmp(&eigs[a].norm()));
        let theta = eigs[order[0]];
        let rho = theta.norm();
        let y = ritz_vector(&gm, theta)?;
        let coupling = g[(m, m - 1)];
        let residual = coupling * y[m - 1].norm() / y.norm();
        let floor = rho.max(1e-3 * gm.norm().max(f64::MIN_POSITIVE));
        let stable = previous.is_some_and(|p: f64| (p - rho).abs() <= opts.tol * floor);
        if residual <= opts.tol * floor && stable {
            return Some(rho);
        }
        previous = Some(rho);
        if matvecs >= opts.max_matvecs {
            return None;
        }

        // Thick restart: keep an orthonormal basis Q of the invariant subspace
        // of the leading Ritz values. Conjugate pairs stay together.
        let mut cols: Vec<DVector<f64>> = Vec::new();
        for &i in &order {
            if cols.len() >= keep_target {
                break;
            }
            let t = eigs[i];
            if t.im < 0.0
                && eigs.iter().any(|e| (e.re - t.re).abs() <= 1e-14 * floor && (e.im + t.im).abs() <= 1e-14 * floor)
            {
                continue;
            }
            let yi = ritz_vector(&gm, t)?;
            let re = yi.map(|c| c.re);
            let im = yi.map(|c| c.im);
            if t.im == 0.0 {
                cols.push(if re.norm() >= im.norm() { re } else { im });
            } else {
                cols.push(re);
                cols.push(im);
            }
        }
        let k = cols.len().min(m - 1);
        if k == 0 {
            return None;
        }
        let s = DMatrix::from_columns(&cols[..k]);
        let qr = s.qr();
        let r = qr.r();
        if (0..k).any(|i| r[(i, i)].abs() < 1e-10 * r.amax()) {
            return None;
        }
        let q = qr.q();
        let mut next: Vec<Vec<f64>> = (0..k)
            .map(|c| {
                let mut v = vec![0.0; n];
                for (u, &coef) in basis.iter().zip(q.column(c).iter()) {
                    v.iter_mut().zip(u).for_each(|(a, b)| *a += coef * b);
                }
                v
            })
            .collect();
        next.push(basis.pop().expect("basis holds m + 1 vectors"));
        // A (V Q) = (V Q)(Q^T G Q) + coupling * u_{m+1} * (last row of Q).
        let projected = q.transpose() * &gm * &q;
        g.fill(0.0);
        g.view_mut((0, 0), (k, k)).copy_from(&projected);
        for j in 0..k {
            g[(k, j)] = coupling * q[(m - 1, j)];
        }
        basis = next;
        filled = k;
    }
}

/// Eigenvector of `h` for eigenvalue `theta` by shifted inverse iteration.
fn ritz_vector(h: &DMatrix<f64>, theta: Complex<f64>) -> Option<DVector<Complex<f64>>> {
    let k = h.nrows();
    let hc = h.map(|v| Complex::new(v, 0.0));
    let shift_mag = 1e-10 * theta.norm().max(h.norm()).max(1e-300);
    for attempt in 0..4 {
        let shift = theta + Complex::new(shift_mag * 10f64.powi(attempt), 0.0);
        let mut a = hc.clone();
        for i in 0..k {
            a[(i, i)] -= shift;
        }
        let lu = a.lu();
        let mut y = DVector::from_element(k, Complex::new(1.0, 0.0));
        let mut ok = true;
        for _ in 0..3 {
            match lu.solve(&y) {
                Some(next) if next.iter().all(|c| c.re.is_finite() && c.im.is_finite()) => {
                    let nn = next.norm();
                    if nn == 0.0 {
                        ok = false;
                        break;
                    }
                    y = next.unscale(nn);
                }
                _ => {
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            return Some(y);
        }
    }
    None
}

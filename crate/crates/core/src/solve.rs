//! Linear solvers: Jacobi-preconditioned CG, the Schur-complement KKT solver,
//! a banded Cholesky factorization, and the nodal tangent-space solver used by
//! the flows.
//!
//! Saddle-point systems are written as
//!
//! ```text
//!     A x + Bᵀ λ = f
//!     B x        = g
//! ```

use crate::error::SolveError;
use crate::fem::{FeSpace, SymmetricSparseOperator};

/// Anchor norm below which a vertex carries no tangency row.
pub const DEGENERACY_THRESHOLD: f64 = 1e-8;

/// Square sparse matrix in compressed row layout.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds an `n × n` matrix from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self, SolveError> {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &(i, j, v) in triplets {
            if i >= n || j >= n {
                return Err(SolveError::Dimension(format!(
                    "triplet ({i}, {j}) outside {n}×{n}"
                )));
            }
            rows[i].push((j, v));
        }
        let mut row_ptr = vec![0];
        let mut cols = Vec::new();
        let mut values = Vec::new();
        for mut row in rows {
            row.sort_by_key(|e| e.0);
            for (j, v) in row {
                if cols.len() > *row_ptr.last().unwrap() && *cols.last().unwrap() == j {
                    *values.last_mut().unwrap() += v;
                } else {
                    cols.push(j);
                    values.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        Ok(Self {
            n,
            row_ptr,
            cols,
            values,
        })
    }

    pub fn from_dense(a: &[Vec<f64>]) -> Result<Self, SolveError> {
        let n = a.len();
        let mut t = Vec::new();
        for (i, row) in a.iter().enumerate() {
            if row.len() != n {
                return Err(SolveError::Dimension(format!("row {i} has length {}", row.len())));
            }
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    t.push((i, j, v));
                }
            }
        }
        Self::from_triplets(n, &t)
    }

    pub fn identity(n: usize) -> Self {
        let t: Vec<_> = (0..n).map(|i| (i, i, 1.0)).collect();
        Self::from_triplets(n, &t).expect("indices in range")
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.n {
            let mut acc = 0.0;
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.values[p] * x[self.cols[p]];
            }
            y[i] = acc;
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.apply_into(x, &mut y);
        y
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                (self.row_ptr[i]..self.row_ptr[i + 1])
                    .find(|&p| self.cols[p] == i)
                    .map_or(0.0, |p| self.values[p])
            })
            .collect()
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| {
            (self.row_ptr[i]..self.row_ptr[i + 1]).all(|p| {
                let j = self.cols[p];
                let back = (self.row_ptr[j]..self.row_ptr[j + 1])
                    .find(|&q| self.cols[q] == i)
                    .map_or(0.0, |q| self.values[q]);
                back == self.values[p]
            })
        })
    }
}

/// Sparse row `Σ values[i] · x[indices[i]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseRow {
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseRow {
    pub fn new(indices: Vec<usize>, values: Vec<f64>) -> Self {
        assert_eq!(indices.len(), values.len());
        Self { indices, values }
    }

    pub fn dot(&self, x: &[f64]) -> f64 {
        self.indices.iter().zip(&self.values).map(|(&i, v)| v * x[i]).sum()
    }

    /// `y += c · rowᵀ`.
    pub fn axpy_transpose(&self, c: f64, y: &mut [f64]) {
        for (&i, v) in self.indices.iter().zip(&self.values) {
            y[i] += c * v;
        }
    }
}

/// Symmetric saddle-point system with an SPD primal block.
#[derive(Debug, Clone)]
pub struct KktSystem {
    pub primal: CsrMatrix,
    pub constraints: Vec<SparseRow>,
    pub rhs_primal: Vec<f64>,
    pub rhs_constraint: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KktSolution {
    pub primal: Vec<f64>,
    pub multipliers: Vec<f64>,
    /// Relative residual of the full system.
    pub residual: f64,
    pub outer_iterations: usize,
}

impl KktSystem {
    fn check(&self) -> Result<(), SolveError> {
        let n = self.primal.dim();
        if self.rhs_primal.len() != n {
            return Err(SolveError::Dimension(format!(
                "primal rhs has length {}, expected {n}",
                self.rhs_primal.len()
            )));
        }
        if self.rhs_constraint.len() != self.constraints.len() {
            return Err(SolveError::Dimension(format!(
                "{} constraint rows but {} constraint rhs entries",
                self.constraints.len(),
                self.rhs_constraint.len()
            )));
        }
        if let Some(&i) = self
            .constraints
            .iter()
            .flat_map(|r| r.indices.iter())
            .find(|&&i| i >= n)
        {
            return Err(SolveError::Dimension(format!("constraint column {i} ≥ {n}")));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.primal.dim() + self.constraints.len()
    }

    fn apply_bt(&self, lambda: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.primal.dim()];
        for (row, l) in self.constraints.iter().zip(lambda) {
            row.axpy_transpose(*l, &mut y);
        }
        y
    }

    fn apply_b(&self, x: &[f64]) -> Vec<f64> {
        self.constraints.iter().map(|r| r.dot(x)).collect()
    }

    /// Residual blocks `(f - A x - Bᵀλ, g - B x)`.
    pub fn residual_blocks(&self, x: &[f64], lambda: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let ax = self.primal.apply(x);
        let btl = self.apply_bt(lambda);
        let r1 = self
            .rhs_primal
            .iter()
            .zip(ax.iter().zip(&btl))
            .map(|(f, (a, b))| f - a - b)
            .collect();
        let bx = self.apply_b(x);
        let r2 = self
            .rhs_constraint
            .iter()
            .zip(&bx)
            .map(|(g, b)| g - b)
            .collect();
        (r1, r2)
    }

    /// `‖residual‖ / ‖rhs‖` (absolute when the right-hand side vanishes).
    pub fn relative_residual(&self, x: &[f64], lambda: &[f64]) -> f64 {
        let (r1, r2) = self.residual_blocks(x, lambda);
        let rn = (norm2_sq(&r1) + norm2_sq(&r2)).sqrt();
        let bn = (norm2_sq(&self.rhs_primal) + norm2_sq(&self.rhs_constraint)).sqrt();
        if bn > 0.0 {
            rn / bn
        } else {
            rn
        }
    }
}

fn norm2_sq(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// Jacobi-preconditioned conjugate gradients for an SPD matrix.
///
/// Stops when `‖b - A x‖ ≤ tol · ‖b‖`; returns the iteration count.
pub fn pcg(
    a: &CsrMatrix,
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
) -> Result<usize, SolveError> {
    let n = a.dim();
    if b.len() != n || x.len() != n {
        return Err(SolveError::Dimension(format!(
            "pcg on {n}×{n} with rhs {} and guess {}",
            b.len(),
            x.len()
        )));
    }
    let bn = norm2_sq(b).sqrt();
    if bn == 0.0 {
        x.fill(0.0);
        return Ok(0);
    }
    let inv_diag: Vec<f64> = a
        .diagonal()
        .iter()
        .map(|d| if *d > 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let mut r: Vec<f64> = b.iter().zip(a.apply(x)).map(|(bi, ai)| bi - ai).collect();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(a, b)| a * b).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for it in 0..=max_iter {
        let rn = norm2_sq(&r).sqrt();
        if rn <= tol * bn {
            return Ok(it);
        }
        if it == max_iter {
            return Err(SolveError::NoConvergence {
                method: "pcg",
                iterations: it,
                residual: rn / bn,
            });
        }
        a.apply_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 || !pap.is_finite() {
            return Err(SolveError::Breakdown {
                method: "pcg",
                iteration: it,
            });
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
    }
    unreachable!("loop returns")
}

/// Inner tolerance for the SPD solves inside the Schur iteration.
const INNER_TOL: f64 = 1e-14;

fn inner_solve(a: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>, SolveError> {
    let mut x = vec![0.0; a.dim()];
    match pcg(a, b, &mut x, INNER_TOL, 10 * a.dim().max(1)) {
        Ok(_) => Ok(x),
        // the inner target sits near rounding level; accept a stalled but small residual
        Err(SolveError::NoConvergence { residual, .. }) if residual < 1e-12 => Ok(x),
        Err(e) => Err(e),
    }
}

/// One Schur-complement pass: returns `(x, λ, outer iterations)`.
fn schur_pass(
    sys: &KktSystem,
    f: &[f64],
    g: &[f64],
    tol: f64,
    cap: usize,
) -> Result<(Vec<f64>, Vec<f64>, usize), SolveError> {
    let a = &sys.primal;
    let mcount = sys.constraints.len();
    let ainv_f = inner_solve(a, f)?;
    if mcount == 0 {
        return Ok((ainv_f, Vec::new(), 0));
    }
    // S λ = B A⁻¹ f - g
    let rhs: Vec<f64> = sys
        .apply_b(&ainv_f)
        .iter()
        .zip(g)
        .map(|(a, b)| a - b)
        .collect();
    let schur = |l: &[f64]| -> Result<Vec<f64>, SolveError> {
        Ok(sys.apply_b(&inner_solve(a, &sys.apply_bt(l))?))
    };
    let mut lambda = vec![0.0; mcount];
    let bn = norm2_sq(&rhs).sqrt();
    let mut iterations = 0;
    if bn > 0.0 {
        let mut r = rhs.clone();
        let mut p = r.clone();
        let mut rr = norm2_sq(&r);
        loop {
            if rr.sqrt() <= tol * bn {
                break;
            }
            if iterations >= cap {
                return Err(SolveError::NoConvergence {
                    method: "schur-cg",
                    iterations,
                    residual: rr.sqrt() / bn,
                });
            }
            let sp = schur(&p)?;
            let psp = dot(&p, &sp);
            if psp <= 0.0 || !psp.is_finite() {
                return Err(SolveError::Breakdown {
                    method: "schur-cg",
                    iteration: iterations,
                });
            }
            let alpha = rr / psp;
            for i in 0..mcount {
                lambda[i] += alpha * p[i];
                r[i] -= alpha * sp[i];
            }
            let rr_new = norm2_sq(&r);
            let beta = rr_new / rr;
            rr = rr_new;
            for i in 0..mcount {
                p[i] = r[i] + beta * p[i];
            }
            iterations += 1;
        }
    }
    let btl = sys.apply_bt(&lambda);
    let reduced: Vec<f64> = f.iter().zip(&btl).map(|(a, b)| a - b).collect();
    let x = inner_solve(a, &reduced)?;
    Ok((x, lambda, iterations))
}

/// Solves a KKT system by eliminating the multipliers through the Schur
/// complement `B A⁻¹ Bᵀ`, with iterative refinement on the full residual.
///
/// The outer iteration is capped at `10 · dim` per pass.
pub fn solve_kkt(system: &KktSystem, tol: f64) -> Result<KktSolution, SolveError> {
    if !(tol > 0.0) {
        return Err(SolveError::BadTolerance(tol));
    }
    system.check()?;
    let cap = 10 * system.dim().max(1);
    let outer_tol = (0.1 * tol).max(1e-15);
    let (mut x, mut lambda, mut its) =
        schur_pass(system, &system.rhs_primal, &system.rhs_constraint, outer_tol, cap)?;
    let mut res = system.relative_residual(&x, &lambda);
    for _ in 0..4 {
        if res <= tol {
            break;
        }
        let (r1, r2) = system.residual_blocks(&x, &lambda);
        let (dx, dl, k) = schur_pass(system, &r1, &r2, outer_tol, cap)?;
        x.iter_mut().zip(&dx).for_each(|(a, b)| *a += b);
        lambda.iter_mut().zip(&dl).for_each(|(a, b)| *a += b);
        its += k;
        let new_res = system.relative_residual(&x, &lambda);
        if new_res >= res {
            res = new_res;
            break;
        }
        res = new_res;
    }
    if res > tol {
        return Err(SolveError::NoConvergence {
            method: "kkt",
            iterations: its,
            residual: res,
        });
    }
    Ok(KktSolution {
        primal: x,
        multipliers: lambda,
        residual: res,
        outer_iterations: its,
    })
}

/// Dot product with four independent accumulators so the loop vectorizes.
#[inline]
fn dot_unrolled(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let tail: f64 = ra.iter().zip(rb).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Cholesky factorization `A = L Lᵀ` of a symmetric positive-definite band matrix.
///
/// Row `i` of `L` stores columns `i - bandwidth ..= i`.
#[derive(Debug, Clone)]
pub struct BandedCholesky {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl BandedCholesky {
    /// Empty lower band of half-bandwidth `bandwidth` to be filled with [`add`](Self::add).
    pub fn zeros(n: usize, bandwidth: usize) -> Self {
        Self {
            n,
            bw: bandwidth,
            data: vec![0.0; n * (bandwidth + 1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        i * (self.bw + 1) + (j + self.bw - i)
    }

    /// Adds `v` to entry `(i, j)` of the lower triangle (`j ≤ i`).
    pub fn add(&mut self, i: usize, j: usize, v: f64) -> Result<(), SolveError> {
        if j > i || i - j > self.bw || i >= self.n {
            return Err(SolveError::Dimension(format!(
                "entry ({i}, {j}) outside lower band of width {}",
                self.bw
            )));
        }
        let k = self.idx(i, j);
        self.data[k] += v;
        Ok(())
    }

    /// Factorizes in place.
    pub fn factorize(mut self) -> Result<Self, SolveError> {
        let bw = self.bw;
        let w = bw + 1;
        for i in 0..self.n {
            let lo_i = i.saturating_sub(bw);
            for j in lo_i..=i {
                let lo = lo_i.max(j.saturating_sub(bw));
                let mut s = self.data[self.idx(i, j)];
                if lo < j {
                    let ri = i * w + (lo + bw - i);
                    let rj = j * w + (lo + bw - j);
                    let len = j - lo;
                    let (a, b) = (&self.data[ri..ri + len], &self.data[rj..rj + len]);
                    s -= dot_unrolled(a, b);
                }
                let k = self.idx(i, j);
                if j == i {
                    if !(s > 0.0) {
                        return Err(SolveError::NotPositiveDefinite { pivot: i, value: s });
                    }
                    self.data[k] = s.sqrt();
                } else {
                    self.data[k] = s / self.data[self.idx(j, j)];
                }
            }
        }
        Ok(self)
    }

    /// Solves `L Lᵀ x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let bw = self.bw;
        for i in 0..self.n {
            let lo = i.saturating_sub(bw);
            let mut s = b[i];
            for j in lo..i {
                s -= self.data[self.idx(i, j)] * b[j];
            }
            b[i] = s / self.data[self.idx(i, i)];
        }
        for i in (0..self.n).rev() {
            b[i] /= self.data[self.idx(i, i)];
            let bi = b[i];
            let lo = i.saturating_sub(bw);
            for j in lo..i {
                b[j] -= self.data[self.idx(i, j)] * bi;
            }
        }
    }
}

/// Result of a tangent-space solve on the free vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentSolution {
    /// Full coefficient vector; zero on Dirichlet vertices.
    pub velocity: Vec<f64>,
    /// One multiplier per free vertex (zero at degenerate vertices).
    pub multipliers: Vec<f64>,
    /// Free vertices whose anchor was below [`DEGENERACY_THRESHOLD`].
    pub degenerate: Vec<usize>,
    /// `max_z |û(z)·v(z)|` over constrained vertices.
    pub tangency: f64,
    /// Relative residual of the reduced system after refinement.
    pub residual: f64,
}

/// Orthonormal basis of `a^⊥ ⊂ ℝ^m` from a Householder reflection, stored as
/// `m` rows of length `m - 1`.
fn householder_complement(a: &[f64]) -> Vec<f64> {
    let m = a.len();
    let norm = norm2_sq(a).sqrt();
    let mut v: Vec<f64> = a.iter().map(|x| x / norm).collect();
    let sgn = if v[0] >= 0.0 { 1.0 } else { -1.0 };
    v[0] += sgn;
    let vv = norm2_sq(&v);
    let mut basis = vec![0.0; m * (m - 1)];
    for r in 0..m {
        for c in 1..m {
            let id = if r == c { 1.0 } else { 0.0 };
            basis[r * (m - 1) + (c - 1)] = id - 2.0 * v[r] * v[c] / vv;
        }
    }
    basis
}

/// Minimizes over velocities that vanish on the Dirichlet boundary and are
/// nodally orthogonal to `anchor` at every non-degenerate free vertex.
///
/// Solves `(op ⊗ I) v + Bᵀλ = rhs`, `B v = 0` by eliminating the constraint
/// with per-vertex orthonormal tangent bases; the reduced SPD system is banded
/// and is factorized directly, then refined.
pub fn solve_tangent(
    space: &FeSpace,
    op: &SymmetricSparseOperator,
    anchor: &[f64],
    rhs: &[f64],
) -> Result<TangentSolution, SolveError> {
    let m = space.components();
    let nd = space.n_dofs();
    if op.dim() != nd || anchor.len() != nd || rhs.len() != nd {
        return Err(SolveError::Dimension(format!(
            "tangent solve expects {nd} dofs (operator {}, anchor {}, rhs {})",
            op.dim(),
            anchor.len(),
            rhs.len()
        )));
    }
    let free = space.free_vertices();
    let nf = free.len();
    // per free vertex: reduced size, offset, basis (m × r, row-major)
    let mut sizes = Vec::with_capacity(nf);
    let mut offsets = Vec::with_capacity(nf + 1);
    let mut bases: Vec<Vec<f64>> = Vec::with_capacity(nf);
    let mut degenerate = Vec::new();
    offsets.push(0);
    for &z in free {
        let a = space.node(anchor, z);
        if norm2_sq(a).sqrt() < DEGENERACY_THRESHOLD {
            degenerate.push(z);
            let mut id = vec![0.0; m * m];
            for c in 0..m {
                id[c * m + c] = 1.0;
            }
            bases.push(id);
            sizes.push(m);
        } else {
            bases.push(householder_complement(a));
            sizes.push(m - 1);
        }
        offsets.push(offsets.last().unwrap() + sizes.last().unwrap());
    }
    let nr = *offsets.last().unwrap();
    let pattern = op.pattern();
    let vals = op.scalar_values();

    let mut bw = 0;
    for (fi, &z) in free.iter().enumerate() {
        for &w in pattern.row(z) {
            if let Some(fj) = space.free_index(w) {
                if fj <= fi {
                    bw = bw.max(offsets[fi + 1] - 1 - offsets[fj]);
                }
            }
        }
    }

    let mut band = BandedCholesky::zeros(nr, bw);
    for (fi, &z) in free.iter().enumerate() {
        let (tz, rz) = (&bases[fi], sizes[fi]);
        for (p, &w) in pattern.row_range(z).zip(pattern.row(z)) {
            let Some(fj) = space.free_index(w) else { continue };
            if fj > fi {
                continue;
            }
            let (tw, rw) = (&bases[fj], sizes[fj]);
            let s = vals[p];
            for a in 0..rz {
                for b in 0..rw {
                    let (i, j) = (offsets[fi] + a, offsets[fj] + b);
                    if j > i {
                        continue;
                    }
                    let mut t = 0.0;
                    for c in 0..m {
                        t += tz[c * rz + a] * tw[c * rw + b];
                    }
                    band.add(i, j, s * t)?;
                }
            }
        }
    }
    let chol = band.factorize()?;

    let lift = |y: &[f64]| -> Vec<f64> {
        let mut v = vec![0.0; nd];
        for (fi, &z) in free.iter().enumerate() {
            let (t, r) = (&bases[fi], sizes[fi]);
            for c in 0..m {
                let mut acc = 0.0;
                for a in 0..r {
                    acc += t[c * r + a] * y[offsets[fi] + a];
                }
                v[z * m + c] = acc;
            }
        }
        v
    };
    let restrict = |full: &[f64]| -> Vec<f64> {
        let mut y = vec![0.0; nr];
        for (fi, &z) in free.iter().enumerate() {
            let (t, r) = (&bases[fi], sizes[fi]);
            for a in 0..r {
                let mut acc = 0.0;
                for c in 0..m {
                    acc += t[c * r + a] * full[z * m + c];
                }
                y[offsets[fi] + a] = acc;
            }
        }
        y
    };
    // operator on velocities supported on free vertices
    let apply = |v: &[f64]| -> Vec<f64> { op.apply(v) };

    let b = restrict(rhs);
    let bn = norm2_sq(&b).sqrt();
    let mut y = b.clone();
    chol.solve_in_place(&mut y);
    let mut residual = 0.0;
    for _ in 0..3 {
        let r: Vec<f64> = b
            .iter()
            .zip(restrict(&apply(&lift(&y))))
            .map(|(bi, ai)| bi - ai)
            .collect();
        residual = if bn > 0.0 { norm2_sq(&r).sqrt() / bn } else { norm2_sq(&r).sqrt() };
        if residual < 1e-15 {
            break;
        }
        let mut d = r;
        chol.solve_in_place(&mut d);
        y.iter_mut().zip(&d).for_each(|(a, b)| *a += b);
    }
    let velocity = lift(&y);
    let av = apply(&velocity);
    let mut multipliers = vec![0.0; nf];
    let mut tangency = 0.0f64;
    for (fi, &z) in free.iter().enumerate() {
        if sizes[fi] == m {
            continue;
        }
        let a = space.node(anchor, z);
        let v = space.node(&velocity, z);
        tangency = tangency.max(dot(a, v).abs());
        let r: f64 = (0..m).map(|c| a[c] * (rhs[z * m + c] - av[z * m + c])).sum();
        multipliers[fi] = r / norm2_sq(a);
    }
    Ok(TangentSolution {
        velocity,
        multipliers,
        degenerate,
        tangency,
        residual,
    })
}

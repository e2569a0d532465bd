//! Pointwise unit-length constraint `|u(z)|² = 1` imposed at the vertices.

use crate::fem::{FeSpace, SymmetricSparseOperator};
use crate::solve::{CsrMatrix, KktSystem, SparseRow, DEGENERACY_THRESHOLD};

/// `|u(z)|² - 1` at every vertex.
pub fn violation_field(space: &FeSpace, u: &[f64]) -> Vec<f64> {
    assert_eq!(u.len(), space.n_dofs());
    (0..space.n_vertices())
        .map(|z| space.node(u, z).iter().map(|c| c * c).sum::<f64>() - 1.0)
        .collect()
}

/// Linearized constraint `û(z)·v(z) = 0` at the free vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct NodalConstraint {
    anchor: Vec<f64>,
    active: Vec<usize>,
    degenerate: Vec<usize>,
    rows: Vec<SparseRow>,
}

impl NodalConstraint {
    pub fn anchor(&self) -> &[f64] {
        &self.anchor
    }

    /// Free vertices carrying a row.
    pub fn active_nodes(&self) -> &[usize] {
        &self.active
    }

    /// Free vertices with `|û(z)| < ε_deg`; they carry no row.
    pub fn degenerate_nodes(&self) -> &[usize] {
        &self.degenerate
    }

    /// Rows in global dof numbering, aligned with [`active_nodes`](Self::active_nodes).
    pub fn rows(&self) -> &[SparseRow] {
        &self.rows
    }

    /// `max_z |û(z)·v(z)|` over the active vertices.
    pub fn max_tangency(&self, v: &[f64]) -> f64 {
        self.rows
            .iter()
            .map(|r| r.dot(v).abs())
            .fold(0.0, f64::max)
    }

    /// Assembles the saddle-point system for `(op ⊗ I) v + Bᵀλ = rhs`, `B v = 0`
    /// on the free dofs (Dirichlet dofs removed).
    pub fn kkt_system(
        &self,
        space: &FeSpace,
        op: &SymmetricSparseOperator,
        rhs: &[f64],
    ) -> KktSystem {
        let m = space.components();
        let free = space.free_vertices();
        let local = |dof: usize| space.free_index(dof / m).map(|f| f * m + dof % m);
        let mut triplets = Vec::new();
        for (fi, &z) in free.iter().enumerate() {
            for (p, &w) in op.pattern().row_range(z).zip(op.pattern().row(z)) {
                if let Some(fj) = space.free_index(w) {
                    let s = op.scalar_values()[p];
                    for c in 0..m {
                        triplets.push((fi * m + c, fj * m + c, s));
                    }
                }
            }
        }
        let primal = CsrMatrix::from_triplets(free.len() * m, &triplets)
            .expect("free indices are in range");
        let constraints = self
            .rows
            .iter()
            .map(|r| {
                SparseRow::new(
                    r.indices.iter().map(|&d| local(d).expect("row on a free vertex")).collect(),
                    r.values.clone(),
                )
            })
            .collect();
        let rhs_primal = space.free_dofs().iter().map(|&d| rhs[d]).collect();
        KktSystem {
            primal,
            constraints,
            rhs_primal,
            rhs_constraint: vec![0.0; self.rows.len()],
        }
    }
}

/// One row per non-degenerate free vertex with the anchor's nodal value as coefficients.
pub fn build_constraint_rows(space: &FeSpace, anchor: &[f64]) -> NodalConstraint {
    assert_eq!(anchor.len(), space.n_dofs());
    let m = space.components();
    let mut active = Vec::new();
    let mut degenerate = Vec::new();
    let mut rows = Vec::new();
    for &z in space.free_vertices() {
        let a = space.node(anchor, z);
        if a.iter().map(|c| c * c).sum::<f64>().sqrt() < DEGENERACY_THRESHOLD {
            degenerate.push(z);
        } else {
            active.push(z);
            rows.push(SparseRow::new((z * m..(z + 1) * m).collect(), a.to_vec()));
        }
    }
    NodalConstraint {
        anchor: anchor.to_vec(),
        active,
        degenerate,
        rows,
    }
}

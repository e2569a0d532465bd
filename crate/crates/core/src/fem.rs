//! Piecewise-linear vector finite elements on the square `(-1/2, 1/2)²`.

use std::io::{self, Write};

use crate::error::FemError;

/// Uniform right-angled triangulation of `(-1/2, 1/2)²`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    n: usize,
    vertices: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    boundary: Vec<bool>,
}

impl Mesh {
    /// `n × n` square cells, each split along the diagonal from its lower-left
    /// to its upper-right corner.
    pub fn uniform(n: usize) -> Result<Self, FemError> {
        if n == 0 {
            return Err(FemError::EmptyMesh);
        }
        let h = 1.0 / n as f64;
        let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
        let mut boundary = Vec::with_capacity((n + 1) * (n + 1));
        for j in 0..=n {
            for i in 0..=n {
                vertices.push([-0.5 + i as f64 * h, -0.5 + j as f64 * h]);
                boundary.push(i == 0 || j == 0 || i == n || j == n);
            }
        }
        let id = |i: usize, j: usize| j * (n + 1) + i;
        let mut triangles = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                let (v00, v10, v01, v11) = (id(i, j), id(i + 1, j), id(i, j + 1), id(i + 1, j + 1));
                triangles.push([v00, v10, v11]);
                triangles.push([v00, v11, v01]);
            }
        }
        Ok(Self {
            n,
            vertices,
            triangles,
            boundary,
        })
    }

    pub fn subdivisions(&self) -> usize {
        self.n
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_mask(&self) -> &[bool] {
        &self.boundary
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    /// Signed area of triangle `t` (positive for counter-clockwise ordering).
    pub fn signed_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        let (pa, pb, pc) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        0.5 * ((pb[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (pb[1] - pa[1]))
    }

    /// Gradients of the three barycentric coordinates on triangle `t`.
    fn barycentric_gradients(&self, t: usize) -> [[f64; 2]; 3] {
        let [a, b, c] = self.triangles[t];
        let p = [self.vertices[a], self.vertices[b], self.vertices[c]];
        let two_area = 2.0 * self.signed_area(t);
        let mut g = [[0.0; 2]; 3];
        for (k, gk) in g.iter_mut().enumerate() {
            let q = p[(k + 1) % 3];
            let r = p[(k + 2) % 3];
            *gk = [(q[1] - r[1]) / two_area, (r[0] - q[0]) / two_area];
        }
        g
    }

    /// Plain-text listing: `v <index> <x> <y> <boundary>` then `t <index> <a> <b> <c>`.
    pub fn write_listing<W: Write>(&self, mut out: W) -> io::Result<()> {
        for (i, (p, b)) in self.vertices.iter().zip(&self.boundary).enumerate() {
            writeln!(out, "v {i} {:.17e} {:.17e} {}", p[0], p[1], u8::from(*b))?;
        }
        for (i, t) in self.triangles.iter().enumerate() {
            writeln!(out, "t {i} {} {} {}", t[0], t[1], t[2])?;
        }
        Ok(())
    }
}

/// Vector-valued P1 space with `m` components and Dirichlet data on the whole boundary.
///
/// Coefficients are stored node-major: the value of component `c` at vertex
/// `z` lives at index `z * m + c`.
#[derive(Debug, Clone)]
pub struct FeSpace {
    mesh: Mesh,
    components: usize,
    free_vertices: Vec<usize>,
    free_index: Vec<Option<usize>>,
    lumped: Vec<f64>,
    pattern: SparsityPattern,
}

impl FeSpace {
    pub fn new(mesh: Mesh, components: usize) -> Self {
        let mut free_vertices = Vec::new();
        let mut free_index = vec![None; mesh.n_vertices()];
        for (z, &b) in mesh.boundary_mask().iter().enumerate() {
            if !b {
                free_index[z] = Some(free_vertices.len());
                free_vertices.push(z);
            }
        }
        let mut lumped = vec![0.0; mesh.n_vertices()];
        for (t, tri) in mesh.triangles().iter().enumerate() {
            let w = mesh.signed_area(t) / 3.0;
            for &v in tri {
                lumped[v] += w;
            }
        }
        let pattern = SparsityPattern::from_mesh(&mesh);
        Self {
            mesh,
            components,
            free_vertices,
            free_index,
            lumped,
            pattern,
        }
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn n_vertices(&self) -> usize {
        self.mesh.n_vertices()
    }

    pub fn n_dofs(&self) -> usize {
        self.components * self.mesh.n_vertices()
    }

    pub fn n_free_dofs(&self) -> usize {
        self.components * self.free_vertices.len()
    }

    /// Vertices not on the Dirichlet boundary, in increasing order.
    pub fn free_vertices(&self) -> &[usize] {
        &self.free_vertices
    }

    /// Position of `vertex` in [`free_vertices`](Self::free_vertices).
    pub fn free_index(&self, vertex: usize) -> Option<usize> {
        self.free_index[vertex]
    }

    pub fn is_free(&self, vertex: usize) -> bool {
        self.free_index[vertex].is_some()
    }

    /// Global dof indices of the free dofs, ordered by free vertex then component.
    pub fn free_dofs(&self) -> Vec<usize> {
        let m = self.components;
        self.free_vertices
            .iter()
            .flat_map(|&z| (0..m).map(move |c| z * m + c))
            .collect()
    }

    /// Lumped scalar mass: one third of the area of every adjacent triangle.
    pub fn lumped_weights(&self) -> &[f64] {
        &self.lumped
    }

    pub fn pattern(&self) -> &SparsityPattern {
        &self.pattern
    }

    /// Nodal value of `u` at `vertex`.
    pub fn node<'a>(&self, u: &'a [f64], vertex: usize) -> &'a [f64] {
        let m = self.components;
        &u[vertex * m..(vertex + 1) * m]
    }
}

/// Vertex adjacency of a mesh in compressed row layout (diagonal included).
#[derive(Debug, Clone, PartialEq)]
pub struct SparsityPattern {
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
}

impl SparsityPattern {
    fn from_mesh(mesh: &Mesh) -> Self {
        let nv = mesh.n_vertices();
        let mut adj: Vec<Vec<usize>> = (0..nv).map(|v| vec![v]).collect();
        for tri in mesh.triangles() {
            for &a in tri {
                for &b in tri {
                    adj[a].push(b);
                }
            }
        }
        let mut row_ptr = Vec::with_capacity(nv + 1);
        let mut cols = Vec::new();
        row_ptr.push(0);
        for mut row in adj {
            row.sort_unstable();
            row.dedup();
            cols.extend(row);
            row_ptr.push(cols.len());
        }
        Self { row_ptr, cols }
    }

    pub fn n_rows(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    pub fn row(&self, i: usize) -> &[usize] {
        &self.cols[self.row_ptr[i]..self.row_ptr[i + 1]]
    }

    pub fn row_range(&self, i: usize) -> std::ops::Range<usize> {
        self.row_ptr[i]..self.row_ptr[i + 1]
    }

    /// Storage position of entry `(i, j)`.
    pub fn position(&self, i: usize, j: usize) -> Option<usize> {
        let r = self.row_range(i);
        self.cols[r.clone()]
            .binary_search(&j)
            .ok()
            .map(|p| r.start + p)
    }
}

/// Symmetric bilinear form on vector-valued P1 coefficients.
///
/// A scalar vertex matrix `S` is stored once and acts identically on each of
/// the `m` components, so the full operator is `S ⊗ I_m` in node-major layout.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricSparseOperator {
    pattern: SparsityPattern,
    values: Vec<f64>,
    components: usize,
}

impl SymmetricSparseOperator {
    fn zeros(space: &FeSpace) -> Self {
        Self {
            pattern: space.pattern.clone(),
            values: vec![0.0; space.pattern.nnz()],
            components: space.components,
        }
    }

    fn add_local(&mut self, tri: &[usize; 3], local: &[[f64; 3]; 3]) {
        for (a, &va) in tri.iter().enumerate() {
            for (b, &vb) in tri.iter().enumerate() {
                let p = self.pattern.position(va, vb).expect("entry in mesh pattern");
                self.values[p] += local[a][b];
            }
        }
    }

    /// Dimension of the full vector-valued operator.
    pub fn dim(&self) -> usize {
        self.components * self.pattern.n_rows()
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn pattern(&self) -> &SparsityPattern {
        &self.pattern
    }

    /// Scalar vertex-matrix values aligned with [`pattern`](Self::pattern).
    pub fn scalar_values(&self) -> &[f64] {
        &self.values
    }

    /// Scalar entry `S_ij` (zero outside the pattern).
    pub fn scalar_entry(&self, i: usize, j: usize) -> f64 {
        self.pattern
            .position(i, j)
            .map_or(0.0, |p| self.values[p])
    }

    /// `y = (S ⊗ I) x`.
    pub fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        let m = self.components;
        assert_eq!(x.len(), self.dim());
        assert_eq!(y.len(), self.dim());
        for i in 0..self.pattern.n_rows() {
            let yi = &mut y[i * m..(i + 1) * m];
            yi.fill(0.0);
            for p in self.pattern.row_range(i) {
                let j = self.pattern.cols[p];
                let s = self.values[p];
                let xj = &x[j * m..(j + 1) * m];
                for c in 0..m {
                    yi[c] += s * xj[c];
                }
            }
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; x.len()];
        self.apply_into(x, &mut y);
        y
    }

    /// Bilinear form `uᵀ (S ⊗ I) v`.
    pub fn form(&self, u: &[f64], v: &[f64]) -> f64 {
        let m = self.components;
        assert_eq!(u.len(), self.dim());
        assert_eq!(v.len(), self.dim());
        let mut acc = 0.0;
        for i in 0..self.pattern.n_rows() {
            let ui = &u[i * m..(i + 1) * m];
            for p in self.pattern.row_range(i) {
                let j = self.pattern.cols[p];
                let vj = &v[j * m..(j + 1) * m];
                let dot: f64 = ui.iter().zip(vj).map(|(a, b)| a * b).sum();
                acc += self.values[p] * dot;
            }
        }
        acc
    }

    /// Quadratic form `uᵀ (S ⊗ I) u`.
    pub fn quadratic(&self, u: &[f64]) -> f64 {
        self.form(u, u)
    }

    /// `a·self + b·other`; both operators must share a pattern.
    pub fn linear_combination(
        &self,
        a: f64,
        other: &SymmetricSparseOperator,
        b: f64,
    ) -> Result<SymmetricSparseOperator, FemError> {
        if self.pattern != other.pattern || self.components != other.components {
            return Err(FemError::PatternMismatch);
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| a * x + b * y)
            .collect();
        Ok(Self {
            pattern: self.pattern.clone(),
            values,
            components: self.components,
        })
    }
}

/// Flow metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MetricKind {
    L2,
    H1,
}

impl std::fmt::Display for MetricKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MetricKind::L2 => "L2",
            MetricKind::H1 => "H1",
        })
    }
}

impl std::str::FromStr for MetricKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "l2" => Ok(MetricKind::L2),
            "h1" => Ok(MetricKind::H1),
            other => Err(format!("unknown metric '{other}' (expected L2 or H1)")),
        }
    }
}

/// `∫ ∇u : (∇v M)` with `M = diag(m_diag)`, integrated exactly per triangle.
pub fn assemble_anisotropic_stiffness(
    space: &FeSpace,
    m_diag: [f64; 2],
) -> Result<SymmetricSparseOperator, FemError> {
    if !(m_diag[0] > 0.0 && m_diag[1] > 0.0) {
        return Err(FemError::NonPositiveAnisotropy(m_diag));
    }
    let mesh = space.mesh();
    let mut op = SymmetricSparseOperator::zeros(space);
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let area = mesh.signed_area(t);
        let g = mesh.barycentric_gradients(t);
        let mut local = [[0.0; 3]; 3];
        for a in 0..3 {
            for b in 0..3 {
                local[a][b] = area * (m_diag[0] * g[a][0] * g[b][0] + m_diag[1] * g[a][1] * g[b][1]);
            }
        }
        op.add_local(tri, &local);
    }
    Ok(op)
}

/// Consistent mass matrix `∫ u·v`.
pub fn assemble_mass(space: &FeSpace) -> SymmetricSparseOperator {
    let mesh = space.mesh();
    let mut op = SymmetricSparseOperator::zeros(space);
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let c = mesh.signed_area(t) / 12.0;
        let mut local = [[c; 3]; 3];
        for (a, row) in local.iter_mut().enumerate() {
            row[a] = 2.0 * c;
        }
        op.add_local(tri, &local);
    }
    op
}

/// Flow metric: `∫ u·v` for L2, `∫ (∇u:∇v + u·v)` for H1.
pub fn assemble_metric(space: &FeSpace, kind: MetricKind) -> SymmetricSparseOperator {
    let mass = assemble_mass(space);
    match kind {
        MetricKind::L2 => mass,
        MetricKind::H1 => {
            let lap = assemble_anisotropic_stiffness(space, [1.0, 1.0])
                .expect("identity anisotropy is positive");
            lap.linear_combination(1.0, &mass, 1.0)
                .expect("operators share the mesh pattern")
        }
    }
}

/// Nodal interpolant of `f`, which must return `m` finite components.
pub fn nodal_interpolate<F>(space: &FeSpace, f: F) -> Result<Vec<f64>, FemError>
where
    F: Fn([f64; 2]) -> Vec<f64>,
{
    let m = space.components();
    let mut u = Vec::with_capacity(space.n_dofs());
    for (vertex, &x) in space.mesh().vertices().iter().enumerate() {
        let val = f(x);
        if val.len() != m {
            return Err(FemError::ComponentMismatch {
                vertex,
                got: val.len(),
                expected: m,
            });
        }
        if let Some(component) = val.iter().position(|v| !v.is_finite()) {
            return Err(FemError::NonFiniteSample { vertex, component });
        }
        u.extend(val);
    }
    Ok(u)
}

/// `Σ_z ω_z |value_z|` with the lumped vertex weights.
pub fn l1_nodal_norm(space: &FeSpace, nodal_scalar: &[f64]) -> f64 {
    assert_eq!(nodal_scalar.len(), space.n_vertices());
    space
        .lumped_weights()
        .iter()
        .zip(nodal_scalar)
        .map(|(w, v)| w * v.abs())
        .sum()
}

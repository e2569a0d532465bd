//! Anisotropic Dirichlet energy on `(-1/2, 1/2)²` with unit-length target
//! values and Dirichlet data on the whole boundary.

use std::f64::consts::{PI, SQRT_2};

use crate::error::FemError;
use crate::fem::{
    assemble_anisotropic_stiffness, assemble_metric, nodal_interpolate, FeSpace, Mesh, MetricKind,
    SymmetricSparseOperator,
};

/// Diagonal of the anisotropy matrix.
pub const ANISOTROPY: [f64; 2] = [1.0, 10.0];

/// Number of vector components.
pub const COMPONENTS: usize = 3;

/// Boundary datum `m(x)`, an inverse stereographic projection; `|m(x)| = 1`.
pub fn boundary_datum(x: [f64; 2]) -> [f64; 3] {
    let r2 = x[0] * x[0] + x[1] * x[1];
    let d = 1.0 + r2;
    [
        SQRT_2 * (x[0] - x[1]) / d,
        SQRT_2 * (x[0] + x[1]) / d,
        (1.0 - r2) / d,
    ]
}

/// Perturbation `g(x)`; equals `(1, 1, 1)` on the boundary.
pub fn perturbation(x: [f64; 2]) -> [f64; 3] {
    let bubble = 100.0 * (x[0] - 0.5) * (x[0] + 0.5) * (x[1] - 0.5) * (x[1] + 0.5);
    [
        1.0 - bubble * (0.5 * PI * x[0]).sin(),
        1.0 - bubble * 8.0 * (0.5 * PI * x[1]).sin(),
        1.0 - bubble * 16.0 * (x[0] - x[1]) * (8.0 * PI * (x[0] + x[1])).cos(),
    ]
}

/// Initial state `(m_i g_i)_i / |(m_i g_i)_i|`.
pub fn initial_state(x: [f64; 2]) -> [f64; 3] {
    let m = boundary_datum(x);
    let g = perturbation(x);
    let p = [m[0] * g[0], m[1] * g[1], m[2] * g[2]];
    let n = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
    [p[0] / n, p[1] / n, p[2] / n]
}

/// Discretized benchmark: space, nodal initial state and boundary values.
#[derive(Debug, Clone)]
pub struct Benchmark {
    pub space: FeSpace,
    pub u0: Vec<f64>,
    /// Nodal interpolant of the boundary datum on all vertices.
    pub boundary: Vec<f64>,
}

/// Builds the benchmark on the uniform mesh with `n × n` cells.
pub fn run_benchmark_setup(n: usize) -> Result<Benchmark, FemError> {
    let space = FeSpace::new(Mesh::uniform(n)?, COMPONENTS);
    let boundary = nodal_interpolate(&space, |x| boundary_datum(x).to_vec())?;
    let mut u0 = nodal_interpolate(&space, |x| initial_state(x).to_vec())?;
    let m = COMPONENTS;
    for (z, &b) in space.mesh().boundary_mask().iter().enumerate() {
        if b {
            u0[z * m..(z + 1) * m].copy_from_slice(&boundary[z * m..(z + 1) * m]);
        }
    }
    Ok(Benchmark {
        space,
        u0,
        boundary,
    })
}

/// Space, energy operator, both metrics and initial state of a constrained flow.
#[derive(Debug, Clone)]
pub struct FlowProblem {
    pub space: FeSpace,
    /// Operator of the energy `E[u] = ½ uᵀ K u`.
    pub stiffness: SymmetricSparseOperator,
    pub mass: SymmetricSparseOperator,
    pub h1: SymmetricSparseOperator,
    pub u0: Vec<f64>,
}

impl FlowProblem {
    pub fn new(
        space: FeSpace,
        anisotropy: [f64; 2],
        u0: Vec<f64>,
    ) -> Result<Self, FemError> {
        let stiffness = assemble_anisotropic_stiffness(&space, anisotropy)?;
        let mass = assemble_metric(&space, MetricKind::L2);
        let h1 = assemble_metric(&space, MetricKind::H1);
        Ok(Self {
            space,
            stiffness,
            mass,
            h1,
            u0,
        })
    }

    /// Benchmark problem on the `n × n` mesh.
    pub fn benchmark(n: usize) -> Result<Self, FemError> {
        let b = run_benchmark_setup(n)?;
        Self::new(b.space, ANISOTROPY, b.u0)
    }

    pub fn metric(&self, kind: MetricKind) -> &SymmetricSparseOperator {
        match kind {
            MetricKind::L2 => &self.mass,
            MetricKind::H1 => &self.h1,
        }
    }

    /// `E[u] = ½ 𝓜(u, u)`.
    pub fn energy(&self, u: &[f64]) -> f64 {
        0.5 * self.stiffness.quadratic(u)
    }
}

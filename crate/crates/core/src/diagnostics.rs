//! Energy monitors, violation measurement, the exact violation recurrence,
//! regularity sums and convergence orders.

use std::collections::VecDeque;

use crate::bdf::BdfTable;
use crate::constraint::violation_field;
use crate::error::DiagnosticsError;
use crate::fem::{l1_nodal_norm, FeSpace, SymmetricSparseOperator};

/// `𝓜(u-v, u-v) + (3/2) 𝓜(u,u) - (1/2) 𝓜(v,v)`.
pub fn g_form(k: &SymmetricSparseOperator, u: &[f64], v: &[f64]) -> f64 {
    let d: Vec<f64> = u.iter().zip(v).map(|(a, b)| a - b).collect();
    k.quadratic(&d) + 1.5 * k.quadratic(u) - 0.5 * k.quadratic(v)
}

/// Eigenvalues bounding [`g_form`] against `𝓜(u,u) + 𝓜(v,v)`.
pub fn g_form_bounds() -> (f64, f64) {
    let r = 2.0 * std::f64::consts::SQRT_2;
    ((3.0 - r) / 2.0, (3.0 + r) / 2.0)
}

/// Per-step quantities of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsRecord {
    pub step: usize,
    /// `E[uⁿ] = ½ 𝓜(uⁿ, uⁿ)`.
    pub energy: f64,
    /// `‖u̇ⁿ‖²` in the flow metric.
    pub kinetic: f64,
    pub lyapunov: f64,
    /// `Σ_z ω_z |bₙ(z)|`.
    pub violation_l1: f64,
    pub violation_max: f64,
    /// `max_z |predicted - measured|` when the recurrence is enabled.
    pub oracle_mismatch: Option<f64>,
    pub stopping_residual: f64,
    /// `max_z |û(z)·u̇(z)|` over the constrained vertices.
    pub tangency: f64,
    pub degenerate_nodes: usize,
    /// `‖d_tʲ uⁿ‖²` in the flow metric for `j = 1..=4`.
    pub difference_norms: [f64; 4],
}

/// Inputs of [`measure`] that are not plain state.
#[derive(Debug, Clone, Copy)]
pub struct MeasureContext<'a> {
    pub step: usize,
    pub lyapunov: f64,
    pub stopping_residual: f64,
    pub tangency: f64,
    pub degenerate_nodes: usize,
    pub difference_norms: [f64; 4],
    pub oracle: Option<(&'a [f64], &'a [bool])>,
}

/// Assembles a record for the state `u` with velocity `velocity`.
pub fn measure(
    space: &FeSpace,
    stiffness: &SymmetricSparseOperator,
    metric: &SymmetricSparseOperator,
    u: &[f64],
    velocity: &[f64],
    ctx: MeasureContext<'_>,
) -> DiagnosticsRecord {
    let b = violation_field(space, u);
    let oracle_mismatch = ctx
        .oracle
        .map(|(pred, excluded)| oracle_mismatch(&b, pred, excluded));
    DiagnosticsRecord {
        step: ctx.step,
        energy: 0.5 * stiffness.quadratic(u),
        kinetic: metric.quadratic(velocity),
        lyapunov: ctx.lyapunov,
        violation_l1: l1_nodal_norm(space, &b),
        violation_max: b.iter().fold(0.0, |m, v| m.max(v.abs())),
        oracle_mismatch,
        stopping_residual: ctx.stopping_residual,
        tangency: ctx.tangency,
        degenerate_nodes: ctx.degenerate_nodes,
        difference_norms: ctx.difference_norms,
    }
}

/// `max_z |predicted(z) - measured(z)|` over vertices not flagged in `excluded`.
pub fn oracle_mismatch(measured: &[f64], predicted: &[f64], excluded: &[bool]) -> f64 {
    measured
        .iter()
        .zip(predicted)
        .zip(excluded)
        .filter(|(_, &e)| !e)
        .map(|((m, p), _)| (m - p).abs())
        .fold(0.0, f64::max)
}

/// Exact per-vertex violation prediction for BDF-k iterates whose nodal
/// velocity is orthogonal to the extrapolation.
///
/// With `b_n = |uⁿ|² - 1` and `z_n = Σ_{j<k} δ̃_j b_{n-j}`,
///
/// ```text
///     z_n = z_{n-1} + φ_n,   φ_n = Σ β_{jℓ} |s^j d_tʲ u^{n-ℓ}|²
/// ```
///
/// so only `z` and the last `k-1` predictions are kept per vertex.
#[derive(Debug, Clone)]
pub struct ViolationOracle {
    table: BdfTable,
    m: usize,
    z: Vec<f64>,
    /// Newest first.
    recent: VecDeque<Vec<f64>>,
}

impl ViolationOracle {
    /// Starts from measured violations `measured[0] = b_n, measured[1] = b_{n-1}, …`
    /// (at least `k` fields, newest first).
    pub fn new(table: BdfTable, components: usize, measured: &[Vec<f64>]) -> Self {
        let k = table.k;
        assert!(measured.len() >= k, "need b_n..b_(n-k+1)");
        let nv = measured[0].len();
        let z = (0..nv)
            .map(|v| {
                table
                    .tilde_delta
                    .iter()
                    .enumerate()
                    .map(|(j, d)| d * measured[j][v])
                    .sum()
            })
            .collect();
        let recent = measured.iter().take(k - 1).cloned().collect();
        Self {
            table,
            m: components,
            z,
            recent,
        }
    }

    pub fn order(&self) -> usize {
        self.table.k
    }

    pub fn z(&self) -> &[f64] {
        &self.z
    }

    /// `φ_n` per vertex from the states `uⁿ, u^{n-1}, …, u^{n-k}` (newest first).
    pub fn increment(&self, states: &[&[f64]]) -> Vec<f64> {
        phi(&self.table, self.m, states)
    }

    /// Advances by one step and returns the predicted `b_n`.
    pub fn update(&mut self, states: &[&[f64]]) -> Vec<f64> {
        let phi = self.increment(states);
        let td = &self.table.tilde_delta;
        let mut pred = Vec::with_capacity(self.z.len());
        for (v, zv) in self.z.iter_mut().enumerate() {
            *zv += phi[v];
            let mut acc = *zv;
            for (j, b) in self.recent.iter().enumerate() {
                acc -= td[j + 1] * b[v];
            }
            pred.push(acc / td[0]);
        }
        if self.table.k > 1 {
            self.recent.push_front(pred.clone());
            self.recent.truncate(self.table.k - 1);
        }
        pred
    }
}

/// `Σ β_{jℓ} |Σ_q (-1)^q C(j,q) u^{n-ℓ-q}(z)|²` for every vertex.
pub fn phi(table: &BdfTable, m: usize, states: &[&[f64]]) -> Vec<f64> {
    assert!(states.len() > table.k, "need k+1 states");
    let nv = states[0].len() / m;
    let binom: Vec<Vec<f64>> = (0..=table.k)
        .map(|j| {
            let mut row = vec![1.0; j + 1];
            for q in 1..=j {
                row[q] = row[q - 1] * (j + 1 - q) as f64 / q as f64 * -1.0;
            }
            row
        })
        .collect();
    let mut out = vec![0.0; nv];
    for (v, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for t in &table.beta {
            let w = &binom[t.order];
            let mut sq = 0.0;
            for c in 0..m {
                let mut d = 0.0;
                for (q, wq) in w.iter().enumerate() {
                    d += wq * states[t.lag + q][v * m + c];
                }
                sq += d * d;
            }
            acc += t.value * sq;
        }
        *o = acc;
    }
    out
}

/// Discrete regularity quantities of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularityReport {
    pub s: f64,
    /// `σʲ = Σ_{n=3}^{N} ‖d_tʲ uⁿ‖²` at index `j - 1`.
    pub sigma: [f64; 4],
    /// `max_{1≤n≤N} ‖d_t² uⁿ‖²`.
    pub rho: f64,
}

impl RegularityReport {
    pub fn sigma(&self, j: usize) -> f64 {
        self.sigma[j - 1]
    }

    /// `s^p σʲ`.
    pub fn scaled_sigma(&self, p: i32, j: usize) -> f64 {
        self.s.powi(p) * self.sigma(j)
    }
}

/// Sums and maxima from per-step norms `norms[i] = ‖d_tʲ u^{i+1}‖²` (`j = 1..=4`).
pub fn regularity_sums(norms: &[[f64; 4]], s: f64) -> RegularityReport {
    let mut sigma = [0.0; 4];
    let mut rho = 0.0f64;
    for (i, row) in norms.iter().enumerate() {
        let n = i + 1;
        if n >= 3 {
            for j in 0..4 {
                sigma[j] += row[j];
            }
        }
        rho = rho.max(row[1]);
    }
    RegularityReport { s, sigma, rho }
}

/// Pairwise experimental orders `log(δᵢ/δᵢ₊₁) / log(sᵢ/sᵢ₊₁)`.
pub fn eoc(pairs: &[(f64, f64)]) -> Result<Vec<f64>, DiagnosticsError> {
    if pairs.len() < 2 {
        return Err(DiagnosticsError::TooFewPairs(pairs.len()));
    }
    for (index, &(_, d)) in pairs.iter().enumerate() {
        if !(d > 0.0) {
            return Err(DiagnosticsError::NonPositiveViolation { index, value: d });
        }
    }
    for (index, w) in pairs.windows(2).enumerate() {
        if !(w[1].0 < w[0].0) {
            return Err(DiagnosticsError::NonMonotoneSteps { index: index + 1 });
        }
    }
    Ok(pairs
        .windows(2)
        .map(|w| (w[0].1 / w[1].1).ln() / (w[0].0 / w[1].0).ln())
        .collect())
}

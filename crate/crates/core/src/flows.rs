//! Projection-free gradient and accelerated gradient flows.
//!
//! Every scheme solves, at step `n`, for a velocity `v` that vanishes on the
//! Dirichlet boundary and is nodally orthogonal to an anchor `ûⁿ`:
//!
//! ```text
//!     (a G + b K) v = c G u̇^{n-1} - K y
//! ```
//!
//! where `G` is the flow metric and `K` the energy operator. The schemes
//! differ in `(a, b, c, y, ûⁿ)` and in how `uⁿ` is recovered from `v`.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use log::{debug, warn};

use crate::bdf::BdfTable;
use crate::benchmark::FlowProblem;
use crate::constraint::violation_field;
use crate::diagnostics::{
    g_form, measure, regularity_sums, DiagnosticsRecord, MeasureContext, RegularityReport,
    ViolationOracle,
};
use crate::error::{FlowError, SolveError};
use crate::fem::{MetricKind, SymmetricSparseOperator};
use crate::solve::solve_tangent;

/// Largest order of the energy-stable accelerated family.
pub const MAX_FLOW_ORDER: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    /// Accelerated flow, backward Euler.
    AfBdf1,
    /// Accelerated flow, BDF-2 with its own initialization and transition step.
    AfBdf2,
    /// Energy-stable accelerated flow of order `k` (1..=4).
    AfBdfk(usize),
    /// Gradient flow, backward Euler.
    GfBdf1,
    /// Gradient flow, BDF-2 with extrapolated tangent space.
    GfBdf2,
}

impl Scheme {
    /// BDF order of the scheme's steady steps.
    pub fn order(&self) -> usize {
        match self {
            Scheme::AfBdf1 | Scheme::GfBdf1 => 1,
            Scheme::AfBdf2 | Scheme::GfBdf2 => 2,
            Scheme::AfBdfk(k) => *k,
        }
    }

    pub fn is_accelerated(&self) -> bool {
        matches!(self, Scheme::AfBdf1 | Scheme::AfBdf2 | Scheme::AfBdfk(_))
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scheme::AfBdf1 => f.write_str("af-bdf1"),
            Scheme::AfBdf2 => f.write_str("af-bdf2"),
            Scheme::AfBdfk(k) => write!(f, "af-bdfk{k}"),
            Scheme::GfBdf1 => f.write_str("gf-bdf1"),
            Scheme::GfBdf2 => f.write_str("gf-bdf2"),
        }
    }
}

impl FromStr for Scheme {
    type Err = FlowError;

    /// Accepts `af-bdf1`, `af-bdf2`, `af-bdfk<k>`, `gf-bdf1`, `gf-bdf2`
    /// (case-insensitive, `_` and `-` interchangeable).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let name = s.trim().to_ascii_lowercase().replace('_', "-");
        match name.as_str() {
            "af-bdf1" => Ok(Scheme::AfBdf1),
            "af-bdf2" => Ok(Scheme::AfBdf2),
            "gf-bdf1" => Ok(Scheme::GfBdf1),
            "gf-bdf2" => Ok(Scheme::GfBdf2),
            other => {
                let k = other
                    .strip_prefix("af-bdfk")
                    .map(|r| r.trim_start_matches(['-', ':', '=']))
                    .and_then(|r| r.parse::<usize>().ok())
                    .ok_or_else(|| FlowError::Config(format!("unknown scheme '{s}'")))?;
                if !(1..=MAX_FLOW_ORDER).contains(&k) {
                    return Err(FlowError::Config(format!(
                        "accelerated BDF-k order {k} outside 1..={MAX_FLOW_ORDER}"
                    )));
                }
                Ok(Scheme::AfBdfk(k))
            }
        }
    }
}

/// Parameters of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowConfig {
    pub scheme: Scheme,
    /// Step size in pseudo-time.
    pub s: f64,
    /// Damping of the accelerated flows, `α ≥ 3`.
    pub alpha: f64,
    pub metric: MetricKind,
    /// Stopping tolerance on the scheme's residual.
    pub eps: f64,
    /// Pseudo-time horizon; at most `⌊t_max/s⌋` steps are taken.
    pub t_max: f64,
    /// Largest accepted relative residual of the linear solves.
    pub kkt_tol: f64,
    /// Track the exact violation recurrence.
    pub oracle: bool,
}

impl FlowConfig {
    pub fn new(scheme: Scheme, s: f64) -> Self {
        Self {
            scheme,
            s,
            alpha: 3.0,
            metric: MetricKind::H1,
            eps: 1e-8,
            t_max: 1e4,
            kkt_tol: 1e-12,
            oracle: true,
        }
    }

    /// Settings of the benchmark tables: `H¹` metric, `α = 25`, `ε = 1e-8`.
    pub fn benchmark(scheme: Scheme, s: f64) -> Self {
        Self {
            alpha: 25.0,
            ..Self::new(scheme, s)
        }
    }

    pub fn validate(&self) -> Result<(), FlowError> {
        let bad = |m: String| Err(FlowError::Config(m));
        if !(self.s > 0.0 && self.s.is_finite()) {
            return bad(format!("step size must be positive, got {}", self.s));
        }
        if !(self.eps > 0.0) {
            return bad(format!("eps must be positive, got {}", self.eps));
        }
        if !(self.alpha >= 3.0) {
            return bad(format!("alpha must be at least 3, got {}", self.alpha));
        }
        if !(self.t_max > 0.0) {
            return bad(format!("t_max must be positive, got {}", self.t_max));
        }
        if !(self.kkt_tol > 0.0) {
            return bad(format!("kkt_tol must be positive, got {}", self.kkt_tol));
        }
        if let Scheme::AfBdfk(k) = self.scheme {
            if !(1..=MAX_FLOW_ORDER).contains(&k) {
                return bad(format!("order {k} outside 1..={MAX_FLOW_ORDER}"));
            }
        }
        Ok(())
    }

    pub fn max_steps(&self) -> usize {
        (self.t_max / self.s).floor() as usize
    }
}

/// The most recent iterates and velocities of a run.
#[derive(Debug, Clone)]
pub struct FlowHistory {
    states: VecDeque<Vec<f64>>,
    capacity: usize,
    velocity: Vec<f64>,
    prev_velocity: Vec<f64>,
    step: usize,
}

impl FlowHistory {
    fn new(u0: Vec<f64>, capacity: usize) -> Self {
        let zeros = vec![0.0; u0.len()];
        let mut states = VecDeque::with_capacity(capacity);
        states.push_front(u0);
        Self {
            states,
            capacity,
            velocity: zeros.clone(),
            prev_velocity: zeros,
            step: 0,
        }
    }

    fn push(&mut self, u: Vec<f64>, velocity: Vec<f64>) {
        if self.states.len() == self.capacity {
            self.states.pop_back();
        }
        self.states.push_front(u);
        self.prev_velocity = std::mem::replace(&mut self.velocity, velocity);
        self.step += 1;
    }

    /// Index `n` of the newest state.
    pub fn step(&self) -> usize {
        self.step
    }

    /// `u^{n-j}`.
    pub fn state(&self, j: usize) -> &[f64] {
        &self.states[j]
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// States newest first.
    pub fn states(&self) -> impl Iterator<Item = &[f64]> {
        self.states.iter().map(|v| v.as_slice())
    }

    /// `u̇ⁿ`.
    pub fn velocity(&self) -> &[f64] {
        &self.velocity
    }

    /// `u̇^{n-1}`.
    pub fn prev_velocity(&self) -> &[f64] {
        &self.prev_velocity
    }
}

/// How `uⁿ` is formed from `v`.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Update {
    Euler,
    Bdf2,
    Modified(usize),
}

#[derive(Debug, Clone)]
struct StepPlan {
    order: usize,
    a: f64,
    b: f64,
    c: f64,
    y: Vec<f64>,
    anchor: Vec<f64>,
    update: Update,
}

/// Everything a single step produced.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub step: usize,
    /// BDF order used at this step.
    pub order: usize,
    /// Lyapunov value of the previous state under this step's formula.
    pub lyapunov_before: f64,
    pub lyapunov: f64,
    /// Dissipated amount predicted by the energy identity, when one is available.
    pub dissipation: Option<f64>,
    pub stopping_residual: f64,
    pub tangency: f64,
    pub degenerate: usize,
}

impl StepReport {
    /// `|L_n + D_n - L_{n-1}| / |L_{n-1}|`.
    pub fn identity_residual(&self) -> Option<f64> {
        self.dissipation.map(|d| {
            (self.lyapunov + d - self.lyapunov_before).abs() / self.lyapunov_before.abs().max(f64::MIN_POSITIVE)
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// Stopping residual fell below `eps`.
    Converged,
    /// `⌊t_max/s⌋` steps taken.
    MaxSteps,
}

#[derive(Debug, Clone)]
pub struct FlowOutcome {
    pub config: FlowConfig,
    pub final_state: Vec<f64>,
    pub records: Vec<DiagnosticsRecord>,
    pub termination: Termination,
    pub regularity: RegularityReport,
    /// Sum over steps of vertices left without a tangency row.
    pub degenerate_events: usize,
}

impl FlowOutcome {
    pub fn steps(&self) -> usize {
        self.records.len()
    }

    pub fn last(&self) -> Option<&DiagnosticsRecord> {
        self.records.last()
    }

    pub fn final_energy(&self) -> f64 {
        self.last().map_or(f64::NAN, |r| r.energy)
    }

    pub fn final_violation(&self) -> f64 {
        self.last().map_or(0.0, |r| r.violation_l1)
    }

    pub fn max_oracle_mismatch(&self) -> Option<f64> {
        self.records
            .iter()
            .filter_map(|r| r.oracle_mismatch)
            .reduce(f64::max)
    }

    pub fn max_tangency(&self) -> f64 {
        self.records.iter().map(|r| r.tangency).fold(0.0, f64::max)
    }
}

fn lin2(a: f64, x: &[f64], b: f64, y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(p, q)| a * p + b * q).collect()
}

/// A running flow; owns its history.
pub struct Flow<'p> {
    problem: &'p FlowProblem,
    cfg: FlowConfig,
    tables: Vec<BdfTable>,
    history: FlowHistory,
    oracle: Option<ViolationOracle>,
    excluded: Vec<bool>,
    pyramid: Vec<Vec<f64>>,
    records: Vec<DiagnosticsRecord>,
    degenerate_events: usize,
}

impl<'p> Flow<'p> {
    pub fn new(problem: &'p FlowProblem, cfg: FlowConfig) -> Result<Self, FlowError> {
        cfg.validate()?;
        let nd = problem.space.n_dofs();
        if problem.u0.len() != nd {
            return Err(FlowError::Config(format!(
                "initial state has {} entries, expected {nd}",
                problem.u0.len()
            )));
        }
        let k = cfg.scheme.order();
        let tables = (1..=k)
            .map(BdfTable::new)
            .collect::<Result<Vec<_>, _>>()?;
        let history = FlowHistory::new(problem.u0.clone(), k + 1);
        let mut pyramid = vec![vec![0.0; nd]; 5];
        pyramid[0] = problem.u0.clone();
        let mut flow = Self {
            problem,
            cfg,
            tables,
            history,
            oracle: None,
            excluded: vec![false; problem.space.n_vertices()],
            pyramid,
            records: Vec::new(),
            degenerate_events: 0,
        };
        if flow.cfg.oracle && k == 1 {
            flow.start_oracle();
        }
        Ok(flow)
    }

    pub fn config(&self) -> &FlowConfig {
        &self.cfg
    }

    pub fn history(&self) -> &FlowHistory {
        &self.history
    }

    pub fn records(&self) -> &[DiagnosticsRecord] {
        &self.records
    }

    pub fn problem(&self) -> &FlowProblem {
        self.problem
    }

    fn metric(&self) -> &SymmetricSparseOperator {
        self.problem.metric(self.cfg.metric)
    }

    fn table(&self, order: usize) -> &BdfTable {
        &self.tables[order - 1]
    }

    fn start_oracle(&mut self) {
        let k = self.cfg.scheme.order();
        let space = &self.problem.space;
        let measured: Vec<Vec<f64>> = self
            .history
            .states()
            .take(k)
            .map(|u| violation_field(space, u))
            .collect();
        self.oracle = Some(ViolationOracle::new(
            self.table(k).clone(),
            space.components(),
            &measured,
        ));
    }

    /// Energy-stable order-`p` step: `(1/s + α/tₙ) G + s K`, rhs `(1/s) G u̇ - K Σ δ̃_{j-1} u^{n-j}`.
    fn modified_plan(&self, p: usize, n: usize) -> StepPlan {
        let s = self.cfg.s;
        let t = self.table(p);
        let mut y = vec![0.0; self.problem.u0.len()];
        let mut anchor = vec![0.0; y.len()];
        for j in 0..p {
            let u = self.history.state(j);
            for i in 0..y.len() {
                y[i] += t.tilde_delta[j] * u[i];
                anchor[i] += t.gamma[j] * u[i];
            }
        }
        StepPlan {
            order: p,
            a: 1.0 / s + self.cfg.alpha / (n as f64 * s),
            b: s,
            c: 1.0 / s,
            y,
            anchor,
            update: Update::Modified(p),
        }
    }

    fn af_bdf1_plan(&self, n: usize) -> StepPlan {
        let s = self.cfg.s;
        let u1 = self.history.state(0).to_vec();
        StepPlan {
            order: 1,
            a: 1.0 / s + self.cfg.alpha / (n as f64 * s),
            b: s,
            c: 1.0 / s,
            y: u1.clone(),
            anchor: u1,
            update: Update::Euler,
        }
    }

    fn bdf2_plan(&self, a: f64, c: f64) -> StepPlan {
        let (u1, u2) = (self.history.state(0), self.history.state(1));
        StepPlan {
            order: 2,
            a,
            b: 2.0 * self.cfg.s / 3.0,
            c,
            y: lin2(4.0 / 3.0, u1, -1.0 / 3.0, u2),
            anchor: lin2(2.0, u1, -1.0, u2),
            update: Update::Bdf2,
        }
    }

    fn gf_bdf1_plan(&self) -> StepPlan {
        let u1 = self.history.state(0).to_vec();
        StepPlan {
            order: 1,
            a: 1.0,
            b: self.cfg.s,
            c: 0.0,
            y: u1.clone(),
            anchor: u1,
            update: Update::Euler,
        }
    }

    fn plan(&self, n: usize) -> StepPlan {
        let s = self.cfg.s;
        match self.cfg.scheme {
            Scheme::AfBdf1 => self.af_bdf1_plan(n),
            Scheme::AfBdfk(k) => self.modified_plan(k.min(n), n),
            // initialization at n = 1, transition at n = 2 (u̇¹ = d_t u¹), then steady steps
            Scheme::AfBdf2 if n == 1 => self.af_bdf1_plan(n),
            Scheme::AfBdf2 => self.bdf2_plan(1.0 / s + self.cfg.alpha / (n as f64 * s), 1.0 / s),
            Scheme::GfBdf1 => self.gf_bdf1_plan(),
            Scheme::GfBdf2 if n == 1 => self.gf_bdf1_plan(),
            Scheme::GfBdf2 => self.bdf2_plan(1.0, 0.0),
        }
    }

    /// `L = 𝓜(ũ, ũ) + ‖w‖²` with `ũ = Σ_{j<p} δ̃_j u^{offset+j}`.
    fn modified_lyapunov(&self, p: usize, states: &[&[f64]], offset: usize, w: &[f64]) -> f64 {
        let t = self.table(p);
        let mut ut = vec![0.0; w.len()];
        for j in 0..p {
            let u = states[offset + j];
            for i in 0..ut.len() {
                ut[i] += t.tilde_delta[j] * u[i];
            }
        }
        self.problem.stiffness.quadratic(&ut) + self.metric().quadratic(w)
    }

    /// Advances by one step.
    pub fn step(&mut self) -> Result<StepReport, FlowError> {
        let n = self.history.step() + 1;
        let s = self.cfg.s;
        let plan = self.plan(n);
        let k_op = &self.problem.stiffness;
        let g_op = self.metric();
        let space = &self.problem.space;

        let op = g_op
            .linear_combination(plan.a, k_op, plan.b)
            .expect("operators share the mesh pattern");
        let mut rhs = k_op.apply(&plan.y);
        rhs.iter_mut().for_each(|v| *v = -*v);
        if plan.c != 0.0 {
            let gw = g_op.apply(self.history.velocity());
            rhs.iter_mut().zip(&gw).for_each(|(r, g)| *r += plan.c * g);
        }
        let sol = solve_tangent(space, &op, &plan.anchor, &rhs)
            .map_err(|source| FlowError::Kkt { step: n, source })?;
        if !(sol.residual <= self.cfg.kkt_tol) {
            return Err(FlowError::Kkt {
                step: n,
                source: SolveError::NoConvergence {
                    method: "tangent",
                    iterations: 3,
                    residual: sol.residual,
                },
            });
        }
        if !sol.degenerate.is_empty() {
            warn!(
                "step {n}: {} vertices without tangency row",
                sol.degenerate.len()
            );
            for &z in &sol.degenerate {
                self.excluded[z] = true;
            }
            self.degenerate_events += sol.degenerate.len();
        }
        let v = sol.velocity;

        let u1 = self.history.state(0);
        let mut un = match plan.update {
            Update::Euler => lin2(1.0, u1, s, &v),
            Update::Bdf2 => {
                let u2 = self.history.state(1);
                u1.iter()
                    .zip(u2)
                    .zip(&v)
                    .map(|((a, b), c)| (4.0 * a - b + 2.0 * s * c) / 3.0)
                    .collect()
            }
            Update::Modified(p) => {
                let t = self.table(p);
                let mut acc: Vec<f64> = v.iter().map(|x| s * x).collect();
                for j in 1..=p {
                    let u = self.history.state(j - 1);
                    for i in 0..acc.len() {
                        acc[i] -= t.delta[j] * u[i];
                    }
                }
                acc.iter().map(|x| x / t.delta[0]).collect()
            }
        };
        let m = space.components();
        for (z, &b) in space.mesh().boundary_mask().iter().enumerate() {
            if b {
                un[z * m..(z + 1) * m].copy_from_slice(&self.problem.u0[z * m..(z + 1) * m]);
            }
        }

        let (lyapunov_before, lyapunov, dissipation, stopping_residual) =
            self.energy_balance(&plan, n, &un, &v);

        // regularity differences
        let g_op = self.metric();
        let mut pyr = Vec::with_capacity(5);
        pyr.push(un.clone());
        for j in 1..5 {
            let d: Vec<f64> = pyr[j - 1]
                .iter()
                .zip(&self.pyramid[j - 1])
                .map(|(a, b)| (a - b) / s)
                .collect();
            pyr.push(d);
        }
        let difference_norms = [
            g_op.quadratic(&pyr[1]),
            g_op.quadratic(&pyr[2]),
            g_op.quadratic(&pyr[3]),
            g_op.quadratic(&pyr[4]),
        ];
        self.pyramid = pyr;

        let tangency = sol.tangency;
        let degenerate = sol.degenerate.len();
        self.history.push(un, v);

        let k = self.cfg.scheme.order();
        let mut prediction = None;
        if self.cfg.oracle {
            if n + 1 == k {
                self.start_oracle();
            } else if n >= k {
                let states: Vec<&[f64]> = self.history.states().collect();
                if let Some(o) = self.oracle.as_mut() {
                    prediction = Some(o.update(&states));
                }
            }
        }

        let record = measure(
            space,
            &self.problem.stiffness,
            self.metric(),
            self.history.state(0),
            self.history.velocity(),
            MeasureContext {
                step: n,
                lyapunov,
                stopping_residual,
                tangency,
                degenerate_nodes: degenerate,
                difference_norms,
                oracle: prediction.as_deref().map(|p| (p, self.excluded.as_slice())),
            },
        );
        debug!(
            "step {n}: E={:.10e} viol={:.3e} res={:.3e}",
            record.energy, record.violation_l1, stopping_residual
        );
        self.records.push(record);

        Ok(StepReport {
            step: n,
            order: plan.order,
            lyapunov_before,
            lyapunov,
            dissipation,
            stopping_residual,
            tangency,
            degenerate,
        })
    }

    /// `(L_{n-1}, L_n, dissipation, stopping residual)` for the step just solved.
    fn energy_balance(
        &self,
        plan: &StepPlan,
        n: usize,
        un: &[f64],
        v: &[f64],
    ) -> (f64, f64, Option<f64>, f64) {
        let s = self.cfg.s;
        let kk = &self.problem.stiffness;
        let g = self.metric();
        let vp = self.history.velocity();
        let mut states: Vec<&[f64]> = vec![un];
        states.extend(self.history.states());
        if self.cfg.scheme.is_accelerated() {
            let dv: Vec<f64> = v.iter().zip(vp).map(|(a, b)| a - b).collect();
            let damping = 2.0 * self.cfg.alpha / n as f64 * g.quadratic(v) + g.quadratic(&dv);
            let (before, after, extra) = match plan.update {
                Update::Bdf2 => {
                    let d2: Vec<f64> = (0..un.len())
                        .map(|i| states[0][i] - 2.0 * states[1][i] + states[2][i])
                        .collect();
                    (
                        g_form(kk, states[1], states[2]) + g.quadratic(vp),
                        g_form(kk, states[0], states[1]) + g.quadratic(v),
                        0.5 * kk.quadratic(&d2),
                    )
                }
                Update::Euler | Update::Modified(_) => {
                    let p = plan.order;
                    (
                        self.modified_lyapunov(p, &states, 1, vp),
                        self.modified_lyapunov(p, &states, 0, v),
                        s * s * kk.quadratic(v),
                    )
                }
            };
            let res = (after - before).abs() / (2.0 * s);
            (before, after, Some(damping + extra), res)
        } else {
            let before = 0.5 * kk.quadratic(states[1]);
            let after = 0.5 * kk.quadratic(states[0]);
            let dissipation = match plan.update {
                Update::Euler => Some(s * g.quadratic(v) + 0.5 * s * s * kk.quadratic(v)),
                _ => None,
            };
            (before, after, dissipation, (after - before).abs() / s)
        }
    }

    /// Steps until the stopping residual is at most `eps` or the horizon is reached.
    pub fn run(mut self) -> Result<FlowOutcome, FlowError> {
        let max_steps = self.cfg.max_steps();
        let termination = loop {
            if self.history.step() >= max_steps {
                break Termination::MaxSteps;
            }
            let report = self.step()?;
            if report.stopping_residual <= self.cfg.eps {
                break Termination::Converged;
            }
        };
        let norms: Vec<[f64; 4]> = self.records.iter().map(|r| r.difference_norms).collect();
        let regularity = regularity_sums(&norms, self.cfg.s);
        Ok(FlowOutcome {
            final_state: self.history.state(0).to_vec(),
            records: self.records,
            termination,
            regularity,
            degenerate_events: self.degenerate_events,
            config: self.cfg,
        })
    }
}

/// Runs `cfg` on `problem` to termination.
pub fn run_flow(problem: &FlowProblem, cfg: FlowConfig) -> Result<FlowOutcome, FlowError> {
    Flow::new(problem, cfg)?.run()
}

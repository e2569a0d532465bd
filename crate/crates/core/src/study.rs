//! Step-size sweeps over the benchmark and their CSV tables.
//!
//! Configuration files are flat `key = value` lines; `#` starts a comment.
//!
//! | key          | value                                          | default                 |
//! |--------------|------------------------------------------------|-------------------------|
//! | `benchmark`  | `anisotropic_dirichlet`                        | `anisotropic_dirichlet` |
//! | `mesh`       | cells per side                                 | `64`                    |
//! | `anisotropy` | two positive numbers                           | `1, 10`                 |
//! | `schemes`    | comma list of scheme names                     | required                |
//! | `metric`     | `H1` or `L2`                                   | `H1`                    |
//! | `alpha`      | damping, at least 3                            | `25`                    |
//! | `eps`        | stopping tolerance                             | `1e-8`                  |
//! | `s`          | comma list, strictly decreasing; `2^-k` allowed | required                |
//! | `t_max`      | pseudo-time horizon                            | `1e4`                   |
//! | `kkt_tol`    | accepted solve residual                        | `1e-12`                 |
//! | `oracle`     | `true` / `false`                               | `true`                  |
//! | `output`     | CSV path                                       | none                    |

use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use log::info;

use crate::benchmark::{run_benchmark_setup, FlowProblem, ANISOTROPY};
use crate::diagnostics::eoc;
use crate::error::StudyError;
use crate::fem::MetricKind;
use crate::flows::{run_flow, FlowConfig, FlowOutcome, Scheme, Termination};

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub mesh: usize,
    pub anisotropy: [f64; 2],
    pub schemes: Vec<Scheme>,
    pub metric: MetricKind,
    pub alpha: f64,
    pub eps: f64,
    pub steps: Vec<f64>,
    pub t_max: f64,
    pub kkt_tol: f64,
    pub oracle: bool,
    pub output: Option<PathBuf>,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            mesh: 64,
            anisotropy: ANISOTROPY,
            schemes: Vec::new(),
            metric: MetricKind::H1,
            alpha: 25.0,
            eps: 1e-8,
            steps: Vec::new(),
            t_max: 1e4,
            kkt_tol: 1e-12,
            oracle: true,
            output: None,
        }
    }
}

/// Parses `0.125`, `1e-3` or `2^-3`.
pub fn parse_step(text: &str) -> Option<f64> {
    let t = text.trim();
    if let Some((base, exp)) = t.split_once('^') {
        let b: f64 = base.trim().parse().ok()?;
        let e: i32 = exp.trim().parse().ok()?;
        return Some(b.powi(e));
    }
    t.parse().ok()
}

fn list(value: &str) -> impl Iterator<Item = &str> {
    value.split(',').map(str::trim).filter(|s| !s.is_empty())
}

impl StudyConfig {
    pub fn parse(text: &str) -> Result<Self, StudyError> {
        let mut cfg = StudyConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| StudyError::Parse {
                line: line_no,
                message,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected 'key = value', got '{line}'")))?;
            let (key, value) = (key.trim(), value.trim());
            let num = |v: &str| -> Result<f64, StudyError> {
                parse_step(v).ok_or_else(|| err(format!("'{v}' is not a number")))
            };
            match key {
                "benchmark" => {
                    if value != "anisotropic_dirichlet" {
                        return Err(err(format!("unknown benchmark '{value}'")));
                    }
                }
                "mesh" => {
                    cfg.mesh = value
                        .parse()
                        .map_err(|_| err(format!("'{value}' is not a mesh size")))?
                }
                "anisotropy" => {
                    let v: Vec<f64> = list(value).map(num).collect::<Result<_, _>>()?;
                    if v.len() != 2 {
                        return Err(err("anisotropy needs two values".into()));
                    }
                    cfg.anisotropy = [v[0], v[1]];
                }
                "schemes" => {
                    cfg.schemes = list(value)
                        .map(|s| s.parse::<Scheme>().map_err(|e| err(e.to_string())))
                        .collect::<Result<_, _>>()?
                }
                "metric" => cfg.metric = value.parse().map_err(err)?,
                "alpha" => cfg.alpha = num(value)?,
                "eps" => cfg.eps = num(value)?,
                "s" => cfg.steps = list(value).map(num).collect::<Result<_, _>>()?,
                "t_max" => cfg.t_max = num(value)?,
                "kkt_tol" => cfg.kkt_tol = num(value)?,
                "oracle" => {
                    cfg.oracle = match value {
                        "true" | "yes" | "1" => true,
                        "false" | "no" | "0" => false,
                        _ => return Err(err(format!("'{value}' is not a boolean"))),
                    }
                }
                "output" => cfg.output = Some(PathBuf::from(value)),
                other => return Err(err(format!("unknown key '{other}'"))),
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), StudyError> {
        let bad = |m: String| Err(StudyError::Invalid(m));
        if self.steps.is_empty() {
            return bad("step-size list is empty".into());
        }
        if self.schemes.is_empty() {
            return bad("scheme list is empty".into());
        }
        if self.mesh == 0 {
            return bad("mesh must be at least 1".into());
        }
        if let Some(i) = self.steps.windows(2).position(|w| !(w[1] < w[0])) {
            return bad(format!("step sizes must be strictly decreasing (entry {})", i + 2));
        }
        for &scheme in &self.schemes {
            for &s in &self.steps {
                self.flow_config(scheme, s)
                    .validate()
                    .map_err(|e| StudyError::Invalid(e.to_string()))?;
            }
        }
        Ok(())
    }

    pub fn flow_config(&self, scheme: Scheme, s: f64) -> FlowConfig {
        FlowConfig {
            scheme,
            s,
            alpha: self.alpha,
            metric: self.metric,
            eps: self.eps,
            t_max: self.t_max,
            kkt_tol: self.kkt_tol,
            oracle: self.oracle,
        }
    }
}

/// One `(scheme, s)` experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyRow {
    pub scheme: Scheme,
    pub metric: MetricKind,
    pub s: f64,
    pub iterations: usize,
    pub converged: bool,
    pub violation: f64,
    /// Order against the previous row of the same scheme.
    pub eoc: Option<f64>,
    pub s_sigma2: f64,
    pub s2_sigma3: f64,
    pub rho: f64,
    pub energy: f64,
    pub oracle_mismatch: Option<f64>,
    pub tangency: f64,
    /// Seconds; not written to CSV.
    pub wall_time: f64,
}

impl StudyRow {
    pub fn from_outcome(outcome: &FlowOutcome, wall_time: f64) -> Self {
        let cfg = &outcome.config;
        Self {
            scheme: cfg.scheme,
            metric: cfg.metric,
            s: cfg.s,
            iterations: outcome.steps(),
            converged: outcome.termination == Termination::Converged,
            violation: outcome.final_violation(),
            eoc: None,
            s_sigma2: outcome.regularity.scaled_sigma(1, 2),
            s2_sigma3: outcome.regularity.scaled_sigma(2, 3),
            rho: outcome.regularity.rho,
            energy: outcome.final_energy(),
            oracle_mismatch: outcome.max_oracle_mismatch(),
            tangency: outcome.max_tangency(),
            wall_time,
        }
    }
}

pub const CSV_HEADER: &str = "scheme,metric,s,iterations,converged,violation,eoc,s_sigma2,s2_sigma3,rho,energy,oracle_mismatch,tangency";

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

pub fn write_csv<W: Write>(rows: &[StudyRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{:e},{},{},{:e},{},{:e},{:e},{:e},{:e},{},{:e}",
            r.scheme,
            r.metric,
            r.s,
            r.iterations,
            r.converged,
            r.violation,
            opt(r.eoc),
            r.s_sigma2,
            r.s2_sigma3,
            r.rho,
            r.energy,
            opt(r.oracle_mismatch),
            r.tangency
        )?;
    }
    Ok(())
}

/// Fills the `eoc` column pairwise within each scheme.
pub fn fill_eoc(rows: &mut [StudyRow]) {
    for i in 1..rows.len() {
        let (prev, cur) = (&rows[i - 1], &rows[i]);
        if prev.scheme == cur.scheme && prev.violation > 0.0 && cur.violation > 0.0 {
            rows[i].eoc = eoc(&[(prev.s, prev.violation), (cur.s, cur.violation)])
                .ok()
                .map(|v| v[0]);
        }
    }
}

/// Runs every `(scheme, s)` pair in config order and computes the order column.
pub fn run_study(cfg: &StudyConfig) -> Result<Vec<StudyRow>, StudyError> {
    cfg.validate()?;
    let setup = run_benchmark_setup(cfg.mesh)?;
    let problem = FlowProblem::new(setup.space, cfg.anisotropy, setup.u0)?;
    let mut rows = Vec::new();
    for &scheme in &cfg.schemes {
        for &s in &cfg.steps {
            let start = Instant::now();
            let outcome = run_flow(&problem, cfg.flow_config(scheme, s)).map_err(|source| {
                StudyError::Run {
                    scheme: scheme.to_string(),
                    s,
                    source,
                }
            })?;
            let row = StudyRow::from_outcome(&outcome, start.elapsed().as_secs_f64());
            info!(
                "{scheme} s={s:e}: N={} violation={:.4e} E={:.4}",
                row.iterations, row.violation, row.energy
            );
            rows.push(row);
        }
    }
    fill_eoc(&mut rows);
    Ok(rows)
}

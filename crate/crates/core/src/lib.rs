//! Projection-free BDF-k gradient and accelerated gradient flows for quadratic
//! energies under a pointwise unit-length constraint, with P1 finite elements.

pub mod bdf;
pub mod benchmark;
pub mod constraint;
pub mod diagnostics;
pub mod error;
pub mod fem;
pub mod flows;
pub mod solve;
pub mod study;

pub use bdf::{BdfScheme, BdfTable, EtaSequence};
pub use benchmark::{run_benchmark_setup, Benchmark, FlowProblem};
pub use constraint::{build_constraint_rows, violation_field, NodalConstraint};
pub use diagnostics::{eoc, DiagnosticsRecord, RegularityReport, ViolationOracle};
pub use error::{BdfError, DiagnosticsError, FemError, FlowError, SolveError, StudyError};
pub use fem::{FeSpace, Mesh, MetricKind, SymmetricSparseOperator};
pub use flows::{run_flow, Flow, FlowConfig, FlowHistory, FlowOutcome, Scheme, Termination};
pub use solve::{solve_kkt, KktSystem};
pub use study::{run_study, StudyConfig, StudyRow};

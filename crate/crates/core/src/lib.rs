//! Phase-field fracture functionals on box grids: operator algebra, bulk
//! densities, discrete energies, alternating minimization and the
//! sharp-interface limit.

pub mod check;
pub mod density;
pub mod energy;
pub mod error;
pub mod field;
pub mod grid;
pub mod limit;
pub mod operator;
pub mod quadrature;
pub mod rng;
pub mod scenario;
pub mod snapshot;
pub mod solver;
pub mod sym;

pub use density::{BulkDensity, HookeTensor};
pub use energy::{EnergyBreakdown, EpsParams, Functional, PsiSpec, SublevelDiagnostics};
pub use error::{Error, Result};
pub use field::QuadraticField;
pub use grid::{Face, Grid, GridField, Side};
pub use limit::{JumpTemplate, LimitConstants, LimitModel, PhaseParams, ProfileSolution, RhoRule};
pub use operator::{EllipticityReport, FirstOrderOperator, KernelField, OperatorKind};
pub use scenario::Scenario;
pub use solver::{EtaRule, GridRule, Initializer, Problem, SolverConfig, SweepOptions};
pub use sym::{SymCoords, SymMat};

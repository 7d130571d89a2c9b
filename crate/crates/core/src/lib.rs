//! Approximate minimization of ordered norms of summed loads, where each customer's
//! feasible set is known only through a linear-minimization oracle.

pub mod approx;
pub mod error;
pub mod instance;
pub mod io;
pub mod mcf;
pub mod norm;
pub mod oracle;
pub mod projection;
pub mod solver;
pub mod testkit;

pub use approx::{NormApprox, PriceVector, PsiEvaluation};
pub use error::{Error, Result};
pub use instance::{Customer, Instance};
pub use io::{parse_graph, parse_instance, GraphFile, InstanceFile};
pub use mcf::{solve_mcf, FlowNetwork, FlowReport, SourceCustomer};
pub use norm::{LoadVector, WeightVector};
pub use oracle::{ApproxOracleWrapper, LinearOracle, OracleAnswer, VertexListOracle, Witness};
pub use projection::{
    check_characterization, project, project_sorted, LogWeights, ProjectionResult,
};
pub use solver::{solve, Decision, Mode, Outcome, Solution, SolveReport, SolverConfig};

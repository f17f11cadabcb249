use thiserror::Error;

use crate::counting_dp::DpError;
use crate::decompose::TdError;
use crate::formula::Var;
use crate::graphs::GraphError;
use crate::hybrid::external::SolverFailure;
use crate::oracle::OracleError;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SolveError {
    #[error(transparent)]
    Dp(#[from] DpError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Td(#[from] TdError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("abstraction variable {0} is not a projection variable")]
    AbstractionNotProjected(Var),
    #[error("no decomposition node is compatible with component {0:?}")]
    NoCompatNode(Vec<Var>),
    #[error("resource limit: {0}")]
    Resource(String),
    #[error(transparent)]
    Solver(#[from] SolverFailure),
}

impl SolveError {
    /// Row budgets, bag limits and search budgets, as opposed to bad input or solver failures.
    pub fn is_resource(&self) -> bool {
        match self {
            SolveError::Dp(e) => e.is_resource(),
            SolveError::Resource(_) | SolveError::Oracle(_) => true,
            _ => false,
        }
    }
}

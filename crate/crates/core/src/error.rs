use alloc::string::String;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("quadrature did not converge: estimate {value:e}, error {error:e} after {evaluations} evaluations")]
    NonConvergence {
        value: f64,
        error: f64,
        evaluations: usize,
    },
    #[error("integrand is not finite at x = {x:e}")]
    NonFinite { x: f64 },
    #[error("eigenfunction density has an atom at xi = {xi:.12}")]
    Atom { xi: f64 },
    #[error("condition not met: {0}")]
    Condition(String),
    #[error("{what} = {value:e} is outside its admissible range")]
    OutOfRange { what: &'static str, value: f64 },
}

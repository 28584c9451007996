//! Local densities and the assembled circle-method constant.

mod congruence;
mod constant;
mod real;
mod series;
mod witness;

pub use congruence::{
    chi_p, count_congruence, normalized_count, primes_up_to, ChiP, CongruenceCount,
    CongruenceMethod, DEFAULT_CONGRUENCE_BUDGET, STABILIZATION_TOL,
};
pub use constant::{
    assemble_constant, compute_constant_c, prime_tail, ConstantEstimate, DensityParams, DensityReport,
    LocalWitness, TailBound, TAIL_CALIBRATION_FLOOR, TAIL_SIEVE,
};
pub use real::{
    chi_infinity, singular_integral_j, ChiInfinity, SingularIntegral, SlabEstimate, DEFAULT_EPS,
    DEFAULT_MC_SAMPLES, STRATA,
};
pub use series::{series_term, singular_series, SeriesReport, SeriesTerm, IMAG_TOL};
pub use witness::{
    find_nonsingular_local_solution, verify_witness, Place, Witness, REAL_RESIDUAL_TOL,
    REAL_SIGMA_MIN,
};

use crate::counting::CountError;
use crate::expsum::ExpSumError;

#[derive(Debug, thiserror::Error)]
pub enum DensityError {
    #[error("invalid input: {0}")]
    Shape(String),
    #[error("numerical integrity: {0}")]
    Integrity(String),
    #[error("{what} needs {needed:.3e} steps, budget is {limit:.3e}")]
    Budget { what: String, needed: f64, limit: f64 },
    #[error("direct quadrature supports at most 4 equations, got {0}")]
    Dimension(usize),
    #[error("overflow: {0}")]
    Overflow(String),
    #[error(transparent)]
    Quad(#[from] ExpSumError),
    #[error(transparent)]
    Count(#[from] CountError),
}

pub type Result<T> = std::result::Result<T, DensityError>;

use thiserror::Error;

/// Errors raised by the laboratory.
///
/// Variants split into mathematical precondition failures and numerical
/// failures; see [`Error::is_numerical`].
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid area: {0}")]
    InvalidArea(String),
    #[error("invalid collar: {0}")]
    InvalidCollar(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("point ({u}, {v}) lies outside the chart domain")]
    OutsideDomain { u: f64, v: f64 },
    #[error("surface mismatch: {0}")]
    SurfaceMismatch(String),
    #[error("hamiltonian is not locally constant on boundary circle {circle} (variation {variation:e})")]
    BoundaryNotConstant { circle: usize, variation: f64 },
    #[error("one-form is not a primitive of the required two-form (defect {defect:e})")]
    NotAPrimitive { defect: f64 },
    #[error("one-form does not restrict to zero on the lagrangian circles (defect {defect:e})")]
    NonzeroBoundaryRestriction { defect: f64 },
    #[error("area forms have unequal total area ({left} vs {right})")]
    UnequalAreas { left: f64, right: f64 },
    #[error("pullback one-form is not exact: integral over cycle `{cycle}` is {integral:e}")]
    NonExact { cycle: String, integral: f64 },
    #[error("map is not a collar rotation near the boundary (defect {defect:e}); general extension is unsupported")]
    UnsupportedExtension { defect: f64 },
    #[error("orbit straddles the lagrangian circles: {0}")]
    StraddlingOrbit(String),
    #[error("empty census: {0}")]
    EmptyCensus(String),
    #[error("empty orbit set: {0}")]
    EmptyOrbitSet(String),
    #[error("expression error: {0}")]
    Expression(String),
    #[error("integrator did not converge (achieved defect {defect:e}, steps {steps})")]
    IntegratorNonConvergence { defect: f64, steps: usize },
    #[error("quadrature did not converge (achieved tolerance {achieved:e})")]
    QuadratureNonConvergence { achieved: f64 },
    #[error("birkhoff average did not converge (fluctuation {fluctuation:e} after {iterates} iterates)")]
    BirkhoffNonConvergence { fluctuation: f64, iterates: usize },
    #[error("orbit left the charted region after {iterates} iterates")]
    OrbitEscape { iterates: usize },
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    /// True for failures of a numerical procedure (as opposed to a violated
    /// mathematical precondition).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::IntegratorNonConvergence { .. }
                | Error::QuadratureNonConvergence { .. }
                | Error::BirkhoffNonConvergence { .. }
                | Error::Numerical(_)
        )
    }

    /// Short machine-readable tag.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidArea(_) => "invalid-area",
            Error::InvalidCollar(_) => "invalid-collar",
            Error::InvalidInput(_) => "invalid-input",
            Error::OutsideDomain { .. } => "outside-domain",
            Error::SurfaceMismatch(_) => "surface-mismatch",
            Error::BoundaryNotConstant { .. } => "boundary-not-constant",
            Error::NotAPrimitive { .. } => "not-a-primitive",
            Error::NonzeroBoundaryRestriction { .. } => "nonzero-boundary-restriction",
            Error::UnequalAreas { .. } => "unequal-areas",
            Error::NonExact { .. } => "non-exact",
            Error::UnsupportedExtension { .. } => "unsupported-extension",
            Error::StraddlingOrbit(_) => "straddling-orbit",
            Error::EmptyCensus(_) => "empty-census",
            Error::EmptyOrbitSet(_) => "empty-orbit-set",
            Error::Expression(_) => "expression",
            Error::IntegratorNonConvergence { .. } => "integrator-non-convergence",
            Error::QuadratureNonConvergence { .. } => "quadrature-non-convergence",
            Error::BirkhoffNonConvergence { .. } => "birkhoff-non-convergence",
            Error::OrbitEscape { .. } => "orbit-escape",
            Error::Numerical(_) => "numerical",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

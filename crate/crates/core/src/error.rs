use thiserror::Error;

/// Errors produced by the numerical pipeline.
///
/// Numerical quantities are carried as `f64` regardless of the scalar type the
/// failing routine was instantiated with, so that the error type stays
/// non-generic.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("quadrature did not reach tolerance: estimate {estimate:e}, error {error:e} (requested {requested:e})")]
    Quadrature {
        estimate: f64,
        error: f64,
        requested: f64,
    },

    #[error("k-integral did not reach tolerance: partial result {partial:e}, error {error:e}, tail estimate {tail:e}")]
    ModeIntegral { partial: f64, error: f64, tail: f64 },

    #[error("step size underflow at {at:e}: {hint}")]
    StepUnderflow { at: f64, hint: String },

    #[error("mode integration infeasible (accumulated phase {phase:e} rad exceeds budget {budget:e}); use the WKB route")]
    ModeInfeasible { phase: f64, budget: f64 },

    #[error("step budget of {budget} exhausted at {at:e}: {diagnostics}")]
    StepBudget {
        budget: usize,
        at: f64,
        diagnostics: String,
    },

    #[error("degenerate sampled energy form: c1 = {c1:e} must exceed |c2| = {c2_abs:e}")]
    DegenerateForm { c1: f64, c2_abs: f64 },

    #[error("tabulated Hubble history too coarse near z = {z:e}; refine the grid")]
    InsufficientSmoothness { z: f64 },

    #[error("fit residual {residual:e} above threshold {threshold:e}: solution is not radiation-like in the window")]
    FitResidual { residual: f64, threshold: f64 },

    #[error("{component}: {source}")]
    Component {
        component: &'static str,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// Wraps the error with the name of the pipeline component that produced it.
    pub fn in_component(self, component: &'static str) -> Self {
        Error::Component {
            component,
            source: Box::new(self),
        }
    }
}

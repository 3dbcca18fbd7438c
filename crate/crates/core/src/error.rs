use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid algebra: {0}")]
    InvalidAlgebra(String),

    #[error("{0} is not a weight of the algebra")]
    UnknownWeight(String),

    #[error("subspace is not a subalgebra")]
    NotSubalgebra,

    #[error("subspace is not an ideal")]
    NotIdeal,

    #[error("subspace is not graded")]
    NotGraded,

    #[error("algebra is not nilpotent")]
    NotNilpotent,

    #[error("nilpotency step {step} exceeds the supported ceiling {ceiling}")]
    StepTooLarge { step: usize, ceiling: usize },

    #[error("dilation by {0} is not exactly representable")]
    InexactDilation(String),

    #[error("not an automorphism: {0}")]
    NotAutomorphism(String),

    #[error("algebra is of Carnot type: the first-layer subalgebra is everything")]
    CarnotType,

    #[error("first-layer subalgebra is not an ideal")]
    FirstLayerNotIdeal,

    #[error("quotient is not Carnot: {0}")]
    QuotientNotCarnot(String),

    #[error("induced derivation is not a multiple of the Carnot derivation: {0}")]
    NotCarnotMultiple(String),

    #[error("derivation weights must be positive")]
    NonPositiveWeights,

    #[error("algebra is not Carnot: {0}")]
    NotCarnot(String),

    #[error("horizontal path missed its target: residual {residual:e}, tolerance {tol:e}")]
    PathTolerance { residual: f64, tol: f64 },

    #[error("integrand leaves Z_{layer}: residual {residual:e}")]
    EscapesCenter { layer: usize, residual: f64 },

    #[error("lift of layer {layer} is path dependent: discrepancy {discrepancy:e}")]
    PathDependence { layer: usize, discrepancy: f64 },

    #[error("component on layer {0}, but Z_{0} is trivial")]
    EmptyCenterLayer(usize),

    #[error("base component on layer {layer} is not below alpha = {alpha}")]
    LayerAboveAlpha { layer: usize, alpha: String },

    #[error("layer {layer} fails the loop test: closed-loop integral {value:e}")]
    MembershipFailed { layer: usize, value: f64 },

    #[error("alpha = {0} is not an integer")]
    AlphaNotInteger(String),

    #[error("finite differences did not converge: spread {spread:e}")]
    NonConvergent { spread: f64 },

    #[error("unsupported factor: {0}")]
    UnsupportedFactor(String),

    #[error("not a similarity pair: {0}")]
    NotSimilarity(String),

    #[error("action is not a contraction in either direction: factor {0}")]
    NonContraction(f64),

    #[error("iteration did not converge within {0} steps")]
    MaxIterations(usize),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("unknown fixture `{0}`")]
    UnknownFixture(String),

    #[error("invalid pairing: {0}")]
    InvalidPairing(String),

    #[error("algebra file: {0}")]
    Format(String),

    #[error("evaluation failed: {0}")]
    Evaluation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("structure error: {0}")]
    Structure(String),

    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },

    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { offset: usize, name: String },

    #[error("arity error at byte {offset}: `{name}` takes exactly one argument")]
    Arity { offset: usize, name: String },

    #[error("evaluation error at (t={t}, x={x}): {message}")]
    Eval { t: f64, x: f64, message: String },

    #[error("ellipticity error: h = {value} below floor {floor} at (t={t}, x={x})")]
    Ellipticity { t: f64, x: f64, value: f64, floor: f64 },

    #[error("signature error: pivot {index} has value {pivot}, expected sign {expected}")]
    Signature { index: usize, pivot: f64, expected: f64 },

    #[error("inner-product error: {0}")]
    InnerProduct(String),

    #[error("self-adjointness error: residual {residual:e} exceeds {tolerance:e}")]
    SelfAdjointness { residual: f64, tolerance: f64 },

    #[error("domain error: function undefined at eigenvalue {eigenvalue}")]
    Domain { eigenvalue: f64 },

    #[error("assembly error: {0}")]
    Assembly(String),

    #[error("regularization failure: lambda {lambda} exceeded limit, min |spec| = {min_abs}")]
    Regularization { lambda: f64, min_abs: f64 },

    #[error("gap error: {0}")]
    Gap(String),

    #[error("interpolation error: {0}")]
    Interpolation(String),

    #[error("unsupported Killing field: {0}")]
    UnsupportedKilling(String),

    #[error("resolution error: {0}")]
    Resolution(String),

    #[error("off-grid time {time}")]
    OffGrid { time: f64 },

    #[error("construction error: invariant `{invariant}` residual {residual:e}")]
    Construction { invariant: String, residual: f64 },

    #[error("cross-validation error: {what} differs by {relative:e} (relative)")]
    CrossValidation { what: String, relative: f64 },
}

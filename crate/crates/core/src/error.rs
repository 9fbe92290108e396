use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("state {value} outside [0, 1]")]
    StateOutOfRange { value: f64 },

    #[error("interface coupling did not bracket a root (rho_l={rho_l}, rho_r={rho_r}, slope={slope}, mismatch={mismatch:e})")]
    InterfaceNotBracketed {
        rho_l: f64,
        rho_r: f64,
        slope: f64,
        mismatch: f64,
    },

    #[error("CFL breach in slab {slab}: turning point moved from {from} to {to}, outside ({lo}, {hi})")]
    CflViolation {
        slab: usize,
        from: f64,
        to: f64,
        lo: f64,
        hi: f64,
    },

    #[error("turning curve {xi} left the admissible range in slab {slab}: {reason}")]
    PathOutOfRange { slab: usize, xi: f64, reason: String },

    #[error("density {value:e} in cell {cell} of slab {slab} violates the maximum principle")]
    MaximumPrinciple { slab: usize, cell: usize, value: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("scenario rejected:\n{0}")]
    Validation(crate::model::ValidationReport),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

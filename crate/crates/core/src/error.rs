use num_complex::Complex64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("division by a function that is identically zero")]
    ZeroFunction,

    #[error("degenerate feedback: 1 - a(s)b(s) is identically zero")]
    DegenerateFeedback,

    #[error("evaluation point {s} is within {distance:.3e} of a pole")]
    NearPole { s: Complex64, distance: f64 },

    #[error("cannot realize a function whose numerator degree exceeds the denominator degree by {0}")]
    ImproperRealization(usize),

    #[error("interior block of the Kron reduction is singular")]
    SingularInterior,

    #[error("stator Laplacian is singular")]
    SingularStator,

    #[error("matrix is singular")]
    SingularMatrix,

    #[error("eigenvalue iteration did not converge")]
    EigenNoConvergence,

    #[error("matrix is not positive semidefinite (smallest eigenvalue {0:.3e})")]
    NotPsd(f64),

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("the union of AC and DC lines does not connect all buses (bus {0} unreachable)")]
    Disconnected(u32),

    #[error("dc line {from}-{to} touches bus {bus}, which is not a converter bus")]
    DcLineOnMachine { from: u32, to: u32, bus: u32 },

    #[error("bus {bus}: missing parameter `{name}`")]
    MissingParam { bus: u32, name: String },

    #[error("bus {bus}: parameter `{name}` = {value} is invalid ({reason})")]
    InvalidParam {
        bus: u32,
        name: String,
        value: f64,
        reason: &'static str,
    },

    #[error("bus {bus}: unknown parameter `{name}` for kind {kind}")]
    UnknownParam { bus: u32, name: String, kind: String },

    #[error("invalid damper data: {0}")]
    InvalidDamper(String),

    #[error("bus {bus}: cannot realize bus dynamics ({reason})")]
    ImproperBus { bus: u32, reason: String },

    #[error("algebraic loop through buses {buses:?}: feedthrough matrix is singular")]
    AlgebraicLoop { buses: Vec<u32> },

    #[error("simulation diverged at t = {t:.4} s on bus {bus} (|value| = {value:.3e})")]
    SimulationDiverged { t: f64, bus: u32, value: f64 },

    #[error("{0}")]
    InvalidArgument(String),

    #[error("case file error: {0}")]
    Case(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

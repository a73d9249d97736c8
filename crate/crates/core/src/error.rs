use thiserror::Error;

/// Errors raised across the estimation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("logarithm is ill-conditioned: rotation angle {angle} is too close to pi")]
    IllConditionedLog { angle: f64 },

    #[error("inverse left Jacobian is ill-conditioned: rotation angle {angle} is too close to 2*pi")]
    IllConditionedJacobian { angle: f64 },

    #[error("query {value} lies outside the domain [{lower}, {upper}]")]
    Domain { value: f64, lower: f64, upper: f64 },

    #[error("input samples do not cover the interval [{start}, {end}]")]
    Coverage { start: f64, end: f64 },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("invalid input profile: {0}")]
    InvalidProfile(String),

    #[error("invalid hyperparameter: {0}")]
    Hyperparameter(String),

    #[error("local chart violated: rotation angle {angle} of the local pose reached pi; subdivide the interval")]
    IntervalTooLong { angle: f64 },

    #[error("singular measurement geometry: {0}")]
    SingularGeometry(String),

    #[error("factor wiring error: {0}")]
    Wiring(String),

    #[error("degenerate factor: {0}")]
    DegenerateFactor(String),

    #[error("normal equations are singular (unconstrained gauge freedom near node {node})")]
    GaugeFreedom { node: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

/// Failures raised by the numerical kernels.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("affine scale factor is zero")]
    ZeroScale,
    #[error("least-squares system is rank deficient (condition {condition:.3e})")]
    RankDeficient { condition: f64 },
    #[error("fit residual {residual:.3e} exceeds tolerance {tol:.3e}")]
    FitResidualTooLarge { residual: f64, tol: f64 },
    #[error("newton iteration did not converge after {iterations} steps")]
    NoConvergence { iterations: usize },
    #[error("derivative vanished at t = {at}")]
    DerivativeVanishes { at: f64 },
    #[error("invalid polynomial: {0}")]
    InvalidPoly(String),
    #[error("invalid domain box: {0}")]
    InvalidDomain(String),
    #[error("implicit solve failed at ({x}, {u})")]
    ImplicitSolveFailed { x: f64, u: f64 },
    #[error("generating function violates the map class: {0}")]
    NotInClass(String),
    #[error("coordinate change singular: 1 + 2tx <= 0 at x = {x}")]
    SingularChange { x: f64 },
    #[error("no period-2 point in the search range")]
    NoPeriod2,
    #[error("period-2 candidate at x = {p} is a fixed point")]
    DegenerateOrbit { p: f64 },
    #[error("no on-axis period-4 pair next to the period-2 point")]
    NoPeriod4,
    #[error("twist of F^2 at the period-2 point is degenerate ({m12:.3e})")]
    TwistDegenerate { m12: f64 },
    #[error("scalings have the wrong sign (lambda = {lambda}, mu = {mu})")]
    WrongSign { lambda: f64, mu: f64 },
    #[error("midpoint solve failed at ({x}, {x2})")]
    MidpointSolveFailed { x: f64, x2: f64 },
    #[error("F^2 loses the twist condition at ({x}, {x2})")]
    TwistLoss { x: f64, x2: f64 },
    #[error("fixed-point newton diverged (residual {residual:.3e})")]
    NewtonDiverged { residual: f64 },
    #[error("fixed-point jacobian is singular")]
    JacobianSingular,
    #[error("eigen residual {residual:.3e} exceeds threshold")]
    IllConditioned { residual: f64 },
    #[error("cascade lost at level {level}")]
    CascadeLost { level: usize },
    #[error("base pieces rejected: {0}")]
    ContainmentFailed(String),
    #[error("tower depth {have} is below the required {need}")]
    TowerTooShallow { have: usize, need: usize },
    #[error("nesting violated for word {word}")]
    NestingViolation { word: String },
    #[error("pieces {word} and {other} overlap")]
    DisjointnessViolation { word: String, other: String },
    #[error("permutation violated for word {word}")]
    PermutationViolation { word: String },
    #[error("point is not in piece {word}")]
    PieceMismatch { word: String },
    #[error("condition theta2 * nu < theta1 fails ({lhs:.4} >= {rhs:.4})")]
    ConditionViolated { lhs: f64, rhs: f64 },
    #[error("need pairs across at least {need} scales, got {have}")]
    InsufficientScales { have: usize, need: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

use crate::optics::AbsorberMode;
use crate::quantum::Subsystem;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("subsystem collision: {0:?} appears in both operands")]
    SubsystemCollision(Subsystem),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("basis mismatch between operands")]
    BasisMismatch,
    #[error("non-finite amplitude or matrix entry")]
    NonFinite,
    #[error("operator is not unitary (max deviation {0:e})")]
    NotUnitary(f64),
    #[error("operator is not a projector (max deviation {0:e})")]
    NotProjector(f64),
    #[error("operator is not hermitian (max deviation {0:e})")]
    NotHermitian(f64),
    #[error("state is not normalized (norm squared {0})")]
    NotNormalized(f64),
    #[error("invalid density matrix: {0}")]
    InvalidDensity(String),
    #[error("invalid subsystem selection: {0}")]
    InvalidSelection(String),
    #[error("impossible outcome: requested outcome has probability zero")]
    ImpossibleOutcome,
    #[error("projector set is not complete (max deviation from identity {0:e})")]
    IncompleteProjectors(f64),
    #[error("{name} = {value} is outside {range}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        range: &'static str,
    },
    #[error("absorber mode mismatch: operation requires {expected:?}")]
    ModeMismatch { expected: AbsorberMode },
    #[error("undefined duality: both amplitudes are zero")]
    UndefinedDuality,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("pattern has zero total weight")]
    ZeroTotal,
    #[error("trial {trial}: outcome {position} lies outside the histogram range")]
    OutsideHistogram { trial: u64, position: f64 },
    #[error("trial {trial}: outcome has no screen or detector position")]
    NoPosition { trial: u64 },
    #[error("under-resolved fringes: {bins_per_period:.2} bins per period (need at least 3)")]
    UnderResolvedFringes { bins_per_period: f64 },
    #[error("domain does not contain a full fringe period")]
    NoFullPeriod,
    #[error("incompatible binning: {0}")]
    IncompatibleBinning(String),
    #[error("invalid histogram: {0}")]
    InvalidHistogram(String),
}

pub(crate) fn check_range(
    name: &'static str,
    value: f64,
    range: &'static str,
    ok: bool,
) -> Result<()> {
    if ok && value.is_finite() {
        Ok(())
    } else {
        Err(Error::OutOfRange { name, value, range })
    }
}

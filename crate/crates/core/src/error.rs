use thiserror::Error;

use crate::accountability::AccountabilityError;
use crate::cohort::CohortError;
use crate::design::DesignError;
use crate::io::IoError;
use crate::numerics::NumericsError;
use crate::synth::SynthError;
use crate::valueadded::ValueAddedError;

/// Any failure raised by the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Cohort(#[from] CohortError),
    #[error(transparent)]
    Design(#[from] DesignError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    ValueAdded(#[from] ValueAddedError),
    #[error(transparent)]
    Accountability(#[from] AccountabilityError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Io(#[from] IoError),
}

impl Error {
    /// Failure of the numerical machinery rather than of the input data.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Numerics(_) => true,
            Error::ValueAdded(e) => matches!(
                e,
                ValueAddedError::Numerics(_) | ValueAddedError::InvalidSd(_) | ValueAddedError::DegenerateWithin
            ),
            Error::Accountability(AccountabilityError::Numerics(_)) => true,
            Error::Synth(SynthError::Infeasible(_)) => true,
            _ => false,
        }
    }
}

"""Order-by-order work, heat and coherence for weakly driven quantum systems."""

from .core import DriveSpec, SystemSpec, TimeGrid, ValidatedSystem, eigendecompose, validate_system
from .dyson import (
    INDEPENDENT,
    MODES,
    PAPER_PRINTED,
    first_order_amplitudes,
    rho_first_order,
    rho_second_order,
    transition_probabilities,
)
from .errors import (
    ConfigParse,
    ContinuityLoss,
    DegenerateBasisAmbiguity,
    GridMismatch,
    GridTooCoarse,
    IoFailure,
    NonHermitian,
    NonPositiveTemperature,
    NonRealResult,
    NotDensityMatrix,
    NotDiagonalInDeclaredBasis,
    NotTwoLevel,
    NumericalError,
    OutOfTable,
    PertThermoError,
    ResonantInput,
    StepUnstable,
    ValidationError,
)
from .thermo import LedgerSeries, first_law_ledger, perturbative_ledger

__version__ = "0.1.0"

"""Dressed-state analysis of optical column-density measurements.

For a closed multi-level atom driven by several lasers, compute the dressed
state reached by adiabatic switch-on, the phase shift it imprints on each
laser, the shot-noise-limited SNR of measuring that phase, and the two-level
bound on that SNR at the same spontaneous-emission rate.
"""

from .dressed import DressedState, ManifoldHamiltonian, build_hamiltonian, track_dressed_state
from .exceptions import (
    DegenerateBareState,
    DressedLimitError,
    OpenManifold,
    SchemeError,
    TrackingLost,
)
from .manifold import ManifoldMap, analyze_manifold, classify_shared_states
from .observables import (
    ObservableReport,
    analyze,
    bound,
    coherences,
    destruction,
    phase_shift,
    snr,
    snr_power_form,
)
from .scheme import (
    Laser,
    Level,
    LevelScheme,
    MeasurementContext,
    Transition,
    cross_section,
    load_scheme,
    parse_scheme,
    validate_scheme,
)

__version__ = "0.1.0"

"""Linear spectroscopy of an inhomogeneously broadened spin ensemble in a lossy cavity.

Modules
-------
model       system description, coupling densities, sampling and moments
levelshift  the level-shift function on both Riemann sheets
spectral    exact eigenmodes of discrete ensembles
response    propagators, spectra and time-domain dynamics
poles       complex poles, regimes and asymptotic expansions
inversion   level shift and density recovered from spectra
cli         command-line front end
"""
__version__ = "0.1.0"

from ._backend import name as backend
from .errors import ConvergenceError, InvalidInput, NoSteadyState, SingularPoint, SpinCavityError
from .levelshift import LevelShift, memory_kernel
from .model import (
    CavitySpec,
    Discrete,
    Ensemble,
    Gaussian,
    Lorentzian,
    MomentSet,
    SpinSpec,
    Tabulated,
    build_ensemble,
    ensemble_from_arrays,
    from_json,
    merge_degenerate,
    moment_set,
    sample_ensemble,
    to_json,
)
from .poles import (
    asymptotic_poles,
    classify_regime,
    find_poles,
    gap_shift,
    lorentzian_poles,
    principal_pair,
    splitting_onset,
    track_poles,
)
from .response import (
    DriveSpec,
    closed_form_green,
    dressed_leakage,
    excitation_distribution,
    green_time,
    propagator,
    spectrogram,
    spectrum,
    steady_state,
)
from .spectral import classify_mode, eigenmodes, interlacing_check
from .inversion import (
    MeasuredSpectrum,
    density_from_levelshift,
    levelshift_from_chi,
    levelshift_from_transmissivity,
)

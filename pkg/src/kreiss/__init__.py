"""Kreiss constants, transient growth and transient-growth mitigating
controller synthesis."""

from .errors import (
    DimensionError,
    DivergenceError,
    InfeasibleError,
    KreissError,
    NonConvergenceError,
    NoThresholdError,
    NotHurwitzError,
    NumericalFailure,
    ParseError,
    StationarityReport,
    WellPosednessError,
)
from .matcore import expm, imaginary_axis_crossings, solve_lyapunov
from .sysmodel import (
    Controller,
    ProjectionJ,
    StateSpace,
    TwoPortPlant,
    augment,
    build_kreiss_plant,
    close_loop,
    star,
)
from .transient import (
    EpsProfile,
    KreissReport,
    TransientProfile,
    h2_norm,
    hinf_norm,
    kreiss_constant,
    kreiss_via_eps,
    numerical_abscissa,
    pseudospectral_abscissa,
    spectral_abscissa,
    transient_growth,
    worst_case_energy,
)

__version__ = "0.1.0"

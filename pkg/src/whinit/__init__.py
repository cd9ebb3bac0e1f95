"""Initial estimates for Wiener-Hammerstein models from phase-coupled
multisine experiments.

Workflow: design a phase-coupled multisine (:mod:`whinit.signals`),
measure or simulate the system (:mod:`whinit.wh_sim`), estimate the plain
and shifted frequency responses (:mod:`whinit.frf`), fit rational models
with real and complex coefficients (:mod:`whinit.rational_fit`), and
split the poles/zeros into the input and output blocks
(:mod:`whinit.decompose`).  The ``whinit`` CLI binds the stages into a
reproducible pipeline.
"""

from ._kernels import BACKEND as KERNEL_BACKEND
from .decompose import (
    AssignmentReport,
    InitialWhEstimate,
    RootLabel,
    assign_roots,
    build_initial_blocks,
    estimate_nonlinearity,
)
from .frf import (
    DominanceReport,
    FrfEstimate,
    Spectrum,
    TimeOriginEstimate,
    dft,
    dominance_report,
    estimate_bla,
    estimate_shifted_bla,
    idft,
    predict_sbla_minus,
    predict_shifted_bla,
)
from .rational_fit import (
    ComplexRationalTF,
    FitResult,
    RationalFitError,
    fit_complex_tf,
    fit_real_tf,
    roots_and_gain,
)
from .signals import (
    Coupling,
    FrequencyGrid,
    MultisineSpec,
    PeakAbs,
    Rms,
    SignalKind,
    SignalRealization,
    design_multisine,
    realize,
    shift_time_origin,
)
from .wh_sim import (
    NoiseSpec,
    PolynomialNonlinearity,
    RationalTF,
    SimRecord,
    TransientError,
    WhModel,
    filter_lti,
    output_spectrum_oracle,
    simulate,
)

__version__ = "0.1.0"

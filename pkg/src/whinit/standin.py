"""Reference synthetic system and excitation designs used by the examples,
the CLI configs and the test suite.

The system is a discrete-time stand-in for a nonlinear lab circuit: a
third-order Chebyshev-style ripple low-pass input block (all-pole), a
smooth diode-like polynomial, and a third-order output block with an
in-band transmission-zero pair on the unit circle.  Coefficients are
frozen literals so results are reproducible independent of any filter
design library.
"""

from __future__ import annotations

import numpy as np

from .signals import FrequencyGrid, MultisineSpec, SignalKind, design_multisine
from .wh_sim import PolynomialNonlinearity, RationalTF, WhModel

__all__ = [
    "SAMPLE_RATE_HZ",
    "standin_model",
    "standin_spec",
    "standin_bla_spec",
]

SAMPLE_RATE_HZ = 78125.0

# input block: unit-DC-gain all-pole low-pass with a rippled passband;
# real pole at 0.92, resonant pair at 0.90 exp(+-j 35 deg)
_R_NUM = [0.02684210562238487]
_R_DEN = [1.0, -2.3944736797201855, 2.1665157853425705, -0.7452000000000001]

# output block: unit-DC-gain low-pass with a transmission-zero pair on the
# unit circle at +-28 deg (in-band) and a real zero at -1; real pole at
# 0.88, pair at 0.95 exp(+-j 6.5 deg)
_S_NUM = [
    0.0037709965750846917,
    -0.0028881881222158814,
    -0.002888188122215881,
    0.0037709965750846917,
]
_S_DEN = [1.0, -2.767786525785516, 2.5637521426912535, -0.7941999999999998]

# smooth diode-like polynomial
_F_COEFFS = [0.0, 1.0, 0.25, 0.125]


def standin_model(f_coeffs=None) -> WhModel:
    """The reference Wiener-Hammerstein system (optionally with another polynomial)."""
    return WhModel(
        r=RationalTF(np.array(_R_NUM), np.array(_R_DEN)),
        f=PolynomialNonlinearity(np.array(_F_COEFFS if f_coeffs is None else f_coeffs)),
        s=RationalTF(np.array(_S_NUM), np.array(_S_DEN)),
    )


def standin_spec(
    n_samples: int = 8192,
    sample_rate: float = SAMPLE_RATE_HZ,
    d: int = 10,
    c_shift: int = 24,
    i_max: int | None = 111,
) -> MultisineSpec:
    """Odd phase-coupled design matching the reference experiment.

    Defaults give s = 242 and 224 excited lines on the 8192-sample grid.
    For other grids pass ``i_max=None`` to take the alias-safe maximum.
    """
    return design_multisine(
        SignalKind.ODD_COUPLED,
        FrequencyGrid(n_samples, sample_rate),
        d=d,
        c_shift=c_shift,
        i_max=i_max,
    )


def standin_bla_spec(
    n_samples: int = 8192,
    sample_rate: float = SAMPLE_RATE_HZ,
    n_lines: int = 682,
    f_min: float = 19.0,
    f_max: float = 13800.0,
) -> MultisineSpec:
    """Flat random-phase design for measuring the plain response estimate."""
    grid = FrequencyGrid(n_samples, sample_rate)
    k_min = max(1, int(np.ceil(grid.line_of_freq(f_min))))
    k_max = min(grid.nyquist_line, int(np.floor(grid.line_of_freq(f_max))))
    lines = np.unique(np.round(np.linspace(k_min, k_max, n_lines)).astype(int))
    return design_multisine(SignalKind.RANDOM_PHASE, grid, lines=lines)

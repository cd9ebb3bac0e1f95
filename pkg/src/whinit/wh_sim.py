"""Steady-state simulation of discrete-time Wiener-Hammerstein systems.

The system is the cascade x = R(q) u, w = f(x), y = S(q) w + v with two
stable rational blocks and a static polynomial nonlinearity.  Simulation
runs the difference equations over a number of discarded warm-up periods
and checks that the retained periods are in steady state.  A brute-force
frequency-domain oracle for the output spectrum of pure power
nonlinearities is included for testing the FFT-based path.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as npoly

from . import _kernels
from .signals import SignalRealization

__all__ = [
    "RationalTF",
    "PolynomialNonlinearity",
    "WhModel",
    "NoiseSpec",
    "SimRecord",
    "TransientError",
    "filter_lti",
    "simulate",
    "output_spectrum_oracle",
    "output_spectrum_total",
]

ORACLE_TERM_GUARD = 10**9


class TransientError(RuntimeError):
    """Raised when the retained periods are not in steady state."""


@dataclass(frozen=True)
class RationalTF:
    """Rational transfer function b(q)/a(q) in the backward shift q^-1.

    Coefficients are stored in ascending powers of q^-1 and normalized so
    a_0 = 1.  Construction rejects unstable denominators unless
    ``enforce_stability`` is disabled (fit results may be inspected even
    when unstable, but cannot be simulated).
    """

    num: np.ndarray
    den: np.ndarray = field(default_factory=lambda: np.array([1.0]))
    enforce_stability: bool = True

    def __post_init__(self):
        num = np.atleast_1d(np.asarray(self.num, dtype=float))
        den = np.atleast_1d(np.asarray(self.den, dtype=float))
        if den.size == 0 or num.size == 0:
            raise ValueError("empty coefficient array")
        if den[0] == 0:
            raise ValueError("a_0 must be nonzero")
        num = num / den[0]
        den = den / den[0]
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "den", den)
        if self.enforce_stability and not self.is_stable:
            raise ValueError(f"unstable transfer function, pole radii {np.abs(self.poles())}")

    @classmethod
    def identity(cls) -> "RationalTF":
        return cls(num=np.array([1.0]))

    @classmethod
    def delay(cls, k: int = 1) -> "RationalTF":
        num = np.zeros(k + 1)
        num[k] = 1.0
        return cls(num=num)

    def poles(self) -> np.ndarray:
        if self.den.size < 2:
            return np.array([], dtype=complex)
        return np.roots(self.den)

    def zeros(self) -> np.ndarray:
        num = np.trim_zeros(self.num, "b")
        if num.size < 2:
            return np.array([], dtype=complex)
        return np.roots(num)

    @property
    def is_stable(self) -> bool:
        poles = self.poles()
        return poles.size == 0 or bool(np.max(np.abs(poles)) < 1.0)

    def dc_gain(self) -> float:
        return float(np.sum(self.num) / np.sum(self.den))

    def freq_response(self, lines, n_samples: int) -> np.ndarray:
        """Evaluate at z = e^{j 2 pi k / N} for integer (or real) lines k."""
        zinv = np.exp(-2j * np.pi * np.asarray(lines, dtype=float) / n_samples)
        return npoly.polyval(zinv, self.num) / npoly.polyval(zinv, self.den)


@dataclass(frozen=True)
class PolynomialNonlinearity:
    """Static polynomial f(x) = sum_d coeffs[d] * x**d."""

    coeffs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "coeffs", np.atleast_1d(np.asarray(self.coeffs, dtype=float)))

    def __call__(self, x):
        return npoly.polyval(np.asarray(x), self.coeffs)

    @property
    def degree(self) -> int:
        nz = np.flatnonzero(self.coeffs)
        return int(nz[-1]) if nz.size else 0

    @property
    def has_odd_nonlinear_term(self) -> bool:
        """True when some odd-degree coefficient of degree >= 3 is nonzero."""
        c = self.coeffs
        return bool(np.any(c[3::2] != 0.0))

    def odd_terms(self) -> list[tuple[int, float]]:
        return [(d, float(c)) for d, c in enumerate(self.coeffs) if d % 2 == 1 and d >= 3 and c != 0.0]


@dataclass(frozen=True)
class WhModel:
    """Wiener-Hammerstein triple: input block, static polynomial, output block."""

    r: RationalTF
    f: PolynomialNonlinearity
    s: RationalTF


@dataclass(frozen=True)
class NoiseSpec:
    """Additive zero-mean output noise: white, optionally shaped by a stable filter."""

    variance: float
    shaping: RationalTF | None = None

    def __post_init__(self):
        if self.variance < 0:
            raise ValueError("noise variance must be nonnegative")
        if self.shaping is not None and not self.shaping.is_stable:
            raise ValueError("noise shaping filter must be stable")


@dataclass(frozen=True)
class SimRecord:
    """Retained steady-state samples of one simulation run.

    ``x`` and ``w`` are the internal signals before and after the
    nonlinearity; estimators must only look at ``u`` and ``y``.
    """

    u: np.ndarray
    y: np.ndarray
    x: np.ndarray
    w: np.ndarray
    n_period_samples: int
    n_periods: int

    def periods(self, which: str = "y") -> np.ndarray:
        arr = getattr(self, which)
        return arr.reshape(self.n_periods, self.n_period_samples)


def filter_lti(tf: RationalTF, x) -> np.ndarray:
    """Run the difference equation of ``tf`` over ``x`` with zero initial state."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    return _kernels.iir_filter(
        np.ascontiguousarray(tf.num), np.ascontiguousarray(tf.den), x
    )


def _shaped_noise_gain(shaping: RationalTF, n_probe: int = 1 << 14) -> float:
    """Standard deviation gain of the shaping filter (sqrt of its energy)."""
    impulse = np.zeros(n_probe)
    impulse[0] = 1.0
    h = filter_lti(shaping, impulse)
    tail = np.max(np.abs(h[-16:]))
    if tail > 1e-9 * np.max(np.abs(h)):
        raise ValueError("shaping filter impulse response decays too slowly")
    return float(np.sqrt(np.sum(h**2)))


def simulate(
    model: WhModel,
    u: SignalRealization | np.ndarray,
    n_periods: int = 2,
    discard_periods: int = 1,
    noise: NoiseSpec | None = None,
    seed: int | None = None,
    n_period_samples: int | None = None,
    transient_tol: float = 1e-9,
) -> SimRecord:
    """Simulate the cascade in steady state.

    The input period is tiled ``discard_periods + n_periods`` times, the
    chain is run from zero initial conditions and the first periods are
    dropped.  The noise-free output of the last discarded period must
    agree with the first retained one to within ``transient_tol`` times
    the output rms, otherwise a :class:`TransientError` asks for more
    discard periods.  Noise is generated from ``seed`` over the retained
    samples only.
    """
    if discard_periods < 1:
        raise ValueError("discard_periods must be >= 1")
    if n_periods < 1:
        raise ValueError("n_periods must be >= 1")

    if isinstance(u, SignalRealization):
        n = u.spec.grid.n_samples
        period = u.period
    else:
        if n_period_samples is None:
            raise ValueError("n_period_samples is required for a raw input array")
        n = int(n_period_samples)
        period = np.asarray(u, dtype=float)[:n]
        if period.size != n:
            raise ValueError("input shorter than one period")

    # with a single discard period the startup transient sits at the head of
    # period 0, so the decay check must compare consecutive later periods;
    # simulate one extra period when only one is retained
    extra = 1 if (discard_periods == 1 and n_periods == 1) else 0
    drive = np.tile(period, discard_periods + n_periods + extra)
    x = filter_lti(model.r, drive)
    w = model.f(x)
    y_clean = filter_lti(model.s, w)

    check_at = discard_periods - 1 if discard_periods >= 2 else discard_periods
    ref = y_clean[check_at * n : (check_at + 1) * n]
    nxt = y_clean[(check_at + 1) * n : (check_at + 2) * n]
    scale = np.sqrt(np.mean(nxt**2))
    dev = np.max(np.abs(nxt - ref))
    if dev > transient_tol * max(scale, 1e-300):
        raise TransientError(
            f"transient not decayed: inter-period deviation {dev:.3e} exceeds "
            f"{transient_tol:.1e} * rms(y); increase discard_periods"
        )

    keep = slice(discard_periods * n, (discard_periods + n_periods) * n)
    y = y_clean[keep].copy()
    if noise is not None and noise.variance > 0.0:
        rng = np.random.default_rng(seed)
        e = rng.standard_normal(y.size)
        if noise.shaping is not None:
            e = filter_lti(noise.shaping, e) / _shaped_noise_gain(noise.shaping)
        y += np.sqrt(noise.variance) * e

    return SimRecord(
        u=drive[keep].copy(),
        y=y,
        x=x[keep].copy(),
        w=np.asarray(w[keep]).copy(),
        n_period_samples=n,
        n_periods=n_periods,
    )


def output_spectrum_oracle(model: WhModel, u_spectrum: np.ndarray, degree: int) -> np.ndarray:
    """Output spectrum of the cascade with a pure ``x**degree`` nonlinearity.

    ``u_spectrum`` is the unitary DFT of one input period in FFT bin
    order; the result is Y_degree(k) in the same order, computed by the
    explicit degree-fold convolution sum

        Y_D(k) = N^{-(D-1)/2} S(k) sum_{l_1+...+l_D = k (mod N)} prod_i R(l_i) U(l_i)

    which is independent of the time-domain simulation path.  Guarded to
    N**degree <= 1e9 summation terms.
    """
    u_spectrum = np.asarray(u_spectrum, dtype=complex)
    n = u_spectrum.size
    if degree < 1:
        raise ValueError("degree must be >= 1")
    if float(n) ** degree > ORACLE_TERM_GUARD:
        raise ValueError(
            f"direct sum too large: N**D = {float(n)**degree:.3e} exceeds {ORACLE_TERM_GUARD:.0e}"
        )
    bins = np.fft.fftfreq(n, d=1.0 / n).round().astype(int)  # bin -> signed line
    x_spec = model.r.freq_response(bins, n) * u_spectrum
    conv = _kernels.spectral_selfconv(np.ascontiguousarray(x_spec), degree)
    s_resp = model.s.freq_response(bins, n)
    return s_resp * conv / np.sqrt(n) ** (degree - 1)


def output_spectrum_total(model: WhModel, u_spectrum: np.ndarray) -> np.ndarray:
    """Noise-free output spectrum summed over all polynomial degrees.

    The constant term contributes gamma_0 * S(0) * sqrt(N) at bin 0.
    """
    u_spectrum = np.asarray(u_spectrum, dtype=complex)
    n = u_spectrum.size
    total = np.zeros(n, dtype=complex)
    coeffs = model.f.coeffs
    if coeffs[0] != 0.0:
        total[0] = coeffs[0] * model.s.freq_response(0, n) * np.sqrt(n)
    for d in range(1, coeffs.size):
        if coeffs[d] != 0.0:
            total += coeffs[d] * output_spectrum_oracle(model, u_spectrum, d)
    return total

"""Multisine excitation design and realization.

A multisine is a periodic signal u(t) = sum_k U_k exp(j 2 pi k t / N) over
the symmetric line set k = -N/2+1 ... N/2, with U_k = conj(U_{-k}).  Three
kinds are supported:

* random-phase: every excited line gets an independent uniform phase;
* full phase-coupled: excitation on the line pairs (m, m+s) with
  m = d/2 + d*i, s = c_shift*d + 1, d even >= 4, both lines of a pair
  sharing one random phase;
* odd phase-coupled: same pairing with d/2 odd >= 5 and s = c_shift*d + 2,
  so that only odd lines are excited.

The coupled designs keep the collection lines m - s and m + 2s free of
excitation, which is what makes the shifted response estimates in
:mod:`whinit.frf` usable.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Mapping, NamedTuple, Sequence

import numpy as np

__all__ = [
    "SignalKind",
    "FrequencyGrid",
    "Coupling",
    "MultisineSpec",
    "SignalRealization",
    "Rms",
    "PeakAbs",
    "design_multisine",
    "realize",
    "shift_time_origin",
]


class SignalKind(str, Enum):
    RANDOM_PHASE = "random-phase"
    FULL_COUPLED = "full-coupled"
    ODD_COUPLED = "odd-coupled"

    @property
    def is_coupled(self) -> bool:
        return self is not SignalKind.RANDOM_PHASE


@dataclass(frozen=True)
class FrequencyGrid:
    """DFT grid: N samples per period at a given sample rate."""

    n_samples: int
    sample_rate: float = 1.0

    def __post_init__(self):
        if self.n_samples <= 0 or self.n_samples % 2 != 0:
            raise ValueError(f"n_samples must be a positive even integer, got {self.n_samples}")
        if self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")

    @property
    def nyquist_line(self) -> int:
        return self.n_samples // 2

    def freq_hz(self, lines):
        return np.asarray(lines) * self.sample_rate / self.n_samples

    def line_of_freq(self, f_hz: float) -> float:
        return f_hz * self.n_samples / self.sample_rate


@dataclass(frozen=True)
class Coupling:
    """Line-pairing parameters of a phase-coupled multisine."""

    d: int
    c_shift: int
    s: int
    i_max: int


class Rms(NamedTuple):
    """Scale the realization to a target rms level (common gain)."""

    target: float


class PeakAbs(NamedTuple):
    """Scale the realization to a target peak |u(t)| (common gain)."""

    target: float


@dataclass(frozen=True)
class MultisineSpec:
    """Frequency-domain description of a multisine excitation.

    ``amplitudes[i]`` is the Fourier-series coefficient magnitude |U_k| of
    ``excited_lines[i]`` (so the DFT magnitude at that line is sqrt(N)
    times larger).
    """

    grid: FrequencyGrid
    kind: SignalKind
    excited_lines: tuple[int, ...]
    amplitudes: tuple[float, ...]
    coupling: Coupling | None = None

    def __post_init__(self):
        n2 = self.grid.nyquist_line
        lines = np.asarray(self.excited_lines, dtype=int)
        if lines.size == 0:
            raise ValueError("excited line set is empty")
        if len(self.amplitudes) != lines.size:
            raise ValueError("amplitudes and excited_lines must have equal length")
        if np.any(lines <= 0) or np.any(lines > n2):
            raise ValueError("excited lines must satisfy 0 < k <= N/2")
        if len(set(self.excited_lines)) != lines.size:
            raise ValueError("excited lines must be unique")
        if any(a < 0 for a in self.amplitudes):
            raise ValueError("amplitudes must be nonnegative")
        if self.kind.is_coupled:
            if self.coupling is None:
                raise ValueError("phase-coupled spec requires coupling parameters")
            self._check_coupled_pattern()
        elif self.coupling is not None:
            raise ValueError("coupling parameters are only valid for phase-coupled kinds")

    def _check_coupled_pattern(self):
        c = self.coupling
        _validate_coupling(self.kind, c.d, c.c_shift)
        expected_s = c.c_shift * c.d + (1 if self.kind is SignalKind.FULL_COUPLED else 2)
        if c.s != expected_s:
            raise ValueError(f"s must equal {expected_s} for this kind, got {c.s}")
        m = self.m_lines
        expected = np.sort(np.concatenate([m, m + c.s]))
        if not np.array_equal(np.sort(self.excited_lines), expected):
            raise ValueError("excited lines do not match the coupled line pattern")
        n2 = self.grid.nyquist_line
        if expected[-1] + 2 * c.s > n2:
            raise ValueError(
                f"max excited line + 2s = {expected[-1] + 2 * c.s} exceeds N/2 = {n2}"
            )
        excited = set(self.excited_lines)
        forbidden = set((m - c.s).tolist()) | set((m + 2 * c.s).tolist())
        overlap = excited & forbidden
        if overlap:
            raise ValueError(f"excitation present on collection lines {sorted(overlap)}")

    @property
    def m_lines(self) -> np.ndarray:
        """First line of every couple: d/2 + d*i for i = 0 ... i_max."""
        if self.coupling is None:
            raise ValueError("m_lines is only defined for phase-coupled specs")
        c = self.coupling
        return c.d // 2 + c.d * np.arange(c.i_max + 1)

    @property
    def couples(self) -> np.ndarray:
        """(i_max+1, 2) array of coupled line pairs (m, m+s)."""
        m = self.m_lines
        return np.column_stack([m, m + self.coupling.s])

    def amplitude_of(self, lines) -> np.ndarray:
        table = dict(zip(self.excited_lines, self.amplitudes))
        return np.asarray([table[int(k)] for k in np.atleast_1d(lines)], dtype=float)


@dataclass(frozen=True)
class SignalRealization:
    """One phase draw of a multisine, realized as a periodic time series."""

    spec: MultisineSpec
    seed: int
    phases: Mapping[int, float]        # keyed by line (couples share a value)
    time_series: np.ndarray            # length n_periods * N, exactly periodic
    fourier_coeffs: np.ndarray         # U_k on lines -N/2+1 ... N/2
    n_periods: int
    amplitude_scale: float = 1.0       # common gain applied by the scaling rule

    @property
    def period(self) -> np.ndarray:
        return self.time_series[: self.spec.grid.n_samples]

    def scaled_amplitudes(self) -> np.ndarray:
        return np.asarray(self.spec.amplitudes) * self.amplitude_scale


def _validate_coupling(kind: SignalKind, d: int, c_shift: int):
    if c_shift <= 0 or int(c_shift) != c_shift:
        raise ValueError(f"c_shift must be a positive integer, got {c_shift}")
    if d % 2 != 0:
        raise ValueError(f"d must be even, got {d}")
    if kind is SignalKind.FULL_COUPLED and d < 4:
        raise ValueError(f"full phase-coupled multisine needs d >= 4, got {d}")
    if kind is SignalKind.ODD_COUPLED:
        half = d // 2
        if half < 5 or half % 2 == 0:
            raise ValueError(f"odd phase-coupled multisine needs d/2 odd and >= 5, got d = {d}")


def _shift_of(kind: SignalKind, d: int, c_shift: int) -> int:
    return c_shift * d + (1 if kind is SignalKind.FULL_COUPLED else 2)


def _resolve_amplitudes(lines: np.ndarray, profile, grid: FrequencyGrid) -> np.ndarray:
    flat = 1.0 / np.sqrt(grid.n_samples)
    if profile is None:
        return np.full(lines.size, flat)
    if np.isscalar(profile):
        return np.full(lines.size, float(profile))
    if isinstance(profile, Mapping):
        try:
            return np.asarray([float(profile[int(k)]) for k in lines])
        except KeyError as exc:
            raise ValueError(f"amplitude profile missing line {exc}") from None
    if callable(profile):
        return np.asarray([float(profile(f)) for f in grid.freq_hz(lines)])
    raise TypeError("amplitude_profile must be None, a scalar, a mapping or a callable")


def design_multisine(
    kind: SignalKind | str,
    grid: FrequencyGrid,
    band: tuple[float, float] | None = None,
    lines: Sequence[int] | None = None,
    amplitude_profile=None,
    d: int | None = None,
    c_shift: int | None = None,
    i_max: int | None = None,
) -> MultisineSpec:
    """Design a multisine on the given grid.

    The excited band is either an explicit line set (``lines``) or a
    frequency band [f_min, f_max] in Hz (``band``); coupled kinds generate
    the (m, m+s) pattern and clip it to the band and to the grid
    (max excited line + 2s must stay at or below N/2).
    """
    kind = SignalKind(kind)
    n2 = grid.nyquist_line

    if kind is SignalKind.RANDOM_PHASE:
        if (d, c_shift, i_max) != (None, None, None):
            raise ValueError("coupling parameters are only valid for phase-coupled kinds")
        if lines is not None:
            sel = np.unique(np.asarray(lines, dtype=int))
        elif band is not None:
            lo, hi = band
            k_lo = max(1, int(np.ceil(grid.line_of_freq(lo) - 1e-9)))
            k_hi = min(n2, int(np.floor(grid.line_of_freq(hi) + 1e-9)))
            sel = np.arange(k_lo, k_hi + 1)
        else:
            raise ValueError("random-phase design needs a band or an explicit line set")
        if sel.size == 0:
            raise ValueError("band contains no grid lines")
        amps = _resolve_amplitudes(sel, amplitude_profile, grid)
        return MultisineSpec(grid, kind, tuple(int(k) for k in sel), tuple(amps))

    if d is None or c_shift is None:
        raise ValueError("phase-coupled design needs d and c_shift")
    if lines is not None:
        raise ValueError("phase-coupled lines are generated from d and c_shift, not given")
    _validate_coupling(kind, d, c_shift)
    s = _shift_of(kind, d, c_shift)

    # hard cap: the collection lines m - s and m + 2s must exist on the grid
    hard_cap = int(np.floor((n2 - 3 * s - d / 2) / d))
    # default cap: keep third-order products of the excited band on-grid
    # (3 * max excited line <= N/2), so distortion does not alias back
    alias_cap = int(np.floor((n2 / 3 - s - d / 2) / d))

    band_cap = hard_cap
    if band is not None:
        lo, hi = band
        k_lo = grid.line_of_freq(lo) - 1e-9
        k_hi = grid.line_of_freq(hi) + 1e-9
        if k_lo > d / 2:
            raise ValueError(
                f"band lower edge {lo} excludes the first couple at line {d // 2}"
            )
        band_cap = int(np.floor((k_hi - s - d / 2) / d))

    if i_max is None:
        i_max = min(hard_cap, alias_cap, band_cap)
    else:
        i_max = int(i_max)
        cap = min(hard_cap, band_cap)
        if i_max > cap:
            raise ValueError(f"i_max = {i_max} does not fit the band/grid (max {cap})")
    if i_max < 0:
        raise ValueError("no phase couple fits the requested band on this grid")
    coupling = Coupling(d=d, c_shift=c_shift, s=s, i_max=int(i_max))
    m = d // 2 + d * np.arange(int(i_max) + 1)
    sel = np.sort(np.concatenate([m, m + s]))
    amps = _resolve_amplitudes(sel, amplitude_profile, grid)
    return MultisineSpec(grid, kind, tuple(int(k) for k in sel), tuple(amps), coupling)


def realize(
    spec: MultisineSpec,
    seed: int,
    n_periods: int = 1,
    scaling: Rms | PeakAbs | None = None,
) -> SignalRealization:
    """Draw phases and synthesize the periodic time series.

    Phases are i.i.d. uniform on [0, 2pi), one draw per line for
    random-phase specs and one draw per couple for coupled specs.  The
    result is deterministic given (spec, seed).
    """
    if n_periods < 1:
        raise ValueError("n_periods must be >= 1")
    n = spec.grid.n_samples
    rng = np.random.default_rng(seed)
    lines = np.asarray(spec.excited_lines)
    amps = np.asarray(spec.amplitudes, dtype=float)

    if spec.kind.is_coupled:
        m = spec.m_lines
        draw = rng.uniform(0.0, 2.0 * np.pi, size=m.size)
        phase_map = {}
        for mi, ph in zip(m, draw):
            phase_map[int(mi)] = float(ph)
            phase_map[int(mi) + spec.coupling.s] = float(ph)
    else:
        draw = rng.uniform(0.0, 2.0 * np.pi, size=lines.size)
        phase_map = {int(k): float(ph) for k, ph in zip(lines, draw)}

    phases = np.asarray([phase_map[int(k)] for k in lines])
    coeffs_pos = amps * np.exp(1j * phases)

    # assemble U_k on FFT bins and synthesize u(t) = sum_k U_k e^{j2pi kt/N}
    bins = np.zeros(n, dtype=complex)
    bins[lines] = coeffs_pos
    bins[(-lines) % n] = np.conj(coeffs_pos)
    u = np.fft.ifft(bins * n).real

    gain = 1.0
    if isinstance(scaling, Rms):
        gain = scaling.target / np.sqrt(np.mean(u**2))
    elif isinstance(scaling, PeakAbs):
        gain = scaling.target / np.max(np.abs(u))
    elif scaling is not None:
        raise TypeError(f"unknown scaling rule {scaling!r}")
    u = u * gain

    full_lines = np.arange(-(n // 2) + 1, n // 2 + 1)
    full = np.zeros(n, dtype=complex)
    full[np.searchsorted(full_lines, lines)] = coeffs_pos * gain
    full[np.searchsorted(full_lines, -lines)] = np.conj(coeffs_pos) * gain

    return SignalRealization(
        spec=spec,
        seed=int(seed),
        phases=phase_map,
        time_series=np.tile(u, n_periods),
        fourier_coeffs=full,
        n_periods=n_periods,
        amplitude_scale=float(gain),
    )


def shift_time_origin(x: np.ndarray, delta: float) -> np.ndarray:
    """Delay one period of a periodic signal by ``delta`` samples.

    Implemented as spectral multiplication by e^{j k Delta} with
    Delta = -2 pi delta / N, so fractional delays are exact for
    band-limited content.
    """
    x = np.asarray(x, dtype=float)
    n = len(x)
    step = -2.0 * np.pi * delta / n
    k = np.arange(n // 2 + 1)
    return np.fft.irfft(np.fft.rfft(x) * np.exp(1j * k * step), n=n)

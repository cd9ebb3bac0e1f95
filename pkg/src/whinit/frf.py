"""Nonparametric frequency-response estimation for periodic experiments.

Conventions: the DFT is unitary in both directions,

    X(k) = N^{-1/2} sum_t x(t) e^{-j 2 pi k t / N},
    x(t) = N^{-1/2} sum_k X(k) e^{+j 2 pi k t / N},

with the line index running over -N/2+1 ... N/2.  The plain response
estimate averages Y(k)/U(k) per excited line over periods (noise scatter)
and over phase realizations (total scatter).  For phase-coupled
excitations the shifted estimates collect Y(k)/U(m) on the offset lines
k = m + 2s and k = -(m - s) (and conjugate lines for the + branch), where
the input-block dynamics appear rotated by the line offset s while the
output-block dynamics stay in place.  Optional time-origin compensation
removes the phase slope caused by a common (possibly fractional) record
delay.  Predictors for the expected estimates of polynomial systems and a
spectral dominance diagnostic are included.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import factorial
from typing import Sequence

import numpy as np

from .signals import FrequencyGrid, MultisineSpec
from .wh_sim import SimRecord, WhModel

__all__ = [
    "Spectrum",
    "FrfEstimate",
    "TimeOriginEstimate",
    "DominanceReport",
    "symmetric_lines",
    "dft",
    "idft",
    "estimate_bla",
    "estimate_shifted_bla",
    "shifted_lines_minus",
    "predict_shifted_bla",
    "predict_sbla_minus",
    "pair_sum",
    "dominance_report",
    "intermediate_power",
    "odd_degree_bla_gain",
    "predict_bla",
    "fraction_within_noise",
]


def symmetric_lines(n_samples: int) -> np.ndarray:
    """Line indices -N/2+1 ... N/2 in ascending order."""
    return np.arange(-(n_samples // 2) + 1, n_samples // 2 + 1)


def wrap_phase(x):
    """Wrap angles into (-pi, pi]."""
    w = (np.asarray(x) + np.pi) % (2.0 * np.pi) - np.pi
    return np.where(w == -np.pi, np.pi, w)


@dataclass(frozen=True)
class Spectrum:
    """Complex spectrum on the symmetric line set of a grid."""

    grid: FrequencyGrid
    values: np.ndarray  # aligned with symmetric_lines(N)

    def __post_init__(self):
        if len(self.values) != self.grid.n_samples:
            raise ValueError("values length must equal n_samples")

    @property
    def lines(self) -> np.ndarray:
        return symmetric_lines(self.grid.n_samples)

    def at(self, lines) -> np.ndarray:
        idx = np.asarray(lines) + self.grid.n_samples // 2 - 1
        return np.asarray(self.values)[idx]

    def fft_order(self) -> np.ndarray:
        n = self.grid.n_samples
        out = np.empty(n, dtype=complex)
        out[self.lines % n] = self.values
        return out

    @classmethod
    def from_fft_order(cls, values_fft: np.ndarray, grid: FrequencyGrid) -> "Spectrum":
        n = grid.n_samples
        return cls(grid, np.asarray(values_fft, dtype=complex)[symmetric_lines(n) % n])


def dft(x: np.ndarray, grid: FrequencyGrid | None = None) -> Spectrum:
    """Unitary DFT of one period."""
    x = np.asarray(x)
    if grid is None:
        grid = FrequencyGrid(len(x))
    elif len(x) != grid.n_samples:
        raise ValueError(f"signal length {len(x)} does not match grid N = {grid.n_samples}")
    return Spectrum.from_fft_order(np.fft.fft(x) / np.sqrt(len(x)), grid)


def idft(spec: Spectrum) -> np.ndarray:
    """Unitary inverse DFT; returns the real signal of a symmetric spectrum."""
    n = spec.grid.n_samples
    return np.fft.ifft(spec.fft_order() * np.sqrt(n)).real


@dataclass(frozen=True)
class FrfEstimate:
    """Averaged frequency-response values on a line set with scatter levels.

    ``var_noise`` comes from period-to-period scatter, ``var_total`` from
    realization-to-realization scatter; both are variances of the reported
    mean.
    """

    grid: FrequencyGrid
    lines: np.ndarray
    mean: np.ndarray
    var_noise: np.ndarray
    var_total: np.ndarray
    n_realizations: int
    n_periods: int

    def __post_init__(self):
        lines = np.asarray(self.lines, dtype=int)
        object.__setattr__(self, "lines", lines)
        for name in ("mean", "var_noise", "var_total"):
            arr = np.asarray(getattr(self, name))
            if arr.shape != lines.shape:
                raise ValueError(f"{name} must have one entry per line")
            object.__setattr__(self, name, arr)
        if np.any(self.var_total < 0) or np.any(self.var_noise < 0):
            raise ValueError("variances must be nonnegative")

    @property
    def freq_hz(self) -> np.ndarray:
        return self.grid.freq_hz(self.lines)


@dataclass(frozen=True)
class TimeOriginEstimate:
    """Per-couple phase slope Delta(m) and the pooled value, in radians."""

    delta_per_couple: dict[int, float]
    pooled_delta: float


def _as_uy(record) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(record, SimRecord):
        return record.u, record.y
    u, y = record
    return np.asarray(u, dtype=float), np.asarray(y, dtype=float)


def _period_spectra(x: np.ndarray, n: int) -> np.ndarray:
    """Per-period unitary DFT with per-period mean removal; shape (P, N)."""
    if len(x) % n:
        raise ValueError(f"record length {len(x)} is not a multiple of N = {n}")
    periods = x.reshape(-1, n)
    periods = periods - periods.mean(axis=1, keepdims=True)
    return np.fft.fft(periods, axis=1) / np.sqrt(n)


def _mean_and_scatter(per_real: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Mean over axis 0 and the variance of that mean (complex scatter)."""
    m = per_real.shape[0]
    mean = per_real.mean(axis=0)
    if m < 2:
        return mean, np.zeros(mean.shape)
    var = np.sum(np.abs(per_real - mean) ** 2, axis=0) / (m - 1)
    return mean, var / m


def estimate_bla(records: Sequence, spec: MultisineSpec) -> FrfEstimate:
    """Robust response estimate over periods and realizations.

    Per realization the ratio Y(k)/U(k) is averaged over the (>= 2)
    retained periods; the per-realization results are then averaged over
    realizations.  Noise variance comes from the period scatter, total
    variance (noise plus nonlinear distortion) from the realization
    scatter.
    """
    n = spec.grid.n_samples
    lines = np.asarray(spec.excited_lines)
    if len(records) < 2:
        raise ValueError("need at least two realizations")
    g_per_real = []
    noise_var_of_mean = []
    n_periods = None
    for i, rec in enumerate(records):
        u, y = _as_uy(rec)
        up = _period_spectra(u, n)
        yp = _period_spectra(y, n)
        if n_periods is None:
            n_periods = up.shape[0]
        if up.shape[0] < 2:
            raise ValueError("need at least two retained periods per realization")
        u_lines = up[:, lines]
        if np.any(np.abs(u_lines) == 0.0):
            raise ValueError(f"realization {i} has zero input at an excited line")
        ratios = yp[:, lines] / u_lines
        g_i, var_i = _mean_and_scatter(ratios)
        g_per_real.append(g_i)
        noise_var_of_mean.append(var_i)
    g = np.asarray(g_per_real)
    m = g.shape[0]
    mean, var_total = _mean_and_scatter(g)
    var_noise = np.sum(noise_var_of_mean, axis=0) / m**2
    return FrfEstimate(
        grid=spec.grid,
        lines=lines,
        mean=mean,
        var_noise=var_noise,
        var_total=var_total,
        n_realizations=m,
        n_periods=n_periods,
    )


def shifted_lines_minus(spec: MultisineSpec) -> np.ndarray:
    """Collection lines of the minus-branch estimate, in canonical order:
    m + 2s for every couple, then -(m - s) for every couple."""
    m = spec.m_lines
    s = spec.coupling.s
    return np.concatenate([m + 2 * s, -(m - s)])


def estimate_shifted_bla(
    records: Sequence,
    spec: MultisineSpec,
    compensate_time_origin: bool = True,
) -> tuple[FrfEstimate, FrfEstimate, TimeOriginEstimate]:
    """Shifted response estimates of a phase-coupled experiment.

    Returns (minus branch, plus branch, time-origin estimate).  The minus
    branch collects Y(k)/U(m) at k = m + 2s and Y(k)/U(-m) at k = -(m-s);
    the plus branch is its exact conjugate mirror and is constructed as
    such.  With compensation enabled, each realization's ratios are
    rotated by e^{j (m - k) Delta(m)} (or e^{j (-m - k) Delta(m)} on the
    negative-carrier lines), where Delta(m) is that realization's measured
    phase slope (angle U(m+s) - angle U(m)) / s, branch-aligned to the
    pooled median.
    """
    if not spec.kind.is_coupled:
        raise ValueError("shifted estimates require a phase-coupled spec")
    if len(records) < 2:
        raise ValueError("need at least two realizations")
    n = spec.grid.n_samples
    m = spec.m_lines
    s = spec.coupling.s
    bins_pos = (m + 2 * s) % n
    bins_neg = (-(m - s)) % n
    bins_m = m % n
    bins_mneg = (-m) % n
    bins_ms = (m + s) % n

    g_per_real = []
    noise_var_of_mean = []
    deltas = []
    n_periods = None
    for i, rec in enumerate(records):
        u, y = _as_uy(rec)
        up = _period_spectra(u, n)
        yp = _period_spectra(y, n)
        if n_periods is None:
            n_periods = up.shape[0]
        u_mean = up.mean(axis=0)
        if np.any(np.abs(u_mean[bins_m]) == 0.0):
            raise ValueError(f"realization {i} has zero input at a coupled line")
        ratios = np.concatenate(
            [yp[:, bins_pos] / up[:, bins_m], yp[:, bins_neg] / up[:, bins_mneg]],
            axis=1,
        )
        delta = wrap_phase(np.angle(u_mean[bins_ms]) - np.angle(u_mean[bins_m])) / s
        # re-align each couple's slope to the branch nearest the pooled value
        pooled = np.median(delta)
        delta = delta + (2.0 * np.pi / s) * np.round((pooled - delta) * s / (2.0 * np.pi))
        if compensate_time_origin:
            comp = np.concatenate([np.exp(-2j * s * delta), np.exp(-1j * s * delta)])
            ratios = ratios * comp
        g_i, var_i = _mean_and_scatter(ratios)
        g_per_real.append(g_i)
        noise_var_of_mean.append(var_i)
        deltas.append(delta)

    g = np.asarray(g_per_real)
    m_real = g.shape[0]
    mean, var_total = _mean_and_scatter(g)
    var_noise = np.sum(noise_var_of_mean, axis=0) / m_real**2
    lines_minus = shifted_lines_minus(spec)
    minus = FrfEstimate(
        grid=spec.grid,
        lines=lines_minus,
        mean=mean,
        var_noise=var_noise,
        var_total=var_total,
        n_realizations=m_real,
        n_periods=n_periods,
    )
    # plus branch: G+(k) = conj(G-(-k)), exact by construction
    plus = FrfEstimate(
        grid=spec.grid,
        lines=-lines_minus,
        mean=np.conj(mean),
        var_noise=var_noise.copy(),
        var_total=var_total.copy(),
        n_realizations=m_real,
        n_periods=n_periods,
    )
    delta_mat = np.asarray(deltas)
    delta_mean = delta_mat.mean(axis=0)
    origin = TimeOriginEstimate(
        delta_per_couple={int(mi): float(dv) for mi, dv in zip(m, delta_mean)},
        pooled_delta=float(np.median(delta_mat)),
    )
    return minus, plus, origin


# ---------------------------------------------------------------------------
# analytic predictions


def _design_x_values(model: WhModel, spec: MultisineSpec, amplitude_scale: float):
    """DFT-scale intermediate spectrum |X| = |R * U| on the positive excited
    lines, with the coupled zero-phase convention (valid for pair products)."""
    n = spec.grid.n_samples
    lines = np.asarray(spec.excited_lines)
    u_dft = np.sqrt(n) * np.asarray(spec.amplitudes) * amplitude_scale
    return lines, model.r.freq_response(lines, n) * u_dft


def _couple_sums(model: WhModel, spec: MultisineSpec, amplitude_scale: float) -> dict[int, complex]:
    """Single-count pair sums over the couple structure:

    c0  = (1/N) sum_{l>0 excited} |X(l)|^2            (pairs {l, -l})
    c+1 = (1/N) sum_couples  X(-m) X(m+s)             (pairs {-m, m+s})
    c-1 = conj(c+1)                                   (pairs {m, -(m+s)})
    """
    n = spec.grid.n_samples
    lines, x = _design_x_values(model, spec, amplitude_scale)
    table = dict(zip(lines.tolist(), x))
    c0 = np.sum(np.abs(x) ** 2) / n
    cp = 0.0 + 0.0j
    s = spec.coupling.s
    for mi in spec.m_lines:
        cp += np.conj(table[int(mi)]) * table[int(mi) + s]
    cp /= n
    return {0: complex(c0), +1: complex(cp), -1: complex(np.conj(cp))}


def _shift_tuple_sum(c: dict[int, complex], net: int, n_pairs: int) -> complex:
    """Sum over ordered tuples (t_1..t_p), t_k in {-1, 0, +1}, sum = net,
    of prod c[t_k] (multinomial closed form)."""
    total = 0.0 + 0.0j
    for n_plus in range(n_pairs + 1):
        n_minus = n_plus - net
        if n_minus < 0 or n_plus + n_minus > n_pairs:
            continue
        n_zero = n_pairs - n_plus - n_minus
        mult = factorial(n_pairs) // (factorial(n_plus) * factorial(n_minus) * factorial(n_zero))
        total += mult * c[+1] ** n_plus * c[-1] ** n_minus * c[0] ** n_zero
    return total


def predict_shifted_bla(
    model: WhModel,
    spec: MultisineSpec,
    degree: int,
    line_offset: int,
    amplitude_scale: float = 1.0,
) -> np.ndarray:
    """Expected ratio E{Y_D(m + i s) / U(m)} of a pure x**degree system.

    One value per couple, evaluated as

        (D! / p!) S(m+is) [ R(m) T_i + R(m+s) (|U(m+s)|/|U(m)|) T_{i-1} ]

    with p = (D-1)/2 pair factors and T_j the ordered-tuple sum of the
    single-count pair constants with net shift j*s.  The prefactor counts
    each unordered pairing once (D!! overall for Gaussian-like inputs);
    enumerating pairs via full double-counted line sums would overstate
    the level by 2**p p!.
    """
    if degree < 3 or degree % 2 == 0:
        raise ValueError("degree must be odd and >= 3")
    p = (degree - 1) // 2
    if abs(line_offset) > (degree + 1) // 2:
        raise ValueError(f"|line_offset| must be <= {(degree + 1) // 2}")
    n = spec.grid.n_samples
    s = spec.coupling.s
    m = spec.m_lines
    c = _couple_sums(model, spec, amplitude_scale)
    t_i = _shift_tuple_sum(c, line_offset, p)
    t_im1 = _shift_tuple_sum(c, line_offset - 1, p)
    amp = spec.amplitude_of(m + s) / spec.amplitude_of(m)
    pref = factorial(degree) / factorial(p)
    s_resp = model.s.freq_response(m + line_offset * s, n)
    r_m = model.r.freq_response(m, n)
    r_ms = model.r.freq_response(m + s, n)
    return pref * s_resp * (r_m * t_i + r_ms * amp * t_im1)


def predict_sbla_minus(
    model: WhModel, spec: MultisineSpec, amplitude_scale: float = 1.0
) -> np.ndarray:
    """Expected minus-branch estimate of the full polynomial system, on the
    canonical line order of :func:`shifted_lines_minus`."""
    n_couples = spec.m_lines.size
    pos = np.zeros(n_couples, dtype=complex)
    neg = np.zeros(n_couples, dtype=complex)
    for d, gamma in model.f.odd_terms():
        pos += gamma * predict_shifted_bla(model, spec, d, 2, amplitude_scale)
        neg += gamma * predict_shifted_bla(model, spec, d, -1, amplitude_scale)
    return np.concatenate([pos, np.conj(neg)])


# ---------------------------------------------------------------------------
# dominance diagnostics


@dataclass(frozen=True)
class DominanceReport:
    """Pair-sum constants of the intermediate spectrum and the dominance bound.

    ``c0``, ``c_minus_s`` and ``c_plus_s`` are the full double-counted line
    sums (1/N) sum_l X(l) X(-l), (1/N) sum_l X(l) X(-(l+s)) and
    (1/N) sum_l X(-l) X(l+s).  Single-shift contributions dominate
    double-shift ones whenever c0 >= 2 |c_s|; the dominance ratio of a
    degree-D term is bounded below by c0/|c_s| (infinite for D = 3, where
    no double-shift contribution exists).
    """

    c0: float
    c_minus_s: complex
    c_plus_s: complex
    ratio_bound_ok: bool
    alpha_lower_bound: float


def pair_sum(x_full: np.ndarray, n_samples: int, delta: int) -> complex:
    """(1/N) sum_l X(-l) X(l + delta) over the symmetric line set,
    treating lines outside the set as unexcited."""
    lines = symmetric_lines(n_samples)
    x = np.asarray(x_full, dtype=complex)
    lo, hi = lines[0], lines[-1]
    total = 0.0 + 0.0j
    nz = np.flatnonzero(x)
    for idx in nz:
        l = lines[idx]
        lp = l + delta
        if lo <= -l <= hi and lo <= lp <= hi:
            total += x[-l - lo] * x[lp - lo]
    return total / n_samples


def _x_spectrum_full(model: WhModel, spec: MultisineSpec, amplitude_scale: float) -> np.ndarray:
    n = spec.grid.n_samples
    lines_all = symmetric_lines(n)
    lines, x = _design_x_values(model, spec, amplitude_scale)
    full = np.zeros(n, dtype=complex)
    full[np.searchsorted(lines_all, lines)] = x
    full[np.searchsorted(lines_all, -lines)] = np.conj(x)
    return full


def dominance_report(
    spec: MultisineSpec,
    model: WhModel | None = None,
    x_spectrum: Spectrum | None = None,
    degree: int = 3,
    amplitude_scale: float = 1.0,
) -> DominanceReport:
    """Dominance diagnostic from a model or a measured intermediate spectrum."""
    if (model is None) == (x_spectrum is None):
        raise ValueError("provide exactly one of model or x_spectrum")
    n = spec.grid.n_samples
    s = spec.coupling.s
    if x_spectrum is not None:
        x_full = np.asarray(x_spectrum.values, dtype=complex)
    else:
        x_full = _x_spectrum_full(model, spec, amplitude_scale)
    c0 = pair_sum(x_full, n, 0)
    cs = pair_sum(x_full, n, s)
    cms = pair_sum(x_full, n, -s)
    c0r = float(np.real(c0))
    if degree < 3 or degree % 2 == 0:
        raise ValueError("degree must be odd and >= 3")
    if degree == 3 or abs(cs) == 0.0:
        alpha = np.inf
    else:
        alpha = c0r / abs(cs)
    return DominanceReport(
        c0=c0r,
        c_minus_s=complex(cms),
        c_plus_s=complex(cs),
        ratio_bound_ok=bool(c0r >= 2.0 * abs(cs) - 1e-12),
        alpha_lower_bound=float(alpha),
    )


# ---------------------------------------------------------------------------
# plain-response predictions


def intermediate_power(model: WhModel, spec: MultisineSpec, amplitude_scale: float = 1.0) -> float:
    """(1/N) sum_l |X(l)|^2 of the intermediate signal, i.e. its variance."""
    _, x = _design_x_values(model, spec, amplitude_scale)
    return float(2.0 * np.sum(np.abs(x) ** 2) / spec.grid.n_samples)


def odd_degree_bla_gain(degree: int, power: float) -> float:
    """Equivalent gain of a pure odd x**degree term: D!! * power**((D-1)/2)."""
    if degree % 2 == 0:
        raise ValueError("degree must be odd")
    p = (degree - 1) // 2
    return factorial(degree) / (2**p * factorial(p)) * power**p


def predict_bla(model: WhModel, spec: MultisineSpec, amplitude_scale: float = 1.0) -> np.ndarray:
    """Expected plain response estimate c * R(k) S(k) on the excited lines."""
    power = intermediate_power(model, spec, amplitude_scale)
    gain = sum(
        g * odd_degree_bla_gain(d, power)
        for d, g in enumerate(model.f.coeffs)
        if d % 2 == 1 and g != 0.0
    )
    n = spec.grid.n_samples
    lines = np.asarray(spec.excited_lines)
    return gain * model.r.freq_response(lines, n) * model.s.freq_response(lines, n)


def fraction_within_noise(est: FrfEstimate, n_sigma: float = 3.0) -> float:
    """Fraction of lines whose mean is within n_sigma standard errors of zero."""
    sigma = np.sqrt(est.var_total)
    return float(np.mean(np.abs(est.mean) <= n_sigma * sigma))

"""Weighted least-squares fitting of rational transfer functions on
arbitrary frequency-line sets.

The model is b(z^-1)/a(z^-1) evaluated at z = e^{j 2 pi k / N} with a_0
fixed to 1; coefficients are complex for shifted-response data (whose
poles and zeros are rotated off the conjugate-symmetric pattern) and real
for ordinary response data.  The cost is

    K(theta) = (1/N) sum_k |G(k) - b(k)/a(k)|^2 / sigma^2(k).

Fitting starts from a denominator-cleared linear solve, optionally
refined by Sanathanan-Koerner reweighting, and finishes with damped
Gauss-Newton iterations on the true nonlinear cost.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as npoly

from .frf import FrfEstimate
from .wh_sim import RationalTF

__all__ = [
    "RationalFitError",
    "ComplexRationalTF",
    "FitResult",
    "roots_and_gain",
    "fit_complex_tf",
    "fit_real_tf",
]

CANCELLATION_TOL = 1e-3


class RationalFitError(RuntimeError):
    """Raised for degenerate fitting problems (rank deficiency, bad data)."""


@dataclass(frozen=True)
class ComplexRationalTF:
    """Rational function in z^-1 with complex coefficients, a_0 = 1."""

    num: np.ndarray
    den: np.ndarray

    def __post_init__(self):
        num = np.atleast_1d(np.asarray(self.num, dtype=complex))
        den = np.atleast_1d(np.asarray(self.den, dtype=complex))
        if den[0] == 0:
            raise ValueError("a_0 must be nonzero")
        object.__setattr__(self, "num", num / den[0])
        object.__setattr__(self, "den", den / den[0])

    def freq_response(self, lines, n_samples: int) -> np.ndarray:
        zinv = np.exp(-2j * np.pi * np.asarray(lines, dtype=float) / n_samples)
        return npoly.polyval(zinv, self.num) / npoly.polyval(zinv, self.den)

    def conjugate(self) -> "ComplexRationalTF":
        return ComplexRationalTF(np.conj(self.num), np.conj(self.den))


@dataclass(frozen=True)
class FitResult:
    """Outcome of a rational fit.

    ``cost`` is the weighted cost re-evaluated at the returned
    coefficients; ``near_cancellations`` lists (pole, zero) pairs closer
    than an absolute tolerance, a symptom of overmodelling.
    """

    model: ComplexRationalTF | RationalTF
    cost: float
    iterations: int
    converged: bool
    poles: np.ndarray
    zeros: np.ndarray
    gain: complex
    near_cancellations: tuple[tuple[complex, complex], ...] = ()


def roots_and_gain(poly: np.ndarray) -> tuple[np.ndarray, complex]:
    """Roots (in z) of sum_l c_l z^-l and the leading gain c_0.

    Trailing coefficients below 1e-14 * max|c| are trimmed first; the
    polynomial then factors as c_0 prod_i (1 - r_i z^-1).
    """
    c = np.atleast_1d(np.asarray(poly, dtype=complex))
    scale = np.max(np.abs(c))
    if scale == 0.0:
        raise ValueError("all-zero polynomial")
    keep = np.flatnonzero(np.abs(c) > 1e-14 * scale)
    c = c[: keep[-1] + 1]
    if c.size == 1:
        return np.array([], dtype=complex), complex(c[0])
    return np.roots(c), complex(c[0])


def _weights(var_total: np.ndarray) -> np.ndarray:
    """1/sigma^2 with a relative floor so noiseless data keeps finite weights."""
    s2 = np.asarray(var_total, dtype=float)
    med = float(np.median(s2))
    if med <= 0.0:
        return np.ones_like(s2)
    return 1.0 / np.maximum(s2, 1e-12 * med)


def _basis(lines: np.ndarray, n_samples: int, order: int) -> np.ndarray:
    """Columns e^{-j 2 pi k l / N} for l = 0 ... order."""
    zinv = np.exp(-2j * np.pi * np.asarray(lines, dtype=float) / n_samples)
    return zinv[:, None] ** np.arange(order + 1)[None, :]


def _lstsq(mat: np.ndarray, rhs: np.ndarray, what: str) -> np.ndarray:
    sol, _, rank, _ = np.linalg.lstsq(mat, rhs, rcond=None)
    if rank < mat.shape[1]:
        raise RationalFitError(
            f"rank-deficient {what} (rank {rank} < {mat.shape[1]} unknowns); "
            "not enough independent lines for the requested orders"
        )
    return sol


def _cost(g, w, n_samples, num, den, eb, ea):
    model = (eb @ num) / (ea @ den)
    return float(np.sum(w * np.abs(g - model) ** 2) / n_samples)


def _fit_core(lines, g, w, n_samples, n_num, n_den, real_coeffs,
              sk_iterations, max_iterations, cost_tol, step_tol):
    lines = np.asarray(lines)
    eb = _basis(lines, n_samples, n_num)
    ea = _basis(lines, n_samples, n_den)
    sw = np.sqrt(w)

    def stack(mat):
        return np.concatenate([mat.real, mat.imag], axis=0) if real_coeffs else mat

    def stack_v(vec):
        return np.concatenate([vec.real, vec.imag]) if real_coeffs else vec

    # linearized (denominator-cleared) solves with Sanathanan-Koerner
    # reweighting; the trajectory provides several starting points because
    # individual snapshots can feed Gauss-Newton a poor basin
    snapshots = []
    sk_weight = np.ones_like(sw)
    for _ in range(max(1, sk_iterations) + 1):
        rowscale = (sw * sk_weight)[:, None]
        mat = np.concatenate([-(ea[:, 1:]) * g[:, None], eb], axis=1) * rowscale
        rhs = g * rowscale[:, 0]
        theta = _lstsq(stack(mat), stack_v(rhs), "linearized normal equations")
        snapshots.append(theta)
        den = np.concatenate([[1.0], theta[:n_den]])
        sk_weight = 1.0 / np.maximum(np.abs(ea @ den), 1e-12)

    def gauss_newton(theta):
        den = np.concatenate([[1.0], theta[:n_den]]).astype(complex)
        num = theta[n_den:].astype(complex)
        sqw = sw / np.sqrt(n_samples)
        cost = _cost(g, w, n_samples, num, den, eb, ea)
        converged = False
        iterations = 0
        for iterations in range(1, max_iterations + 1):
            a_val = ea @ den
            b_val = eb @ num
            resid = sqw * (g - b_val / a_val)
            jac = np.concatenate(
                [
                    sqw[:, None] * (b_val / a_val**2)[:, None] * ea[:, 1:],
                    -sqw[:, None] * eb / a_val[:, None],
                ],
                axis=1,
            )
            try:
                step = _lstsq(stack(jac), stack_v(-resid), "Gauss-Newton step")
            except RationalFitError:
                # curvature degenerated mid-descent; keep the best point found
                break
            alpha = 1.0
            improved = False
            while alpha > 1e-4:
                num_try = num + alpha * step[n_den:]
                den_try = den.copy()
                den_try[1:] += alpha * step[:n_den]
                cost_try = _cost(g, w, n_samples, num_try, den_try, eb, ea)
                if cost_try < cost:
                    improved = True
                    break
                alpha *= 0.5
            if not improved:
                # no descent direction left at line-search resolution
                converged = True
                break
            num, den = num_try, den_try
            decrease = (cost - cost_try) / max(cost, np.finfo(float).tiny)
            cost = cost_try
            if decrease < cost_tol or alpha * np.linalg.norm(step) < step_tol:
                converged = True
                break
        return num, den, cost, iterations, converged

    starts = [snapshots[0], snapshots[len(snapshots) // 2], snapshots[-1]]
    best = None
    for theta in starts:
        result = gauss_newton(theta)
        if best is None or result[2] < best[2]:
            best = result
    num, den, cost, iterations, converged = best

    if real_coeffs:
        num = num.real
        den = den.real
    cost = _cost(g, w, n_samples, num.astype(complex), den.astype(complex), eb, ea)
    return num, den, cost, iterations, converged


def _finish(num, den, cost, iterations, converged, real_coeffs) -> FitResult:
    if real_coeffs:
        model = RationalTF(num, den, enforce_stability=False)
    else:
        model = ComplexRationalTF(num, den)
    poles, _ = roots_and_gain(model.den)
    try:
        zeros, num_gain = roots_and_gain(model.num)
    except ValueError:
        zeros, num_gain = np.array([], dtype=complex), 0.0
    cancels = tuple(
        (complex(p), complex(z))
        for p in poles
        for z in zeros
        if abs(p - z) < CANCELLATION_TOL
    )
    return FitResult(
        model=model,
        cost=cost,
        iterations=iterations,
        converged=converged,
        poles=poles,
        zeros=zeros,
        gain=complex(num_gain),
        near_cancellations=cancels,
    )


def _check_data(data: FrfEstimate, n_num: int, n_den: int):
    w = _weights(data.var_total)
    usable = np.isfinite(w) & (w > 0) & np.isfinite(data.mean)
    if np.count_nonzero(usable) < n_num + n_den + 2:
        raise RationalFitError(
            f"{np.count_nonzero(usable)} usable lines for {n_num + n_den + 1} unknowns; "
            f"need at least {n_num + n_den + 2}"
        )
    return data.lines[usable], data.mean[usable], w[usable]


def fit_complex_tf(
    data: FrfEstimate,
    n_num: int,
    n_den: int,
    sk_iterations: int = 5,
    max_iterations: int = 200,
    cost_tol: float = 1e-10,
    step_tol: float = 1e-12,
) -> FitResult:
    """Fit a complex-coefficient rational model to an FRF estimate.

    Lines may be negative; weights are 1/var_total with a relative floor.
    """
    lines, g, w = _check_data(data, n_num, n_den)
    num, den, cost, iters, conv = _fit_core(
        lines, g, w, data.grid.n_samples, n_num, n_den, False,
        sk_iterations, max_iterations, cost_tol, step_tol,
    )
    return _finish(num, den, cost, iters, conv, False)


def fit_real_tf(
    data: FrfEstimate,
    n_num: int,
    n_den: int,
    sk_iterations: int = 5,
    max_iterations: int = 200,
    cost_tol: float = 1e-10,
    step_tol: float = 1e-12,
) -> FitResult:
    """Fit a real-coefficient rational model (conjugate lines implied)."""
    lines, g, w = _check_data(data, n_num, n_den)
    num, den, cost, iters, conv = _fit_core(
        lines, g, w, data.grid.n_samples, n_num, n_den, True,
        sk_iterations, max_iterations, cost_tol, step_tol,
    )
    return _finish(num, den, cost, iters, conv, True)

"""Splitting fitted shifted-response poles/zeros into input and output
dynamics, and completing an initial Wiener-Hammerstein model.

The minus-branch shifted estimate behaves like S(k) R(k - s), so the
input-block roots appear rotated by e^{j 2 pi s / N} while output-block
roots stay put.  Comparing every fitted root against the conjugated root
set therefore shows a rotation of 2 s / N * 360 degrees for input-block
roots and none for output-block roots; the observed rotation drives the
assignment.  Input-block roots are rotated back, both sets are
symmetrized to real-coefficient polynomials, and the static polynomial is
regressed linearly once the dynamics are fixed.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.optimize import linear_sum_assignment

from .rational_fit import FitResult, RationalFitError
from .signals import MultisineSpec
from .wh_sim import PolynomialNonlinearity, RationalTF, SimRecord, WhModel, filter_lti

__all__ = [
    "RootLabel",
    "RootAssignment",
    "AssignmentReport",
    "InitialWhEstimate",
    "assign_roots",
    "build_initial_blocks",
    "estimate_nonlinearity",
]


class RootLabel(str, Enum):
    INPUT_R = "InputR"
    OUTPUT_S = "OutputS"
    UNCLASSIFIED = "Unclassified"


@dataclass(frozen=True)
class RootAssignment:
    kind: str                    # "pole" or "zero"
    value: complex               # root of the minus-branch fit
    conjugate_partner: complex   # matched root of the conjugated set
    angular_shift_deg: float     # signed angle from partner to root, (-180, 180]
    expected_shift_deg: float
    modulus_ratio: float
    label: RootLabel
    confidence: float
    flagged_cancellation: bool = False


@dataclass(frozen=True)
class AssignmentReport:
    entries: tuple[RootAssignment, ...]
    expected_shift_deg: float
    threshold_fraction: float

    def by_label(self, kind: str, label: RootLabel) -> list[RootAssignment]:
        return [e for e in self.entries if e.kind == kind and e.label is label]


@dataclass(frozen=True)
class InitialWhEstimate:
    """Initial model triple; the cascade gain lives in the polynomial."""

    r_hat: RationalTF
    s_hat: RationalTF
    f_hat: PolynomialNonlinearity
    gain_convention: str
    fit_residual: float

    def as_model(self) -> WhModel:
        return WhModel(self.r_hat, self.f_hat, self.s_hat)


def _match_conjugates(
    roots: np.ndarray, angle_weight: float, log_modulus_weight: float
) -> np.ndarray:
    """Bijectively match roots to their conjugated set; returns the matched
    conjugate-set root per input root (minimal total weighted distance in
    (ln|z|, arg z))."""
    conj_set = np.conj(roots)
    lr = np.log(np.maximum(np.abs(roots), 1e-6))
    lc = np.log(np.maximum(np.abs(conj_set), 1e-6))
    ar = np.angle(roots)
    ac = np.angle(conj_set)
    dang = np.angle(np.exp(1j * (ar[:, None] - ac[None, :])))
    cost = np.sqrt(
        (log_modulus_weight * (lr[:, None] - lc[None, :])) ** 2
        + (angle_weight * dang) ** 2
    )
    rows, cols = linear_sum_assignment(cost)
    order = np.empty_like(cols)
    order[rows] = cols
    return conj_set[order]


def _classify(shift_deg, expected_deg, threshold_fraction):
    tol = threshold_fraction * expected_deg
    d_input = abs(abs(shift_deg) - expected_deg)
    d_output = abs(shift_deg)
    if min(d_input, d_output) >= tol:
        return RootLabel.UNCLASSIFIED, 0.0
    if d_input < d_output:
        return RootLabel.INPUT_R, 1.0 - d_input / tol
    return RootLabel.OUTPUT_S, 1.0 - d_output / tol


def assign_roots(
    fit_minus: FitResult,
    spec: MultisineSpec,
    threshold_fraction: float = 0.5,
    angle_weight: float = 1.0,
    log_modulus_weight: float = 3.0,
) -> AssignmentReport:
    """Label the fitted poles and zeros by their rotation against the
    conjugated root set.

    A root whose rotation magnitude is within ``threshold_fraction`` of
    the expected 2s/N shift is labeled input-block, one with rotation
    near zero output-block, anything else unclassified.  Confidence falls
    off linearly toward the decision boundary and is halved for roots in
    near pole/zero cancellations.
    """
    if not spec.kind.is_coupled:
        raise ValueError("assignment requires a phase-coupled spec")
    if not (0.0 < threshold_fraction <= 1.0):
        raise ValueError("threshold_fraction must be in (0, 1]")
    expected = 2.0 * spec.coupling.s / spec.grid.n_samples * 360.0
    flagged = {complex(p) for p, _ in fit_minus.near_cancellations}
    flagged |= {complex(z) for _, z in fit_minus.near_cancellations}

    entries = []
    for kind, roots in (("pole", fit_minus.poles), ("zero", fit_minus.zeros)):
        roots = np.asarray(roots, dtype=complex)
        if roots.size == 0:
            continue
        partners = _match_conjugates(roots, angle_weight, log_modulus_weight)
        for root, partner in zip(roots, partners):
            shift = float(np.degrees(np.angle(root / partner)))
            label, confidence = _classify(shift, expected, threshold_fraction)
            is_flagged = complex(root) in flagged
            if is_flagged:
                confidence *= 0.5
            entries.append(
                RootAssignment(
                    kind=kind,
                    value=complex(root),
                    conjugate_partner=complex(partner),
                    angular_shift_deg=shift,
                    expected_shift_deg=expected,
                    modulus_ratio=float(np.abs(root) / max(np.abs(partner), 1e-300)),
                    label=label,
                    confidence=float(confidence),
                    flagged_cancellation=is_flagged,
                )
            )
    return AssignmentReport(
        entries=tuple(entries),
        expected_shift_deg=expected,
        threshold_fraction=threshold_fraction,
    )


def _symmetrize(
    roots: list[complex],
    near_real_tol: float,
    pair_tol: float,
    what: str,
    drop_unpairable: bool = False,
) -> list[complex]:
    """Turn an approximately conjugate-symmetric root list into an exact one."""
    real_roots = []
    complex_roots = []
    for r in roots:
        if abs(r.imag) < near_real_tol:
            real_roots.append(complex(r.real, 0.0))
        else:
            complex_roots.append(complex(r))
    upper = [r for r in complex_roots if r.imag > 0]
    lower = [r for r in complex_roots if r.imag < 0]
    out = list(real_roots)
    for r in upper:
        dist = [abs(r - np.conj(q)) for q in lower]
        j = int(np.argmin(dist)) if dist else -1
        if j < 0 or dist[j] > pair_tol:
            if drop_unpairable:
                continue
            closest = f" (closest {dist[j]:.4f})" if dist else ""
            raise RationalFitError(
                f"cannot symmetrize {what}: root {r:.4f} has no conjugate partner "
                f"within {pair_tol}{closest}"
            )
        merged = 0.5 * (r + np.conj(lower.pop(j)))
        out.extend([merged, np.conj(merged)])
    if lower:
        if drop_unpairable:
            return out
        raise RationalFitError(
            f"cannot symmetrize {what}: unpaired roots {[f'{q:.4f}' for q in lower]}"
        )
    return out


def _snap(roots: list[complex], targets: np.ndarray, tol: float) -> list[complex]:
    """Replace roots by their nearest reference targets when within tol,
    preserving conjugate symmetry (matching is done on the closed upper
    half plane and mirrored)."""
    if len(roots) == 0 or targets.size == 0:
        return list(roots)
    up = [r for r in roots if r.imag > 0]
    re = [r for r in roots if r.imag == 0]
    tg_up = targets[targets.imag > 1e-12]
    tg_re = targets[np.abs(targets.imag) <= 1e-12].real

    def assign(subset, tgts):
        subset = list(subset)
        if not subset or len(tgts) == 0:
            return subset
        cost = np.abs(np.subtract.outer(np.asarray(subset), np.asarray(tgts)))
        rows, cols = linear_sum_assignment(cost)
        for i, j in zip(rows, cols):
            if cost[i, j] < tol:
                subset[i] = complex(tgts[j])
        return subset

    re_snapped = assign(re, tg_re)
    up_snapped = assign(up, tg_up)
    out = [complex(r.real, 0.0) for r in np.asarray(re_snapped, dtype=complex)]
    for r in up_snapped:
        out.extend([r, np.conj(r)])
    return out


def _poly_from_roots(roots: list[complex]) -> np.ndarray:
    coeffs = np.poly(np.asarray(roots, dtype=complex)) if roots else np.array([1.0])
    return np.real_if_close(coeffs, tol=1e6).real


def _stabilize(poles: list[complex]) -> list[complex]:
    out = []
    for p in poles:
        if abs(p) >= 1.0:
            p = p / (abs(p) ** 2 * (1.0 + 1e-9))  # reflect inside the unit circle
        out.append(p)
    return out


def build_initial_blocks(
    report: AssignmentReport,
    fit_minus: FitResult,
    spec: MultisineSpec,
    bla_fit: FitResult | None = None,
    near_real_tol: float = 0.02,
    pair_tol: float = 0.05,
    snap_tol: float = 0.1,
    drop_unpairable_zeros: bool = False,
    best_effort: bool = False,
) -> tuple[RationalTF, RationalTF]:
    """Monic input/output block estimates from an assignment report.

    Input-block roots are rotated back by e^{-j 2 pi s / N} and both sets
    are symmetrized to real coefficients; unclassified roots go to the
    output block (at zero confidence).  When a real-coefficient reference
    fit of the plain response is given, the pole sets are snapped to its
    poles by nearest-neighbor matching, keeping the shifted fit only for
    the assignment decision.  Poles that cannot be symmetrized are an
    error by default; for zeros (often badly determined outside the
    excited band) ``drop_unpairable_zeros`` discards the offenders.  With
    ``best_effort`` (the pipeline's small-M mode) the tolerances are
    relaxed and leftover unpairable roots of either kind are dropped, so a
    degraded model is returned instead of an error; its quality shows up
    in the nonlinearity-regression residual.
    """
    if best_effort:
        near_real_tol = max(near_real_tol, 0.1)
        pair_tol = max(pair_tol, 0.2)
        drop_unpairable_zeros = True
    back = np.exp(-2j * np.pi * spec.coupling.s / spec.grid.n_samples)

    def split(kind: str) -> tuple[list[complex], list[complex]]:
        r_vals, s_vals = [], []
        for e in report.entries:
            if e.kind != kind:
                continue
            if e.label is RootLabel.INPUT_R:
                r_vals.append(e.value * back)
            else:  # OutputS, and Unclassified by policy
                s_vals.append(e.value)
        return r_vals, s_vals

    r_poles, s_poles = split("pole")
    r_zeros, s_zeros = split("zero")
    r_poles = _symmetrize(r_poles, near_real_tol, pair_tol, "input-block poles",
                          drop_unpairable=best_effort)
    s_poles = _symmetrize(s_poles, near_real_tol, pair_tol, "output-block poles",
                          drop_unpairable=best_effort)
    r_zeros = _symmetrize(r_zeros, near_real_tol, pair_tol, "input-block zeros",
                          drop_unpairable=drop_unpairable_zeros)
    s_zeros = _symmetrize(s_zeros, near_real_tol, pair_tol, "output-block zeros",
                          drop_unpairable=drop_unpairable_zeros)

    if bla_fit is not None:
        ref_poles = np.asarray(bla_fit.poles, dtype=complex)
        r_poles = _snap(r_poles, ref_poles, snap_tol)
        s_poles = _snap(s_poles, ref_poles, snap_tol)

    r_hat = RationalTF(_poly_from_roots(r_zeros), _poly_from_roots(_stabilize(r_poles)))
    s_hat = RationalTF(_poly_from_roots(s_zeros), _poly_from_roots(_stabilize(s_poles)))
    return r_hat, s_hat


def _steady_filter(tf: RationalTF, x: np.ndarray, n_period: int) -> np.ndarray:
    """Filter a periodic record in steady state by prepending warm-up periods."""
    poles = tf.poles()
    radius = float(np.max(np.abs(poles))) if poles.size else 0.0
    if radius <= 0.0:
        warmup = 1
    else:
        warmup = int(np.ceil(np.log(1e-13) / np.log(radius) / n_period))
        warmup = min(max(warmup, 1), 64)
    ext = np.concatenate([np.tile(x[:n_period], warmup), x])
    return filter_lti(tf, ext)[warmup * n_period :]


def estimate_nonlinearity(
    r_hat: RationalTF,
    s_hat: RationalTF,
    record: SimRecord | tuple[np.ndarray, np.ndarray],
    degree_max: int,
    n_period: int | None = None,
) -> tuple[PolynomialNonlinearity, InitialWhEstimate]:
    """Linear regression of the static polynomial given the two blocks.

    Builds the regressors z_d = s_hat(q)[ (r_hat(q) u)^d ] for
    d = 0 ... degree_max in steady state and solves the least-squares
    problem y ~ sum_d gamma_d z_d.
    """
    if isinstance(record, SimRecord):
        u, y = record.u, record.y
        n_period = record.n_period_samples
    else:
        u, y = record
        if n_period is None:
            raise ValueError("n_period is required for a raw (u, y) record")
    u = np.asarray(u, dtype=float)
    y = np.asarray(y, dtype=float)

    x_hat = _steady_filter(r_hat, u, n_period)
    regressors = np.column_stack(
        [_steady_filter(s_hat, x_hat**d, n_period) for d in range(degree_max + 1)]
    )
    gamma, _, rank, _ = np.linalg.lstsq(regressors, y, rcond=None)
    if rank < degree_max + 1:
        raise RationalFitError(
            f"rank-deficient nonlinearity regression (rank {rank} < {degree_max + 1}); "
            "is the filtered input identically zero?"
        )
    y_hat = regressors @ gamma
    residual = float(np.sqrt(np.mean((y - y_hat) ** 2) / np.mean(y**2)))
    f_hat = PolynomialNonlinearity(gamma)
    estimate = InitialWhEstimate(
        r_hat=r_hat,
        s_hat=s_hat,
        f_hat=f_hat,
        gain_convention="cascade gain absorbed into the polynomial coefficients",
        fit_residual=residual,
    )
    return f_hat, estimate

"""JSON documents and CSV tables for every pipeline artifact.

Floats are written with ``repr`` (shortest round-trip form), so identical
runs produce byte-identical files.  Complex values are [re, im] pairs.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .decompose import AssignmentReport, InitialWhEstimate, RootAssignment, RootLabel
from .frf import DominanceReport, FrfEstimate, TimeOriginEstimate
from .rational_fit import ComplexRationalTF, FitResult
from .signals import (
    Coupling,
    FrequencyGrid,
    MultisineSpec,
    PeakAbs,
    Rms,
    SignalKind,
    SignalRealization,
    realize,
)
from .wh_sim import NoiseSpec, PolynomialNonlinearity, RationalTF, SimRecord, WhModel


def cplx(z) -> list[float]:
    z = complex(z)
    return [z.real, z.imag]


def cplx_list(arr) -> list[list[float]]:
    return [cplx(z) for z in np.asarray(arr).ravel()]


def from_cplx(v) -> complex:
    return complex(v[0], v[1])


def json_dump(doc: dict, path: str | Path):
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def json_load(path: str | Path) -> dict:
    return json.loads(Path(path).read_text())


def write_csv(path: str | Path, header: list[str], columns: list[np.ndarray]):
    rows = zip(*columns)
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v
    return repr(float(v))


def read_csv(path: str | Path) -> dict[str, np.ndarray]:
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        table = [line.strip().split(",") for line in fh if line.strip()]
    cols = list(zip(*table)) if table else [[] for _ in header]
    out = {}
    for name, col in zip(header, cols):
        try:
            out[name] = np.asarray([float(v) for v in col])
        except ValueError:
            out[name] = np.asarray(col)
    return out


# ---------------------------------------------------------------------------
# signals


def spec_to_document(spec: MultisineSpec) -> dict:
    doc = {
        "grid": {"n_samples": spec.grid.n_samples, "sample_rate": spec.grid.sample_rate},
        "kind": spec.kind.value,
        "excited_lines": [int(k) for k in spec.excited_lines],
        "amplitudes": [float(a) for a in spec.amplitudes],
    }
    if spec.coupling is not None:
        c = spec.coupling
        doc["coupling"] = {"d": c.d, "c_shift": c.c_shift, "s": c.s, "i_max": c.i_max}
    return doc


def spec_from_document(doc: dict) -> MultisineSpec:
    coupling = None
    if "coupling" in doc:
        coupling = Coupling(**{k: int(v) for k, v in doc["coupling"].items()})
    return MultisineSpec(
        grid=FrequencyGrid(int(doc["grid"]["n_samples"]), float(doc["grid"]["sample_rate"])),
        kind=SignalKind(doc["kind"]),
        excited_lines=tuple(int(k) for k in doc["excited_lines"]),
        amplitudes=tuple(float(a) for a in doc["amplitudes"]),
        coupling=coupling,
    )


def scaling_to_document(scaling) -> dict | None:
    if scaling is None:
        return None
    mode = "rms" if isinstance(scaling, Rms) else "peak"
    return {"mode": mode, "target": float(scaling.target)}


def scaling_from_document(doc) -> Rms | PeakAbs | None:
    if doc is None or doc.get("mode", "none") == "none":
        return None
    cls = {"rms": Rms, "peak": PeakAbs}[doc["mode"]]
    return cls(float(doc["target"]))


def realization_to_document(real: SignalRealization, scaling=None) -> dict:
    return {
        "spec": spec_to_document(real.spec),
        "seed": real.seed,
        "n_periods": real.n_periods,
        "scaling": scaling_to_document(scaling),
        "amplitude_scale": real.amplitude_scale,
    }


def realization_from_document(doc: dict) -> SignalRealization:
    spec = spec_from_document(doc["spec"])
    return realize(
        spec,
        seed=int(doc["seed"]),
        n_periods=int(doc["n_periods"]),
        scaling=scaling_from_document(doc.get("scaling")),
    )


def timeseries_to_csv(path, x: np.ndarray):
    write_csv(path, ["sample_index", "value"], [np.arange(len(x)), np.asarray(x)])


# ---------------------------------------------------------------------------
# wh_sim


def tf_to_document(tf: RationalTF) -> dict:
    return {"num": [float(b) for b in tf.num], "den": [float(a) for a in tf.den]}


def tf_from_document(doc: dict, enforce_stability: bool = True) -> RationalTF:
    return RationalTF(np.asarray(doc["num"], dtype=float),
                      np.asarray(doc["den"], dtype=float),
                      enforce_stability=enforce_stability)


def model_to_document(model: WhModel) -> dict:
    return {
        "r": tf_to_document(model.r),
        "f": [float(c) for c in model.f.coeffs],
        "s": tf_to_document(model.s),
    }


def model_from_document(doc: dict) -> WhModel:
    return WhModel(
        r=tf_from_document(doc["r"]),
        f=PolynomialNonlinearity(np.asarray(doc["f"], dtype=float)),
        s=tf_from_document(doc["s"]),
    )


def noise_to_document(noise: NoiseSpec | None) -> dict | None:
    if noise is None:
        return None
    doc = {"variance": float(noise.variance)}
    if noise.shaping is not None:
        doc["shaping"] = tf_to_document(noise.shaping)
    return doc


def noise_from_document(doc) -> NoiseSpec | None:
    if doc is None:
        return None
    shaping = tf_from_document(doc["shaping"]) if doc.get("shaping") else None
    return NoiseSpec(variance=float(doc["variance"]), shaping=shaping)


def record_to_csv(path, record: SimRecord, debug_internals: bool = False):
    t = np.arange(len(record.u))
    header = ["t", "u", "y"]
    cols = [t, record.u, record.y]
    if debug_internals:
        header += ["x", "w"]
        cols += [record.x, record.w]
    write_csv(path, header, cols)


def record_from_csv(path, n_period_samples: int) -> SimRecord:
    table = read_csv(path)
    u = table["u"]
    y = table["y"]
    if len(u) % n_period_samples:
        raise ValueError(
            f"record length {len(u)} in {path} is not a multiple of N = {n_period_samples}"
        )
    empty = np.full(len(u), np.nan)
    return SimRecord(
        u=u,
        y=y,
        x=table.get("x", empty),
        w=table.get("w", empty),
        n_period_samples=n_period_samples,
        n_periods=len(u) // n_period_samples,
    )


# ---------------------------------------------------------------------------
# frf


def frf_to_csv(path, est: FrfEstimate):
    write_csv(
        path,
        ["line", "freq_hz", "re_mean", "im_mean", "var_noise", "var_total"],
        [est.lines, est.freq_hz, est.mean.real, est.mean.imag, est.var_noise, est.var_total],
    )


def frf_to_document(est: FrfEstimate) -> dict:
    return {
        "grid": {"n_samples": est.grid.n_samples, "sample_rate": est.grid.sample_rate},
        "lines": [int(k) for k in est.lines],
        "mean": cplx_list(est.mean),
        "var_noise": [float(v) for v in est.var_noise],
        "var_total": [float(v) for v in est.var_total],
        "n_realizations": est.n_realizations,
        "n_periods": est.n_periods,
    }


def frf_from_document(doc: dict) -> FrfEstimate:
    return FrfEstimate(
        grid=FrequencyGrid(int(doc["grid"]["n_samples"]), float(doc["grid"]["sample_rate"])),
        lines=np.asarray(doc["lines"], dtype=int),
        mean=np.asarray([from_cplx(v) for v in doc["mean"]]),
        var_noise=np.asarray(doc["var_noise"], dtype=float),
        var_total=np.asarray(doc["var_total"], dtype=float),
        n_realizations=int(doc["n_realizations"]),
        n_periods=int(doc["n_periods"]),
    )


def dominance_to_document(rep: DominanceReport) -> dict:
    return {
        "c0": rep.c0,
        "c_minus_s": cplx(rep.c_minus_s),
        "c_plus_s": cplx(rep.c_plus_s),
        "ratio_bound_ok": rep.ratio_bound_ok,
        "alpha_lower_bound": "inf" if np.isinf(rep.alpha_lower_bound) else rep.alpha_lower_bound,
    }


def time_origin_to_document(est: TimeOriginEstimate) -> dict:
    return {
        "delta_per_couple": {str(m): v for m, v in est.delta_per_couple.items()},
        "pooled_delta": est.pooled_delta,
    }


# ---------------------------------------------------------------------------
# rational_fit


def fit_to_document(fit: FitResult) -> dict:
    complex_coeffs = isinstance(fit.model, ComplexRationalTF)
    if complex_coeffs:
        num, den = cplx_list(fit.model.num), cplx_list(fit.model.den)
    else:
        num = [float(b) for b in fit.model.num]
        den = [float(a) for a in fit.model.den]
    return {
        "complex_coeffs": complex_coeffs,
        "num": num,
        "den": den,
        "cost": fit.cost,
        "iterations": fit.iterations,
        "converged": fit.converged,
        "poles": cplx_list(fit.poles),
        "zeros": cplx_list(fit.zeros),
        "gain": cplx(fit.gain),
        "near_cancellations": [[cplx(p), cplx(z)] for p, z in fit.near_cancellations],
    }


def fit_from_document(doc: dict) -> FitResult:
    if doc["complex_coeffs"]:
        model = ComplexRationalTF(
            np.asarray([from_cplx(v) for v in doc["num"]]),
            np.asarray([from_cplx(v) for v in doc["den"]]),
        )
    else:
        model = RationalTF(
            np.asarray(doc["num"], dtype=float),
            np.asarray(doc["den"], dtype=float),
            enforce_stability=False,
        )
    return FitResult(
        model=model,
        cost=float(doc["cost"]),
        iterations=int(doc["iterations"]),
        converged=bool(doc["converged"]),
        poles=np.asarray([from_cplx(v) for v in doc["poles"]]),
        zeros=np.asarray([from_cplx(v) for v in doc["zeros"]]),
        gain=from_cplx(doc["gain"]),
        near_cancellations=tuple(
            (from_cplx(p), from_cplx(z)) for p, z in doc["near_cancellations"]
        ),
    )


# ---------------------------------------------------------------------------
# decompose


def assignment_to_csv(path, report: AssignmentReport):
    entries = report.entries
    write_csv(
        path,
        ["kind", "re", "im", "label", "shift_deg", "expected_shift_deg", "confidence"],
        [
            np.asarray([e.kind for e in entries]),
            np.asarray([e.value.real for e in entries]),
            np.asarray([e.value.imag for e in entries]),
            np.asarray([e.label.value for e in entries]),
            np.asarray([e.angular_shift_deg for e in entries]),
            np.asarray([e.expected_shift_deg for e in entries]),
            np.asarray([e.confidence for e in entries]),
        ],
    )


def assignment_to_document(report: AssignmentReport) -> dict:
    return {
        "expected_shift_deg": report.expected_shift_deg,
        "threshold_fraction": report.threshold_fraction,
        "entries": [
            {
                "kind": e.kind,
                "value": cplx(e.value),
                "conjugate_partner": cplx(e.conjugate_partner),
                "angular_shift_deg": e.angular_shift_deg,
                "expected_shift_deg": e.expected_shift_deg,
                "modulus_ratio": e.modulus_ratio,
                "label": e.label.value,
                "confidence": e.confidence,
                "flagged_cancellation": e.flagged_cancellation,
            }
            for e in report.entries
        ],
    }


def assignment_from_document(doc: dict) -> AssignmentReport:
    entries = tuple(
        RootAssignment(
            kind=e["kind"],
            value=from_cplx(e["value"]),
            conjugate_partner=from_cplx(e["conjugate_partner"]),
            angular_shift_deg=float(e["angular_shift_deg"]),
            expected_shift_deg=float(e["expected_shift_deg"]),
            modulus_ratio=float(e["modulus_ratio"]),
            label=RootLabel(e["label"]),
            confidence=float(e["confidence"]),
            flagged_cancellation=bool(e["flagged_cancellation"]),
        )
        for e in doc["entries"]
    )
    return AssignmentReport(
        entries=entries,
        expected_shift_deg=float(doc["expected_shift_deg"]),
        threshold_fraction=float(doc["threshold_fraction"]),
    )


def initial_wh_to_document(est: InitialWhEstimate) -> dict:
    return {
        "r_hat": tf_to_document(est.r_hat),
        "s_hat": tf_to_document(est.s_hat),
        "f_hat": [float(c) for c in est.f_hat.coeffs],
        "gain_convention": est.gain_convention,
        "fit_residual": est.fit_residual,
    }


def initial_wh_from_document(doc: dict) -> InitialWhEstimate:
    return InitialWhEstimate(
        r_hat=tf_from_document(doc["r_hat"]),
        s_hat=tf_from_document(doc["s_hat"]),
        f_hat=PolynomialNonlinearity(np.asarray(doc["f_hat"], dtype=float)),
        gain_convention=doc["gain_convention"],
        fit_residual=float(doc["fit_residual"]),
    )

"""Experiment runner: design -> simulate/ingest -> estimate -> fit ->
assign -> initialize, driven by a JSON config.

Exit codes: 0 success, 2 config error, 3 numerical failure, 4 indistinct
shifted-response data (no usable nonlinear content at the collection
lines).  The output directory can be overridden with WHINIT_OUT_DIR.
Identical config and seed give byte-identical numeric outputs; --threads
only changes wall time.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import decompose, frf, rational_fit, serialize, standin
from .rational_fit import RationalFitError
from .signals import FrequencyGrid, MultisineSpec, SignalKind, design_multisine, realize
from .wh_sim import TransientError, WhModel, simulate

INDISTINCT_SIGMA = 3.0
INDISTINCT_FRACTION = 0.95


class ConfigError(Exception):
    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class IndistinctDataError(Exception):
    pass


# ---------------------------------------------------------------------------
# configuration


@dataclass
class SignalConfig:
    kind: str
    n_samples: int
    sample_rate: float = 1.0
    d: int | None = None
    c_shift: int | None = None
    i_max: int | None = None
    band: tuple[float, float] | None = None
    lines: list[int] | None = None
    amplitude: float | None = None
    scaling: dict | None = None
    seed: int = 0
    n_realizations: int = 2
    n_periods: int = 2
    discard_periods: int = 1


@dataclass
class EstimationConfig:
    bla_orders: tuple[int, int] = (3, 6)
    sbla_orders: tuple[int, int] = (3, 6)
    threshold_fraction: float = 0.5
    compensate_time_origin: bool = True
    degree_max: int = 3
    snap_to_bla: bool = True
    # block-building tolerances, wider than the library defaults so noisy
    # small-M runs complete with a rough model instead of aborting
    near_real_tol: float = 0.05
    pair_tol: float = 0.1


@dataclass
class ExperimentConfig:
    signal: SignalConfig
    system: dict
    estimation: EstimationConfig
    noise: dict | None = None
    bla_signal: SignalConfig | None = None
    output_directory: str = "whinit_out"
    debug_internals: bool = False

    @classmethod
    def from_document(cls, doc: dict) -> "ExperimentConfig":
        problems = []

        def section(name, required=True):
            if name not in doc:
                if required:
                    problems.append(f"{name}: missing section")
                return None
            return doc[name]

        def build_signal(sec, prefix):
            try:
                sig = SignalConfig(**sec)
            except TypeError as exc:
                problems.append(f"{prefix}: {exc}")
                return None
            if sig.kind not in [k.value for k in SignalKind]:
                problems.append(f"{prefix}.kind: unknown kind {sig.kind!r}")
            if sig.n_samples <= 0 or sig.n_samples % 2:
                problems.append(f"{prefix}.n_samples: must be positive and even")
            if sig.n_realizations < 2:
                problems.append(f"{prefix}.n_realizations: need at least 2")
            if sig.n_periods < 1:
                problems.append(f"{prefix}.n_periods: need at least 1")
            if sig.discard_periods < 1:
                problems.append(f"{prefix}.discard_periods: need at least 1")
            if sig.band is not None:
                sig.band = tuple(sig.band)
            if sig.scaling is not None and sig.scaling.get("mode") not in ("rms", "peak", "none"):
                problems.append(f"{prefix}.scaling.mode: must be rms, peak or none")
            return sig

        signal_sec = section("signal")
        signal = build_signal(signal_sec, "signal") if signal_sec else None

        bla_signal = None
        if doc.get("bla_signal") is not None:
            bla_signal = build_signal(doc["bla_signal"], "bla_signal")

        system = section("system")
        if system is not None:
            mode = system.get("mode")
            if mode not in ("standin", "model"):
                problems.append("system.mode: must be 'standin' or 'model'")
            elif mode == "model":
                for key in ("r", "f", "s"):
                    if key not in system:
                        problems.append(f"system.{key}: missing for mode 'model'")

        est_sec = section("estimation", required=False) or {}
        try:
            if "bla_orders" in est_sec:
                est_sec["bla_orders"] = tuple(est_sec["bla_orders"])
            if "sbla_orders" in est_sec:
                est_sec["sbla_orders"] = tuple(est_sec["sbla_orders"])
            estimation = EstimationConfig(**est_sec)
        except TypeError as exc:
            problems.append(f"estimation: {exc}")
            estimation = EstimationConfig()
        if not (0.0 < estimation.threshold_fraction <= 1.0):
            problems.append("estimation.threshold_fraction: must be in (0, 1]")
        if estimation.degree_max < 1:
            problems.append("estimation.degree_max: must be >= 1")

        noise = doc.get("noise")
        if noise is not None and noise.get("variance", 0.0) < 0:
            problems.append("noise.variance: must be nonnegative")

        out_sec = doc.get("output", {})
        if problems:
            raise ConfigError(problems)
        return cls(
            signal=signal,
            bla_signal=bla_signal,
            system=system,
            estimation=estimation,
            noise=noise,
            output_directory=out_sec.get("directory", "whinit_out"),
            debug_internals=bool(out_sec.get("debug_internals", False)),
        )

    def to_document(self) -> dict:
        def sig_doc(sig):
            if sig is None:
                return None
            return {
                "kind": sig.kind,
                "n_samples": sig.n_samples,
                "sample_rate": sig.sample_rate,
                "d": sig.d,
                "c_shift": sig.c_shift,
                "i_max": sig.i_max,
                "band": list(sig.band) if sig.band else None,
                "lines": sig.lines,
                "amplitude": sig.amplitude,
                "scaling": sig.scaling,
                "seed": sig.seed,
                "n_realizations": sig.n_realizations,
                "n_periods": sig.n_periods,
                "discard_periods": sig.discard_periods,
            }

        return {
            "signal": sig_doc(self.signal),
            "bla_signal": sig_doc(self.bla_signal),
            "system": self.system,
            "noise": self.noise,
            "estimation": {
                "bla_orders": list(self.estimation.bla_orders),
                "sbla_orders": list(self.estimation.sbla_orders),
                "threshold_fraction": self.estimation.threshold_fraction,
                "compensate_time_origin": self.estimation.compensate_time_origin,
                "degree_max": self.estimation.degree_max,
                "snap_to_bla": self.estimation.snap_to_bla,
                "near_real_tol": self.estimation.near_real_tol,
                "pair_tol": self.estimation.pair_tol,
            },
            "output": {"directory": self.output_directory, "debug_internals": self.debug_internals},
        }


def _design_from_config(sig: SignalConfig) -> MultisineSpec:
    grid = FrequencyGrid(sig.n_samples, sig.sample_rate)
    return design_multisine(
        SignalKind(sig.kind),
        grid,
        band=sig.band,
        lines=sig.lines,
        amplitude_profile=sig.amplitude,
        d=sig.d,
        c_shift=sig.c_shift,
        i_max=sig.i_max,
    )


def _system_from_config(cfg: ExperimentConfig) -> WhModel:
    if cfg.system["mode"] == "standin":
        return standin.standin_model()
    return serialize.model_from_document(cfg.system)


def _derived_seed(base: int, stream: int, index: int) -> int:
    return int(np.random.SeedSequence((base, stream, index)).generate_state(1, np.uint64)[0])


# ---------------------------------------------------------------------------
# pipeline stages (each reads/writes artifacts in out_dir)


def _out_dir(cfg: ExperimentConfig, override: str | None) -> Path:
    env = os.environ.get("WHINIT_OUT_DIR")
    path = Path(override or env or cfg.output_directory)
    path.mkdir(parents=True, exist_ok=True)
    return path


def stage_design(cfg: ExperimentConfig, out: Path) -> MultisineSpec:
    spec = _design_from_config(cfg.signal)
    serialize.json_dump(serialize.spec_to_document(spec), out / "spec.json")
    if cfg.bla_signal is not None:
        bla_spec = _design_from_config(cfg.bla_signal)
        serialize.json_dump(serialize.spec_to_document(bla_spec), out / "spec_bla.json")
    serialize.json_dump(cfg.to_document(), out / "config_resolved.json")
    return spec


def _simulate_group(cfg, sig: SignalConfig, spec, model, noise, out, group, stream, threads):
    gdir = out / "records" / group
    gdir.mkdir(parents=True, exist_ok=True)
    sdir = out / "signals" / group
    sdir.mkdir(parents=True, exist_ok=True)
    scaling = serialize.scaling_from_document(sig.scaling)

    def one(i):
        real = realize(spec, _derived_seed(sig.seed, stream, i), sig.n_periods, scaling)
        record = simulate(
            model,
            real,
            n_periods=sig.n_periods,
            discard_periods=sig.discard_periods,
            noise=noise,
            seed=_derived_seed(sig.seed, stream + 1, i),
        )
        return real, record

    indices = range(sig.n_realizations)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, indices))
    else:
        results = [one(i) for i in indices]

    entries = []
    for i, (real, record) in enumerate(results):
        rec_path = gdir / f"real{i:03d}.csv"
        serialize.record_to_csv(rec_path, record, debug_internals=cfg.debug_internals)
        serialize.timeseries_to_csv(sdir / f"real{i:03d}.csv", real.period)
        entries.append(
            {
                "record": str(rec_path.relative_to(out)),
                "seed": real.seed,
                "amplitude_scale": real.amplitude_scale,
            }
        )
    return entries


def stage_simulate(cfg: ExperimentConfig, out: Path, threads: int = 1):
    spec = serialize.spec_from_document(serialize.json_load(out / "spec.json"))
    model = _system_from_config(cfg)
    noise = serialize.noise_from_document(cfg.noise)
    manifest = {
        "n_period_samples": spec.grid.n_samples,
        "coupled": _simulate_group(cfg, cfg.signal, spec, model, noise, out, "coupled", 0, threads),
    }
    if cfg.bla_signal is not None:
        bla_spec = serialize.spec_from_document(serialize.json_load(out / "spec_bla.json"))
        manifest["bla"] = _simulate_group(
            cfg, cfg.bla_signal, bla_spec, model, noise, out, "bla", 2, threads
        )
    serialize.json_dump(manifest, out / "records_manifest.json")


def stage_ingest(spec_path: str, record_paths, out: Path):
    spec = serialize.spec_from_document(serialize.json_load(spec_path))
    serialize.json_dump(serialize.spec_to_document(spec), out / "spec.json")
    gdir = out / "records" / "coupled"
    gdir.mkdir(parents=True, exist_ok=True)
    entries = []
    for i, src in enumerate(record_paths):
        record = serialize.record_from_csv(src, spec.grid.n_samples)
        dst = gdir / f"real{i:03d}.csv"
        serialize.record_to_csv(dst, record)
        entries.append({"record": str(dst.relative_to(out)), "seed": None, "amplitude_scale": 1.0})
    if len(entries) < 2:
        raise ConfigError(["ingest: need at least two realization records"])
    manifest = {"n_period_samples": spec.grid.n_samples, "coupled": entries}
    serialize.json_dump(manifest, out / "records_manifest.json")


def _load_records(out: Path, group: str):
    manifest = serialize.json_load(out / "records_manifest.json")
    if group not in manifest:
        raise ConfigError([f"{group}: no such record group in manifest; run simulate first"])
    n = manifest["n_period_samples"]
    return [serialize.record_from_csv(out / e["record"], n) for e in manifest[group]]


def stage_bla(cfg: ExperimentConfig, out: Path):
    manifest = serialize.json_load(out / "records_manifest.json")
    if "bla" in manifest:
        spec = serialize.spec_from_document(serialize.json_load(out / "spec_bla.json"))
        records = _load_records(out, "bla")
    else:
        spec = serialize.spec_from_document(serialize.json_load(out / "spec.json"))
        records = _load_records(out, "coupled")
    est = frf.estimate_bla(records, spec)
    serialize.frf_to_csv(out / "bla.csv", est)
    serialize.json_dump(serialize.frf_to_document(est), out / "bla.json")


def stage_sbla(cfg: ExperimentConfig, out: Path, compensate: bool | None = None):
    spec = serialize.spec_from_document(serialize.json_load(out / "spec.json"))
    records = _load_records(out, "coupled")
    if compensate is None:
        compensate = cfg.estimation.compensate_time_origin
    minus, plus, origin = frf.estimate_shifted_bla(records, spec, compensate_time_origin=compensate)
    serialize.frf_to_csv(out / "sbla_minus.csv", minus)
    serialize.frf_to_csv(out / "sbla_plus.csv", plus)
    serialize.json_dump(serialize.frf_to_document(minus), out / "sbla_minus.json")
    serialize.json_dump(serialize.frf_to_document(plus), out / "sbla_plus.json")
    serialize.json_dump(serialize.time_origin_to_document(origin), out / "time_origin.json")

    model = _system_from_config(cfg) if cfg.system["mode"] != "ingest" else None
    if model is not None:
        report = frf.dominance_report(spec, model=model, degree=max(3, cfg.estimation.degree_max))
        serialize.json_dump(serialize.dominance_to_document(report), out / "dominance.json")

    within = frf.fraction_within_noise(minus, INDISTINCT_SIGMA)
    if within >= INDISTINCT_FRACTION:
        raise IndistinctDataError(
            f"shifted response indistinct from zero: {within:.0%} of collection lines "
            f"within {INDISTINCT_SIGMA:.0f} standard errors; the system looks linear "
            "(or the excitation level is too low)"
        )


def stage_fit(cfg: ExperimentConfig, out: Path):
    est = cfg.estimation
    minus = serialize.frf_from_document(serialize.json_load(out / "sbla_minus.json"))
    fit_minus = rational_fit.fit_complex_tf(minus, *est.sbla_orders)
    serialize.json_dump(serialize.fit_to_document(fit_minus), out / "fit_sbla_minus.json")
    if (out / "bla.json").exists():
        bla = serialize.frf_from_document(serialize.json_load(out / "bla.json"))
        fit_bla = rational_fit.fit_real_tf(bla, *est.bla_orders)
        serialize.json_dump(serialize.fit_to_document(fit_bla), out / "fit_bla.json")


def stage_assign(cfg: ExperimentConfig, out: Path, threshold: float | None = None):
    spec = serialize.spec_from_document(serialize.json_load(out / "spec.json"))
    fit_minus = serialize.fit_from_document(serialize.json_load(out / "fit_sbla_minus.json"))
    report = decompose.assign_roots(
        fit_minus, spec,
        threshold_fraction=threshold if threshold is not None else cfg.estimation.threshold_fraction,
    )
    serialize.assignment_to_csv(out / "assignment.csv", report)
    serialize.json_dump(serialize.assignment_to_document(report), out / "assignment.json")


def stage_init_wh(cfg: ExperimentConfig, out: Path):
    spec = serialize.spec_from_document(serialize.json_load(out / "spec.json"))
    fit_minus = serialize.fit_from_document(serialize.json_load(out / "fit_sbla_minus.json"))
    report = serialize.assignment_from_document(serialize.json_load(out / "assignment.json"))
    bla_fit = None
    if cfg.estimation.snap_to_bla and (out / "fit_bla.json").exists():
        bla_fit = serialize.fit_from_document(serialize.json_load(out / "fit_bla.json"))
    try:
        r_hat, s_hat = decompose.build_initial_blocks(
            report, fit_minus, spec, bla_fit=bla_fit,
            near_real_tol=cfg.estimation.near_real_tol,
            pair_tol=cfg.estimation.pair_tol,
            drop_unpairable_zeros=True,
        )
    except RationalFitError:
        # small-M estimates may not support a clean split; fall back to a
        # degraded build so the run still yields a usable initial model
        r_hat, s_hat = decompose.build_initial_blocks(
            report, fit_minus, spec, bla_fit=bla_fit, best_effort=True
        )
    records = _load_records(out, "coupled")
    _, initial = decompose.estimate_nonlinearity(
        r_hat, s_hat, records[0], cfg.estimation.degree_max
    )
    serialize.json_dump(serialize.initial_wh_to_document(initial), out / "initial_wh.json")
    return initial


def _write_summary(cfg: ExperimentConfig, out: Path):
    report = serialize.assignment_from_document(serialize.json_load(out / "assignment.json"))
    initial = serialize.initial_wh_from_document(serialize.json_load(out / "initial_wh.json"))
    pole_shifts = [
        {
            "value": serialize.cplx(e.value),
            "shift_deg": e.angular_shift_deg,
            "label": e.label.value,
            "confidence": e.confidence,
        }
        for e in report.entries
        if e.kind == "pole"
    ]
    summary = {
        "expected_shift_deg": report.expected_shift_deg,
        "poles": pole_shifts,
        "n_input_poles": len(report.by_label("pole", decompose.RootLabel.INPUT_R)),
        "n_output_poles": len(report.by_label("pole", decompose.RootLabel.OUTPUT_S)),
        "n_unclassified_poles": len(report.by_label("pole", decompose.RootLabel.UNCLASSIFIED)),
        "initial_fit_residual": initial.fit_residual,
    }
    serialize.json_dump(summary, out / "summary.json")
    return summary


def run_pipeline(cfg: ExperimentConfig, out_dir: str | None = None, threads: int = 1) -> dict:
    out = _out_dir(cfg, out_dir)
    stage_design(cfg, out)
    stage_simulate(cfg, out, threads=threads)
    stage_bla(cfg, out)
    stage_sbla(cfg, out)
    stage_fit(cfg, out)
    stage_assign(cfg, out)
    stage_init_wh(cfg, out)
    return _write_summary(cfg, out)


# ---------------------------------------------------------------------------
# argument parsing


def _load_config(path: str) -> ExperimentConfig:
    try:
        doc = serialize.json_load(path)
    except FileNotFoundError:
        raise ConfigError([f"config file not found: {path}"])
    except ValueError as exc:
        raise ConfigError([f"config is not valid JSON: {exc}"])
    return ExperimentConfig.from_document(doc)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="whinit",
        description="Wiener-Hammerstein initial estimates from phase-coupled multisine experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("design", help="design a multisine and write spec.json")
    p.add_argument("--kind", required=True,
                   choices=[k.value for k in SignalKind])
    p.add_argument("--n", type=int, required=True, help="samples per period")
    p.add_argument("--fs", type=float, default=1.0, help="sample rate in Hz")
    p.add_argument("--d", type=int)
    p.add_argument("--cshift", type=int)
    p.add_argument("--imax", type=int)
    p.add_argument("--band", type=float, nargs=2, metavar=("FMIN", "FMAX"))
    p.add_argument("--lines", type=int, nargs="+")
    p.add_argument("--amplitude", type=float)
    p.add_argument("--out", default="spec.json")

    for name, extra in [
        ("simulate", ["debug"]),
        ("bla", []),
        ("sbla", ["compensation"]),
        ("fit", []),
        ("assign", ["threshold"]),
        ("init-wh", []),
        ("run", ["threads", "debug"]),
    ]:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
        p.add_argument("--out-dir", default=None)
        if "compensation" in extra:
            p.add_argument("--no-time-compensation", action="store_true")
        if "threshold" in extra:
            p.add_argument("--threshold", type=float, default=None)
        if "threads" in extra:
            p.add_argument("--threads", type=int, default=1)
        if "debug" in extra:
            p.add_argument("--debug-internals", action="store_true",
                           help="also write the internal x and w signals to the record CSVs")

    p = sub.add_parser("ingest", help="import external (t, u, y) records")
    p.add_argument("--spec", required=True)
    p.add_argument("--records", nargs="+", required=True)
    p.add_argument("--out-dir", required=True)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "design":
            grid = FrequencyGrid(args.n, args.fs)
            spec = design_multisine(
                SignalKind(args.kind), grid,
                band=tuple(args.band) if args.band else None,
                lines=args.lines, amplitude_profile=args.amplitude,
                d=args.d, c_shift=args.cshift, i_max=args.imax,
            )
            serialize.json_dump(serialize.spec_to_document(spec), args.out)
            print(f"wrote {args.out}: {len(spec.excited_lines)} excited lines")
            return 0

        if args.command == "ingest":
            out = Path(os.environ.get("WHINIT_OUT_DIR", args.out_dir))
            out.mkdir(parents=True, exist_ok=True)
            stage_ingest(args.spec, args.records, out)
            print(f"ingested {len(args.records)} records into {out}")
            return 0

        cfg = _load_config(args.config)
        if getattr(args, "debug_internals", False):
            cfg.debug_internals = True
        out = _out_dir(cfg, args.out_dir)
        if args.command == "simulate":
            stage_design(cfg, out)
            stage_simulate(cfg, out)
        elif args.command == "bla":
            stage_bla(cfg, out)
        elif args.command == "sbla":
            stage_sbla(cfg, out, compensate=False if args.no_time_compensation else None)
        elif args.command == "fit":
            stage_fit(cfg, out)
        elif args.command == "assign":
            stage_assign(cfg, out, threshold=args.threshold)
        elif args.command == "init-wh":
            stage_init_wh(cfg, out)
            _write_summary(cfg, out)
        elif args.command == "run":
            summary = run_pipeline(cfg, args.out_dir, threads=args.threads)
            print(
                f"expected shift {summary['expected_shift_deg']:.2f} deg; "
                f"{summary['n_input_poles']} input / {summary['n_output_poles']} output / "
                f"{summary['n_unclassified_poles']} unclassified poles; "
                f"initial model residual {summary['initial_fit_residual']:.3e}"
            )
        return 0
    except ConfigError as exc:
        for problem in exc.problems:
            print(f"config error: {problem}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"config error: missing upstream artifact {exc.filename}; "
              "run the earlier pipeline stages first", file=sys.stderr)
        return 2
    except IndistinctDataError as exc:
        print(f"indistinct data: {exc}", file=sys.stderr)
        return 4
    except (RationalFitError, TransientError, np.linalg.LinAlgError, ValueError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())

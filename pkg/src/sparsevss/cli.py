"""
Command-line front end.

    sparsevss mse --snr 10,20 --sparsity 1,4 --out results/
    sparsevss trace-step-size --step-grid 0.5,1.0
    sparsevss ber --algo ISS,RZA-VSS --modulation 16QAM,64QAM,128QAM
    sparsevss sweep --algo ZA-VSS --gammas 1e-5,2e-5,5e-5

Each command writes one CSV (and/or JSON) per algorithm and setting into the
output directory, plus ``manifest.json`` with the resolved configuration,
package versions and a SHA-256 of every file. ``--plot`` additionally
renders PNG figures next to the data. Exit status is 0 on success; on
failure ``error.json`` is written (when possible) and the same record is
printed to stderr.
"""
from __future__ import annotations

import csv
import hashlib
import json
import logging
import platform
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, ExperimentSpec, parse_config
from .experiment import monte_carlo

log = logging.getLogger("sparsevss")

MSE_COLUMNS = ["iteration", "mse"]
BER_COLUMNS = ["snr_db", "scheme", "order", "algorithm", "ber", "errors", "bits"]
SWEEP_COLUMNS = ["algorithm", "T", "snr_db", "gamma", "steady_state_mse", "stderr", "mean_final_iter"]


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "" if np.isnan(v) else repr(float(v))
    return str(v)


def write_csv(path: Path, columns, rows) -> Path:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def write_json(path: Path, doc) -> Path:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True, default=_json_default) + "\n")
    return path


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def _tag(v: float) -> str:
    return f"{v:g}".replace("+", "")


class Report:
    """Collects output files for one invocation."""

    def __init__(self, spec: ExperimentSpec):
        self.spec = spec
        self.out = spec.output_dir
        self.out.mkdir(parents=True, exist_ok=True)
        self.files: list[Path] = []
        self.figures: list[Path] = []

    def emit(self, stem: str, columns, rows, summary: dict) -> None:
        if self.spec.format in ("csv", "both"):
            self.files.append(write_csv(self.out / f"{stem}.csv", columns, rows))
        if self.spec.format in ("json", "both"):
            doc = dict(summary)
            doc["columns"] = list(columns)
            doc["rows"] = [list(r) for r in rows]
            self.files.append(write_json(self.out / f"{stem}.json", doc))

    def figure(self, fn, name: str, *args, **kwargs) -> None:
        if self.spec.options.get("plot"):
            self.figures.append(fn(*args, path=self.out / name, **kwargs))


def _trace_rows(mc):
    steps = mc.mean_steps()
    return [[i + 1, m, *mu] for i, (m, mu) in enumerate(zip(mc.mse, steps))]


def _trace_columns(N_r):
    return MSE_COLUMNS + [f"mu_r{r + 1}" for r in range(N_r)]


def cmd_mse(spec: ExperimentSpec, report: Report) -> None:
    from .plotting import plot_mse_traces

    window = spec.options["window"]
    for T in spec.sparsity:
        for snr in spec.snr_db:
            curves = {}
            for algo in spec.algorithms:
                cfg = spec.run_config(algo, T=T, snr_db=snr)
                log.info("mse %s T=%d snr=%g dB (%d runs)", algo.variant.value, T, snr, cfg.num_runs)
                mc = monte_carlo(cfg)
                stem = f"mse_{algo.variant.value}_T{T}_snr{_tag(snr)}"
                report.emit(stem, _trace_columns(cfg.N_r), _trace_rows(mc), mc.summary(window))
                curves[algo.variant.value] = mc.mse
            report.figure(plot_mse_traces, f"mse_T{T}_snr{_tag(snr)}.png", curves,
                          title=f"T = {T}, SNR = {snr:g} dB")


def cmd_trace_step_size(spec: ExperimentSpec, report: Report) -> None:
    from .plotting import plot_step_traces

    window = spec.options["window"]
    for T in spec.sparsity:
        for snr in spec.snr_db:
            curves = {}
            for algo in spec.algorithms:
                for value in spec.options["step_grid"]:
                    if algo.variant.variable_step:
                        a, label = replace(algo, mu_max=value), f"{algo.variant.value} mu_max={value:g}"
                    else:
                        a, label = replace(algo, mu=value), f"{algo.variant.value} mu={value:g}"
                    cfg = spec.run_config(a, T=T, snr_db=snr)
                    mc = monte_carlo(cfg)
                    stem = f"step_{algo.variant.value}_step{_tag(value)}_T{T}_snr{_tag(snr)}"
                    report.emit(stem, _trace_columns(cfg.N_r), _trace_rows(mc), mc.summary(window))
                    curves[label] = mc.mean_steps()[:, 0]
            report.figure(plot_step_traces, f"step_T{T}_snr{_tag(snr)}.png", curves,
                          title=f"T = {T}, SNR = {snr:g} dB, receive antenna 1")


def cmd_ber(spec: ExperimentSpec, report: Report) -> None:
    from .comms import ber_curve
    from .plotting import plot_ber

    mods = spec.options["modulations"]
    bits = spec.options["bits_per_point"]
    for T in spec.sparsity:
        all_points = []
        jobs = [(a, False) for a in spec.algorithms]
        if spec.options["perfect_csi"]:
            jobs.append((spec.algorithms[0], True))
        for algo, perfect in jobs:
            cfg = spec.run_config(algo, T=T)
            pts = ber_curve(cfg, mods, spec.snr_db, bits, perfect_csi=perfect)
            label = pts[0].algorithm
            log.info("ber %s T=%d done", label, T)
            rows = [[p.snr_db, p.scheme, p.order, p.algorithm, p.ber, p.errors, p.bits] for p in pts]
            summary = {"config": cfg.as_dict(), "points": [p.as_dict() for p in pts]}
            report.emit(f"ber_{label}_T{T}", BER_COLUMNS, rows, summary)
            all_points += pts
        report.figure(plot_ber, f"ber_T{T}.png", all_points, title=f"T = {T}")


def cmd_sweep(spec: ExperimentSpec, report: Report) -> None:
    from .plotting import plot_sweep

    window = spec.options["window"]
    for algo in spec.algorithms:
        rows, dicts = [], []
        gammas = spec.options["gammas"] if algo.variant.penalty else [0.0]
        for T in spec.sparsity:
            for snr in spec.snr_db:
                for g in gammas:
                    a = algo
                    if algo.variant.penalty == "za":
                        a = replace(algo, gamma_za=g)
                    elif algo.variant.penalty == "rza":
                        a = replace(algo, gamma_rza=g)
                    mc = monte_carlo(spec.run_config(a, T=T, snr_db=snr))
                    s = mc.summary(window)
                    row = [algo.variant.value, T, snr, g, s["steady_state_mse"],
                           s["steady_state_stderr"], s["mean_final_iter"]]
                    rows.append(row)
                    dicts.append(dict(zip(SWEEP_COLUMNS, row)))
                    log.info("sweep %s T=%d snr=%g gamma=%g -> %.3e", *row[:5])
        report.emit(f"sweep_{algo.variant.value}", SWEEP_COLUMNS, rows,
                    {"config": spec.run_config(algo).as_dict(), "window": window})
        report.figure(plot_sweep, f"sweep_{algo.variant.value}.png", dicts, title=algo.variant.value)


COMMANDS = {
    "mse": cmd_mse,
    "trace-step-size": cmd_trace_step_size,
    "ber": cmd_ber,
    "sweep": cmd_sweep,
}


def sha256(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def versions() -> dict:
    import matplotlib

    return {
        "sparsevss": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "matplotlib": matplotlib.__version__,
    }


def run(spec: ExperimentSpec) -> Path:
    """Execute ``spec``; returns the manifest path."""
    t0 = time.time()
    report = Report(spec)
    COMMANDS[spec.command](spec, report)
    manifest = {
        "command": spec.command,
        "spec": spec.echo(),
        "wall_clock_s": round(time.time() - t0, 3),
        "versions": versions(),
        "files": [{"path": p.name, "sha256": sha256(p), "bytes": p.stat().st_size}
                  for p in report.files + report.figures],
    }
    return write_json(spec.output_dir / "manifest.json", manifest)


def _error_record(exc: BaseException, command=None) -> dict:
    return {"status": "error", "error": type(exc).__name__, "message": str(exc), "command": command}


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    argv = sys.argv[1:] if argv is None else argv
    spec = None
    try:
        spec = parse_config(argv)
        manifest = run(spec)
    except ConfigError as exc:
        print(json.dumps(_error_record(exc)), file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - report any failure as a record
        rec = _error_record(exc, spec.command if spec else None)
        if spec is not None:
            try:
                write_json(spec.output_dir / "error.json", rec)
            except OSError:
                pass
        print(json.dumps(rec), file=sys.stderr)
        return 1
    print(str(manifest))
    return 0


if __name__ == "__main__":
    sys.exit(main())

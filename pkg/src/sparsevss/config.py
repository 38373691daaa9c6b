"""Experiment configuration: defaults, JSON config files and command-line flags.

A config file is a flat JSON object using the keys of :data:`KEYS`. Values
resolve in order default < file < flag, and every resolved value records
where it came from.
"""
from __future__ import annotations

import argparse
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

from .estimators import AlgoConfig, Variant
from .experiment import RunConfig, default_C

COMMANDS = ("mse", "ber", "trace-step-size", "sweep")

# key -> (type, default, is_list)
KEYS = {
    "command": (str, "mse", False),
    "N_t": (int, 2, False),
    "N_r": (int, 2, False),
    "L": (int, 16, False),
    "T": (int, [1], True),
    "snr_db": (float, None, True),
    "algorithms": (str, None, True),
    "mu": (float, 0.5, False),
    "mu_max": (float, 1.0, False),
    "step_grid": (float, [0.5, 1.0], True),
    "C": (float, None, False),
    "beta": (float, 0.99, False),
    "gamma_za": (float, 1e-5, False),
    "gamma_rza": (float, 5e-5, False),
    "epsilon_rza": (float, 20.0, False),
    "gammas": (float, [5e-6, 1e-5, 2e-5, 5e-5, 1e-4, 2e-4], True),
    "max_iter": (int, 5000, False),
    "tol": (float, 1e-5, False),
    "stop_window": (int, None, False),
    "num_runs": (int, 200, False),
    "seed": (int, 0, False),
    "mode": (str, "complex", False),
    "normalize": (str, "exact", False),
    "training": (str, "qpsk", False),
    "window": (int, 200, False),
    "modulations": (str, ["16QAM", "64QAM", "128QAM"], True),
    "bits_per_point": (int, 1_000_000, False),
    "perfect_csi": (bool, True, False),
    "output_dir": (str, "results", False),
    "format": (str, "both", False),
    "plot": (bool, False, False),
}

DEFAULT_SNR = {"mse": [10.0, 20.0], "ber": [0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0],
               "trace-step-size": [20.0], "sweep": [10.0, 20.0]}
DEFAULT_ALGOS = {"mse": ["ISS", "VSS", "ZA_VSS", "RZA_VSS"],
                 "ber": ["ISS", "VSS", "ZA_VSS", "RZA_VSS"],
                 "trace-step-size": ["ISS", "VSS"],
                 "sweep": ["ZA_VSS", "RZA_VSS"]}


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentSpec:
    command: str
    run: RunConfig
    algorithms: list[AlgoConfig]
    output_dir: Path
    format: str
    snr_db: list[float]
    sparsity: list[int]
    options: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)

    def run_config(self, algo: AlgoConfig, T: int | None = None, snr_db: float | None = None) -> RunConfig:
        return replace(
            self.run,
            algo=algo,
            T=self.run.T if T is None else int(T),
            snr_db=self.run.snr_db if snr_db is None else float(snr_db),
        )

    def resolved_C(self, snr_db: float) -> float:
        C = self.options["C"]
        return default_C(snr_db) if C is None else C

    def echo(self) -> dict:
        """Every parameter with its resolved value and provenance."""
        values = dict(self.options)
        values.update(command=self.command, output_dir=str(self.output_dir), format=self.format,
                      snr_db=self.snr_db, T=self.sparsity,
                      algorithms=[a.variant.value for a in self.algorithms])
        values["C_resolved"] = {str(s): self.resolved_C(s) for s in self.snr_db}
        return {
            "values": values,
            "provenance": dict(self.provenance),
        }


def _coerce(key: str, value):
    typ, _, is_list = KEYS[key]
    if value is None:
        return None

    def one(v):
        if typ is bool:
            if isinstance(v, bool):
                return v
            if str(v).lower() in ("1", "true", "yes", "on"):
                return True
            if str(v).lower() in ("0", "false", "no", "off"):
                return False
            raise ConfigError(f"{key}: cannot read {v!r} as a boolean")
        if typ is int:
            f = float(v)
            if f != int(f):
                raise ConfigError(f"{key}: expected an integer, got {v!r}")
            return int(f)
        return typ(v)

    try:
        if is_list:
            if isinstance(value, str):
                value = [v for v in value.split(",") if v.strip()]
            elif not isinstance(value, (list, tuple)):
                value = [value]
            return [one(v) for v in value]
        return one(value)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{key}: cannot read {value!r} as {typ.__name__}") from None


def load_file(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    unknown = sorted(set(doc) - set(KEYS))
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
    return doc


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="sparsevss",
        description="Sparse VSS-NLMS MIMO channel estimation experiments.",
    )
    ap.add_argument("command", nargs="?", choices=COMMANDS, default=None)
    ap.add_argument("--config", help="flat JSON config file")
    flag = ap.add_argument
    flag("--algo", dest="algorithms", help="comma-separated algorithms, e.g. ISS,VSS,ZA-VSS,RZA-VSS")
    flag("--snr", dest="snr_db", help="comma-separated SNR values in dB")
    flag("--sparsity", dest="T", help="comma-separated dominant-tap counts T")
    flag("--runs", dest="num_runs")
    flag("--seed")
    flag("--out", dest="output_dir")
    flag("--format", choices=("csv", "json", "both"))
    flag("--mode", choices=("real", "complex"))
    flag("--nt", dest="N_t")
    flag("--nr", dest="N_r")
    flag("--length", dest="L")
    flag("--mu")
    flag("--mu-max", dest="mu_max")
    flag("--step-grid", dest="step_grid", help="step-sizes for trace-step-size (mu for ISS, mu_max for VSS)")
    flag("--C", dest="C")
    flag("--beta")
    flag("--gamma-za", dest="gamma_za")
    flag("--gamma-rza", dest="gamma_rza")
    flag("--epsilon-rza", dest="epsilon_rza")
    flag("--gammas", help="penalty strengths swept by the sweep command")
    flag("--max-iter", dest="max_iter")
    flag("--tol")
    flag("--stop-window", dest="stop_window")
    flag("--window", help="steady-state averaging window (iterations)")
    flag("--modulation", dest="modulations", help="comma-separated, e.g. 16QAM,64QAM,128QAM")
    flag("--bits", dest="bits_per_point")
    flag("--plot", action="store_const", const=True, default=None, help="also render PNG figures")
    flag("--no-perfect-csi", dest="perfect_csi", action="store_const", const=False, default=None)
    return ap


def parse_config(argv=None, file=None) -> ExperimentSpec:
    """Resolve defaults, an optional config file and flags into a validated spec.

    ``argv`` is a list of command-line arguments (``None`` means no flags).
    ``file`` names a config file; a ``--config`` flag takes precedence.
    """
    args = vars(build_parser().parse_args([] if argv is None else list(argv)))
    path = args.pop("config") or file
    doc = load_file(path) if path else {}

    values, prov = {}, {}
    for key, (_, default, _) in KEYS.items():
        values[key], prov[key] = default, "default"
        if key in doc:
            values[key], prov[key] = _coerce(key, doc[key]), "file"
        if args.get(key) is not None:
            values[key], prov[key] = _coerce(key, args[key]), "flag"
    if values["command"] not in COMMANDS:
        raise ConfigError(f"command must be one of {', '.join(COMMANDS)}, got {values['command']!r}")
    if values["format"] not in ("csv", "json", "both"):
        raise ConfigError(f"format must be csv, json or both, got {values['format']!r}")
    cmd = values["command"]
    if values["snr_db"] is None:
        values["snr_db"] = list(DEFAULT_SNR[cmd])
    if values["algorithms"] is None:
        values["algorithms"] = list(DEFAULT_ALGOS[cmd])
    if not values["algorithms"]:
        raise ConfigError("algorithms must be non-empty")
    if not values["snr_db"] or not values["T"]:
        raise ConfigError("snr_db and T must be non-empty")
    if values["window"] < 1 or values["window"] > values["max_iter"]:
        raise ConfigError(f"invalid value {values['window']!r}: requires 1 ≤ window ≤ max_iter")
    if values["bits_per_point"] < 1:
        raise ConfigError(f"invalid value {values['bits_per_point']!r}: requires bits_per_point ≥ 1")

    try:
        algos = [
            AlgoConfig(Variant.parse(name), mu=values["mu"], mu_max=values["mu_max"], C=values["C"],
                       beta=values["beta"], gamma_za=values["gamma_za"], gamma_rza=values["gamma_rza"],
                       epsilon_rza=values["epsilon_rza"])
            for name in values["algorithms"]
        ]
        for g in values["gammas"]:
            if g < 0:
                raise ValueError(f"invalid value {g!r}: requires gammas ≥ 0")
        for s in values["step_grid"]:
            if not 0 < s < 2:
                raise ValueError(f"invalid value {s!r}: requires step_grid values ∈ (0,2)")
        run = RunConfig(
            N_t=values["N_t"], N_r=values["N_r"], L=values["L"], T=values["T"][0],
            snr_db=values["snr_db"][0], algo=algos[0], max_iter=values["max_iter"],
            tol=values["tol"], num_runs=values["num_runs"], seed=values["seed"],
            mode=values["mode"], normalize=values["normalize"], training=values["training"],
            stop_window=values["stop_window"],
        )
        for T in values["T"]:
            replace(run, T=T)
        if values["normalize"] not in ("exact", "expectation"):
            raise ValueError(f"invalid value {values['normalize']!r}: requires normalize ∈ {{exact, expectation}}")
        if values["training"] not in ("qpsk", "gaussian"):
            raise ValueError(f"invalid value {values['training']!r}: requires training ∈ {{qpsk, gaussian}}")
        if cmd == "ber":
            from .comms import Constellation
            for m in values["modulations"]:
                Constellation.parse(m)
            if values["N_r"] < values["N_t"]:
                raise ValueError("zero-forcing detection requires N_r ≥ N_t")
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    options = {k: values[k] for k in KEYS if k not in
               ("command", "algorithms", "snr_db", "T", "output_dir", "format")}
    return ExperimentSpec(
        command=cmd,
        run=run,
        algorithms=algos,
        output_dir=Path(values["output_dir"]),
        format=values["format"],
        snr_db=[float(s) for s in values["snr_db"]],
        sparsity=[int(t) for t in values["T"]],
        options=options,
        provenance=prov,
    )

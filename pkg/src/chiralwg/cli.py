"""Command-line front end.

    chiralwg run    --config FILE --protocol emit|absorb|transmit [--set k=v]... [--out DIR]
    chiralwg sweep  --config FILE [--sweep eta|detuning_distance|bandwidth] [--workers N] [--out DIR]
    chiralwg oracle --config FILE [--set k=v]...

Exit codes: 0 success, 1 configuration error, 2 tolerance violation (the
output bundle is still written), 3 I/O failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import io
import json
import math
import os
import sys
from enum import Enum
from pathlib import Path
from typing import Any, Optional

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__
from .controls import BandwidthTooLarge, Tabulated
from .dynamics import IntegratorConfig
from .molecule import Design, IncompatibleState, MissingControl, MoleculeConfig
from .observables import MetricSet
from .protocols import (
    OracleNotApplicable,
    ProtocolReport,
    absorption_controls,
    emission_controls,
    run_absorption,
    run_emission,
    run_transmission,
)
from .sweeps import (
    DEFAULT_BANDWIDTH_GRID,
    DEFAULT_DELTA_OMEGA_GRID,
    DEFAULT_DISTANCE_GRID,
    DEFAULT_ETA_GRID,
    SweepResult,
    sweep_bandwidth,
    sweep_detuning_distance,
    sweep_eta,
)

EXIT_OK, EXIT_CONFIG, EXIT_TOLERANCE, EXIT_IO = 0, 1, 2, 3
ORACLE_THRESHOLD = 1e-6
UNITS = "rates in units of gamma_ph (default gamma_ph = 1); times in 1/gamma_ph"

TIMESERIES_COLUMNS = ("t", "n_R", "n_L", "beta_R_re", "beta_R_im", "beta_L_re", "beta_L_im",
                      "pop_1", "pop_2", "trace_dev", "min_eig")
METRIC_COLUMNS = tuple(f.name for f in dataclasses.fields(MetricSet))
CONTROL_CSV_KEYS = ("gamma1_csv", "gamma2_csv", "g1_csv", "g2_csv", "gamma_a_csv", "g_c_csv")
SWEEP_NAMES = ("eta", "detuning_distance", "bandwidth")

SCHEMA: dict[str, dict[str, Any]] = {
    "model": {f.name: f.default for f in dataclasses.fields(MoleculeConfig)},
    "controls": {"direction": "Right", **{k: None for k in CONTROL_CSV_KEYS}},
    "integrator": {f.name: f.default for f in dataclasses.fields(IntegratorConfig)},
    "sweep": {
        "name": "eta",
        "eta_grid": None,
        "delta_omega_grid": None,
        "distance_over_lambda_grid": None,
        "gamma_ph_over_gamma_grid": None,
        "workers": 1,
    },
    "output": {"dir": "out"},
}
# execution-only settings kept out of the manifest so they cannot change output bytes
NOT_ECHOED = {("sweep", "workers"), ("output", "dir")}


class ConfigError(ValueError):
    pass


# --------------------------------------------------------------------------
# Configuration


def _plain(value):
    return value.value if isinstance(value, Enum) else value


def _parse_scalar(text: str):
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def apply_override(sections: dict, assignment: str) -> None:
    """Apply ``key=value`` or ``section.key=value``; bare keys must be unambiguous."""
    if "=" not in assignment:
        raise ConfigError(f"override {assignment!r} is not of the form key=value")
    key, text = (s.strip() for s in assignment.split("=", 1))
    if "." in key:
        section, name = key.split(".", 1)
        if section not in SCHEMA or name not in SCHEMA[section]:
            raise ConfigError(f"unknown config key: {key}")
    else:
        owners = [s for s in SCHEMA if key in SCHEMA[s]]
        if not owners:
            raise ConfigError(f"unknown config key: {key}")
        if len(owners) > 1:
            raise ConfigError(f"ambiguous config key {key!r}; qualify it as one of "
                              + ", ".join(f"{s}.{key}" for s in owners))
        section, name = owners[0], key
    sections.setdefault(section, {})[name] = _parse_scalar(text)


def _check_keys(raw: dict) -> None:
    for section, body in raw.items():
        if section not in SCHEMA:
            raise ConfigError(f"unknown config section: [{section}]")
        if not isinstance(body, dict):
            raise ConfigError(f"[{section}] must be a table")
        for key in body:
            if key not in SCHEMA[section]:
                raise ConfigError(f"unknown config key: {section}.{key}")


def _rate(value, key: str, scales: dict) -> float:
    """Number, or a string ``"<x> <unit>"`` with unit ``gamma_ph`` or ``gamma``."""
    if isinstance(value, bool):
        raise ConfigError(f"{key} must be a number")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        parts = value.split()
        if len(parts) == 2 and parts[1] in scales:
            try:
                return float(parts[0]) * scales[parts[1]]
            except ValueError:
                pass
        raise ConfigError(f"cannot parse rate {key} = {value!r}; use a number or '<x> gamma_ph' / '<x> gamma'")
    raise ConfigError(f"{key} must be a number")


def _floats(values: dict, section: str) -> None:
    """Coerce integers given for float-valued keys so ``1`` and ``1.0`` configure identically."""
    for key, default in SCHEMA[section].items():
        v = values[key]
        if isinstance(v, int) and not isinstance(v, bool) and (isinstance(default, float) or key == "dt"):
            values[key] = float(v)


@dataclasses.dataclass
class RunConfig:
    """Validated effective configuration."""

    model: MoleculeConfig
    integrator: IntegratorConfig
    direction: str
    control_csv: dict
    sweep: dict
    output_dir: str
    base_dir: Path = Path(".")

    def echo(self) -> dict:
        """Effective configuration as plain TOML/JSON values."""
        out = {
            "model": {k: _plain(v) for k, v in dataclasses.asdict(self.model).items()},
            "controls": {"direction": self.direction,
                         **{k: v for k, v in self.control_csv.items() if v is not None}},
            "integrator": {k: _plain(v) for k, v in dataclasses.asdict(self.integrator).items()
                           if v is not None},
            "sweep": {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.sweep.items()
                      if v is not None and ("sweep", k) not in NOT_ECHOED},
        }
        return out


def resolve_config(raw: dict, overrides=(), env: Optional[dict] = None, base_dir: Path = Path(".")) -> RunConfig:
    """Merge defaults, file contents, ``CHIRALWG_DT`` and ``--set`` overrides (in that order)."""
    env = os.environ if env is None else env
    raw = {s: dict(b) for s, b in raw.items()} if raw else {}
    _check_keys(raw)
    if env.get("CHIRALWG_DT"):
        try:
            raw.setdefault("integrator", {})["dt"] = float(env["CHIRALWG_DT"])
        except ValueError:
            raise ConfigError(f"CHIRALWG_DT={env['CHIRALWG_DT']!r} is not a number") from None
    for assignment in overrides:
        apply_override(raw, assignment)

    merged = {s: {**SCHEMA[s], **raw.get(s, {})} for s in SCHEMA}

    model = dict(merged["model"])
    model["gamma_ph"] = _rate(model["gamma_ph"], "gamma_ph", {})
    model["gamma"] = _rate(model["gamma"], "gamma", {"gamma_ph": model["gamma_ph"]})
    scales = {"gamma_ph": model["gamma_ph"], "gamma": model["gamma"]}
    for key in ("delta1", "delta2"):
        model[key] = _rate(model[key], key, scales)
    integ = dict(merged["integrator"])
    _floats(model, "model")
    _floats(integ, "integrator")
    try:
        mcfg = MoleculeConfig(**model)
        icfg = IntegratorConfig(**integ)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, BandwidthTooLarge):
            raise
        raise ConfigError(str(exc)) from None

    ctrl = merged["controls"]
    direction = str(ctrl["direction"])
    if direction not in ("Right", "Left"):
        raise ConfigError(f"controls.direction must be 'Right' or 'Left', got {direction!r}")
    csvs = {k: ctrl[k] for k in CONTROL_CSV_KEYS}

    sweep = dict(merged["sweep"])
    if sweep["name"] not in SWEEP_NAMES:
        raise ConfigError(f"sweep.name must be one of {', '.join(SWEEP_NAMES)}, got {sweep['name']!r}")
    for key in ("eta_grid", "delta_omega_grid", "distance_over_lambda_grid", "gamma_ph_over_gamma_grid"):
        if sweep[key] is not None:
            if not isinstance(sweep[key], list) or not all(
                    isinstance(x, (int, float)) and not isinstance(x, bool) for x in sweep[key]):
                raise ConfigError(f"sweep.{key} must be a list of numbers")
            sweep[key] = tuple(float(x) for x in sweep[key])
    if not isinstance(sweep["workers"], int) or sweep["workers"] < 1:
        raise ConfigError("sweep.workers must be a positive integer")
    return RunConfig(model=mcfg, integrator=icfg, direction=direction, control_csv=csvs,
                     sweep=sweep, output_dir=str(merged["output"]["dir"]), base_dir=base_dir)


def load_config(path: Optional[str], overrides=(), env: Optional[dict] = None) -> RunConfig:
    if path is None:
        return resolve_config({}, overrides, env)
    p = Path(path)
    with open(p, "rb") as fh:  # OSError propagates as an I/O failure
        data = fh.read()
    try:
        raw = tomllib.loads(data.decode("utf-8"))
    except (tomllib.TOMLDecodeError, UnicodeDecodeError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    return resolve_config(raw, overrides, env, base_dir=p.parent)


def read_waveform_csv(path: Path) -> Tabulated:
    """Two columns ``t,value``; a non-numeric first row is treated as a header."""
    rows = []
    with open(path, newline="") as fh:
        for i, row in enumerate(csv.reader(fh)):
            if not row or row[0].lstrip().startswith("#"):
                continue
            try:
                rows.append((float(row[0]), float(row[1])))
            except (ValueError, IndexError):
                if i == 0:
                    continue
                raise ConfigError(f"{path}: malformed row {i + 1}") from None
    try:
        return Tabulated.from_arrays([r[0] for r in rows], [r[1] for r in rows])
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def _tabulated_controls(rc: RunConfig) -> dict:
    out = {}
    for key, value in rc.control_csv.items():
        if value is not None:
            out[key[: -len("_csv")]] = read_waveform_csv(rc.base_dir / value)
    return out


# --------------------------------------------------------------------------
# Output


def _fmt(x) -> str:
    x = float(x)
    if math.isnan(x):
        return "nan"
    return format(x, ".17g")


def _json_value(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    return x


def blob_hash(data: bytes) -> str:
    """Content hash in the form git uses for blobs."""
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


def timeseries_csv(report: ProtocolReport) -> bytes:
    fs = report.flux
    pops = fs.populations
    p1 = pops.get("pop_1", pops.get("res_1"))
    p2 = pops.get("pop_2", pops.get("res_2"))
    cols = [fs.times, fs.n_R, fs.n_L, fs.beta_R.real, fs.beta_R.imag, fs.beta_L.real, fs.beta_L.imag,
            p1, p2, report.monitors["trace_dev"], report.monitors["min_eig"]]
    buf = io.StringIO(newline="")
    buf.write(",".join(TIMESERIES_COLUMNS) + "\n")
    for row in zip(*cols):
        buf.write(",".join(_fmt(v) for v in row) + "\n")
    return buf.getvalue().encode()


def metrics_json(report: ProtocolReport) -> bytes:
    body = {
        "protocol": report.protocol.value,
        "metrics": {k: _json_value(v) for k, v in report.metrics.as_dict().items()},
        "oracle_deviation": _json_value(report.oracle_deviation),
        "health": {k: _json_value(float(v)) for k, v in report.health.items()},
        "violations": list(report.violations),
        "ok": report.ok,
    }
    return (json.dumps(body, indent=2, sort_keys=True) + "\n").encode()


def sweep_csv(result: SweepResult) -> bytes:
    buf = io.StringIO(newline="")
    buf.write(",".join(result.names + METRIC_COLUMNS + ("ok", "error")) + "\n")
    for p in result.points:
        m = p.metrics.as_dict()
        err = (p.error or "").replace('"', "'")
        fields = [_fmt(c) for c in p.coords] + [_fmt(m[k]) for k in METRIC_COLUMNS]
        fields += ["1" if p.ok else "0", f'"{err}"' if err else ""]
        buf.write(",".join(fields) + "\n")
    return buf.getvalue().encode()


def write_bundle(out_dir: Path, files: dict[str, bytes], rc: RunConfig, command: dict) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, data in files.items():
        (out_dir / name).write_bytes(data)
    manifest = {
        "tool": "chiralwg",
        "version": __version__,
        "units": UNITS,
        "command": command,
        "config": rc.echo(),
        "files": {name: blob_hash(data) for name, data in sorted(files.items())},
    }
    (out_dir / "manifest.json").write_bytes((json.dumps(manifest, indent=2, sort_keys=True) + "\n").encode())


# --------------------------------------------------------------------------
# Commands

PROTOCOL_FLAGS = ("emit", "absorb", "transmit")


def execute_run(rc: RunConfig, protocol: str) -> ProtocolReport:
    tab = _tabulated_controls(rc)
    if protocol == "emit":
        controls = emission_controls(rc.model).with_(**tab)
        return run_emission(rc.model, rc.direction, rc.integrator, controls=controls, raise_on_violation=False)
    if protocol == "absorb":
        controls = absorption_controls(rc.model).with_(**tab)
        return run_absorption(rc.model, rc.integrator, controls=controls, raise_on_violation=False)
    if tab:
        raise ConfigError("tabulated controls are not used by the transmission protocol")
    return run_transmission(rc.model, rc.integrator, raise_on_violation=False)


def cmd_run(args) -> int:
    rc = load_config(args.config, args.set)
    report = execute_run(rc, args.protocol)
    files = {"timeseries.csv": timeseries_csv(report), "metrics.json": metrics_json(report)}
    out = Path(args.out or rc.output_dir)
    write_bundle(out, files, rc, {"name": "run", "protocol": args.protocol})
    sys.stdout.write(files["metrics.json"].decode())
    if not report.ok:
        print("tolerance violation: " + "; ".join(report.violations), file=sys.stderr)
        return EXIT_TOLERANCE
    return EXIT_OK


def execute_sweep(rc: RunConfig, name: str, workers: int) -> SweepResult:
    sw = rc.sweep
    if name == "eta":
        return sweep_eta(rc.model, sw["eta_grid"] or DEFAULT_ETA_GRID, integrator=rc.integrator, workers=workers)
    if name == "detuning_distance":
        return sweep_detuning_distance(
            rc.model,
            sw["delta_omega_grid"] or DEFAULT_DELTA_OMEGA_GRID,
            sw["distance_over_lambda_grid"] or DEFAULT_DISTANCE_GRID,
            integrator=rc.integrator,
            workers=workers,
        )
    if rc.model.design is not Design.QUBIT_RESONATOR:
        raise ConfigError('the bandwidth sweep needs model.design = "QubitResonator"')
    return sweep_bandwidth(rc.model, sw["gamma_ph_over_gamma_grid"] or DEFAULT_BANDWIDTH_GRID,
                           integrator=rc.integrator, workers=workers)


def cmd_sweep(args) -> int:
    overrides = list(args.set)
    if args.sweep:
        overrides.append(f'sweep.name="{args.sweep}"')
    rc = load_config(args.config, overrides)
    workers = args.workers if args.workers is not None else rc.sweep["workers"]
    if workers < 1:
        raise ConfigError("--workers must be >= 1")
    result = execute_sweep(rc, rc.sweep["name"], workers)
    summary = {
        "sweep": rc.sweep["name"],
        "axes": {n: list(g) for n, g in result.spec.axes},
        "points": len(result.points),
        "failed": len(result.failed),
    }
    files = {
        "sweep.csv": sweep_csv(result),
        "metrics.json": (json.dumps(summary, indent=2, sort_keys=True) + "\n").encode(),
    }
    out = Path(args.out or rc.output_dir)
    write_bundle(out, files, rc, {"name": "sweep", "sweep": rc.sweep["name"]})
    print(f"{len(result.points)} points written to {out / 'sweep.csv'} ({len(result.failed)} flagged)")
    return EXIT_TOLERANCE if result.failed else EXIT_OK


def cmd_oracle(args) -> int:
    rc = load_config(args.config, args.set)
    if rc.model.include_ancilla:
        raise OracleNotApplicable("the oracle needs an emission configuration without ancilla")
    controls = emission_controls(rc.model).with_(**_tabulated_controls(rc))
    report = run_emission(rc.model, rc.direction, rc.integrator, controls=controls, raise_on_violation=False)
    dev = report.oracle_deviation
    print(f"max flux deviation: {dev:.6e}")
    return EXIT_OK if dev <= ORACLE_THRESHOLD else EXIT_TOLERANCE


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="chiralwg", description="Chiral waveguide molecule simulator")
    parser.add_argument("--version", action="version", version=f"chiralwg {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", metavar="FILE", help="TOML configuration file")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config key (repeatable); KEY may be section.key")

    p = sub.add_parser("run", help="run one protocol and write an output bundle")
    common(p)
    p.add_argument("--protocol", choices=PROTOCOL_FLAGS, default="emit")
    p.add_argument("--out", metavar="DIR")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run a parameter sweep")
    common(p)
    p.add_argument("--sweep", choices=SWEEP_NAMES, help="sweep name (default from [sweep] name)")
    p.add_argument("--workers", type=int, metavar="N")
    p.add_argument("--out", metavar="DIR")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("oracle", help="compare the integrator against the amplitude oracle")
    common(p)
    p.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, BandwidthTooLarge, MissingControl, IncompatibleState, OracleNotApplicable) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())

"""Command line: ``geobridge {run,run-all,list,check}``.

Exit codes: 0 when every check has its expected outcome, 1 when some check
does not, 2 for configuration errors, 3 when a solver fails to converge and
4 for domain errors (points leaving a chart, refused transformations).
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import scenarios
from .errors import ConfigError, ConvergenceError, DomainError, GeoBridgeError, HypothesisError, NewtonError

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

log = logging.getLogger("geobridge")

EXIT_OK, EXIT_CHECKS, EXIT_CONFIG, EXIT_CONVERGENCE, EXIT_DOMAIN = 0, 1, 2, 3, 4
SIG_DIGITS = 12


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, (ConvergenceError, NewtonError)):
        return EXIT_CONVERGENCE
    if isinstance(exc, (DomainError, HypothesisError)):
        return EXIT_DOMAIN
    return EXIT_CONVERGENCE


# --- serialisation -------------------------------------------------------


def _plain(obj):
    """Convert to JSON types, rounding floats to 12 significant digits."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if not math.isfinite(v):
            return None if math.isnan(v) else ("inf" if v > 0 else "-inf")
        return float(f"{v:.{SIG_DIGITS}g}")
    return obj


def dumps(payload) -> str:
    return json.dumps(_plain(payload), indent=2, allow_nan=False) + "\n"


def atomic_write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.chmod(tmp, 0o644)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_frames_csv(path: Path, frames):
    frames = np.asarray(frames)
    header = "t," + ",".join(f"rho_{i}" for i in range(frames.shape[1] - 1))
    lines = [header] + [",".join(f"{v:.{SIG_DIGITS}g}" for v in row) for row in frames]
    atomic_write(path, "\n".join(lines) + "\n")


# --- configuration -------------------------------------------------------


def parse_value(text: str):
    """TOML literal if it parses, bare string otherwise."""
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def parse_sets(items):
    out = {}
    for item in items or []:
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"--set expects key=value, got {item!r}")
        out[key.strip()] = parse_value(value.strip())
    return out


def load_config(path):
    if path is None:
        return {}
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def overrides_for(name, config, sets, single):
    """Parameter overrides for one scenario.

    A config file may hold a table per scenario.  For a single run, top-level
    keys apply too, and ``--set key=v`` or ``--set scenario.key=v`` work; for
    ``run-all`` only tables and ``--set scenario.key=v`` apply.
    """
    out = {}
    for key, value in config.items():
        if isinstance(value, dict):
            if key not in scenarios.SCENARIOS:
                raise ConfigError(f"config table [{key}] does not name a scenario")
            if key == name:
                out.update(value)
        elif single:
            out[key] = value
        else:
            raise ConfigError(f"top-level key {key!r} is ambiguous in run-all; use a [scenario] table")
    for key, value in sets.items():
        scen, dot, sub = key.rpartition(".")
        if dot:
            if scen not in scenarios.SCENARIOS:
                raise ConfigError(f"--set {key}: {scen!r} is not a scenario")
            if scen == name:
                out[sub] = value
        elif single:
            out[key] = value
        else:
            raise ConfigError(f"--set {key}: prefix keys with a scenario name in run-all")
    return out


# --- execution -----------------------------------------------------------


def execute(name, overrides, seed, with_timings=False):
    """Resolve, run and package one scenario.  Returns ``(payload, checks)``."""
    params = scenarios.resolve(name, overrides)
    start = time.perf_counter()
    results, checks = scenarios.run(name, params, seed)
    elapsed = time.perf_counter() - start
    echo = dict(params)
    echo["seed"] = seed
    payload = {
        "scenario": name,
        "config_echo": echo,
        "results": results,
        "checks": [c.as_dict() for c in checks],
        # wall-clock time breaks byte-identical reruns, so it is opt-in
        "timings": {"total_seconds": elapsed} if with_timings else None,
    }
    return payload, checks


def _job(args):
    """Worker entry point; never raises so one failure does not sink the batch."""
    name, overrides, seed, out_dir, artifacts, with_timings = args
    try:
        payload, checks = execute(name, overrides, seed, with_timings)
    except GeoBridgeError as exc:
        return name, exit_code_for(exc), [], f"{type(exc).__name__}: {exc}"
    except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        return name, EXIT_CONVERGENCE, [], f"{type(exc).__name__}: {exc}"
    if artifacts:
        write_outputs(Path(out_dir), name, payload)
    code = EXIT_OK if all(c.ok for c in checks) else EXIT_CHECKS
    return name, code, [c.line() for c in checks], ""


def write_outputs(out_dir: Path, name: str, payload):
    frames = payload["results"].pop("frames", None)
    atomic_write(out_dir / f"{name}.json", dumps(payload))
    if frames is not None:
        write_frames_csv(out_dir / f"{name}_frames.csv", frames)


def output_dir(args) -> Path:
    env = os.environ.get("GEOBRIDGE_OUT")
    return Path(env) if env else Path(args.out)


def _report(name, code, lines, error, stream=sys.stdout):
    for line in lines:
        print(f"  {line}", file=stream)
    if error:
        print(f"{name}: error: {error}", file=sys.stderr)
    status = {EXIT_OK: "ok", EXIT_CHECKS: "checks failed"}.get(code, f"exit {code}")
    print(f"{name}: {status}", file=stream)


def cmd_list(args):
    width = max(len(n) for n in scenarios.SCENARIOS)
    for sc in scenarios.SCENARIOS.values():
        print(f"{sc.name:<{width}}  {sc.description}")
        print(f"{'':<{width}}  anchor: {sc.anchor}")
    return EXIT_OK


def cmd_run(args, artifacts=True):
    scenarios.get(args.scenario)
    overrides = overrides_for(args.scenario, load_config(args.config), parse_sets(args.set), True)
    name, code, lines, error = _job((args.scenario, overrides, args.seed, str(output_dir(args)),
                                     artifacts, args.timings))
    _report(name, code, lines, error)
    return code


def cmd_run_all(args):
    config = load_config(args.config)
    sets = parse_sets(args.set)
    out = str(output_dir(args))
    jobs = [(name, overrides_for(name, config, sets, False), args.seed, out, True, args.timings)
            for name in scenarios.SCENARIOS]
    if args.workers <= 1:
        outcomes = [_job(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            outcomes = list(pool.map(_job, jobs))
    codes = []
    for name, code, lines, error in outcomes:
        _report(name, code, lines, error)
        codes.append(code)
    failed = [o[0] for o in outcomes if o[1] != EXIT_OK]
    print(f"{len(outcomes) - len(failed)}/{len(outcomes)} scenarios ok"
          + (f"; failing: {', '.join(failed)}" if failed else ""))
    return max(codes)


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="TOML file with parameter overrides")
    common.add_argument("--out", metavar="DIR", default="results",
                        help="output directory (GEOBRIDGE_OUT overrides)")
    common.add_argument("--set", action="append", metavar="K=V", default=[],
                        help="override one parameter; repeatable")
    common.add_argument("--workers", type=int, default=1, metavar="N")
    common.add_argument("--seed", type=int, default=0, metavar="N",
                        help="seed for random sample points")
    common.add_argument("--timings", action="store_true",
                        help="record wall-clock timings (output is then not reproducible)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="geobridge", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", parents=[common], help="run one scenario and write its results")
    p.add_argument("scenario")
    p = sub.add_parser("check", parents=[common], help="run one scenario's checks, write nothing")
    p.add_argument("scenario")
    sub.add_parser("run-all", parents=[common], help="run every scenario")
    sub.add_parser("list", help="list scenarios")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "list":
            return cmd_list(args)
        if args.workers < 1:
            raise ConfigError("--workers must be at least 1")
        if args.command == "run":
            return cmd_run(args)
        if args.command == "check":
            return cmd_run(args, artifacts=False)
        return cmd_run_all(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

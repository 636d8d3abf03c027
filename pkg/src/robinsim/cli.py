"""Command line harness: classify, simulate, sweep, green-report.

Every run prints its payload with floats at 17 significant digits and,
when a store is configured, appends an experiment record to an
append-only JSON-lines file, so identical invocations can be replayed
and diffed bit for bit.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from . import blocks as _blocks
from .criteria import (
    ACTIVE,
    CriterionError,
    NON_TRAP,
    classify_activity,
    classify_trap,
)
from .geometry import (
    BStar,
    Cusp,
    Disk,
    DomainSpec,
    FractalChannels2D,
    FractalChannelsD,
    InvalidSpecError,
    SnowflakeCubes,
    UnitBox,
    spec_to_json,
)
from .sim import (
    CriterionOnlyFamilyError,
    SimConfig,
    SimulationError,
    estimate_hitting_prob,
    estimate_mean_exit,
    estimate_u,
    harmonic_measure,
    local_time_profile,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NEGATIVE = 3
EXIT_INCONCLUSIVE = 4
EXIT_NUMERIC = 5

_POSITIVE_VERDICTS = (ACTIVE, NON_TRAP)
_NEGATIVE_VERDICTS = ("NEARLY_INACTIVE", "TRAP")


class UsageError(ValueError):
    """Bad flags or flag combinations; maps to exit code 2."""


# --------------------------------------------------------------------------
# serialization
# --------------------------------------------------------------------------


def dumps17(obj: Any) -> str:
    """Canonical JSON: sorted keys, floats at 17 significant digits.

    Non-finite floats serialize as null; containers recurse.
    """
    if obj is None:
        return "null"
    if obj is True:
        return "true"
    if obj is False:
        return "false"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return format(x, ".17g") if math.isfinite(x) else "null"
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(dumps17(v) for v in obj) + "]"
    if isinstance(obj, dict):
        parts = (
            json.dumps(str(k)) + ": " + dumps17(v) for k, v in sorted(obj.items())
        )
        return "{" + ", ".join(parts) + "}"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def payload_csv(payload: dict) -> str:
    """Scalar payload fields as one CSV header + row, keys sorted."""
    keys = [k for k, v in sorted(payload.items()) if not isinstance(v, (dict, list, tuple))]
    vals = []
    for k in keys:
        v = payload[k]
        vals.append(format(float(v), ".17g") if isinstance(v, float) else str(v))
    return ",".join(keys) + "\n" + ",".join(vals) + "\n"


# --------------------------------------------------------------------------
# experiment store
# --------------------------------------------------------------------------


def store_path(args: argparse.Namespace) -> Path | None:
    if getattr(args, "store", None):
        return Path(args.store)
    env = os.environ.get("ROBINSIM_STORE")
    return Path(env) if env else None


def experiment_id(command: str, domain_json: str, config_json: str, seed: int) -> str:
    blob = "\x1f".join((command, domain_json, config_json, str(int(seed))))
    return hashlib.sha256(blob.encode()).hexdigest()


def append_record(
    args: argparse.Namespace,
    argv: Sequence[str],
    spec: DomainSpec | None,
    config_payload: dict,
    result: Any,
) -> str:
    """Append one experiment record; returns the record id either way."""
    command = " ".join(argv)
    domain_json = spec_to_json(spec) if spec is not None else "{}"
    config_json = dumps17(config_payload)
    rid = experiment_id(command, domain_json, config_json, getattr(args, "seed", 0))
    path = store_path(args)
    if path is not None:
        record = {
            "id": rid,
            "timestamp": datetime.now(timezone.utc).isoformat(),
            "command": command,
            "result": result,
            "version": __version__,
        }
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "a") as fh:
            fh.write(dumps17(record) + "\n")
    return rid


# --------------------------------------------------------------------------
# flag parsing helpers
# --------------------------------------------------------------------------


def parse_floats(text: str, what: str) -> tuple[float, ...]:
    try:
        return tuple(float(tok) for tok in text.split(","))
    except ValueError as exc:
        raise UsageError(f"{what} must be comma-separated floats: {text!r}") from exc


def parse_point(text: str, d: int, what: str = "--x0") -> np.ndarray:
    vals = parse_floats(text, what)
    if len(vals) != d:
        raise UsageError(f"{what} needs {d} coordinates, got {len(vals)}")
    return np.asarray(vals, dtype=float)


def _require(args: argparse.Namespace, name: str) -> Any:
    val = getattr(args, name.strip("-").replace("-", "_"))
    if val is None:
        raise UsageError(f"{name} is required for family {args.family!r}")
    return val


def build_spec(args: argparse.Namespace) -> DomainSpec:
    """Domain from flags; family defaults fill whatever is omitted."""
    fam = args.family
    if fam is None:
        raise UsageError("--family is required")
    d = args.d
    if fam == "cusp":
        spec = Cusp(d if d is not None else 2, _require(args, "--alpha"))
    elif fam == "box":
        spec = UnitBox(d if d is not None else 2)
    elif fam == "disk":
        spec = Disk(d if d is not None else 2, args.R)
    elif fam == "channels2d":
        if d not in (None, 2):
            raise UsageError("--family channels2d is planar; drop --d or use --d 2")
        spec = FractalChannels2D(_require(args, "--alpha"), _require(args, "--beta"), args.depth)
    elif fam == "channelsNd":
        spec = FractalChannelsD(
            d if d is not None else 3,
            _require(args, "--alpha"),
            _require(args, "--beta"),
            args.depth,
        )
    elif fam == "snowflake":
        spec = SnowflakeCubes(
            d if d is not None else 3,
            _require(args, "--rho"),
            _require(args, "--beta"),
            args.depth,
        )
    else:
        raise UsageError(f"unknown family {fam!r}")
    if args.bstar_c is not None or args.bstar_r is not None:
        center = (
            parse_floats(args.bstar_c, "--bstar-c")
            if args.bstar_c is not None
            else spec.bstar.center
        )
        radius = args.bstar_r if args.bstar_r is not None else spec.bstar.radius
        spec = type(spec)(
            **{**_ctor_kwargs(spec), "bstar": BStar(tuple(center), radius)}
        )
    return spec


def _ctor_kwargs(spec: DomainSpec) -> dict:
    fields = {
        "cusp": ("d", "alpha"),
        "box": ("d",),
        "disk": ("d", "R"),
        "channels2d": ("alpha", "beta", "depth"),
        "channelsNd": ("d", "alpha", "beta", "depth"),
        "snowflake": ("d", "rho", "beta", "depth"),
    }[spec.family]
    return {name: getattr(spec, name) for name in fields}


def build_cfg(args: argparse.Namespace) -> SimConfig:
    return SimConfig(
        n_paths=args.paths,
        seed=args.seed,
        robin_c=args.robin_c,
        dt_max=args.dt_max,
        dt_min=args.dt_min,
        kappa=args.kappa,
        max_time=args.max_time,
    )


def _emit(args: argparse.Namespace, payload: dict) -> None:
    if args.out == "csv":
        sys.stdout.write(payload_csv(payload))
    else:
        print(dumps17(payload))


# --------------------------------------------------------------------------
# classify
# --------------------------------------------------------------------------


def cmd_classify(args: argparse.Namespace, argv: Sequence[str]) -> int:
    spec = build_spec(args)
    if args.criterion == "activity":
        verdict, rep = classify_activity(spec, n_max=args.depth)
    else:
        verdict, rep = classify_trap(spec, n_max=args.depth)
    config_payload = {"criterion": args.criterion, "depth": args.depth}
    payload = {
        "verdict": verdict,
        "report": rep.to_payload(),
        "domain": json.loads(spec_to_json(spec)),
        "criterion": args.criterion,
        "depth": args.depth,
    }
    payload["id"] = append_record(args, argv, spec, config_payload, payload["report"] | {"verdict": verdict})
    if args.out == "csv":
        sys.stdout.write(f"# verdict {verdict}\n" + rep.to_csv())
    else:
        print(dumps17(payload))
    if verdict in _POSITIVE_VERDICTS:
        return EXIT_OK
    if verdict in _NEGATIVE_VERDICTS:
        return EXIT_NEGATIVE
    return EXIT_INCONCLUSIVE


# --------------------------------------------------------------------------
# simulate
# --------------------------------------------------------------------------


def _default_parts(spec: DomainSpec) -> list[tuple[str, Any]]:
    # first match wins; exit points land exactly on the closure
    if isinstance(spec, UnitBox):
        parts = []
        for i in range(spec.d):
            parts.append((f"x{i + 1}=0", lambda q, i=i: q[i] <= 1e-9))
            parts.append((f"x{i + 1}=1", lambda q, i=i: q[i] >= 1.0 - 1e-9))
        return parts
    if isinstance(spec, Disk):
        return [("upper", lambda q: q[1] >= 0.0), ("lower", lambda q: True)]
    if isinstance(spec, Cusp):
        return [("cap", lambda q: q[0] >= 1.0 - 1e-9), ("wall", lambda q: True)]
    return [("root", lambda q: q[0] <= 1.0), ("tree", lambda q: True)]


def cmd_simulate(args: argparse.Namespace, argv: Sequence[str]) -> int:
    spec = build_spec(args)
    if isinstance(spec, SnowflakeCubes):
        raise CriterionOnlyFamilyError("criterion-only family")
    cfg = build_cfg(args)
    if args.x0 is None:
        raise UsageError("--x0 is required for simulate")
    x0 = parse_point(args.x0, spec.d)
    mode = args.mode
    extras: dict[str, Any] = {}

    if mode == "u":
        est = estimate_u(spec, x0, cfg)
        payload = {"estimand": "u", **est.to_payload()}
    elif mode == "exit":
        est = estimate_mean_exit(spec, x0, cfg)
        payload = {"estimand": "exit", **est.to_payload()}
    elif mode == "local-time":
        probes = [parse_point(p, spec.d, "--probe") for p in args.probe] if args.probe else [x0]
        rows = local_time_profile(spec, probes, cfg)
        payload = {"estimand": "local-time", "rows": rows}
        extras["probes"] = [list(map(float, p)) for p in probes]
    elif mode == "green":
        from .report import slab_volumes, uniform_edges
        from .sim import GreenCells, estimate_green

        edges = (
            list(parse_floats(args.edges, "--edges"))
            if args.edges
            else uniform_edges(spec, args.cells)
        )
        cells = GreenCells(tuple(edges), tuple(slab_volumes(spec, edges)))
        res = estimate_green(spec, x0, cells, cfg)
        payload = {"estimand": "green", **res.to_payload()}
        extras["edges"] = [float(e) for e in edges]
    elif mode == "hitprob":
        if args.cut_a is None or args.cut_b is None:
            raise UsageError("--cut-a and --cut-b are required for --mode hitprob")
        cut_a = _blocks.Cut("plane", 0, t=args.cut_a)
        cut_b = _blocks.Cut("plane", 0, t=args.cut_b)
        est = estimate_hitting_prob(spec, x0, cut_a, cut_b, cfg)
        payload = {"estimand": "hitprob", **est.to_payload()}
        extras["cut_a"] = args.cut_a
        extras["cut_b"] = args.cut_b
    elif mode == "harmonic":
        res = harmonic_measure(spec, x0, _default_parts(spec), cfg)
        payload = {"estimand": "harmonic", **res.to_payload()}
    else:
        raise UsageError(f"unknown mode {mode!r}")

    config_payload = {"mode": mode, "x0": [float(v) for v in x0], **cfg.to_payload(), **extras}
    payload["domain"] = json.loads(spec_to_json(spec))
    payload["config"] = cfg.to_payload()
    payload["id"] = append_record(args, argv, spec, config_payload, payload)
    _emit(args, payload)
    return EXIT_OK


# --------------------------------------------------------------------------
# sweep
# --------------------------------------------------------------------------

_SWEEPABLE = {
    "cusp": ("alpha",),
    "channels2d": ("alpha", "beta"),
    "channelsNd": ("alpha", "beta"),
    "snowflake": ("rho", "beta"),
}


def sweep_values(a: float, b: float, s: float) -> list[float]:
    if s <= 0.0 or not math.isfinite(s):
        raise UsageError("--step must be positive")
    count = math.floor((b - a) / s * (1.0 + 1e-12) + 1e-9) + 1
    if count < 1:
        raise UsageError("empty range")
    return [a + i * s for i in range(count)]


def cmd_sweep(args: argparse.Namespace, argv: Sequence[str]) -> int:
    if args.family is None:
        raise UsageError("--family is required")
    allowed = _SWEEPABLE.get(args.family, ())
    if args.param not in allowed:
        raise UsageError(
            f"--param {args.param!r} is not sweepable for family {args.family!r}"
            + (f"; choose from {allowed}" if allowed else "")
        )
    values = sweep_values(args.start, args.stop, args.step)
    rows = []
    for value in values:
        sub = argparse.Namespace(**vars(args))
        setattr(sub, args.param, value)
        spec = build_spec(sub)
        if args.criterion == "activity":
            verdict, rep = classify_activity(spec, n_max=args.depth)
        else:
            verdict, rep = classify_trap(spec, n_max=args.depth)
        last = rep.partial_sums[-1] if rep.partial_sums else math.nan
        rows.append((value, verdict, last, rep.log_slope))

    lines = ["value,verdict,last_partial_sum,log_slope"]
    for value, verdict, last, slope in rows:
        lines.append(
            "%.17g,%s,%.17g,%.17g" % (value, verdict, last, slope)
        )
    text = "\n".join(lines) + "\n"
    if args.out == "json":
        payload = {
            "param": args.param,
            "rows": [
                {"value": v, "verdict": verdict, "last_partial_sum": last, "log_slope": slope}
                for v, verdict, last, slope in rows
            ],
        }
        print(dumps17(payload))
    else:
        sys.stdout.write(text)
    if args.fig:
        from .report import sweep_figure

        sweep_figure(
            [r[0] for r in rows],
            [r[1] for r in rows],
            [r[2] for r in rows],
            Path(args.fig),
            args.param,
        )
    config_payload = {
        "param": args.param,
        "from": args.start,
        "to": args.stop,
        "step": args.step,
        "criterion": args.criterion,
        "depth": args.depth,
    }
    append_record(
        args,
        argv,
        None,
        config_payload,
        [{"value": v, "verdict": verdict} for v, verdict, _, _ in rows],
    )
    return EXIT_OK


# --------------------------------------------------------------------------
# green-report
# --------------------------------------------------------------------------


def cmd_green_report(args: argparse.Namespace, argv: Sequence[str]) -> int:
    spec = build_spec(args)
    if isinstance(spec, SnowflakeCubes):
        raise CriterionOnlyFamilyError("criterion-only family")
    cfg = build_cfg(args)
    if args.x0 is None:
        raise UsageError("--x0 is required for green-report")
    x0 = parse_point(args.x0, spec.d)

    from .report import green_report, slab_volumes, uniform_edges

    edges = (
        list(parse_floats(args.edges, "--edges"))
        if args.edges
        else uniform_edges(spec, args.cells)
    )
    res, summary = green_report(spec, x0, edges, cfg, Path(args.out_dir), stem=args.stem)
    config_payload = {
        "mode": "green-report",
        "x0": [float(v) for v in x0],
        "edges": [float(e) for e in edges],
        **cfg.to_payload(),
    }
    summary["id"] = append_record(args, argv, spec, config_payload, summary)
    print(dumps17(summary))
    return EXIT_OK


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------


def _add_domain_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument(
        "--family",
        choices=("cusp", "box", "disk", "channels2d", "channelsNd", "snowflake"),
    )
    p.add_argument("--d", type=int, default=None)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--rho", type=float, default=None)
    p.add_argument("--depth", type=int, default=20)
    p.add_argument("--R", type=float, default=1.0)
    p.add_argument("--bstar-c", default=None, help="absorbing ball center, comma list")
    p.add_argument("--bstar-r", type=float, default=None, help="absorbing ball radius")
    p.add_argument("--out", choices=("json", "csv"), default="json")
    p.add_argument("--store", default=None, help="append-only JSONL result store")


def _add_sim_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--x0", default=None, help="start point, comma list")
    p.add_argument("--paths", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dt-max", type=float, default=1e-3)
    p.add_argument("--dt-min", type=float, default=1e-8)
    p.add_argument("--kappa", type=float, default=0.25)
    p.add_argument("--max-time", type=float, default=64.0)
    p.add_argument("--robin-c", type=float, default=1.0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="robinsim",
        description="Series criteria and reflected-path simulation for narrowing domains.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("classify", help="series-criterion verdict for a family")
    _add_domain_flags(p)
    p.add_argument("--criterion", choices=("activity", "trap"), default="activity")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("simulate", help="run one estimator and print its payload")
    _add_domain_flags(p)
    _add_sim_flags(p)
    p.add_argument(
        "--mode",
        choices=("u", "exit", "local-time", "green", "hitprob", "harmonic"),
        default="u",
    )
    p.add_argument("--probe", action="append", default=None, help="local-time probe, repeatable")
    p.add_argument("--cells", type=int, default=8, help="uniform green cells")
    p.add_argument("--edges", default=None, help="explicit green cell edges, comma list")
    p.add_argument("--cut-a", type=float, default=None, help="hitprob plane x1=a")
    p.add_argument("--cut-b", type=float, default=None, help="hitprob plane x1=b")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="classify across a parameter range, CSV out")
    _add_domain_flags(p)
    p.add_argument("--param", required=True)
    p.add_argument("--from", dest="start", type=float, required=True)
    p.add_argument("--to", dest="stop", type=float, required=True)
    p.add_argument("--step", type=float, required=True)
    p.add_argument("--criterion", choices=("activity", "trap"), default="activity")
    p.add_argument("--fig", default=None, help="render the sweep to this PNG")
    p.set_defaults(func=cmd_sweep, out="csv")

    p = sub.add_parser("green-report", help="occupation density CSV + figure")
    _add_domain_flags(p)
    _add_sim_flags(p)
    p.add_argument("--cells", type=int, default=8)
    p.add_argument("--edges", default=None)
    p.add_argument("--out-dir", default=".", help="directory for green.csv / green.png")
    p.add_argument("--stem", default="green")
    p.set_defaults(func=cmd_green_report)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, argv)
    except SimulationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (
        UsageError,
        CriterionOnlyFamilyError,
        InvalidSpecError,
        CriterionError,
        _blocks.DecompositionError,
        ValueError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end: simulate | estimate | bound | keyrate | pipeline.

Exit codes:
    0  success
    1  unexpected internal error
    2  invalid parameters or configuration
    3  calibration alarm: the data admit no physical solution (infeasible LP)
    4  file-system error (missing input, refusing to overwrite without --force)
    5  unusable data (parse error, empty stream, too few coincidences)
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Sequence

from . import __version__
from .errors import DataError, InfeasibleError, PhotonCertError, ValidationError
from .hbt_simulator import (
    CorrelationMeasurement,
    DetectorConfig,
    count_coincidences,
    estimate_correlation,
    simulate_pulse_train,
)
from .keyrate import (
    ChannelModel,
    ProtocolParams,
    SourceSpec,
    rate_vs_distance_scan,
    parse_grid,
    scan_metadata,
    write_scan_csv,
)
from .decoy_bounds import IntensitySettings
from .photon_model import Poisson, parse_source
from .presets import PRESETS, preset_values, representative_source
from .records import parse_records, save_records
from .statistics_bounds import (
    DEFAULT_GAMMA,
    DEFAULT_N_CUT,
    CorrelationConstraints,
    bound_photon_probabilities,
)

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_VALIDATION = 2
EXIT_INFEASIBLE = 3
EXIT_IO = 4
EXIT_DATA = 5


# ---------------------------------------------------------------------------
# helpers


def _error(message: str, *args) -> None:
    sys.stderr.write("photoncert: " + (message % args) + "\n")


def _metadata(command: str, args: argparse.Namespace) -> dict:
    config = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "config")}
    return {"tool": "photoncert", "version": __version__, "command": command, "config": config}


def _open_out(path: str | os.PathLike, force: bool, binary: bool = False):
    mode = ("w" if force else "x") + ("b" if binary else "")
    return open(path, mode, **({} if binary else {"encoding": "utf-8", "newline": ""}))


def _write_text(path: str | None, text: str, force: bool) -> None:
    if path is None:
        sys.stdout.write(text)
        return
    with _open_out(path, force) as fh:
        fh.write(text)


def _write_json(path: str | None, doc: dict, force: bool) -> None:
    _write_text(path, json.dumps(doc, indent=2) + "\n", force)


def _sidecar(path: str) -> str:
    return f"{path}.meta.json"


def _parse_orders(text: str | None) -> tuple[int, ...] | None:
    if text is None:
        return None
    try:
        orders = tuple(sorted(int(t) for t in text.split(",") if t.strip()))
    except ValueError:
        raise ValidationError(f"cannot parse orders {text!r}") from None
    return orders


def _parse_measurement(order: int, text: str) -> CorrelationMeasurement:
    try:
        value, sigma = (float(t) for t in text.split(","))
    except ValueError:
        raise ValidationError(f"--g{order} expects VALUE,SIGMA, got {text!r}") from None
    return CorrelationMeasurement(order, value, sigma)


def _load_report(path: str) -> dict[int, tuple[float, float]]:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    try:
        return {int(k): (float(v["value"]), float(v["sigma"])) for k, v in doc["correlations"].items()}
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"{path} is not a correlation report: {exc}") from None


def _measured_values(args) -> tuple[dict[int, tuple[float, float]], str]:
    sources = [s for s in (args.preset, args.report) if s]
    manual = {m: getattr(args, f"g{m}") for m in (2, 3, 4) if getattr(args, f"g{m}")}
    if len(sources) + bool(manual) != 1:
        raise ValidationError("give exactly one of --preset, --report or --g2/--g3/--g4")
    if args.preset:
        return preset_values(args.preset), f"preset:{args.preset}"
    if args.report:
        return _load_report(args.report), f"report:{args.report}"
    values = {}
    for m, text in manual.items():
        meas = _parse_measurement(m, text)
        values[m] = (meas.value, meas.sigma)
    return values, "manual"


def _constraints(values, mu, gamma, orders) -> CorrelationConstraints:
    if orders is None:
        orders = tuple(m for m in (2, 3, 4) if m in values)
        # keep the longest usable prefix {2}, {2,3}, {2,3,4}
        prefix = []
        for m in (2, 3, 4):
            if m not in orders:
                break
            prefix.append(m)
        orders = tuple(prefix)
    missing = [m for m in orders if m not in values]
    if missing:
        raise ValidationError(f"no measured value for orders {missing}")
    return CorrelationConstraints(
        tuple(CorrelationMeasurement(m, *values[m]) for m in orders), mu, gamma
    )


def _estimate_report(counts) -> dict:
    correlations, insufficient = {}, []
    for m in (2, 3, 4):
        try:
            est = estimate_correlation(counts, m)
        except DataError as exc:
            insufficient.append({"order": m, "reason": str(exc)})
            continue
        correlations[str(m)] = {"value": est.value, "sigma": est.sigma}
    if "2" not in correlations:
        raise DataError("g2 cannot be estimated: " + insufficient[0]["reason"])
    return {"n_pulses": counts.n_pulses, "counts": counts.to_dict(),
            "correlations": correlations, "insufficient": insufficient}


def _settings(args) -> IntensitySettings:
    return IntensitySettings(args.mu, args.v, args.w, args.p_u, args.p_v, args.p_w)


def _channel(args) -> ChannelModel:
    return ChannelModel(args.alpha, args.detector_efficiency, args.dark_click_prob,
                        args.misalignment, args.vacuum_error)


def _protocol(args, settings) -> ProtocolParams:
    return ProtocolParams(args.p_z, args.f, args.delta, settings, args.e0_lower, args.n_cut)


# ---------------------------------------------------------------------------
# subcommands


def cmd_simulate(args) -> int:
    split = tuple(float(s) for s in args.split.split(","))
    cfg = DetectorConfig(args.efficiency, args.eta0_cap, split, args.dark_count_prob)
    source = parse_source(args.source)
    stream = simulate_pulse_train(source, args.pulses, cfg, args.seed, workers=args.workers)
    counts_batches = []

    def tee():
        for batch in stream:
            counts_batches.append(count_coincidences([batch]))
            yield batch

    n = save_records(tee(), args.out, force=args.force)
    counts = counts_batches[0]
    for c in counts_batches[1:]:
        counts = counts + c
    _write_json(_sidecar(args.out), _metadata("simulate", args), args.force)
    _write_json(None, {"records": n, "file": str(args.out), "counts": counts.to_dict()}, True)
    return EXIT_OK


def cmd_estimate(args) -> int:
    with open(args.records, "rb") as fh:
        counts = count_coincidences(parse_records(fh), n_pulses=args.n_pulses)
    report = _estimate_report(counts)
    report["metadata"] = _metadata("estimate", args)
    _write_json(args.out, report, args.force)
    return EXIT_OK


def cmd_bound(args) -> int:
    values, origin = _measured_values(args)
    constraints = _constraints(values, args.mu, args.gamma, _parse_orders(args.orders))
    bounds = bound_photon_probabilities(constraints, args.n_cut)
    doc = bounds.to_dict()
    doc["assumptions"] = bounds.assumptions
    doc["input"] = origin
    doc["metadata"] = _metadata("bound", args)
    _write_json(args.out, doc, args.force)
    return EXIT_OK


def _keyrate_spec(args) -> SourceSpec:
    mu = args.mu
    if args.ideal:
        true = parse_source(args.true_source) if args.true_source else Poisson(mu)
        return SourceSpec(true, None, "ideal")
    values, origin = _measured_values(args)
    constraints = _constraints(values, mu, args.gamma, _parse_orders(args.orders))
    if args.true_source:
        true = parse_source(args.true_source)
    elif args.preset:
        true = representative_source(args.preset, mu)
    else:
        true = Poisson(mu)
    return SourceSpec(true, constraints, origin)


def cmd_keyrate(args) -> int:
    settings = _settings(args)
    spec = _keyrate_spec(args)
    points = rate_vs_distance_scan(spec, _channel(args), _protocol(args, settings),
                                   parse_grid(args.grid), margin=args.margin, workers=args.workers)
    meta = _metadata("keyrate", args)
    meta["scan"] = scan_metadata(spec, _channel(args), _protocol(args, settings))
    if args.out is None:
        write_scan_csv(points, sys.stdout)
        sys.stderr.write(json.dumps(meta) + "\n")
    else:
        with _open_out(args.out, args.force) as fh:
            write_scan_csv(points, fh)
        _write_json(_sidecar(args.out), meta, args.force)
    return EXIT_OK


def cmd_pipeline(args) -> int:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    source = parse_source(args.source)
    split = tuple(float(s) for s in args.split.split(","))
    cfg = DetectorConfig(args.efficiency, args.eta0_cap, split, args.dark_count_prob)

    records_path = out / "records.txt"
    save_records(simulate_pulse_train(source, args.pulses, cfg, args.seed, workers=args.workers),
                 records_path, force=args.force)
    with open(records_path, "rb") as fh:
        counts = count_coincidences(parse_records(fh))
    report = _estimate_report(counts)
    _write_json(str(out / "correlations.json"), report, args.force)

    mu = source.mean
    values = {int(k): (v["value"], v["sigma"]) for k, v in report["correlations"].items()}
    constraints = _constraints(values, mu, args.gamma, None)
    bounds = bound_photon_probabilities(constraints, args.n_cut)

    args.mu = mu
    settings = _settings(args)
    spec = SourceSpec(source, constraints, "pipeline")
    params = _protocol(args, settings)
    points = rate_vs_distance_scan(spec, _channel(args), params, parse_grid(args.grid),
                                   margin=args.margin, workers=args.workers)
    with _open_out(out / "keyrate.csv", args.force) as fh:
        write_scan_csv(points, fh)

    cert = bounds.to_dict()
    cert["assumptions"] = bounds.assumptions
    cert["yields"] = [
        {"distance_km": p.distance_km, "y0_lower": p.y0_lower, "y1_lower": p.y1_lower,
         "e1_upper": p.e1_upper, "e1_clamped": p.e1_clamped}
        for p in points
    ]
    cert["metadata"] = _metadata("pipeline", args)
    cert["metadata"]["scan"] = scan_metadata(spec, _channel(args), params)
    _write_json(str(out / "certificate.json"), cert, args.force)
    _write_json(None, {"out_dir": str(out), "orders": list(constraints.orders),
                       "bounds": cert["bounds"]}, True)
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file with option values (flags override)")
    p.add_argument("--force", action="store_true", help="overwrite existing output files")


def _add_detector(p: argparse.ArgumentParser) -> None:
    p.add_argument("--source", required=True, help="poisson:MU | thermal:MU | single | W*SRC+W*SRC")
    p.add_argument("--pulses", type=int, default=1_000_000)
    p.add_argument("--efficiency", type=float, default=0.005)
    p.add_argument("--eta0-cap", type=float, default=0.01)
    p.add_argument("--split", default="0.25,0.25,0.25,0.25")
    p.add_argument("--dark-count-prob", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)


def _add_measurement_inputs(p: argparse.ArgumentParser) -> None:
    p.add_argument("--preset", choices=sorted(PRESETS))
    p.add_argument("--report", help="correlation report written by 'estimate'")
    for m in (2, 3, 4):
        p.add_argument(f"--g{m}", metavar="VALUE,SIGMA")
    p.add_argument("--orders", help="comma-separated orders to use, e.g. 2 or 2,3,4")
    p.add_argument("--gamma", type=float, default=DEFAULT_GAMMA)
    p.add_argument("--n-cut", type=int, default=DEFAULT_N_CUT)


def _add_keyrate_params(p: argparse.ArgumentParser, with_mu: bool = True) -> None:
    if with_mu:
        p.add_argument("--mu", type=float, default=0.42, help="signal intensity u")
    p.add_argument("--v", type=float, default=0.02)
    p.add_argument("--w", type=float, default=1e-4)
    p.add_argument("--p-u", type=float, default=0.9)
    p.add_argument("--p-v", type=float, default=0.05)
    p.add_argument("--p-w", type=float, default=0.05)
    p.add_argument("--alpha", type=float, default=0.2, help="fibre loss, dB/km")
    p.add_argument("--detector-efficiency", type=float, default=0.1)
    p.add_argument("--dark-click-prob", type=float, default=1e-5)
    p.add_argument("--misalignment", type=float, default=0.01)
    p.add_argument("--vacuum-error", type=float, default=0.5)
    p.add_argument("--p-z", type=float, default=0.9)
    p.add_argument("--f", type=float, default=1.16)
    p.add_argument("--delta", type=float, default=0.0)
    p.add_argument("--e0-lower", type=float, default=0.0)
    p.add_argument("--margin", type=float, default=0.0, help="relative width of gain intervals")
    p.add_argument("--grid", default="0:100:5")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="photoncert", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="Monte Carlo HBT detection records")
    _add_common(p)
    _add_detector(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", help="g2, g3, g4 from a detection-record file")
    _add_common(p)
    p.add_argument("records")
    p.add_argument("--n-pulses", type=int, help="pulse slots covered, for sparse recordings")
    p.add_argument("--out")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("bound", help="bounds on p0..p3 from correlation constraints")
    _add_common(p)
    _add_measurement_inputs(p)
    p.add_argument("--mu", type=float, required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("keyrate", help="secure key rate versus distance")
    _add_common(p)
    _add_measurement_inputs(p)
    _add_keyrate_params(p)
    p.add_argument("--ideal", action="store_true", help="exactly known (Poisson) statistics")
    p.add_argument("--true-source", help="source actually prepared, for synthetic channel data")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_keyrate)

    p = sub.add_parser("pipeline", help="simulate -> estimate -> bound -> keyrate")
    _add_common(p)
    _add_detector(p)
    p.add_argument("--gamma", type=float, default=DEFAULT_GAMMA)
    p.add_argument("--n-cut", type=int, default=DEFAULT_N_CUT)
    _add_keyrate_params(p, with_mu=False)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_pipeline)
    return parser


def _config_path(argv: Sequence[str]) -> str | None:
    for k, tok in enumerate(argv):
        if tok == "--config" and k + 1 < len(argv):
            return argv[k + 1]
        if tok.startswith("--config="):
            return tok.split("=", 1)[1]
    return None


def _apply_config(parser: argparse.ArgumentParser, argv: Sequence[str]) -> argparse.Namespace:
    """Parse ``argv`` with values from a ``--config`` JSON file as defaults."""
    path = _config_path(argv)
    command = next((t for t in argv if not t.startswith("-")), None)
    subparsers = parser._subparsers._group_actions[0].choices  # noqa: SLF001
    if path is not None and command in subparsers:
        with open(path, encoding="utf-8") as fh:
            config = json.load(fh)
        if not isinstance(config, dict):
            raise ValidationError("config file must hold a JSON object")
        config = {k.replace("-", "_"): v for k, v in config.items()}
        sub = subparsers[command]
        actions = {a.dest: a for a in sub._actions}  # noqa: SLF001
        unknown = sorted(set(config) - set(actions) - {"help"})
        if unknown:
            raise ValidationError(f"unknown config keys: {unknown}")
        sub.set_defaults(**config)
        # a required option may be supplied by the file instead
        for dest in config:
            actions[dest].required = False
    return parser.parse_args(argv)


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = _apply_config(parser, argv)
        return args.func(args)
    except InfeasibleError as exc:
        _error("calibration alarm: %s", exc)
        return EXIT_INFEASIBLE
    except ValidationError as exc:
        _error("invalid input: %s", exc)
        return EXIT_VALIDATION
    except DataError as exc:
        _error("data error: %s", exc)
        return EXIT_DATA
    except OSError as exc:
        _error("I/O error: %s", exc)
        return EXIT_IO
    except json.JSONDecodeError as exc:
        _error("invalid JSON: %s", exc)
        return EXIT_VALIDATION
    except PhotonCertError as exc:
        _error("%s", exc)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())

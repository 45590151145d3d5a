"""Command line entry point.

    thcs run     --config F [--resume SNAPSHOT]
    thcs decay   --config F
    thcs average --config F [--eta-list 4,16,64,256] [--horizon 2]
    thcs audit   --resolution N --trials M --seed S [--out-dir D]

Exit status: 0 success, 1 invalid input, 2 divergence. The last line on
stdout is a one-line JSON status record.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .diagnostics import inequality_audit
from .dynamics import DivergenceError, StepControl, simulate
from .experiments import averaging_dt, run_averaging_experiment, run_decay_experiment
from .io import (
    ConfigError,
    TimeseriesWriter,
    build_control,
    build_forcing,
    build_initial,
    build_params,
    load_config,
    read_snapshot,
    write_snapshot,
)
from .spectral import grid_for

logger = logging.getLogger("thcs")

EXIT_OK, EXIT_INVALID, EXIT_DIVERGED = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage().strip()}\n{self.prog}: error: {message}")


def _parser() -> argparse.ArgumentParser:
    p = _Parser(prog="thcs", description="Thermohaline circulation simulator and verification harness")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    run = sub.add_parser("run", help="integrate a configured run")
    run.add_argument("--config", required=True)
    run.add_argument("--resume", help="start from a snapshot instead of the configured initial data")

    decay = sub.add_parser("decay", help="unforced exponential decay experiment")
    decay.add_argument("--config", required=True)

    avg = sub.add_parser("average", help="forced versus time-averaged comparison")
    avg.add_argument("--config", required=True)
    avg.add_argument("--eta-list", default="4,16,64,256")
    avg.add_argument("--horizon", type=float, default=2.0)

    audit = sub.add_parser("audit", help="functional inequality audit")
    audit.add_argument("--resolution", type=int, default=64)
    audit.add_argument("--trials", type=int, default=1000)
    audit.add_argument("--seed", type=int, default=0)
    audit.add_argument("--out-dir")
    return p


def _status(**fields) -> None:
    print(json.dumps(fields, sort_keys=True))


def _dump(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(o):
    if hasattr(o, "to_dict"):
        return o.to_dict()
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")


def _setup(args):
    cfg = load_config(args.config)
    out = Path(cfg.output.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _dump(cfg.to_dict(), out / "config.json")
    return cfg, out


def cmd_run(args) -> int:
    from .plotting import plot_timeseries

    cfg, out = _setup(args)
    params = build_params(cfg)
    if args.resume:
        initial, snap_params = read_snapshot(args.resume)
        if snap_params != params:
            raise ConfigError("snapshot parameters differ from the config", "resume")
    else:
        initial = build_initial(cfg, params)
    forcing = build_forcing(cfg, params)
    ctrl = build_control(cfg)
    if forcing is not None and ctrl.dt is None:
        # resolve the fast forcing period as the averaging sweep does
        ctrl = StepControl(averaging_dt(initial, forcing, ctrl), ctrl.cfl_safety,
                           ctrl.max_velocity_floor)
    writer = TimeseriesWriter(out / "timeseries.csv")
    try:
        traj = simulate(initial, params, forcing, ctrl, cfg.output.t_end,
                        cfg.output.sample_every, on_record=writer)
    finally:
        writer.close()
    write_snapshot(traj.final, params, out / "final.thcs")
    plot_timeseries(traj.records, out / "timeseries.png")
    _status(status="ok", command="run", t=traj.final.time, steps=traj.steps, dt=traj.dt,
            records=len(traj.records), out_dir=str(out))
    return EXIT_OK


def cmd_decay(args) -> int:
    from .plotting import plot_decay

    cfg, out = _setup(args)
    if cfg.forcing.components:
        raise ConfigError("the decay experiment runs unforced; remove forcing.components",
                          "forcing.components")
    params = build_params(cfg)
    writer = TimeseriesWriter(out / "timeseries.csv")
    try:
        report = run_decay_experiment(params, build_initial(cfg, params), build_control(cfg),
                                      cfg.output.t_end, cfg.output.sample_every,
                                      config=cfg.to_dict(), on_record=writer)
    finally:
        writer.close()
    _dump(report.to_dict(), out / "decay_report.json")
    plot_decay(report, report.records, out / "decay.png")
    fits = report.fits
    _status(status="ok", command="decay", envelope_ok=report.envelope_ok,
            paper_alpha_ok=report.paper_alpha_ok,
            energy_rate=None if fits.get("energy") is None else fits["energy"].rate,
            out_dir=str(out))
    return EXIT_OK


def _eta_list(text: str) -> list[float]:
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"not a comma-separated list of numbers: {text!r}", "eta-list") from None
    if not values or any(v < 1 for v in values):
        raise ConfigError("eta values must be >= 1", "eta-list")
    return values


def cmd_average(args) -> int:
    from .plotting import plot_averaging

    etas = _eta_list(args.eta_list)
    if not args.horizon > 0:
        raise ConfigError("must be positive", "horizon")
    cfg, out = _setup(args)
    params = build_params(cfg)
    forcing = build_forcing(cfg, params)
    if forcing is None:
        from .forcing import ForcingSpec
        forcing = ForcingSpec()
    report = run_averaging_experiment(params, build_initial(cfg, params), forcing, etas,
                                      args.horizon, build_control(cfg), config=cfg.to_dict(),
                                      keep_series=True)
    _dump(report.to_dict(), out / "averaging_report.json")
    plot_averaging(report, out / "averaging.png")
    if report.diverged:
        _status(status="diverged", command="average", diverged=report.diverged, out_dir=str(out))
        return EXIT_DIVERGED
    _status(status="ok", command="average", sup_errors=report.sup_errors,
            fitted_order=report.fitted_order, monotone=report.monotone, out_dir=str(out))
    return EXIT_OK


def cmd_audit(args) -> int:
    try:
        grid = grid_for(args.resolution)
        report = inequality_audit(grid, args.trials, args.seed)
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc), "audit") from None
    print(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    if args.out_dir:
        from .plotting import plot_audit

        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        _dump(report.to_dict(), out / "audit.json")
        plot_audit(report, out / "audit.png")
    _status(status="ok", command="audit", h2_ok=report.h2_ok, l4_ok=report.l4_ok,
            jacobian_residual_max=report.jacobian_residual_max)
    return EXIT_OK


COMMANDS = {"run": cmd_run, "decay": cmd_decay, "average": cmd_average, "audit": cmd_audit}


def main(argv=None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        _status(status="error", error="usage")
        return EXIT_INVALID
    if args.command is None:
        print(parser.format_usage().strip(), file=sys.stderr)
        _status(status="error", error="usage")
        return EXIT_INVALID
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        _status(status="error", command=args.command, error=str(exc),
                field=getattr(exc, "field", None))
        return EXIT_INVALID
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        _status(status="diverged", command=args.command, time=exc.time, records=len(exc.records))
        return EXIT_DIVERGED


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry point.

::

    radarcube simulate --config scenario.json --out run/
    radarcube process  --config scenario.json --out run/ [--cube run/scenario.cube] [--format csv|binary]
    radarcube compare  --config baseline.json --config enhanced.json --out cmp/
    radarcube array analyze  --config layout.json --out arr/
    radarcube array generate --config constraints.json --out arr/

Every subcommand accepts ``--seed`` and ``--threads`` (falling back to the
``RADARCUBE_THREADS`` environment variable).  Failures print one JSON
object on stderr (``{"error": <code>, "message": ..., "exit_code": n}``) and
exit with 2 (validation), 3 (I/O) or 4 (numeric / infeasible).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from . import io as rio
from .angles import AngleGrid
from .errors import RadarCubeError

EXIT_OK, EXIT_VALIDATION, EXIT_IO, EXIT_NUMERIC = 0, 2, 3, 4


def _u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _common(p: argparse.ArgumentParser, *, multi_config: bool = False) -> None:
    if multi_config:
        p.add_argument("--config", action="append", required=True, metavar="FILE",
                       help="scenario file; give exactly twice (A = baseline, B = candidate)")
    else:
        p.add_argument("--config", required=True, metavar="FILE")
    p.add_argument("--out", required=True, metavar="DIR", help="output directory (created if missing)")
    p.add_argument("--seed", type=_u64, default=None, help="override the scene seed")
    p.add_argument("--threads", type=_positive, default=None,
                   help="worker threads (default: $RADARCUBE_THREADS or 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="radarcube", description="FMCW MIMO radar point-cloud pipeline")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="synthesize a data cube from a scenario")
    _common(p)

    p = sub.add_parser("process", help="RD map, CFAR, DOA and point cloud from a cube file")
    _common(p)
    p.add_argument("--cube", metavar="FILE", help="cube file (default: <out>/<scenario>.cube)")
    p.add_argument("--format", choices=("csv", "binary"), default="csv", help="RD map output format")

    p = sub.add_parser("compare", help="run two configurations on the same scene and compare clouds")
    _common(p, multi_config=True)

    p = sub.add_parser("array", help="antenna layout analysis and generation")
    asub = p.add_subparsers(dest="array_command", required=True)
    a = asub.add_parser("analyze", help="redundancy, -3 dB widths, sidelobes and ambiguity map of a layout")
    _common(a)
    a.add_argument("--az-limit", type=float, default=60.0)
    a.add_argument("--el-limit", type=float, default=20.0)
    a.add_argument("--az-step", type=float, default=0.1)
    a.add_argument("--el-step", type=float, default=0.5)
    g = asub.add_parser("generate", help="search the ladder family for a layout meeting constraints")
    _common(g)
    return parser


def _cmd_simulate(args) -> int:
    from .pipeline import load_scenario, run_simulate

    cfg = load_scenario(args.config, seed=args.seed)
    _, summary = run_simulate(cfg, args.out, threads=args.threads)
    print(summary)
    return EXIT_OK


def _cmd_process(args) -> int:
    from .pipeline import load_scenario, run_process

    cfg = load_scenario(args.config, seed=args.seed)
    cube = Path(args.cube) if args.cube else Path(args.out) / f"{cfg.name}.cube"
    result, written = run_process(cube, cfg, args.out, fmt=args.format, threads=args.threads)
    print(result.summary())
    for p in written:
        print(f"wrote {p}")
    return EXIT_OK


def _cmd_compare(args) -> int:
    from .errors import ValidationError
    from .pipeline import load_scenario, run_compare

    if len(args.config) != 2:
        raise ValidationError("compare needs --config exactly twice")
    cfg_a = load_scenario(args.config[0], seed=args.seed)
    cfg_b = load_scenario(args.config[1], seed=args.seed)
    if cfg_a.name == cfg_b.name:
        from dataclasses import replace

        cfg_a, cfg_b = replace(cfg_a, name=f"A:{cfg_a.name}"), replace(cfg_b, name=f"B:{cfg_b.name}")
    report = run_compare(cfg_a, cfg_b, args.out, threads=args.threads)
    sys.stdout.write(report.table())
    return EXIT_OK


def _cmd_array(args) -> int:
    from .pipeline import load_constraints, run_array_analyze, run_array_generate

    if args.array_command == "analyze":
        layout = rio.load_layout(args.config)
        try:
            grid = AngleGrid(args.az_limit, args.el_limit, args.az_step, args.el_step)
        except ValueError as exc:
            from .errors import ValidationError

            raise ValidationError(str(exc)) from exc
        report = run_array_analyze(layout, grid, args.out)
        sys.stdout.write(report.text())
        print(f"wrote {Path(args.out) / 'ambiguity.csv'}")
        return EXIT_OK
    constraints, rows = load_constraints(args.config)
    path, _, report = run_array_generate(constraints, args.out, rows=rows)
    print(f"generated layout: az width {report.az_width:.4f} deg, el width {report.el_width:.4f} deg, "
          f"peak sidelobe {report.peak_sidelobe_db:.2f} dB")
    print(f"wrote {path}")
    return EXIT_OK


_COMMANDS = {"simulate": _cmd_simulate, "process": _cmd_process, "compare": _cmd_compare, "array": _cmd_array}


def _fail(code: str, message: str, exit_code: int) -> int:
    sys.stderr.write(json.dumps({"error": code, "message": message, "exit_code": exit_code}) + "\n")
    return exit_code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse usage errors are validation failures
        return EXIT_VALIDATION if exc.code not in (0, None) else EXIT_OK
    try:
        return _COMMANDS[args.command](args)
    except RadarCubeError as exc:
        return _fail(exc.code, str(exc), exc.exit_code)
    except OSError as exc:
        return _fail("IOError", str(exc), EXIT_IO)
    except (ValueError, TypeError) as exc:
        return _fail("ValidationError", str(exc), EXIT_VALIDATION)
    except (ArithmeticError, FloatingPointError, MemoryError) as exc:
        return _fail(type(exc).__name__, str(exc), EXIT_NUMERIC)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

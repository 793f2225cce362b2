"""Command line: ``flatheat <synthesize|predict|simulate|verify|study|reproduce> ...``.

Exit status 0 on success, 1 for configuration errors, 2 for numerical failures.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import io
from .config import PRESETS, ConfigError, RunConfig, load_config, preset
from .pipeline import convergence_study, run_pipeline

log = logging.getLogger("flatheat")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2

_STAGES = {
    "synthesize": ("synthesize",),
    "predict": ("predict",),
    "simulate": ("synthesize", "simulate"),
    "verify": ("synthesize", "predict", "simulate", "verify"),
}

# flags that map straight onto config keys
_KEY_FLAGS = (
    ("--dimension", int),
    ("--initial", str),
    ("--T", float),
    ("--tau", float),
    ("--s", float),
    ("--i-bar", int),
    ("--j-bar", int),
    ("--n-bar", int),
    ("--cells", int),
    ("--dt", float),
    ("--control-samples", int),
    ("--snapshots", int),
)


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got '{text}'") from exc


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="key = value configuration file")
    p.add_argument("--preset", choices=sorted(PRESETS), help="start from a compiled-in preset")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override any config key")
    for flag, typ in _KEY_FLAGS:
        p.add_argument(flag, type=typ, default=None, dest=flag[2:].replace("-", "_"))
    p.add_argument("-o", "--output", default=None, help="output directory")
    p.add_argument("--no-figures", action="store_true", help="skip the PNG figures")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="flatheat", description="Flatness-based null control of the heat equation.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("synthesize", "sample the control and write control.csv"),
        ("predict", "evaluate the truncated state and write predicted.csv"),
        ("simulate", "run the finite-volume model under the control"),
        ("verify", "all stages plus the verification report"),
    ):
        _common(sub.add_parser(name, help=help_text))
    st = sub.add_parser("study", help="truncation convergence study")
    _common(st)
    st.add_argument("--i-sweep", type=_int_list, default=None)
    st.add_argument("--n-sweep", type=_int_list, default=None)
    st.add_argument("--j-sweep", type=_int_list, default=None)
    rp = sub.add_parser("reproduce", help="run a compiled-in experiment end to end")
    rp.add_argument("name", choices=("paper-1d", "paper-2d"))
    rp.add_argument("-o", "--output", default=None)
    rp.add_argument("--no-figures", action="store_true")
    return parser


def resolve_config(args) -> RunConfig:
    """Preset, then config file, then ``--set`` pairs, then dedicated flags."""
    cfg = preset(args.preset) if getattr(args, "preset", None) else RunConfig()
    if getattr(args, "config", None):
        cfg = load_config(args.config, cfg)
    pairs = []
    for item in getattr(args, "set", []):
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got '{item}'")
        k, _, v = item.partition("=")
        pairs.append((k, v))
    for flag, _ in _KEY_FLAGS:
        key = flag[2:].replace("-", "_")
        val = getattr(args, key, None)
        if val is not None:
            pairs.append((key, str(val)))
    if args.output is not None:
        pairs.append(("output", args.output))
    return RunConfig.from_pairs(pairs, cfg) if pairs else cfg


def _run(args) -> int:
    if args.command == "reproduce":
        cfg = preset(args.name, output=args.output or f"out/{args.name}")
        paths = run_pipeline(cfg, figures=not args.no_figures)
    elif args.command == "study":
        cfg = resolve_config(args)
        sweep = {}
        for axis in ("i", "j", "n"):
            v = getattr(args, f"{axis}_sweep")
            if v is not None:
                sweep[axis] = v
        if not sweep:
            sweep = {"i": [10, 15, 20, 25, 30], "n": [5, 10, 15, 20, 25]}
            if cfg.dimension > 1:
                sweep["j"] = [5, 10, 15, 20, 25]
        table = convergence_study(cfg, sweep)
        out = Path(cfg.output)
        paths = {"study": table.write_csv(out / "study.csv", cfg)}
        if not args.no_figures:
            from .plotting import plot_study

            paths["fig_study"] = plot_study(table, out / "figures" / "study.png")
        for axis, slope in table.slopes.items():
            print(f"slope[{axis}] = {slope:.6g}  (model rate {table.rates[axis]:.6g})")
    else:
        cfg = resolve_config(args)
        paths = run_pipeline(cfg, stages=_STAGES[args.command], figures=not args.no_figures)
        if "report" in paths:
            rep = io.read_report(paths["report"])
            for key in ("sim_relative_l2", "residual_max", "interface_defect_y", "null_steering"):
                if key in rep:
                    print(f"{key}: {rep[key]}")
    for name, path in paths.items():
        log.info("wrote %s -> %s", name, path)
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s"
    )
    try:
        return _run(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ArithmeticError, RuntimeError) as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

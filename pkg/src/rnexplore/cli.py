"""Command line: ``rnexplore run|bench|validate``.

Every command prints a one-line JSON status as its last output line.
Exit codes: 0 success or natural termination, 1 configuration or input
error, 2 time limit reached.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from rnexplore.errors import ConfigError, ParseError
from rnexplore.sim import VARIANTS, ScenarioConfig, compare_variants, format_summary, run_to_completion, spawn_problems
from rnexplore.world import format_voxelmap, load_environment_file

EXIT_OK, EXIT_ERROR, EXIT_TIME_LIMIT = 0, 1, 2
ARTIFACTS = ("events.log", "metrics.csv", "graph.txt", "map.txt")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _on_off(text: str) -> bool:
    if text.lower() in ("on", "true", "1"):
        return True
    if text.lower() in ("off", "false", "0"):
        return False
    raise argparse.ArgumentTypeError(f"expected on or off, got {text!r}")


def _add_overrides(p: argparse.ArgumentParser) -> None:
    """One flag per scenario key; unset flags keep the file value."""
    for f in dataclasses.fields(ScenarioConfig):
        if f.name == "environment":
            continue
        flag = "--" + f.name.replace("_", "-")
        kind = type(f.default)
        if kind is bool:
            p.add_argument(flag, type=_on_off, metavar="on|off", default=None)
        elif f.name == "mode":
            p.add_argument(flag, choices=("graph", "tree"), default=None)
        else:
            p.add_argument(flag, type=kind, default=None)
    p.add_argument("--environment", default=None, help="override the world file")


def _overrides(args) -> dict:
    names = {f.name for f in dataclasses.fields(ScenarioConfig)}
    return {k: v for k, v in vars(args).items() if k in names and v is not None}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rnexplore", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="explore one scenario and write artifacts")
    run.add_argument("--scenario", required=True, type=Path)
    run.add_argument("--out", required=True, type=Path)
    _add_overrides(run)

    bench = sub.add_parser("bench", help="run variants over several seeds and summarize")
    bench.add_argument("--scenario", required=True, type=Path)
    bench.add_argument("--seeds", type=int, default=10, help="number of seeds, starting at --first-seed")
    bench.add_argument("--first-seed", type=int, default=1)
    bench.add_argument("--variants", default="rne,rrg,rrt+ls,rrt")
    bench.add_argument("--out", type=Path, default=None, help="directory for per-run metrics and the summary")
    _add_overrides(bench)

    val = sub.add_parser("validate", help="check a scenario file")
    val.add_argument("scenario", type=Path)
    return parser


def _status(**fields) -> str:
    return json.dumps(fields, sort_keys=True)


def cmd_run(args) -> int:
    cfg = ScenarioConfig.from_file(args.scenario, **_overrides(args))
    result = run_to_completion(cfg)
    out: Path = args.out
    out.mkdir(parents=True, exist_ok=True)
    (out / "events.log").write_text("\n".join(result.events) + "\n")
    (out / "metrics.csv").write_text(result.metrics.to_csv())
    (out / "graph.txt").write_text(result.graph.snapshot())
    (out / "map.txt").write_text(format_voxelmap(result.robot_map))
    m = result.metrics
    code = EXIT_OK if result.natural else EXIT_TIME_LIMIT
    print(_status(
        command="run", status=result.reason, exit=code, seed=cfg.seed, duration_s=round(m.duration, 3),
        path_length_m=round(m.final_path_length, 3), mapped_volume_m3=round(m.final_volume, 3),
        coverage=round(result.coverage, 4), nodes=len(result.graph), out=str(out),
    ))
    return code


def cmd_bench(args) -> int:
    variants = [v.strip() for v in args.variants.split(",") if v.strip()]
    bad = [v for v in variants if v not in VARIANTS]
    if bad:
        raise ConfigError(f"unknown variants: {', '.join(bad)} (choose from {', '.join(VARIANTS)})")
    if args.seeds < 2:
        raise ConfigError("--seeds must be at least 2")
    base = ScenarioConfig.from_file(args.scenario, **_overrides(args))
    tables: dict[str, list[tuple[float, float, float]]] = {}
    failures = []
    for name in variants:
        rows = tables.setdefault(name, [])
        for seed in range(args.first_seed, args.first_seed + args.seeds):
            cfg = dataclasses.replace(base.with_variant(name), seed=seed)
            try:
                res = run_to_completion(cfg)
            except Exception as exc:  # keep the batch going, report at the end
                failures.append({"variant": name, "seed": seed, "error": str(exc)})
                print(f"{name} seed {seed}: failed: {exc}", file=sys.stderr)
                continue
            m = res.metrics
            rows.append((m.duration, m.final_path_length, m.final_volume))
            print(f"{name} seed {seed}: {res.reason} duration {m.duration:.1f} s path {m.final_path_length:.1f} m "
                  f"volume {m.final_volume:.2f} m3 coverage {res.coverage:.3f}")
            if args.out:
                d = args.out / name / f"seed{seed}"
                d.mkdir(parents=True, exist_ok=True)
                (d / "metrics.csv").write_text(m.to_csv())
                (d / "events.log").write_text("\n".join(res.events) + "\n")
    usable = {k: v for k, v in tables.items() if len(v) >= 2}
    summary = format_summary(compare_variants(usable)) if usable else ""
    print(summary, end="")
    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "summary.csv").write_text(summary)
    runs = sum(len(v) for v in tables.values())
    print(_status(command="bench", status="ok" if not failures else "partial", exit=EXIT_OK,
                  runs=runs, failures=failures, variants=variants))
    return EXIT_OK


def validate_scenario(path: Path) -> list[str]:
    """All problems found in a scenario file; empty when valid."""
    try:
        cfg = ScenarioConfig.from_file(path)
    except ConfigError as exc:
        return [str(exc)]
    except OSError as exc:
        return [f"cannot read scenario: {exc}"]
    try:
        truth = load_environment_file(cfg.environment)
    except ParseError as exc:
        return [f"{cfg.environment}: {exc}"]
    except OSError as exc:
        return [f"cannot read environment: {exc}"]
    return spawn_problems(cfg, truth)


def cmd_validate(args) -> int:
    problems = validate_scenario(args.scenario)
    for p in problems:
        print(f"violation: {p}")
    code = EXIT_ERROR if problems else EXIT_OK
    print(_status(command="validate", status="invalid" if problems else "valid", exit=code,
                  violations=problems, scenario=str(args.scenario)))
    return code


COMMANDS = {"run": cmd_run, "bench": cmd_bench, "validate": cmd_validate}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args)
    except (ConfigError, ParseError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        print(_status(status="error", exit=EXIT_ERROR, message=str(exc)))
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())

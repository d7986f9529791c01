"""Command-line harness: single runs, batch sweeps, incident comparisons.

Every output embeds the seed and configuration that produced it; rerunning
the same command yields byte-identical traces and reports. The process exits
nonzero iff a run under the savvy architecture records a safety-violation
fault.
"""

from __future__ import annotations

import argparse
import os
import re
import sys
from dataclasses import dataclass, replace
from pathlib import Path

from .incidents import INCIDENT_IDS, incident_fixture
from .metrics import MetricsSummary, run_record, summarize
from .report import emit_report
from .scenario import (
    ScenarioSpec,
    normalize_scenario_file,
    parse_scenario_file,
    ScenarioFormatError,
)
from .supervisor import Architecture, PolicyKind, SchedulingPolicy
from .world import run_scenario

OUT_DIR_ENV = "SAVVY_OUT_DIR"

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_SAFETY_FAULT = 2


@dataclass
class RunConfig:
    """One batch invocation: scenarios x seeds x architectures."""

    specs: list[ScenarioSpec]
    seeds: list[int]
    architectures: list[Architecture] | None = None  # None: each spec's own
    policy: SchedulingPolicy | None = None
    out_dir: Path | None = None
    trace_level: int = 1


def run_batch(config: RunConfig) -> tuple[MetricsSummary, int]:
    """Execute every cell; write per-run traces and the comparison report.

    Returns the summary and the process exit code (nonzero iff any run under
    the savvy architecture recorded a safety-violation fault).
    """
    records = []
    traces_dir = None
    if config.out_dir is not None:
        traces_dir = Path(config.out_dir) / "traces"
        traces_dir.mkdir(parents=True, exist_ok=True)
    for spec in config.specs:
        if config.policy is not None:
            spec = replace(spec, policy=config.policy)
        archs = config.architectures or [spec.architecture]
        for arch in archs:
            for seed in config.seeds:
                trace, verdict = run_scenario(
                    spec, seed=seed, architecture=arch,
                    trace_level=config.trace_level,
                )
                records.append(
                    run_record(spec.name, arch.value, seed, trace, verdict)
                )
                if traces_dir is not None:
                    name = f"{_slug(spec.name)}__{arch.value}__seed{seed}.trace"
                    try:
                        (traces_dir / name).write_text(trace.text())
                    except OSError as exc:
                        print(f"warning: could not write {name}: {exc}", file=sys.stderr)
    summary = summarize(records)
    if config.out_dir is not None:
        try:
            emit_report(summary, Path(config.out_dir))
        except OSError as exc:
            print(f"warning: could not write report: {exc}", file=sys.stderr)
    exit_code = EXIT_SAFETY_FAULT if summary.savvy_faults() > 0 else EXIT_OK
    return summary, exit_code


def _slug(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]+", "-", name)


def _parse_seeds(args) -> list[int]:
    if args.seeds is not None:
        match = re.fullmatch(r"(-?\d+)\.\.(-?\d+)", args.seeds.strip())
        if not match:
            raise SystemExit(f"--seeds expects N..M, got {args.seeds!r}")
        lo, hi = int(match.group(1)), int(match.group(2))
        return list(range(lo, hi + 1))
    return [args.seed]


def _parse_archs(value: str | None) -> list[Architecture] | None:
    if value is None:
        return None
    archs = []
    for token in value.split(","):
        try:
            archs.append(Architecture(token.strip().lower()))
        except ValueError:
            choices = ", ".join(a.value for a in Architecture)
            raise SystemExit(f"unknown architecture {token!r}; choose from: {choices}")
    return archs


def _parse_policy(value: str | None) -> SchedulingPolicy | None:
    if value is None:
        return None
    if value == "static_even":
        return SchedulingPolicy()
    match = re.fullmatch(r"weighted:([\d.,]+)", value)
    if match:
        weights = tuple(float(w) for w in match.group(1).split(","))
        return SchedulingPolicy(PolicyKind.DYNAMIC_WEIGHTED, weights)
    raise SystemExit(
        f"--policy expects 'static_even' or 'weighted:W1,W2,...', got {value!r}"
    )


def _load_specs(paths: list[str]) -> list[ScenarioSpec]:
    specs = []
    for path in paths:
        p = Path(path)
        if not p.exists():
            raise SystemExit(f"scenario file not found: {path}")
        try:
            specs.append(parse_scenario_file(p.read_text()))
        except ScenarioFormatError as exc:
            lines = "\n".join(f"  line {line}: {msg}" for line, msg in exc.errors)
            raise SystemExit(f"invalid scenario {path}:\n{lines}")
    return specs


def _out_dir(args) -> Path | None:
    if args.out is not None:
        return Path(args.out)
    env = os.environ.get(OUT_DIR_ENV)
    return Path(env) if env else None


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="savvy",
        description="Deterministic simulator comparing deadline-aware and "
        "all-or-nothing driving pipelines.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--arch", help="comma list: savvy,aon,simplex")
        p.add_argument("--policy", help="static_even or weighted:W1,W2,W3")
        p.add_argument("--out", help=f"output directory (default ${OUT_DIR_ENV})")
        p.add_argument("--trace-level", type=int, default=1,
                       help="0 none, 1 key events, 2 +bus, 3 +world ticks")
        group = p.add_mutually_exclusive_group()
        group.add_argument("--seed", type=int, default=0)
        group.add_argument("--seeds", help="inclusive range N..M")

    p_run = sub.add_parser("run", help="run one scenario file once")
    p_run.add_argument("scenario")
    add_common(p_run)
    p_run.set_defaults(trace_level=2)

    p_batch = sub.add_parser("batch", help="sweep scenarios x seeds x architectures")
    p_batch.add_argument("scenarios", nargs="+")
    add_common(p_batch)

    p_inc = sub.add_parser(
        "incidents", help="replay the bundled incident reconstructions"
    )
    add_common(p_inc)
    p_inc.add_argument(
        "--only", help=f"comma list of incident ids ({','.join(INCIDENT_IDS)})"
    )

    p_norm = sub.add_parser(
        "normalize", help="print the canonical form of a scenario file"
    )
    p_norm.add_argument("scenario")

    sub.add_parser(
        "verify",
        help="run the acceptance criteria (randomized safety sweep, incident "
        "reconstruction, dominance, calibration, determinism)",
    )

    args = parser.parse_args(argv)

    if args.command == "verify":
        from .acceptance import run_all

        results = run_all()
        for result in results:
            print(result.line())
        return EXIT_OK if all(r.ok for r in results) else EXIT_SAFETY_FAULT

    if args.command == "normalize":
        p = Path(args.scenario)
        if not p.exists():
            raise SystemExit(f"scenario file not found: {args.scenario}")
        try:
            print(normalize_scenario_file(p.read_text()), end="")
        except ScenarioFormatError as exc:
            lines = "\n".join(f"  line {line}: {msg}" for line, msg in exc.errors)
            raise SystemExit(f"invalid scenario {args.scenario}:\n{lines}")
        return EXIT_OK

    if args.command == "run":
        specs = _load_specs([args.scenario])
    elif args.command == "batch":
        specs = _load_specs(args.scenarios)
    else:
        ids = INCIDENT_IDS
        if args.only:
            ids = tuple(t.strip().upper() for t in args.only.split(","))
        try:
            specs = [incident_fixture(i) for i in ids]
        except ValueError as exc:
            raise SystemExit(str(exc))

    archs = _parse_archs(args.arch)
    if args.command == "incidents" and archs is None:
        archs = [Architecture.SAVVY, Architecture.ALL_OR_NOTHING]

    config = RunConfig(
        specs=specs,
        seeds=_parse_seeds(args),
        architectures=archs,
        policy=_parse_policy(args.policy),
        out_dir=_out_dir(args),
        trace_level=args.trace_level,
    )
    summary, exit_code = run_batch(config)
    text, _ = emit_report(summary)
    print(text, end="")
    if exit_code == EXIT_SAFETY_FAULT:
        print("SAFETY VIOLATION FAULTS RECORDED UNDER SAVVY", file=sys.stderr)
    return exit_code


if __name__ == "__main__":
    sys.exit(main())

"""Comparison reports: text table, CSV, and figures.

All outputs are deterministic for a given summary: fixed column order, fixed
float formatting, and figures written without embedded timestamps.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .metrics import MetricsSummary  # noqa: E402
from .world import Outcome  # noqa: E402

CSV_COLUMNS = (
    "scenario,architecture,runs,fallback_rate,collision_rate,faults,"
    "mean_achieved_level,mean_decision_latency_ms,"
    "safe_pass,safe_stop,collision,safety_violation_fault"
)

_OUTCOME_ORDER = (
    Outcome.SAFE_PASS.value,
    Outcome.SAFE_STOP.value,
    Outcome.COLLISION.value,
    Outcome.SAFETY_VIOLATION_FAULT.value,
)


def render_csv(summary: MetricsSummary) -> str:
    lines = [CSV_COLUMNS]
    for arch in sorted(summary.per_arch):
        stats = summary.per_arch[arch]
        lines.append(
            f"*,{arch},{stats.runs},{stats.fallback_rate:.6f},"
            f"{stats.collision_rate:.6f},{stats.faults},"
            f"{stats.mean_achieved_level:.4f},{stats.mean_decision_latency_ms:.1f},"
            + ",".join(str(stats.outcomes.get(o, 0)) for o in _OUTCOME_ORDER)
        )
    for (scenario, arch) in sorted(summary.per_scenario):
        cell = summary.per_scenario[(scenario, arch)]
        runs = sum(cell.values())
        lines.append(
            f"{scenario},{arch},{runs},,,,,,"
            + ",".join(str(cell.get(o, 0)) for o in _OUTCOME_ORDER)
        )
    return "\n".join(lines) + "\n"


def render_text(summary: MetricsSummary) -> str:
    out: list[str] = []
    seeds = summary.seeds
    seed_label = (
        f"{seeds[0]}..{seeds[-1]}" if len(seeds) > 1 else str(seeds[0]) if seeds else "-"
    )
    out.append("architecture comparison")
    out.append(f"runs: {summary.total_runs}  seeds: {seed_label}")
    out.append("")
    header = (
        f"{'architecture':<14} {'runs':>6} {'fallback':>9} {'collision':>10} "
        f"{'faults':>7} {'avg level':>10} {'avg latency':>12}"
    )
    out.append(header)
    out.append("-" * len(header))
    for arch in sorted(summary.per_arch):
        stats = summary.per_arch[arch]
        out.append(
            f"{arch:<14} {stats.runs:>6} {stats.fallback_rate:>9.3f} "
            f"{stats.collision_rate:>10.3f} {stats.faults:>7} "
            f"{stats.mean_achieved_level:>10.2f} "
            f"{stats.mean_decision_latency_ms:>9.1f} ms"
        )
    if summary.per_scenario:
        out.append("")
        out.append("verdicts by scenario")
        scenarios = sorted({s for s, _ in summary.per_scenario})
        archs = sorted({a for _, a in summary.per_scenario})
        width = max(len(s) for s in scenarios) + 2
        out.append(" " * width + "  ".join(f"{a:<24}" for a in archs))
        for scenario in scenarios:
            cells = []
            for arch in archs:
                counter = summary.per_scenario.get((scenario, arch))
                cells.append(f"{_modal(counter):<24}" if counter else " " * 24)
            out.append(f"{scenario:<{width}}" + "  ".join(cells))
    out.append("")
    return "\n".join(out)


def _modal(counter) -> str:
    total = sum(counter.values())
    outcome, count = max(counter.items(), key=lambda kv: (kv[1], kv[0]))
    if total == 1:
        return outcome
    return f"{outcome} ({count}/{total})"


def render_figures(summary: MetricsSummary, out_dir: Path) -> list[Path]:
    """Write comparison figures as PNGs next to the delimited output."""
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    archs = sorted(summary.per_arch)
    if not archs:
        return written

    fallback = [summary.per_arch[a].fallback_rate for a in archs]
    collision = [summary.per_arch[a].collision_rate for a in archs]
    fig, ax = plt.subplots(figsize=(6.0, 3.6))
    x = range(len(archs))
    ax.bar([i - 0.18 for i in x], fallback, width=0.36, label="fallback rate")
    ax.bar([i + 0.18 for i in x], collision, width=0.36, label="collision rate")
    ax.set_xticks(list(x), archs)
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("rate")
    ax.set_title("fallback and collision rates")
    ax.legend()
    written.append(_save(fig, out_dir / "rates.png"))

    levels = [summary.per_arch[a].mean_achieved_level for a in archs]
    latency = [summary.per_arch[a].mean_decision_latency_ms for a in archs]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(7.5, 3.2))
    ax1.bar(archs, levels)
    ax1.set_title("mean achieved level")
    ax2.bar(archs, latency)
    ax2.set_title("mean decision latency (ms)")
    written.append(_save(fig, out_dir / "quality.png"))

    if summary.per_scenario:
        scenarios = sorted({s for s, _ in summary.per_scenario})
        colors = {
            Outcome.SAFE_PASS.value: "#4caf50",
            Outcome.SAFE_STOP.value: "#2196f3",
            Outcome.COLLISION.value: "#f44336",
            Outcome.SAFETY_VIOLATION_FAULT.value: "#9c27b0",
        }
        fig, ax = plt.subplots(
            figsize=(1.8 + 1.6 * len(archs), 0.7 + 0.45 * len(scenarios))
        )
        for yi, scenario in enumerate(scenarios):
            for xi, arch in enumerate(archs):
                counter = summary.per_scenario.get((scenario, arch))
                if not counter:
                    continue
                outcome, _ = max(counter.items(), key=lambda kv: (kv[1], kv[0]))
                ax.barh(yi, 0.9, left=xi, height=0.8, color=colors[outcome])
        ax.set_yticks(range(len(scenarios)), scenarios)
        ax.set_xticks([i + 0.45 for i in range(len(archs))], archs)
        ax.set_xlim(0, len(archs))
        ax.invert_yaxis()
        ax.set_title("modal verdict per scenario")
        handles = [plt.Rectangle((0, 0), 1, 1, color=c) for c in colors.values()]
        ax.legend(handles, list(colors), loc="center left", bbox_to_anchor=(1.01, 0.5))
        written.append(_save(fig, out_dir / "verdicts.png", tight_bbox=True))
    return written


def _save(fig, path: Path, tight_bbox: bool = False) -> Path:
    # Dropping the Date field keeps PNG bytes identical across runs.
    kwargs = {"dpi": 100, "metadata": {"Date": None}}
    if tight_bbox:
        kwargs["bbox_inches"] = "tight"
    else:
        fig.tight_layout()
    fig.savefig(path, **kwargs)
    plt.close(fig)
    return path


def emit_report(
    summary: MetricsSummary, out_dir: Path | None = None
) -> tuple[str, str]:
    """Render the comparison (text, csv); optionally write files + figures."""
    text = render_text(summary)
    csv_text = render_csv(summary)
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "report.txt").write_text(text)
        (out_dir / "summary.csv").write_text(csv_text)
        render_figures(summary, out_dir / "figures")
    return text, csv_text

"""Machine-readable run reports.

A report is line-delimited ``key: value`` pairs for humans followed by one
``json:`` line carrying the full structured payload; parsing reads only the
structured block, so reports round-trip exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from . import __version__

__all__ = ["RunReport", "write_report", "parse_report"]


@dataclass(frozen=True)
class RunReport:
    """Configuration echo, per-fold metrics, and aggregate statistics."""

    config: dict
    metric: str
    per_fold: tuple
    mean: float
    std: float
    seed: int
    wallclock_s: float
    version: str = __version__

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "metric": self.metric,
            "per_fold": list(self.per_fold),
            "mean": self.mean,
            "std": self.std,
            "seed": self.seed,
            "wallclock_s": self.wallclock_s,
            "version": self.version,
        }


def write_report(report: RunReport, path) -> Path:
    path = Path(path)
    lines = []
    for key, value in report.config.items():
        lines.append(f"{key}: {value}")
    for entry in report.per_fold:
        lines.append(f"fold_{entry['fold']}_{report.metric}: {entry['metric']:.6f}")
    lines.append(f"mean_{report.metric}: {report.mean:.6f}")
    lines.append(f"std_{report.metric}: {report.std:.6f}")
    lines.append(f"seed: {report.seed}")
    lines.append(f"wallclock_s: {report.wallclock_s:.3f}")
    lines.append(f"version: {report.version}")
    lines.append("json: " + json.dumps(report.to_dict(), sort_keys=True))
    path.write_text("\n".join(lines) + "\n")
    return path


def parse_report(path) -> RunReport:
    """Rebuild a report from its structured block."""
    for line in Path(path).read_text().splitlines():
        if line.startswith("json: "):
            payload = json.loads(line[len("json: "):])
            return RunReport(
                config=payload["config"],
                metric=payload["metric"],
                per_fold=tuple(payload["per_fold"]),
                mean=payload["mean"],
                std=payload["std"],
                seed=payload["seed"],
                wallclock_s=payload["wallclock_s"],
                version=payload["version"],
            )
    raise ValueError(f"no structured block found in {path}")

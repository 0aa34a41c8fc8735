from typing import Optional

from rich.table import Table

from app.services.raytrace import MpcCategory
from app.services.report import EmulationReport


def _rel(a: float, b: float) -> str:
    if a == 0.0:
        return "n/a"
    return f"{(b - a) / a * 100.0:+.1f} %"


def _title(report: EmulationReport, label: str) -> str:
    m = report.metadata
    return f"{label}: {m.band}/{m.setup} seed {m.seed}"


def error_table(a: EmulationReport, b: EmulationReport) -> Table:
    table = Table(title="2D positioning error [m]")
    table.add_column("metric")
    table.add_column(_title(a, "A"), justify="right")
    table.add_column(_title(b, "B"), justify="right")
    table.add_column("B vs A", justify="right")
    table.add_row("average", f"{a.average_error_m:.3f}", f"{b.average_error_m:.3f}",
                  _rel(a.average_error_m, b.average_error_m))
    for q, value in a.percentiles.items():
        other = b.percentiles.get(q)
        table.add_row(
            f"{q}th percentile",
            f"{value:.3f}",
            f"{other:.3f}" if other is not None else "-",
            _rel(value, other) if other is not None else "-",
        )
    for check_a, check_b in zip(a.requirements, b.requirements):
        table.add_row(
            f"{check_a.name} (< {check_a.threshold_m:g} m)",
            f"{check_a.achieved_fraction:.0%} {'pass' if check_a.passed else 'fail'}",
            f"{check_b.achieved_fraction:.0%} {'pass' if check_b.passed else 'fail'}",
            "",
        )
    return table


def mpc_table(a: EmulationReport, b: Optional[EmulationReport] = None) -> Table:
    table = Table(title="First-arriving MPCs")
    table.add_column("category")
    table.add_column(_title(a, "A"), justify="right")
    if b is not None:
        table.add_column(_title(b, "B"), justify="right")
    total_a = sum(a.mpc_histogram.values()) or 1
    total_b = (sum(b.mpc_histogram.values()) or 1) if b is not None else 1
    for category in MpcCategory:
        n_a = a.mpc_histogram.get(category.value, 0)
        row = [category.value, f"{n_a} ({n_a / total_a:.0%})"]
        if b is not None:
            n_b = b.mpc_histogram.get(category.value, 0)
            row.append(f"{n_b} ({n_b / total_b:.0%})")
        table.add_row(*row)
    return table

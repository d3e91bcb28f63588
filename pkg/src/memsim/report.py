"""Deterministic CSV tables and SVG charts.

Tables carry a declared column schema; cells are rendered with '.' decimals,
shortest round-trip float formatting and '\\n' newlines so reruns are
byte-identical. Charts are rendered with matplotlib straight to SVG with a
pinned id salt and no date metadata, which makes the SVG output byte-stable
too; figures are self-contained (fonts embedded as paths).
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be pinned first)

_SVG_RC = {
    "svg.hashsalt": "memsim",
    "figure.figsize": (7.0, 4.5),
    "figure.dpi": 100,
}


@dataclass(frozen=True)
class Table:
    name: str
    columns: tuple[str, ...]
    rows: tuple[tuple, ...]

    def __post_init__(self):
        for row in self.rows:
            if len(row) != len(self.columns):
                raise ValueError(
                    f"table {self.name}: row width {len(row)} != "
                    f"{len(self.columns)} columns"
                )

    def column(self, name: str) -> list:
        idx = self.columns.index(name)
        return [row[idx] for row in self.rows]


def format_cell(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, int):
        return str(value)
    text = str(value)
    if any(ch in text for ch in ',"\n'):
        return '"' + text.replace('"', '""') + '"'
    return text


def table_to_csv(table: Table) -> str:
    lines = [",".join(table.columns)]
    for row in table.rows:
        lines.append(",".join(format_cell(v) for v in row))
    return "\n".join(lines) + "\n"


def write_csv(table: Table, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(table_to_csv(table), encoding="utf-8", newline="\n")
    return path


@dataclass(frozen=True)
class ChartSpec:
    """What to draw from a table: one series per distinct `series` value."""

    kind: str  # "line" | "bar"
    x: str
    y: str
    series: str | None = None
    title: str = ""


def _series_groups(table: Table, spec: ChartSpec) -> list[tuple[str, list, list]]:
    xs = table.column(spec.x)
    ys = table.column(spec.y)
    if spec.series is None:
        return [(spec.y, xs, ys)]
    tags = table.column(spec.series)
    groups = []
    for tag in dict.fromkeys(tags):  # first-seen order
        pts = [(x, y) for x, y, t in zip(xs, ys, tags) if t == tag]
        groups.append((str(tag), [p[0] for p in pts], [p[1] for p in pts]))
    return groups


def _render(fig) -> str:
    buf = io.BytesIO()
    with plt.rc_context(_SVG_RC):
        fig.savefig(buf, format="svg", metadata={"Date": None})
    plt.close(fig)
    return buf.getvalue().decode("utf-8")


def emit_svg(table: Table, spec: ChartSpec) -> str:
    """Render one chart from a table; returns the SVG document text."""
    if not table.rows:
        raise ValueError(f"table {table.name} is empty; nothing to chart")
    with plt.rc_context(_SVG_RC):
        fig, ax = plt.subplots()
        groups = _series_groups(table, spec)
        if spec.kind == "line":
            for label, xs, ys in groups:
                ax.plot(xs, ys, marker="o", label=label)
        elif spec.kind == "bar":
            width = 0.8 / len(groups)
            categories = list(dict.fromkeys(table.column(spec.x)))
            for k, (label, xs, ys) in enumerate(groups):
                offsets = [categories.index(x) + (k - (len(groups) - 1) / 2) * width
                           for x in xs]
                ax.bar(offsets, ys, width=width, label=label)
            ax.set_xticks(range(len(categories)))
            ax.set_xticklabels([str(c) for c in categories])
        else:
            raise ValueError(f"unknown chart kind: {spec.kind!r}")
        ax.set_xlabel(spec.x)
        ax.set_ylabel(spec.y)
        if spec.title:
            ax.set_title(spec.title)
        if spec.series is not None:
            ax.legend()
        fig.tight_layout()
    return _render(fig)


def emit_dual_panel_svg(
    table: Table,
    x: str,
    panels: Sequence[tuple[str, str]],  # (y column, axis label)
    series: str,
    title: str = "",
) -> str:
    """Two stacked panels sharing an x axis, one series per group."""
    if not table.rows:
        raise ValueError(f"table {table.name} is empty; nothing to chart")
    with plt.rc_context(_SVG_RC):
        fig, axes = plt.subplots(len(panels), 1, sharex=True,
                                 figsize=(7.0, 3.0 * len(panels)))
        for ax, (y, label) in zip(axes, panels):
            for tag, xs, ys in _series_groups(table, ChartSpec("line", x, y, series)):
                ax.plot(xs, ys, marker="o", label=tag)
            ax.set_ylabel(label)
        axes[0].legend()
        if title:
            axes[0].set_title(title)
        axes[-1].set_xlabel(x)
        fig.tight_layout()
    return _render(fig)


def write_svg(text: str, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(text, encoding="utf-8", newline="\n")
    return path

"""Render a mapping into files humans can read: figures, CSVs, listings.

Everything lands in one output directory: the kernel occupancy grid and
register-pressure heatmap as PNG figures, the per-node mobility windows
as a third figure, plus assignment.csv, pressure.csv, and a plain-text
graph listing.  Rendering is deterministic for a fixed mapping.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .arch import CgraArchitecture
from .dfg import DataFlowGraph, format_graph_listing
from .regalloc import PressureReport
from .schedule import MobilitySchedule
from .verify import Mapping


def _write_assignment_csv(g: DataFlowGraph, m: Mapping, path: Path):
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["node", "op", "pe", "slot", "label", "time"])
        for node in g.nodes:
            p = m.assignment[node.id]
            writer.writerow([node.id, node.op, p.pe, p.slot, p.label,
                             p.label * m.ii + p.slot])


def _write_pressure_csv(report: PressureReport, path: Path):
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["pe", "slot", "pressure", "capacity", "violation"])
        for pe, row in enumerate(report.per_slot_pressure):
            for slot, pressure in enumerate(row):
                writer.writerow([pe, slot, pressure, report.capacity,
                                 int(pressure > report.capacity)])


def _kernel_figure(g: DataFlowGraph, a: CgraArchitecture, m: Mapping, path: Path):
    """One panel per kernel slot; each panel is the PE grid with node ids."""
    fig, axes = plt.subplots(1, m.ii, figsize=(2.2 * m.ii * max(a.cols, 1) / 2, 2.2 * a.rows),
                             squeeze=False)
    cells: dict[tuple[int, int], list[tuple[int, int]]] = {}
    for node_id, p in m.assignment.items():
        cells.setdefault((p.pe, p.slot), []).append((node_id, p.label))
    for slot in range(m.ii):
        ax = axes[0][slot]
        ax.set_title(f"slot {slot}")
        ax.set_xlim(0, a.cols)
        ax.set_ylim(0, a.rows)
        ax.set_xticks(range(a.cols + 1))
        ax.set_yticks(range(a.rows + 1))
        ax.grid(True)
        ax.set_xticklabels([])
        ax.set_yticklabels([])
        ax.invert_yaxis()
        ax.set_aspect("equal")
        for pe in range(a.pe_count):
            row, col = a.coords(pe)
            entries = cells.get((pe, slot), [])
            text = "\n".join(f"n{n} (l{lab})" for n, lab in sorted(entries))
            ax.text(col + 0.5, row + 0.5, text or "", ha="center", va="center", fontsize=9)
    fig.suptitle(f"kernel occupancy, II={m.ii}")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def _mobility_figure(g: DataFlowGraph, ms: MobilitySchedule, ii: int, path: Path):
    """Per-node [ASAP, ALAP] bars with kernel-period fold lines."""
    fig, ax = plt.subplots(figsize=(8, 0.4 * max(len(g.nodes), 4) + 1.2))
    for node in g.nodes:
        lo, hi = ms.window(node.id)
        ax.barh(node.id, hi - lo + 1, left=lo, height=0.6, align="center")
    for t in range(0, ms.horizon + 1, ii):
        ax.axvline(t, linestyle="--", linewidth=0.8, color="gray")
    ax.set_xlabel("cycle")
    ax.set_ylabel("node")
    ax.set_yticks([n.id for n in g.nodes])
    ax.invert_yaxis()
    ax.set_title(f"mobility windows, horizon={ms.horizon}, fold every {ii}")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def _pressure_figure(report: PressureReport, path: Path):
    data = [list(row) for row in report.per_slot_pressure]
    fig, ax = plt.subplots(figsize=(1.2 * max(len(data[0]), 2) + 2, 0.5 * len(data) + 2))
    image = ax.imshow(data, aspect="auto", cmap="YlOrRd",
                      vmin=0, vmax=max(report.max_pressure, report.capacity, 1))
    for pe, row in enumerate(data):
        for slot, value in enumerate(row):
            ax.text(slot, pe, str(value), ha="center", va="center", fontsize=9)
    ax.set_xlabel("kernel slot")
    ax.set_ylabel("PE")
    ax.set_xticks(range(len(data[0])))
    ax.set_yticks(range(len(data)))
    ax.set_title(f"register pressure (capacity {report.capacity})")
    fig.colorbar(image, ax=ax, label="live values")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def write_report(g: DataFlowGraph, a: CgraArchitecture, m: Mapping,
                 report: PressureReport, ms: MobilitySchedule,
                 out_dir: str | Path) -> list[Path]:
    """Write all report artifacts into ``out_dir``; returns the paths."""
    directory = Path(out_dir)
    directory.mkdir(parents=True, exist_ok=True)
    paths = {
        "assignment": directory / "assignment.csv",
        "pressure_csv": directory / "pressure.csv",
        "graph": directory / "graph.txt",
        "kernel": directory / "kernel_grid.png",
        "mobility": directory / "mobility.png",
        "pressure_png": directory / "pressure.png",
    }
    _write_assignment_csv(g, m, paths["assignment"])
    _write_pressure_csv(report, paths["pressure_csv"])
    paths["graph"].write_text(format_graph_listing(g), encoding="utf-8")
    _kernel_figure(g, a, m, paths["kernel"])
    _mobility_figure(g, ms, m.ii, paths["mobility"])
    _pressure_figure(report, paths["pressure_png"])
    return [paths[k] for k in ("assignment", "pressure_csv", "graph",
                               "kernel", "mobility", "pressure_png")]

"""Delimited reports with matplotlib figures rendered alongside.

Report-producing commands leave two artifacts per run: a CSV of the rows
and a PNG drawn from the same rows, so results stay inspectable without
rerunning anything.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np
from scipy.integrate import quad

from . import blocks as _blocks
from .geometry import Cusp, Disk, DomainSpec, UnitBox, ball_volume
from .sim import GreenCells, GreenResult, SimConfig, estimate_green


def fmt17(x: float) -> str:
    """One float at 17 significant digits; round-trips bit-exactly."""
    return format(float(x), ".17g")


def write_rows(path: Path, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([fmt17(v) if isinstance(v, float) else v for v in row])


def axis_extent(spec: DomainSpec) -> tuple[float, float]:
    """Range of the first coordinate over the closed domain."""
    if isinstance(spec, Disk):
        return -spec.R, spec.R
    # box, cusp, and both channel trees start their approach axis at 0;
    # channels extend past 1 but the tree tail is negligible for binning
    if spec.family in ("channels2d", "channelsNd"):
        return 0.0, float(spec._a[-1])
    return 0.0, 1.0


def slab_volumes(spec: DomainSpec, edges: Sequence[float]) -> list[float]:
    """domain-intersect-slab volume per cell of an axis binning.

    Exact for the box, ball, and cusp; channel slabs fall back to the
    bounding cross-section when they span a junction.
    """
    edges = [float(e) for e in edges]
    out: list[float] = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        if isinstance(spec, UnitBox):
            out.append((min(hi, 1.0) - max(lo, 0.0)))
        elif isinstance(spec, Disk):
            R, d = spec.R, spec.d
            a, b = max(lo, -R), min(hi, R)
            if b <= a:
                raise ValueError(f"slab [{lo}, {hi}] misses the ball")
            sect = lambda x: ball_volume(d - 1, math.sqrt(max(R * R - x * x, 0.0)))
            val, _ = quad(sect, a, b, epsabs=0.0, epsrel=1e-10, limit=200)
            out.append(val)
        elif isinstance(spec, Cusp):
            out.append(_blocks.block_measures(spec, (lo, hi))[0][2])
        else:
            try:
                out.append(_blocks.block_measures(spec, (lo, hi))[0][2])
            except _blocks.DecompositionError:
                # junction-spanning channel slab: bound by the root section
                out.append(hi - lo)
    return out


def uniform_edges(spec: DomainSpec, n_cells: int, margin: float = 0.0) -> list[float]:
    lo, hi = axis_extent(spec)
    span = hi - lo
    lo += margin * span
    hi -= margin * span
    return list(np.linspace(lo, hi, n_cells + 1))


def green_report(
    spec: DomainSpec,
    x0: Sequence[float],
    edges: Sequence[float],
    cfg: SimConfig,
    out_dir: Path,
    stem: str = "green",
) -> tuple[GreenResult, dict]:
    """Occupation-density report: CSV + PNG under out_dir, summary dict back."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cells = GreenCells(tuple(edges), tuple(slab_volumes(spec, edges)))
    res = estimate_green(spec, x0, cells, cfg)

    rows = []
    for i in range(cells.n_cells):
        rows.append(
            (
                float(cells.edges[i]),
                float(cells.edges[i + 1]),
                float(cells.volumes[i]),
                float(res.occupation[i]),
                float(res.density[i]),
                int(res.visits[i]),
            )
        )
    csv_path = out_dir / f"{stem}.csv"
    write_rows(csv_path, ("cell_lo", "cell_hi", "volume", "occupation", "density", "visits"), rows)

    fig_path = out_dir / f"{stem}.png"
    mids = 0.5 * (np.asarray(cells.edges[:-1]) + np.asarray(cells.edges[1:]))
    dens = np.asarray(res.density)
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    pos = dens > 0
    ax.plot(mids[pos], dens[pos], "o-", ms=4)
    if np.any(~pos):
        ax.plot(mids[~pos], np.full(np.sum(~pos), np.nan), "x")
    if np.any(pos):
        ax.set_yscale("log")
    ax.set_xlabel("axis coordinate")
    ax.set_ylabel("occupation density")
    ax.set_title(f"occupation density from x0={list(map(float, x0))}")
    fig.tight_layout()
    fig.savefig(fig_path, dpi=120)
    plt.close(fig)

    summary = {
        "csv": str(csv_path),
        "figure": str(fig_path),
        "mean_exit": res.mean_exit.to_payload(),
        "occupation_total": res.occupation_total,
        "cells": cells.n_cells,
        "zero_visit_cells": int(sum(res.zero_visit)),
    }
    return res, summary


def sweep_figure(
    values: Sequence[float],
    verdicts: Sequence[str],
    last_partials: Sequence[float],
    path: Path,
    param: str,
) -> None:
    """Partial-sum trace over the sweep, points colored by verdict."""
    values = np.asarray(values, dtype=float)
    y = np.asarray(last_partials, dtype=float)
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    palette = {}
    for v in verdicts:
        if v not in palette:
            palette[v] = f"C{len(palette)}"
    ax.plot(values, y, color="0.7", lw=1.0, zorder=1)
    for verdict, color in palette.items():
        m = np.array([v == verdict for v in verdicts])
        ax.plot(values[m], y[m], "o", color=color, label=verdict, zorder=2)
    finite = y[np.isfinite(y)]
    if finite.size and np.all(finite > 0):
        ax.set_yscale("log")
    ax.set_xlabel(param)
    ax.set_ylabel("last partial sum")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)

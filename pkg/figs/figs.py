#!/usr/bin/env python3
"""Render publication-style figures from the sweep and band-scan CSV
tables.

Four figure ids are supported: ``dispersion`` (band diagrams from one or
more band CSVs), ``efficiency`` (optimal efficiency with propagation
cross-check markers, group velocity and overlap panels), ``damping`` (the
dimensionless damping parameter) and ``reflection`` (interface
reflectivity and net efficiency).  Every plotted number comes straight
out of a CSV cell; no physics is recomputed here.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

FIGURE_IDS = ("dispersion", "efficiency", "damping", "reflection")

REQUIRED_COLUMNS = {
    "dispersion": ("k_s_per_m", "re_k_per_m", "band_index", "in_gap"),
    "efficiency": ("edge_detuning_hz", "eta_opt", "eta_pde", "re_vg_over_c", "abs_alpha"),
    "damping": ("edge_detuning_hz", "mu"),
    "reflection": ("edge_detuning_hz", "R", "eta_net"),
}


class SchemaError(ValueError):
    """A required CSV column is missing."""

    def __init__(self, column: str, path):
        super().__init__(f"missing column {column!r} in {path}")
        self.column = column


class EmptyInputError(ValueError):
    """A CSV holds fewer than 2 data rows."""


@dataclass
class Table:
    """Columns of one CSV file, raw strings as read."""

    path: Path
    columns: dict

    def floats(self, name: str) -> np.ndarray:
        """Column as floats with NaN for empty cells."""
        raw = self.columns[name]
        return np.array([float(x) if x != "" else np.nan for x in raw])


@dataclass
class FigureSpec:
    figure: str
    inputs: list
    output: Path
    label: str = ""

    def __post_init__(self):
        if self.figure not in FIGURE_IDS:
            raise ValueError(f"unknown figure id {self.figure!r}; choose from {FIGURE_IDS}")
        self.inputs = [Path(p) for p in self.inputs]
        self.output = Path(self.output)
        if not self.inputs:
            raise ValueError("at least one input CSV is required")


def read_table(path, required) -> Table:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines:
        raise EmptyInputError(f"{path} is empty")
    header = lines[0].split(",")
    for column in required:
        if column not in header:
            raise SchemaError(column, path)
    rows = [line.split(",") for line in lines[1:] if line]
    if len(rows) < 2:
        raise EmptyInputError(f"{path} holds fewer than 2 data rows")
    columns = {name: [] for name in header}
    for row in rows:
        for name, cell in zip(header, row):
            columns[name].append(cell)
    return Table(path=Path(path), columns=columns)


def _finite_mask(*arrays):
    mask = np.ones(arrays[0].shape[0], dtype=bool)
    for arr in arrays:
        mask &= np.isfinite(arr)
    return mask


def _plot_dispersion(spec: FigureSpec, fig):
    ax = fig.subplots()
    for path in spec.inputs:
        table = read_table(path, REQUIRED_COLUMNS["dispersion"])
        ks = table.floats("k_s_per_m")
        re_k = table.floats("re_k_per_m")
        bands = table.floats("band_index")
        name = table.path.stem.replace("bands_", "")
        for band in sorted(set(bands[np.isfinite(bands)])):
            mask = (bands == band) & _finite_mask(ks, re_k)
            ax.plot(re_k[mask], ks[mask], lw=1.2, label=f"{name} band {int(band)}")
    ax.set_xlabel("Re k (1/m)")
    ax.set_ylabel("signal wavenumber (1/m)")
    ax.legend(fontsize="small")
    ax.set_title(spec.label or "dispersion near the zone edge")


def _plot_efficiency(spec: FigureSpec, fig):
    axes = fig.subplots(3, 1, sharex=True)
    table = read_table(spec.inputs[0], REQUIRED_COLUMNS["efficiency"])
    x = table.floats("edge_detuning_hz")
    eta = table.floats("eta_opt")
    eta_pde = table.floats("eta_pde")
    vg = table.floats("re_vg_over_c")
    alpha = table.floats("abs_alpha")

    mask = _finite_mask(x, eta)
    axes[0].plot(x[mask], eta[mask], "-", color="tab:blue", label="optimal efficiency")
    pde_mask = _finite_mask(x, eta_pde)
    axes[0].plot(
        x[pde_mask], eta_pde[pde_mask], "x", color="black", label="direct propagation"
    )
    axes[0].set_ylabel("efficiency")
    axes[0].legend(fontsize="small")

    mask = _finite_mask(x, vg)
    axes[1].plot(x[mask], vg[mask], "-", color="tab:orange")
    axes[1].axhline(1.0, color="gray", lw=0.6, ls=":")
    axes[1].set_ylabel("Re v_g / c")

    mask = _finite_mask(x, alpha)
    axes[2].plot(x[mask], alpha[mask], "-", color="tab:green")
    axes[2].axhline(1.0, color="gray", lw=0.6, ls=":")
    axes[2].set_ylabel("|overlap|")
    axes[2].set_xlabel("band-edge detuning (Hz)")
    for ax in axes:
        ax.set_xscale("log")
        ax.invert_xaxis()
    axes[0].set_title(spec.label or "storage efficiency near the band edge")


def _plot_damping(spec: FigureSpec, fig):
    ax = fig.subplots()
    table = read_table(spec.inputs[0], REQUIRED_COLUMNS["damping"])
    x = table.floats("edge_detuning_hz")
    mu = table.floats("mu")
    mask = _finite_mask(x, mu)
    ax.plot(x[mask], mu[mask], "-", color="tab:red")
    ax.axhline(0.0, color="gray", lw=0.6, ls=":")
    ax.set_xscale("log")
    ax.invert_xaxis()
    ax.set_xlabel("band-edge detuning (Hz)")
    ax.set_ylabel("damping parameter")
    ax.set_title(spec.label or "carrier damping near the band edge")


def _plot_reflection(spec: FigureSpec, fig):
    axes = fig.subplots(2, 1, sharex=True)
    table = read_table(spec.inputs[0], REQUIRED_COLUMNS["reflection"])
    x = table.floats("edge_detuning_hz")
    refl = table.floats("R")
    eta_net = table.floats("eta_net")
    mask = _finite_mask(x, refl)
    axes[0].plot(x[mask], refl[mask], "-", color="tab:purple")
    axes[0].set_ylabel("reflectivity")
    mask = _finite_mask(x, eta_net)
    axes[1].plot(x[mask], eta_net[mask], "-", color="tab:blue")
    axes[1].set_ylabel("(1 - R) x efficiency")
    axes[1].set_xlabel("band-edge detuning (Hz)")
    for ax in axes:
        ax.set_xscale("log")
        ax.invert_xaxis()
    axes[0].set_title(spec.label or "interface reflection near the band edge")


_RENDERERS = {
    "dispersion": _plot_dispersion,
    "efficiency": _plot_efficiency,
    "damping": _plot_damping,
    "reflection": _plot_reflection,
}


def render(spec: FigureSpec):
    """Render one figure and write it to spec.output; returns the figure
    object so callers can inspect the plotted series."""
    fig = plt.figure(figsize=(6.0, 7.0) if spec.figure == "efficiency" else (6.0, 4.5))
    try:
        _RENDERERS[spec.figure](spec, fig)
        fig.tight_layout()
        spec.output.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(spec.output, dpi=160)
    except Exception:
        plt.close(fig)
        raise
    return fig


def plotted_series(fig):
    """All data line series of a figure as (xdata, ydata) arrays, in draw
    order; used by the regeneration checks.  Reference lines drawn in
    blended axes coordinates (horizontal guides) are not data."""
    series = []
    for ax in fig.axes:
        for line in ax.get_lines():
            if line.get_transform() is not ax.transData:
                continue
            series.append((np.asarray(line.get_xdata()), np.asarray(line.get_ydata())))
    return series


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="figs.py", description="render figures from sweep/band CSV tables"
    )
    parser.add_argument("--fig", required=True, choices=FIGURE_IDS)
    parser.add_argument("--in", dest="inputs", required=True, nargs="+", help="input CSV file(s)")
    parser.add_argument("--out", required=True, type=Path, help="output image path")
    parser.add_argument("--label", default="", help="title label")
    args = parser.parse_args(argv)
    try:
        spec = FigureSpec(figure=args.fig, inputs=args.inputs, output=args.out, label=args.label)
        fig = render(spec)
        plt.close(fig)
    except (SchemaError, EmptyInputError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(args.out)
    return 0


if __name__ == "__main__":
    sys.exit(main())

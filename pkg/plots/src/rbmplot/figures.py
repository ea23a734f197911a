"""The four figure kinds regenerated from result CSVs.

Rendering is a pure function of CSV content plus the spec: no clock, no
randomness. Saved files carry no timestamps so identical inputs give
identical bytes.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .csvio import SchemaError, read_result_csv

FIGURE_KINDS = ("density", "strong-error", "pressure", "scaling")

STRONG_OVERLAY_LABEL = r"$0.2\,\tau^{1/2}$"


@dataclass
class FigureSpec:
    kind: str
    inputs: Sequence[str]
    output: str
    bins: int = 60
    overlay: bool = True
    reference_csv: Optional[str] = None
    title: Optional[str] = None

    def __post_init__(self):
        if self.kind not in FIGURE_KINDS:
            raise ValueError(
                f"unknown figure kind {self.kind!r}; expected one of {FIGURE_KINDS}"
            )
        if not self.inputs:
            raise ValueError("at least one input CSV is required")
        for p in self.inputs:
            if not Path(p).exists():
                raise FileNotFoundError(p)
        if self.reference_csv is not None and not Path(self.reference_csv).exists():
            raise FileNotFoundError(self.reference_csv)


def _load_all(spec: FigureSpec) -> list[dict]:
    rows: list[dict] = []
    for path in spec.inputs:
        rows.extend(read_result_csv(path))
    return rows


def _grouped_means(rows: list[dict], observable: str):
    """x -> mean(value) over rows with the given observable, sorted by x."""
    wanted = [r for r in rows if r["observable"] == observable]
    if not wanted:
        raise SchemaError(f"no rows with observable={observable!r}")
    xs = sorted({r["x"] for r in wanted})
    means = np.array(
        [np.mean([r["value"] for r in wanted if r["x"] == x]) for x in xs]
    )
    return np.array(xs), means


def loglog_slope(x: np.ndarray, y: np.ndarray) -> float:
    """Least-squares slope in log10-log10 space."""
    return float(np.polyfit(np.log10(x), np.log10(y), 1)[0])


def _new_axes(spec: FigureSpec):
    fig, ax = plt.subplots(figsize=(6.0, 4.5), dpi=120)
    if spec.title:
        ax.set_title(spec.title)
    return fig, ax


def _density_figure(spec: FigureSpec, rows):
    positions = [r for r in rows if r["observable"] == "position"]
    if not positions:
        raise SchemaError("no rows with observable='position'")
    series_names = sorted({r["series"] for r in positions})
    values = {
        name: np.array([r["value"] for r in positions if r["series"] == name])
        for name in series_names
    }
    lo = min(v.min() for v in values.values())
    hi = max(v.max() for v in values.values())
    edges = np.linspace(lo, hi, spec.bins + 1)
    centers = 0.5 * (edges[:-1] + edges[1:])
    fig, ax = _new_axes(spec)
    meta = {"series": series_names}
    for name in series_names:
        dens, _ = np.histogram(values[name], bins=edges, density=True)
        if name == "reference":
            ax.plot(centers, dens, "b-", label="reference (full simulation)")
        else:
            ax.plot(centers, dens, "r--", label=name)
    ax.set_xlabel("x")
    ax.set_ylabel("equilibrium density")
    ax.legend()
    return fig, meta


def _strong_error_figure(spec: FigureSpec, rows):
    taus, means = _grouped_means(rows, "strong_err")
    slope = loglog_slope(taus, means)
    fig, ax = _new_axes(spec)
    ax.loglog(taus, means, "o-", label="random batch")
    meta = {"slope": slope, "overlay": False}
    if spec.overlay:
        ax.loglog(taus, 0.2 * np.sqrt(taus), "k-", label=STRONG_OVERLAY_LABEL)
        meta["overlay"] = True
    ax.annotate(
        f"fitted slope = {slope:.6f}",
        xy=(0.05, 0.92),
        xycoords="axes fraction",
    )
    ax.set_xlabel(r"step size $\tau$")
    ax.set_ylabel("relative strong error")
    ax.legend()
    meta["taus"] = taus.tolist()
    meta["means"] = means.tolist()
    return fig, meta


_PRESSURE_STYLE = {
    "andersen": dict(marker="o", color="tab:blue", linestyle="none"),
    "langevin": dict(marker="s", color="tab:red", linestyle="none"),
}


def _pressure_figure(spec: FigureSpec, rows):
    mean_rows = [r for r in rows if r["observable"] == "pressure_mean"]
    if not mean_rows:
        raise SchemaError("no rows with observable='pressure_mean'")
    se_rows = {(
        r["series"], r["x"]): r["value"] for r in rows if r["observable"] == "pressure_se"
    }
    fig, ax = _new_axes(spec)
    meta = {"series": []}
    for name in sorted({r["series"] for r in mean_rows}):
        mine = sorted((r["x"], r["value"]) for r in mean_rows if r["series"] == name)
        xs = np.array([m[0] for m in mine])
        ys = np.array([m[1] for m in mine])
        errs = np.array([se_rows.get((name, x), 0.0) for x in xs])
        style = next(
            (s for key, s in _PRESSURE_STYLE.items() if name.startswith(key)),
            dict(marker="d", linestyle="none"),
        )
        ax.errorbar(xs, ys, yerr=errs, label=name, **style)
        meta["series"].append(name)
    if spec.reference_csv is not None:
        ref = np.loadtxt(spec.reference_csv, delimiter=",", comments="#")
        ref = np.atleast_2d(ref)
        ax.plot(ref[:, 0], ref[:, 1], "k-", label="reference curve")
        meta["reference"] = True
    ax.set_xlabel(r"density $\rho$")
    ax.set_ylabel("pressure")
    ax.legend()
    return fig, meta


def _scaling_figure(spec: FigureSpec, rows):
    time_rows = [r for r in rows if r["observable"] == "step_time"]
    if not time_rows:
        raise SchemaError("no rows with observable='step_time'")
    fig, ax = _new_axes(spec)
    meta = {"slopes": {}}
    for name in sorted({r["series"] for r in time_rows}):
        mine = sorted((r["x"], r["value"]) for r in time_rows if r["series"] == name)
        xs = np.array([m[0] for m in mine])
        ys = np.array([m[1] for m in mine])
        slope = loglog_slope(xs, ys)
        meta["slopes"][name] = slope
        ax.loglog(xs, ys, "o-", label=f"{name} (slope {slope:.2f})")
    ax.set_xlabel("number of particles N")
    ax.set_ylabel("wall time per step [s]")
    ax.legend()
    return fig, meta


_BUILDERS = {
    "density": _density_figure,
    "strong-error": _strong_error_figure,
    "pressure": _pressure_figure,
    "scaling": _scaling_figure,
}


def build_figure(spec: FigureSpec):
    """Build the matplotlib figure and its metadata without saving."""
    rows = _load_all(spec)
    return _BUILDERS[spec.kind](spec, rows)


def render(spec: FigureSpec) -> dict:
    """Render the figure to spec.output; returns the figure metadata."""
    fig, meta = build_figure(spec)
    out = Path(spec.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    # strip the date so identical inputs produce identical bytes
    fig.savefig(out, metadata={"Date": None})
    plt.close(fig)
    meta["output"] = str(out)
    return meta

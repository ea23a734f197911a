"""Measurement functionals: virial pressure, temperature, error metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from .core import BoxGeometry, ParticleState, minimal_image
from .neighbor import build_cell_list, pairs_within

_SCAN_BLOCK = 512


@dataclass(frozen=True)
class ObservableReport:
    """A measured value with its plain standard error."""

    name: str
    value: Union[float, np.ndarray]
    sample_count: int
    standard_error: float = 0.0

    def __post_init__(self):
        if self.sample_count < 1:
            raise ValueError("sample_count must be >= 1")
        if self.standard_error < 0:
            raise ValueError("standard_error must be nonnegative")


def mean_report(name: str, samples: np.ndarray) -> ObservableReport:
    samples = np.asarray(samples, dtype=np.float64)
    n = samples.size
    se = float(samples.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return ObservableReport(name, float(samples.mean()), n, se)


def instantaneous_temperature(state: ParticleState) -> float:
    """(1/(dim n)) sum_i |v_i|^2."""
    return float(np.sum(np.square(state.velocities)) / (state.dim * state.n))


def pressure_tail(rho: float, r_cut: float) -> float:
    """Mean-field correction for LJ interactions truncated at r_cut."""
    return (16.0 / 3.0) * math.pi * rho**2 * (
        (2.0 / 3.0) * r_cut**-9.0 - r_cut**-3.0
    )


def _virial_sum_scan(positions: np.ndarray, box: BoxGeometry) -> float:
    """sum over i<j with r < r_c of (2 r^-12 - r^-6), blocked O(N^2)."""
    n = positions.shape[0]
    rc2 = box.cutoff**2
    total = 0.0
    for start in range(0, n, _SCAN_BLOCK):
        stop = min(start + _SCAN_BLOCK, n)
        disp = positions[start:stop, None, :] - positions[None, :, :]
        disp = minimal_image(disp, box)
        r2 = np.sum(np.square(disp), axis=-1)
        # strict upper triangle of the (start..stop) x (all) slab
        cols = np.arange(n)[None, :]
        rows = np.arange(start, stop)[:, None]
        mask = (cols > rows) & (r2 < rc2)
        r2s = r2[mask]
        inv6 = r2s**-3.0
        total += float(np.sum(2.0 * inv6 * inv6 - inv6))
    return total


def _virial_sum_cells(positions: np.ndarray, box: BoxGeometry) -> float:
    cl = build_cell_list(positions, box, box.cutoff)
    _, _, disp = pairs_within(cl, box.cutoff)
    if disp.shape[0] == 0:
        return 0.0
    r2 = np.einsum("ij,ij->i", disp, disp)
    inv6 = r2**-3.0
    return float(np.sum(2.0 * inv6 * inv6 - inv6))


def pressure(
    state: ParticleState,
    box: BoxGeometry,
    temperature: float,
    *,
    include_virial: bool = True,
    include_tail: bool = True,
    method: str = "auto",
) -> float:
    """Virial pressure of a periodic 3D LJ system.

    P = rho T + (8/V) sum_{i<j, r < r_c} (2 r^-12 - r^-6) + tail(rho, r_c).
    The ideal-gas variant (no kernel) drops both interaction terms and is
    exactly rho T.
    """
    if state.dim != 3 or not box.periodic:
        raise ValueError("the virial pressure is defined for periodic 3D systems")
    volume = box.volume
    rho = state.n / volume
    total = rho * temperature
    if include_virial:
        if method == "auto":
            method = "cells" if box.side_length / box.cutoff >= 3.0 else "scan"
        if method == "scan":
            pair_sum = _virial_sum_scan(state.positions, box)
        elif method == "cells":
            pair_sum = _virial_sum_cells(state.positions, box)
        else:
            raise ValueError(f"unknown pressure method {method!r}")
        total += 8.0 / volume * pair_sum
    if include_tail:
        total += pressure_tail(rho, box.cutoff)
    return total


def weak_error(
    samples: np.ndarray,
    reference_samples: np.ndarray,
    f: Callable[[np.ndarray], np.ndarray],
) -> float:
    """|mean f(samples) - mean f(reference)| / |mean f(reference)|."""
    samples = np.asarray(samples, dtype=np.float64)
    reference_samples = np.asarray(reference_samples, dtype=np.float64)
    if samples.size == 0 or reference_samples.size == 0:
        raise ValueError("weak_error needs nonempty sample sets")
    ref_mean = float(np.mean(f(reference_samples)))
    if abs(ref_mean) < 1e-12:
        raise ValueError("reference mean is zero; relative error undefined")
    return abs(float(np.mean(f(samples))) - ref_mean) / abs(ref_mean)


def strong_error(state_rbm: ParticleState, state_ref: ParticleState) -> float:
    """Relative RMS position deviation sqrt(mean|X - Xhat|^2 / mean|Xhat|^2)."""
    if state_rbm.positions.shape != state_ref.positions.shape:
        raise ValueError("states must have matching shapes")
    ref_ms = float(np.mean(np.sum(np.square(state_ref.positions), axis=1)))
    if ref_ms == 0.0:
        raise ValueError("reference positions have zero norm")
    diff_ms = float(
        np.mean(np.sum(np.square(state_rbm.positions - state_ref.positions), axis=1))
    )
    return math.sqrt(diff_ms / ref_ms)


def histogram(samples: np.ndarray, bin_edges: np.ndarray) -> np.ndarray:
    """Bin densities normalized so the histogram integrates to 1."""
    samples = np.asarray(samples, dtype=np.float64).ravel()
    bin_edges = np.asarray(bin_edges, dtype=np.float64)
    if samples.size == 0:
        raise ValueError("histogram needs at least one sample")
    if np.any(np.diff(bin_edges) <= 0):
        raise ValueError("bin edges must be strictly increasing")
    densities, _ = np.histogram(samples, bins=bin_edges, density=True)
    return densities


def histogram_l1_distance(
    samples_a: np.ndarray, samples_b: np.ndarray, bin_edges: np.ndarray
) -> float:
    """integral |p_a - p_b| over the binned range."""
    da = histogram(samples_a, bin_edges)
    db = histogram(samples_b, bin_edges)
    widths = np.diff(np.asarray(bin_edges, dtype=np.float64))
    return float(np.sum(np.abs(da - db) * widths))

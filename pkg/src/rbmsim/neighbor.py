"""Cell-list spatial binning for O(N) short-range pair enumeration.

The list is rebuilt from scratch every step (rebuild is O(N) and
branch-free); the built structure is immutable. Pair output is sorted by
(i, j) so force sums accumulate in a reproducible order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import BoxGeometry, minimal_image

_OFFSETS = np.array(
    [(dx, dy, dz) for dx in (-1, 0, 1) for dy in (-1, 0, 1) for dz in (-1, 0, 1)],
    dtype=np.int64,
)

# flat ids of the 27-neighborhood for every cell, cached per grid size
_NEIGHBOR_TABLES: dict = {}


def _neighbor_table(m: int) -> np.ndarray:
    table = _NEIGHBOR_TABLES.get(m)
    if table is None:
        cells = np.arange(m**3, dtype=np.int64)
        coords = np.stack([cells // (m * m), (cells // m) % m, cells % m], axis=1)
        nb = (coords[:, None, :] + _OFFSETS[None, :, :]) % m
        table = (nb[..., 0] * m + nb[..., 1]) * m + nb[..., 2]
        _NEIGHBOR_TABLES[m] = table
    return table


@dataclass(frozen=True)
class CellList:
    """Spatial binning of wrapped positions into a cubic grid of cells."""

    box: BoxGeometry
    radius: float
    cells_per_side: int
    cell_size: float
    positions: np.ndarray  # (n, 3), wrapped into [0, L)
    flat_cells: np.ndarray  # (n,) flat cell id per particle
    occupancy: np.ndarray  # (cells, max_occupancy), -1 padded

    @property
    def n(self) -> int:
        return self.positions.shape[0]


def build_cell_list(
    positions: np.ndarray, box: BoxGeometry, radius: float
) -> CellList:
    """Bin particles into cells of side L/m >= radius, m = floor(L/radius).

    Positions must be wrapped into [0, L); the radius may not exceed L/2
    (the periodic neighborhood would self-overlap).
    """
    if not box.periodic:
        raise ValueError("cell lists require a periodic box")
    length = box.side_length
    if radius <= 0:
        raise ValueError("radius must be positive")
    if radius > length / 2 + 1e-12:
        raise ValueError(f"radius {radius} exceeds L/2 = {length / 2}")
    positions = np.asarray(positions, dtype=np.float64)
    if positions.ndim != 2 or positions.shape[1] != 3:
        raise ValueError("cell lists are 3D only")

    m = max(1, int(length / radius))
    while m > 1 and length / m < radius - 1e-12:
        m -= 1
    cell_size = length / m

    coords = np.floor(positions / cell_size).astype(np.int64)
    np.clip(coords, 0, m - 1, out=coords)
    flat = (coords[:, 0] * m + coords[:, 1]) * m + coords[:, 2]

    n = positions.shape[0]
    order = np.argsort(flat, kind="stable")
    counts = np.bincount(flat, minlength=m**3)
    occupancy = np.full((m**3, int(counts.max())), -1, dtype=np.int64)
    starts = np.concatenate(([0], np.cumsum(counts)))
    ranks = np.arange(n) - starts[flat[order]]
    occupancy[flat[order], ranks] = order

    return CellList(
        box=box,
        radius=radius,
        cells_per_side=m,
        cell_size=cell_size,
        positions=positions,
        flat_cells=flat,
        occupancy=occupancy,
    )


def pairs_within(cell_list: CellList, radius: float):
    """All pairs (i < j) with minimal-image distance below radius.

    Returns (i, j, disp) arrays sorted by (i, j), where disp is the
    minimal-image displacement positions[i] - positions[j]. The query
    radius may not exceed the build radius.
    """
    if radius > cell_list.radius + 1e-12:
        raise ValueError("query radius exceeds the cell list build radius")
    n = cell_list.n
    m = cell_list.cells_per_side
    empty = (np.empty(0, np.int64), np.empty(0, np.int64), np.empty((0, 3)))
    if n < 2:
        return empty

    # candidates from the 27-cell periodic neighborhood of every particle
    neighbor_cells = _neighbor_table(m)[cell_list.flat_cells]  # (n, 27)
    cand = cell_list.occupancy[neighbor_cells]  # (n, 27, max_occ)
    ii = np.broadcast_to(np.arange(n)[:, None, None], cand.shape)
    keep = (cand >= 0) & (ii < cand)
    i = ii[keep]
    j = cand[keep]
    if m < 3:
        # wrapped neighbor cells coincide: the same pair shows up repeatedly
        i, j = np.divmod(np.unique(i * n + j), n)
    if i.size == 0:
        return empty

    disp = minimal_image(
        cell_list.positions[i] - cell_list.positions[j], cell_list.box
    )
    within = np.einsum("ij,ij->i", disp, disp) < radius * radius
    i, j, disp = i[within], j[within], disp[within]
    order = np.argsort(i * n + j, kind="stable")
    return i[order], j[order], disp[order]

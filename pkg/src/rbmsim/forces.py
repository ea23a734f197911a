"""Per-particle force assembly: full O(N^2), pure random-batch, and split.

The batch estimator reweights in-batch interactions by
alpha_N (N-1)/(p-1); the split strategy sums the short-range part exactly
over neighbor pairs and applies the batch estimator to the bounded
long-range part only. Accumulation order is deterministic everywhere so
repeated runs are bit-identical.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .batching import Partition
from .core import BoxGeometry, ParticleState, SingularPairError, minimal_image
from .kernels import MIN_DISTANCE_GUARD, KernelSpec, SplitKernel
from .neighbor import build_cell_list, pairs_within, CellList

FULL = "full"
BATCH = "batch"
SPLIT = "split"

_BLOCK_ROWS = 256  # row blocking keeps the O(N^2) scan within ~tens of MB


@dataclass(frozen=True)
class ForceField:
    """Interaction strategy plus everything needed to evaluate it."""

    strategy: str
    alpha_n: float = 1.0
    kernel: Optional[KernelSpec] = None
    split: Optional[SplitKernel] = None
    external: Optional[Callable[[np.ndarray], np.ndarray]] = None
    box: Optional[BoxGeometry] = None
    use_cutoff: bool = False

    def __post_init__(self):
        if self.strategy not in (FULL, BATCH, SPLIT):
            raise ValueError(f"unknown force strategy {self.strategy!r}")
        if self.strategy == SPLIT:
            if self.split is None:
                raise ValueError("split strategy requires a SplitKernel")
            if self.box is None:
                raise ValueError("split strategy requires a periodic box")
        elif self.kernel is None and self.external is None:
            raise ValueError("field has neither a kernel nor an external force")
        if self.strategy == BATCH and self.kernel is not None:
            if not self.kernel.bounded:
                raise ValueError(
                    "batch-only forces require a bounded kernel; singular "
                    "kernels must use the split strategy"
                )
        if self.use_cutoff and self.box is None:
            raise ValueError("cutoff policy requires a box geometry")


def _check_singular(
    r2: np.ndarray, i_idx: np.ndarray, j_idx: np.ndarray
) -> None:
    k = int(np.argmin(r2)) if r2.size else -1
    if k >= 0 and r2[k] < MIN_DISTANCE_GUARD**2:
        raise SingularPairError(int(i_idx[k]), int(j_idx[k]), float(np.sqrt(r2[k])))


def _pair_force_rows(
    positions: np.ndarray,
    rows: np.ndarray,
    field: ForceField,
    kernel: KernelSpec,
) -> np.ndarray:
    """Sum_j K(x_i - x_j) for each i in rows (minimal image, cutoff)."""
    n = positions.shape[0]
    disp = positions[rows][:, None, :] - positions[None, :, :]
    disp = minimal_image(disp, field.box)
    r2 = np.sum(np.square(disp), axis=-1)
    mask = np.ones_like(r2, dtype=bool)
    mask[np.arange(rows.size), rows] = False
    if field.use_cutoff:
        mask &= r2 < field.box.cutoff**2
    sel_i, sel_j = np.nonzero(mask)
    if kernel.singular_at_zero:
        _check_singular(r2[sel_i, sel_j], rows[sel_i], sel_j)
    out = np.zeros((rows.size, positions.shape[1]))
    np.add.at(out, sel_i, kernel.force(disp[sel_i, sel_j]))
    return out


def force_full(state: ParticleState, field: ForceField) -> np.ndarray:
    """F_i = b(X_i) + alpha_N sum_{j != i} K(X_i - X_j)."""
    forces = np.zeros_like(state.positions)
    if field.kernel is not None:
        for start in range(0, state.n, _BLOCK_ROWS):
            rows = np.arange(start, min(start + _BLOCK_ROWS, state.n))
            forces[rows] = _pair_force_rows(
                state.positions, rows, field, field.kernel
            )
        forces *= field.alpha_n
    if field.external is not None:
        forces += field.external(state.positions)
    return forces


def _batch_pair_sum(
    positions: np.ndarray,
    part: Partition,
    field: ForceField,
    kernel: KernelSpec,
) -> np.ndarray:
    """In-batch sum_{j in C_i, j != i} K(x_i - x_j) for every particle."""
    members = positions[part.batches]  # (n_batches, p, dim)
    disp = members[:, :, None, :] - members[:, None, :, :]
    disp = minimal_image(disp, field.box)
    r2 = np.sum(np.square(disp), axis=-1)
    p = part.p
    mask = ~np.eye(p, dtype=bool)[None, :, :] & np.ones_like(r2, dtype=bool)
    if field.use_cutoff:
        mask &= r2 < field.box.cutoff**2
    bi, pi, pj = np.nonzero(mask)
    if kernel.singular_at_zero:
        _check_singular(
            r2[bi, pi, pj], part.batches[bi, pi], part.batches[bi, pj]
        )
    contrib = np.zeros_like(members)
    np.add.at(contrib, (bi, pi), kernel.force(disp[bi, pi, pj]))
    out = np.zeros_like(positions)
    out[part.batches.ravel()] = contrib.reshape(-1, positions.shape[1])
    return out


def force_batched(
    state: ParticleState, field: ForceField, part: Partition
) -> np.ndarray:
    """F_i = b(X_i) + [alpha_N (N-1)/(p-1)] sum over i's batch."""
    if part.n != state.n:
        raise ValueError("partition does not match the particle count")
    forces = np.zeros_like(state.positions)
    if field.kernel is not None:
        weight = field.alpha_n * (state.n - 1) / (part.p - 1)
        forces = weight * _batch_pair_sum(state.positions, part, field, field.kernel)
    if field.external is not None:
        forces += field.external(state.positions)
    return forces


def force_split(
    state: ParticleState,
    field: ForceField,
    part: Partition,
    cell_list: Optional[CellList] = None,
) -> np.ndarray:
    """Exact short-range sum via neighbor pairs + batched long-range sum."""
    split = field.split
    if cell_list is None:
        cell_list = build_cell_list(state.positions, field.box, split.r0)
    forces = np.zeros_like(state.positions)

    i, j, disp = pairs_within(cell_list, split.r0)
    if i.size:
        r2 = np.einsum("ij,ij->i", disp, disp)
        _check_singular(r2, i, j)
        f1 = split.k1.force(disp)
        np.add.at(forces, i, f1)
        np.add.at(forces, j, -f1)
        forces *= field.alpha_n

    weight = field.alpha_n * (state.n - 1) / (part.p - 1)
    forces += weight * _batch_pair_sum(state.positions, part, field, split.k2)
    if field.external is not None:
        forces += field.external(state.positions)
    return forces


def evaluate_force(
    state: ParticleState, field: ForceField, part: Optional[Partition] = None
) -> np.ndarray:
    """Dispatch on the field's strategy; part is ignored for full forces."""
    if field.strategy == FULL:
        return force_full(state, field)
    if field.strategy == BATCH:
        return force_batched(state, field, part)
    return force_split(state, field, part)

"""Interaction kernels: bounded benchmark kernel, Lennard-Jones, splitting.

Force convention: a kernel maps a displacement x_i - x_j (shape (..., dim))
to the force it contributes on particle i. Potentials map the same
displacement to a scalar energy, with force = -grad(potential).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .core import SimulationError

# Below this pair distance a singular kernel refuses to evaluate: reaching
# it means the integration has already failed and Inf would only hide that.
MIN_DISTANCE_GUARD = 1e-10

R0_LJ_SPLIT = 2.0 ** (1.0 / 6.0)  # LJ minimum, the splitting radius


@dataclass(frozen=True)
class KernelSpec:
    """An interaction force, optionally with its potential and bounds."""

    force: Callable[[np.ndarray], np.ndarray]
    potential: Optional[Callable[[np.ndarray], np.ndarray]] = None
    lipschitz_bound: Optional[float] = None
    sup_bound: Optional[float] = None
    singular_at_zero: bool = False
    support_radius: Optional[float] = None  # None = unbounded support

    @property
    def bounded(self) -> bool:
        return self.sup_bound is not None


@dataclass(frozen=True)
class SplitKernel:
    """K = K1 + K2 with K1 short-range (zero beyond r0) and K2 bounded."""

    k1: KernelSpec
    k2: KernelSpec
    full: KernelSpec
    r0: float


def _radii(x: np.ndarray) -> np.ndarray:
    return np.sqrt(np.sum(np.square(x), axis=-1))


def _guard_radii(r: np.ndarray) -> None:
    rmin = np.min(r) if r.size else np.inf
    if rmin < MIN_DISTANCE_GUARD:
        raise SimulationError(
            f"kernel evaluated at pair distance {rmin:.3e} below the "
            f"singularity guard {MIN_DISTANCE_GUARD:.0e}"
        )


def _lj_magnitude(r: np.ndarray) -> np.ndarray:
    """|force|/r for the LJ kernel: 48 r^-14 - 24 r^-8."""
    r2 = np.square(r)
    inv8 = r2**-4.0
    inv14 = inv8 * r2**-3.0
    return 48.0 * inv14 - 24.0 * inv8


def bounded_force(x: np.ndarray) -> np.ndarray:
    """K(x) = x / (1 + |x|^2); |K| <= 1/2 and Lipschitz constant 1."""
    x = np.asarray(x, dtype=np.float64)
    r2 = np.sum(np.square(x), axis=-1, keepdims=True)
    return x / (1.0 + r2)


def bounded_potential(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return -0.5 * np.log1p(np.sum(np.square(x), axis=-1))


def bounded_kernel() -> KernelSpec:
    return KernelSpec(
        force=bounded_force,
        potential=bounded_potential,
        lipschitz_bound=1.0,
        sup_bound=0.5,
    )


def lj_potential(r) -> np.ndarray:
    """4 (r^-12 - r^-6) at scalar distance r > 0."""
    r = np.asarray(r, dtype=np.float64)
    if np.any(r <= 0):
        raise ValueError("Lennard-Jones potential requires r > 0")
    inv6 = r**-6.0
    return 4.0 * (inv6 * inv6 - inv6)


def lj_force(x: np.ndarray) -> np.ndarray:
    """-grad of the LJ potential: (48 r^-14 - 24 r^-8) x."""
    x = np.asarray(x, dtype=np.float64)
    r = _radii(x)
    _guard_radii(r)
    return _lj_magnitude(r)[..., None] * x


def lj_kernel() -> KernelSpec:
    return KernelSpec(
        force=lj_force,
        potential=lambda x: lj_potential(_radii(np.asarray(x, dtype=np.float64))),
        singular_at_zero=True,
    )


def _phi1(x: np.ndarray) -> np.ndarray:
    r = _radii(np.asarray(x, dtype=np.float64))
    short = r < R0_LJ_SPLIT
    return np.where(short, lj_potential(np.where(short, r, 1.0)) + 1.0, 0.0)


def _phi2(x: np.ndarray) -> np.ndarray:
    r = _radii(np.asarray(x, dtype=np.float64))
    short = r < R0_LJ_SPLIT
    return np.where(short, -1.0, lj_potential(np.maximum(r, R0_LJ_SPLIT)))


def _k1_force(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    r = _radii(x)
    short = r < R0_LJ_SPLIT
    _guard_radii(r[short])
    magnitude = np.where(short, _lj_magnitude(np.where(short, r, 1.0)), 0.0)
    return magnitude[..., None] * x


def _k2_force(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    r = _radii(x)
    magnitude = np.where(
        r < R0_LJ_SPLIT, 0.0, _lj_magnitude(np.maximum(r, R0_LJ_SPLIT))
    )
    return magnitude[..., None] * x


def _lj_split_sup_bound() -> float:
    # |K2| peaks where d/dr (24 r^-7 - 48 r^-13) = 0, i.e. r = (26/7)^(1/6)
    r = (26.0 / 7.0) ** (1.0 / 6.0)
    return abs(24.0 * r**-7.0 - 48.0 * r**-13.0)


def lj_split(r0: float = R0_LJ_SPLIT) -> SplitKernel:
    """Split the LJ kernel at r0 = 2^(1/6) into short and long parts.

    phi1 = phi + 1 below r0 and 0 beyond; phi2 = -1 below r0 and phi
    beyond. Since r0 is the LJ minimum the force of each part is
    continuous: K1 equals the full force below r0 and vanishes at and
    beyond it, K2 the other way round.
    """
    if not math.isclose(r0, R0_LJ_SPLIT, rel_tol=1e-12):
        raise ValueError("the splitting radius is fixed at 2^(1/6)")
    k1 = KernelSpec(
        force=_k1_force,
        potential=_phi1,
        singular_at_zero=True,
        support_radius=R0_LJ_SPLIT,
    )
    k2 = KernelSpec(
        force=_k2_force,
        potential=_phi2,
        sup_bound=_lj_split_sup_bound(),
    )
    return SplitKernel(k1=k1, k2=k2, full=lj_kernel(), r0=R0_LJ_SPLIT)

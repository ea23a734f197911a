"""Core state, geometry and reproducible randomness shared by every module.

All quantities are in reduced (dimensionless) units. Positions and
velocities are stored as (n, dim) float64 arrays with dim in {1, 3}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np


class SimulationError(RuntimeError):
    """Base class for runtime failures of a simulation."""


class NonFiniteStateError(SimulationError):
    """State contains NaN/Inf after an integrator step."""

    def __init__(self, step_index: int, what: str = "state"):
        self.step_index = step_index
        super().__init__(f"non-finite {what} after step {step_index}")


class SingularPairError(SimulationError):
    """A pair distance fell below the singularity guard of a kernel."""

    def __init__(self, i: int, j: int, distance: float):
        self.pair = (i, j)
        self.distance = distance
        super().__init__(
            f"pair ({i}, {j}) at distance {distance:.3e} below the singularity "
            f"guard; integration has failed"
        )


@dataclass
class ParticleState:
    """Positions and velocities of n particles in dim dimensions."""

    positions: np.ndarray
    velocities: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=np.float64)
        self.velocities = np.asarray(self.velocities, dtype=np.float64)
        if self.positions.shape != self.velocities.shape:
            raise ValueError(
                f"positions {self.positions.shape} and velocities "
                f"{self.velocities.shape} must have identical shape"
            )
        if self.positions.ndim != 2:
            raise ValueError("positions must be an (n, dim) array")

    @property
    def n(self) -> int:
        return self.positions.shape[0]

    @property
    def dim(self) -> int:
        return self.positions.shape[1]

    def copy(self) -> "ParticleState":
        return ParticleState(self.positions.copy(), self.velocities.copy(), self.time)

    def check_finite(self, step_index: int) -> None:
        if not np.isfinite(self.positions).all():
            raise NonFiniteStateError(step_index, "positions")
        if not np.isfinite(self.velocities).all():
            raise NonFiniteStateError(step_index, "velocities")


@dataclass(frozen=True)
class BoxGeometry:
    """Periodic cubic box of side L with interaction cutoff r_c.

    When periodic, the cutoff must satisfy r_c <= L/2 so that at most one
    image of each particle lies within the cutoff ball.
    """

    side_length: float
    periodic: bool = True
    cutoff: float = 0.0

    def __post_init__(self):
        if self.side_length <= 0:
            raise ValueError("side_length must be positive")
        if self.periodic and self.cutoff > self.side_length / 2 + 1e-12:
            raise ValueError(
                f"cutoff {self.cutoff} exceeds L/2 = {self.side_length / 2}"
            )

    @property
    def volume(self) -> float:
        return self.side_length**3

    def wrap(self, positions: np.ndarray) -> np.ndarray:
        """Map positions into [0, L). Identity for non-periodic boxes."""
        if not self.periodic:
            return positions
        return positions - self.side_length * np.floor(positions / self.side_length)


def minimal_image(displacement: np.ndarray, box: Optional[BoxGeometry]) -> np.ndarray:
    """Map displacement components into [-L/2, L/2) (nearest image).

    Non-periodic (or absent) boxes pass the displacement through unchanged;
    that is the documented free-space behaviour, not an error.
    """
    if box is None or not box.periodic:
        return displacement
    length = box.side_length
    return displacement - length * np.floor(displacement / length + 0.5)


def box_from_density(n: int, rho: float) -> BoxGeometry:
    """Cubic box with L = (n/rho)^(1/3), cutoff r_c = L/2, periodic."""
    if n <= 0:
        raise ValueError("particle count must be positive")
    if rho <= 0:
        raise ValueError("density must be positive")
    length = (n / rho) ** (1.0 / 3.0)
    return BoxGeometry(side_length=length, periodic=True, cutoff=length / 2.0)


def lattice_init(n: int, box: BoxGeometry) -> np.ndarray:
    """First n sites of a cubic lattice filling the box, in row-major order.

    The lattice has ceil(n^(1/3)) sites per side with spacing L/m; all
    positions lie inside [0, L)^3.
    """
    if n <= 0:
        raise ValueError("particle count must be positive")
    m = 1
    while m**3 < n:
        m += 1
    spacing = box.side_length / m
    idx = np.arange(n)
    coords = np.stack([idx // (m * m), (idx // m) % m, idx % m], axis=1)
    return coords.astype(np.float64) * spacing


def velocity_init(
    n: int, dim: int, beta: float, rng: np.random.Generator
) -> np.ndarray:
    """Velocities drawn uniform on [-0.5, 0.5], mean-shifted and rescaled.

    After the shift each component has exactly zero mean, and the rescale
    enforces (1/n) sum |v_i|^2 = dim/beta, i.e. the instantaneous
    temperature equals 1/beta.
    """
    if n < 2:
        raise ValueError("velocity_init needs n >= 2 (mean subtraction)")
    v = rng.uniform(-0.5, 0.5, size=(n, dim))
    v -= v.mean(axis=0, keepdims=True)
    ms = np.mean(np.sum(v**2, axis=1))
    if ms == 0.0:
        raise ValueError("degenerate velocity draw (all components equal)")
    v *= math.sqrt(dim / (beta * ms))
    return v


def _tag_entropy(tag: str) -> int:
    return int.from_bytes(tag.encode("utf-8"), "little")


class RngStream:
    """Counter-style keyed random streams for reproducible simulations.

    Every generator is a pure function of (master_seed, context, tag,
    particle, step): the same key yields the same draws regardless of
    thread count or evaluation order. Built on numpy's Philox bit
    generator keyed through SeedSequence.
    """

    def __init__(self, master_seed: int, context: tuple[int, ...] = ()):
        self.master_seed = int(master_seed)
        self.context = tuple(int(c) for c in context)

    def substream(self, *context: int) -> "RngStream":
        """Derived stream, e.g. one per repetition of an experiment."""
        return RngStream(self.master_seed, self.context + tuple(context))

    def generator(self, tag: str, particle: int = 0, step: int = 0) -> np.random.Generator:
        entropy = (
            self.master_seed,
            *self.context,
            _tag_entropy(tag),
            int(particle),
            int(step),
        )
        seq = np.random.SeedSequence(entropy)
        return np.random.Generator(np.random.Philox(seq))

    def normals(self, tag: str, step: int, shape) -> np.ndarray:
        return self.generator(tag, step=step).standard_normal(shape)

    def uniforms(self, tag: str, step: int, shape) -> np.ndarray:
        return self.generator(tag, step=step).random(shape)


@dataclass
class SystemParams:
    """Coupling, friction and temperature of a second-order system.

    sigma is derived, never stored: the fluctuation-dissipation relation
    sigma^2 = 2*gamma/beta always holds when the Langevin thermostat is on.
    alpha_n is 1/(N-1) in the mean-field regime and 1 in the molecular one.
    """

    alpha_n: float
    gamma: float
    beta: float
    external_field: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None)

    def __post_init__(self):
        if self.beta <= 0:
            raise ValueError("beta must be positive")

    @property
    def sigma(self) -> float:
        return math.sqrt(2.0 * self.gamma / self.beta)

    @property
    def temperature(self) -> float:
        return 1.0 / self.beta


def mean_field_alpha(n: int) -> float:
    return 1.0 / (n - 1)

"""Time steppers and the coupled-noise machinery for convergence studies.

All drivers share conventions: step indices are 1-based and global, the
partition and the noise for step k are drawn from streams keyed by k (so
replays are exact), and forces are evaluated once per step at the new
position with the freshly drawn partition, then cached into the next
step's first half-kick.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .batching import Partition, random_partition
from .core import ParticleState, RngStream
from .forces import ForceField, evaluate_force

Callback = Callable[[int, ParticleState], None]
NoiseFn = Callable[[int, float], np.ndarray]


@dataclass(frozen=True)
class StepSchedule:
    """Fixed step size, or the decreasing rule tau_k = tau0 / ln(k+1)."""

    mode: str  # "fixed" | "decreasing"
    tau0: float

    def __post_init__(self):
        if self.mode not in ("fixed", "decreasing"):
            raise ValueError(f"unknown schedule mode {self.mode!r}")
        if self.tau0 <= 0:
            raise ValueError("tau0 must be positive")

    def tau(self, k: int) -> float:
        if k < 1:
            raise ValueError("step indices are 1-based")
        if self.mode == "fixed":
            return self.tau0
        return self.tau0 / math.log(k + 1)

    def steps_until(self, t_target: float, start_step: int = 1) -> int:
        """Number of steps from start_step until cumulative time >= t_target."""
        t, k = 0.0, start_step
        while t < t_target:
            t += self.tau(k)
            k += 1
        return k - start_step


def fixed_schedule(tau: float) -> StepSchedule:
    return StepSchedule(mode="fixed", tau0=tau)


def baoab_coefficients(gamma: float, tau: float, beta: float) -> tuple[float, float]:
    """c1 = exp(-gamma tau), c2 = sqrt((1 - c1^2)/beta) of the exact OU step."""
    c1 = math.exp(-gamma * tau)
    return c1, math.sqrt((1.0 - c1 * c1) / beta)


def coupled_noise_aggregate(
    fine_draws: np.ndarray, gamma: float, tau_fine: float, beta: float
) -> np.ndarray:
    """Collapse M fine OU noises into the coarse-step OU noise.

    For the same Brownian path, composing M fine O-steps gives
    xi = c2_f sum_j c1_f^(M-1-j) R_j, whose variance is exactly the coarse
    c2^2 = (1 - c1_f^(2M))/beta. M must be a power of two.
    """
    fine_draws = np.asarray(fine_draws, dtype=np.float64)
    m = fine_draws.shape[0]
    if m < 1 or (m & (m - 1)) != 0:
        raise ValueError(f"aggregation factor {m} must be a power of 2")
    c1, c2 = baoab_coefficients(gamma, tau_fine, beta)
    weights = c2 * c1 ** np.arange(m - 1, -1, -1, dtype=np.float64)
    return np.tensordot(weights, fine_draws, axes=1)


class CoupledNoiseTape:
    """Virtual tape of standard normals R[fine_step, particle, component].

    Rows are generated in fixed-size chunks keyed by (tag, chunk index),
    so every consumer (the fine reference and each coarser run) sees
    identical values without materializing the whole tape.
    """

    def __init__(
        self, stream: RngStream, n: int, dim: int, tag: str = "otape", chunk: int = 4096
    ):
        self.stream = stream
        self.n = n
        self.dim = dim
        self.tag = tag
        self.chunk = chunk
        self._cached_index = -1
        self._cached_block: Optional[np.ndarray] = None

    def _block(self, c: int) -> np.ndarray:
        if c != self._cached_index:
            self._cached_block = self.stream.normals(
                self.tag, c, (self.chunk, self.n, self.dim)
            )
            self._cached_index = c
        return self._cached_block

    def rows(self, a: int, b: int) -> np.ndarray:
        """Fine-step rows [a, b), 0-based."""
        parts = []
        for c in range(a // self.chunk, (b - 1) // self.chunk + 1):
            block = self._block(c)
            lo, hi = max(a, c * self.chunk), min(b, (c + 1) * self.chunk)
            parts.append(block[lo - c * self.chunk : hi - c * self.chunk])
        return parts[0] if len(parts) == 1 else np.concatenate(parts)


def make_coupled_noise_fn(
    tape: CoupledNoiseTape, m: int, gamma: float, tau_fine: float, beta: float
) -> NoiseFn:
    """OU noise for coarse step k aggregated from fine rows (k-1)m..km."""
    if m < 1 or (m & (m - 1)) != 0:
        raise ValueError(f"aggregation factor {m} must be a power of 2")
    c1, c2 = baoab_coefficients(gamma, tau_fine, beta)
    weights = c2 * c1 ** np.arange(m - 1, -1, -1, dtype=np.float64)

    def noise(k: int, tau: float) -> np.ndarray:
        return np.tensordot(weights, tape.rows((k - 1) * m, k * m), axes=1)

    return noise


def _partition_source(
    stream: RngStream, n: int, p: Optional[int]
) -> Callable[[int], Optional[Partition]]:
    if p is None:
        return lambda k: None
    return lambda k: random_partition(n, p, stream.generator("partition", step=k))


def run_baoab(
    state: ParticleState,
    field: ForceField,
    schedule: StepSchedule,
    n_steps: int,
    gamma: float,
    beta: float,
    stream: RngStream,
    *,
    p: Optional[int] = None,
    noise_fn: Optional[NoiseFn] = None,
    callback: Optional[Callback] = None,
    start_step: int = 1,
) -> ParticleState:
    """BAOAB Langevin stepping, with random-batch forces when p is given.

    The first half-kick of step k reuses the force cached at the end of
    step k-1 (computed with the partition drawn for the interval), and the
    final half-kick uses the new position and the next interval's
    partition: one force evaluation per step.
    """
    draw = _partition_source(stream, state.n, p)
    force = evaluate_force(state, field, draw(start_step - 1))
    x, v = state.positions, state.velocities
    wrap = field.box is not None and field.box.periodic
    for k in range(start_step, start_step + n_steps):
        tau = schedule.tau(k)
        c1, c2 = baoab_coefficients(gamma, tau, beta)
        if noise_fn is None:
            xi = c2 * stream.normals("baoab", k, x.shape)
        else:
            xi = noise_fn(k, tau)
        v += 0.5 * tau * force
        x += 0.5 * tau * v
        v *= c1
        v += xi
        x += 0.5 * tau * v
        if wrap:
            x[:] = field.box.wrap(x)
        force = evaluate_force(state, field, draw(k))
        v += 0.5 * tau * force
        state.time += tau
        state.check_finite(k)
        if callback is not None:
            callback(k, state)
    return state


def run_verlet_andersen(
    state: ParticleState,
    field: ForceField,
    schedule: StepSchedule,
    n_steps: int,
    nu: float,
    temperature: float,
    stream: RngStream,
    *,
    p: Optional[int] = None,
    callback: Optional[Callback] = None,
    start_step: int = 1,
) -> ParticleState:
    """Velocity Verlet with Andersen collisions and random-batch forces.

    Per step: collision test with probability 1 - exp(-nu tau) resampling
    the full velocity vector from N(0, T); position update with the cached
    force; new partition and force at the new position; velocity update
    with the force average. nu = 0 is plain velocity Verlet.
    """
    draw = _partition_source(stream, state.n, p)
    force = evaluate_force(state, field, draw(start_step - 1))
    x, v = state.positions, state.velocities
    wrap = field.box is not None and field.box.periodic
    vscale = math.sqrt(temperature)
    for k in range(start_step, start_step + n_steps):
        tau = schedule.tau(k)
        if nu > 0:
            gen = stream.generator("andersen", step=k)
            zeta = gen.random(state.n)
            fresh = vscale * gen.standard_normal(x.shape)
            hit = zeta <= -math.expm1(-nu * tau)
            v[hit] = fresh[hit]
        x += v * tau + (0.5 * tau * tau) * force
        if wrap:
            x[:] = field.box.wrap(x)
        old_force = force
        force = evaluate_force(state, field, draw(k))
        v += 0.5 * tau * (old_force + force)
        state.time += tau
        state.check_finite(k)
        if callback is not None:
            callback(k, state)
    return state


def run_euler_maruyama(
    state: ParticleState,
    field: ForceField,
    schedule: StepSchedule,
    n_steps: int,
    sigma: float,
    stream: RngStream,
    *,
    p: Optional[int] = None,
    callback: Optional[Callback] = None,
    start_step: int = 1,
) -> ParticleState:
    """First-order random-batch stepping: X += F tau + sigma sqrt(tau) xi.

    Positions only; velocities are carried through untouched.
    """
    draw = _partition_source(stream, state.n, p)
    x = state.positions
    wrap = field.box is not None and field.box.periodic
    for k in range(start_step, start_step + n_steps):
        tau = schedule.tau(k)
        force = evaluate_force(state, field, draw(k))
        x += force * tau
        if sigma != 0.0:
            x += sigma * math.sqrt(tau) * stream.normals("em", k, x.shape)
        if wrap:
            x[:] = field.box.wrap(x)
        state.time += tau
        state.check_finite(k)
        if callback is not None:
            callback(k, state)
    return state

"""Random batch partitions and the force-estimator error functionals.

The partition of {0..n-1} into batches of size p is redrawn every macro
step. chi and lambda_i are the estimator bias/variance functionals used
both in production stepping and as test oracles.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterator, List

import numpy as np


@dataclass(frozen=True)
class Partition:
    """A division of {0..n-1} into n/p disjoint batches of size p."""

    n: int
    p: int
    batches: np.ndarray  # (n_batches, p) int array
    batch_of: np.ndarray  # particle -> batch id

    @property
    def n_batches(self) -> int:
        return self.batches.shape[0]

    def members(self, i: int) -> np.ndarray:
        """Indices sharing particle i's batch, i included."""
        return self.batches[self.batch_of[i]]


@dataclass(frozen=True)
class EstimatorStats:
    """Batch-force error chi and the pair-force variance Lambda at one particle."""

    chi: np.ndarray
    lam: float

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lambda is a variance and cannot be negative")


def _partition_from_order(n: int, p: int, order: np.ndarray) -> Partition:
    batches = np.asarray(order, dtype=np.int64).reshape(n // p, p)
    batch_of = np.empty(n, dtype=np.int64)
    batch_of[batches.ravel()] = np.repeat(np.arange(n // p), p)
    return Partition(n=n, p=p, batches=batches, batch_of=batch_of)


def check_batch_size(n: int, p: int) -> None:
    if p < 2:
        raise ValueError(f"batch size p={p} must be >= 2")
    if n % p != 0:
        raise ValueError(
            f"batch size p={p} must divide the particle count n={n}; "
            f"unequal batches are not supported"
        )


def random_partition(n: int, p: int, rng: np.random.Generator) -> Partition:
    """Uniformly random division into batches of size p (shuffle + chunk)."""
    check_batch_size(n, p)
    return _partition_from_order(n, p, rng.permutation(n))


def single_batch(n: int) -> Partition:
    """The trivial partition p = n (every particle in one batch)."""
    return _partition_from_order(n, n, np.arange(n))


def same_batch_indicator(part: Partition, i: int, j: int) -> int:
    """I_ij: 1 iff particles i and j share a batch."""
    if i == j:
        raise ValueError("indicator is defined for distinct particles only")
    return int(part.batch_of[i] == part.batch_of[j])


def enumerate_pair_partitions(n: int) -> Iterator[Partition]:
    """All partitions of {0..n-1} into unordered pairs (p = 2).

    There are (n-1)!! of them; used for exhaustive estimator checks at
    small n.
    """
    check_batch_size(n, 2)

    def rec(remaining: List[int]) -> Iterator[List[int]]:
        if not remaining:
            yield []
            return
        first = remaining[0]
        for k in range(1, len(remaining)):
            partner = remaining[k]
            rest = remaining[1:k] + remaining[k + 1 :]
            for tail in rec(rest):
                yield [first, partner] + tail

    for flat in rec(list(range(n))):
        yield _partition_from_order(n, 2, np.asarray(flat))


Kernel = Callable[[np.ndarray], np.ndarray]


def chi(positions: np.ndarray, kernel: Kernel, part: Partition, i: int) -> np.ndarray:
    """Batch-minus-full force difference at particle i.

    chi_i = (1/(p-1)) sum_{j in C_i, j != i} K(x_i - x_j)
          - (1/(N-1)) sum_{j != i} K(x_i - x_j)
    """
    n = positions.shape[0]
    if part.p < 2 or n < part.p:
        raise ValueError("need N >= p >= 2")
    xi = positions[i]
    mates = part.members(i)
    mates = mates[mates != i]
    batch_sum = kernel(xi - positions[mates]).sum(axis=0)
    others = np.delete(np.arange(n), i)
    full_sum = kernel(xi - positions[others]).sum(axis=0)
    return batch_sum / (part.p - 1) - full_sum / (n - 1)


def estimator_stats(
    positions: np.ndarray, kernel: Kernel, part: Partition, i: int
) -> EstimatorStats:
    return EstimatorStats(
        chi=chi(positions, kernel, part, i), lam=lambda_i(positions, kernel, i)
    )


def lambda_i(positions: np.ndarray, kernel: Kernel, i: int) -> float:
    """Empirical variance of the pairwise forces on particle i.

    Lambda_i = (1/(N-2)) sum_{j != i} |K(x_i - x_j) - mean_l K(x_i - x_l)|^2
    """
    n = positions.shape[0]
    if n < 3:
        raise ValueError("lambda_i needs N >= 3")
    others = np.delete(np.arange(n), i)
    forces = kernel(positions[i] - positions[others])
    mean = forces.mean(axis=0)
    return float(np.sum((forces - mean) ** 2) / (n - 2))

"""Age binning and bin-balanced batch sampling.

Ages are spread very unevenly in real cohorts, so batches drawn uniformly
over samples would be dominated by the most common ages. Instead each batch
slot first picks an age bin uniformly, then a sample uniformly within that
bin (with replacement), making every age group equally likely per slot.
"""

from __future__ import annotations

import math

from .errors import UsageError


def make_bins(ages, width: float) -> list[int]:
    """Assign each age to a bin of `width` years above the minimum age.

    Bin indices are compacted: bins with no samples do not count, so the
    result always uses indices 0..n_bins-1 with every index occupied.
    """
    ages = list(ages)
    if not ages:
        raise UsageError("make_bins needs at least one age")
    if width <= 0:
        raise UsageError(f"bin width must be positive, got {width}")
    lo = min(ages)
    raw = [math.floor((a - lo) / width) for a in ages]
    rank = {b: i for i, b in enumerate(sorted(set(raw)))}
    return [rank[b] for b in raw]


def bin_groups(assignment) -> list[list[int]]:
    """Sample indices per bin, for handing to balanced_batches."""
    assignment = list(assignment)
    groups: list[list[int]] = [[] for _ in range(max(assignment) + 1)]
    for i, b in enumerate(assignment):
        groups[b].append(i)
    return groups


def balanced_batches(groups, batch_size: int, rng):
    """Endless stream of index batches, uniform over bins then within a bin."""
    groups = [list(g) for g in groups]
    if not groups or any(not g for g in groups):
        raise UsageError("balanced_batches needs non-empty bins")
    if batch_size < 1:
        raise UsageError(f"batch_size must be >= 1, got {batch_size}")
    n_bins = len(groups)
    while True:
        batch = []
        for _ in range(batch_size):
            g = groups[int(rng.integers(n_bins))]
            batch.append(g[int(rng.integers(len(g)))])
        yield batch

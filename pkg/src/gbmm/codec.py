"""Fixed-length index codec: apportion 2^n_bits codewords to precoder indices
so the induced activation distribution tracks a target one."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = ["CodebookPartition", "build_partition", "encode", "codec_report"]


@dataclass(frozen=True)
class CodebookPartition:
    n_bits: int
    group_sizes: np.ndarray
    boundaries: np.ndarray   # exclusive prefix sums, len == number of groups
    target_p: np.ndarray

    def __post_init__(self):
        for name in ("group_sizes", "boundaries", "target_p"):
            arr = np.asarray(getattr(self, name))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_codewords(self) -> int:
        return 1 << self.n_bits

    def achieved_p(self) -> np.ndarray:
        return self.group_sizes / self.n_codewords


def build_partition(target_p, n_bits: int) -> CodebookPartition:
    """Largest-remainder apportionment of 2^n_bits codewords.

    Every index with nonzero target probability keeps at least one codeword;
    the topping-up steals from the currently largest group, so each group size
    stays within one codeword of its ideal quota before the adjustment.
    """
    p = np.asarray(target_p, dtype=float)
    if n_bits < 1:
        raise ValueError("need at least one bit")
    if p.ndim != 1 or p.size == 0:
        raise ValueError("target_p must be a nonempty vector")
    if np.any(p < 0):
        raise ValueError("target probabilities must be nonnegative")
    total = p.sum()
    if abs(total - 1.0) > 1e-6:
        raise ValueError(f"target probabilities sum to {total}, not 1")
    p = p / total
    n_words = 1 << n_bits
    nonzero = p > 0
    if int(nonzero.sum()) > n_words:
        raise ValueError(
            f"{int(nonzero.sum())} indices with positive probability cannot share "
            f"{n_words} codewords; increase n_bits"
        )
    quotas = p * n_words
    sizes = np.floor(quotas).astype(int)
    remainders = quotas - sizes
    short = n_words - int(sizes.sum())
    if short > 0:
        # ties broken toward the lower index for a deterministic partition
        order = np.lexsort((np.arange(p.size), -remainders))
        sizes[order[:short]] += 1
    for i in np.flatnonzero(nonzero & (sizes == 0)):
        donor = int(np.argmax(sizes))
        if sizes[donor] <= 1:
            raise ValueError("cannot guarantee a codeword per nonzero index")
        sizes[donor] -= 1
        sizes[i] += 1
    return CodebookPartition(
        n_bits=n_bits,
        group_sizes=sizes,
        boundaries=np.cumsum(sizes),
        target_p=p,
    )


def encode(partition: CodebookPartition, word: int) -> int:
    """Map a codeword (integer in [0, 2^n_bits)) to its precoder index by
    binary search over the partition boundaries."""
    if not 0 <= word < partition.n_codewords:
        raise ValueError(
            f"codeword {word} outside [0, {partition.n_codewords})"
        )
    return int(np.searchsorted(partition.boundaries, word, side="right"))


def codec_report(partition: CodebookPartition) -> dict:
    """Achieved distribution, its entropy, total-variation miss, and the
    effective bit rate carried per transmitted codeword."""
    achieved = partition.achieved_p()
    pos = achieved > 0
    entropy = float(-np.sum(achieved[pos] * np.log2(achieved[pos])))
    tv = 0.5 * float(np.abs(achieved - partition.target_p).sum())
    return {
        "achieved_p": achieved.tolist(),
        "entropy_bits": entropy,
        "tv_distance": tv,
        "rate": entropy / partition.n_bits,
        "group_sizes": partition.group_sizes.tolist(),
        "n_bits": partition.n_bits,
    }

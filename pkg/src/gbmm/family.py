"""Beamspace precoder families: subsets of right-singular directions, each with
per-stream powers and an activation probability."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, replace
from itertools import combinations

import numpy as np

from .channel import ChannelDecomposition

__all__ = [
    "PrecoderFamily",
    "ReceiveCovariance",
    "enumerate_selections",
    "build_precoder",
    "receive_covariance",
    "per_precoder_capacity",
    "capacities",
    "gain_matrix",
    "normalize_family_power",
    "prune_family",
    "validate_family",
    "with_probs",
    "with_lambdas",
    "uniform_probs",
    "family_to_record",
    "family_from_record",
]

PROB_TOL = 1e-9
POWER_TOL = 1e-9


def enumerate_selections(m: int, n_streams: int) -> tuple:
    """All size-n_streams subsets of the m subchannel indices, lexicographic, 0-based."""
    if n_streams < 1:
        raise ValueError("need at least one stream")
    if n_streams >= m:
        raise ValueError(
            "index modulation impossible: the channel rank must exceed the "
            f"stream count (rank m={m}, n_streams={n_streams}); with m == n_streams "
            "there is only one selection and the index carries no information"
        )
    return tuple(combinations(range(m), n_streams))


@dataclass(frozen=True)
class PrecoderFamily:
    """A finite family of beamspace precoders over one channel decomposition.

    selections : tuple of 0-based, ascending index tuples into the singular basis
    lambdas    : (|F|, n_streams) per-stream transmit powers, nonnegative
    probs      : (|F|,) activation probabilities, sums to one
    snr        : transmit SNR rho (linear scale)
    """

    selections: tuple
    lambdas: np.ndarray
    probs: np.ndarray
    n_streams: int
    snr: float
    decomposition: ChannelDecomposition

    def __post_init__(self):
        lam = np.array(self.lambdas, dtype=float)
        p = np.array(self.probs, dtype=float)
        sels = tuple(tuple(int(j) for j in s) for s in self.selections)
        if lam.shape != (len(sels), self.n_streams):
            raise ValueError(f"lambdas must have shape ({len(sels)}, {self.n_streams})")
        if p.shape != (len(sels),):
            raise ValueError("probs length must match the number of selections")
        lam.setflags(write=False)
        p.setflags(write=False)
        object.__setattr__(self, "lambdas", lam)
        object.__setattr__(self, "probs", p)
        object.__setattr__(self, "selections", sels)

    @property
    def size(self) -> int:
        return len(self.selections)

    @property
    def rho_eff(self) -> float:
        """Per-stream SNR rho / n_streams used throughout the SE expressions."""
        return self.snr / self.n_streams

    def selection_array(self) -> np.ndarray:
        return np.array(self.selections, dtype=int)


def validate_family(family: PrecoderFamily) -> None:
    """Raise if the probability simplex or average power constraint is violated."""
    m = family.decomposition.rank
    for sel in family.selections:
        if list(sel) != sorted(set(sel)):
            raise ValueError(f"selection {sel} must be strictly ascending")
        if sel and (sel[0] < 0 or sel[-1] >= m):
            raise ValueError(f"selection {sel} out of range for rank {m}")
    if np.any(family.probs < -PROB_TOL):
        raise ValueError("activation probabilities must be nonnegative")
    if abs(family.probs.sum() - 1.0) > PROB_TOL:
        raise ValueError(f"activation probabilities sum to {family.probs.sum()}, not 1")
    if np.any(family.lambdas < -POWER_TOL):
        raise ValueError("per-stream powers must be nonnegative")
    power = float(family.probs @ family.lambdas.sum(axis=1))
    if abs(power - family.n_streams) > POWER_TOL:
        raise ValueError(
            f"average transmit power {power} violates the budget {family.n_streams}"
        )
    if family.snr < 0:
        raise ValueError("snr must be nonnegative")


def build_precoder(decomposition: ChannelDecomposition, selection, lambdas_row) -> np.ndarray:
    """Fully-digital precoder: selected right-singular columns scaled by sqrt powers."""
    lam = np.asarray(lambdas_row, dtype=float)
    cols = decomposition.right_vectors[:, list(selection)]
    return cols * np.sqrt(lam)


@dataclass(frozen=True)
class ReceiveCovariance:
    """Receive covariance of one precoder in its eigenbasis.

    The covariance is I plus rank-n_streams excess on the selected left-singular
    directions; eigenvalues holds 1 + rho_eff * sigma_j^2 * lambda_j for those.
    """

    indices: tuple
    eigenvalues: np.ndarray
    basis: np.ndarray       # (n_rx, m) left-singular vectors
    dimension: int

    def dense(self) -> np.ndarray:
        cov = np.eye(self.dimension, dtype=complex)
        for j, ev in zip(self.indices, self.eigenvalues):
            u = self.basis[:, j][:, None]
            cov += (ev - 1.0) * (u @ u.conj().T)
        return cov

    @property
    def log2_det(self) -> float:
        return float(np.sum(np.log2(self.eigenvalues)))


def receive_covariance(family: PrecoderFamily, index: int) -> ReceiveCovariance:
    sel = family.selections[index]
    sig2 = family.decomposition.singular_values[list(sel)] ** 2
    eig = 1.0 + family.rho_eff * sig2 * family.lambdas[index]
    return ReceiveCovariance(
        indices=sel,
        eigenvalues=eig,
        basis=family.decomposition.left_vectors,
        dimension=family.decomposition.n_rx,
    )


def gain_matrix(family: PrecoderFamily) -> np.ndarray:
    """(|F|, m) matrix G with G[i, j] = rho_eff * sigma_j^2 * lambda_ij on the
    selected subchannels and 0 elsewhere.  The i-th receive covariance is
    diagonal in the left-singular basis with eigenvalues 1 + G[i]."""
    m = family.decomposition.rank
    sel = family.selection_array()
    sig2 = family.decomposition.singular_values[sel] ** 2
    gains = np.zeros((family.size, m))
    rows = np.arange(family.size)[:, None]
    gains[rows, sel] = family.rho_eff * sig2 * family.lambdas
    return gains


def per_precoder_capacity(family: PrecoderFamily, index: int) -> float:
    """Gaussian rate of precoder i in bits: sum of log2(1 + rho_eff sigma^2 lambda)."""
    sel = list(family.selections[index])
    sig2 = family.decomposition.singular_values[sel] ** 2
    return float(np.sum(np.log2(1.0 + family.rho_eff * sig2 * family.lambdas[index])))


def capacities(family: PrecoderFamily) -> np.ndarray:
    sel = family.selection_array()
    sig2 = family.decomposition.singular_values[sel] ** 2
    return np.log2(1.0 + family.rho_eff * sig2 * family.lambdas).sum(axis=1)


def normalize_family_power(family: PrecoderFamily) -> PrecoderFamily:
    """Rescale all powers by one common factor so the average power equals n_streams."""
    power = float(family.probs @ family.lambdas.sum(axis=1))
    if power <= 0:
        raise ValueError("cannot normalize a family with zero average power")
    return replace(family, lambdas=family.lambdas * (family.n_streams / power))


def prune_family(family: PrecoderFamily, threshold: float) -> PrecoderFamily:
    """Drop precoders whose probability falls below threshold, then restore the
    simplex and power constraints."""
    keep = family.probs >= threshold
    if not np.any(keep):
        raise ValueError("pruning threshold removes every precoder")
    pruned = replace(
        family,
        selections=tuple(s for s, k in zip(family.selections, keep) if k),
        lambdas=family.lambdas[keep],
        probs=family.probs[keep] / family.probs[keep].sum(),
    )
    return normalize_family_power(pruned)


def with_probs(family: PrecoderFamily, probs) -> PrecoderFamily:
    return replace(family, probs=np.asarray(probs, dtype=float))


def with_lambdas(family: PrecoderFamily, lambdas) -> PrecoderFamily:
    return replace(family, lambdas=np.asarray(lambdas, dtype=float))


def uniform_probs(family: PrecoderFamily) -> PrecoderFamily:
    return with_probs(family, np.full(family.size, 1.0 / family.size))


def channel_fingerprint(seed, config_dict: dict) -> str:
    blob = json.dumps({"seed": seed, "config": config_dict}, sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def family_to_record(family: PrecoderFamily, fingerprint: str = "") -> dict:
    return {
        "selections": [list(s) for s in family.selections],
        "lambdas": family.lambdas.tolist(),
        "probs": family.probs.tolist(),
        "n_streams": family.n_streams,
        "snr": family.snr,
        "channel_fingerprint": fingerprint,
    }


def family_from_record(record: dict, decomposition: ChannelDecomposition,
                       fingerprint: str | None = None) -> PrecoderFamily:
    stored = record.get("channel_fingerprint", "")
    if fingerprint is not None and stored and stored != fingerprint:
        raise ValueError(
            f"family was built for channel {stored}, not {fingerprint}; "
            "replay the matching channel before loading"
        )
    fam = PrecoderFamily(
        selections=tuple(tuple(s) for s in record["selections"]),
        lambdas=np.array(record["lambdas"], dtype=float),
        probs=np.array(record["probs"], dtype=float),
        n_streams=int(record["n_streams"]),
        snr=float(record["snr"]),
        decomposition=decomposition,
    )
    validate_family(fam)
    return fam

"""Hybrid analog/digital factorizations of fully-digital precoders and
combiners: greedy matching over steering dictionaries, a partially-connected
per-subarray design, and a shared-analog variant for multicarrier use."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .channel import ChannelDecomposition, ChannelRealization, decompose, steering_vector

__all__ = [
    "HybridFactorization",
    "EffectiveChannel",
    "transmit_dictionary",
    "receive_dictionary",
    "omp_hybrid",
    "omp_hybrid_combiner",
    "sic_hybrid",
    "design_combiner",
    "effective_channel",
    "ofdm_shared_analog",
]


@dataclass(frozen=True)
class HybridFactorization:
    """analog (constant-modulus columns) times digital approximates the target."""

    analog: np.ndarray
    digital: np.ndarray
    target_norm: float
    residual: float

    @property
    def product(self) -> np.ndarray:
        return self.analog @ self.digital


@dataclass(frozen=True)
class EffectiveChannel:
    matrix: np.ndarray
    rank: int


def transmit_dictionary(channel: ChannelRealization) -> np.ndarray:
    """Unit-norm transmit steering vectors at the channel's departure angles."""
    return np.column_stack([
        steering_vector(channel.config.tx, p.aod_azimuth, p.aod_elevation)
        for p in channel.paths
    ])


def receive_dictionary(channel: ChannelRealization) -> np.ndarray:
    """Unit-norm receive steering vectors at the channel's arrival angles."""
    return np.column_stack([
        steering_vector(channel.config.rx, p.aoa_azimuth, p.aoa_elevation)
        for p in channel.paths
    ])


def _greedy_select(targets, dictionary, n_rf):
    """Pick n_rf dictionary columns greedily by residual correlation summed
    over all targets; returns chosen indices and per-target digital fits."""
    n = dictionary.shape[0]
    if dictionary.shape[1] < n_rf:
        raise ValueError(
            f"dictionary has {dictionary.shape[1]} columns, fewer than n_rf={n_rf}"
        )
    for t in targets:
        if t.shape[1] > n_rf:
            raise ValueError(
                f"target has {t.shape[1]} columns; n_rf={n_rf} chains cannot carry it"
            )
    chosen = []
    residuals = [t.copy() for t in targets]
    digitals = None
    for _ in range(n_rf):
        corr = np.zeros(dictionary.shape[1])
        for r in residuals:
            corr += np.sum(np.abs(dictionary.conj().T @ r) ** 2, axis=1)
        corr[chosen] = -np.inf
        chosen.append(int(np.argmax(corr)))
        # entries of a steering column have modulus 1/sqrt(n); lift to unit modulus
        analog = math.sqrt(n) * dictionary[:, chosen]
        digitals = [np.linalg.lstsq(analog, t, rcond=None)[0] for t in targets]
        residuals = [t - analog @ dig for t, dig in zip(targets, digitals)]
    return math.sqrt(n) * dictionary[:, chosen], digitals


def omp_hybrid(target, dictionary, n_rf: int, enforce_norm: bool = True) -> HybridFactorization:
    """Greedy fully-connected factorization of one precoder.

    Selects n_rf steering columns by residual correlation, refits the digital
    part by least squares each round, and finally rescales the digital matrix
    so the product carries exactly the target's power.
    """
    target = np.asarray(target, dtype=complex)
    analog, digitals = _greedy_select([target], np.asarray(dictionary, dtype=complex), n_rf)
    digital = digitals[0]
    target_norm = float(np.linalg.norm(target))
    if enforce_norm:
        prod_norm = float(np.linalg.norm(analog @ digital))
        if prod_norm <= 0:
            raise ValueError("degenerate factorization with zero product norm")
        digital = digital * (target_norm / prod_norm)
    residual = float(np.linalg.norm(target - analog @ digital))
    return HybridFactorization(analog=analog, digital=digital,
                               target_norm=target_norm, residual=residual)


def omp_hybrid_combiner(target, dictionary, n_rf: int) -> HybridFactorization:
    """Same greedy factorization for receive combiners; no power constraint."""
    return omp_hybrid(target, dictionary, n_rf, enforce_norm=False)


def sic_hybrid(target, n_rf: int) -> HybridFactorization:
    """Partially-connected factorization: each RF chain drives one subarray.

    The analog column of block b carries the entrywise phases of the dominant
    left-singular vector of the target's row block; one digital row per block
    is the least-squares fit, and a final scaling restores the target power.
    """
    target = np.asarray(target, dtype=complex)
    n, n_cols = target.shape
    if n % n_rf:
        raise ValueError(f"array size {n} is not divisible into {n_rf} subarrays")
    block = n // n_rf
    analog = np.zeros((n, n_rf), dtype=complex)
    digital = np.zeros((n_rf, n_cols), dtype=complex)
    for b in range(n_rf):
        rows = slice(b * block, (b + 1) * block)
        sub = target[rows]
        u = np.linalg.svd(sub, full_matrices=False)[0][:, 0]
        phases = np.exp(1j * np.angle(u))
        analog[rows, b] = phases
        # scalar least squares per block: a^H sub / (a^H a)
        digital[b] = phases.conj() @ sub / block
    target_norm = float(np.linalg.norm(target))
    prod_norm = float(np.linalg.norm(analog @ digital))
    if prod_norm > 0:
        digital *= target_norm / prod_norm
    residual = float(np.linalg.norm(target - analog @ digital))
    return HybridFactorization(analog=analog, digital=digital,
                               target_norm=target_norm, residual=residual)


def design_combiner(decomposition: ChannelDecomposition, m_hat: int) -> np.ndarray:
    """Fully-digital combiner: the m_hat strongest left-singular directions."""
    if m_hat < 1:
        raise ValueError("the combiner needs at least one output dimension")
    if m_hat > decomposition.rank:
        warnings.warn(
            f"requested {m_hat} combiner outputs but the channel rank is "
            f"{decomposition.rank}; truncating"
        )
        m_hat = decomposition.rank
    return decomposition.left_vectors[:, :m_hat].copy()


def effective_channel(combiner, channel, rank_tolerance: float = 1e-10) -> EffectiveChannel:
    """Channel seen through a combiner: W^H H with its numerical rank."""
    w = np.asarray(combiner, dtype=complex)
    h = channel.matrix if isinstance(channel, ChannelRealization) else np.asarray(channel)
    eff = w.conj().T @ h
    rank = decompose(eff, rank_tolerance).rank
    return EffectiveChannel(matrix=eff, rank=rank)


def ofdm_shared_analog(targets, dictionary, n_rf: int):
    """One analog precoder shared across carriers, per-carrier digital parts.

    Greedy column selection scores each candidate by the residual correlation
    summed over all carriers; per-carrier digital fits are least squares with
    a final per-carrier power match.  With a single carrier this reduces to
    the narrowband greedy factorization.
    """
    targets = [np.asarray(t, dtype=complex) for t in targets]
    if not targets:
        raise ValueError("need at least one carrier target")
    analog, digitals = _greedy_select(targets, np.asarray(dictionary, dtype=complex), n_rf)
    scaled = []
    for t, dig in zip(targets, digitals):
        prod_norm = float(np.linalg.norm(analog @ dig))
        if prod_norm <= 0:
            raise ValueError("degenerate factorization with zero product norm")
        scaled.append(dig * (np.linalg.norm(t) / prod_norm))
    return analog, scaled

"""Closed-form family design for the SE upper bound: exact water-filling per
selection and a softmax activation distribution over per-precoder rates."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelDecomposition
from .family import PrecoderFamily, enumerate_selections, validate_family

__all__ = [
    "WaterFillSolution",
    "water_fill",
    "activation_distribution",
    "optimize",
]

LN2 = np.log(2.0)


@dataclass(frozen=True)
class WaterFillSolution:
    lambdas: np.ndarray
    water_level_multiplier: float  # xi with common level 1 / (xi * ln 2)
    active_count: int

    @property
    def water_level(self) -> float:
        return 1.0 / (self.water_level_multiplier * LN2)


def water_fill(sigma_squared, rho_eff: float, budget: float) -> WaterFillSolution:
    """Exact water-filling over parallel channels with gains rho_eff * sigma^2.

    Solves max sum_j log2(1 + g_j lambda_j) subject to sum lambda_j = budget,
    lambda >= 0, by sorting inverse gains and picking the largest feasible
    active set; no iterative search.
    """
    sig2 = np.asarray(sigma_squared, dtype=float)
    if sig2.ndim != 1 or sig2.size == 0:
        raise ValueError("sigma_squared must be a nonempty vector")
    if np.any(sig2 <= 0):
        raise ValueError("all subchannel gains must be positive")
    if rho_eff <= 0:
        raise ValueError("per-stream SNR must be positive")
    if budget <= 0:
        raise ValueError("power budget must be positive")

    inv = 1.0 / (rho_eff * sig2)
    order = np.argsort(inv)  # strongest channel first
    inv_sorted = inv[order]
    prefix = np.cumsum(inv_sorted)
    # Largest k with water level above the k-th inverse gain.
    active = 1
    for k in range(sig2.size, 0, -1):
        level = (budget + prefix[k - 1]) / k
        if level > inv_sorted[k - 1]:
            active = k
            break
    level = (budget + prefix[active - 1]) / active
    lam_sorted = np.zeros_like(inv_sorted)
    lam_sorted[:active] = level - inv_sorted[:active]
    lam = np.empty_like(lam_sorted)
    lam[order] = lam_sorted
    return WaterFillSolution(
        lambdas=lam,
        water_level_multiplier=1.0 / (level * LN2),
        active_count=active,
    )


def activation_distribution(capacities) -> np.ndarray:
    """Probabilities proportional to 2^{c_i}, computed with a max shift so large
    rates cannot overflow."""
    c = np.asarray(capacities, dtype=float)
    if c.ndim != 1 or c.size == 0:
        raise ValueError("capacities must be a nonempty vector")
    x = (c - c.max()) * LN2
    w = np.exp(x)
    return w / w.sum()


def optimize(decomposition: ChannelDecomposition, rho: float, n_streams: int,
             selections=None) -> PrecoderFamily:
    """Build the closed-form family: water-fill every selection with the full
    per-precoder budget, then weight precoders by their softmax rates.

    Every precoder ends up with row power n_streams, so the average power
    constraint holds for any probability vector.
    """
    if selections is None:
        selections = enumerate_selections(decomposition.rank, n_streams)
    selections = tuple(tuple(int(j) for j in s) for s in selections)
    if rho <= 0:
        raise ValueError("snr must be positive")
    rho_eff = rho / n_streams
    sig2 = decomposition.singular_values ** 2
    lambdas = np.zeros((len(selections), n_streams))
    caps = np.zeros(len(selections))
    for i, sel in enumerate(selections):
        sol = water_fill(sig2[list(sel)], rho_eff, float(n_streams))
        lambdas[i] = sol.lambdas
        caps[i] = np.sum(np.log2(1.0 + rho_eff * sig2[list(sel)] * sol.lambdas))
    family = PrecoderFamily(
        selections=selections,
        lambdas=lambdas,
        probs=activation_distribution(caps),
        n_streams=n_streams,
        snr=rho,
        decomposition=decomposition,
    )
    validate_family(family)
    return family

"""Spectral-efficiency metrics for precoder families: fixed-precoder rate, the
water-filling baseline, closed-form upper/lower bounds on the mixture rate, and
an exact Monte-Carlo estimate of it."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from . import closed_form
from .channel import ChannelDecomposition, ChannelRealization
from .family import PrecoderFamily, gain_matrix

__all__ = [
    "SeEstimate",
    "Mixture",
    "PairwiseLogZ",
    "se_fixed_precoder",
    "wf_capacity",
    "pairwise_log_z",
    "upper_bound",
    "lower_bound",
    "lower_bound_plus_gap",
    "exact_se_monte_carlo",
    "KIND_EXACT_MC",
    "KIND_UPPER",
    "KIND_LOWER",
    "KIND_LOWER_PLUS_GAP",
    "KIND_BASELINE_WF",
]

LN2 = math.log(2.0)
LOG2E = 1.0 / LN2

KIND_EXACT_MC = "exact_mc"
KIND_UPPER = "upper_bound"
KIND_LOWER = "lower_bound"
KIND_LOWER_PLUS_GAP = "lower_bound_plus_gap"
KIND_BASELINE_WF = "baseline_wf"

MIN_MC_SAMPLES = 1000
_MC_CHUNK = 20_000


@dataclass(frozen=True)
class SeEstimate:
    """A spectral-efficiency value in bits/s/Hz with its estimation pedigree."""

    value: float
    kind: str
    std_error: float = 0.0
    n_samples: int = 0


@dataclass(frozen=True)
class PairwiseLogZ:
    """log_z[i, j] = -ln det(Sigma_i + Sigma_j) for all precoder pairs."""

    log_z: np.ndarray


@dataclass(frozen=True)
class Mixture:
    """Zero-mean complex Gaussian mixture with covariances I + B_i B_i^H.

    factors has shape (n_components, dimension, r); probs is the component
    distribution.  Beamspace families land here with B_i supported on the
    selected left-singular directions; hybrid products use B = sqrt(rho_eff) H F.
    """

    factors: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.factors, dtype=complex)
        p = np.asarray(self.probs, dtype=float)
        if f.ndim != 3 or p.shape != (f.shape[0],):
            raise ValueError("factors must be (n_components, dim, r) with matching probs")
        f.setflags(write=False)
        p.setflags(write=False)
        object.__setattr__(self, "factors", f)
        object.__setattr__(self, "probs", p)

    @property
    def dimension(self) -> int:
        return self.factors.shape[1]

    @property
    def size(self) -> int:
        return self.factors.shape[0]

    @classmethod
    def from_family(cls, family: PrecoderFamily) -> "Mixture":
        dec = family.decomposition
        sel = family.selection_array()
        gains = family.rho_eff * dec.singular_values[sel] ** 2 * family.lambdas
        factors = np.empty((family.size, dec.n_rx, family.n_streams), dtype=complex)
        for i, s in enumerate(family.selections):
            factors[i] = dec.left_vectors[:, list(s)] * np.sqrt(gains[i])
        return cls(factors=factors, probs=family.probs)

    @classmethod
    def from_precoders(cls, channel_matrix, precoders, probs, rho: float,
                       n_streams: int) -> "Mixture":
        h = _as_matrix(channel_matrix)
        scale = math.sqrt(rho / n_streams)
        factors = np.stack([scale * (h @ f) for f in precoders])
        return cls(factors=factors, probs=np.asarray(probs, dtype=float))


def _as_matrix(channel) -> np.ndarray:
    if isinstance(channel, ChannelRealization):
        return channel.matrix
    return np.asarray(channel, dtype=complex)


def _as_mixture(obj) -> Mixture:
    if isinstance(obj, Mixture):
        return obj
    if isinstance(obj, PrecoderFamily):
        return Mixture.from_family(obj)
    raise TypeError(f"expected a PrecoderFamily or Mixture, got {type(obj)!r}")


def se_fixed_precoder(channel, precoder, rho: float, n_streams: int | None = None) -> SeEstimate:
    """Gaussian-signaling rate log2 det(I + (rho/n_streams) H F F^H H^H) in bits."""
    h = _as_matrix(channel)
    f = np.asarray(precoder, dtype=complex)
    ns = f.shape[1] if n_streams is None else n_streams
    norm_sq = float(np.linalg.norm(f) ** 2)
    if norm_sq > ns * (1.0 + 1e-6) + 1e-9:
        raise ValueError(f"precoder power {norm_sq} exceeds the budget {ns}")
    g = h @ f
    gram = np.eye(f.shape[1], dtype=complex) + (rho / ns) * (g.conj().T @ g)
    eig = np.linalg.eigvalsh(gram)
    return SeEstimate(value=float(np.sum(np.log2(np.maximum(eig, 1e-300)))),
                      kind=KIND_EXACT_MC)


def wf_capacity(decomposition: ChannelDecomposition, rho: float, n_streams: int) -> SeEstimate:
    """Capacity of the best single selection: water-fill the top n_streams
    subchannels with per-stream SNR rho / n_streams."""
    if decomposition.rank < n_streams:
        raise ValueError(
            f"channel rank {decomposition.rank} cannot carry {n_streams} streams"
        )
    if rho == 0:
        return SeEstimate(value=0.0, kind=KIND_BASELINE_WF)
    rho_eff = rho / n_streams
    sig2 = decomposition.singular_values[:n_streams] ** 2
    sol = closed_form.water_fill(sig2, rho_eff, float(n_streams))
    value = float(np.sum(np.log2(1.0 + rho_eff * sig2 * sol.lambdas)))
    return SeEstimate(value=value, kind=KIND_BASELINE_WF)


def pairwise_logdet_from_gains(gains: np.ndarray, dimension: int) -> np.ndarray:
    """ln det(Sigma_i + Sigma_j) for covariances diagonal in a shared basis with
    eigenvalues 1 + gains[i].  Returns the full (|F|, |F|) matrix."""
    stacked = np.log(2.0 + gains[:, None, :] + gains[None, :, :]).sum(axis=-1)
    return stacked + (dimension - gains.shape[1]) * LN2


def pairwise_log_z(obj) -> PairwiseLogZ:
    """Pairwise overlap statistics -ln det(Sigma_i + Sigma_j).

    Beamspace families share the left-singular eigenbasis, so each determinant
    collapses to a product over the union of the two selections; general
    mixtures go through a Gram determinant of size r_i + r_j.
    """
    if isinstance(obj, PrecoderFamily):
        gains = gain_matrix(obj)
        return PairwiseLogZ(log_z=-pairwise_logdet_from_gains(gains, obj.decomposition.n_rx))
    mix = _as_mixture(obj)
    n, d = mix.size, mix.dimension
    logdet = np.empty((n, n))
    for i in range(n):
        for j in range(i, n):
            z = np.concatenate([mix.factors[i], mix.factors[j]], axis=1)
            gram = np.eye(z.shape[1], dtype=complex) + 0.5 * (z.conj().T @ z)
            _, ld = np.linalg.slogdet(gram)
            logdet[i, j] = logdet[j, i] = ld + d * LN2
    return PairwiseLogZ(log_z=-logdet)


def _component_capacities(mix: Mixture) -> np.ndarray:
    grams = np.eye(mix.factors.shape[2])[None] + np.einsum(
        "fdr,fds->frs", mix.factors.conj(), mix.factors
    )
    _, ld = np.linalg.slogdet(grams)
    return ld.real / LN2


def _log_probs(p: np.ndarray) -> np.ndarray:
    lnp = np.full(p.shape, -np.inf)
    pos = p > 0
    lnp[pos] = np.log(p[pos])
    return lnp


def upper_bound(obj) -> SeEstimate:
    """Entropy-style upper bound: sum_i p_i (c_i - log2 p_i)."""
    mix = _as_mixture(obj)
    caps = _component_capacities(mix)
    p = mix.probs
    pos = p > 0
    value = float(np.sum(p[pos] * (caps[pos] - np.log2(p[pos]))))
    return SeEstimate(value=value, kind=KIND_UPPER)


def lower_bound(obj) -> SeEstimate:
    """Pairwise-overlap lower bound on the mixture rate, exact at zero SNR and
    for a single precoder up to the constant dimension * (1 - log2 e)."""
    mix = _as_mixture(obj)
    log_z = pairwise_log_z(obj).log_z
    lnp = _log_probs(mix.probs)
    ln_s = logsumexp(lnp[None, :] + log_z, axis=1)
    pos = mix.probs > 0
    value = -float(np.sum(mix.probs[pos] * ln_s[pos])) / LN2 - mix.dimension * LOG2E
    return SeEstimate(value=value, kind=KIND_LOWER)


def lower_bound_gap(dimension: int) -> float:
    """Constant offset dimension * (log2 e - 1) that recenters the lower bound."""
    return dimension * (LOG2E - 1.0)


def lower_bound_plus_gap(obj) -> SeEstimate:
    mix = _as_mixture(obj)
    lb = lower_bound(obj)
    return SeEstimate(value=lb.value + lower_bound_gap(mix.dimension),
                      kind=KIND_LOWER_PLUS_GAP)


def _chunk_seed(seed, index: int) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return np.random.SeedSequence(entropy=seed.entropy,
                                      spawn_key=tuple(seed.spawn_key) + (index,))
    return np.random.SeedSequence(entropy=seed, spawn_key=(index,))


def _mc_chunk(mix: Mixture, grams, logdets, lnp, n: int, seed,
              index: int) -> tuple:
    rng = np.random.default_rng(_chunk_seed(seed, index))
    n_comp, d, _ = mix.factors.shape
    idx = rng.choice(n_comp, size=n, p=mix.probs)
    y = (rng.standard_normal((d, n)) + 1j * rng.standard_normal((d, n))) / math.sqrt(2.0)
    for f in range(n_comp):
        cols = np.flatnonzero(idx == f)
        if cols.size:
            r = mix.factors.shape[2]
            g = (rng.standard_normal((r, cols.size))
                 + 1j * rng.standard_normal((r, cols.size))) / math.sqrt(2.0)
            y[:, cols] += mix.factors[f] @ g
    norm_sq = np.sum(np.abs(y) ** 2, axis=0)
    proj = np.einsum("fdr,dn->frn", mix.factors.conj(), y)
    sol = np.linalg.solve(grams, proj)
    quad = np.einsum("frn,frn->fn", proj.conj(), sol).real
    ln_f = -d * math.log(math.pi) - logdets[:, None] - (norm_sq[None, :] - quad)
    stat = -logsumexp(lnp[:, None] + ln_f, axis=0) / LN2
    return float(stat.sum()), float(np.dot(stat, stat)), n


def exact_se_monte_carlo(obj, n_samples: int, seed, workers: int = 1,
                         chunk_size: int = _MC_CHUNK) -> SeEstimate:
    """Monte-Carlo estimate of the exact mixture rate.

    Samples are split into fixed-size chunks with per-chunk derived seeds and
    the per-chunk sums are reduced in chunk order, so the estimate is
    bit-identical for any worker count.
    """
    if n_samples < MIN_MC_SAMPLES:
        raise ValueError(f"need at least {MIN_MC_SAMPLES} samples, got {n_samples}")
    mix = _as_mixture(obj)
    grams = np.eye(mix.factors.shape[2])[None] + np.einsum(
        "fdr,fds->frs", mix.factors.conj(), mix.factors
    )
    _, logdets = np.linalg.slogdet(grams)
    lnp = _log_probs(mix.probs)

    sizes = [chunk_size] * (n_samples // chunk_size)
    if n_samples % chunk_size:
        sizes.append(n_samples % chunk_size)

    def run(i: int) -> tuple:
        return _mc_chunk(mix, grams, logdets.real, lnp, sizes[i], seed, i)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, range(len(sizes))))
    else:
        results = [run(i) for i in range(len(sizes))]

    total = 0.0
    total_sq = 0.0
    count = 0
    for s, s2, n in results:
        total += s
        total_sq += s2
        count += n
    mean_stat = total / count
    var = max(total_sq / count - mean_stat ** 2, 0.0) * count / max(count - 1, 1)
    value = mean_stat - mix.dimension * math.log2(math.pi * math.e)
    return SeEstimate(value=value, kind=KIND_EXACT_MC,
                      std_error=math.sqrt(var / count), n_samples=count)

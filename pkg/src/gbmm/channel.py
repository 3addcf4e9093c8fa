"""Clustered multipath channel model over uniform square planar arrays."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ArrayGeometry",
    "PathParameter",
    "ChannelConfig",
    "ChannelRealization",
    "ChannelDecomposition",
    "steering_vector",
    "sample_paths",
    "assemble_channel",
    "generate_channel",
    "decompose",
    "save_channel",
    "load_channel",
]


@dataclass(frozen=True)
class ArrayGeometry:
    """Uniform square planar array with half-wavelength spacing by default."""

    n_antennas: int
    spacing_over_wavelength: float = 0.5

    def __post_init__(self):
        side = math.isqrt(max(self.n_antennas, 0))
        if self.n_antennas <= 0 or side * side != self.n_antennas:
            raise ValueError(
                f"array size must be a perfect square, got {self.n_antennas}"
            )
        if self.spacing_over_wavelength <= 0:
            raise ValueError("antenna spacing must be positive")

    @property
    def side(self) -> int:
        return math.isqrt(self.n_antennas)


@dataclass(frozen=True)
class PathParameter:
    """One propagation path: complex gain plus departure/arrival angle pairs (radians)."""

    gain: complex
    aod_azimuth: float
    aod_elevation: float
    aoa_azimuth: float
    aoa_elevation: float
    cluster_index: int


@dataclass(frozen=True)
class ChannelConfig:
    tx: ArrayGeometry
    rx: ArrayGeometry
    n_clusters: int
    n_rays: int
    angular_spread_deg: float = 10.0
    cluster_powers: tuple = None  # relative per-cluster gain variances, defaults to equal

    def __post_init__(self):
        if self.n_clusters < 1 or self.n_rays < 1:
            raise ValueError("need at least one cluster and one ray per cluster")
        if self.angular_spread_deg < 0:
            raise ValueError("angular spread must be nonnegative")
        if self.cluster_powers is not None:
            powers = tuple(float(x) for x in self.cluster_powers)
            if len(powers) != self.n_clusters:
                raise ValueError("cluster_powers length must match n_clusters")
            if any(x <= 0 for x in powers):
                raise ValueError("cluster powers must be positive")
            object.__setattr__(self, "cluster_powers", powers)

    @property
    def n_paths(self) -> int:
        return self.n_clusters * self.n_rays

    def normalized_cluster_powers(self) -> np.ndarray:
        """Per-cluster gain variances rescaled so they sum to n_clusters.

        With this scaling the assembled channel satisfies
        E[||H||_F^2] = n_tx * n_rx regardless of the relative profile.
        """
        if self.cluster_powers is None:
            return np.ones(self.n_clusters)
        powers = np.asarray(self.cluster_powers, dtype=float)
        return powers * (self.n_clusters / powers.sum())


@dataclass(frozen=True)
class ChannelRealization:
    matrix: np.ndarray
    paths: tuple
    config: ChannelConfig

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=complex)
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)
        object.__setattr__(self, "paths", tuple(self.paths))

    @property
    def n_rx(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_tx(self) -> int:
        return self.matrix.shape[1]


@dataclass(frozen=True)
class ChannelDecomposition:
    """Thin SVD of a channel matrix, truncated to the numerical rank."""

    left_vectors: np.ndarray      # (n_rx, m)
    singular_values: np.ndarray   # (m,), descending
    right_vectors: np.ndarray     # (n_tx, m)

    def __post_init__(self):
        for name in ("left_vectors", "singular_values", "right_vectors"):
            arr = np.asarray(getattr(self, name))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def rank(self) -> int:
        return len(self.singular_values)

    @property
    def n_rx(self) -> int:
        return self.left_vectors.shape[0]

    @property
    def n_tx(self) -> int:
        return self.right_vectors.shape[0]


def steering_vector(geometry: ArrayGeometry, azimuth: float, elevation: float) -> np.ndarray:
    """Array response of a square planar array for the given azimuth/elevation.

    Antennas are enumerated with the first in-plane coordinate as the outer
    loop, so entry k corresponds to (n1, n2) = divmod(k, side).  The vector
    has unit Euclidean norm.
    """
    side = geometry.side
    n1 = np.repeat(np.arange(side), side)
    n2 = np.tile(np.arange(side), side)
    phase = 2.0 * np.pi * geometry.spacing_over_wavelength * (
        n1 * np.sin(azimuth) * np.sin(elevation) + n2 * np.cos(elevation)
    )
    return np.exp(1j * phase) / np.sqrt(geometry.n_antennas)


def sample_paths(config: ChannelConfig, rng: np.random.Generator) -> tuple:
    """Draw clustered path parameters.

    Cluster mean angles are uniform on [0, 2*pi) per angle dimension; rays
    scatter around the mean with Laplacian offsets whose standard deviation
    equals the configured angular spread.  Gains are circular complex
    Gaussians with the (normalized) per-cluster variance.
    """
    spread_rad = math.radians(config.angular_spread_deg)
    scale = spread_rad / math.sqrt(2.0)  # Laplace scale giving std = spread
    powers = config.normalized_cluster_powers()
    paths = []
    for c in range(config.n_clusters):
        means = rng.uniform(0.0, 2.0 * np.pi, size=4)
        gains = (rng.standard_normal(config.n_rays) + 1j * rng.standard_normal(config.n_rays))
        gains *= math.sqrt(powers[c] / 2.0)
        if scale > 0:
            offsets = rng.laplace(0.0, scale, size=(config.n_rays, 4))
        else:
            offsets = np.zeros((config.n_rays, 4))
        for r in range(config.n_rays):
            ang = means + offsets[r]
            paths.append(PathParameter(
                gain=complex(gains[r]),
                aod_azimuth=float(ang[0]),
                aod_elevation=float(ang[1]),
                aoa_azimuth=float(ang[2]),
                aoa_elevation=float(ang[3]),
                cluster_index=c + 1,
            ))
    return tuple(paths)


def assemble_channel(paths, config: ChannelConfig) -> ChannelRealization:
    """Sum of per-path rank-one terms scaled to the standard power normalization."""
    n_tx = config.tx.n_antennas
    n_rx = config.rx.n_antennas
    rx_steer = np.column_stack([
        steering_vector(config.rx, p.aoa_azimuth, p.aoa_elevation) for p in paths
    ])
    tx_steer = np.column_stack([
        steering_vector(config.tx, p.aod_azimuth, p.aod_elevation) for p in paths
    ])
    gains = np.array([p.gain for p in paths])
    scale = math.sqrt(n_tx * n_rx / config.n_paths)
    matrix = scale * (rx_steer * gains) @ tx_steer.conj().T
    return ChannelRealization(matrix=matrix, paths=tuple(paths), config=config)


def generate_channel(config: ChannelConfig, rng: np.random.Generator) -> ChannelRealization:
    return assemble_channel(sample_paths(config, rng), config)


def decompose(channel, rank_tolerance: float = 1e-10) -> ChannelDecomposition:
    """Thin SVD truncated to singular values above rank_tolerance * sigma_max."""
    if not 0 < rank_tolerance < 1:
        raise ValueError("rank_tolerance must lie in (0, 1)")
    matrix = channel.matrix if isinstance(channel, ChannelRealization) else np.asarray(channel)
    u, s, vh = np.linalg.svd(matrix, full_matrices=False)
    if s.size == 0 or s[0] <= 0:
        raise ValueError("channel matrix is identically zero; no usable subchannels")
    keep = s > rank_tolerance * s[0]
    m = int(np.count_nonzero(keep))
    return ChannelDecomposition(
        left_vectors=u[:, :m],
        singular_values=s[:m],
        right_vectors=vh[:m].conj().T,
    )


def _geometry_to_dict(g: ArrayGeometry) -> dict:
    return {"n_antennas": g.n_antennas, "spacing_over_wavelength": g.spacing_over_wavelength}


def _config_to_dict(c: ChannelConfig) -> dict:
    return {
        "tx": _geometry_to_dict(c.tx),
        "rx": _geometry_to_dict(c.rx),
        "n_clusters": c.n_clusters,
        "n_rays": c.n_rays,
        "angular_spread_deg": c.angular_spread_deg,
        "cluster_powers": list(c.cluster_powers) if c.cluster_powers is not None else None,
    }


def config_from_dict(d: dict) -> ChannelConfig:
    return ChannelConfig(
        tx=ArrayGeometry(**d["tx"]),
        rx=ArrayGeometry(**d["rx"]),
        n_clusters=d["n_clusters"],
        n_rays=d["n_rays"],
        angular_spread_deg=d["angular_spread_deg"],
        cluster_powers=tuple(d["cluster_powers"]) if d.get("cluster_powers") else None,
    )


def save_channel(path, channel: ChannelRealization, meta: dict | None = None) -> None:
    """Write a channel realization as JSON.

    The matrix is stored row-major as [re, im] pairs; each path is a record
    with its gain and four angles, so the realization can be re-assembled
    and checked against the stored matrix.
    """
    mat = channel.matrix
    record = {
        "config": _config_to_dict(channel.config),
        "shape": list(mat.shape),
        "matrix": [[float(v.real), float(v.imag)] for v in mat.ravel(order="C")],
        "paths": [
            {
                "gain": [float(p.gain.real), float(p.gain.imag)],
                "aod_azimuth": p.aod_azimuth,
                "aod_elevation": p.aod_elevation,
                "aoa_azimuth": p.aoa_azimuth,
                "aoa_elevation": p.aoa_elevation,
                "cluster_index": p.cluster_index,
            }
            for p in channel.paths
        ],
        "meta": meta or {},
    }
    with open(path, "w") as fh:
        json.dump(record, fh)


def load_channel(path) -> ChannelRealization:
    with open(path) as fh:
        record = json.load(fh)
    config = config_from_dict(record["config"])
    shape = tuple(record["shape"])
    flat = np.array([complex(re, im) for re, im in record["matrix"]])
    matrix = flat.reshape(shape)
    paths = tuple(
        PathParameter(
            gain=complex(p["gain"][0], p["gain"][1]),
            aod_azimuth=p["aod_azimuth"],
            aod_elevation=p["aod_elevation"],
            aoa_azimuth=p["aoa_azimuth"],
            aoa_elevation=p["aoa_elevation"],
            cluster_index=p["cluster_index"],
        )
        for p in record["paths"]
    )
    return ChannelRealization(matrix=matrix, paths=paths, config=config)

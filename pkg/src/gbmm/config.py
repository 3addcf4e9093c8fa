"""Experiment configuration: desk-scale defaults, YAML loading, and validation
of the dimension rules the transceiver design relies on."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields, replace

import yaml

from .ascent import BarrierConfig
from .channel import ArrayGeometry, ChannelConfig

__all__ = ["ExperimentConfig", "load_config", "config_hash"]

SWEEP_SCHEMES = ("alg1", "alg2", "equal_p", "cwf")
HYBRID_SCHEMES = ("digital", "omp", "sic", "omp_rx", "cwf")


@dataclass(frozen=True)
class ExperimentConfig:
    # channel
    n_tx: int = 16
    n_rx: int = 9
    n_clusters: int = 3
    n_rays: int = 2
    angular_spread_deg: float = 10.0
    spacing_over_wavelength: float = 0.5
    cluster_powers: tuple | None = None
    rank_tolerance: float = 1e-10
    # transceiver
    n_streams: int = 2
    n_rf_tx: int = 2
    n_rf_rx: int = 4
    # experiment controls
    snr_grid_db: tuple = (0.0, 5.0, 10.0, 15.0, 20.0, 30.0)
    n_realizations: int = 20
    mc_samples: int = 200_000
    seed: int = 1
    threads: int = 1
    family: str = "full"            # "full" enumerates all selections, "bbs" keeps the first
    schemes: tuple = ("alg2", "equal_p", "cwf")
    hybrid_schemes: tuple = ("digital", "omp", "sic", "omp_rx", "cwf")
    ofdm_carriers: int = 16
    codec_bits: int = 12
    codec_target_p: tuple | None = None
    codec_snr_db: float = 20.0
    barrier: BarrierConfig = field(default_factory=BarrierConfig)

    def __post_init__(self):
        object.__setattr__(self, "snr_grid_db", tuple(float(s) for s in self.snr_grid_db))
        object.__setattr__(self, "schemes", tuple(self.schemes))
        object.__setattr__(self, "hybrid_schemes", tuple(self.hybrid_schemes))
        if self.cluster_powers is not None:
            object.__setattr__(self, "cluster_powers", tuple(self.cluster_powers))

    def channel_config(self) -> ChannelConfig:
        return ChannelConfig(
            tx=ArrayGeometry(self.n_tx, self.spacing_over_wavelength),
            rx=ArrayGeometry(self.n_rx, self.spacing_over_wavelength),
            n_clusters=self.n_clusters,
            n_rays=self.n_rays,
            angular_spread_deg=self.angular_spread_deg,
            cluster_powers=self.cluster_powers,
        )

    def validate(self) -> None:
        self.channel_config()  # perfect-square and positivity checks
        if self.n_streams < 1:
            raise ValueError("n_streams must be at least 1")
        if self.n_streams > self.n_rf_tx:
            raise ValueError(
                f"data streams cannot exceed transmit RF chains: n_streams="
                f"{self.n_streams} > n_rf_tx={self.n_rf_tx}"
            )
        if self.family == "full" and self.n_clusters * self.n_rays <= self.n_streams:
            raise ValueError(
                "index modulation needs more parallel subchannels than streams: "
                f"n_clusters*n_rays={self.n_clusters * self.n_rays} must exceed "
                f"n_streams={self.n_streams}"
            )
        if self.family not in ("full", "bbs"):
            raise ValueError(f"family must be 'full' or 'bbs', got {self.family!r}")
        if "omp_rx" in self.hybrid_schemes and self.n_rf_rx <= self.n_streams:
            raise ValueError(
                "receive RF chains must exceed the stream count for the precoder "
                f"index to survive combining: n_rf_rx={self.n_rf_rx} <= "
                f"n_streams={self.n_streams}"
            )
        for s in self.schemes:
            if s not in SWEEP_SCHEMES:
                raise ValueError(f"unknown sweep scheme {s!r}; pick from {SWEEP_SCHEMES}")
        for s in self.hybrid_schemes:
            if s not in HYBRID_SCHEMES:
                raise ValueError(f"unknown hybrid scheme {s!r}; pick from {HYBRID_SCHEMES}")
        if not self.snr_grid_db:
            raise ValueError("snr_grid_db must be nonempty")
        if self.n_realizations < 1:
            raise ValueError("n_realizations must be at least 1")
        if self.mc_samples < 1000:
            raise ValueError("mc_samples below 1000 gives meaningless error bars")
        if self.threads < 1:
            raise ValueError("threads must be at least 1")
        if self.ofdm_carriers < 1:
            raise ValueError("ofdm_carriers must be at least 1")
        if self.codec_bits < 1:
            raise ValueError("codec_bits must be at least 1")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["barrier"] = asdict(self.barrier)
        return d


def load_config(path=None, **overrides) -> ExperimentConfig:
    """Build a config from defaults, an optional YAML file, and overrides."""
    data = {}
    if path is not None:
        with open(path) as fh:
            data = yaml.safe_load(fh) or {}
        if not isinstance(data, dict):
            raise ValueError(f"config file {path} must hold a mapping")
    data.update({k: v for k, v in overrides.items() if v is not None})
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    barrier = data.pop("barrier", None)
    config = ExperimentConfig(**data)
    if barrier is not None:
        if isinstance(barrier, dict):
            if "t_schedule" in barrier:
                barrier["t_schedule"] = tuple(barrier["t_schedule"])
            barrier = BarrierConfig(**barrier)
        config = replace(config, barrier=barrier)
    config.validate()
    return config


def config_hash(config: ExperimentConfig) -> str:
    blob = json.dumps(config.to_dict(), sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()

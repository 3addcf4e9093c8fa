"""Experiment runners behind the CLI subcommands.

Every run derives all randomness from the master seed through fixed integer
tags, computes each channel realization independently, and reduces results in
realization order, so outputs are bit-identical for any thread count.
"""

from __future__ import annotations

import csv
import json
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import ascent, closed_form, metrics
from .channel import decompose, generate_channel, save_channel
from .codec import build_partition, codec_report
from .config import ExperimentConfig, config_hash
from .family import build_precoder, enumerate_selections, uniform_probs
from .hybrid import (
    design_combiner,
    ofdm_shared_analog,
    omp_hybrid,
    omp_hybrid_combiner,
    receive_dictionary,
    sic_hybrid,
    transmit_dictionary,
)
from .metrics import Mixture, exact_se_monte_carlo, se_fixed_precoder, wf_capacity

__all__ = [
    "run_sweep",
    "run_convergence",
    "run_hybrid",
    "run_ofdm",
    "run_codec",
    "generate_channels",
    "write_rows_csv",
    "write_run_metadata",
    "SWEEP_COLUMNS",
    "TRACE_COLUMNS",
]

# stream tags for seed derivation (documented in the README)
TAG_CHANNEL = 1
TAG_MC = 2
SCHEME_IDS = {
    "alg2": 0, "alg1": 1, "equal_p": 2, "cwf": 3,
    "digital": 4, "omp": 5, "sic": 6, "omp_rx": 7,
    "gbmm_digital": 8, "gbmm_hybrid": 9, "bbs_digital": 10, "bbs_hybrid": 11,
}
KIND_ORDER = (
    metrics.KIND_EXACT_MC,
    metrics.KIND_UPPER,
    metrics.KIND_LOWER,
    metrics.KIND_LOWER_PLUS_GAP,
    metrics.KIND_BASELINE_WF,
)

SWEEP_COLUMNS = ("snr_db", "scheme", "kind", "mean", "stderr", "n")
TRACE_COLUMNS = ("series", "iteration", "stage_t", "objective", "lower_bound",
                 "lower_bound_plus_gap", "eta_p", "eta_lambda", "active_p",
                 "active_lambda")


def channel_seed(config: ExperimentConfig, realization: int, carrier: int = 0):
    return np.random.SeedSequence([config.seed, TAG_CHANNEL, realization, carrier])


def mc_seed(config: ExperimentConfig, realization: int, snr_index: int,
            scheme: str, carrier: int = 0):
    return np.random.SeedSequence(
        [config.seed, TAG_MC, realization, carrier, snr_index, SCHEME_IDS[scheme]]
    )


def make_channel(config: ExperimentConfig, realization: int, carrier: int = 0):
    rng = np.random.default_rng(channel_seed(config, realization, carrier))
    channel = generate_channel(config.channel_config(), rng)
    return channel, decompose(channel, config.rank_tolerance)


def _selections(config: ExperimentConfig, rank: int):
    if config.family == "bbs":
        return (tuple(range(config.n_streams)),)
    return enumerate_selections(rank, config.n_streams)


def _map_realizations(fn, config: ExperimentConfig):
    indices = range(config.n_realizations)
    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            return list(pool.map(fn, indices))
    return [fn(r) for r in indices]


def _aggregate(per_real, scheme_order):
    """Collapse per-realization {(scheme, snr, kind): value} dicts into rows
    with mean and standard error, in a deterministic order."""
    keys = per_real[0].keys()
    snrs = sorted({k[1] for k in keys})
    rows = []
    for scheme in scheme_order:
        for snr in snrs:
            for kind in KIND_ORDER:
                key = (scheme, snr, kind)
                if key not in keys:
                    continue
                vals = np.array([d[key] for d in per_real], dtype=float)
                stderr = float(vals.std(ddof=1) / np.sqrt(len(vals))) if len(vals) > 1 else 0.0
                rows.append({
                    "snr_db": snr,
                    "scheme": scheme,
                    "kind": kind,
                    "mean": float(vals.mean()),
                    "stderr": stderr,
                    "n": len(vals),
                })
    return rows


def _family_metrics(family, seed, config):
    mc = exact_se_monte_carlo(family, config.mc_samples, seed, workers=1)
    return {
        metrics.KIND_EXACT_MC: mc.value,
        metrics.KIND_UPPER: metrics.upper_bound(family).value,
        metrics.KIND_LOWER_PLUS_GAP: metrics.lower_bound_plus_gap(family).value,
    }


def run_sweep(config: ExperimentConfig):
    """SNR sweep of the selected transmission schemes over fading realizations."""
    config.validate()

    def one(r: int) -> dict:
        _, dec = make_channel(config, r)
        sels = _selections(config, dec.rank)
        out = {}
        for si, snr_db in enumerate(config.snr_grid_db):
            rho = 10.0 ** (snr_db / 10.0)
            if "cwf" in config.schemes:
                out[("cwf", snr_db, metrics.KIND_BASELINE_WF)] = wf_capacity(
                    dec, rho, config.n_streams).value
            fam = None
            if {"alg2", "equal_p", "alg1"} & set(config.schemes):
                fam = closed_form.optimize(dec, rho, config.n_streams, selections=sels)
            if "alg2" in config.schemes:
                vals = _family_metrics(fam, mc_seed(config, r, si, "alg2"), config)
                for kind, v in vals.items():
                    out[("alg2", snr_db, kind)] = v
            if "equal_p" in config.schemes:
                fam_eq = uniform_probs(fam)
                vals = _family_metrics(fam_eq, mc_seed(config, r, si, "equal_p"), config)
                for kind, v in vals.items():
                    out[("equal_p", snr_db, kind)] = v
            if "alg1" in config.schemes:
                res = ascent.optimize(fam, config.barrier)
                vals = _family_metrics(res.family, mc_seed(config, r, si, "alg1"), config)
                for kind, v in vals.items():
                    out[("alg1", snr_db, kind)] = v
        return out

    per_real = _map_realizations(one, config)
    order = [s for s in ("alg1", "alg2", "equal_p", "cwf") if s in config.schemes]
    return _aggregate(per_real, order)


def run_convergence(config: ExperimentConfig, snr_db: float):
    """Iteration trace of the barrier ascent with and without gradient
    modification on one realization, plus the closed-form reference levels."""
    config.validate()
    _, dec = make_channel(config, 0)
    rho = 10.0 ** (snr_db / 10.0)
    fam = closed_form.optimize(dec, rho, config.n_streams,
                               selections=_selections(config, dec.rank))
    rows = []
    for label, modified in (("mod_on", True), ("mod_off", False)):
        cfg_b = ascent.BarrierConfig(
            t_schedule=config.barrier.t_schedule,
            halting_epsilon=config.barrier.halting_epsilon,
            prune_threshold=config.barrier.prune_threshold,
            line_search_shrink=config.barrier.line_search_shrink,
            line_search_slope=config.barrier.line_search_slope,
            max_iterations=config.barrier.max_iterations,
            gradient_modification=modified,
        )
        result = ascent.optimize(fam, cfg_b)
        for row in result.trace:
            rows.append({
                "series": label,
                "iteration": row.iteration,
                "stage_t": row.stage_t,
                "objective": row.objective,
                "lower_bound": row.lower_bound,
                "lower_bound_plus_gap": row.lower_bound_plus_gap,
                "eta_p": row.eta_p,
                "eta_lambda": row.eta_lambda,
                "active_p": row.active_p,
                "active_lambda": row.active_lambda,
            })
    for label, level in (
        ("alg2_ref", metrics.lower_bound_plus_gap(fam).value),
        ("cwf_ref", wf_capacity(dec, rho, config.n_streams).value),
    ):
        rows.append({
            "series": label, "iteration": "", "stage_t": "", "objective": "",
            "lower_bound": "", "lower_bound_plus_gap": level,
            "eta_p": "", "eta_lambda": "", "active_p": "", "active_lambda": "",
        })
    return rows


def _whitened_effective_channel(combiner_product, channel_matrix):
    """Rotate the channel through a (possibly non-orthonormal) combiner and
    whiten the combined noise."""
    gram = combiner_product.conj().T @ combiner_product
    w, v = np.linalg.eigh(gram)
    w = np.maximum(w.real, 1e-12 * w.real.max())
    inv_sqrt = (v / np.sqrt(w)) @ v.conj().T
    return inv_sqrt @ combiner_product.conj().T @ channel_matrix


def run_hybrid(config: ExperimentConfig):
    """SE of digital, fully-connected, and partially-connected hybrid families,
    optionally through a hybrid combiner, across the SNR grid."""
    config.validate()

    def one(r: int) -> dict:
        channel, dec = make_channel(config, r)
        sels = _selections(config, dec.rank)
        dict_tx = transmit_dictionary(channel)
        out = {}
        for si, snr_db in enumerate(config.snr_grid_db):
            rho = 10.0 ** (snr_db / 10.0)
            if "cwf" in config.hybrid_schemes:
                out[("cwf", snr_db, metrics.KIND_BASELINE_WF)] = wf_capacity(
                    dec, rho, config.n_streams).value
            fam = closed_form.optimize(dec, rho, config.n_streams, selections=sels)
            targets = [build_precoder(dec, s, lam)
                       for s, lam in zip(fam.selections, fam.lambdas)]
            if "digital" in config.hybrid_schemes:
                mc = exact_se_monte_carlo(fam, config.mc_samples,
                                          mc_seed(config, r, si, "digital"))
                out[("digital", snr_db, metrics.KIND_EXACT_MC)] = mc.value
            if "omp" in config.hybrid_schemes:
                prods = [omp_hybrid(t, dict_tx, config.n_rf_tx).product for t in targets]
                mix = Mixture.from_precoders(channel.matrix, prods, fam.probs,
                                             rho, config.n_streams)
                mc = exact_se_monte_carlo(mix, config.mc_samples,
                                          mc_seed(config, r, si, "omp"))
                out[("omp", snr_db, metrics.KIND_EXACT_MC)] = mc.value
            if "sic" in config.hybrid_schemes:
                prods = [sic_hybrid(t, config.n_rf_tx).product for t in targets]
                mix = Mixture.from_precoders(channel.matrix, prods, fam.probs,
                                             rho, config.n_streams)
                mc = exact_se_monte_carlo(mix, config.mc_samples,
                                          mc_seed(config, r, si, "sic"))
                out[("sic", snr_db, metrics.KIND_EXACT_MC)] = mc.value
            if "omp_rx" in config.hybrid_schemes:
                w_digital = design_combiner(dec, config.n_rf_rx)
                w_fac = omp_hybrid_combiner(w_digital, receive_dictionary(channel),
                                            config.n_rf_rx)
                eff = _whitened_effective_channel(w_fac.product, channel.matrix)
                dec_eff = decompose(eff, config.rank_tolerance)
                fam_eff = closed_form.optimize(
                    dec_eff, rho, config.n_streams,
                    selections=_selections(config, dec_eff.rank))
                prods = [omp_hybrid(build_precoder(dec_eff, s, lam), dict_tx,
                                    config.n_rf_tx).product
                         for s, lam in zip(fam_eff.selections, fam_eff.lambdas)]
                mix = Mixture.from_precoders(eff, prods, fam_eff.probs,
                                             rho, config.n_streams)
                mc = exact_se_monte_carlo(mix, config.mc_samples,
                                          mc_seed(config, r, si, "omp_rx"))
                out[("omp_rx", snr_db, metrics.KIND_EXACT_MC)] = mc.value
        return out

    per_real = _map_realizations(one, config)
    order = [s for s in HYBRID_ORDER if s in config.hybrid_schemes]
    return _aggregate(per_real, order)


HYBRID_ORDER = ("digital", "omp", "sic", "omp_rx", "cwf")
OFDM_ORDER = ("gbmm_digital", "gbmm_hybrid", "bbs_digital", "bbs_hybrid")


def run_ofdm(config: ExperimentConfig):
    """Multicarrier study: per-carrier families with one shared analog precoder
    per index, against the single-selection baseline, averaged over carriers."""
    config.validate()
    n_carriers = config.ofdm_carriers

    def one(r: int) -> dict:
        chans = [make_channel(config, r, k) for k in range(n_carriers)]
        rank = min(dec.rank for _, dec in chans)
        sels = _selections(config, rank)
        dict_union = np.concatenate(
            [transmit_dictionary(ch) for ch, _ in chans], axis=1)
        out = {}
        for si, snr_db in enumerate(config.snr_grid_db):
            rho = 10.0 ** (snr_db / 10.0)
            fams = [closed_form.optimize(dec, rho, config.n_streams, selections=sels)
                    for _, dec in chans]
            digital = [exact_se_monte_carlo(
                fams[k], config.mc_samples,
                mc_seed(config, r, si, "gbmm_digital", carrier=k)).value
                for k in range(n_carriers)]
            out[("gbmm_digital", snr_db, metrics.KIND_EXACT_MC)] = float(np.mean(digital))

            per_index = []
            for i, sel in enumerate(sels):
                targets = [build_precoder(chans[k][1], sel, fams[k].lambdas[i])
                           for k in range(n_carriers)]
                analog, digitals = ofdm_shared_analog(targets, dict_union, config.n_rf_tx)
                per_index.append([analog @ d for d in digitals])
            hybrid_se = []
            for k in range(n_carriers):
                mix = Mixture.from_precoders(
                    chans[k][0].matrix, [per_index[i][k] for i in range(len(sels))],
                    fams[k].probs, rho, config.n_streams)
                hybrid_se.append(exact_se_monte_carlo(
                    mix, config.mc_samples,
                    mc_seed(config, r, si, "gbmm_hybrid", carrier=k)).value)
            out[("gbmm_hybrid", snr_db, metrics.KIND_EXACT_MC)] = float(np.mean(hybrid_se))

            bbs_digital = [wf_capacity(dec, rho, config.n_streams).value
                           for _, dec in chans]
            out[("bbs_digital", snr_db, metrics.KIND_BASELINE_WF)] = float(np.mean(bbs_digital))

            bbs_sel = tuple(range(config.n_streams))
            bbs_targets = []
            for _, dec in chans:
                sol = closed_form.water_fill(
                    dec.singular_values[:config.n_streams] ** 2,
                    rho / config.n_streams, float(config.n_streams))
                bbs_targets.append(build_precoder(dec, bbs_sel, sol.lambdas))
            analog, digitals = ofdm_shared_analog(bbs_targets, dict_union, config.n_rf_tx)
            bbs_hybrid = [se_fixed_precoder(chans[k][0], analog @ digitals[k], rho).value
                          for k in range(n_carriers)]
            out[("bbs_hybrid", snr_db, metrics.KIND_EXACT_MC)] = float(np.mean(bbs_hybrid))
        return out

    per_real = _map_realizations(one, config)
    return _aggregate(per_real, OFDM_ORDER)


def run_codec(config: ExperimentConfig):
    """Partition a codebook for the configured target distribution, or for the
    closed-form family of realization 0 when none is given."""
    config.validate()
    if config.codec_target_p is not None:
        target = np.asarray(config.codec_target_p, dtype=float)
        source = "config"
    else:
        _, dec = make_channel(config, 0)
        rho = 10.0 ** (config.codec_snr_db / 10.0)
        fam = closed_form.optimize(dec, rho, config.n_streams,
                                   selections=_selections(config, dec.rank))
        target = fam.probs
        source = f"closed-form family at {config.codec_snr_db} dB"
    partition = build_partition(target, config.codec_bits)
    report = codec_report(partition)
    report["target_p"] = target.tolist()
    report["target_source"] = source
    return report


def generate_channels(config: ExperimentConfig, out_dir):
    """Write every (realization, carrier 0) channel as a replayable JSON file."""
    config.validate()
    paths = []
    for r in range(config.n_realizations):
        channel, _ = make_channel(config, r)
        path = f"{out_dir}/channel_r{r:03d}.json"
        save_channel(path, channel, meta={
            "seed": config.seed, "realization": r,
            "config_sha256": config_hash(config),
        })
        paths.append(path)
    return paths


def _fmt(value) -> str:
    # np.float64 reprs as "np.float64(...)"; plain float repr round-trips
    if isinstance(value, float):
        return repr(float(value))
    return str(value)


def write_rows_csv(rows, path, columns) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row[c]) for c in columns])


def write_run_metadata(path, command: str, config: ExperimentConfig) -> None:
    from . import __version__
    meta = {
        "command": command,
        "package_version": __version__,
        "seed": config.seed,
        "threads": config.threads,
        "config_sha256": config_hash(config),
        "config": config.to_dict(),
    }
    with open(path, "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)

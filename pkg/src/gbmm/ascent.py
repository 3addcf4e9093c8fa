"""Projected gradient ascent with a logarithmic barrier for the pairwise SE
lower bound, jointly over activation probabilities and per-stream powers."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import logsumexp

from .family import PrecoderFamily, validate_family

__all__ = [
    "BarrierConfig",
    "AscentContext",
    "AscentResult",
    "TraceRow",
    "barrier_objective",
    "lower_bound_value",
    "grad_p",
    "grad_lambda",
    "project_p",
    "project_lambda",
    "rescale_lambda",
    "line_search",
    "optimize",
]

LN2 = math.log(2.0)
LOG2E = 1.0 / LN2
STEP_UNDERFLOW = 1e-16


@dataclass(frozen=True)
class BarrierConfig:
    t_schedule: tuple = (1e2, 1e3, 1e4, 1e5)
    halting_epsilon: float = 1e-3
    prune_threshold: float = 2e-3
    line_search_shrink: float = 0.7
    line_search_slope: float = 0.3
    max_iterations: int = 400
    gradient_modification: bool = True

    def __post_init__(self):
        sched = tuple(float(t) for t in self.t_schedule)
        if not sched or any(t <= 0 for t in sched):
            raise ValueError("t_schedule must be nonempty and positive")
        if list(sched) != sorted(sched):
            raise ValueError("t_schedule must be increasing")
        if not 0 < self.line_search_shrink < 1:
            raise ValueError("line_search_shrink must lie in (0, 1)")
        if not 0 < self.line_search_slope < 1:
            raise ValueError("line_search_slope must lie in (0, 1)")
        if self.halting_epsilon <= 0 or self.prune_threshold < 0:
            raise ValueError("halting_epsilon must be positive, prune_threshold nonnegative")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        object.__setattr__(self, "t_schedule", sched)


@dataclass(frozen=True)
class AscentContext:
    """Static problem data: selected subchannel indices and their gains."""

    selection: np.ndarray   # (|F|, n_streams) int
    sig2_sel: np.ndarray    # (|F|, n_streams) squared singular values
    rho_eff: float
    n_rx: int
    m: int
    n_streams: int

    @classmethod
    def from_family(cls, family: PrecoderFamily) -> "AscentContext":
        sel = family.selection_array()
        dec = family.decomposition
        return cls(
            selection=sel,
            sig2_sel=dec.singular_values[sel] ** 2,
            rho_eff=family.rho_eff,
            n_rx=dec.n_rx,
            m=dec.rank,
            n_streams=family.n_streams,
        )

    @property
    def size(self) -> int:
        return self.selection.shape[0]


@dataclass(frozen=True)
class TraceRow:
    iteration: int
    stage_t: float
    objective: float
    lower_bound: float
    lower_bound_plus_gap: float
    eta_p: float
    eta_lambda: float
    active_p: int
    active_lambda: int


@dataclass(frozen=True)
class AscentResult:
    family: PrecoderFamily
    trace: tuple
    converged: bool


def _gains(lam: np.ndarray, ctx: AscentContext) -> np.ndarray:
    g = np.zeros((ctx.size, ctx.m))
    rows = np.arange(ctx.size)[:, None]
    g[rows, ctx.selection] = ctx.rho_eff * ctx.sig2_sel * lam
    return g


def _log_terms(p: np.ndarray, lam: np.ndarray, ctx: AscentContext):
    """Pairwise -ln det(Sigma_i + Sigma_j) and the row log-sums ln S_i."""
    g = _gains(lam, ctx)
    ln_det = np.log(2.0 + g[:, None, :] + g[None, :, :]).sum(axis=-1)
    ln_z = -(ln_det + (ctx.n_rx - ctx.m) * LN2)
    ln_s = logsumexp(np.log(p)[None, :] + ln_z, axis=1)
    return g, ln_z, ln_s


def lower_bound_value(p: np.ndarray, lam: np.ndarray, ctx: AscentContext) -> float:
    """Pairwise SE lower bound in bits at an interior point."""
    _, _, ln_s = _log_terms(p, lam, ctx)
    return -float(p @ ln_s) / LN2 - ctx.n_rx * LOG2E


def barrier_objective(p: np.ndarray, lam: np.ndarray, ctx: AscentContext,
                      t_b: float) -> float:
    """Lower bound plus (1/t_b) * sum of logs; -inf outside the open orthant."""
    if np.any(p <= 0) or np.any(lam <= 0):
        return -np.inf
    rl = lower_bound_value(p, lam, ctx)
    return rl + (np.log(p).sum() + np.log(lam).sum()) / t_b


def _interior_or_raise(p: np.ndarray, lam: np.ndarray) -> None:
    if np.any(p <= 0) or np.any(lam <= 0):
        raise ValueError("gradients are defined only at strictly interior points")


def grad_p(p: np.ndarray, lam: np.ndarray, ctx: AscentContext, t_b: float) -> np.ndarray:
    _interior_or_raise(p, lam)
    _, ln_z, ln_s = _log_terms(p, lam, ctx)
    lnp = np.log(p)
    # column sums of p_i z_{i,a} / S_i; every exponent is a ratio, so no overflow
    resp = np.exp(lnp[:, None] + ln_z - ln_s[:, None])
    return -(ln_s + resp.sum(axis=0)) / LN2 + 1.0 / (t_b * p)


def grad_lambda(p: np.ndarray, lam: np.ndarray, ctx: AscentContext, t_b: float) -> np.ndarray:
    _interior_or_raise(p, lam)
    g, ln_z, ln_s = _log_terms(p, lam, ctx)
    lnp = np.log(p)
    row_resp = np.exp(lnp[None, :] + ln_z - ln_s[:, None])  # p_k z_ik / S_i
    col_resp = np.exp(lnp[:, None] + ln_z - ln_s[:, None])  # p_i z_ik / S_i
    # d[i, c, s] = 2 + g_i(j) + g_c(j) at the stream-s subchannel j of precoder c
    g_sel = np.take_along_axis(g, ctx.selection, axis=1)     # (F, Ns)
    g_at = g[:, ctx.selection]                               # (F_i, F_c, Ns)
    inv_d = 1.0 / (2.0 + g_sel[None, :, :] + g_at)
    term1 = np.einsum("ck,kcs->cs", row_resp, inv_d)
    term2 = np.einsum("ic,ics->cs", col_resp, inv_d)
    coeff = ctx.rho_eff * ctx.sig2_sel * p[:, None] / LN2
    return coeff * (term1 + term2) + 1.0 / (t_b * lam)


def project_p(grad: np.ndarray, active: np.ndarray | None = None) -> np.ndarray:
    """Zero-sum ascent direction: center the gradient over the active set and
    freeze the rest."""
    d = np.zeros_like(grad)
    mask = np.ones(grad.shape, dtype=bool) if active is None else active
    if not np.any(mask):
        return d
    d[mask] = grad[mask] - grad[mask].mean()
    return d


def project_lambda(grad: np.ndarray, probs: np.ndarray,
                   active: np.ndarray | None = None) -> np.ndarray:
    """Direction orthogonal to the power-budget normal q = probs replicated per
    stream: subtract (q^T grad / q^T 1) over the active set."""
    flat = grad.ravel()
    n_streams = grad.shape[1]
    q = np.repeat(probs, n_streams)
    mask = np.ones(flat.shape, dtype=bool) if active is None else active.ravel()
    d = np.zeros_like(flat)
    denom = q[mask].sum()
    if denom <= 1e-300:
        return d.reshape(grad.shape)
    d[mask] = flat[mask] - (q[mask] @ flat[mask]) / denom
    return d.reshape(grad.shape)


def rescale_lambda(lam: np.ndarray, probs: np.ndarray, n_streams: int) -> np.ndarray:
    """One multiplicative factor restoring the average power sum_i p_i b_i = n_streams."""
    power = float(probs @ lam.sum(axis=1))
    if power <= 0:
        raise ValueError("cannot rescale a power allocation with zero average power")
    return lam * (n_streams / power)


def line_search(p: np.ndarray, lam: np.ndarray, ctx: AscentContext,
                direction: np.ndarray, which: str, t_b: float,
                config: BarrierConfig) -> float:
    """Backtracking step size along the projected direction.

    The p step is evaluated through the power rescale it triggers, so an
    accepted step never decreases the feasible objective; the slope term uses
    the matching directional derivative.  Returns 0 when no positive step
    satisfies the sufficient-increase test before underflow.
    """
    f0 = barrier_objective(p, lam, ctx, t_b)
    if not np.isfinite(f0):
        raise ValueError("line search requires a strictly interior starting point")

    if which == "p":
        d = np.asarray(direction, dtype=float)
        gp = grad_p(p, lam, ctx, t_b)
        gl = grad_lambda(p, lam, ctx, t_b).ravel()
        lam_flat = lam.ravel()
        budget_rate = float(np.repeat(d, ctx.n_streams) @ lam_flat) / ctx.n_streams
        slope = float(gp @ d) - budget_rate * float(gl @ lam_flat)

        def value(eta: float) -> float:
            p_new = p + eta * d
            if np.any(p_new <= 0):
                return -np.inf
            return barrier_objective(p_new, rescale_lambda(lam, p_new, ctx.n_streams),
                                     ctx, t_b)
    elif which == "lam":
        d = np.asarray(direction, dtype=float)
        gl = grad_lambda(p, lam, ctx, t_b)
        slope = float(gl.ravel() @ d.ravel())

        def value(eta: float) -> float:
            return barrier_objective(p, lam + eta * d, ctx, t_b)
    else:
        raise ValueError("which must be 'p' or 'lam'")

    if slope <= 0:
        return 0.0
    eta = 1.0
    while eta >= STEP_UNDERFLOW:
        f_eta = value(eta)
        if np.isfinite(f_eta) and f_eta >= f0 + config.line_search_slope * eta * slope:
            return eta
        eta *= config.line_search_shrink
    return 0.0


def optimize(family: PrecoderFamily, config: BarrierConfig | None = None) -> AscentResult:
    """Alternating barrier ascent over (p, lambda).

    Starts from the uniform distribution with unit powers, runs one p step and
    one lambda step per iteration with the power rescale in between, freezes
    coordinates below the prune threshold when gradient modification is on,
    and tightens the barrier along the t schedule with warm starts.
    """
    config = config or BarrierConfig()
    ctx = AscentContext.from_family(family)
    n, ns = ctx.size, ctx.n_streams
    p = np.full(n, 1.0 / n)
    lam = np.ones((n, ns))
    tau = config.prune_threshold
    trace = []
    iteration = 0
    converged = False

    for t_b in config.t_schedule:
        converged = False
        for _ in range(config.max_iterations):
            if config.gradient_modification:
                active_p = p >= tau
                if not np.any(active_p):
                    active_p = np.ones(n, dtype=bool)
            else:
                active_p = np.ones(n, dtype=bool)
            dp = project_p(grad_p(p, lam, ctx, t_b), active_p)
            eta_p = line_search(p, lam, ctx, dp, "p", t_b, config)
            if eta_p > 0:
                p = p + eta_p * dp
                lam = rescale_lambda(lam, p, ns)

            if config.gradient_modification:
                active_l = lam >= tau
                if not np.any(active_l):
                    active_l = np.ones_like(lam, dtype=bool)
            else:
                active_l = np.ones_like(lam, dtype=bool)
            dl = project_lambda(grad_lambda(p, lam, ctx, t_b), p, active_l)
            eta_l = line_search(p, lam, ctx, dl, "lam", t_b, config)
            if eta_l > 0:
                lam = lam + eta_l * dl

            iteration += 1
            rl = lower_bound_value(p, lam, ctx)
            trace.append(TraceRow(
                iteration=iteration,
                stage_t=t_b,
                objective=barrier_objective(p, lam, ctx, t_b),
                lower_bound=rl,
                lower_bound_plus_gap=rl + ctx.n_rx * (LOG2E - 1.0),
                eta_p=eta_p,
                eta_lambda=eta_l,
                active_p=int(active_p.sum()),
                active_lambda=int(active_l.sum()),
            ))
            if (eta_p * np.linalg.norm(dp) <= config.halting_epsilon * np.linalg.norm(p)
                    and eta_l * np.linalg.norm(dl) <= config.halting_epsilon * np.linalg.norm(lam)):
                converged = True
                break

    if not converged:
        warnings.warn("barrier ascent stopped at max_iterations before meeting "
                      "the halting test; returning the last iterate")
    out = replace(family, probs=p, lambdas=rescale_lambda(lam, p, ns))
    validate_family(out)
    return AscentResult(family=out, trace=tuple(trace), converged=converged)

"""Wasserstein-2 estimates between finite-dimensional projections of two path laws.

A probe projection ``u -> (u(t_1, x_1), ..., u(t_m, x_m))`` is 1-Lipschitz
from the uniform norm to the max-norm on R^m, so W2 of projected laws under
the max-norm ground metric lower-bounds W2 on path space. That makes every
check here a necessary condition for the transport inequality, never a proof.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg
from scipy.special import logsumexp

from cwt2.errors import NumericalError, ShapeError

METRICS = ("sup", "euclidean")


@dataclass(frozen=True)
class Projection:
    probes: tuple

    def __post_init__(self):
        probes = tuple(tuple(int(c) for c in p) for p in self.probes)
        if not 1 <= len(probes) <= 32:
            raise ValueError(f"a projection needs between 1 and 32 probes, got {len(probes)}")
        if any(len(p) != 4 for p in probes):
            raise ValueError("probes are (step, i, j, k) tuples")
        object.__setattr__(self, "probes", probes)

    @property
    def m(self) -> int:
        return len(self.probes)

    def check_grid(self, grid):
        n = grid.points_per_axis
        for step, *ijk in self.probes:
            if not 0 <= step <= grid.n_steps or not all(0 <= c < n for c in ijk):
                raise ValueError(f"probe {(step, *ijk)} is not on the simulated grid")


@dataclass
class EmpiricalLaw:
    samples: np.ndarray
    law_tag: str = "P"

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float)
        if s.ndim == 1:
            s = s[:, None]
        if s.ndim != 2 or s.shape[0] < 2:
            raise ShapeError(f"samples must be an n x m matrix with n >= 2, got shape {s.shape}")
        if not np.all(np.isfinite(s)):
            raise ValueError("samples must be finite")
        self.samples = s

    @property
    def n(self):
        return self.samples.shape[0]

    @property
    def m(self):
        return self.samples.shape[1]


@dataclass
class W2Estimate:
    value: float
    error: float
    reg: float
    method: str
    iterations: int = 0


# ------------------------------------------------------------------ Gaussian


def _psd_sqrt(a):
    w, v = np.linalg.eigh(a)
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.T


def w2_gaussian_exact(mean1, cov1, mean2, cov2, atol=1e-10) -> float:
    """W2 (Euclidean ground metric) between two Gaussian laws."""
    m1, m2 = np.atleast_1d(np.asarray(mean1, float)), np.atleast_1d(np.asarray(mean2, float))
    s1, s2 = np.atleast_2d(np.asarray(cov1, float)), np.atleast_2d(np.asarray(cov2, float))
    if m1.shape != m2.shape or s1.shape != s2.shape or s1.shape != (m1.size, m1.size):
        raise ShapeError("mean/covariance dimensions do not match")
    for s in (s1, s2):
        if not np.allclose(s, s.T, atol=atol) or np.linalg.eigvalsh(s).min() < -atol:
            raise ValueError("covariance matrices must be symmetric positive semidefinite")
    r2 = _psd_sqrt(s2)
    cross = linalg.sqrtm(r2 @ s1 @ r2)
    cross = np.real_if_close(cross, tol=1e6).real
    val = float(np.sum((m1 - m2) ** 2) + np.trace(s1 + s2 - 2.0 * cross))
    return math.sqrt(max(val, 0.0))


# ------------------------------------------------------------------- exact 1-D


def w2_sorted(x, y) -> float:
    """Exact W2 between two 1-D empirical laws (quantile coupling)."""
    x, y = np.sort(np.ravel(x)), np.sort(np.ravel(y))
    if x.size == y.size:
        return float(np.sqrt(np.mean((x - y) ** 2)))
    # piecewise-constant quantile functions on the merged breakpoints
    t = np.union1d(np.arange(1, x.size + 1) / x.size, np.arange(1, y.size + 1) / y.size)
    widths = np.diff(np.concatenate(([0.0], t)))
    mid = t - widths / 2
    qx = x[np.minimum((mid * x.size).astype(int), x.size - 1)]
    qy = y[np.minimum((mid * y.size).astype(int), y.size - 1)]
    return float(np.sqrt(np.sum(widths * (qx - qy) ** 2)))


# ------------------------------------------------------------------ Sinkhorn


def cost_matrix(x, y, metric="sup"):
    """Squared ground distance between the rows of ``x`` and ``y``."""
    diff = x[:, None, :] - y[None, :, :]
    if metric == "sup":
        return np.max(np.abs(diff), axis=-1) ** 2
    if metric == "euclidean":
        return np.sum(diff * diff, axis=-1)
    raise ValueError(f"unknown metric {metric!r}; expected one of {METRICS}")


def _softmin(eps, cost, potential, log_weight):
    # -eps log sum_j w_j exp((potential_j - C_ij) / eps), row-wise
    return -eps * logsumexp((potential[None, :] - cost) / eps + log_weight[None, :], axis=1)


ABSORB = 30.0


def sinkhorn_cost(cost, eps, f=None, g=None, max_iter=1000, tol=1e-4):
    """Entropic OT value between uniform weights; returns ``(value, f, g, iterations)``.

    Stabilised scaling: the plan is ``diag(alpha) Kt diag(gamma)`` with
    ``Kt = exp((f0 + g0 - C) / eps)``; whenever a log-scaling exceeds
    ``ABSORB`` it is folded into the log-potentials ``f0, g0`` and ``Kt`` is
    rebuilt. ``value = <a, f> + <b, g>`` at the fixed point. Iteration stops
    once the L1 violation of the marginals drops below ``tol``.
    """
    n, m = cost.shape
    la, lb = np.full(n, -math.log(n)), np.full(m, -math.log(m))
    g0 = np.zeros(m) if g is None else g.copy()
    f0 = _softmin(eps, cost, g0, lb) if f is None else f.copy()
    g0 = _softmin(eps, cost.T, f0, la)
    kt = np.exp((f0[:, None] + g0[None, :] - cost) / eps)
    log_alpha, log_gamma = np.zeros(n), np.zeros(m)
    a, b = np.full(n, 1.0 / n), np.full(m, 1.0 / m)
    for it in range(1, max_iter + 1):
        new_gamma = -np.log(kt.T @ (a * np.exp(log_alpha)))
        new_alpha = -np.log(kt @ (b * np.exp(new_gamma)))
        if not (np.all(np.isfinite(new_alpha)) and np.all(np.isfinite(new_gamma))):
            f0, g0 = f0 + eps * log_alpha, g0 + eps * log_gamma
            g0 = _softmin(eps, cost.T, f0, la)
            f0 = _softmin(eps, cost, g0, lb)
            kt = np.exp((f0[:, None] + g0[None, :] - cost) / eps)
            log_alpha, log_gamma = np.zeros(n), np.zeros(m)
            continue
        # exp(-(new - old)) is the current marginal over the target, per atom
        change = float(np.mean(np.abs(np.expm1(log_gamma - new_gamma))) + np.mean(np.abs(np.expm1(log_alpha - new_alpha))))
        log_alpha, log_gamma = new_alpha, new_gamma
        if change < tol:
            f_out, g_out = f0 + eps * log_alpha, g0 + eps * log_gamma
            return float(f_out.mean() + g_out.mean()), f_out, g_out, it
        if max(np.max(np.abs(log_alpha)), np.max(np.abs(log_gamma))) > ABSORB:
            f0, g0 = f0 + eps * log_alpha, g0 + eps * log_gamma
            kt = np.exp((f0[:, None] + g0[None, :] - cost) / eps)
            log_alpha, log_gamma = np.zeros(n), np.zeros(m)
    raise NumericalError(f"Sinkhorn did not converge in {max_iter} iterations (last change {change:.3e})")


def sinkhorn_self_cost(cost, eps, f=None, max_iter=1000, tol=1e-4):
    """Symmetric entropic OT ``OT_eps(a, a)`` by the averaged fixed-point iteration."""
    n = cost.shape[0]
    la = np.full(n, -math.log(n))
    f0 = _softmin(eps, cost, np.zeros(n), la) if f is None else f.copy()
    kt = np.exp((f0[:, None] + f0[None, :] - cost) / eps)
    log_alpha = np.zeros(n)
    a = np.full(n, 1.0 / n)
    for it in range(1, max_iter + 1):
        new = 0.5 * (log_alpha - np.log(kt @ (a * np.exp(log_alpha))))
        if not np.all(np.isfinite(new)):
            f0 = f0 + eps * log_alpha
            f0 = _softmin(eps, cost, f0, la)
            kt = np.exp((f0[:, None] + f0[None, :] - cost) / eps)
            log_alpha = np.zeros(n)
            continue
        change = float(np.mean(np.abs(np.expm1(2.0 * (log_alpha - new)))))
        log_alpha = new
        if change < tol:
            f_out = f0 + eps * log_alpha
            return float(2.0 * f_out.mean()), f_out, it
        if np.max(np.abs(log_alpha)) > ABSORB:
            f0 = f0 + eps * log_alpha
            kt = np.exp((f0[:, None] + f0[None, :] - cost) / eps)
            log_alpha = np.zeros(n)
    raise NumericalError(f"symmetric Sinkhorn did not converge in {max_iter} iterations")


def sinkhorn_divergence(x, y, eps, metric="sup", warm=None, max_iter=1000, tol=1e-4, costs=None):
    """Debiased ``OT(x,y) - OT(x,x)/2 - OT(y,y)/2``; returns ``(value, potentials, iterations)``.

    ``costs`` may pass precomputed ``(Cxy, Cxx, Cyy)``.
    """
    if costs is None:
        costs = cost_matrix(x, y, metric), cost_matrix(x, x, metric), cost_matrix(y, y, metric)
    cxy, cxx, cyy = costs
    if warm is None:
        # cold start: anneal eps down from 16x, warm-starting each stage
        warm, iters = {}, 0
        for stage in (16.0, 4.0):
            _, warm, it = _divergence_stage(cxy, cxx, cyy, stage * eps, warm, max_iter, tol)
            iters += it
        value, pot, it = _divergence_stage(cxy, cxx, cyy, eps, warm, max_iter, tol)
        return value, pot, iters + it
    return _divergence_stage(cxy, cxx, cyy, eps, warm, max_iter, tol)


def _divergence_stage(cxy, cxx, cyy, eps, warm, max_iter, tol):
    ot_xy, f, g, it1 = sinkhorn_cost(cxy, eps, warm.get("f"), warm.get("g"), max_iter, tol)
    ot_xx, fx, it2 = sinkhorn_self_cost(cxx, eps, warm.get("fx"), max_iter, tol)
    ot_yy, gy, it3 = sinkhorn_self_cost(cyy, eps, warm.get("gy"), max_iter, tol)
    value = ot_xy - 0.5 * (ot_xx + ot_yy)
    return value, {"f": f, "g": g, "fx": fx, "gy": gy}, it1 + it2 + it3


def default_reg(x, y, metric="sup") -> float:
    """0.05 times the median pairwise ground cost."""
    return 0.05 * float(np.median(cost_matrix(x, y, metric)))


def w2_empirical(
    law_p: EmpiricalLaw,
    law_q: EmpiricalLaw,
    reg=None,
    metric="sup",
    n_boot=200,
    seed=0,
    max_iter=1000,
    tol=1e-4,
) -> W2Estimate:
    """W2 between two empirical laws with a bootstrap error bar.

    ``reg == 0`` gives the exact sorting coupling and is only available for
    one-dimensional projections, where it is also the default. Otherwise the
    debiased Sinkhorn divergence with ``reg`` (default: 0.05 x median cost)
    estimates ``W2^2``.
    """
    x, y = law_p.samples, law_q.samples
    if x.shape[1] != y.shape[1]:
        raise ShapeError(f"projection sizes differ: {x.shape[1]} vs {y.shape[1]}")
    seeds = np.random.SeedSequence(seed).spawn(n_boot)
    if reg is None and x.shape[1] == 1:
        reg = 0.0
    if reg == 0:
        if x.shape[1] != 1:
            raise ValueError("unregularised W2 is only supported for one-dimensional projections")
        value = w2_sorted(x, y)
        boots = []
        for s in seeds:
            rng = np.random.default_rng(s)
            boots.append(w2_sorted(x[rng.integers(0, len(x), len(x))], y[rng.integers(0, len(y), len(y))]))
        return W2Estimate(value, _spread(boots), 0.0, "sorted")
    if reg is None:
        reg = default_reg(x, y, metric)
    if not reg > 0:
        raise ValueError(f"regularisation must be positive, got {reg}")
    cxy, cxx, cyy = cost_matrix(x, y, metric), cost_matrix(x, x, metric), cost_matrix(y, y, metric)
    div, pot, iters = sinkhorn_divergence(x, y, reg, metric, max_iter=max_iter, tol=tol, costs=(cxy, cxx, cyy))
    value = math.sqrt(max(div, 0.0))
    boots = []
    for s in seeds:
        rng = np.random.default_rng(s)
        ip, iq = rng.integers(0, len(x), len(x)), rng.integers(0, len(y), len(y))
        warm = {"f": pot["f"][ip], "g": pot["g"][iq], "fx": pot["fx"][ip], "gy": pot["gy"][iq]}
        sub = (cxy[np.ix_(ip, iq)], cxx[np.ix_(ip, ip)], cyy[np.ix_(iq, iq)])
        d, _, _ = sinkhorn_divergence(None, None, reg, metric, warm, max_iter, tol, costs=sub)
        boots.append(math.sqrt(max(d, 0.0)))
    return W2Estimate(value, _spread(boots), reg, "sinkhorn", iters)


def _spread(values) -> float:
    return float(np.std(values, ddof=1)) if len(values) > 1 else 0.0


# ---------------------------------------------------------------- T2 verdict


@dataclass
class T2Report:
    probes: tuple
    D: float
    error: float
    entropy: float
    C: float
    B: float
    verdict: str
    note: str = ""


def t2_verdict(law_p: EmpiricalLaw, law_q: EmpiricalLaw, entropy: float, C: float, probes=(), **w2_kwargs):
    """Compare ``D = W2(P, Q)`` on a projection with ``B = sqrt(2 C H(Q|P))``."""
    est = w2_empirical(law_p, law_q, **w2_kwargs)
    B = math.sqrt(2.0 * C * entropy)
    verdict = "PASS" if est.value <= B + est.error else "FAIL"
    note = ""
    if entropy == 0.0 and est.value > est.error:
        note = "inconsistent: zero entropy but nonzero distance"
    return T2Report(tuple(probes), est.value, est.error, entropy, C, B, verdict, note)


def t2_check(projection: Projection, shift, replicas: int, config, n_boot=200, threads=None) -> T2Report:
    """Simulate both laws on ``projection`` (synchronously coupled) and return the verdict."""
    from cwt2.girsanov_coupling import relative_entropy, simulate

    grid = config.grid
    projection.check_grid(grid)
    _, C = config.transport_constant()
    res = simulate(
        grid,
        config.cov,
        config.make_drift(),
        config.make_init(),
        config.seed,
        replicas,
        shift=shift,
        probes=list(projection.probes),
        threads=threads,
        dealias=config.dealias,
    )
    law_p, law_q = EmpiricalLaw(res.probes_v, "P"), EmpiricalLaw(res.probes_u, "Q")
    return t2_verdict(law_p, law_q, relative_entropy(shift), C, projection.probes, n_boot=n_boot, seed=config.seed)

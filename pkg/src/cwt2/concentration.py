"""Monte-Carlo checks of the exponential-moment and Hoeffding-type tail bounds."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

DEFAULT_LAMBDAS = (0.25, 0.5, 1.0, 2.0)
DEFAULT_R_MULTIPLES = (0.25, 0.5, 1.0, 1.5, 2.0)

V_LIBRARY = {
    "identity": (lambda u: u, 1.0),
    "zero": (np.zeros_like, 0.0),
    "tanh": (np.tanh, 1.0),
}


@dataclass
class LipFunctional:
    """Lipschitz functional of the path.

    ``kind="probe"``: average of ``u`` over ``probes`` (1-Lipschitz for the
    uniform norm). ``kind="time_sup"``: ``(1/T) int ||V(u(t))||_inf dt`` with
    ``V`` taken from ``V_LIBRARY``; its Lipschitz constant is that of ``V``.
    """

    kind: str = "probe"
    v_name: str = "identity"
    probes: list = field(default_factory=list)

    def __post_init__(self):
        if self.kind not in ("probe", "time_sup"):
            raise ValueError(f"unknown functional kind {self.kind!r}")
        if self.v_name not in V_LIBRARY:
            raise ValueError(f"unknown V {self.v_name!r}; known: {sorted(V_LIBRARY)}")
        if self.kind == "probe" and not self.probes:
            raise ValueError("probe functional needs at least one probe")

    @property
    def V(self):
        return V_LIBRARY[self.v_name][0]

    @property
    def v_lip(self) -> float:
        return V_LIBRARY[self.v_name][1]

    @property
    def u_lip(self) -> float:
        return 1.0 if self.kind == "probe" else self.v_lip

    def evaluate(self, config, replicas, threads=None):
        """Per-replica values of the functional under the unshifted law."""
        from cwt2.girsanov_coupling import simulate

        res = simulate(
            config.grid,
            config.cov,
            config.make_drift(),
            config.make_init(),
            config.seed,
            replicas,
            probes=self.probes if self.kind == "probe" else None,
            V=self.V if self.kind == "time_sup" else None,
            threads=threads,
            dealias=config.dealias,
        )
        return self.values_from(res)

    def values_from(self, result):
        if self.kind == "probe":
            return result.probes_v.mean(axis=1)
        return result.time_avg_sup


@dataclass
class MGFRow:
    lam: float
    estimate: float
    stderr: float
    bound: float
    passed: bool


@dataclass
class MGFReport:
    rows: list
    center: float
    n: int
    C: float
    u_lip: float
    truncated: list
    quad_coeff: float
    quad_residual: float
    verdict: str


def mgf_report(values, C: float, u_lip: float, lambdas=DEFAULT_LAMBDAS, n_se=3.0) -> MGFReport:
    """Compare ``E exp(lam (U - EU))`` with ``exp(C lam^2 ||U||_Lip^2 / 2)`` for each ``lam``."""
    values = np.asarray(values, dtype=float)
    center = float(np.mean(values))
    dev = values - center
    rows, truncated = [], []
    for lam in lambdas:
        with np.errstate(over="ignore"):
            e = np.exp(lam * dev)
        if not np.all(np.isfinite(e)):
            truncated.append(float(lam))
            continue
        est = float(np.mean(e))
        se = float(np.std(e, ddof=1) / math.sqrt(len(e)))
        bound = math.exp(C * lam * lam * u_lip * u_lip / 2.0)
        rows.append(MGFRow(float(lam), est, se, bound, est <= bound + n_se * se))
    # log MGF against lam^2 (no intercept): sub-Gaussian behaviour means a small residual
    lam2 = np.array([r.lam**2 for r in rows])
    logm = np.array([math.log(r.estimate) for r in rows])
    if len(rows) and np.any(lam2 > 0):
        coeff = float(lam2 @ logm / (lam2 @ lam2))
        resid = float(np.sqrt(np.mean((logm - coeff * lam2) ** 2)))
    else:
        coeff = resid = 0.0
    verdict = "PASS" if rows and all(r.passed for r in rows) else ("FAIL" if rows else "EMPTY")
    return MGFReport(rows, center, len(values), C, u_lip, truncated, coeff, resid, verdict)


def hoeffding_bound(r: float, C: float, v_lip: float) -> float:
    """``exp(-r^2 / (2 C ||V||_Lip^2))``; 1 at ``r = 0``."""
    if r <= 0:
        return 1.0
    denom = 2.0 * C * v_lip * v_lip
    return math.exp(-r * r / denom) if denom > 0 else 0.0


@dataclass
class TailRow:
    r: float
    frequency: float
    bound: float
    sigma: float
    passed: bool
    vacuous: bool


@dataclass
class TailReport:
    rows: list
    center: float
    n: int
    C: float
    v_lip: float
    verdict: str


def tail_report(values, C: float, v_lip: float, r_grid=None, n_sigma=3.0) -> TailReport:
    """Empirical ``P(U - EU > r)`` against the Hoeffding-type bound; binomial ``n_sigma`` slack."""
    values = np.asarray(values, dtype=float)
    n = len(values)
    if r_grid is None:
        r_grid = [m * math.sqrt(C) for m in DEFAULT_R_MULTIPLES]
    center = float(np.mean(values))
    dev = values - center
    rows = []
    for r in r_grid:
        freq = float(np.count_nonzero(dev > r)) / n
        bound = hoeffding_bound(float(r), C, v_lip)
        sigma = math.sqrt(bound * (1.0 - bound) / n)
        rows.append(TailRow(float(r), freq, bound, sigma, freq <= bound + n_sigma * sigma, bound < 1.0 / n))
    verdict = "PASS" if all(row.passed for row in rows) else "FAIL"
    return TailReport(rows, center, n, C, v_lip, verdict)


def mgf_bound_check(functional: LipFunctional, config, replicas, lambda_grid=DEFAULT_LAMBDAS, values=None, threads=None):
    _, C = config.transport_constant()
    if values is None:
        values = functional.evaluate(config, replicas, threads)
    return mgf_report(values, C, functional.u_lip, lambda_grid)


def hoeffding_tail_check(functional: LipFunctional, config, replicas, r_grid=None, values=None, threads=None):
    if functional.kind != "time_sup":
        raise ValueError("the tail check applies to the time-averaged sup functional")
    _, C = config.transport_constant()
    if values is None:
        values = functional.evaluate(config, replicas, threads)
    return tail_report(values, C, functional.v_lip, r_grid)

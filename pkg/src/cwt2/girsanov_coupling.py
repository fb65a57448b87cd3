"""Synchronous coupling of the shifted and unshifted equations.

Both copies are driven by the same noise increments; the shifted copy ``u``
additionally receives ``<G(t - s, x - .), h(s)>_H ds``. For a deterministic
shift ``h`` the law of ``u`` is the Girsanov-tilted law ``Q`` with density
``exp(int h dF - 1/2 ||h||_{H_T}^2)`` and ``H(Q|P) = 1/2 ||h||_{H_T}^2``.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from cwt2.errors import ConfigError, ShapeError
from cwt2.spectral_noise import (
    SPATIAL_AXES,
    NoiseIncrement,
    PeriodicGrid,
    SpatialCovariance,
    gaussian_bump,
    ht_norm_sq,
    noise_spectra,
)
from cwt2.wave_solver import Drift, InitialData, WaveSolver, WaveState

BLOCK_SIZE = 32
THREADS_ENV = "CWT2_THREADS"


@dataclass
class DriftShift:
    """Deterministic Girsanov shift ``h(t_n, x)`` on the space-time grid."""

    slabs: np.ndarray
    norm_sq: float

    @classmethod
    def from_slabs(cls, slabs, cov: SpatialCovariance, grid: PeriodicGrid):
        slabs = np.asarray(slabs, dtype=float)
        if slabs.shape != (grid.n_steps,) + grid.shape:
            raise ShapeError(f"shift must have shape {(grid.n_steps,) + grid.shape}, got {slabs.shape}")
        if not np.all(np.isfinite(slabs)):
            raise ValueError("shift must be finite")
        return cls(slabs, ht_norm_sq(slabs, cov, grid))

    @classmethod
    def zero(cls, grid: PeriodicGrid):
        return cls(np.zeros((grid.n_steps,) + grid.shape), 0.0)

    @property
    def is_zero(self) -> bool:
        return self.norm_sq == 0.0 and not np.any(self.slabs)


def separable_shift(grid, cov, levels=(1.0,), amplitude=1.0, width=0.5, center=None) -> DriftShift:
    """``h(s, x) = amplitude * g(s) * bump(x)`` with ``g`` piecewise constant.

    ``levels`` split ``[0, T]`` into equal pieces; ``bump`` is a Gaussian of
    the given width around ``center`` (box centre by default).
    """
    levels = np.asarray(levels, dtype=float)
    piece = np.minimum((np.arange(grid.n_steps) * len(levels)) // grid.n_steps, len(levels) - 1)
    g = levels[piece]
    psi = gaussian_bump(grid, width, center, amplitude)
    return DriftShift.from_slabs(g[:, None, None, None] * psi, cov, grid)


def parse_shift_spec(spec: str, grid: PeriodicGrid, cov: SpatialCovariance) -> DriftShift:
    """Parse ``"zero"`` or ``"bump:amp=1.0,width=0.5,levels=1/0.5"``."""
    spec = spec.strip()
    if spec in ("", "zero", "none"):
        return DriftShift.zero(grid)
    kind, _, rest = spec.partition(":")
    if kind != "bump":
        raise ConfigError(f"unknown shift kind {kind!r} (expected 'zero' or 'bump')")
    params = {"amp": "1.0", "width": "0.5", "levels": "1"}
    for item in filter(None, rest.split(",")):
        key, sep, value = item.partition("=")
        if not sep or key.strip() not in params:
            raise ConfigError(f"bad shift parameter {item!r}")
        params[key.strip()] = value.strip()
    try:
        levels = [float(v) for v in params["levels"].split("/")]
        return separable_shift(grid, cov, levels, float(params["amp"]), float(params["width"]))
    except ValueError as exc:
        raise ConfigError(f"bad shift spec {spec!r}: {exc}") from None


def relative_entropy(shift: DriftShift) -> float:
    """``H(Q|P) = 1/2 ||h||_{H_T}^2`` for a deterministic shift."""
    return 0.5 * shift.norm_sq


def _pairing_spectral(h_hat, w_hat, grid: PeriodicGrid):
    """``dx^3 sum_x h(x) W(x)`` from plain-DFT rfft coefficients."""
    n3 = grid.points_per_axis**3
    prod = (w_hat * h_hat.conj()).real * grid.rfft_multiplicity()
    return np.sum(prod, axis=SPATIAL_AXES) * grid.cell_volume / n3


def rn_log_weight(shift: DriftShift, noise_path, grid: PeriodicGrid) -> float:
    """``sum_n <h(t_n), W_n> - 1/2 ||h||_{H_T}^2`` for one noise path.

    ``noise_path`` is a sequence of ``NoiseIncrement`` or an array of slabs.
    """
    total = 0.0
    for h, w in zip(shift.slabs, noise_path, strict=True):
        slab = w.slab if isinstance(w, NoiseIncrement) else np.asarray(w)
        total += float(np.sum(h * slab)) * grid.cell_volume
    return total - 0.5 * shift.norm_sq


@dataclass
class CouplingRecord:
    replica: int
    eta_T: float
    entropy: float
    i1_max: float
    i2_max: float
    rn_log_weight: float
    norm_sq: float


@dataclass
class SimulationResult:
    """Per-replica outputs of a batch run, in replica order."""

    replicas: np.ndarray
    eta_T: np.ndarray
    i1_max: np.ndarray
    i2_max: float
    rn_log_weight: np.ndarray
    norm_sq: float
    probes_u: np.ndarray | None = None
    probes_v: np.ndarray | None = None
    time_avg_sup: np.ndarray | None = None
    final_v: np.ndarray | None = None
    extras: dict = field(default_factory=dict)

    def records(self) -> list[CouplingRecord]:
        ent = 0.5 * self.norm_sq
        return [
            CouplingRecord(int(r), float(e), ent, float(i1), float(self.i2_max), float(w), self.norm_sq)
            for r, e, i1, w in zip(self.replicas, self.eta_T, self.i1_max, self.rn_log_weight)
        ]


def shift_response(shift: DriftShift, grid: PeriodicGrid, cov: SpatialCovariance):
    """Deterministic part ``I_2(t_n, .)`` of ``u - v`` for ``n = 0..n_steps``, physical space."""
    solver = WaveSolver(grid, cov, Drift.zero())
    state = WaveState(0.0, np.zeros(grid.spectral_shape, complex), np.zeros(grid.spectral_shape, complex))
    out = np.empty((grid.n_steps + 1,) + grid.shape)
    out[0] = 0.0
    for n in range(grid.n_steps):
        state = solver.step(state, shift_slab=shift.slabs[n], step_index=n)
        out[n + 1] = state.position(grid)
    return out


def resolve_threads(threads: int | None) -> int:
    if threads is None:
        threads = int(os.environ.get(THREADS_ENV, "1"))
    return max(1, int(threads))


def simulate(
    grid: PeriodicGrid,
    cov: SpatialCovariance,
    drift: Drift,
    init: InitialData,
    seed: int,
    replicas,
    shift: DriftShift | None = None,
    probes=None,
    V=None,
    keep_final=False,
    threads: int | None = None,
    dealias=False,
) -> SimulationResult:
    """Run ``replicas`` (count or explicit indices) of the unshifted equation and,
    when ``shift`` is given, its synchronously coupled shifted copy.

    ``probes`` is a list of ``(n, i, j, k)`` grid points; ``V`` a pointwise
    function whose time-averaged box sup ``(1/T) int ||V(v(t))||_inf dt`` is
    recorded (trapezoid rule over the time mesh). Replicas are processed in
    fixed blocks, so results do not depend on ``threads``.
    """
    idx = np.arange(replicas) if np.isscalar(replicas) else np.asarray(replicas, dtype=np.int64)
    coupled = shift is not None
    i2 = shift_response(shift, grid, cov) if coupled else None
    shift_hats = np.fft.rfftn(shift.slabs, axes=SPATIAL_AXES) if coupled else None
    solver = WaveSolver(grid, cov, drift, dealias=dealias)
    probes = [tuple(int(c) for c in p) for p in (probes or [])]

    blocks = [idx[i : i + BLOCK_SIZE] for i in range(0, len(idx), BLOCK_SIZE)]
    run = lambda b: _run_block(solver, init, seed, b, shift, shift_hats, i2, probes, V, keep_final)
    n_threads = resolve_threads(threads)
    if n_threads == 1 or len(blocks) == 1:
        parts = [run(b) for b in blocks]
    else:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            parts = list(pool.map(run, blocks))

    cat = lambda key: np.concatenate([p[key] for p in parts]) if parts and parts[0][key] is not None else None
    i2_max = float(np.max(i2**2)) if coupled else 0.0
    return SimulationResult(
        replicas=idx,
        eta_T=cat("eta"),
        i1_max=cat("i1"),
        i2_max=i2_max,
        rn_log_weight=cat("rn"),
        norm_sq=shift.norm_sq if coupled else 0.0,
        probes_u=cat("pu"),
        probes_v=cat("pv"),
        time_avg_sup=cat("vsup"),
        final_v=cat("final"),
    )


def _run_block(solver, init, seed, block, shift, shift_hats, i2, probes, V, keep_final):
    grid = solver.grid
    R, coupled = len(block), shift is not None
    sv = WaveState.from_initial(init, grid, R)
    su = WaveState(sv.t, sv.u_hat.copy(), sv.v_hat.copy()) if coupled else None
    eta = np.zeros(R)
    i1 = np.zeros(R)
    rn = np.zeros(R)
    pu = np.zeros((R, len(probes))) if coupled else None
    pv = np.zeros((R, len(probes)))
    vsup = np.zeros(R) if V is not None else None

    def observe(n, phys_v, phys_u):
        for m, (pn, i, j, k) in enumerate(probes):
            if pn == n:
                pv[:, m] = phys_v[:, i, j, k]
                if coupled:
                    pu[:, m] = phys_u[:, i, j, k]
        if coupled:
            diff = phys_u - phys_v
            np.maximum(eta, np.max(diff**2, axis=SPATIAL_AXES), out=eta)
            np.maximum(i1, np.max((diff - i2[n]) ** 2, axis=SPATIAL_AXES), out=i1)
        if V is not None:
            weight = 0.5 if n in (0, grid.n_steps) else 1.0
            vsup[:] += weight * grid.dt * np.max(np.abs(V(phys_v)), axis=SPATIAL_AXES)

    for n in range(grid.n_steps):
        phys_v = sv.position(grid)
        phys_u = su.position(grid) if coupled else None
        observe(n, phys_v, phys_u)
        w_hat = noise_spectra(grid, solver.cov, seed, block, n)
        sv = solver.step(sv, w_hat, u_phys=phys_v, step_index=n)
        if coupled:
            rn += _pairing_spectral(shift_hats[n], w_hat, grid)
            su = solver.step(su, w_hat, shift_slab=shift.slabs[n], u_phys=phys_u, step_index=n)
    phys_v = sv.position(grid)
    observe(grid.n_steps, phys_v, su.position(grid) if coupled else None)
    if coupled:
        rn -= 0.5 * shift.norm_sq
    if vsup is not None:
        vsup /= grid.T
    return {
        "eta": eta if coupled else np.zeros(R),
        "i1": i1 if coupled else np.zeros(R),
        "rn": rn,
        "pu": pu,
        "pv": pv,
        "vsup": vsup,
        "final": phys_v if keep_final else None,
    }


def simulate_coupled(grid, cov, drift, init, shift, seed, replicas, probes=None, threads=None):
    """Coupled run returning ``(records, result)``; ``result`` carries the probe paths."""
    result = simulate(grid, cov, drift, init, seed, replicas, shift=shift, probes=probes, threads=threads)
    return result.records(), result


def transport_constant(T: float, K: float, M_T: float) -> float:
    """``C(T, K) = T M(T) exp(T^4 K^2 / 2)``."""
    return T * M_T * math.exp(T**4 * K**2 / 2.0)


@dataclass
class CertificateReport:
    n_replicas: int
    mean_eta: float
    norm_sq: float
    C: float
    ratio: float
    inequality: str
    i2_bound: float
    i2_max: float
    i2_violations: int
    decomposition_violations: int
    verdict: str


def gronwall_certificate(records, T: float, K: float, M_T: float, slack: float = 0.02, tol: float = 1e-12):
    """Check ``mean eta(T) <= C(T, K) ||h||^2`` and the pathwise bound
    ``i2_max <= T M(T) ||h||^2`` (with relative ``slack``) over a batch of records."""
    records = list(records)
    if not records:
        raise ValueError("gronwall_certificate needs at least one record")
    norm_sq = records[0].norm_sq
    if any(r.norm_sq != norm_sq for r in records):
        raise ValueError("records come from different shifts")
    C = transport_constant(T, K, M_T)
    mean_eta = math.fsum(r.eta_T for r in records) / len(records)
    bound = C * norm_sq
    if norm_sq == 0.0:
        ratio = 0.0 if mean_eta == 0.0 else math.inf
        inequality = "PASS-degenerate" if mean_eta == 0.0 else "FAIL"
    else:
        ratio = mean_eta / bound
        inequality = "PASS" if mean_eta <= bound else "FAIL"
    i2_bound = T * M_T * norm_sq
    i2_viol = sum(r.i2_max > (1.0 + slack) * i2_bound + tol for r in records)
    # |u - v|^2 <= 2 I_1^2 + 2 I_2^2 pointwise, hence also for the maxima
    dec_viol = sum(r.eta_T > 2.0 * r.i1_max + 2.0 * r.i2_max + tol for r in records)
    ok = inequality.startswith("PASS") and i2_viol == 0 and dec_viol == 0
    return CertificateReport(
        n_replicas=len(records),
        mean_eta=mean_eta,
        norm_sq=norm_sq,
        C=C,
        ratio=ratio,
        inequality=inequality,
        i2_bound=i2_bound,
        i2_max=max(r.i2_max for r in records),
        i2_violations=int(i2_viol),
        decomposition_violations=int(dec_viol),
        verdict=inequality if ok else "FAIL",
    )

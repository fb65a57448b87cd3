"""Exact-multiplier time stepping of the mild (Duhamel) form of the 3-D wave equation.

The wave group on the torus acts mode by mode. With ``omega = 2 pi |xi|``,

    u_hat(t) = cos(omega t) nu1_hat + sin(omega t) / omega * nu2_hat,

and ``sin(omega t) / omega`` is exactly the Fourier transform of the kernel
``G(t) = sigma_t / (4 pi t)``. One step adds every forcing as a velocity
impulse at the left endpoint and then applies the exact propagator, so the
scheme is exact for the linear group and has no CFL restriction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate

from cwt2.errors import BlowUpError, DomainError, NumericalError
from cwt2.spectral_noise import (
    SPATIAL_AXES,
    NoiseIncrement,
    PeriodicGrid,
    SpatialCovariance,
    radial_spectral_density,
    spectral_weights,
)

SUPPORT_THRESHOLD = 1e-12


def _sinc(omega, t):
    safe = np.where(omega > 0, omega, 1.0)
    return np.where(omega > 0, np.sin(omega * t) / safe, t)


def wave_multipliers(dt: float, grid: PeriodicGrid):
    """``(cos(2 pi |xi| dt), sin(2 pi |xi| dt) / (2 pi |xi|))`` on the rfft lattice."""
    omega = 2.0 * math.pi * grid.frequency_norm()
    return np.cos(omega * dt), _sinc(omega, dt)


@dataclass
class InitialData:
    nu1: np.ndarray
    nu2: np.ndarray
    support_radius: float = 0.0

    def __post_init__(self):
        if not (np.all(np.isfinite(self.nu1)) and np.all(np.isfinite(self.nu2))):
            raise ValueError("initial data must be finite")

    @classmethod
    def zero(cls, grid: PeriodicGrid):
        return cls(np.zeros(grid.shape), np.zeros(grid.shape), 0.0)

    @classmethod
    def bump(cls, grid: PeriodicGrid, amplitude=1.0, width=0.25, center=None):
        """Gaussian position bump at rest; support radius where it drops below 1e-12 relative."""
        r = grid.centered_radius(center)
        nu1 = amplitude * np.exp(-0.5 * (r / width) ** 2)
        radius = width * math.sqrt(2.0 * math.log(1.0 / SUPPORT_THRESHOLD))
        return cls(nu1, np.zeros(grid.shape), radius)


@dataclass
class WaveState:
    """Spectral pair (position, velocity); arrays carry optional leading replica axes."""

    t: float
    u_hat: np.ndarray
    v_hat: np.ndarray

    @classmethod
    def from_initial(cls, init: InitialData, grid: PeriodicGrid, replicas: int | None = None):
        u_hat = np.fft.rfftn(init.nu1, axes=SPATIAL_AXES)
        v_hat = np.fft.rfftn(init.nu2, axes=SPATIAL_AXES)
        if replicas is not None:
            u_hat = np.broadcast_to(u_hat, (replicas,) + u_hat.shape).copy()
            v_hat = np.broadcast_to(v_hat, (replicas,) + v_hat.shape).copy()
        return cls(0.0, u_hat, v_hat)

    def position(self, grid: PeriodicGrid):
        return np.fft.irfftn(self.u_hat, s=grid.shape, axes=SPATIAL_AXES)

    def velocity(self, grid: PeriodicGrid):
        return np.fft.irfftn(self.v_hat, s=grid.shape, axes=SPATIAL_AXES)

    def energy(self, grid: PeriodicGrid):
        """``1/2 ||v||^2 + 1/2 ||grad u||^2`` over the box (Parseval on the rfft lattice)."""
        omega = 2.0 * math.pi * grid.frequency_norm()
        dens = np.abs(self.v_hat) ** 2 + (omega * np.abs(self.u_hat)) ** 2
        n3 = grid.points_per_axis**3
        return 0.5 * grid.cell_volume / n3 * np.sum(grid.rfft_multiplicity() * dens, axis=SPATIAL_AXES)


@dataclass(frozen=True)
class Drift:
    """Pointwise nonlinearity ``b`` with declared Lipschitz constant ``K``."""

    b: Callable[[np.ndarray], np.ndarray]
    K: float
    name: str = "custom"

    @classmethod
    def sine(cls, K: float):
        return cls(lambda u: K * np.sin(u), K, "sin")

    @classmethod
    def zero(cls):
        return cls(np.zeros_like, 0.0, "zero")

    @classmethod
    def constant(cls, c: float):
        return cls(lambda u: np.full_like(u, c), 0.0, "const")

    @property
    def is_zero(self):
        return self.name == "zero"


class WaveSolver:
    """Stochastic trigonometric integrator for one grid, covariance and drift.

    Holds the step multipliers; arrays passed in may carry a leading replica axis.
    """

    def __init__(self, grid: PeriodicGrid, cov: SpatialCovariance, drift: Drift, dealias=False):
        self.grid, self.cov, self.drift = grid, cov, drift
        omega = 2.0 * math.pi * grid.frequency_norm()
        self.cos_mult, self.sinc_mult = wave_multipliers(grid.dt, grid)
        self.msin_mult = -omega * np.sin(omega * grid.dt)
        # DFT(f * h) = S(xi) DFT(h): the shift enters through the covariance operator
        self.shift_mult = radial_spectral_density(grid.frequency_norm(), cov)
        self.dealias_mask = None
        if dealias:
            n = grid.points_per_axis
            k = [np.abs(f) * grid.box_length for f in grid.frequencies()]
            self.dealias_mask = (k[0] <= n / 3) & (k[1] <= n / 3) & (k[2] <= n / 3)

    def drift_spectrum(self, u_phys):
        b_hat = np.fft.rfftn(self.drift.b(u_phys), axes=SPATIAL_AXES)
        if self.dealias_mask is not None:
            b_hat = b_hat * self.dealias_mask
        return b_hat

    def shift_spectrum(self, shift_slab):
        return np.fft.rfftn(shift_slab, axes=SPATIAL_AXES) * self.shift_mult

    def step(self, state: WaveState, noise=None, shift_slab=None, u_phys=None, step_index=None) -> WaveState:
        """Advance one ``dt``.

        ``noise`` is a ``NoiseIncrement``, an array of noise rfft coefficients
        or ``None``; ``shift_slab`` is the Girsanov shift ``h(t_n, .)`` in
        physical space. ``u_phys`` may pass an already computed physical
        position to save a transform.
        """
        impulse = None
        if not self.drift.is_zero:
            if u_phys is None:
                u_phys = state.position(self.grid)
            impulse = self.drift_spectrum(u_phys) * self.grid.dt
        if shift_slab is not None:
            s = self.shift_spectrum(shift_slab) * self.grid.dt
            impulse = s if impulse is None else impulse + s
        if noise is not None:
            w = noise.spectra if isinstance(noise, NoiseIncrement) else noise
            if w is None:
                w = np.fft.rfftn(noise.slab, axes=SPATIAL_AXES)
            impulse = w if impulse is None else impulse + w
        v = state.v_hat if impulse is None else state.v_hat + impulse
        u_new = self.cos_mult * state.u_hat + self.sinc_mult * v
        v_new = self.msin_mult * state.u_hat + self.cos_mult * v
        if not (np.all(np.isfinite(u_new)) and np.all(np.isfinite(v_new))):
            raise BlowUpError(step_index if step_index is not None else round(state.t / self.grid.dt))
        return WaveState(state.t + self.grid.dt, u_new, v_new)


def deterministic_part(init: InitialData, t: float, grid: PeriodicGrid):
    """Free evolution ``w(t, .)`` of the initial data, in physical space."""
    if t < 0:
        raise DomainError(f"t must be nonnegative, got {t}")
    omega = 2.0 * math.pi * grid.frequency_norm()
    nu1_hat = np.fft.rfftn(init.nu1, axes=SPATIAL_AXES)
    nu2_hat = np.fft.rfftn(init.nu2, axes=SPATIAL_AXES)
    w_hat = np.cos(omega * t) * nu1_hat + _sinc(omega, t) * nu2_hat
    return np.fft.irfftn(w_hat, s=grid.shape, axes=SPATIAL_AXES)


def _kernel_h_norm_sq_continuum(t: float, cov: SpatialCovariance) -> tuple[float, float]:
    """``int |F G(t)(xi)|^2 mu(d xi)`` by adaptive quadrature; returns (value, abserr)."""
    if t == 0:
        return 0.0, 0.0
    beta, c = cov.beta, cov.riesz_constant
    # integrand (c/pi) sin^2(2 pi t rho) rho^(beta-3); sin^2 = (1 - cos(4 pi t rho)) / 2
    a = 1.0 / t
    head, err_head = integrate.quad(
        lambda r: math.sin(2 * math.pi * t * r) ** 2 * r ** (beta - 3.0), 0.0, a, limit=400
    )
    tail_cos, err_tail = integrate.quad(
        lambda r: r ** (beta - 3.0), a, np.inf, weight="cos", wvar=4 * math.pi * t, limlst=100
    )
    tail = 0.5 * a ** (beta - 2.0) / (2.0 - beta) - 0.5 * tail_cos
    scale = c / math.pi
    return scale * (head + tail), scale * (err_head + 0.5 * err_tail)


def m_of_t(T: float, cov: SpatialCovariance, n_mesh: int = 32, rtol: float = 1e-6) -> float:
    """``M(T) = sup_{t <= T} int |F G(t)|^2 d mu`` over an ``n_mesh``-point time mesh."""
    if T < 0:
        raise DomainError(f"T must be nonnegative, got {T}")
    if T == 0:
        return 0.0
    # rho -> rho / t turns the integral at t into t^(2 - beta) times the one at t = 1,
    # which keeps the quadrature well conditioned for small t
    unit, err = _kernel_h_norm_sq_continuum(1.0, cov)
    if not np.isfinite(unit) or err > rtol * abs(unit) + 1e-12:
        raise NumericalError(f"M(T) quadrature did not converge: value={unit}, abserr={err}")
    mesh = np.linspace(T / n_mesh, T, n_mesh)
    return float(np.max(unit * mesh ** (2.0 - cov.beta)))


def kernel_h_norm_sq(t, cov: SpatialCovariance, grid: PeriodicGrid):
    """Lattice value of ``||G(t)||_H^2`` (zero mode dropped, truncated at the grid Nyquist)."""
    omega = 2.0 * math.pi * grid.frequency_norm()
    w = spectral_weights(grid, cov) * grid.rfft_multiplicity()
    return float(np.sum(w * _sinc(omega, t) ** 2))


def kernel_l1_norm(t: float, grid: PeriodicGrid) -> float:
    """``dx^3 sum |K_t(x)|`` for the grid kernel whose multiplier is ``sin(omega t)/omega``."""
    omega = 2.0 * math.pi * grid.frequency_norm()
    return float(np.sum(np.abs(np.fft.irfftn(_sinc(omega, t), s=grid.shape, axes=SPATIAL_AXES))))


def gronwall_envelope(free_sup, K: float, grid: PeriodicGrid):
    """Discrete Gronwall envelope for the sup-distance of two runs sharing noise.

    ``free_sup[n]`` bounds the sup of the difference of free evolutions at
    ``t_n``. Returns ``E`` with ``E_n = free_sup[n] + K dt sum_{j<n} l1(t_n - t_j) E_j``.
    """
    n = grid.n_steps
    l1 = np.array([kernel_l1_norm(k * grid.dt, grid) for k in range(n + 1)])
    env = np.zeros(n + 1)
    for i in range(n + 1):
        env[i] = free_sup[i] + K * grid.dt * sum(l1[i - j] * env[j] for j in range(i))
    return env


def spherical_mass_check(t: float, grid: PeriodicGrid) -> float:
    """Apply the kernel ``G(t)`` to the constant field 1; equals ``int G(t, x, y) dy = t``."""
    if t < 0 or t >= grid.box_length / 2:
        raise DomainError(f"t={t} must lie in [0, L/2) = [0, {grid.box_length / 2}) to avoid wrap-around")
    omega = 2.0 * math.pi * grid.frequency_norm()
    field = np.fft.irfftn(_sinc(omega, t) * np.fft.rfftn(np.ones(grid.shape)), s=grid.shape, axes=SPATIAL_AXES)
    return float(field[0, 0, 0])

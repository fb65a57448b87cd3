"""Riesz-correlated Gaussian noise on a periodic box and the geometry it induces.

Fourier convention throughout: ``F phi(xi) = int exp(-2 i pi xi.x) phi(x) dx``.
On the box ``[0, L)^3`` sampled at ``N`` points per axis this is approximated by
``dx^3 * DFT(phi)``, and dual frequencies are ``k / L`` with integer ``k`` in
``[-N/2, N/2)``. Fields are stored in physical space with axes ``(x, y, z)``
and transformed with ``rfftn`` over the last three axes, so any number of
leading batch axes (replicas) is allowed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special

from cwt2.errors import ConfigError, ShapeError

SPATIAL_AXES = (-3, -2, -1)


@dataclass(frozen=True)
class SpatialCovariance:
    """Riesz kernel ``f(x) = amplitude * |x|^(-beta)`` on R^3, ``0 < beta < 2``."""

    beta: float
    amplitude: float = 1.0

    def __post_init__(self):
        if not (0.0 < self.beta < 2.0):
            raise ConfigError(f"beta must lie in (0, 2), got {self.beta!r}")
        if not self.amplitude > 0.0:
            raise ConfigError(f"amplitude must be positive, got {self.amplitude!r}")

    @property
    def riesz_constant(self) -> float:
        return self.amplitude * riesz_constant(self.beta)

    def kernel(self, x):
        """Spatial covariance ``f`` evaluated at distance(s) ``|x|`` (``x`` may be radii)."""
        r = np.abs(np.asarray(x, dtype=float))
        return self.amplitude * r ** (-self.beta)


def riesz_constant(beta: float) -> float:
    """Constant ``c`` in ``F(|x|^-beta)(xi) = c |xi|^(beta-3)`` for the 2*pi-in-exponent transform."""
    return math.pi ** (beta - 1.5) * special.gamma((3.0 - beta) / 2.0) / special.gamma(beta / 2.0)


def spectral_density(xi, cov: SpatialCovariance):
    """Density of the spectral measure ``mu`` at frequency ``xi``.

    ``xi`` is either a single 3-vector or an array whose last axis has length 3.
    The zero frequency gets weight 0 (the density is integrable there but the
    lattice cell at the origin is dropped).
    """
    xi = np.asarray(xi, dtype=float)
    if xi.shape == () or xi.shape[-1] != 3:
        raise ShapeError(f"frequency must have a trailing axis of length 3, got shape {xi.shape}")
    return radial_spectral_density(np.linalg.norm(xi, axis=-1), cov)


def radial_spectral_density(rho, cov: SpatialCovariance):
    """``spectral_density`` as a function of ``|xi|``; 0 at the origin."""
    rho = np.asarray(rho, dtype=float)
    safe = np.where(rho > 0, rho, 1.0)
    out = np.where(rho > 0, cov.riesz_constant * safe ** (cov.beta - 3.0), 0.0)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class PeriodicGrid:
    box_length: float
    points_per_axis: int
    dt: float
    n_steps: int

    def __post_init__(self):
        if not self.box_length > 0:
            raise ConfigError(f"box_length must be positive, got {self.box_length!r}")
        n = self.points_per_axis
        if not isinstance(n, (int, np.integer)) or n <= 0 or n % 2:
            raise ConfigError(f"points_per_axis must be an even positive integer, got {n!r}")
        if not self.dt > 0:
            raise ConfigError(f"dt must be positive, got {self.dt!r}")
        if not isinstance(self.n_steps, (int, np.integer)) or self.n_steps <= 0:
            raise ConfigError(f"n_steps must be a positive integer, got {self.n_steps!r}")

    @property
    def shape(self) -> tuple[int, int, int]:
        n = self.points_per_axis
        return (n, n, n)

    @property
    def spectral_shape(self) -> tuple[int, int, int]:
        n = self.points_per_axis
        return (n, n, n // 2 + 1)

    @property
    def dx(self) -> float:
        return self.box_length / self.points_per_axis

    @property
    def cell_volume(self) -> float:
        return self.dx**3

    @property
    def T(self) -> float:
        return self.dt * self.n_steps

    def times(self):
        return self.dt * np.arange(self.n_steps + 1)

    def coordinates(self):
        """Meshgrid of physical coordinates, each of shape ``(N, N, N)``."""
        x = self.dx * np.arange(self.points_per_axis)
        return np.meshgrid(x, x, x, indexing="ij")

    def centered_radius(self, center=None):
        """Periodic distance of every grid point to ``center`` (default: box centre)."""
        if center is None:
            center = (self.box_length / 2.0,) * 3
        L = self.box_length
        sq = 0.0
        for xi, ci in zip(self.coordinates(), center):
            d = (xi - ci + L / 2.0) % L - L / 2.0
            sq = sq + d * d
        return np.sqrt(sq)

    def frequencies(self):
        """Dual frequencies ``(xi_x, xi_y, xi_z)`` on the rfft half-lattice."""
        n, L = self.points_per_axis, self.box_length
        full = np.fft.fftfreq(n, d=L / n)
        half = np.fft.rfftfreq(n, d=L / n)
        return np.meshgrid(full, full, half, indexing="ij")

    def frequency_norm(self):
        fx, fy, fz = self.frequencies()
        return np.sqrt(fx * fx + fy * fy + fz * fz)

    def rfft_multiplicity(self):
        """How many full-lattice frequencies each rfft entry stands for (1 or 2)."""
        n = self.points_per_axis
        m = np.full(self.spectral_shape, 2.0)
        m[..., 0] = 1.0
        m[..., n // 2] = 1.0
        return m

    def check_field(self, values, name="field"):
        values = np.asarray(values)
        if values.shape[-3:] != self.shape:
            raise ShapeError(f"{name} has trailing shape {values.shape[-3:]}, grid is {self.shape}")
        return values


def spectral_weights(grid: PeriodicGrid, cov: SpatialCovariance):
    """``spectral_density(xi_k) / L^3`` on the rfft half-lattice."""
    return radial_spectral_density(grid.frequency_norm(), cov) / grid.box_length**3


def to_fourier(values, grid: PeriodicGrid):
    """Continuum-normalised transform ``F phi(xi_k) ~ dx^3 DFT(phi)_k``."""
    return np.fft.rfftn(values, axes=SPATIAL_AXES) * grid.cell_volume


def h_inner(phi, psi, cov: SpatialCovariance, grid: PeriodicGrid):
    """Inner product of the reproducing space H, evaluated on the spectral side.

    Leading batch axes broadcast; the result has the batch shape.
    """
    phi = grid.check_field(phi, "phi")
    psi = grid.check_field(psi, "psi")
    if phi.shape != psi.shape:
        raise ShapeError(f"phi shape {phi.shape} differs from psi shape {psi.shape}")
    fp = to_fourier(phi, grid)
    fq = fp if psi is phi else to_fourier(psi, grid)
    w = spectral_weights(grid, cov) * grid.rfft_multiplicity()
    return np.sum(w * (fp * fq.conj()).real, axis=SPATIAL_AXES)


def ht_norm_sq(slabs, cov: SpatialCovariance, grid: PeriodicGrid) -> float:
    """Squared norm in ``H_T = L^2([0,T]; H)``, left-endpoint rule over the time slabs."""
    slabs = grid.check_field(slabs, "h")
    if slabs.ndim != 4 or slabs.shape[0] != grid.n_steps:
        raise ShapeError(f"expected {grid.n_steps} time slabs, got array of shape {slabs.shape}")
    return float(np.sum(h_inner(slabs, slabs, cov, grid)) * grid.dt)


def h_inner_radial(ft_a, ft_b, cov: SpatialCovariance) -> float:
    """Continuum ``<a, b>_H`` for radial functions given by their radial Fourier profiles.

    ``ft_a(rho)`` is ``F a`` at ``|xi| = rho``. Adaptive quadrature of
    ``int mu(d xi) F a conj(F b)`` in spherical coordinates.
    """
    c, beta = cov.riesz_constant, cov.beta

    def integrand(rho):
        return 4.0 * math.pi * c * rho ** (beta - 1.0) * ft_a(rho) * ft_b(rho)

    head, _ = integrate.quad(integrand, 0.0, 1.0, limit=200)
    tail, _ = integrate.quad(integrand, 1.0, np.inf, limit=200)
    return head + tail


# --------------------------------------------------------------------------- noise


def noise_generator(seed: int, replica: int, step: int) -> np.random.Generator:
    """Counter-based stream for one ``(seed, replica, step)`` slab.

    Philox key is ``(seed, replica)``; the step occupies the second counter
    word, so slabs never share counter blocks and can be drawn in any order.
    """
    bitgen = np.random.Philox(key=[int(seed), int(replica)], counter=[0, int(step), 0, 0])
    return np.random.Generator(bitgen)


def white_noise(grid: PeriodicGrid, seed: int, replicas, step: int):
    """Unit white noise on the grid for each replica, shape ``(R, N, N, N)``."""
    replicas = np.atleast_1d(replicas)
    out = np.empty((len(replicas),) + grid.shape)
    for i, r in enumerate(replicas):
        noise_generator(seed, r, step).standard_normal(out=out[i])
    return out


def noise_spectra(grid: PeriodicGrid, cov: SpatialCovariance, seed: int, replicas, step: int):
    """rfft coefficients (plain DFT normalisation) of the noise slab ``W`` per replica.

    Filtering unit white noise by ``sqrt(dt * S(xi_k) * N^3 / L^3)`` per mode is
    exact spectral synthesis on the torus: Hermitian symmetry is inherited
    from the real white field and ``E[<W,phi><W,psi>] = dt <phi,psi>_H``.
    """
    amp = np.sqrt(grid.dt * spectral_weights(grid, cov) * grid.points_per_axis**3)
    return np.fft.rfftn(white_noise(grid, seed, replicas, step), axes=SPATIAL_AXES) * amp


def spectra_to_field(spectra, grid: PeriodicGrid):
    return np.fft.irfftn(spectra, s=grid.shape, axes=SPATIAL_AXES)


@dataclass
class NoiseIncrement:
    """One time slab of the discretised noise: ``W`` such that ``<W, phi> ~ M((t, t+dt], phi)``."""

    slab: np.ndarray
    seed_tag: tuple[int, int, int]
    box_length: float
    dt: float
    spectra: np.ndarray | None = field(default=None, repr=False)

    def pair(self, phi, grid: PeriodicGrid):
        """Grid pairing ``<W, phi> = dx^3 sum_x W(x) phi(x)``."""
        return float(np.sum(self.slab * phi) * grid.cell_volume)


def sample_noise(grid: PeriodicGrid, cov: SpatialCovariance, seed_tag) -> NoiseIncrement:
    seed, replica, step = (int(v) for v in seed_tag)
    spectra = noise_spectra(grid, cov, seed, [replica], step)[0]
    slab = spectra_to_field(spectra, grid)
    return NoiseIncrement(slab, (seed, replica, step), grid.box_length, grid.dt, spectra)


def gaussian_bump(grid: PeriodicGrid, width: float, center=None, amplitude: float = 1.0):
    """``amplitude * exp(-r^2 / (2 width^2))`` around ``center`` (periodic distance)."""
    r = grid.centered_radius(center)
    return amplitude * np.exp(-0.5 * (r / width) ** 2)

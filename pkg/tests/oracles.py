"""Reference computations that share no code path with the library."""

import math

import numpy as np
from scipy import integrate


def riesz_energy_direct(profile, beta, R=4.0):
    """``int int g(x) |x - y|^-beta g(y) dx dy`` for radial ``g`` by physical-space quadrature.

    The angular integral of ``|x - y|^-beta`` over spheres of radii ``r, s`` is
    ``((r + s)^(2-beta) - |r - s|^(2-beta)) / (2 (2 - beta) r s)`` (times 4 pi each).
    """

    def inner(s, r):
        ang = ((r + s) ** (2 - beta) - abs(r - s) ** (2 - beta)) / (2 * (2 - beta))
        return 16 * math.pi**2 * profile(r) * profile(s) * r * s * ang

    lower, _ = integrate.dblquad(inner, 0, R, 0, lambda r: r, epsabs=1e-11, epsrel=1e-10)
    upper, _ = integrate.dblquad(inner, 0, R, lambda r: r, R, epsabs=1e-11, epsrel=1e-10)
    return lower + upper


def kernel_norm_sq_shell(t, beta, amplitude=1.0):
    """``||G(t)||_H^2`` from the shell picture: ``G(t)`` is mass ``t`` spread on the sphere of
    radius ``t``, so the energy is ``t^2`` times the mean of ``|x - y|^-beta`` over two
    independent uniform points on that sphere (``|x-y|^2 = 2 t^2 (1 - cos)``).
    """
    mean, _ = integrate.quad(lambda c: 0.5 * (2 * t * t * (1 - c)) ** (-beta / 2), -1, 1)
    return amplitude * t * t * mean


def lattice_kernel(grid_n, L, density):
    """Real-space periodic kernel ``K(d) = L^-3 sum_k S(k/L) cos(2 pi k.d / L)`` by explicit sums."""
    ks = np.arange(-grid_n // 2, grid_n // 2)
    kx, ky, kz = np.meshgrid(ks, ks, ks, indexing="ij")
    kvec = np.stack([kx.ravel(), ky.ravel(), kz.ravel()], axis=1)
    weights = np.array([density(np.linalg.norm(k) / L) if np.any(k) else 0.0 for k in kvec]) / L**3
    dx = L / grid_n
    pts = np.stack(np.meshgrid(*(np.arange(grid_n),) * 3, indexing="ij"), axis=-1).reshape(-1, 3) * dx

    def kernel(d):
        phase = 2 * np.pi * (d @ kvec.T) / L
        return np.cos(phase) @ weights

    return pts, kernel


def h_inner_dense(phi, psi, L, density):
    """``dx^6 sum_x sum_y phi(x) K(x - y) psi(y)`` with the explicit lattice kernel."""
    n = phi.shape[0]
    pts, kernel = lattice_kernel(n, L, density)
    dx3 = (L / n) ** 3
    total = 0.0
    p, q = phi.ravel(), psi.ravel()
    for i in range(len(pts)):
        total += p[i] * np.dot(kernel(pts[i] - pts), q)
    return total * dx3 * dx3


def shift_response_explicit(levels_per_step, psi, L, dt, n_target, density, point):
    """``I_2(t_n, x) = sum_{j<n} dt g_j L^-3 sum_k S_k sin(w (t_n - t_j))/w F psi(k) e^{2 pi i k.x/L}``
    evaluated by direct summation over the full lattice (no time stepping)."""
    n = psi.shape[0]
    dx3 = (L / n) ** 3
    fpsi = np.fft.fftn(psi) * dx3
    freq = np.fft.fftfreq(n, d=L / n)
    fx, fy, fz = np.meshgrid(freq, freq, freq, indexing="ij")
    rho = np.sqrt(fx**2 + fy**2 + fz**2)
    S = np.where(rho > 0, density(np.where(rho > 0, rho, 1.0)), 0.0)
    omega = 2 * np.pi * rho
    phase = np.exp(2j * np.pi * (fx * point[0] + fy * point[1] + fz * point[2]))
    total = 0.0
    for j in range(n_target):
        tau = (n_target - j) * dt
        sinc = np.where(omega > 0, np.sin(omega * tau) / np.where(omega > 0, omega, 1.0), tau)
        total += dt * levels_per_step[j] * np.sum(S * sinc * fpsi * phase).real / L**3
    return total

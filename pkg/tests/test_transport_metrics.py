import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, optimize, stats

from cwt2.config import ExperimentConfig
from cwt2.errors import ShapeError
from cwt2.girsanov_coupling import separable_shift, simulate
from cwt2.spectral_noise import SpatialCovariance
from cwt2.transport_metrics import (
    EmpiricalLaw,
    Projection,
    cost_matrix,
    default_reg,
    sinkhorn_divergence,
    t2_check,
    t2_verdict,
    w2_empirical,
    w2_gaussian_exact,
    w2_sorted,
)
from cwt2.wave_solver import Drift, InitialData


def w2_linprog(x, y, metric="sup"):
    """Exact discrete W2 between uniform empirical laws via the transport LP."""
    n, m = len(x), len(y)
    c = cost_matrix(x, y, metric).ravel()
    rows = np.zeros((n + m, n * m))
    for i in range(n):
        rows[i, i * m : (i + 1) * m] = 1.0
    for j in range(m):
        rows[n + j, j::m] = 1.0
    b = np.concatenate([np.full(n, 1.0 / n), np.full(m, 1.0 / m)])
    res = optimize.linprog(c, A_eq=rows, b_eq=b, bounds=(0, None), method="highs")
    return math.sqrt(res.fun)


def test_gaussian_identical_is_zero():
    cov = np.array([[2.0, 0.3], [0.3, 1.0]])
    assert w2_gaussian_exact([1, 2], cov, [1, 2], cov) == pytest.approx(0.0, abs=1e-7)


def test_gaussian_mean_shift():
    assert w2_gaussian_exact([0.0], [[1.0]], [3.0], [[1.0]]) == pytest.approx(3.0, abs=1e-12)


@pytest.mark.parametrize("m1,s1,m2,s2", [(0, 1, 0, 2), (1, 0.5, -1, 1.5), (0.3, 2, 0.1, 2)])
def test_gaussian_1d_quantile_oracle(m1, s1, m2, s2):
    integrand = lambda p: (stats.norm.ppf(p, m1, s1) - stats.norm.ppf(p, m2, s2)) ** 2
    ref, _ = integrate.quad(integrand, 0, 1, limit=200)
    assert w2_gaussian_exact([m1], [[s1**2]], [m2], [[s2**2]]) == pytest.approx(math.sqrt(ref), rel=1e-7)


def test_gaussian_commuting_covariances():
    a, b = np.diag([1.0, 4.0, 9.0]), np.diag([4.0, 1.0, 1.0])
    expected = math.sqrt(np.sum((np.sqrt(np.diag(a)) - np.sqrt(np.diag(b))) ** 2))
    assert w2_gaussian_exact(np.zeros(3), a, np.zeros(3), b) == pytest.approx(expected, rel=1e-10)


@given(st.integers(0, 10_000))
def test_gaussian_symmetric(seed):
    rng = np.random.default_rng(seed)
    a, b = rng.standard_normal((3, 3)), rng.standard_normal((3, 3))
    s1, s2 = a @ a.T, b @ b.T
    m1, m2 = rng.standard_normal(3), rng.standard_normal(3)
    assert w2_gaussian_exact(m1, s1, m2, s2) == pytest.approx(w2_gaussian_exact(m2, s2, m1, s1), rel=1e-6, abs=1e-7)


def test_gaussian_rejects_indefinite():
    with pytest.raises(ValueError):
        w2_gaussian_exact([0, 0], [[1, 0], [0, -1]], [0, 0], np.eye(2))
    with pytest.raises(ShapeError):
        w2_gaussian_exact([0, 0], np.eye(3), [0, 0], np.eye(2))


def test_sorted_identical_is_zero(rng):
    x = rng.standard_normal(100)
    assert w2_sorted(x, rng.permutation(x)) == 0.0


def test_sorted_large_sample_shift(rng):
    x, y = rng.standard_normal(10_000), rng.standard_normal(10_000) + 1.0
    assert abs(w2_sorted(x, y) - 1.0) <= 0.05


def test_sorted_unequal_sizes_match_replication(rng):
    x, y = rng.standard_normal(30), rng.standard_normal(20)
    assert w2_sorted(x, y) == pytest.approx(w2_sorted(np.repeat(x, 2), np.repeat(y, 3)), rel=1e-12)


def test_sorted_matches_linprog(rng):
    x, y = rng.standard_normal((25, 1)), rng.standard_normal((25, 1)) * 2 + 1
    assert w2_sorted(x, y) == pytest.approx(w2_linprog(x, y), rel=1e-8)


def test_sinkhorn_close_to_sorting(rng):
    x, y = rng.standard_normal((500, 1)), 1.0 + 1.3 * rng.standard_normal((500, 1))
    est = w2_empirical(EmpiricalLaw(x), EmpiricalLaw(y), reg=default_reg(x, y), n_boot=5)
    assert abs(est.value / w2_sorted(x, y) - 1.0) <= 0.02
    assert est.method == "sinkhorn" and est.error > 0


@pytest.mark.parametrize("metric", ["sup", "euclidean"])
def test_sinkhorn_close_to_linprog_in_3d(rng, metric):
    x = rng.standard_normal((40, 3))
    y = rng.standard_normal((40, 3)) @ np.diag([1.5, 1.0, 0.5]) + 0.7
    est = w2_empirical(EmpiricalLaw(x), EmpiricalLaw(y), metric=metric, n_boot=2, max_iter=10_000)
    assert abs(est.value / w2_linprog(x, y, metric) - 1.0) <= 0.05


def test_sinkhorn_symmetric_and_nonnegative(rng):
    x, y = rng.standard_normal((80, 2)), rng.standard_normal((80, 2))
    eps = 0.1
    a, _, _ = sinkhorn_divergence(x, y, eps, max_iter=10_000)
    b, _, _ = sinkhorn_divergence(y, x, eps, max_iter=10_000)
    assert a == pytest.approx(b, rel=1e-4, abs=1e-8)
    assert a >= -1e-6
    same, _, _ = sinkhorn_divergence(x, x, eps, max_iter=10_000)
    assert abs(same) <= 1e-6


def test_one_dimension_defaults_to_sorting(rng):
    x, y = rng.standard_normal(40), rng.standard_normal(40) + 0.3
    est = w2_empirical(EmpiricalLaw(x), EmpiricalLaw(y), n_boot=10)
    assert est.method == "sorted" and est.value == w2_sorted(x, y)


def test_non_convergence_raises(rng):
    from cwt2.errors import NumericalError

    x, y = rng.standard_normal((40, 3)), rng.standard_normal((40, 3)) + 1
    with pytest.raises(NumericalError):
        w2_empirical(EmpiricalLaw(x), EmpiricalLaw(y), reg=1e-3, max_iter=5, n_boot=0)


def test_reg_zero_requires_one_dimension(rng):
    law = EmpiricalLaw(rng.standard_normal((10, 2)))
    with pytest.raises(ValueError):
        w2_empirical(law, law, reg=0)


def test_bootstrap_is_seeded(rng):
    p, q = EmpiricalLaw(rng.standard_normal(50)), EmpiricalLaw(rng.standard_normal(50) + 0.5)
    a = w2_empirical(p, q, reg=0, n_boot=50, seed=3)
    b = w2_empirical(p, q, reg=0, n_boot=50, seed=3)
    assert a == b


def test_empirical_law_validation():
    with pytest.raises(ShapeError):
        EmpiricalLaw(np.zeros((1, 3)))
    with pytest.raises(ValueError):
        EmpiricalLaw(np.array([0.0, np.nan]))
    with pytest.raises(ValueError):
        Projection([])
    with pytest.raises(ValueError):
        Projection([(0, 0, 0, 0)] * 33)


@settings(max_examples=15)
@given(st.integers(0, 10_000))
def test_subprojection_does_not_increase_distance(seed):
    # dropping coordinates is 1-Lipschitz for the sup metric
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((20, 3))
    y = rng.standard_normal((20, 3)) + rng.standard_normal(3)
    assert w2_sorted(x[:, :1], y[:, :1]) <= w2_linprog(x[:, :2], y[:, :2]) + 1e-9
    assert w2_linprog(x[:, :2], y[:, :2]) <= w2_linprog(x, y) + 1e-9


@pytest.fixture(scope="module")
def linear_cfg():
    return ExperimentConfig(points_per_axis=8, n_steps=16, dt=1 / 16, K=0.0, drift="zero", probes=["end:4,4,4"])


def test_linear_case_distance_is_exact_shift(linear_cfg):
    # K = 0: Q is P translated by the deterministic I_2, so W2 = |I_2(probe)|
    cfg = linear_cfg
    grid, cov = cfg.grid, cfg.cov
    probe = (grid.n_steps, 4, 4, 4)
    shift = separable_shift(grid, cov, amplitude=1.0, width=0.5)
    res = simulate(grid, cov, Drift.zero(), InitialData.zero(grid), 0, 64, shift=shift, probes=[probe])
    d = float(res.probes_u[0, 0] - res.probes_v[0, 0])
    rep = t2_check(Projection([probe]), shift, 64, cfg, n_boot=20)
    assert rep.D == pytest.approx(abs(d), abs=1e-8)
    big = separable_shift(grid, cov, amplitude=10.0, width=0.5)
    rep10 = t2_check(Projection([probe]), big, 64, cfg, n_boot=20)
    assert rep10.D == pytest.approx(10 * rep.D, rel=1e-8)
    assert rep10.B == pytest.approx(10 * rep.B, rel=1e-10)


def test_coupling_bounds_distance():
    cfg = ExperimentConfig(points_per_axis=8, n_steps=16, dt=1 / 16, probes=["end:4,4,4"])
    grid, cov = cfg.grid, cfg.cov
    probes = [(grid.n_steps, 4, 4, 4), (grid.n_steps // 2, 2, 4, 6), (grid.n_steps, 0, 0, 0)]
    shift = separable_shift(grid, cov, amplitude=1.0, width=0.5)
    res = simulate(grid, cov, cfg.make_drift(), cfg.make_init(), 1, 150, shift=shift, probes=probes)
    coupling_cost = math.sqrt(np.mean(np.max((res.probes_u - res.probes_v) ** 2, axis=1)))
    p, q = EmpiricalLaw(res.probes_v), EmpiricalLaw(res.probes_u)
    est = w2_empirical(p, q, n_boot=20, max_iter=10_000)
    assert est.value <= coupling_cost + 3 * est.error
    assert coupling_cost ** 2 <= np.mean(res.eta_T) + 1e-12
    # adding probes does not decrease the estimate beyond its error bar
    one = w2_empirical(EmpiricalLaw(p.samples[:, :1]), EmpiricalLaw(q.samples[:, :1]), reg=est.reg, n_boot=20,
                       max_iter=10_000)
    two = w2_empirical(EmpiricalLaw(p.samples[:, :2]), EmpiricalLaw(q.samples[:, :2]), reg=est.reg, n_boot=20,
                       max_iter=10_000)
    assert one.value <= two.value + two.error + one.error
    assert two.value <= est.value + est.error + two.error


def test_zero_entropy_verdict(rng):
    x = EmpiricalLaw(rng.standard_normal(50))
    rep = t2_verdict(x, x, 0.0, 1.0, n_boot=10)
    assert rep.D == 0.0 and rep.B == 0.0 and rep.verdict == "PASS" and rep.note == ""
    shifted = EmpiricalLaw(x.samples + 1.0)
    bad = t2_verdict(x, shifted, 0.0, 1.0, n_boot=10)
    assert bad.verdict == "FAIL" and "inconsistent" in bad.note


def test_projection_off_grid(linear_cfg):
    with pytest.raises(ValueError):
        Projection([(99, 0, 0, 0)]).check_grid(linear_cfg.grid)

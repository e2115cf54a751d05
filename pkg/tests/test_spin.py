import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pullback_ngd import oracles
from pullback_ngd.metric import HessianRegularization, hessian_reference
from pullback_ngd.spin import (
    SpinLattice,
    min_cost,
    reference_hessian_apply,
    spin_cost,
    spin_gradient,
    spin_hessian_reference_apply,
    spin_normalization_map,
    spin_pullback_metric,
    spin_regularization,
)


def test_single_antiparallel_bond():
    lat = SpinLattice(2, 1, periodic=False)
    assert spin_cost(lat, np.array([1.0, 0, 0, -1.0, 0, 0])) == -0.5


def test_aligned_and_neel():
    lat = SpinLattice(4, 6)
    aligned = np.tile([0.0, 0.3, 0.0], lat.n_sites)
    assert spin_cost(lat, aligned) == pytest.approx(2.0, abs=1e-15)
    assert spin_cost(lat, lat.neel()) == -2.0
    assert min_cost(lat) == -2.0
    assert min_cost(SpinLattice(3, 4)) is None


def test_neel_is_stationary():
    lat = SpinLattice(4, 4)
    np.testing.assert_array_equal(spin_gradient(lat, lat.neel()), 0.0)


def test_gradient_fd_and_per_site_orthogonality():
    lat = SpinLattice(4, 4)
    x = lat.random_spins(1)
    g = spin_gradient(lat, x)
    fd = oracles.finite_difference_gradient(lambda z: spin_cost(lat, z), x)
    assert np.linalg.norm(g - fd) <= 1e-6 * np.linalg.norm(fd)
    per_site = np.sum(g.reshape(-1, 3) * x.reshape(-1, 3), axis=1)
    assert np.abs(per_site).max() <= 1e-14


def test_hessian_apply_single_site_open():
    lat = SpinLattice(3, 3, periodic=False)
    reg = HessianRegularization(-0.5)
    u = np.zeros(lat.dim)
    u[3 * 4:3 * 5] = [1.0, 2.0, 3.0]  # centre site (1, 1)
    out = spin_hessian_reference_apply(lat, u, reg).reshape(3, 3, 3)
    expected = np.zeros((3, 3, 3))
    for iy, ix in ((0, 1), (2, 1), (1, 0), (1, 2)):
        expected[iy, ix] = np.array([1.0, 2.0, 3.0]) / 9
    expected[1, 1] += reg.epsilon * np.array([1.0, 2.0, 3.0])
    np.testing.assert_allclose(out, expected, atol=1e-15)


def test_periodic_adjacency_min_eigenvalue():
    lat = SpinLattice(4, 4)
    A = np.column_stack([reference_hessian_apply(lat, e) for e in np.eye(lat.dim)])
    lam = oracles.dense_symmetric_eigensolve(A)[0][0]
    assert lam == pytest.approx(-4.0 / 16, abs=1e-12)
    reg = spin_regularization(lat)
    assert reg.epsilon == pytest.approx(4.0 / 16 + 0.1, abs=1e-15)


def test_power_iteration_regularization_for_odd_lattice():
    lat = SpinLattice(3, 3, periodic=False)
    A = np.column_stack([reference_hessian_apply(lat, e) for e in np.eye(lat.dim)])
    lam = oracles.dense_symmetric_eigensolve(A)[0][0]
    assert spin_regularization(lat, 200).epsilon_h_estimate == pytest.approx(lam, rel=0.05)


def test_hessian_vs_finite_difference():
    lat = SpinLattice(3, 3)

    def lbar(y):
        return lat.bond_sum(y.reshape(3, 3, 3)) / lat.n_sites

    y0 = np.random.default_rng(2).standard_normal(lat.dim)
    h = 1e-4
    H = np.zeros((lat.dim, lat.dim))
    for i in range(lat.dim):
        e = np.zeros(lat.dim)
        e[i] = h
        H[:, i] = (
            oracles.finite_difference_gradient(lbar, y0 + e) - oracles.finite_difference_gradient(lbar, y0 - e)
        ) / (2 * h)
    A = np.column_stack([reference_hessian_apply(lat, e) for e in np.eye(lat.dim)])
    assert np.abs(A - H).max() <= 1e-6


def test_pullback_dense_radial_and_psd():
    lat = SpinLattice(3, 3)
    reg = spin_regularization(lat)
    x = lat.random_spins(3)
    op = spin_pullback_metric(lat, x, reg)
    ref = hessian_reference(lambda y, u: reference_hessian_apply(lat, u), reg)
    G = oracles.assemble_dense_metric(spin_normalization_map(lat), ref, x)
    assert np.abs(op.to_dense() - G).max() <= 1e-10
    # radial direction per site
    s = x.reshape(-1, 3)
    radial = (s * np.random.default_rng(4).uniform(0.5, 2.0, (lat.n_sites, 1))).ravel()
    np.testing.assert_allclose(spin_pullback_metric(lat, x, reg, ridge=0.01).apply(radial), 0.01 * radial, atol=1e-14)
    assert np.linalg.eigvalsh(G).min() >= -1e-10
    assert np.abs(G - G.T).max() <= 1e-12


def test_random_spins_and_io(tmp_path):
    lat = SpinLattice(3, 2)
    x = lat.random_spins(5)
    assert np.array_equal(x, lat.random_spins(5))
    lat.dump(x, tmp_path / "s.txt")
    assert np.array_equal(lat.load(tmp_path / "s.txt"), x)
    first = (tmp_path / "s.txt").read_text().splitlines()[1].split()
    assert first[:2] == ["1", "0"]


def test_lattice_validation():
    with pytest.raises(ValueError):
        SpinLattice(0, 3)
    with pytest.raises(ValueError):
        SpinLattice(2, 2).grid(np.ones(5))
    with pytest.raises(ValueError):
        spin_cost(SpinLattice(2, 1), np.zeros(6))


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), site=st.integers(0, 11), alpha=st.floats(0.01, 100))
def test_per_site_scale_invariance_and_bounds(seed, site, alpha):
    lat = SpinLattice(4, 3)
    x = lat.random_spins(seed)
    c = spin_cost(lat, x)
    assert -2.0 - 1e-12 <= c <= 2.0 + 1e-12
    y = x.copy()
    y[3 * site:3 * site + 3] *= alpha
    assert abs(spin_cost(lat, y) - c) <= 1e-12 * max(abs(c), 1.0)

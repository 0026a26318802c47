import numpy as np
import pytest
from hypothesis import given, strategies as st

from mmvsar.geometry import gotcha_geometry, imaging_grid, segment_aperture
from mmvsar.polarimetric import (PolarimetricForward, TensorScatterer, direction_cosines,
                                 frame, gamma_for_position, gamma_matrix, green_tensor_exact,
                                 green_tensor_far_field, pol_forward, pol_unknown_matrix,
                                 projection_eigenbasis, recover_tensor_minnorm, row_to_tensor,
                                 tensor_to_row)
from mmvsar.sensing import NoiseSpec

seeds = st.integers(0, 2 ** 31 - 1)


def _sym(rng):
    A = rng.standard_normal((3, 3))
    return A + A.T


def _direction(rng):
    n = rng.standard_normal(3)
    return n / np.linalg.norm(n)


def _upper(M):
    return tensor_to_row(0.5 * (M + M.T))


def test_row_form_round_trip():
    rho = np.array([[1, 4, 5], [4, 2, 6], [5, 6, 3]], float)
    np.testing.assert_array_equal(tensor_to_row(rho), [1, 2, 3, 4, 5, 6])
    np.testing.assert_array_equal(row_to_tensor(tensor_to_row(rho)), rho)
    with pytest.raises(ValueError):
        tensor_to_row(np.arange(9.0).reshape(3, 3))
    with pytest.raises(ValueError):
        row_to_tensor(np.ones(5))


def test_far_field_tensor_at_nadir():
    np.testing.assert_array_equal(green_tensor_far_field(0, 0, 1), np.diag([1, 1, 0]))
    with pytest.raises(ValueError):
        green_tensor_far_field(0.5, 0.5, 0.5)


@given(seed=seeds)
def test_far_field_tensor_is_projector(seed):
    n = _direction(np.random.default_rng(seed))
    P = green_tensor_far_field(*n)
    w, V = np.linalg.eigh(P)
    np.testing.assert_allclose(w, [0, 1, 1], atol=1e-12)
    np.testing.assert_allclose(abs(V[:, 0] @ n), 1.0, atol=1e-12)


def test_far_field_matches_dyadic_tensor():
    geom = gotcha_geometry()
    r = geom.aperture_center
    k = geom.wavenumber
    L = geom.standoff
    for y in ([0, 0, 0], [0, 3.0, 0], [0, -5.0, 0]):
        R = r - np.asarray(y)
        dist = np.linalg.norm(R)
        exact = green_tensor_exact(k, r, y) * 4 * np.pi * dist / np.exp(1j * k * dist)
        far = green_tensor_far_field(*(R / dist))
        err = np.linalg.norm(exact - far) / np.linalg.norm(far)
        assert err < 10 * geom.wavelength / L
    with pytest.raises(ValueError):
        green_tensor_exact(k, r, r)


def test_gamma_at_nadir():
    np.testing.assert_allclose(gamma_matrix(0, 0, 1).entries, np.diag([1, 1, 0, 1, 0, 0]),
                               atol=1e-15)
    with pytest.raises(ValueError):
        gamma_matrix(1, 1, 0)


@given(seed=seeds)
def test_gamma_matches_tensor_sandwich(seed):
    rng = np.random.default_rng(seed)
    n = _direction(rng)
    gam = gamma_matrix(*n).entries
    P = np.eye(3) - np.outer(n, n)
    for _ in range(10):
        rho = _sym(rng)
        direct = _upper(P @ rho @ P)
        np.testing.assert_allclose(tensor_to_row(rho) @ gam, direct,
                                   atol=1e-10 * np.abs(direct).max())


@given(seed=seeds)
def test_gamma_rank_three(seed):
    n = _direction(np.random.default_rng(seed))
    s = np.linalg.svd(gamma_matrix(*n).entries, compute_uv=False)
    assert np.all(s[3:] < 1e-10 * s[0])
    assert s[2] > 1e-3 * s[0]


@given(seed=seeds)
def test_longitudinal_components_are_invisible(seed):
    rng = np.random.default_rng(seed)
    n = _direction(rng)
    w = rng.standard_normal(3)
    rho = np.outer(n, w) + np.outer(w, n)
    out = tensor_to_row(rho) @ gamma_matrix(*n).entries
    assert np.max(np.abs(out)) < 1e-12 * max(1.0, np.abs(rho).max())


def test_projection_eigenbasis():
    b = projection_eigenbasis([0, 0, 5.0])
    np.testing.assert_allclose(b.v3, [0, 0, 1])
    for d in ([0, 0, 5.0], [1.0, 2.0, 3.0], [-7000, 0, 8000]):
        b = projection_eigenbasis(d)
        np.testing.assert_allclose(b.matrix.T @ b.matrix, np.eye(3), atol=1e-12)
        np.testing.assert_allclose(b.v3, np.asarray(d) / np.linalg.norm(d))
        np.testing.assert_array_equal(b.matrix, projection_eigenbasis(d).matrix)
    with pytest.raises(ValueError):
        projection_eigenbasis([0, 0, 0])


def test_recover_zero_row():
    g = gamma_matrix(0, 0, 1)
    assert np.all(recover_tensor_minnorm(np.zeros(6), g).matrix == 0)


@given(seed=seeds)
def test_recover_transverse_tensor_exactly(seed):
    rng = np.random.default_rng(seed)
    n = _direction(rng)
    basis = projection_eigenbasis(n)
    V = basis.matrix[:, :2]
    T = _sym(rng)[:2, :2]
    rho = V @ T @ V.T  # no component along n
    g = gamma_matrix(*n)
    est = recover_tensor_minnorm(tensor_to_row(rho) @ g.entries, g, basis)
    np.testing.assert_allclose(est.matrix, rho, atol=1e-8)


@given(seed=seeds)
def test_recover_identifies_transverse_block(seed):
    rng = np.random.default_rng(seed)
    n = _direction(rng)
    basis = projection_eigenbasis(n)
    rho = _sym(rng)
    g = gamma_matrix(*n)
    est = recover_tensor_minnorm(tensor_to_row(rho) @ g.entries, g, basis)
    V = basis.matrix[:, :2]
    np.testing.assert_allclose(est.transverse, V.T @ rho @ V, atol=1e-8)
    np.testing.assert_allclose(est.matrix @ n, 0, atol=1e-8)


def test_recover_euclidean_option():
    n = _direction(np.random.default_rng(0))
    g = gamma_matrix(*n)
    rho = _sym(np.random.default_rng(1))
    x = tensor_to_row(rho) @ g.entries
    est = recover_tensor_minnorm(x, g, weighting="euclidean")
    np.testing.assert_allclose(est.row @ g.entries, x, atol=1e-10)
    with pytest.raises(ValueError):
        recover_tensor_minnorm(x, g, weighting="max")


@pytest.fixture(scope="module")
def pol():
    geom = gotcha_geometry(element_spacing=5.0)
    grid = imaging_grid(geom, 10.0, 1.0)
    subs = segment_aperture(geom, 300.0, 200.0, n_views=4)
    return geom, grid, subs, PolarimetricForward.build(geom, grid, subs)


def test_frame_and_direction_cosines(pol):
    geom, grid, subs, fwd = pol
    F = frame(geom)
    np.testing.assert_allclose(F @ F.T, np.eye(3), atol=1e-15)
    e1, e2, b = direction_cosines(geom, subs[0].center)
    assert e1 ** 2 + e2 ** 2 + b ** 2 == pytest.approx(1.0)
    assert b > 0
    with pytest.raises(ValueError):
        direction_cosines(geom, geom.scene_center)


def test_pol_forward_zero_and_single(pol):
    geom, grid, subs, fwd = pol
    zero = [TensorScatterer(3, np.zeros(6))]
    assert np.all(np.asarray(pol_forward(zero, fwd).entries) == 0)
    sc = [TensorScatterer(4, np.eye(3))]
    D = np.asarray(pol_forward(sc, fwd, NoiseSpec()).entries)
    for v, (K, gam) in enumerate(zip(fwd.kernels, fwd.gammas)):
        expect = np.outer(K[:, 4], tensor_to_row(np.eye(3)) @ gam.entries)
        np.testing.assert_allclose(D[:, 6 * v:6 * v + 6], expect, atol=1e-12)


def test_pol_unknown_layout(pol):
    geom, grid, subs, fwd = pol
    rho = _sym(np.random.default_rng(5))
    X = pol_unknown_matrix([TensorScatterer(2, rho)], fwd)
    assert X.shape == (grid.n_points, 24)
    assert set(np.flatnonzero(np.abs(X).sum(1))) == {2}
    gam = gamma_for_position(geom, subs[1].center).entries
    np.testing.assert_allclose(X[2, 6:12] / fwd.phases[2, 1], tensor_to_row(rho) @ gam)
    with pytest.raises(ValueError):
        fwd.apply(np.zeros((grid.n_points, 5)))
    with pytest.raises(IndexError):
        pol_unknown_matrix([TensorScatterer(grid.n_points, rho)], fwd)


def test_tensor_scatterer_validation():
    with pytest.raises(ValueError):
        TensorScatterer(0, np.arange(9.0).reshape(3, 3))
    np.testing.assert_array_equal(TensorScatterer(0, np.arange(6.0)).tensor,
                                  row_to_tensor(np.arange(6.0)))

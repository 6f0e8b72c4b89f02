"""Grid operators: exactness on plane waves, Hermiticity, the square identity,
vector calculus, gauge pipeline, and field I/O."""

import numpy as np
import pytest

from diraclab.algebra import sigma_dot
from diraclab.grid import (
    Field2,
    Field4,
    Grid3D,
    GridMismatchError,
    OperatorHandle,
    apply,
    gauge_transform,
    gauged_mode,
    interp_trilinear,
    read_field,
    residual_norm,
    sample_field,
    sample_potential,
    spectral_curl,
    spectral_divergence,
    spectral_scalar_gradient,
    susy_square_check,
    write_field,
)
from diraclab.modes import LossYauMode
from diraclab.potentials import LossYau, Scaled

FREE = Scaled(t=0.0, inner=LossYau())


def test_grid_validation():
    with pytest.raises(ValueError):
        Grid3D(n=12, L=10.0)
    with pytest.raises(ValueError):
        Grid3D(n=4, L=10.0)
    with pytest.raises(ValueError):
        Grid3D(n=16, L=-1.0)
    g = Grid3D(n=16, L=8.0)
    assert g.h == 1.0
    assert g.axis[0] == -8.0 and g.axis[-1] == 7.0


def plane_wave(grid, k, spinor):
    xs, ys, zs = np.meshgrid(grid.axis, grid.axis, grid.axis, indexing="ij")
    phase = np.exp(1j * (k[0] * xs + k[1] * ys + k[2] * zs))
    return Field2(grid=grid, values=phase[..., None] * np.asarray(spinor))


def test_free_operator_exact_on_plane_waves():
    g = Grid3D(n=16, L=5.0)
    k = (2 * np.pi / 10.0) * np.array([2.0, -1.0, 3.0])  # on the dual lattice
    evals, evecs = np.linalg.eigh(sigma_dot(k))
    op = OperatorHandle(kind="t_a", grid=g, potential=FREE)
    for lam, v in zip(evals, evecs.T):
        f = plane_wave(g, k, v)
        assert residual_norm(op, f, float(lam)) <= 1e-12


def test_free_dirac_dispersion():
    g = Grid3D(n=16, L=5.0)
    k = (2 * np.pi / 10.0) * np.array([1.0, 0.0, 0.0])
    m = 0.7
    lam = np.sqrt(np.dot(k, k) + m * m)
    # eigenvector of [[m, sigma.k], [sigma.k, -m]] at +lam, built blockwise
    sk = sigma_dot(k)
    v2 = np.linalg.eigh(sk)[1][:, 1]  # sigma.k eigenvector at +|k|
    upper = np.cos(0.5 * np.arctan2(np.linalg.norm(k), m)) * v2
    lower = np.sin(0.5 * np.arctan2(np.linalg.norm(k), m)) * v2
    xs, ys, zs = np.meshgrid(g.axis, g.axis, g.axis, indexing="ij")
    phase = np.exp(1j * k[0] * xs)
    vals = phase[..., None] * np.concatenate([upper, lower])
    f = Field4(grid=g, values=vals)
    op = OperatorHandle(kind="h_a", grid=g, potential=FREE, mass=m)
    assert residual_norm(op, f, float(lam)) <= 1e-12


def test_operator_hermitian_on_random_fields():
    g = Grid3D(n=8, L=6.0)
    rng = np.random.default_rng(11)
    op = OperatorHandle(kind="t_a", grid=g, potential=LossYau())
    for _ in range(5):
        f = Field2(grid=g, values=rng.normal(size=(8, 8, 8, 2)) + 1j * rng.normal(size=(8, 8, 8, 2)))
        u = Field2(grid=g, values=rng.normal(size=(8, 8, 8, 2)) + 1j * rng.normal(size=(8, 8, 8, 2)))
        lhs = u.inner(apply(op, f))
        rhs = apply(op, u).inner(f)
        assert lhs == pytest.approx(rhs, abs=1e-10 * f.norm() * u.norm())


def test_susy_square_identity():
    g = Grid3D(n=16, L=10.0)
    assert susy_square_check(g, LossYau(), 1.0, trials=20, seed=0) <= 1e-10


def test_chiral_map_anticommutes():
    # J(u, l) = (l, -u) flips the sign of H exactly on the grid
    g = Grid3D(n=8, L=6.0)
    rng = np.random.default_rng(7)
    op = OperatorHandle(kind="h_a", grid=g, potential=LossYau(), mass=1.3)
    vals = rng.normal(size=(8, 8, 8, 4)) + 1j * rng.normal(size=(8, 8, 8, 4))
    J = lambda v: np.concatenate([v[..., 2:], -v[..., :2]], axis=-1)
    hv = apply(op, Field4(grid=g, values=vals)).values
    hjv = apply(op, Field4(grid=g, values=J(vals))).values
    assert np.linalg.norm(J(hv) + hjv) <= 1e-12 * np.linalg.norm(vals)


def test_operator_handle_validation():
    g = Grid3D(n=8, L=6.0)
    with pytest.raises(ValueError):
        OperatorHandle(kind="h_a", grid=g, potential=LossYau(), mass=-0.8)
    with pytest.raises(ValueError):
        OperatorHandle(kind="t_a", grid=g, potential=None)
    with pytest.raises(ValueError):
        OperatorHandle(kind="nope", grid=g, potential=LossYau())


def test_gradient_exact_on_lattice_waves():
    g = Grid3D(n=16, L=4.0)
    xs, ys, zs = np.meshgrid(g.axis, g.axis, g.axis, indexing="ij")
    k = 2 * np.pi / 8.0
    s = np.sin(2 * k * xs) * np.cos(k * ys)
    grad = spectral_scalar_gradient(g, s)
    assert np.allclose(grad[..., 0], 2 * k * np.cos(2 * k * xs) * np.cos(k * ys), atol=1e-12)
    assert np.allclose(grad[..., 1], -k * np.sin(2 * k * xs) * np.sin(k * ys), atol=1e-12)
    assert np.allclose(grad[..., 2], 0.0, atol=1e-13)


def test_divergence_of_curl_vanishes():
    g = Grid3D(n=16, L=5.0)
    rng = np.random.default_rng(2)
    A = rng.normal(size=(16, 16, 16, 3))
    c = spectral_curl(g, A)
    assert np.linalg.norm(spectral_divergence(g, c)) <= 1e-12 * np.linalg.norm(c)


def test_gauge_transform_pipeline():
    g = Grid3D(n=16, L=10.0)
    pot = LossYau()
    gauged_spec, chi = gauge_transform(pot, g)
    A_t = sample_potential(gauged_spec, g)
    A_0 = sample_potential(pot, g)
    assert np.linalg.norm(spectral_divergence(g, A_t)) <= 1e-8 * np.linalg.norm(A_t)
    curl_diff = spectral_curl(g, A_t) - spectral_curl(g, A_0)
    assert np.linalg.norm(curl_diff) <= 1e-10 * np.linalg.norm(spectral_curl(g, A_0))
    # the gauged spec must evaluate as A + grad chi on the nodes
    assert np.allclose(A_t, A_0 + chi.gradient_values(), atol=1e-10)


def test_gauged_mode_preserves_pointwise_norm():
    g = Grid3D(n=16, L=10.0)
    f = sample_field(LossYauMode().eval, g)
    _, chi = gauge_transform(LossYau(), g)
    ft = gauged_mode(f, chi)
    assert np.allclose(np.abs(ft.values), np.abs(f.values), atol=1e-14)
    with pytest.raises(GridMismatchError):
        gauged_mode(Field2(grid=Grid3D(n=8, L=10.0),
                           values=np.zeros((8, 8, 8, 2), dtype=complex)), chi)


def test_interp_trilinear_reproduces_nodes_and_linears():
    g = Grid3D(n=8, L=4.0)
    nodes = g.nodes
    vals = (1.0 + 2.0 * nodes[..., 0] - 0.5 * nodes[..., 1])[..., None].astype(complex)
    got = interp_trilinear(g, vals, np.array([0.25, -1.3, 2.0]))
    assert got[0] == pytest.approx(1.0 + 2.0 * 0.25 - 0.5 * (-1.3), abs=1e-12)
    node_pt = np.array([g.axis[3], g.axis[5], g.axis[1]])
    assert interp_trilinear(g, vals, node_pt)[0] == pytest.approx(vals[3, 5, 1, 0], abs=0)
    with pytest.raises(ValueError):
        interp_trilinear(g, vals, np.array([0.0, 0.0, 4.0]))  # right edge excluded


def test_field_io_round_trip(tmp_path):
    g = Grid3D(n=8, L=3.0)
    rng = np.random.default_rng(23)
    f = Field4(grid=g, values=rng.normal(size=(8, 8, 8, 4)) + 1j * rng.normal(size=(8, 8, 8, 4)))
    p = tmp_path / "mode.dtl"
    write_field(p, f)
    back = read_field(p)
    assert isinstance(back, Field4)
    assert back.grid == g
    assert np.array_equal(back.values, f.values)


def test_sample_field_shapes():
    g = Grid3D(n=8, L=5.0)
    f2 = sample_field(LossYauMode().eval, g)
    assert isinstance(f2, Field2) and f2.values.shape == (8, 8, 8, 2)
    with pytest.raises(ValueError):
        Field2(grid=g, values=np.zeros((4, 4, 4, 2), dtype=complex))
    other = Field2(grid=Grid3D(n=8, L=4.0), values=np.zeros((8, 8, 8, 2), dtype=complex))
    with pytest.raises(GridMismatchError):
        other.inner(f2)

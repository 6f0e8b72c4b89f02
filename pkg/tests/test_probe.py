"""Eigensolver, scans, quasi-modes, and decay fits on small grids.

The free operator gives exact references on the dual lattice: constants span
the kernel of sigma.D, plane-wave shells sit at exactly degenerate +-|k|, and
the squared operator's floor is m^2. Everything here runs in seconds.
"""

import numpy as np
import pytest

from diraclab.grid import Grid3D, OperatorHandle, sample_field
from diraclab.modes import LossYauMode
from diraclab.potentials import LossYau, Scaled
from diraclab.probe import (
    EigsOptions,
    build_weyl_quasimode,
    coupling_scan,
    decay_fit,
    eigs_near,
    gap_scan,
    initial_block_from_fields,
    kernel_threshold,
    write_coupling_csv,
    write_decay_csv,
    write_gap_csv,
)

FREE = Scaled(t=0.0, inner=LossYau())


def test_kernel_threshold_formula():
    g = Grid3D(n=64, L=20.0)
    want = 0.1 / 20.0 + 0.1 * np.exp(-np.pi * 64 / 40.0)
    assert kernel_threshold(g) == pytest.approx(want, rel=1e-12)
    # box term dominates at practical sizes
    assert kernel_threshold(Grid3D(n=64, L=10.0)) > kernel_threshold(g)


def test_free_kernel_is_two_constants():
    g = Grid3D(n=16, L=5.0)
    op = OperatorHandle(kind="t_a", grid=g, potential=FREE)
    rep = eigs_near(op, 0.0, 2)
    assert np.allclose(rep.eigenvalues, 0.0, atol=1e-10)
    assert max(rep.residuals) <= 1e-8
    assert rep.kernel_dim_estimate == 2
    assert rep.converged


def test_free_shell_eigenvalues_exact():
    g = Grid3D(n=16, L=5.0)
    op = OperatorHandle(kind="t_a", grid=g, potential=FREE)
    k1 = 2 * np.pi / 10.0
    rep = eigs_near(op, float(k1), 2)
    assert np.allclose(rep.eigenvalues, k1, atol=1e-9)
    assert rep.kernel_dim_estimate == 0


def test_free_squared_floor_is_mass_squared():
    g = Grid3D(n=16, L=5.0)
    op = OperatorHandle(kind="h_squared", grid=g, potential=FREE, mass=0.9)
    rep = eigs_near(op, 0.81, 1)
    assert rep.eigenvalues[0] == pytest.approx(0.81, abs=1e-9)


def test_eigs_near_validation():
    g = Grid3D(n=8, L=5.0)
    op = OperatorHandle(kind="t_a", grid=g, potential=FREE)
    with pytest.raises(ValueError):
        eigs_near(op, 0.0, 0)
    with pytest.raises(ValueError):
        eigs_near(op, 0.0, 1, EigsOptions(initial_block=np.zeros((7, 2), dtype=complex)))


def test_initial_block_from_fields():
    g = Grid3D(n=8, L=5.0)
    op = OperatorHandle(kind="t_a", grid=g, potential=LossYau())
    f = sample_field(LossYauMode().eval, g)
    X = initial_block_from_fields(op, [f])
    assert X.shape == (8**3 * 2, 3)  # field + one constant per component
    assert np.allclose(X[:, 0], f.values.reshape(-1))
    with pytest.raises(ValueError):
        initial_block_from_fields(op, [f.values[..., :1]])


def test_eigen_report_round_trip():
    g = Grid3D(n=8, L=5.0)
    op = OperatorHandle(kind="t_a", grid=g, potential=FREE)
    rep = eigs_near(op, 0.0, 1)
    d = rep.to_dict()
    assert d["kind"] == "t_a" and d["grid_n"] == 8 and d["target"] == 0.0
    v = rep.vector_field(g, 0)
    assert v.values.shape == (8, 8, 8, 2)
    # ritz vectors come out unit in flat coordinates; the field norm carries h^3
    assert v.norm() == pytest.approx(g.h ** 1.5, rel=1e-6)


def test_gap_scan_validation():
    g = Grid3D(n=8, L=5.0)
    pot = LossYau()
    with pytest.raises(ValueError):
        gap_scan(pot, 1.0, g)  # neither resolution nor lambdas
    with pytest.raises(ValueError):
        gap_scan(pot, 1.0, g, resolution=3, lambdas=[0.0])
    with pytest.raises(ValueError):
        gap_scan(pot, 1.0, g, resolution=2)
    with pytest.raises(ValueError):
        gap_scan(pot, 1.0, g, lambdas=[0.0, 0.99])  # too close to the edge
    with pytest.raises(ValueError):
        gap_scan(pot, -1.0, g, resolution=3)


def test_gap_scan_free_proxies_are_clean():
    g = Grid3D(n=16, L=5.0)
    rep = gap_scan(FREE, 1.0, g, lambdas=[-0.5, 0.0, 0.5])
    assert [lam for lam, _ in rep.rows] == [-0.5, 0.0, 0.5]
    for lam, proxy in rep.rows:
        assert proxy == pytest.approx(1.0, abs=1e-9)
    assert set(np.sign(rep.nearest_eigenvalues)) <= {-1.0, 1.0}


def test_coupling_scan_validation():
    g = Grid3D(n=8, L=5.0)
    with pytest.raises(ValueError):
        coupling_scan(LossYau(), [0.0, 1.0], g)


def test_decay_fit_verdicts_on_synthetic_profiles():
    def mode_like(pts):
        r2 = 1.0 + np.sum(np.asarray(pts) ** 2, axis=-1)
        return (1.0 / r2)[..., None] * np.ones(2)

    def resonance_like(pts):
        r = np.sqrt(1.0 + np.sum(np.asarray(pts) ** 2, axis=-1))
        return (1.0 / r)[..., None] * np.ones(2)

    radii = np.geomspace(10.0, 100.0, 12)
    fit_m = decay_fit(mode_like, radii)
    assert fit_m.verdict == "mode_tail"
    assert fit_m.exponent == pytest.approx(2.0, abs=0.05)
    fit_r = decay_fit(resonance_like, radii)
    assert fit_r.verdict == "resonance_tail"
    assert not fit_r.flagged  # no potential context given
    fit_f = decay_fit(resonance_like, radii, potential_rho=2.0)
    assert fit_f.flagged  # |x|^-1 tail is impossible under fast decay


def test_decay_fit_noise_floor_is_undetermined():
    tiny = lambda pts: 1e-200 * np.ones(np.asarray(pts).shape[:-1] + (2,))
    fit = decay_fit(tiny, np.geomspace(10.0, 100.0, 8))
    assert fit.verdict == "undetermined"
    assert np.isnan(fit.exponent)


def test_decay_fit_field_window_must_fit_box():
    g = Grid3D(n=8, L=5.0)
    f = sample_field(LossYauMode().eval, g)
    with pytest.raises(ValueError):
        decay_fit(f, [1.0, 2.0, 6.0])  # 6 > L


def test_weyl_quasimode_free_is_exact():
    g = Grid3D(n=16, L=5.0)
    lam0 = float(np.sqrt(1.0 + (2 * np.pi / 10.0) ** 2))
    qm = build_weyl_quasimode(FREE, 1.0, lam0, 1, g)
    assert qm.residual <= 1e-10
    assert qm.envelope_width is None
    assert qm.nu0 == pytest.approx(2 * np.pi / 10.0, rel=1e-12)


def test_weyl_quasimode_envelope_grows_with_index():
    g = Grid3D(n=16, L=10.0)
    widths = [build_weyl_quasimode(LossYau(), 1.0, 1.5, ni, g).envelope_width
              for ni in (1, 2)]
    assert widths[0] < widths[1]


def test_weyl_quasimode_validation():
    g = Grid3D(n=16, L=5.0)
    with pytest.raises(ValueError):
        build_weyl_quasimode(FREE, 1.0, 0.5, 1, g)  # below the threshold m
    with pytest.raises(ValueError):
        build_weyl_quasimode(FREE, 1.0, 1.5, 0, g)


def test_csv_writers(tmp_path):
    g = Grid3D(n=16, L=5.0)
    gap = gap_scan(FREE, 1.0, g, lambdas=[-0.25, 0.0, 0.25])
    p = tmp_path / "gap.csv"
    write_gap_csv(gap, p)
    lines = p.read_text().strip().splitlines()
    assert lines[0] == "lambda,proxy" and len(lines) == 4

    scan = coupling_scan(LossYau(), [0.0, 1.0, 2.0], Grid3D(n=8, L=5.0))
    p2 = tmp_path / "coupling.csv"
    write_coupling_csv(scan, p2)
    lines = p2.read_text().strip().splitlines()
    assert lines[0] == "t,lambda_min" and len(lines) == 4

    fit = decay_fit(lambda pts: (1.0 / (1.0 + np.sum(np.asarray(pts) ** 2, axis=-1)))[..., None]
                    * np.ones(2), np.geomspace(5, 50, 6))
    p3 = tmp_path / "decay.csv"
    write_decay_csv(fit, p3)
    lines = p3.read_text().strip().splitlines()
    assert lines[0] == "r,amplitude" and len(lines) == 7

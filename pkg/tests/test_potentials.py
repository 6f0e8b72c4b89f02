"""Closed forms, decay classification, and serialization of potentials."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from diraclab.potentials import (
    AMN,
    ClassificationUndetermined,
    LossYau,
    Sampled,
    Scaled,
    UnsupportedVariant,
    classify_decay,
    default_classification,
    eval_potential,
    kernel_dim_bound,
    potential_from_json,
    potential_to_json,
    registered_amn_levels,
    w0_of,
)
from diraclab.quadrature import sphere_directions_26

unit = st.floats(min_value=-1.0, max_value=1.0, allow_nan=False)
point = st.tuples(
    st.floats(min_value=-50, max_value=50, allow_nan=False),
    st.floats(min_value=-50, max_value=50, allow_nan=False),
    st.floats(min_value=-50, max_value=50, allow_nan=False),
)


def bracket(x):
    return np.sqrt(1.0 + np.dot(x, x))


def test_w0_of_default_points_up():
    assert np.allclose(w0_of((1.0, 0.0)), [0.0, 0.0, 1.0])


def test_w0_of_unit_for_any_normalized_spinor():
    assert np.linalg.norm(w0_of((0.6, 0.8j))) == pytest.approx(1.0, abs=1e-14)
    with pytest.raises(ValueError):
        w0_of((2.0, 0.0))


def test_loss_yau_at_reference_points():
    pot = LossYau()
    # (0,0,1): bracket^2 = 2, (1-1)w0 + 2*1*(0,0,1) + 2 w0 x x = (0,0,2); 3/4*2
    assert np.allclose(eval_potential(pot, (0.0, 0.0, 1.0)), [0.0, 0.0, 1.5])
    assert np.allclose(eval_potential(pot, (0.0, 0.0, 0.0)), [0.0, 0.0, 3.0])


@given(point)
@settings(max_examples=200)
def test_loss_yau_norm_closed_form(x):
    pot = LossYau()
    a = eval_potential(pot, x)
    assert np.linalg.norm(a) == pytest.approx(3.0 / bracket(x) ** 2, rel=1e-10)


@given(point)
@settings(max_examples=50)
def test_loss_yau_batch_matches_scalar(x):
    pot = LossYau()
    pts = np.array([x, (0.0, 0.0, 0.0), x])
    batch = eval_potential(pot, pts)
    assert batch.shape == (3, 3)
    assert np.allclose(batch[0], eval_potential(pot, x))
    assert np.allclose(batch[2], batch[0])


def test_loss_yau_rejects_unnormalized_phi0():
    with pytest.raises(ValueError):
        LossYau(phi0=((2.0, 0.0), (0.0, 0.0)))


@given(st.floats(min_value=-3, max_value=3, allow_nan=False), point)
@settings(max_examples=50)
def test_scaled_is_pointwise_multiple(t, x):
    base = LossYau()
    assert np.allclose(
        eval_potential(Scaled(t=t, inner=base), x), t * eval_potential(base, x)
    )


def test_loss_yau_classification():
    rep = default_classification(LossYau())
    assert rep.in_SU and rep.in_BE and rep.in_E
    assert rep.rho_fit >= 1.05  # global fit, flattened by the |x| <~ 1 head
    assert rep.tail_exponent == pytest.approx(2.0, abs=0.05)
    assert rep.cubic_integral == pytest.approx(27.0 * np.pi**2 / 4.0, rel=0.01)


def test_classification_flags_slow_decay():
    class Slow(LossYau):
        def eval(self, points):  # |A| ~ 1/r, outside the uniqueness class
            pts = np.asarray(points, dtype=np.float64)
            r2 = 1.0 + np.sum(pts * pts, axis=-1)
            return pts / r2[..., None]

    rep = default_classification(Slow())
    assert not rep.in_SU  # |A| ~ 1/r decays too slowly for the uniqueness class


def test_classify_decay_needs_usable_window():
    with pytest.raises(ClassificationUndetermined):
        classify_decay(Scaled(t=0.0, inner=LossYau()), np.geomspace(1, 100, 40),
                       sphere_directions_26())


def test_kernel_dim_bound_scales_linearly():
    pot = LossYau()
    b1 = kernel_dim_bound(pot, 1.0)
    assert b1 == pytest.approx(27.0 * np.pi**2 / 4.0, rel=0.01)
    assert kernel_dim_bound(pot, 2.0) == pytest.approx(2.0 * b1, rel=1e-12)
    assert kernel_dim_bound(pot, 0.0) == 0.0
    with pytest.raises(ValueError):
        kernel_dim_bound(pot, -1.0)


def test_amn_requires_registered_level():
    assert registered_amn_levels() == []
    with pytest.raises(UnsupportedVariant):
        AMN(ell=1, c_ell=1.0)


def test_json_round_trip_loss_yau_and_scaled():
    spec = Scaled(t=1.25, inner=LossYau())
    back = potential_from_json(potential_to_json(spec))
    x = (0.3, -1.2, 2.0)
    assert np.allclose(eval_potential(back, x), eval_potential(spec, x))


def test_json_rejects_unknown_variant():
    with pytest.raises(UnsupportedVariant):
        potential_from_json({"variant": "nope"})


def test_sampled_round_trips_grid_values():
    from diraclab.grid import Grid3D, sample_potential

    g = Grid3D(n=8, L=4.0)
    vals = sample_potential(LossYau(), g)
    spec = Sampled(grid=g, values=vals)
    nodes = g.nodes
    assert np.allclose(spec.eval(nodes[2, 3, 4]), vals[2, 3, 4])

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from topobohm.geometry import CoverPoint, Geometry, GeometryError, Kind, build_grid
from topobohm.words import IDENTITY, Word

RING = Geometry("ring", (64,))
ANNULUS = Geometry("annulus", (64, 128), r_in=1.0, r_out=2.0)

windings = st.integers(-50, 50)
angles = st.floats(0, 2 * math.pi, exclude_max=True)


def test_project_forgets_winding():
    assert RING.project(RING.point(1.0, winding=3)) == (1.0,)
    assert RING.project(RING.point(0.0)) == (0.0,)
    assert ANNULUS.project(ANNULUS.point(1.5, 2.0, winding=-2)) == (1.5, 2.0)


def test_deck_act_examples():
    p = RING.point(1.0)
    assert RING.deck_act(Word.gen("a"), p) == CoverPoint((1.0,), 1)
    assert RING.deck_act(IDENTITY, p) == p
    assert RING.deck_act(Word.gen("a", -2), RING.deck_act(Word.gen("a", 2), p)) == p


def test_deck_to_loop_examples():
    assert RING.deck_to_loop(Word.gen("a")) == Word.gen("a")
    assert RING.deck_to_loop(IDENTITY).is_identity()
    assert RING.deck_to_loop(Word.gen("a", -3)).pretty() == "a⁻³"


def test_foreign_generator_rejected():
    with pytest.raises(GeometryError):
        RING.deck_act(Word.gen("b"), RING.point(0.5))
    two = Geometry("two_anyon", (16, 16), r_in=1, r_out=2)
    assert two.generator == "s1"
    assert two.deck_act(Word.gen("s1", 2), two.point(1.5, 0.1)).winding == 2


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(kind="ring", grid=(4,)),
        dict(kind="ring", grid=(16, 16)),
        dict(kind="annulus", grid=(16, 16), r_in=2.0, r_out=1.0),
        dict(kind="annulus", grid=(16, 16), r_in=0.0, r_out=1.0),
        dict(kind="annulus", grid=(16,), r_in=1.0, r_out=2.0),
        dict(kind="annulus", grid=(16, 7), r_in=1.0, r_out=2.0),
    ],
)
def test_degenerate_shapes_rejected(kwargs):
    with pytest.raises(GeometryError):
        Geometry(**kwargs)


def test_point_outside_domain_rejected():
    with pytest.raises(GeometryError):
        RING.point(2 * math.pi)
    with pytest.raises(GeometryError):
        ANNULUS.point(0.5, 1.0)


def test_ring_grid():
    g = build_grid(Geometry("ring", (256,)))
    assert g.dtheta == pytest.approx(2 * math.pi / 256, abs=1e-15)
    np.testing.assert_allclose(g.weights, 2 * math.pi / 256, atol=1e-15)
    assert abs(g.weights.sum() - 2 * math.pi) < 1e-12


def test_annulus_grid_spacing_and_seam_map():
    g = build_grid(ANNULUS)
    assert g.dr == pytest.approx(1 / 63, abs=1e-15)
    assert g.theta_next[-1] == 0 and g.theta_prev[0] == 127
    assert not g.active[0].any() and not g.active[-1].any() and g.active[1:-1].all()


@pytest.mark.parametrize(
    "geo, volume",
    [
        (Geometry("ring", (100,), radius=2.5), 2 * math.pi * 2.5),
        (ANNULUS, math.pi * 3.0),
        (Geometry("annulus", (9, 33), r_in=0.3, r_out=4.0), math.pi * (16 - 0.09)),
        (Geometry("two_anyon", (20, 40), r_in=1.0, r_out=2.0), math.pi * 3.0 / 2),
    ],
)
def test_weights_sum_to_volume(geo, volume):
    assert abs(build_grid(geo).weights.sum() - volume) <= 1e-10 * volume
    assert abs(geo.volume() - volume) <= 1e-12 * volume


@given(angles, windings, st.integers(-20, 20))
def test_deck_action_is_free(theta, w, n):
    p = RING.point(theta, winding=w)
    q = RING.deck_act(Word.gen("a", n), p)
    assert (q == p) == (n == 0)


@given(angles, windings, st.integers(-20, 20), st.integers(-20, 20))
def test_deck_action_homomorphism_and_projection(theta, w, m, n):
    p = ANNULUS.point(1.5, theta, winding=w)
    s1, s2 = Word.gen("a", m), Word.gen("a", n)
    assert ANNULUS.deck_act(s1 * s2, p) == ANNULUS.deck_act(s1, ANNULUS.deck_act(s2, p))
    assert ANNULUS.project(ANNULUS.deck_act(s1, p)) == ANNULUS.project(p)
    assert ANNULUS.deck_to_loop(s1 * s2) == ANNULUS.deck_to_loop(s1) * ANNULUS.deck_to_loop(s2)


@given(st.floats(-100, 100), windings)
def test_lift_roundtrip(x, w):
    p = RING.lift((x,), winding=w)
    assert RING.contains(p.base_coords)
    assert RING.unrolled(p)[0] == pytest.approx(x + w * RING.period, abs=1e-9)


def test_covering_sheets():
    doubled = RING.covering(2)
    assert doubled.period == pytest.approx(4 * math.pi)
    assert doubled.grid == (128,)
    assert Geometry("two_anyon", (16, 16), r_in=1, r_out=2).period == pytest.approx(math.pi)
    assert Kind("spin_annulus").value == "spin_annulus"

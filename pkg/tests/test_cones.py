import math

import numpy as np
import pytest

from openbilliards import build_table
from openbilliards.cones import (
    Cone,
    cone_at,
    cone_invariance_scan,
    in_cone,
    slope_of,
)
from openbilliards.dynamics import PhasePoint
from openbilliards.geometry import (
    cut_stadium_components,
    regular_flower_components,
)

SCAN_TABLES = {
    "sinai": lambda: build_table("sinai_torus", centers=[(0.5, 0.5)],
                                 radii=[0.2]),
    "stadium": lambda: build_table("stadium", flat_length=2.0),
    "squash": lambda: build_table("squash", r1=0.6, r2=1.0,
                                  center_distance=2.0),
    "diamond": lambda: build_table("diamond", square_side=2.0,
                                   corner_radius=0.5),
    "flower": lambda: build_table(
        "flower", components=regular_flower_components(4, 2.0)),
}


@pytest.fixture(scope="module")
def sinai():
    return SCAN_TABLES["sinai"]()


@pytest.fixture(scope="module")
def stadium():
    return SCAN_TABLES["stadium"]()


def test_cone_at_dispersing(sinai):
    # scatterer of radius 0.2: K = 5, unstable cone [5, inf]
    c = cone_at(sinai, PhasePoint(0.1, 0.0))
    assert (c.lo, c.hi) == (5.0, math.inf)
    assert c.kind == "unstable"
    s = cone_at(sinai, PhasePoint(0.1, 0.0), kind="stable")
    assert (s.lo, s.hi) == (-math.inf, -5.0)


def test_cone_at_flat(stadium):
    c = cone_at(stadium, PhasePoint(0.5, 0.2))
    assert (c.lo, c.hi) == (0.0, math.inf)
    s = cone_at(stadium, PhasePoint(0.5, 0.2), kind="stable")
    assert (s.lo, s.hi) == (-math.inf, 0.0)


def test_cone_at_focusing(stadium):
    # unit-radius cap: K = -1, unstable cone [-1, 0]
    c = cone_at(stadium, PhasePoint(2.5, 0.0))
    assert (c.lo, c.hi) == (-1.0, 0.0)
    s = cone_at(stadium, PhasePoint(2.5, 0.0), kind="stable")
    assert (s.lo, s.hi) == (0.0, 1.0)


def test_cone_at_rejects_unknown_kind(sinai):
    with pytest.raises(ValueError):
        cone_at(sinai, PhasePoint(0.1, 0.0), kind="neutral")


def test_slope_of():
    assert slope_of((2.0, 1.0)) == 0.5
    assert slope_of((0.0, 3.0)) == math.inf
    assert slope_of((0.0, -3.0)) == math.inf
    with pytest.raises(ValueError):
        slope_of((0.0, 0.0))


def test_in_cone_membership():
    disp = Cone(5.0, math.inf, "unstable", 5.0)
    assert in_cone(disp, (1.0, 6.0))
    assert in_cone(disp, (1.0, 5.0))      # boundary is included
    assert not in_cone(disp, (1.0, 4.0))
    assert in_cone(disp, (0.0, 1.0))      # vertical belongs when hi = inf
    foc = Cone(-1.0, 0.0, "unstable", -1.0)
    assert in_cone(foc, (1.0, -0.5))
    assert in_cone(foc, (1.0, 0.0))
    assert not in_cone(foc, (1.0, 0.1))
    assert not in_cone(foc, (0.0, 1.0))   # vertical excluded on focusing


@pytest.mark.parametrize("name", sorted(SCAN_TABLES))
def test_scan_clean(name):
    table = SCAN_TABLES[name]()
    rep = cone_invariance_scan(table, 3000, 5, seed=9)
    assert rep.clean, f"{name}: {rep.n_violations} violations"
    assert rep.worst_margin > -1e-9
    assert rep.vertical_min_margin > 0.0
    assert rep.transversality_violations == 0
    assert rep.censored_fraction < 0.01


def test_scan_semi_dispersing_clean():
    table = build_table("semi_dispersing", width=2.0, height=1.0,
                        centers=[(1.0, 0.5)], radii=[0.3])
    rep = cone_invariance_scan(table, 3000, 5, seed=9)
    assert rep.clean
    assert rep.vertical_min_margin > 0.0


def test_scan_flags_broken_focusing_geometry():
    # flats only 1.5 apart between unit caps: the cap circles overlap the
    # opposite flat, so images of unstable vectors leave the cone family
    table = build_table("flower",
                        components=cut_stadium_components(2.0, 0.75))
    rep = cone_invariance_scan(table, 3000, 5, seed=9)
    assert rep.n_violations > 0
    assert not rep.clean
    assert rep.worst_margin < -1.0


def test_scan_deterministic(sinai):
    a = cone_invariance_scan(sinai, 2000, 4, seed=3)
    b = cone_invariance_scan(sinai, 2000, 4, seed=3)
    assert a == b

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from throatfind.bridge import bridge_gap, bridge_with_growing_roi, roi_cube
from throatfind.medial import plane_membership, plane_of
from throatfind.voxgrid import SegmentedImage, is_boundary_grain

# cheapest path is one step longer than the fewest-step path
DETOUR = np.array([
    [0, 0, 1, 0, 0, 0, 0],
    [1, 1, 0, 0, 1, 0, 1],
    [0, 1, 0, 1, 0, 1, 1],
    [1, 1, 0, 1, 1, 0, 0],
    [1, 1, 0, 0, 0, 0, 0],
    [0, 1, 1, 0, 1, 1, 0],
    [1, 0, 1, 0, 0, 1, 0],
], bool)[:, :, None]


def _adj(u, v):
    return max(abs(a - b) for a, b in zip(u, v)) == 1


def brute_force(img, a, b, roi, nu):
    """Minimum (cost, steps) over all simple boundary-grain paths in the ROI."""
    lo, hi = roi.bounds(img.dims)
    nodes = [tuple(int(c) for c in v) for v in np.argwhere(img.boundary_grain)
             if np.all(v >= lo) and np.all(v < hi)]
    nodes = sorted(set(nodes) | {a, b})
    c = np.asarray(nu) + 0.5
    w = {v: math.dist(np.asarray(v) + 0.5, c) for v in nodes}
    best = [math.inf, math.inf]

    def dfs(v, seen, cost, steps):
        if (cost, steps) >= tuple(best):
            return
        if v == b:
            best[:] = [cost, steps]
            return
        for u in nodes:
            if u not in seen and _adj(u, v):
                seen.add(u)
                dfs(u, seen, cost + w[u], steps + 1)
                seen.discard(u)

    dfs(a, {a}, 0.0, 0)
    return None if best[0] == math.inf else tuple(best)


def fewest_steps(img, a, b):
    nodes = {tuple(int(c) for c in v) for v in np.argwhere(img.boundary_grain)}
    frontier, seen, d = {a}, {a}, 0
    while frontier:
        if b in frontier:
            return d
        frontier = {u for v in frontier for u in nodes if u not in seen and _adj(u, v)}
        seen |= frontier
        d += 1
    return None


def test_roi_examples():
    r = roi_cube((1, 1, 1), (1, 1, 1), 4)
    assert (r.l_c, r.side) == (1, 5)
    r = roi_cube((0, 0, 0), (3, 0, 0), 4)
    assert (r.l_c, r.side) == (4, 8)
    r = roi_cube((0, 0, 0), (2, 5, 1), 8)
    assert (r.l_c, r.side) == (6, 14)
    assert r.center == (1.5, 3.0, 1.0)
    with pytest.raises(ValueError):
        roi_cube((0, 0, 0), (1, 0, 0), -1)


def test_adjacent_endpoints_single_edge():
    void = np.zeros((5, 5, 5), bool)
    void[2, 2, 2] = True
    img = SegmentedImage.from_void_mask(void)
    p = bridge_gap(img, (1, 2, 2), (1, 3, 2), roi_cube((1, 2, 2), (1, 3, 2), 4), (2, 2, 2))
    assert p.voxels == [(1, 2, 2), (1, 3, 2)]


def test_innermost_path_beats_fewer_steps():
    img = SegmentedImage.from_void_mask(DETOUR)
    a, b, nu = (0, 0, 0), (6, 6, 0), (3, 3, 0)
    roi = roi_cube(a, b, 8)
    p = bridge_gap(img, a, b, roi, nu)
    assert p.steps > fewest_steps(img, a, b)
    cost, steps = brute_force(img, a, b, roi, nu)
    assert p.cost == pytest.approx(cost)


def test_non_boundary_endpoint_rejected():
    img = SegmentedImage.from_void_mask(DETOUR)
    with pytest.raises(ValueError, match="boundary grain"):
        bridge_gap(img, (3, 3, 0), (6, 6, 0), roi_cube((3, 3, 0), (6, 6, 0), 4), (3, 3, 0))


def _two_pockets():
    void = np.zeros((7, 7, 7), bool)
    void[1, 3, 3] = True
    void[5, 3, 3] = True
    return SegmentedImage.from_void_mask(void)


def test_unreachable_and_wall():
    img = _two_pockets()
    a, b = (0, 3, 3), (6, 3, 3)
    assert bridge_gap(img, a, b, roi_cube(a, b, 4), (3, 3, 3)) is None
    assert bridge_with_growing_roi(img, a, b, (3, 3, 3)) is None


def _void_wall():
    """Void line x=11, y=6..14: its two sides meet only around the ends."""
    void = np.zeros((23, 21, 1), bool)
    void[11, 6:15, 0] = True
    return SegmentedImage.from_void_mask(void)


def test_growing_roi_needs_pad_eight():
    img = _void_wall()
    a, b, nu = (10, 10, 0), (12, 10, 0), (11, 10, 0)
    for pad in range(4, 8):
        assert bridge_gap(img, a, b, roi_cube(a, b, pad), nu) is None
    p8 = bridge_gap(img, a, b, roi_cube(a, b, 8), nu)
    assert p8 is not None
    assert bridge_with_growing_roi(img, a, b, nu).voxels == p8.voxels


def test_growing_roi_first_pad_wins():
    img = _void_wall()
    a, b, nu = (10, 13, 0), (12, 13, 0), (11, 13, 0)
    p4 = bridge_gap(img, a, b, roi_cube(a, b, 4), nu)
    assert p4 is not None
    assert bridge_with_growing_roi(img, a, b, nu).voxels == p4.voxels


@st.composite
def small_instance(draw):
    void = draw(arrays(np.bool_, (4, 4, 1), elements=st.booleans()))
    img = SegmentedImage.from_void_mask(void)
    bg = [tuple(int(c) for c in v) for v in np.argwhere(img.boundary_grain)]
    if len(bg) < 2 or len(bg) > 15:
        return None
    a = draw(st.sampled_from(bg))
    b = draw(st.sampled_from(bg))
    nu = draw(st.tuples(st.integers(0, 3), st.integers(0, 3), st.just(0)))
    pad = draw(st.integers(0, 5))
    return img, a, b, nu, pad


@given(small_instance())
def test_matches_exhaustive_oracle(inst):
    if inst is None:
        return
    img, a, b, nu, pad = inst
    roi = roi_cube(a, b, pad)
    got = bridge_gap(img, a, b, roi, nu)
    want = brute_force(img, a, b, roi, nu)
    if want is None:
        assert got is None
        return
    assert got is not None
    assert got.cost == pytest.approx(want[0])
    for u, v in zip(got.voxels, got.voxels[1:]):
        assert _adj(u, v)
    assert all(is_boundary_grain(img, v) for v in got.voxels)
    assert all(roi.contains(v) for v in got.voxels[1:-1])


@given(small_instance())
def test_cost_monotone_in_pad(inst):
    if inst is None:
        return
    img, a, b, nu, pad = inst
    small = bridge_gap(img, a, b, roi_cube(a, b, pad), nu)
    big = bridge_gap(img, a, b, roi_cube(a, b, pad + 1), nu)
    again = bridge_gap(img, a, b, roi_cube(a, b, pad), nu)
    if small is not None:
        assert again.voxels == small.voxels
        assert big is not None and big.cost <= small.cost + 1e-12


def test_on_plane_constraint():
    void = np.zeros((9, 9, 9), bool)
    void[2:7, 2:7, 2:7] = True
    img = SegmentedImage.from_void_mask(void)
    pl = plane_of((4, 4, 4), [0, 0, 1])
    a, b = (1, 4, 4), (7, 4, 4)
    p = bridge_gap(img, a, b, roi_cube(a, b, 4), (4, 4, 4), plane=pl)
    assert p is not None
    assert all(plane_membership(pl, v) for v in p.voxels)

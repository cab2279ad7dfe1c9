import math

import numpy as np
import pytest
from numba import njit

from mirrorshape.contact import (
    ApproachMode, ApproachState, contact_events, detect_approach,
    predict_contact,
)
from mirrorshape.errors import InvalidHysteresis
from mirrorshape.geometry import shapes, vec3
from mirrorshape.geometry.kernels import ray_triangle_t_indexed, tri_closest_point_d2
from mirrorshape.tracking import HandFrame


def frame_with_tips(tips):
    return HandFrame(timestamp=0.0, fingertips=np.asarray(tips, dtype=float),
                     palm=np.asarray(tips, dtype=float)[0] + [0, 0, 0.1])


@njit(cache=True)
def brute_min_distance(vertices, triangles, q):
    best = np.inf
    for tri in range(triangles.shape[0]):
        _, _, _, d2 = tri_closest_point_d2(vertices, triangles, tri, q)
        if d2 < best:
            best = d2
    return np.sqrt(best)


@njit(cache=True)
def brute_first_hit_t(vertices, triangles, origin, direction):
    best = np.inf
    for tri in range(triangles.shape[0]):
        t = ray_triangle_t_indexed(vertices, triangles, tri, origin, direction)
        if 0.0 <= t < best:
            best = t
    return best


def test_detect_approach_all_far():
    mesh = shapes.plane(size=1.0)
    tips = [[x, 0.0, 1.5] for x in np.linspace(-0.2, 0.2, 5)]
    assert detect_approach(frame_with_tips(tips), mesh, 0.15) is None


def test_detect_approach_single_finger():
    mesh = shapes.plane(size=1.0)
    tips = [[0, 0, 0.4], [0.1, 0, 0.10], [0, 0.1, 0.35], [0, -0.1, 0.5],
            [0.2, 0, 0.6]]
    got = detect_approach(frame_with_tips(tips), mesh, 0.15)
    assert got is not None
    idx, dist = got
    assert idx == 1
    assert dist == pytest.approx(0.10)


def test_detect_approach_min_matches_bruteforce():
    mesh = shapes.icosphere(0.1, 2)
    rng = np.random.default_rng(17)
    for _ in range(50):
        tips = rng.uniform(-0.25, 0.25, size=(5, 3))
        got = detect_approach(frame_with_tips(tips), mesh, 10.0)
        idx, dist = got
        brute = [brute_min_distance(mesh.vertices, mesh.triangles, t)
                 for t in tips]
        assert idx == int(np.argmin(brute))
        assert dist == pytest.approx(min(brute), abs=0)


def test_predict_contact_head_on():
    mesh = shapes.plane(size=2.0)
    target = predict_contact(vec3(0, 0, 0.1), vec3(0, 0, -0.5), mesh)
    assert np.allclose(target.point, [0, 0, 0], atol=1e-12)
    assert np.allclose(target.normal, [0, 0, 1], atol=1e-12)
    assert target.eta == pytest.approx(0.2)


def test_predict_contact_parallel_falls_back():
    mesh = shapes.plane(size=2.0)
    target = predict_contact(vec3(0, 0, 0.1), vec3(1.0, 0, 0), mesh)
    assert np.allclose(target.point, [0, 0, 0], atol=1e-12)
    assert math.isinf(target.eta)


def test_predict_contact_zero_velocity_equals_closest_point():
    mesh = shapes.icosphere(0.1, 2)
    pos = vec3(0.25, 0.05, 0.03)
    target = predict_contact(pos, np.zeros(3), mesh)
    point, _, _ = mesh.closest_point(pos)
    assert np.array_equal(target.point, point)
    assert math.isinf(target.eta)


def test_predict_contact_sphere_matches_oracles():
    mesh = shapes.icosphere(0.1, 3)
    rng = np.random.default_rng(23)
    n_hits = 0
    for _ in range(100):
        origin = rng.normal(size=3)
        origin *= 0.35 / np.linalg.norm(origin)
        aim = rng.normal(size=3) * 0.03
        v = aim - origin
        v *= 0.4 / np.linalg.norm(v)
        target = predict_contact(origin, v, mesh)
        t_oracle = brute_first_hit_t(mesh.vertices, mesh.triangles, origin,
                                     v / np.linalg.norm(v))
        if math.isinf(t_oracle):
            assert math.isinf(target.eta)
            continue
        n_hits += 1
        expected_point = origin + t_oracle * v / np.linalg.norm(v)
        assert np.linalg.norm(target.point - expected_point) < 1e-9
        analytic = target.point / np.linalg.norm(target.point)
        angle = math.degrees(math.acos(np.clip(target.normal @ analytic, -1, 1)))
        assert angle < 2.0
        # target point lies on the mesh surface
        _, _, d = mesh.closest_point(target.point)
        assert d < 1e-9
    assert n_hits > 50


def test_contact_events_no_contact():
    stream = [(t, 0.5) for t in np.linspace(0, 1, 50)]
    assert contact_events(stream, 0.005, 0.010) == []


def test_contact_events_single_dip():
    stream = [(0.0, 0.1), (0.1, 0.004), (0.2, 0.006), (0.3, 0.02)]
    assert contact_events(stream, 0.005, 0.010) == [(0.1, 0.3)]


def test_contact_events_band_oscillation_no_spurious_offset():
    rng = np.random.default_rng(31)
    ts = np.linspace(0, 2, 200)
    ds = np.where(ts < 0.1, 0.05,
                  np.where(ts < 1.8, 0.0075 + rng.uniform(-0.002, 0.002, 200),
                           0.05))
    ds[20] = 0.004  # the onset dip
    stream = list(zip(ts, ds))
    pairs = contact_events(stream, 0.005, 0.010)

    # direct two-threshold scan as oracle
    expected = []
    onset = None
    for t, d in stream:
        if onset is None and d < 0.005:
            onset = t
        elif onset is not None and d > 0.010:
            expected.append((onset, t))
            onset = None
    assert pairs == expected
    assert len(pairs) == 1


def test_contact_events_alternate_and_monotone():
    rng = np.random.default_rng(5)
    ts = np.arange(500) * 0.01
    ds = 0.02 + 0.02 * np.sin(ts * 3.0) + rng.normal(0, 0.003, size=500)
    pairs = contact_events(list(zip(ts, np.abs(ds))), 0.005, 0.010)
    flat = [t for pair in pairs for t in pair]
    assert flat == sorted(flat)


def test_contact_events_open_contact_dropped():
    stream = [(0.0, 0.1), (0.1, 0.004), (0.2, 0.006)]
    assert contact_events(stream, 0.005, 0.010) == []


def test_contact_events_invalid_hysteresis():
    with pytest.raises(InvalidHysteresis):
        contact_events([], d_on=0.01, d_off=0.01)


def test_approach_state_steps_are_adjacent():
    st = ApproachState()
    st = st.update(0.05)
    assert st.mode is ApproachMode.APPROACHING
    st = st.update(0.001)
    assert st.mode is ApproachMode.IN_CONTACT
    st = st.update(0.02)
    assert st.mode is ApproachMode.APPROACHING
    st = st.update(0.5)
    assert st.mode is ApproachMode.FAR

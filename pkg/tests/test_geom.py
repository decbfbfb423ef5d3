import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polyscene import geom
from polyscene.geom import (
    DegenerateLookAt,
    Plane,
    RngStream,
    look_at,
    marsaglia_sphere_point,
    naive_sphere_point,
    plane_plane_line,
    quat_identity,
    quat_rotate,
    sample_point_in_ball,
    sample_unit_direction,
    three_plane_point,
    vec3,
)

from oracles import CHI2_7_ALPHA_001, chi_square_stat, latitude_band_counts, octant_counts


class _ScriptedStream:
    """Stand-in RngStream replaying a fixed list of uniform draws."""

    def __init__(self, values):
        self._values = list(values)

    def uniform(self, low, high, size=None):
        if size is None:
            return self._values.pop(0)
        return np.array([self._values.pop(0) for _ in range(size)])


class _CountingStream(RngStream):
    def __init__(self, seed):
        super().__init__(seed)
        self.calls = 0

    def uniform(self, low, high, size=None):
        self.calls += 1
        return super().uniform(low, high, size)


def test_rng_stream_is_deterministic():
    a = RngStream(1234).uniform(-1, 1, 16)
    b = RngStream(1234).uniform(-1, 1, 16)
    assert np.array_equal(a, b)


def test_rng_child_streams_differ():
    root = RngStream(99)
    assert not np.array_equal(root.child(0).uniform(0, 1, 8),
                              root.child(1).uniform(0, 1, 8))
    # re-derivable without touching the parent
    assert np.array_equal(RngStream(99).child(1).uniform(0, 1, 8),
                          RngStream(99, (1,)).uniform(0, 1, 8))


def test_ball_sampling_accepts_origin():
    assert np.array_equal(sample_point_in_ball(_ScriptedStream([0.0, 0.0, 0.0])),
                          vec3(0, 0, 0))


def test_ball_sampling_rejects_corner_then_retries():
    p = sample_point_in_ball(_ScriptedStream([1.0, 1.0, 1.0, 0.1, 0.2, 0.3]))
    assert np.array_equal(p, vec3(0.1, 0.2, 0.3))


def test_ball_sampling_norm_bound():
    rng = RngStream(5)
    pts = np.array([sample_point_in_ball(rng) for _ in range(2000)])
    assert (np.linalg.norm(pts, axis=1) <= 1.0).all()


def test_ball_rejection_rate_matches_pi_over_six():
    rng = _CountingStream(17)
    for _ in range(10_000):
        sample_point_in_ball(rng)
    rate = 10_000 / rng.calls
    assert abs(rate - math.pi / 6) < 0.02


def test_unit_direction_poles_and_equator():
    # u = 1 -> north pole, independent of phi
    north = sample_unit_direction(_ScriptedStream([0.3, 1.0]))
    assert np.allclose(north, [0, 0, 1], atol=1e-12)
    # u = 0, phi = 0 -> equator x axis
    eq = sample_unit_direction(_ScriptedStream([0.0, 0.0]))
    assert np.allclose(eq, [1, 0, 0], atol=1e-12)


@pytest.mark.parametrize("sampler", [sample_unit_direction, marsaglia_sphere_point])
def test_sphere_samplers_unit_norm_and_uniform(sampler):
    rng = RngStream(2024)
    pts = np.array([sampler(rng) for _ in range(10_000)])
    assert np.allclose(np.linalg.norm(pts, axis=1), 1.0, atol=1e-9)
    assert chi_square_stat(octant_counts(pts)) < CHI2_7_ALPHA_001
    assert chi_square_stat(latitude_band_counts(pts)) < CHI2_7_ALPHA_001


def test_marsaglia_fixed_draws():
    assert np.allclose(marsaglia_sphere_point(_ScriptedStream([0.0, 0.0])),
                       [0, 0, 1], atol=1e-12)
    # direct evaluation at (0.5, 0.5): s = 0.5
    p = marsaglia_sphere_point(_ScriptedStream([0.5, 0.5]))
    assert np.allclose(p, [0.7071067811865476, 0.7071067811865476, 0.0], atol=1e-12)


def test_marsaglia_mean_z_near_zero():
    rng = RngStream(31)
    z = np.array([marsaglia_sphere_point(rng)[2] for _ in range(10_000)])
    assert abs(z.mean()) < 0.03


def test_naive_angles_sampler_is_pole_biased():
    # the equal-area latitude bands expose the arccos-free pole bias that
    # octant counts (sign symmetric) cannot see
    rng = RngStream(2024)
    pts = np.array([naive_sphere_point(rng) for _ in range(10_000)])
    assert chi_square_stat(octant_counts(pts)) < CHI2_7_ALPHA_001
    assert chi_square_stat(latitude_band_counts(pts)) > CHI2_7_ALPHA_001


def test_plane_plane_line_coordinate_planes():
    line = plane_plane_line(Plane(vec3(0, 0, 0), vec3(0, 0, 1)),
                            Plane(vec3(0, 0, 0), vec3(0, 1, 0)))
    assert abs(abs(line.direction[0]) - 1.0) < 1e-12
    assert np.allclose(line.point, 0, atol=1e-12)


def test_plane_plane_line_parallel():
    assert plane_plane_line(Plane(vec3(0, 0, 0), vec3(0, 0, 1)),
                            Plane(vec3(0, 0, 0.5), vec3(0, 0, 1))) is None


def test_plane_plane_line_point_on_both_planes():
    rng = RngStream(7)
    for _ in range(200):
        a = geom.sample_plane(rng)
        b = geom.sample_plane(rng)
        line = plane_plane_line(a, b)
        if line is None:
            continue
        assert abs(a.signed_distance(line.point)) < 1e-9
        assert abs(b.signed_distance(line.point)) < 1e-9
        assert abs(np.dot(line.direction, a.normal)) < 1e-9
        assert abs(np.dot(line.direction, b.normal)) < 1e-9


def test_three_plane_point_fixtures():
    px = Plane(vec3(0.1, 0, 0), vec3(1, 0, 0))
    py = Plane(vec3(0, 0.2, 0), vec3(0, 1, 0))
    pz = Plane(vec3(0, 0, 0.3), vec3(0, 0, 1))
    assert np.allclose(three_plane_point(px, py, pz), [0.1, 0.2, 0.3], atol=1e-12)
    origin = three_plane_point(
        Plane(vec3(0, 0, 0), vec3(1, 0, 0)),
        Plane(vec3(0, 0, 0), vec3(0, 1, 0)),
        Plane(vec3(0, 0, 0), vec3(0, 0, 1)))
    assert np.allclose(origin, 0, atol=1e-12)


def test_three_plane_point_degenerate():
    a = Plane(vec3(0, 0, 0), vec3(0, 0, 1))
    b = Plane(vec3(0, 0, 0.5), vec3(0, 0, 1))
    c = Plane(vec3(0, 0, 0), vec3(1, 0, 0))
    assert three_plane_point(a, b, c) is None


def test_look_at_default_frame_is_identity():
    q = look_at(vec3(0, 0, 5), vec3(0, 0, 0))
    assert np.allclose(q, quat_identity(), atol=1e-12)


def test_look_at_opposite_is_yaw_pi():
    q = look_at(vec3(0, 0, -5), vec3(0, 0, 0))
    assert np.allclose(q, [0, 0, 1, 0], atol=1e-12)


def test_look_at_degenerate_up():
    with pytest.raises(DegenerateLookAt):
        look_at(vec3(0, 5, 0), vec3(0, 0, 0), up=vec3(0, 1, 0))


def test_look_at_aims_forward_on_sphere():
    rng = RngStream(11)
    for _ in range(300):
        pos = 5.0 * marsaglia_sphere_point(rng)
        try:
            q = look_at(pos, vec3(0, 0, 0))
        except DegenerateLookAt:
            q = look_at(pos, vec3(0, 0, 0), up=vec3(0, 0, 1))
        fwd = quat_rotate(q, vec3(0, 0, -1))
        bearing = -pos / np.linalg.norm(pos)
        assert np.dot(fwd, bearing) > 1 - 1e-9


@settings(max_examples=100, deadline=None)
@given(st.integers(min_value=0, max_value=2**63 - 1))
def test_quaternion_rotation_preserves_norm(seed):
    rng = RngStream(seed)
    q = look_at(5.0 * marsaglia_sphere_point(rng), vec3(0, 0, 0),
                up=vec3(0, 0, 1) if rng.random() < 0.5 else None)
    v = np.array([rng.uniform(-3, 3) for _ in range(3)])
    assert abs(np.linalg.norm(quat_rotate(q, v)) - np.linalg.norm(v)) < 1e-9
    assert abs(np.linalg.norm(q) - 1.0) < 1e-9

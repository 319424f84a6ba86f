import math

import numpy as np
import pytest

from viewplan.errors import EmptyGrid
from viewplan.geometry import rot_z
from viewplan.infomap import InfoMap
from viewplan.sampling import (
    SamplerParams, best_overall, best_sample, evaluate_gains, generate_samples, penalized_gain, sample_gain,
)


def test_defaults():
    p = SamplerParams()
    assert (p.P_min, p.delta_d, p.N_AP, p.N_SP, p.d_n) == (2.0, 0.4, 10, 18, 1.2)
    assert p.delta_theta == pytest.approx(0.3491, abs=1e-4)
    assert p.theta_max == pytest.approx(math.pi)


@pytest.mark.parametrize("kw", [{"P_min": 0}, {"delta_d": -1}, {"N_SP": 7}, {"delta_theta": 0}, {"d_n": 0}])
def test_invalid_params(kw):
    with pytest.raises(ValueError):
        SamplerParams(**kw)


def test_sample_positions():
    g = generate_samples(np.zeros(3), 0.0)
    assert g.positions.shape == (11, 19, 3)
    np.testing.assert_allclose(g.positions[0, 9], [0, 2, 0], atol=1e-15)
    np.testing.assert_allclose(g.positions[0, 18], [0, -2, 0], atol=1e-12)
    np.testing.assert_allclose(g.positions[0, 0], g.positions[0, 18], atol=1e-12)
    np.testing.assert_allclose(generate_samples(np.zeros(3), math.pi / 2).positions[0, 9], [2, 0, 0], atol=1e-12)


def test_samples_on_circles_and_planar():
    rng = np.random.default_rng(0)
    c = rng.uniform(-5, 5, 3)
    g = generate_samples(c, 0.7)
    d = np.linalg.norm(g.positions - c, axis=2)
    np.testing.assert_allclose(d, np.repeat(g.radii[:, None], 19, axis=1), atol=1e-12)
    assert np.all(g.positions[..., 2] == c[2])
    assert np.all(np.abs(g.thetas) <= g.params.theta_max + 1e-12)
    circles = g.circles()
    assert len(circles) == 11 and all(len(s) == 19 for _, _, s in circles)
    assert all(np.all(np.diff([p.theta for p in s]) > 0) for _, _, s in circles)


def test_penalized_gain_examples():
    assert penalized_gain(10.0, 0.0) == 10.0
    assert penalized_gain(10.0, math.pi / 2) == pytest.approx(5.0)
    assert penalized_gain(10.0, math.pi) == pytest.approx(0.0, abs=1e-12)
    assert penalized_gain(10.0, -math.pi) == penalized_gain(10.0, math.pi)


def test_sample_gain_matches_neighbor_sum():
    rng = np.random.default_rng(1)
    m = InfoMap().insert_points(rng.uniform(-6, 6, (800, 3)) * [1, 1, 0.05])
    snap = m.snapshot()
    cam = np.array([0, 0, 0.5])
    g = evaluate_gains(generate_samples(np.zeros(3), 0.0), snap, cam)
    s = g.sample(3, 4)
    expect = m.neighbor_sum_info(cam, s.world_position, 1.2) * (1 - abs(s.theta) / math.pi)
    assert sample_gain(snap, cam, s) == pytest.approx(expect, rel=1e-12)
    assert g.gains[3, 4] == pytest.approx(expect, rel=1e-12)
    assert np.all(g.gains >= 0) and np.all(g.gains <= g.info_sums + 1e-12)


def _grid_with(gains):
    g = generate_samples(np.zeros(3), 0.0)
    g.gains = np.tile(np.asarray(gains, dtype=float), (len(g.radii), 1))
    return g


def test_best_sample_rules():
    assert best_sample(_grid_with(np.ones(19)))[0].theta == 0.0
    assert best_sample(_grid_with(np.arange(19)))[0].theta == pytest.approx(math.pi)
    tie = np.zeros(19)
    tie[7] = tie[11] = 1.0
    assert best_sample(_grid_with(tie))[0].theta < 0
    rng = np.random.default_rng(2)
    g = generate_samples(np.zeros(3), 0.0)
    g.gains = rng.uniform(size=g.positions.shape[:2])
    for i, s in enumerate(best_sample(g)):
        assert s.angle_index == int(np.argmax(g.gains[i]))
    b = best_overall(g)
    assert b.gain == g.gains.max()


def test_best_sample_empty():
    with pytest.raises(EmptyGrid):
        best_sample(generate_samples(np.zeros(3), 0.0))


def test_gain_rotation_invariance():
    rng = np.random.default_rng(3)
    pts = rng.uniform(-7, 7, (1500, 3)) * [1, 1, 0.05]
    cam = np.array([0.0, 0.0, 0.5])
    # voxel centres are quantised, so rotate by a lattice symmetry
    for k in (1, 2, 3):
        a = k * math.pi / 2
        r = rot_z(-a)
        g0 = evaluate_gains(generate_samples(np.zeros(3), 0.0), InfoMap().insert_points(pts).snapshot(), cam)
        rot_pts = pts @ r.T
        g1 = evaluate_gains(generate_samples(np.zeros(3), a), InfoMap().insert_points(rot_pts).snapshot(), cam)
        np.testing.assert_allclose(g1.gains, g0.gains, rtol=1e-9, atol=1e-9)

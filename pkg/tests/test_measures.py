import numpy as np
import pytest
import scipy.stats
from hypothesis import given, strategies as st

from choquet.measures import (
    EmpiricalMeasure,
    benchmark_staircase,
    child_seeds,
    eight_gaussians,
    energy_distance,
    from_csv,
    moments,
    point_cloud,
    sample_batch,
    swiss_roll,
    to_csv,
    uniform_box,
)


def test_weights_validated():
    with pytest.raises(ValueError):
        EmpiricalMeasure(np.zeros((2, 1)), [0.5, 0.6])
    with pytest.raises(ValueError):
        EmpiricalMeasure(np.zeros((2, 1)), [1.5, -0.5])
    with pytest.raises(ValueError):
        EmpiricalMeasure(np.zeros((2, 1)), [1.0])
    with pytest.raises(ValueError):
        EmpiricalMeasure(np.zeros((0, 1)), [])


def test_bounds():
    m = EmpiricalMeasure.uniform([[0.0, 1.0], [2.0, -1.0]])
    np.testing.assert_array_equal(m.bounds, [[0, 2], [-1, 1]])
    with pytest.raises(ValueError):
        EmpiricalMeasure.uniform([[3.0]], bounds=[[0.0, 1.0]])


def test_atoms_normalize():
    m = EmpiricalMeasure.atoms([-1, 1], [1, 3])
    np.testing.assert_allclose(m.weights, [0.25, 0.75])
    assert m.d == 1 and m.n == 2


def test_csv_round_trip(tmp_path, rng):
    pts = rng.normal(size=(7, 3))
    to_csv(pts, tmp_path / "a.csv")
    np.testing.assert_array_equal(from_csv(tmp_path / "a.csv").points, pts)


def test_csv_header_and_blank_lines(tmp_path):
    (tmp_path / "a.csv").write_text("x,y\n1,2\n\n3,4\n")
    np.testing.assert_array_equal(from_csv(tmp_path / "a.csv").points, [[1, 2], [3, 4]])


@pytest.mark.parametrize("text,where", [("1,2\n3\n", "line 2"), ("1,2\n3,abc\n", "line 2"), ("x,y\n", "no data")])
def test_csv_errors(tmp_path, text, where):
    (tmp_path / "a.csv").write_text(text)
    with pytest.raises(ValueError, match=where):
        from_csv(tmp_path / "a.csv")


def test_staircase_values():
    assert benchmark_staircase(0.0) == 0.0
    assert benchmark_staircase(0.049) == 0.0
    assert benchmark_staircase(0.05) == 0.05
    assert benchmark_staircase(0.999) == 0.95
    assert benchmark_staircase(1.0) == 1.0
    for bad in (-0.1, 1.1, np.nan):
        with pytest.raises(ValueError):
            benchmark_staircase(bad)


def test_staircase_mean_under_uniform():
    # exact integral: (1/20) * sum_{i<20} i/20 = 0.475
    grid = (np.arange(200_000) + 0.5) / 200_000
    assert benchmark_staircase(grid).mean() == pytest.approx(0.475, abs=1e-9)


@given(st.floats(0, 1))
def test_staircase_below_identity(x):
    b = benchmark_staircase(x)
    assert x - 0.05 < b <= x


def test_moments():
    m = EmpiricalMeasure([[1.0, 0.0], [0.0, 2.0]], [0.25, 0.75])
    mean, second = moments(m)
    np.testing.assert_allclose(mean, [0.25, 1.5])
    assert second == pytest.approx(0.25 + 3.0)


def test_energy_distance_matches_scipy_1d(rng):
    x, y = rng.normal(size=40), rng.normal(0.5, 2.0, size=30)
    wx, wy = rng.uniform(size=40), rng.uniform(size=30)
    a = EmpiricalMeasure(x[:, None], wx / wx.sum())
    b = EmpiricalMeasure(y[:, None], wy / wy.sum())
    want = scipy.stats.energy_distance(x, y, wx, wy) ** 2
    assert energy_distance(a, b) == pytest.approx(want, rel=1e-9)


def test_energy_distance_properties(rng):
    a = EmpiricalMeasure.uniform(rng.normal(size=(50, 2)))
    b = EmpiricalMeasure.uniform(rng.normal(size=(60, 2)) + 1.0)
    assert energy_distance(a, a) == pytest.approx(0.0, abs=1e-12)
    assert energy_distance(a, b) == pytest.approx(energy_distance(b, a), rel=1e-12)
    assert energy_distance(a, b) > 0
    with pytest.raises(ValueError):
        energy_distance(a, EmpiricalMeasure.uniform(np.zeros((3, 1))))


@pytest.mark.parametrize("factory", [lambda s: swiss_roll(seed=s), lambda s: eight_gaussians(seed=s),
                                     lambda s: uniform_box([-1, -1], [1, 1], seed=s)])
def test_sampler_determinism(factory):
    a, b, c = factory(3), factory(3), factory(4)
    x = a.draw(100)
    np.testing.assert_array_equal(x, b.draw(100))
    assert not np.array_equal(x, c.draw(100))
    assert x.shape == (100, a.d)


def test_swiss_roll_inside_box():
    pts = swiss_roll(noise=0.0, seed=0).draw(5000)
    assert np.abs(pts).max() <= 2.0 + 1e-12


def test_eight_gaussians_modes():
    pts = eight_gaussians(seed=1).draw(4000)
    r = np.linalg.norm(pts, axis=1)
    assert np.abs(r - 2.0).max() < 0.2


def test_point_cloud(tmp_path):
    to_csv(np.array([[1.0, 2.0], [3.0, 4.0]]), tmp_path / "c.csv")
    s = point_cloud(tmp_path / "c.csv", seed=0)
    draws = s.draw(50)
    assert s.d == 2
    assert {tuple(r) for r in draws} <= {(1.0, 2.0), (3.0, 4.0)}


def test_sample_batch_and_child_seeds():
    with pytest.raises(ValueError):
        sample_batch(swiss_roll(), 0)
    assert sample_batch(swiss_roll(), 5).n == 5
    s = child_seeds(7, 4)
    assert s == child_seeds(7, 4) and len(set(s)) == 4
    assert child_seeds(7, 6)[:4] == s

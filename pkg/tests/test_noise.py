import numpy as np
import pytest

from fracsde.grid import TimeGrid
from fracsde.noise import (JumpSpec, QWienerSpec, coarsen, compensated_integral, path_rng,
                           sample_noise, sample_poisson, sample_wiener, write_noise_csv)

GRID = TimeGrid(0.01, 100)


def test_same_seed_same_noise_different_paths_differ():
    q = QWienerSpec((1.0, 0.25))
    j = JumpSpec((0.0, 1.0), 3.0)
    a = sample_noise(q, j, GRID, 5, 2)
    b = sample_noise(q, j, GRID, 5, 2)
    c = sample_noise(q, j, GRID, 5, 3)
    assert np.array_equal(a.wiener_increments, b.wiener_increments)
    assert np.array_equal(a.jump_times, b.jump_times)
    assert not np.array_equal(a.wiener_increments, c.wiener_increments)


def test_path_streams_are_independent_of_request_order():
    first = path_rng(1, 7).standard_normal(3)
    path_rng(1, 3).standard_normal(100)
    assert np.array_equal(first, path_rng(1, 7).standard_normal(3))


def test_wiener_variance_per_mode():
    q = QWienerSpec((1.0, 0.04))
    g = TimeGrid(0.02, 50)
    inc = np.concatenate([sample_wiener(q, g, 0, i).wiener_increments for i in range(400)])
    var = inc.var(axis=0)
    se = var * np.sqrt(2 / (inc.shape[0] - 1))
    assert np.all(np.abs(var - np.array(q.q_eigenvalues) * g.dt) <= 3 * se)
    assert q.trace == pytest.approx(1.04)


def test_poisson_counts_and_marks():
    j = JumpSpec((0.0, 2.0), 4.0)
    g = TimeGrid(0.1, 10)
    counts = np.array([sample_poisson(j, g, 1, i).jump_times.size for i in range(4000)])
    assert abs(counts.mean() - 4.0) <= 3 * np.sqrt(4.0 / counts.size)
    r = sample_poisson(j, g, 1, 0)
    assert np.all(np.diff(r.jump_times) >= 0)
    assert np.all((r.jump_marks >= 0) & (r.jump_marks <= 2))


def test_point_and_density_measures():
    p = JumpSpec((0.0, 1.0), 2.0, "point", atom=0.5)
    u, w = p.quadrature()
    assert list(u) == [0.5] and list(w) == [2.0]
    assert np.all(sample_poisson(p, GRID, 0, 0).jump_marks == 0.5)
    d = JumpSpec((0.0, 1.0), kind="density", density=lambda u: 3 * u ** 2)
    assert d.total_rate == pytest.approx(1.0)
    u, w = d.quadrature()
    assert np.sum(w * u) == pytest.approx(0.75)
    counts = [sample_poisson(d, TimeGrid(0.5, 2), 2, i).jump_times.size for i in range(2000)]
    assert abs(np.mean(counts) - 1.0) <= 3 * np.sqrt(1.0 / 2000)


def test_measure_validation():
    with pytest.raises(ValueError):
        JumpSpec((1.0, 0.0), 1.0)
    with pytest.raises(ValueError):
        JumpSpec((0.0, 1.0), -1.0)
    with pytest.raises(ValueError):
        JumpSpec((0.0, 1.0), 1.0, "point")
    with pytest.raises(ValueError):
        JumpSpec((0.0, 1.0), float("inf"))
    with pytest.raises(ValueError):
        QWienerSpec((-1.0,))


def test_uniform_quadrature_integrates_polynomials():
    j = JumpSpec((1.0, 3.0), 2.0)
    u, w = j.quadrature(8)
    assert np.sum(w) == pytest.approx(2.0)
    # int u^2 (2/2) du over [1, 3] = 26/3
    assert np.sum(w * u ** 2) == pytest.approx(26 / 3)


def test_compensated_integral_mean_zero():
    j = JumpSpec((0.0, 1.0), 5.0)
    g = TimeGrid(0.05, 20)
    h = lambda s, u: u * np.exp(-s)
    ends = np.array([compensated_integral(sample_poisson(j, g, 3, i), h, j)[-1]
                     for i in range(4000)])
    assert abs(ends.mean()) <= 3 * ends.std(ddof=1) / np.sqrt(ends.size)


def test_compensated_integral_without_jumps_is_minus_compensator():
    j = JumpSpec((0.0, 1.0), 2.0)
    g = TimeGrid(0.1, 10)
    n = sample_poisson(JumpSpec((0.0, 1.0), 0.0), g, 0, 0)
    path = compensated_integral(n, lambda s, u: np.ones_like(s), j)
    assert path[-1] == pytest.approx(-2.0)


def test_coarsen_sums_increments():
    q = QWienerSpec((1.0,))
    n = sample_noise(q, JumpSpec((0.0, 1.0), 1.0), TimeGrid(0.01, 100), 0, 0)
    c = coarsen(n, 4)
    assert c.grid == TimeGrid(0.04, 25)
    assert np.allclose(c.wiener_increments.sum(), n.wiener_increments.sum())
    assert np.array_equal(c.jump_times, n.jump_times)
    with pytest.raises(ValueError):
        coarsen(n, 3)


def test_noise_csv(tmp_path):
    n = sample_noise(QWienerSpec((1.0,)), JumpSpec((0.0, 1.0), 2.0), TimeGrid(0.5, 2), 0, 0)
    write_noise_csv([n], tmp_path / "n.csv")
    lines = (tmp_path / "n.csv").read_bytes().split(b"\n")
    assert lines[0] == b"path,kind,index,mode_or_mark,value"
    assert b"\r" not in (tmp_path / "n.csv").read_bytes()

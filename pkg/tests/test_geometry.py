import numpy as np
import pytest
from scipy.integrate import quad
from hypothesis import given, settings
from hypothesis import strategies as st

from superexit.geometry import (
    Domain,
    SingularArgumentError,
    as_boundary_point,
    boundary_distance,
    boundary_measure_sample,
    green_function,
    poisson_kernel,
    rho,
    sphere_area,
    uniform_ball_sample,
)


def test_rho_examples():
    assert rho([0.0, 0.0]) == 1.0
    assert rho([0.5, 0.0]) == 0.5
    assert rho([np.cos(1.0), np.sin(1.0)]) == pytest.approx(0.0, abs=1e-15)


def test_domain_validation():
    with pytest.raises(ValueError):
        Domain(1)
    assert Domain(3).boundary_area == pytest.approx(4 * np.pi)
    assert Domain(2).volume == pytest.approx(np.pi)


def test_poisson_examples():
    assert poisson_kernel([0.0, 0.0], [1.0, 0.0]) == pytest.approx(1 / (2 * np.pi), rel=1e-14)
    assert poisson_kernel([0.5, 0.0], [1.0, 0.0]) == pytest.approx(3 / (2 * np.pi), rel=1e-14)
    for d in (2, 3, 4):
        z = np.eye(d)[1]
        assert poisson_kernel(np.zeros(d), z) == pytest.approx(1 / sphere_area(d), rel=1e-14)
    with pytest.raises(SingularArgumentError):
        poisson_kernel([1.0, 0.0], [0.0, 1.0])


def test_green_center_value_and_boundary():
    y = np.array([0.3, 0.4])
    assert green_function([0.0, 0.0], y) == pytest.approx(np.log(2) / np.pi, rel=1e-14)
    with pytest.raises(SingularArgumentError):
        green_function(y, y)
    x = np.array([0.2, -0.1])
    vals = [green_function(x, (1 - t) * np.array([0.6, 0.8])) for t in (1e-2, 1e-4, 1e-6)]
    assert vals[0] > vals[1] > vals[2] and vals[2] < 1e-5


def test_green_normalization_mc_occupation():
    # occupation density of killed BM from 0 in the annulus 0.45 < |y| < 0.55
    rng = np.random.default_rng(11)
    n_paths, dt = 3000, 2.5e-5
    pos = np.zeros((n_paths, 2))
    alive = np.ones(n_paths, bool)
    occ = np.zeros(n_paths)
    while alive.any():
        idx = np.flatnonzero(alive)
        pos[idx] += np.sqrt(dt) * rng.standard_normal((len(idx), 2))
        r = np.linalg.norm(pos[idx], axis=1)
        out = r >= 1.0
        alive[idx[out]] = False
        inside = (~out) & (r > 0.45) & (r < 0.55)
        occ[idx[inside]] += dt
    area = np.pi * (0.55**2 - 0.45**2)
    est = occ.mean() / area
    se = occ.std(ddof=1) / np.sqrt(n_paths) / area
    # annulus average of (1/pi) log(1/r)
    exact = quad(lambda r: 2 * r * np.log(1 / r), 0.45, 0.55)[0] / area
    assert abs(est - exact) < 3 * se + 0.01 * exact
    assert green_function([0.0, 0.0], [0.5, 0.0]) == pytest.approx(np.log(2) / np.pi)


pts2 = st.tuples(st.floats(0, 0.95), st.floats(0, 2 * np.pi))


@settings(max_examples=200, deadline=None)
@given(pts2, pts2, st.sampled_from([2, 3]))
def test_green_symmetric_positive(a, b, d):
    def emb(p):
        v = np.zeros(d)
        v[0], v[1] = p[0] * np.cos(p[1]), p[0] * np.sin(p[1])
        return v
    x, y = emb(a), emb(b)
    if np.linalg.norm(x - y) < 1e-9:
        return
    g1, g2 = green_function(x, y), green_function(y, x)
    assert g1 >= 0
    assert g1 == pytest.approx(g2, rel=1e-10, abs=1e-300)


@pytest.mark.parametrize("d", [2, 3])
def test_poisson_normalization(d):
    from superexit.quadrature import boundary_grid
    b = boundary_grid(d, 256 if d == 2 else 64)
    rng = np.random.default_rng(0)
    for x in uniform_ball_sample(rng, d, 20, radius=0.8):
        total = np.sum(b.weights * poisson_kernel(x, b.points))
        assert total == pytest.approx(1.0, abs=1e-6)


def test_poisson_harmonic_second_order():
    z = np.array([1.0, 0.0])
    rng = np.random.default_rng(3)
    xs = uniform_ball_sample(rng, 2, 30, radius=0.7)

    def lap(h):
        out = []
        for x in xs:
            c = poisson_kernel(x, z)
            s = sum(poisson_kernel(x + h * np.array(e), z) for e in ([1, 0], [-1, 0], [0, 1], [0, -1]))
            out.append(abs(s - 4 * c) / h**2)
        return max(out)

    l1, l2 = lap(2e-2), lap(1e-2)
    assert l2 < l1
    assert 3.0 < l1 / l2 < 5.0


@pytest.mark.parametrize("d", [2, 3])
def test_estimate_green_ratio_bounded(d):
    rng = np.random.default_rng(5)

    def max_ratio(n):
        x = uniform_ball_sample(rng, d, n)
        y = uniform_ball_sample(rng, d, n)
        dist = np.linalg.norm(x - y, axis=1)
        return np.max(green_function(x, y) / (rho(y) * dist ** (1 - d)))

    m1, m2 = max_ratio(10_000), max_ratio(20_000)
    assert np.isfinite(m1) and np.isfinite(m2)
    assert max(m1, m2) / min(m1, m2) < 1.25


@pytest.mark.parametrize("d", [2, 3])
def test_estimate_poisson_ratio_bounded(d):
    rng = np.random.default_rng(6)
    x = uniform_ball_sample(rng, d, 10_000)
    z = as_boundary_point(boundary_measure_sample(rng, d, 10_000), d)
    ratio = poisson_kernel(x, z) / (rho(x) * np.linalg.norm(x - z, axis=1) ** (-d))
    # (1 - |x|^2) / (1 - |x|) = 1 + |x| <= 2
    assert np.all(np.isfinite(ratio))
    assert ratio.max() <= 2 / sphere_area(d) + 1e-12


def test_boundary_sampling_and_distance():
    rng = np.random.default_rng(1)
    th = boundary_measure_sample(rng, 2, 20_000)
    assert abs(th.mean() - np.pi) < 3 * th.std() / np.sqrt(len(th))
    z = boundary_measure_sample(rng, 3, 100)
    assert np.allclose(np.linalg.norm(z, axis=1), 1.0, atol=1e-12)
    assert np.allclose(np.linalg.norm(as_boundary_point(th[:50], 2), axis=1), 1.0, atol=1e-12)
    assert boundary_distance(z[0], z[0]) == 0.0
    assert boundary_distance(0.3, 0.3 + np.pi) == pytest.approx(2.0)
    assert boundary_distance([1.0, 0.0], [-1.0, 0.0]) == pytest.approx(2.0)

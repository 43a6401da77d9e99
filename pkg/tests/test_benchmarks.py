import math

import numpy as np
import pytest

from batchscreen.benchmarks import (
    OBJECTIVES,
    _heavy_tail,
    bohachevsky_objective,
    branin_objective,
    generate_synthetic_library,
    grid_pool,
    hartmann6_objective,
    pool_for_objective,
    quasirandom_pool,
    sample_gp_prior_objective,
    synthetic_library_arrays,
    synthetic_library_pool,
)
from batchscreen.pool import load_library


def test_bohachevsky_values():
    obj = bohachevsky_objective()
    assert obj.evaluate(np.array([[0.0, 0.0]]))[0] == pytest.approx(0.0, abs=1e-15)
    # 1 + 2 + 0.3 - 0.4 + 0.7, by hand
    assert obj.evaluate(np.array([[1.0, 1.0]]))[0] == pytest.approx(3.6, rel=1e-12)
    assert obj.known_min == 0.0


def test_branin_values():
    obj = branin_objective()
    minima = [(-math.pi, 12.275), (math.pi, 2.275), (9.42478, 2.475)]
    got = obj.evaluate(np.array(minima))
    np.testing.assert_allclose(got, obj.known_min, atol=1e-8)
    assert obj.known_min == pytest.approx(0.39788735772973816, rel=1e-14)
    assert obj.evaluate(np.array([[0.0, 0.0]]))[0] == pytest.approx(
        55.602112642270264, rel=1e-12
    )


def test_hartmann6_attains_published_minimum():
    obj = hartmann6_objective()
    xstar = np.array([[0.20169, 0.150011, 0.476874, 0.275332, 0.311652, 0.6573]])
    assert obj.evaluate(xstar)[0] == pytest.approx(-3.322368011391339, abs=1e-8)
    # the published argmin is the best point in a small neighborhood
    rng = np.random.default_rng(0)
    nearby = np.clip(xstar + 0.02 * rng.standard_normal((50, 6)), 0.0, 1.0)
    assert np.all(obj.evaluate(nearby) >= obj.evaluate(xstar)[0] - 1e-12)


def test_domain_and_dimension_guards():
    obj = branin_objective()
    with pytest.raises(ValueError):
        obj.evaluate(np.array([[100.0, 0.0]]))
    with pytest.raises(ValueError):
        obj.evaluate(np.array([[0.0, 0.0, 0.0]]))


def test_grid_pool_layout():
    pool = grid_pool(branin_objective(), 5)
    assert pool.n == 25
    assert pool.ids[0] == "g000000" and pool.ids[24] == "g000024"
    # row-major over (x1, x2); id 7 sits at grid cell (1, 2)
    np.testing.assert_allclose(pool.features[7], [0.25, 0.5])
    assert pool.features.min() == 0.0 and pool.features.max() == 1.0
    # minimize sense: revealed engineering value is the negated objective
    obj = branin_objective()
    lo, hi = obj.bounds[:, 0], obj.bounds[:, 1]
    coords = lo + pool.features[7] * (hi - lo)
    want = obj.evaluate(coords[None, :])[0]
    assert pool.raw_target(7) == pytest.approx(want, rel=1e-12)
    pool.mark_pending([7])
    assert pool.reveal(7) == pytest.approx(-want, rel=1e-12)


def test_grid_pool_rejects_non_2d():
    with pytest.raises(ValueError):
        grid_pool(hartmann6_objective(), 4)


def test_quasirandom_pool_deterministic_unit_features():
    a = quasirandom_pool(hartmann6_objective(), 50, seed=3)
    b = quasirandom_pool(hartmann6_objective(), 50, seed=3)
    c = quasirandom_pool(hartmann6_objective(), 50, seed=4)
    assert a.n == 50 and a.dim == 6
    np.testing.assert_array_equal(a.features, b.features)
    assert not np.array_equal(a.features, c.features)
    assert a.features.min() >= 0.0 and a.features.max() <= 1.0
    want = hartmann6_objective().evaluate(a.features)  # unit-box domain
    got = np.array([a.raw_target(i) for i in range(a.n)])
    np.testing.assert_allclose(got, want, rtol=1e-12)


def test_pool_for_objective_dispatch():
    assert pool_for_objective("branin", seed=0, grid_resolution=9).n == 81
    assert pool_for_objective("hartmann6", seed=0, n_points=40).n == 40
    assert pool_for_objective("gp-prior", seed=1, grid_resolution=500).n == 100 * 100
    with pytest.raises(ValueError):
        pool_for_objective("rosenbrock", seed=0)


def test_gp_prior_surface_reproducible_on_grid_only():
    obj1 = sample_gp_prior_objective(5, resolution=20)
    obj2 = sample_gp_prior_objective(5, resolution=20)
    obj3 = sample_gp_prior_objective(6, resolution=20)
    g = np.linspace(0.0, 1.0, 20)
    nodes = np.column_stack([np.repeat(g, 20), np.tile(g, 20)])
    v1, v2, v3 = obj1.evaluate(nodes), obj2.evaluate(nodes), obj3.evaluate(nodes)
    np.testing.assert_array_equal(v1, v2)
    assert not np.array_equal(v1, v3)
    assert obj1.known_min == pytest.approx(v1.min())
    with pytest.raises(ValueError):
        obj1.evaluate(np.array([[0.5 * (g[0] + g[1]), 0.0]]))


def test_gp_prior_draw_has_the_right_covariance():
    # diagonal and one lagged covariance of the surface across seeds
    res, ls = 4, 0.5
    g = np.linspace(0.0, 1.0, res)
    draws = []
    for seed in range(3000):
        obj = sample_gp_prior_objective(seed, resolution=res, lengthscale=ls)
        nodes = np.column_stack([np.repeat(g, res), np.tile(g, res)])
        draws.append(obj.evaluate(nodes))
    draws = np.array(draws)
    var = draws.var(axis=0)
    np.testing.assert_allclose(var, 1.0, rtol=0.12)
    # cov(f(0,0), f(0, g1)) = k(0, g1) since the kernel factors per axis
    want = math.exp(-0.5 * (g[1] ** 2) / ls**2)
    got = np.cov(draws[:, 0], draws[:, 1])[0, 1]
    assert got == pytest.approx(want, rel=0.12)


def test_heavy_tail_boosts_only_the_top():
    z = np.array([-2.0, 0.5, 1.0, 3.0])
    np.testing.assert_allclose(_heavy_tail(z), [-2.0, 0.5, 1.0, 6.0])


def test_library_arrays_structures():
    x, y = synthetic_library_arrays(1, 500, 12, "sparse-linear")
    assert x.shape == (500, 12) and y.shape == (500,)
    assert set(np.unique(x)) <= {0.0, 1.0}
    assert 0.05 < x.mean() < 0.3

    xg, yg = synthetic_library_arrays(1, 500, 12, "gp-scored")
    assert not set(np.unique(xg)) <= {0.0, 1.0}
    assert np.isfinite(yg).all()

    x2, y2 = synthetic_library_arrays(1, 500, 12, "sparse-linear")
    np.testing.assert_array_equal(x, x2)
    np.testing.assert_array_equal(y, y2)

    with pytest.raises(ValueError):
        synthetic_library_arrays(1, 2, 12, "sparse-linear")
    with pytest.raises(ValueError):
        synthetic_library_arrays(1, 500, 12, "quantum")


def test_generated_library_round_trips_through_the_loader(tmp_path):
    path = str(tmp_path / "lib.csv")
    generate_synthetic_library(3, 60, 5, "sparse-linear", path)
    with open(path, encoding="utf-8") as fh:
        first = fh.readline()
    assert first.startswith("# synthetic-library n=60 dim=5")
    assert sum(1 for line in open(path)) == 62  # comment + header + rows

    loaded = load_library(path)
    direct = synthetic_library_pool(3, 60, 5, "sparse-linear")
    assert loaded.ids == direct.ids
    assert loaded.n == 60 and loaded.dim == 5
    np.testing.assert_allclose(loaded.features, direct.features, rtol=1e-12)
    got = np.array([loaded.raw_target(i) for i in range(60)])
    want = np.array([direct.raw_target(i) for i in range(60)])
    np.testing.assert_array_equal(got, want)


def test_objective_registry_is_consistent():
    for name, factory in OBJECTIVES.items():
        obj = factory()
        assert obj.name == name
        assert obj.bounds.shape == (obj.dim, 2)
        mid = obj.bounds.mean(axis=1)[None, :]
        assert np.isfinite(obj.evaluate(mid)).all()

"""Synthetic objectives, discretized benchmark pools, and library generation.

The discrete pools built here have features living in the unit box (grid or
quasi-random coordinates rescaled by the domain bounds), so surrogate
lengthscales are directly comparable across objectives and no per-column
rescaling is applied at construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.stats import qmc

from .pool import CandidatePool
from .rfgp import SqExpKernel, build_random_feature_basis, chol_with_jitter
from .seeding import derive_seed, rng_for


@dataclass(frozen=True)
class SyntheticObjective:
    """A deterministic test function on a rectangular domain."""

    name: str
    dim: int
    bounds: np.ndarray          # (dim, 2) low/high
    fn: Callable[[np.ndarray], np.ndarray]
    known_min: float | None = None

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.dim:
            raise ValueError(f"{self.name} expects {self.dim}-dimensional inputs")
        lo, hi = self.bounds[:, 0], self.bounds[:, 1]
        if np.any(x < lo - 1e-12) or np.any(x > hi + 1e-12):
            raise ValueError(f"query outside the {self.name} domain")
        return self.fn(x)


def _bohachevsky(x: np.ndarray) -> np.ndarray:
    x1, x2 = x[:, 0], x[:, 1]
    return (
        x1**2
        + 2.0 * x2**2
        - 0.3 * np.cos(3.0 * math.pi * x1)
        - 0.4 * np.cos(4.0 * math.pi * x2)
        + 0.7
    )


def _branin(x: np.ndarray) -> np.ndarray:
    x1, x2 = x[:, 0], x[:, 1]
    a = 1.0
    b = 5.1 / (4.0 * math.pi**2)
    c = 5.0 / math.pi
    r = 6.0
    s = 10.0
    t = 1.0 / (8.0 * math.pi)
    return a * (x2 - b * x1**2 + c * x1 - r) ** 2 + s * (1.0 - t) * np.cos(x1) + s


_HARTMANN6_A = np.array([
    [10.0, 3.0, 17.0, 3.5, 1.7, 8.0],
    [0.05, 10.0, 17.0, 0.1, 8.0, 14.0],
    [3.0, 3.5, 1.7, 10.0, 17.0, 8.0],
    [17.0, 8.0, 0.05, 10.0, 0.1, 14.0],
])
_HARTMANN6_C = np.array([1.0, 1.2, 3.0, 3.2])
_HARTMANN6_P = 1e-4 * np.array([
    [1312, 1696, 5569, 124, 8283, 5886],
    [2329, 4135, 8307, 3736, 1004, 9991],
    [2348, 1451, 3522, 2883, 3047, 6650],
    [4047, 8828, 8732, 5743, 1091, 381],
])


def _hartmann6(x: np.ndarray) -> np.ndarray:
    # sum_i c_i exp(-sum_j A_ij (x_j - P_ij)^2), negated
    d2 = ((x[:, None, :] - _HARTMANN6_P[None, :, :]) ** 2 * _HARTMANN6_A[None, :, :]).sum(axis=2)
    return -(np.exp(-d2) @ _HARTMANN6_C)


def bohachevsky_objective() -> SyntheticObjective:
    """Bowl plus cosine ripples; global minimum 0 at the origin."""
    return SyntheticObjective(
        "bohachevsky", 2, np.array([[-100.0, 100.0], [-100.0, 100.0]]), _bohachevsky, 0.0
    )


def branin_objective() -> SyntheticObjective:
    """Three global minima, all at 0.397887."""
    return SyntheticObjective(
        "branin", 2, np.array([[-5.0, 10.0], [0.0, 15.0]]), _branin, 0.39788735772973816
    )


def hartmann6_objective() -> SyntheticObjective:
    """Six-dimensional, four local minima; global minimum -3.32237."""
    return SyntheticObjective(
        "hartmann6", 6, np.tile([0.0, 1.0], (6, 1)), _hartmann6, -3.322368011391339
    )


def sample_gp_prior_objective(
    seed: int,
    resolution: int = 100,
    lengthscale: float = 0.1,
    signal_variance: float = 1.0,
) -> SyntheticObjective:
    """One exact joint draw from a GP prior on a unit-square grid.

    The squared-exponential kernel on a tensor grid factors across the two
    axes, so the joint draw is taken as L1 Z L2' with per-axis Cholesky
    factors: exact (up to diagonal jitter) and cheap even at 100x100. The
    objective is defined at the grid nodes; queries must land on them.
    """
    g = np.linspace(0.0, 1.0, resolution)
    d2 = (g[:, None] - g[None, :]) ** 2
    k_axis = np.exp(-0.5 * d2 / lengthscale**2)
    chol_axis, _ = chol_with_jitter(k_axis)
    z = rng_for(seed, "gp-surface").standard_normal((resolution, resolution))
    surface = math.sqrt(signal_variance) * (chol_axis @ z @ chol_axis.T)

    step = g[1] - g[0] if resolution > 1 else 1.0

    def lookup(x: np.ndarray) -> np.ndarray:
        idx = np.rint(x / step).astype(int)
        on_grid = np.abs(idx * step - x) < 1e-9
        if not np.all(on_grid):
            raise ValueError("gp-prior objective is defined only at grid nodes")
        return surface[idx[:, 0], idx[:, 1]]

    return SyntheticObjective(
        f"gp-prior-{seed}", 2, np.array([[0.0, 1.0], [0.0, 1.0]]), lookup,
        float(surface.min()),
    )


OBJECTIVES = {
    "bohachevsky": bohachevsky_objective,
    "branin": branin_objective,
    "hartmann6": hartmann6_objective,
}


def _unit_box(x: np.ndarray, bounds: np.ndarray) -> np.ndarray:
    lo, hi = bounds[:, 0], bounds[:, 1]
    return (x - lo) / (hi - lo)


def grid_pool(objective: SyntheticObjective, resolution: int, sense: str = "minimize") -> CandidatePool:
    """Discretize a 2-D objective on a regular grid, unit-box features."""
    if objective.dim != 2:
        raise ValueError("grid pools are for 2-D objectives")
    lo, hi = objective.bounds[:, 0], objective.bounds[:, 1]
    g1 = np.linspace(lo[0], hi[0], resolution)
    g2 = np.linspace(lo[1], hi[1], resolution)
    xx, yy = np.meshgrid(g1, g2, indexing="ij")
    coords = np.column_stack([xx.ravel(), yy.ravel()])
    targets = objective.evaluate(coords)
    ids = [f"g{i:06d}" for i in range(coords.shape[0])]
    return CandidatePool(
        ids, _unit_box(coords, objective.bounds), targets, sense,
        normalize_features=False,
    )


def quasirandom_pool(objective: SyntheticObjective, n: int, seed: int, sense: str = "minimize") -> CandidatePool:
    """Discretize an objective on scrambled Sobol points, unit-box features."""
    sampler = qmc.Sobol(d=objective.dim, scramble=True, seed=derive_seed(seed, "sobol"))
    unit = sampler.random_base2(math.ceil(math.log2(max(n, 2))))[:n]
    lo, hi = objective.bounds[:, 0], objective.bounds[:, 1]
    coords = lo + unit * (hi - lo)
    targets = objective.evaluate(coords)
    ids = [f"q{i:06d}" for i in range(n)]
    return CandidatePool(ids, unit, targets, sense, normalize_features=False)


def pool_for_objective(
    name: str, seed: int, grid_resolution: int = 200, n_points: int = 50_000
) -> CandidatePool:
    """Standard discretization for each named objective."""
    if name == "gp-prior":
        obj = sample_gp_prior_objective(seed, resolution=min(grid_resolution, 100))
        return grid_pool(obj, min(grid_resolution, 100))
    if name == "hartmann6":
        return quasirandom_pool(hartmann6_objective(), n_points, seed)
    if name in OBJECTIVES:
        return grid_pool(OBJECTIVES[name](), grid_resolution)
    raise ValueError(f"unknown objective {name!r}")


# ---------------------------------------------------------------------------
# Synthetic screening libraries
# ---------------------------------------------------------------------------


def _heavy_tail(z: np.ndarray) -> np.ndarray:
    # standardized score plus a quadratic boost of the upper tail
    return z + 0.75 * np.maximum(z - 1.0, 0.0) ** 2


def synthetic_library_arrays(seed: int, n: int, dim: int, structure: str):
    """Features and targets for a synthetic screening library.

    ``sparse-linear``: sparse binary features scored by a sparse linear rule.
    ``gp-scored``: dense Gaussian features scored by a smooth random surface
    (a random-feature draw). Both get a heavy upper tail so a small fraction
    of candidates is far better than the bulk, which is what makes ranking
    the top percentile interesting.
    """
    if n < 4 or dim < 2:
        raise ValueError("library needs n >= 4 and dim >= 2")
    rng = rng_for(seed, "library", structure)
    if structure == "sparse-linear":
        x = (rng.random((n, dim)) < 0.15).astype(float)
        w = np.where(rng.random(dim) < 0.3, rng.standard_normal(dim), 0.0)
        if not np.any(w):
            w[0] = 1.0
        raw = x @ w + 0.1 * rng.standard_normal(n)
    elif structure == "gp-scored":
        x = rng.standard_normal((n, dim))
        kernel = SqExpKernel(lengthscale=0.75 * math.sqrt(dim), signal_variance=1.0)
        basis = build_random_feature_basis(kernel, dim, 256, derive_seed(seed, "library-basis"))
        theta = rng_for(seed, "library-theta").standard_normal(256)
        raw = basis.phi(x) @ theta
    else:
        raise ValueError(f"unknown library structure {structure!r}")
    z = (raw - raw.mean()) / raw.std()
    return x, _heavy_tail(z)


def generate_synthetic_library(
    seed: int, n: int, dim: int, structure: str, path: str
) -> str:
    """Write a synthetic library as feature CSV; returns the path.

    A provenance comment carries the declared row count; the loader ignores
    it but tests recount against it.
    """
    x, y = synthetic_library_arrays(seed, n, dim, structure)
    lines = [f"# synthetic-library n={n} dim={dim} seed={seed} structure={structure}"]
    lines.append("id,target," + ",".join(f"f{j}" for j in range(dim)))
    for i in range(n):
        row = [f"s{i:07d}", repr(float(y[i]))]
        row.extend(repr(float(v)) for v in x[i])
        lines.append(",".join(row))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def synthetic_library_pool(seed: int, n: int, dim: int, structure: str) -> CandidatePool:
    """In-memory pool equivalent to loading a generated library CSV."""
    x, y = synthetic_library_arrays(seed, n, dim, structure)
    ids = [f"s{i:07d}" for i in range(n)]
    return CandidatePool(ids, x, y, "maximize")

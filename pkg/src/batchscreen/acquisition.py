"""Selection rules over a discrete candidate pool.

All selectors work in engine space (larger is better) on a read-only
:class:`~batchscreen.pool.PoolView`. Candidates already evaluated, plus any
explicitly excluded indices, are never returned. Ties are broken toward the
lowest candidate index so selection is deterministic given its inputs.
"""

from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np
from scipy.special import ndtr

from .errors import PoolExhaustedError
from .pool import PoolView
from .rfgp import GpPosterior, chol_with_jitter
from .seeding import rng_for

_SQRT_2PI = math.sqrt(2.0 * math.pi)


def expected_improvement(
    mean: np.ndarray, sigma: np.ndarray, incumbent: float
) -> np.ndarray:
    """Closed-form expected improvement over ``incumbent``, elementwise.

    With z = (mean - incumbent) / sigma this is
    (mean - incumbent) * CDF(z) + sigma * pdf(z); at sigma = 0 it degenerates
    to max(0, mean - incumbent). Always non-negative.
    """
    mean = np.asarray(mean, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    mean, sigma = np.broadcast_arrays(mean, sigma)
    if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(sigma)) and math.isfinite(incumbent)):
        raise ValueError("expected_improvement requires finite inputs")
    if np.any(sigma < 0):
        raise ValueError("sigma must be non-negative")
    diff = mean - incumbent
    out = np.maximum(diff, 0.0)
    pos = sigma > 0
    if np.any(pos):
        z = diff[pos] / sigma[pos]
        pdf = np.exp(-0.5 * z * z) / _SQRT_2PI
        out = out.copy()
        out[pos] = diff[pos] * ndtr(z) + sigma[pos] * pdf
    return np.maximum(out, 0.0)


def _values_on(view: PoolView, fn_or_values) -> np.ndarray:
    if callable(fn_or_values):
        values = np.asarray(fn_or_values(view.features), dtype=float)
    else:
        values = np.asarray(fn_or_values, dtype=float)
    if values.shape != (view.n,):
        raise ValueError(f"expected {view.n} values, got shape {values.shape}")
    return values


def _allowed_indices(view: PoolView, exclude: Sequence[int]) -> np.ndarray:
    mask = np.ones(view.n, dtype=bool)
    if view.evaluated:
        mask[list(view.evaluated)] = False
    if len(exclude):
        mask[list(exclude)] = False
    return np.flatnonzero(mask)


def ts_argmax(
    sampled: Callable | np.ndarray, view: PoolView, exclude: Sequence[int] = ()
) -> int:
    """Index of the highest sampled value among selectable candidates."""
    ranked = ranked_top_s(sampled, view, 1, exclude)
    return ranked[0]


def ranked_top_s(
    sampled: Callable | np.ndarray,
    view: PoolView,
    s: int,
    exclude: Sequence[int] = (),
) -> list[int]:
    """Top-s selectable candidates, best first, lowest index on ties.

    Returns fewer than ``s`` entries only when fewer remain selectable;
    raises :class:`PoolExhaustedError` when none do.
    """
    if s < 1:
        raise ValueError("s must be at least 1")
    values = _values_on(view, sampled)
    allowed = _allowed_indices(view, exclude)
    if allowed.size == 0:
        raise PoolExhaustedError("no selectable candidates remain")
    sub = values[allowed]
    order = np.lexsort((allowed, -sub))
    return [int(allowed[i]) for i in order[: min(s, allowed.size)]]


def greedy_rank(
    mean_values: Callable | np.ndarray,
    view: PoolView,
    s: int,
    exclude: Sequence[int] = (),
) -> list[int]:
    """Exploitation-only batch: the s highest predictive means."""
    return ranked_top_s(mean_values, view, s, exclude)


def random_batch(view: PoolView, s: int, seed: int, exclude: Sequence[int] = ()) -> list[int]:
    """Uniform draw without replacement from the selectable candidates."""
    if s < 1:
        raise ValueError("s must be at least 1")
    allowed = _allowed_indices(view, exclude)
    if allowed.size == 0:
        raise PoolExhaustedError("no selectable candidates remain")
    rng = rng_for(seed, "random-batch")
    picks = rng.choice(allowed, size=min(s, allowed.size), replace=False)
    return [int(i) for i in picks]


def epsilon_greedy_batch(
    mean_values: Callable | np.ndarray,
    view: PoolView,
    s: int,
    epsilon: float,
    seed: int,
    exclude: Sequence[int] = (),
) -> list[int]:
    """Greedy batch with round(epsilon * s) slots replaced by uniform picks.

    The random slots are drawn after the greedy picks and exclude them, so
    the batch stays distinct.
    """
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError("epsilon must lie in [0, 1]")
    n_random = int(round(epsilon * s))
    n_greedy = s - n_random
    batch: list[int] = []
    if n_greedy > 0:
        batch = ranked_top_s(mean_values, view, n_greedy, exclude)
    if n_random > 0:
        allowed = _allowed_indices(view, list(exclude) + batch)
        if allowed.size:
            rng = rng_for(seed, "eps-random")
            picks = rng.choice(allowed, size=min(n_random, allowed.size), replace=False)
            batch.extend(int(i) for i in picks)
    if not batch:
        raise PoolExhaustedError("no selectable candidates remain")
    return batch


def fantasize(
    model,
    pending_x: np.ndarray,
    strategy: str = "posterior-sample",
    seed: int = 0,
    constant: float | None = None,
) -> np.ndarray:
    """Hypothetical outcomes at pending locations, in engine space.

    ``posterior-sample`` draws one joint sample of the observations: for a GP
    posterior this is an exact joint normal (predictive covariance plus
    observation noise); for a weight-space surrogate it evaluates one weight
    draw and adds noise. ``kriging-believer`` returns the predictive means;
    ``constant-liar`` returns the given constant everywhere.
    """
    pending_x = np.atleast_2d(np.asarray(pending_x, dtype=float))
    k = pending_x.shape[0]
    if strategy == "constant-liar":
        if constant is None:
            raise ValueError("constant-liar needs a constant")
        return np.full(k, float(constant))

    if isinstance(model, GpPosterior):
        if strategy == "kriging-believer":
            return model.predict(pending_x)[0]
        if strategy == "posterior-sample":
            mean, cov = model.joint_predictive(pending_x)
            cov = cov + model.kernel.noise_variance * np.eye(k)
            chol, _ = chol_with_jitter(cov)
            z = rng_for(seed, "fantasy").standard_normal(k)
            return mean + chol @ z
    else:
        # weight-space surrogate: factored posterior over network weights
        from . import pbp

        if strategy == "kriging-believer":
            return pbp.forward_moments(model, pending_x)[0]
        if strategy == "posterior-sample":
            w = pbp.pbp_sample_weights(model, seed)
            rng = rng_for(seed, "fantasy-noise")
            noise = math.sqrt(model.noise_variance) * rng.standard_normal(k)
            return pbp.pbp_point_eval(w, pending_x) + noise
    raise ValueError(f"unknown fantasy strategy {strategy!r}")

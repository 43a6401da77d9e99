"""Batched screening campaigns over a candidate pool.

One campaign = T synchronized rounds. Every round the surrogate is refit on
everything revealed so far (sequential methods run with batch size 1, so
"refit every round" covers both cadences), a batch of S distinct candidates
is proposed by the configured method, and the batch is revealed in order.
The first round of every campaign is a uniformly random batch: it seeds the
surrogate with data and gives every method an identical starting state under
a shared master seed.

Batch proposal methods:

* ``ts``        one posterior function draw, pick its argmax (batch size 1);
* ``pdts``      S independent draws from the same frozen posterior, one per
                worker; each worker reports its ranked top-S list and the
                coordinator merges them with duplicates resolved by rank
                (see :func:`dedup_merge`);
* ``ei``        argmax of closed-form expected improvement (batch size 1);
* ``parallel-ei`` sequential batch construction where pending picks are
                integrated out with Monte-Carlo fantasies;
* ``greedy``    top-S predictive means;
* ``eps-greedy`` greedy with a random fraction of slots;
* ``random``    uniform draw.

All selection happens in normalized engine space; traces record raw
native-sense values.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy.linalg import solve_triangular

from . import pbp
from .acquisition import (
    epsilon_greedy_batch,
    expected_improvement,
    greedy_rank,
    random_batch,
    ranked_top_s,
    ts_argmax,
)
from .errors import CampaignAborted, ProtocolViolationError, WorkerUnavailableError
from .metrics import (
    immediate_regret,
    recall_above_threshold,
    recall_top_fraction,
)
from .pool import CandidatePool, ObservationSet, PoolView
from .rfgp import (
    GpPosterior,
    RandomFeatureModel,
    SqExpKernel,
    build_random_feature_basis,
    chol_with_jitter,
    fit_sqexp_hyperparams,
    gp_fit,
    rf_eval,
    rf_fit,
)
from .seeding import derive_seed, rng_for

METHODS = ("ts", "ei", "pdts", "parallel-ei", "greedy", "eps-greedy", "random")
SEQUENTIAL_METHODS = ("ts", "ei")
SURROGATES = ("rfgp", "pbp")
METRICS = ("ir", "recall-top", "recall-threshold")
FANTASY_STRATEGIES = ("posterior-sample", "kriging-believer", "constant-liar")


@dataclass(frozen=True)
class GpSettings:
    """Squared-exponential surrogate knobs.

    When ``fit_hypers`` is on, the lengthscale and signal variance are
    re-optimized by marginal likelihood each time ``hyper_refit_points`` new
    observations have arrived; otherwise the given values are used as-is.
    ``n_features`` controls the random-feature expansion used for posterior
    function draws.
    """

    lengthscale: float = 0.3
    signal_variance: float = 1.0
    noise_variance: float = 1e-6
    n_features: int = 500
    fit_hypers: bool = True
    hyper_refit_points: int = 10
    hyper_starts: int = 2
    hyper_maxiter: int = 50


@dataclass(frozen=True)
class PbpSettings:
    hidden: tuple[int, ...] = (100,)
    epochs: int = 40


@dataclass(frozen=True)
class CampaignConfig:
    method: str
    surrogate: str = "rfgp"
    batch_size: int = 1
    n_iterations: int = 1
    seed: int = 0
    epsilon: float = 0.0
    n_fantasies: int = 10
    fantasy_strategy: str = "posterior-sample"
    constant_liar: float | None = None
    metric: str = "ir"
    recall_fraction: float = 0.01
    recall_threshold: float | None = None
    gp: GpSettings = field(default_factory=GpSettings)
    pbp: PbpSettings = field(default_factory=PbpSettings)

    def validate(self) -> None:
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.surrogate not in SURROGATES:
            raise ValueError(f"unknown surrogate {self.surrogate!r}")
        if self.metric not in METRICS:
            raise ValueError(f"unknown metric {self.metric!r}")
        if self.batch_size < 1 or self.n_iterations < 1:
            raise ValueError("batch_size and n_iterations must be positive")
        if self.method in SEQUENTIAL_METHODS and self.batch_size != 1:
            raise ValueError(f"method {self.method!r} is sequential; batch_size must be 1")
        if self.method == "parallel-ei" and self.surrogate != "rfgp":
            raise ValueError("parallel-ei requires the rfgp surrogate")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError("epsilon must lie in [0, 1]")
        if self.n_fantasies < 1:
            raise ValueError("n_fantasies must be positive")
        if self.fantasy_strategy not in FANTASY_STRATEGIES:
            raise ValueError(f"unknown fantasy strategy {self.fantasy_strategy!r}")
        if self.metric == "recall-threshold" and self.recall_threshold is None:
            raise ValueError("recall-threshold metric needs recall_threshold")
        if not 0.0 < self.recall_fraction <= 1.0:
            raise ValueError("recall_fraction must lie in (0, 1]")


@dataclass
class IterationRecord:
    t: int
    ids: list[str]
    y_raw: list[float]
    incumbent: float
    metric_name: str
    metric_value: float
    wall_ms: float

    def to_dict(self) -> dict:
        return {
            "t": self.t,
            "ids": self.ids,
            "y_raw": self.y_raw,
            "incumbent": self.incumbent,
            "metric_name": self.metric_name,
            "metric_value": self.metric_value,
            "wall_ms": self.wall_ms,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "IterationRecord":
        return cls(**d)


@dataclass
class CampaignTrace:
    method: str
    seed: int
    records: list[IterationRecord]
    exhausted: bool = False

    @property
    def n_evaluations(self) -> int:
        return sum(len(r.ids) for r in self.records)

    @property
    def final_metric(self) -> float:
        if not self.records:
            raise ValueError("empty trace")
        return self.records[-1].metric_value

    def metric_series(self) -> np.ndarray:
        return np.array([r.metric_value for r in self.records])

    def jsonl_lines(self) -> list[str]:
        return [json.dumps(r.to_dict(), separators=(",", ":")) for r in self.records]

    def write_jsonl(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for line in self.jsonl_lines():
                fh.write(line + "\n")


def read_trace_records(path: str) -> list[dict]:
    with open(path, "r", encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def strip_timing(records: list[dict]) -> list[dict]:
    """Copy of trace records without wall-clock fields, for equality checks."""
    return [{k: v for k, v in r.items() if k != "wall_ms"} for r in records]


# ---------------------------------------------------------------------------
# Ranked-list merge
# ---------------------------------------------------------------------------


def dedup_merge(
    ranked_lists: Sequence[Sequence[int]],
    evaluated: frozenset[int] | set[int],
    n_pool: int | None = None,
) -> tuple[list[int], list[tuple[int, int]]]:
    """Merge per-worker ranked lists into one distinct batch.

    Workers are processed in index order; each contributes its highest-ranked
    entry not yet taken by an earlier worker, regardless of arrival order.
    Returns the batch and per-entry provenance ``(worker, rank)``. A worker
    whose whole list is already taken contributes nothing, which can only
    happen when the pool is nearly exhausted and lists run short.
    """
    taken: list[int] = []
    taken_set: set[int] = set()
    provenance: list[tuple[int, int]] = []
    for w, lst in enumerate(ranked_lists):
        seen: set[int] = set()
        for e in lst:
            if not isinstance(e, (int, np.integer)):
                raise ProtocolViolationError(f"worker {w}: non-integer entry {e!r}")
            if n_pool is not None and not (0 <= e < n_pool):
                raise ProtocolViolationError(f"worker {w}: index {e} out of range")
            if e in seen:
                raise ProtocolViolationError(f"worker {w}: duplicate entry {e}")
            if e in evaluated:
                raise ProtocolViolationError(f"worker {w}: entry {e} already evaluated")
            seen.add(e)
        for rank, e in enumerate(lst):
            if e not in taken_set:
                taken.append(int(e))
                taken_set.add(e)
                provenance.append((w, rank))
                break
    return taken, provenance


# ---------------------------------------------------------------------------
# Surrogate drivers
# ---------------------------------------------------------------------------


def sampled_values_from_model(model, features: np.ndarray, seed: int) -> np.ndarray:
    """Evaluate one posterior function draw over candidate features.

    This is the single code path shared by in-process selection and remote
    workers, so identical (model, seed) inputs give identical values.
    """
    if isinstance(model, RandomFeatureModel):
        theta = model.posterior_sample(seed)
        return rf_eval(theta, model.basis, features)
    if isinstance(model, pbp.FactoredPosterior):
        w = pbp.pbp_sample_weights(model, seed)
        return pbp.pbp_point_eval(w, features)
    raise TypeError(f"unsupported snapshot model {type(model).__name__}")


def model_from_snapshot(payload: dict):
    kind = payload.get("kind")
    if kind == "rfgp":
        return RandomFeatureModel.from_payload(payload)
    if kind == "pbp":
        return pbp.FactoredPosterior.from_payload(payload)
    raise ProtocolViolationError(f"unknown snapshot kind {kind!r}")


class RfgpDriver:
    """GP surrogate state for one campaign.

    Exact GP moments feed improvement and greedy scores; a random-feature
    linear posterior supplies function draws. Hyperparameters and the feature
    basis refresh together every ``hyper_refit_points`` observations.
    """

    def __init__(self, config: CampaignConfig, features: np.ndarray, master_seed: int):
        self.settings = config.gp
        self.features = features
        self.master_seed = master_seed
        self.kernel = SqExpKernel(
            self.settings.lengthscale,
            self.settings.signal_variance,
            self.settings.noise_variance,
        )
        self.basis = None
        self.phi_pool = None
        self.gp: GpPosterior | None = None
        self.rf: RandomFeatureModel | None = None
        self._hyper_n: int | None = None
        self._pred_cache = None

    def _rebuild_basis(self, n_label: int) -> None:
        self.basis = build_random_feature_basis(
            self.kernel, self.features.shape[1], self.settings.n_features,
            derive_seed(self.master_seed, "rf-basis", n_label),
        )
        self.phi_pool = self.basis.phi(self.features)

    def refit(self, obs: ObservationSet) -> None:
        x, y = obs.features, obs.y_normalized
        n = len(obs)
        if self.settings.fit_hypers and (
            self._hyper_n is None or n - self._hyper_n >= self.settings.hyper_refit_points
        ):
            self.kernel = fit_sqexp_hyperparams(
                x, y,
                noise_variance=self.settings.noise_variance,
                seed=derive_seed(self.master_seed, "hyper", n),
                n_starts=self.settings.hyper_starts,
                maxiter=self.settings.hyper_maxiter,
            )
            self._rebuild_basis(n)
            self._hyper_n = n
        elif self.basis is None:
            self._rebuild_basis(0)
        self.gp = gp_fit(self.kernel, x, y)
        self.rf = rf_fit(self.basis, x, y)
        self._pred_cache = None

    def sample_values(self, seed: int) -> np.ndarray:
        theta = self.rf.posterior_sample(seed)
        return self.phi_pool @ theta

    def _predictions(self):
        if self._pred_cache is None:
            mu, var = self.gp.predict(self.features)
            self._pred_cache = (mu, np.sqrt(np.maximum(var, 0.0)))
        return self._pred_cache

    def mean_values(self) -> np.ndarray:
        return self._predictions()[0]

    def ei_values(self, incumbent: float) -> np.ndarray:
        mu, sigma = self._predictions()
        return expected_improvement(mu, sigma, incumbent)

    def snapshot_payload(self) -> dict:
        return self.rf.to_payload()

    @property
    def model(self):
        return self.rf


class PbpDriver:
    """Bayesian-net surrogate state; refit is always from scratch."""

    def __init__(self, config: CampaignConfig, features: np.ndarray, master_seed: int):
        self.settings = config.pbp
        self.features = features
        self.master_seed = master_seed
        self.arch = pbp.BnnArchitecture(features.shape[1], tuple(self.settings.hidden))
        self.post: pbp.FactoredPosterior | None = None
        self._pred_cache = None

    def refit(self, obs: ObservationSet) -> None:
        self.post = pbp.pbp_fit(
            self.arch, obs.features, obs.y_normalized,
            epochs=self.settings.epochs,
            seed=derive_seed(self.master_seed, "pbp-fit", len(obs)),
        )
        self._pred_cache = None

    def sample_values(self, seed: int) -> np.ndarray:
        return sampled_values_from_model(self.post, self.features, seed)

    def _predictions(self):
        if self._pred_cache is None:
            mu, var = pbp.forward_moments(self.post, self.features)
            self._pred_cache = (mu, var)
        return self._pred_cache

    def mean_values(self) -> np.ndarray:
        return self._predictions()[0]

    def ei_values(self, incumbent: float) -> np.ndarray:
        mu, var = self._predictions()
        sigma = np.sqrt(np.maximum(var + self.post.noise_variance, 0.0))
        return expected_improvement(mu, sigma, incumbent)

    def snapshot_payload(self) -> dict:
        return self.post.to_payload()

    @property
    def model(self):
        return self.post


def make_driver(config: CampaignConfig, features: np.ndarray, master_seed: int):
    if config.surrogate == "rfgp":
        return RfgpDriver(config, features, master_seed)
    return PbpDriver(config, features, master_seed)


# ---------------------------------------------------------------------------
# Proposal rules
# ---------------------------------------------------------------------------


class SerialBackend:
    """In-process fan-out: workers are simulated one after another."""

    def ranked_lists(self, driver, view: PoolView, t: int, seeds: list[int], s: int):
        return [ranked_top_s(driver.sample_values(seed), view, s) for seed in seeds]

    def evaluate(self, t, batch, provenance):
        return None  # reveal locally

    def close(self):
        pass


def pdts_propose(
    driver, view: PoolView, t: int, s: int, master_seed: int, backend=None
) -> tuple[list[int], list[tuple[int, int]]]:
    """Fan out one frozen posterior to s simulated workers and merge.

    Worker seeds depend only on (master seed, round, worker index), so the
    proposal is reproducible regardless of how the fan-out is executed.
    """
    backend = backend or SerialBackend()
    seeds = [derive_seed(master_seed, "worker", t, w) for w in range(s)]
    lists = backend.ranked_lists(driver, view, t, seeds, s)
    if len(lists) != s:
        raise ProtocolViolationError(f"expected {s} ranked lists, got {len(lists)}")
    return dedup_merge(lists, view.evaluated, n_pool=view.n)


def sequential_ts_step(driver, view: PoolView, t: int, master_seed: int) -> int:
    """One Thompson step: a single draw's argmax over the remaining pool."""
    values = driver.sample_values(derive_seed(master_seed, "worker", t, 0))
    return ts_argmax(values, view)


def parallel_ei_propose(
    driver: RfgpDriver,
    obs: ObservationSet,
    view: PoolView,
    s: int,
    n_fantasies: int,
    seed: int,
    strategy: str = "posterior-sample",
    constant: float | None = None,
) -> list[int]:
    """Batch built slot by slot, marginalizing pending picks with fantasies.

    Slot 1 is the plain improvement argmax. Each later slot draws
    ``n_fantasies`` joint samples of the pending outcomes from the current
    posterior, scores every candidate by improvement against the fantasy-
    augmented model (incumbent raised by the fantasies where applicable), and
    averages the scores across fantasies.

    Conditioning on the pending block extends the training Cholesky factor
    rather than refactoring it, and all fantasies reuse that factor since
    they differ only in target values; the result matches a from-scratch
    refit per fantasy up to floating-point roundoff.
    """
    gp = driver.gp
    kernel = gp.kernel
    y_star = obs.incumbent_normalized()
    picks = [int(ranked_top_s(driver.ei_values(y_star), view, 1)[0])]
    if s == 1:
        return picks

    feats = view.features
    if gp.n:
        kx_obs = kernel.matrix(gp.x, feats)                       # (n, N)
        v1 = solve_triangular(gp.chol, kx_obs, lower=True)        # (n, N)
        c1 = solve_triangular(gp.chol, gp.y, lower=True)          # (n,)
        base_mean = v1.T @ c1
        base_var = kernel.signal_variance - np.einsum("ij,ij->j", v1, v1)
    else:
        v1 = np.zeros((0, feats.shape[0]))
        c1 = np.zeros(0)
        base_mean = np.zeros(feats.shape[0])
        base_var = np.full(feats.shape[0], kernel.signal_variance)

    for slot in range(2, s + 1):
        pending = feats[picks]
        k = len(picks)
        mean_k, cov_k = gp.joint_predictive(pending)
        if strategy == "posterior-sample":
            chol_k, _ = chol_with_jitter(cov_k + kernel.noise_variance * np.eye(k))
            z = rng_for(seed, "pei-fantasy", slot).standard_normal((k, n_fantasies))
            fantasies = mean_k[:, None] + chol_k @ z              # (k, F)
        elif strategy == "kriging-believer":
            fantasies = mean_k[:, None]
        else:  # constant-liar
            c = y_star if constant is None else constant
            fantasies = np.full((k, 1), float(c))
        n_f = fantasies.shape[1]

        if gp.n:
            k12 = kernel.matrix(gp.x, pending)                    # (n, k)
            l21 = solve_triangular(gp.chol, k12, lower=True).T    # (k, n)
        else:
            l21 = np.zeros((k, 0))
        k22 = kernel.matrix(pending, pending) + kernel.noise_variance * np.eye(k)
        chol22, _ = chol_with_jitter(k22 - l21 @ l21.T)
        kx_pend = kernel.matrix(pending, feats)                   # (k, N)
        v2 = solve_triangular(chol22, kx_pend - l21 @ v1, lower=True)
        c2 = solve_triangular(chol22, fantasies - (l21 @ c1)[:, None], lower=True)
        means = base_mean[:, None] + v2.T @ c2                    # (N, F)
        sigma = np.sqrt(np.maximum(base_var - np.einsum("ij,ij->j", v2, v2), 0.0))

        incumbents = np.maximum(y_star, fantasies.max(axis=0))
        af = np.zeros(view.n)
        for f in range(n_f):
            af += expected_improvement(means[:, f], sigma, float(incumbents[f]))
        af /= n_f
        picks.append(int(ranked_top_s(af, view, 1, exclude=picks)[0]))
    return picks


# ---------------------------------------------------------------------------
# Campaign loop
# ---------------------------------------------------------------------------


def _metric_value(config: CampaignConfig, pool: CandidatePool, best_min_space: float) -> tuple[str, float]:
    if config.metric == "ir":
        # regret lives in minimization space regardless of the pool's sense
        min_space = pool.hidden_targets if pool.sense == "minimize" else -pool.hidden_targets
        return "ir", immediate_regret(best_min_space, float(np.min(min_space)))
    if config.metric == "recall-top":
        name = f"recall-top-{config.recall_fraction:g}"
        return name, recall_top_fraction(
            pool.evaluated, pool.hidden_targets, pool.sense, config.recall_fraction
        )
    name = f"recall-gt-{config.recall_threshold:g}"
    return name, recall_above_threshold(pool.evaluated, pool.hidden_targets, config.recall_threshold)


def run_campaign(
    config: CampaignConfig, pool: CandidatePool, backend=None
) -> CampaignTrace:
    """Run one campaign to completion (or pool exhaustion) and trace it.

    Raises :class:`CampaignAborted` carrying the partial trace if a backend
    becomes unavailable mid-run.
    """
    config.validate()
    backend = backend or SerialBackend()
    master = config.seed
    driver = make_driver(config, pool.features, master)
    obs = ObservationSet()
    records: list[IterationRecord] = []
    exhausted = False
    best_min_space = np.inf
    trace = CampaignTrace(config.method, master, records)

    for t in range(1, config.n_iterations + 1):
        t0 = time.perf_counter()
        remaining = pool.n_unevaluated()
        if remaining == 0:
            exhausted = True
            break
        s_eff = min(config.batch_size, remaining)
        provenance = None
        try:
            if t == 1:
                batch = random_batch(pool.snapshot(), s_eff, derive_seed(master, "init"))
            else:
                view = pool.snapshot()
                if config.method != "random":
                    driver.refit(obs)
                if config.method == "ts":
                    batch = [sequential_ts_step(driver, view, t, master)]
                elif config.method == "pdts":
                    batch, provenance = pdts_propose(driver, view, t, s_eff, master, backend)
                elif config.method == "ei":
                    batch = [int(ranked_top_s(driver.ei_values(obs.incumbent_normalized()), view, 1)[0])]
                elif config.method == "parallel-ei":
                    batch = parallel_ei_propose(
                        driver, obs, view, s_eff, config.n_fantasies,
                        derive_seed(master, "pei", t),
                        strategy=config.fantasy_strategy, constant=config.constant_liar,
                    )
                elif config.method == "greedy":
                    batch = greedy_rank(driver.mean_values(), view, s_eff)
                elif config.method == "eps-greedy":
                    batch = epsilon_greedy_batch(
                        driver.mean_values(), view, s_eff, config.epsilon,
                        derive_seed(master, "eps", t),
                    )
                else:
                    batch = random_batch(view, s_eff, derive_seed(master, "rand", t))

            pool.mark_pending(batch)
            remote = backend.evaluate(t, batch, provenance)
        except WorkerUnavailableError as exc:
            trace.exhausted = exhausted
            raise CampaignAborted(str(exc), trace=trace) from exc

        y_raw: list[float] = []
        for j, idx in enumerate(batch):
            y_eng = pool.reveal(idx)
            if remote is not None and not (float(remote[j]) == pool.sign * y_eng):
                raise ProtocolViolationError(
                    f"worker-evaluated target for candidate {idx} disagrees with the pool"
                )
            obs.append(idx, pool.features[idx], y_eng)
            raw = pool.sign * y_eng
            y_raw.append(raw)
            best_min_space = min(best_min_space, raw if pool.sense == "minimize" else -raw)

        incumbent = best_min_space if pool.sense == "minimize" else -best_min_space
        metric_name, metric_value = _metric_value(config, pool, best_min_space)
        records.append(IterationRecord(
            t=t,
            ids=[pool.ids[i] for i in batch],
            y_raw=y_raw,
            incumbent=float(incumbent),
            metric_name=metric_name,
            metric_value=float(metric_value),
            wall_ms=(time.perf_counter() - t0) * 1000.0,
        ))
        if len(batch) < s_eff:
            exhausted = True

    trace.exhausted = exhausted or pool.n_unevaluated() == 0
    return trace

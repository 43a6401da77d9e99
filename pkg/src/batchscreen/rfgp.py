"""Gaussian-process surrogate with a random-feature sampling path.

Exact GP regression under a squared-exponential kernel supplies predictive
moments (means, variances, joint covariances) for improvement-based
selection. Posterior *function draws*, needed by Thompson-style selection
over large pools, go through a finite cosine feature expansion instead: with

    phi(x) = sqrt(2 * signal_variance / m) * cos(W x + b),

W rows drawn N(0, diag(1/lengthscale^2)) and b uniform on [0, 2pi), the
inner product phi(x)'phi(x') approximates the kernel, and a Bayesian linear
model over the feature weights (standard normal prior) approximates the GP.
A draw of the weight vector is then a cheap, globally coherent sample of the
whole surface.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import optimize
from scipy.linalg import cho_solve, solve_triangular
from scipy.spatial.distance import cdist

from .errors import IllConditionedKernelError
from .seeding import rng_for

JITTER_LADDER = (0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4)

NOISE_FLOOR = 1e-6


@dataclass(frozen=True)
class SqExpKernel:
    """Isotropic squared-exponential kernel with additive observation noise."""

    lengthscale: float = 1.0
    signal_variance: float = 1.0
    noise_variance: float = 0.0

    def __post_init__(self):
        if self.lengthscale <= 0 or self.signal_variance <= 0 or self.noise_variance < 0:
            raise ValueError("kernel hyperparameters out of range")

    def matrix(self, x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
        d2 = cdist(np.atleast_2d(x1), np.atleast_2d(x2), "sqeuclidean")
        return self.signal_variance * np.exp(-0.5 * d2 / self.lengthscale**2)


def chol_with_jitter(a: np.ndarray) -> tuple[np.ndarray, float]:
    """Cholesky with an escalating diagonal jitter ladder.

    Returns the lower factor and the jitter that succeeded. Raises
    :class:`IllConditionedKernelError` if even the largest jitter fails.
    """
    eye = np.eye(a.shape[0])
    for jitter in JITTER_LADDER:
        try:
            return np.linalg.cholesky(a + jitter * eye), jitter
        except np.linalg.LinAlgError:
            continue
    raise IllConditionedKernelError(
        f"Cholesky failed for a {a.shape[0]}x{a.shape[0]} matrix at jitter {JITTER_LADDER[-1]:g}"
    )


class GpPosterior:
    """Exact GP regression posterior (possibly with zero observations)."""

    def __init__(self, kernel: SqExpKernel, x: np.ndarray, y: np.ndarray):
        self.kernel = kernel
        self.x = np.atleast_2d(np.asarray(x, dtype=float)) if np.size(x) else np.empty((0, 0))
        self.y = np.asarray(y, dtype=float).ravel()
        if self.x.shape[0] != self.y.size:
            raise ValueError("x and y disagree in length")
        self.n = self.y.size
        if self.n:
            k = kernel.matrix(self.x, self.x) + kernel.noise_variance * np.eye(self.n)
            self.chol, self.jitter = chol_with_jitter(k)
            self.alpha = cho_solve((self.chol, True), self.y)
        else:
            self.chol = np.empty((0, 0))
            self.jitter = 0.0
            self.alpha = np.empty(0)

    def predict(self, xq: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Latent mean and variance at query points."""
        xq = np.atleast_2d(np.asarray(xq, dtype=float))
        if self.n == 0:
            return np.zeros(xq.shape[0]), np.full(xq.shape[0], self.kernel.signal_variance)
        kx = self.kernel.matrix(self.x, xq)
        mean = kx.T @ self.alpha
        v = solve_triangular(self.chol, kx, lower=True)
        var = self.kernel.signal_variance - np.einsum("ij,ij->j", v, v)
        return mean, np.maximum(var, 0.0)

    def joint_predictive(self, xq: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Joint latent mean vector and covariance matrix at query points."""
        xq = np.atleast_2d(np.asarray(xq, dtype=float))
        prior = self.kernel.matrix(xq, xq)
        if self.n == 0:
            return np.zeros(xq.shape[0]), prior
        kx = self.kernel.matrix(self.x, xq)
        mean = kx.T @ self.alpha
        v = solve_triangular(self.chol, kx, lower=True)
        return mean, prior - v.T @ v

    def log_marginal_likelihood(self) -> float:
        if self.n == 0:
            return 0.0
        return float(
            -0.5 * self.y @ self.alpha
            - np.sum(np.log(np.diag(self.chol)))
            - 0.5 * self.n * math.log(2.0 * math.pi)
        )


def gp_fit(kernel: SqExpKernel, x: np.ndarray, y: np.ndarray) -> GpPosterior:
    return GpPosterior(kernel, x, y)


def fit_sqexp_hyperparams(
    x: np.ndarray,
    y: np.ndarray,
    noise_variance: float = NOISE_FLOOR,
    seed: int = 0,
    n_starts: int = 2,
    maxiter: int = 50,
) -> SqExpKernel:
    """Maximize the marginal likelihood over (lengthscale, signal variance).

    Gradient-free Nelder-Mead in log space from a few fixed starting points
    plus small seeded perturbations; noise is held fixed. Deterministic for a
    given seed.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.asarray(y, dtype=float).ravel()

    def nll(logp: np.ndarray) -> float:
        log_ls, log_sv = logp
        if not (-7.0 < log_ls < 7.0 and -9.0 < log_sv < 9.0):
            return 1e12
        kern = SqExpKernel(math.exp(log_ls), math.exp(log_sv), noise_variance)
        try:
            return -GpPosterior(kern, x, y).log_marginal_likelihood()
        except IllConditionedKernelError:
            return 1e12

    rng = rng_for(seed, "hyperfit")
    base = [np.log([0.3, 1.0]), np.log([1.0, 1.0]), np.log([0.1, 1.0])]
    starts = [base[i % len(base)] + (0.05 * rng.standard_normal(2) if i >= len(base) else 0.0)
              for i in range(n_starts)]
    best, best_val = None, np.inf
    for s in starts:
        res = optimize.minimize(
            nll, s, method="Nelder-Mead",
            options={"maxiter": maxiter, "xatol": 1e-2, "fatol": 1e-3},
        )
        if res.fun < best_val:
            best, best_val = res.x, res.fun
    return SqExpKernel(math.exp(best[0]), math.exp(best[1]), noise_variance)


# ---------------------------------------------------------------------------
# Random-feature expansion
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RandomFeatureBasis:
    """Frozen cosine feature map approximating a squared-exponential kernel."""

    w: np.ndarray          # (m, dim) frequency rows
    b: np.ndarray          # (m,) phase offsets in [0, 2pi)
    kernel: SqExpKernel

    @property
    def m(self) -> int:
        return self.w.shape[0]

    @property
    def dim(self) -> int:
        return self.w.shape[1]

    def phi(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        scale = math.sqrt(2.0 * self.kernel.signal_variance / self.m)
        return scale * np.cos(x @ self.w.T + self.b)


def build_random_feature_basis(
    kernel: SqExpKernel, dim: int, m: int, seed: int
) -> RandomFeatureBasis:
    """Draw a feature basis; same seed, same basis."""
    if m < 1 or dim < 1:
        raise ValueError("m and dim must be positive")
    rng = rng_for(seed, "rf-basis")
    w = rng.standard_normal((m, dim)) / kernel.lengthscale
    b = rng.uniform(0.0, 2.0 * math.pi, size=m)
    w.setflags(write=False)
    b.setflags(write=False)
    return RandomFeatureBasis(w=w, b=b, kernel=kernel)


class RandomFeatureModel:
    """Bayesian linear model over a fixed random-feature basis.

    The weight prior is standard normal; conditioning on data gives a Gaussian
    posterior whose precision Cholesky factor is kept for cheap draws:
    theta = mean + solve(L', z) with L the lower precision factor.
    """

    def __init__(self, basis: RandomFeatureBasis, mean: np.ndarray, precision_chol: np.ndarray):
        self.basis = basis
        self.mean = np.asarray(mean, dtype=float)
        self.precision_chol = np.asarray(precision_chol, dtype=float)
        if self.mean.shape != (basis.m,) or self.precision_chol.shape != (basis.m, basis.m):
            raise ValueError("posterior shapes disagree with basis size")

    @classmethod
    def prior(cls, basis: RandomFeatureBasis) -> "RandomFeatureModel":
        return cls(basis, np.zeros(basis.m), np.eye(basis.m))

    def posterior_sample(self, seed: int) -> np.ndarray:
        """One weight-vector draw from the current posterior."""
        z = rng_for(seed, "rf-theta").standard_normal(self.basis.m)
        return self.mean + solve_triangular(self.precision_chol, z, lower=True, trans="T")

    def predict(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Posterior mean and variance of the function values at x."""
        p = self.basis.phi(x)
        mean = p @ self.mean
        half = solve_triangular(self.precision_chol, p.T, lower=True)
        var = np.einsum("ij,ij->j", half, half)
        return mean, var

    def to_payload(self) -> dict:
        k = self.basis.kernel
        return {
            "kind": "rfgp",
            "w": self.basis.w.tolist(),
            "b": self.basis.b.tolist(),
            "lengthscale": k.lengthscale,
            "signal_variance": k.signal_variance,
            "noise_variance": k.noise_variance,
            "mean": self.mean.tolist(),
            "precision_chol": self.precision_chol.tolist(),
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "RandomFeatureModel":
        kernel = SqExpKernel(
            lengthscale=payload["lengthscale"],
            signal_variance=payload["signal_variance"],
            noise_variance=payload["noise_variance"],
        )
        basis = RandomFeatureBasis(
            w=np.asarray(payload["w"], dtype=float),
            b=np.asarray(payload["b"], dtype=float),
            kernel=kernel,
        )
        return cls(
            basis,
            np.asarray(payload["mean"], dtype=float),
            np.asarray(payload["precision_chol"], dtype=float),
        )


def rf_fit(basis: RandomFeatureBasis, x: np.ndarray, y: np.ndarray) -> RandomFeatureModel:
    """Condition the feature-weight prior on observations.

    With zero observations this returns the prior. The observation noise is
    the kernel's noise variance plus a small floor that keeps the normal
    equations well posed on noise-free data.
    """
    y = np.asarray(y, dtype=float).ravel()
    if y.size == 0:
        return RandomFeatureModel.prior(basis)
    p = basis.phi(x)
    sigma2 = basis.kernel.noise_variance + NOISE_FLOOR
    a = np.eye(basis.m) + (p.T @ p) / sigma2
    chol, _ = chol_with_jitter(a)
    mean = cho_solve((chol, True), p.T @ y / sigma2)
    return RandomFeatureModel(basis, mean, chol)


def rf_posterior_sample(
    basis: RandomFeatureBasis, x: np.ndarray, y: np.ndarray, seed: int
) -> np.ndarray:
    """Fit-and-draw convenience wrapper."""
    return rf_fit(basis, x, y).posterior_sample(seed)


def rf_eval(theta: np.ndarray, basis: RandomFeatureBasis, x: np.ndarray) -> np.ndarray:
    """Evaluate the sampled function theta'phi(x) at rows of x."""
    return basis.phi(x) @ np.asarray(theta, dtype=float)

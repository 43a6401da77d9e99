"""Bayesian neural network surrogate trained by assumed-density filtering.

The posterior over network weights is kept factored: one independent Gaussian
N(m, v) per weight, a Gamma posterior over the observation-noise precision,
and a Gamma posterior over the weight-prior precision. Training incorporates
one likelihood factor at a time: a forward pass propagates means and
variances through the net (exact for affine steps under the independence
assumption, moment-matched through rectifiers), the log of the marginal
likelihood Z of the observed target is formed under the resulting Gaussian,
and each weight moves by the standard ADF rules

    m' = m + v * dlogZ/dm,
    v' = v - v^2 * ((dlogZ/dm)^2 - 2 dlogZ/dv).

Gamma posteriors are refreshed by matching first and second moments of the
tilted distribution, which reduces to ratios of Z evaluated at shifted shape
parameters. Once per epoch the Gaussian prior factors are re-incorporated the
same way, which both shrinks weights and adapts the prior precision.

Pre-activations are scaled by 1/sqrt(fan-in), counting the appended bias
unit, so activation magnitudes are insensitive to layer width.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import log_ndtr

from .errors import NumericError
from .seeding import rng_for

LOG_2PI = math.log(2.0 * math.pi)

GAMMA_PRIOR_SHAPE = 6.0
GAMMA_PRIOR_RATE = 6.0

# Initial per-weight variance: the prior expectation of 1/lambda at the
# Gamma(6, 6) hyperprior, rate / (shape - 1).
INIT_WEIGHT_VARIANCE = GAMMA_PRIOR_RATE / (GAMMA_PRIOR_SHAPE - 1.0)


@dataclass(frozen=True)
class BnnArchitecture:
    """Feed-forward rectifier net with a single linear output unit."""

    input_dim: int
    hidden: tuple[int, ...] = (100,)

    def __post_init__(self):
        if self.input_dim < 1 or any(h < 1 for h in self.hidden):
            raise ValueError("layer widths must be positive")

    def layer_shapes(self) -> list[tuple[int, int]]:
        """(rows, cols) per weight matrix; cols include the bias column."""
        widths = [self.input_dim, *self.hidden, 1]
        return [(widths[i + 1], widths[i] + 1) for i in range(len(widths) - 1)]


class WeightSample:
    """One concrete set of network weights."""

    def __init__(self, arch: BnnArchitecture, matrices: list[np.ndarray]):
        self.arch = arch
        self.matrices = matrices


class FactoredPosterior:
    """Per-weight Gaussians plus Gamma posteriors over the two precisions."""

    def __init__(
        self,
        arch: BnnArchitecture,
        means: list[np.ndarray],
        variances: list[np.ndarray],
        alpha_noise: float = GAMMA_PRIOR_SHAPE,
        beta_noise: float = GAMMA_PRIOR_RATE,
        alpha_prior: float = GAMMA_PRIOR_SHAPE,
        beta_prior: float = GAMMA_PRIOR_RATE,
    ):
        self.arch = arch
        self.means = means
        self.variances = variances
        self.alpha_noise = alpha_noise
        self.beta_noise = beta_noise
        self.alpha_prior = alpha_prior
        self.beta_prior = beta_prior
        self.skipped_updates = 0

    @property
    def noise_variance(self) -> float:
        """Expected observation-noise variance E[1/precision]."""
        return self.beta_noise / (self.alpha_noise - 1.0)

    def check_valid(self) -> None:
        for l, (m, v) in enumerate(zip(self.means, self.variances)):
            if not (np.all(np.isfinite(m)) and np.all(np.isfinite(v)) and np.all(v > 0)):
                raise NumericError(f"invalid weight posterior in layer {l}")
        for g in (self.alpha_noise, self.beta_noise, self.alpha_prior, self.beta_prior):
            if not (math.isfinite(g) and g > 0):
                raise NumericError("invalid Gamma posterior parameters")

    def to_payload(self) -> dict:
        factors = []
        for l, (m, v) in enumerate(zip(self.means, self.variances)):
            for r in range(m.shape[0]):
                for c in range(m.shape[1]):
                    factors.append([l, r, c, float(m[r, c]), float(v[r, c])])
        return {
            "kind": "pbp",
            "input_dim": self.arch.input_dim,
            "hidden": list(self.arch.hidden),
            "factors": factors,
            "alpha_noise": self.alpha_noise,
            "beta_noise": self.beta_noise,
            "alpha_prior": self.alpha_prior,
            "beta_prior": self.beta_prior,
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "FactoredPosterior":
        arch = BnnArchitecture(payload["input_dim"], tuple(payload["hidden"]))
        shapes = arch.layer_shapes()
        means = [np.full(s, np.nan) for s in shapes]
        variances = [np.full(s, np.nan) for s in shapes]
        for l, r, c, m, v in payload["factors"]:
            means[l][r, c] = m
            variances[l][r, c] = v
        if any(np.isnan(m).any() for m in means):
            raise ValueError("incomplete factor list in posterior payload")
        return cls(
            arch, means, variances,
            alpha_noise=payload["alpha_noise"], beta_noise=payload["beta_noise"],
            alpha_prior=payload["alpha_prior"], beta_prior=payload["beta_prior"],
        )


def pbp_init(arch: BnnArchitecture, seed: int) -> FactoredPosterior:
    """Random mean init scaled by fan-in; all variances at the prior mean."""
    rng = rng_for(seed, "pbp-init")
    means, variances = [], []
    for rows, cols in arch.layer_shapes():
        means.append(rng.standard_normal((rows, cols)) / math.sqrt(cols))
        variances.append(np.full((rows, cols), INIT_WEIGHT_VARIANCE))
    return FactoredPosterior(arch, means, variances)


# ---------------------------------------------------------------------------
# Moment propagation
# ---------------------------------------------------------------------------


def _rectifier_moments(ma: np.ndarray, va: np.ndarray):
    """Mean and variance of max(a, 0) for a ~ N(ma, va), elementwise.

    Also returns the intermediates the backward pass needs. Computed in log
    space so far-negative means underflow gracefully instead of dividing by a
    vanishing normal CDF.
    """
    va = np.asarray(va)
    pos = va > 0.0
    sigma = np.sqrt(np.where(pos, va, 1.0))
    alpha = np.where(pos, ma / sigma, 0.0)
    log_cdf = log_ndtr(alpha)
    log_pdf = -0.5 * alpha**2 - 0.5 * LOG_2PI
    cdf = np.exp(log_cdf)
    pdf = np.exp(log_pdf)
    hazard = np.exp(log_pdf - log_cdf)
    cdf_neg = np.exp(log_ndtr(-alpha))

    mz = np.where(pos, cdf * ma + sigma * pdf, np.maximum(ma, 0.0))
    vprime = ma + sigma * hazard
    vz = mz * vprime * cdf_neg + cdf * va * (1.0 - hazard * (hazard + alpha))
    vz = np.where(pos, np.maximum(vz, 0.0), 0.0)
    cache = {
        "pos": pos, "sigma": sigma, "alpha": alpha, "cdf": cdf, "pdf": pdf,
        "cdf_neg": cdf_neg, "mz": mz, "ma": ma,
    }
    return mz, vz, cache


def forward_moments(post: FactoredPosterior, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Predictive mean and variance of the network output, row-wise.

    The variance is that of the latent function only; add ``noise_variance``
    for the variance of an observation.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[1] != post.arch.input_dim:
        raise ValueError("input dimension mismatch")
    n = x.shape[0]
    mz, vz = x, np.zeros_like(x)
    n_layers = len(post.means)
    for l, (m, v) in enumerate(zip(post.means, post.variances)):
        ones = np.ones((n, 1))
        mz_aug = np.hstack([mz, ones])
        vz_aug = np.hstack([vz, np.zeros((n, 1))])
        s = 1.0 / math.sqrt(m.shape[1])
        ma = s * (mz_aug @ m.T)
        va = s * s * (vz_aug @ (m**2).T + (mz_aug**2 + vz_aug) @ v.T)
        if not (np.all(np.isfinite(ma)) and np.all(np.isfinite(va))):
            raise NumericError(f"non-finite activation moments in layer {l}")
        if l < n_layers - 1:
            mz, vz, _ = _rectifier_moments(ma, va)
        else:
            mz, vz = ma, va
    return mz[:, 0], vz[:, 0]


def pbp_point_eval(sample: WeightSample, x: np.ndarray) -> np.ndarray:
    """Deterministic network output for one concrete weight draw."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    z = x
    last = len(sample.matrices) - 1
    for l, w in enumerate(sample.matrices):
        z_aug = np.hstack([z, np.ones((z.shape[0], 1))])
        a = (z_aug @ w.T) / math.sqrt(w.shape[1])
        z = a if l == last else np.maximum(a, 0.0)
    return z[:, 0]


def pbp_sample_weights(post: FactoredPosterior, seed: int) -> WeightSample:
    rng = rng_for(seed, "pbp-w")
    mats = [
        m + np.sqrt(v) * rng.standard_normal(m.shape)
        for m, v in zip(post.means, post.variances)
    ]
    return WeightSample(post.arch, mats)


# ---------------------------------------------------------------------------
# ADF updates
# ---------------------------------------------------------------------------


def _forward_single_cached(post: FactoredPosterior, x: np.ndarray):
    """Forward pass for one input, keeping what the backward pass needs."""
    n_layers = len(post.means)
    mz, vz = np.asarray(x, dtype=float), np.zeros(len(x))
    layers = []
    mu_f = var_f = None
    for l, (m, v) in enumerate(zip(post.means, post.variances)):
        mz_aug = np.append(mz, 1.0)
        vz_aug = np.append(vz, 0.0)
        s = 1.0 / math.sqrt(m.shape[1])
        ma = s * (m @ mz_aug)
        va = s * s * ((m**2) @ vz_aug + v @ (mz_aug**2 + vz_aug))
        entry = {"mz_aug": mz_aug, "vz_aug": vz_aug, "s": s, "ma": ma, "va": va}
        if l < n_layers - 1:
            mz, vz, rect = _rectifier_moments(ma, va)
            entry["rect"] = rect
        else:
            mu_f, var_f = ma[0], va[0]
        layers.append(entry)
    return mu_f, var_f, layers


def _backward_gradients(post: FactoredPosterior, layers, g_mu: float, g_var: float):
    """Gradients of logZ with respect to every weight mean and variance."""
    grads_m = [None] * len(post.means)
    grads_v = [None] * len(post.means)
    gma = np.array([g_mu])
    gva = np.array([g_var])
    for l in range(len(post.means) - 1, -1, -1):
        m, v = post.means[l], post.variances[l]
        e = layers[l]
        s, mz_aug, vz_aug = e["s"], e["mz_aug"], e["vz_aug"]
        grads_m[l] = s * np.outer(gma, mz_aug) + 2.0 * s * s * (gva[:, None] * m) * vz_aug[None, :]
        grads_v[l] = s * s * np.outer(gva, mz_aug**2 + vz_aug)
        if l == 0:
            break
        gmz = (s * (m.T @ gma) + 2.0 * s * s * mz_aug * (v.T @ gva))[:-1]
        gvz = (s * s * ((m**2 + v).T @ gva))[:-1]
        rect = layers[l - 1]["rect"]
        pos, sigma, cdf, pdf = rect["pos"], rect["sigma"], rect["cdf"], rect["pdf"]
        cdf_neg, mz_r = rect["cdf_neg"], rect["mz"]
        gma = np.where(pos, gmz * cdf + gvz * (2.0 * mz_r * cdf_neg),
                       gmz * (rect["ma"] > 0))
        gva = np.where(pos, gmz * (pdf / (2.0 * sigma)) + gvz * (cdf - mz_r * pdf / sigma), 0.0)
    return grads_m, grads_v


def _log_gauss(y: float, mean: float, var: float) -> float:
    return -0.5 * (LOG_2PI + math.log(var)) - 0.5 * (y - mean) ** 2 / var


def _matched_gamma(alpha: float, beta: float, lz: float, lz1: float, lz2: float):
    """Moment-matched Gamma parameters from Z at shape, shape+1, shape+2.

    Returns None when the match is numerically invalid (the caller keeps the
    old parameters in that case).
    """
    try:
        a_new = 1.0 / (math.exp(lz + lz2 - 2.0 * lz1) * (alpha + 1.0) / alpha - 1.0)
        b_new = 1.0 / (
            math.exp(lz2 - lz1) * (alpha + 1.0) / beta
            - math.exp(lz1 - lz) * alpha / beta
        )
    except OverflowError:
        return None
    if not (math.isfinite(a_new) and math.isfinite(b_new)):
        return None
    if a_new <= 1.0 or b_new <= 0.0:
        return None
    return a_new, b_new


def pbp_adf_update(post: FactoredPosterior, x: np.ndarray, y: float) -> None:
    """Incorporate one likelihood factor in place.

    Weight Gaussians move by the gradient ADF rules; the noise Gamma is
    moment-matched through Z ratios. Per-weight updates that would drive a
    variance non-positive are skipped for that weight; a non-finite logZ
    skips the whole factor and bumps ``skipped_updates``.
    """
    mu_f, var_f, layers = _forward_single_cached(post, np.asarray(x, dtype=float))
    a_n, b_n = post.alpha_noise, post.beta_noise

    v_tot = b_n / (a_n - 1.0) + var_f
    if not (math.isfinite(v_tot) and v_tot > 0.0):
        post.skipped_updates += 1
        return
    lz = _log_gauss(y, mu_f, v_tot)
    if not math.isfinite(lz):
        post.skipped_updates += 1
        return
    lz1 = _log_gauss(y, mu_f, b_n / a_n + var_f)
    lz2 = _log_gauss(y, mu_f, b_n / (a_n + 1.0) + var_f)

    g_mu = (y - mu_f) / v_tot
    g_var = -0.5 / v_tot + 0.5 * (y - mu_f) ** 2 / v_tot**2
    grads_m, grads_v = _backward_gradients(post, layers, g_mu, g_var)

    for l in range(len(post.means)):
        m, v = post.means[l], post.variances[l]
        gm, gv = grads_m[l], grads_v[l]
        m_new = m + v * gm
        v_new = v - v**2 * (gm**2 - 2.0 * gv)
        ok = np.isfinite(m_new) & np.isfinite(v_new) & (v_new > 0.0)
        post.means[l] = np.where(ok, m_new, m)
        post.variances[l] = np.where(ok, v_new, v)

    matched = _matched_gamma(a_n, b_n, lz, lz1, lz2)
    if matched is not None:
        post.alpha_noise, post.beta_noise = matched


def pbp_fit(
    arch: BnnArchitecture,
    x: np.ndarray,
    y: np.ndarray,
    epochs: int = 40,
    seed: int = 0,
) -> FactoredPosterior:
    """Train from a fresh initialization.

    The initial posterior carries the weight prior (variances at its
    expectation), so epochs sweep likelihood factors only, each pass in a
    seed-determined shuffled order; folding the prior factor back in every
    pass would compound it and shrink wide layers toward zero. Zero epochs
    (or zero data) returns the initialized posterior untouched.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    post = pbp_init(arch, seed)
    if y.size == 0:
        return post
    for epoch in range(epochs):
        order = rng_for(seed, "pbp-shuffle", epoch).permutation(y.size)
        for i in order:
            pbp_adf_update(post, x[i], float(y[i]))
    post.check_valid()
    return post

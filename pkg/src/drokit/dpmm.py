"""Truncated stick-breaking Dirichlet process Gaussian mixture, fit by
mean-field variational inference, plus hard-label clustering of the data.

The generative model draws mixing proportions from a stick-breaking prior
with concentration ``h``, component (mean, precision) pairs from a
Normal-Wishart prior, and observations from the selected Gaussian. The
variational family factorizes over sticks (Beta), component parameters
(Normal-Wishart) and per-point labels (categorical); coordinate ascent on
the evidence lower bound gives closed-form updates throughout.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .dataset import Dataset
from .errors import SingularCovariance
from .special import digamma, gammaln

_LOG_FLOOR = 1e-300  # floor before logs of responsibilities
_LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class NormalWishartPrior:
    """Conjugate prior over a Gaussian's (mean, precision) pair."""

    mu0: np.ndarray
    lambda0: float
    W0: np.ndarray
    nu0: float

    def __post_init__(self):
        mu0 = np.atleast_1d(np.asarray(self.mu0, dtype=float))
        W0 = np.atleast_2d(np.asarray(self.W0, dtype=float))
        m = mu0.shape[0]
        if W0.shape != (m, m):
            raise ValueError("W0 must be m x m")
        if not np.allclose(W0, W0.T, atol=1e-10):
            raise ValueError("W0 must be symmetric")
        try:
            np.linalg.cholesky(W0)
        except np.linalg.LinAlgError:
            raise ValueError("W0 must be positive definite") from None
        if self.lambda0 <= 0:
            raise ValueError("lambda0 must be positive")
        if self.nu0 <= m - 1:
            raise ValueError(f"nu0 must exceed m-1 = {m - 1}")
        object.__setattr__(self, "mu0", mu0)
        object.__setattr__(self, "W0", W0)

    @staticmethod
    def from_data(points: np.ndarray) -> "NormalWishartPrior":
        """Data-scale defaults: prior expected precision matches the sample
        covariance (ridge-stabilized), nu0 = m + 2, lambda0 = 1."""
        m = points.shape[1]
        nu0 = float(m + 2)
        cov = np.cov(points, rowvar=False, bias=True).reshape(m, m)
        W0 = np.linalg.inv(nu0 * cov + 1e-6 * np.eye(m))
        W0 = 0.5 * (W0 + W0.T)
        return NormalWishartPrior(mu0=points.mean(axis=0), lambda0=1.0, W0=W0, nu0=nu0)


@dataclass(frozen=True)
class DpmmConfig:
    """Hyperparameters and stopping rule for the variational fit.

    ``truncation=None`` resolves to min(N, 20); ``min_cluster_weight=None``
    resolves to 1/N. ``tol`` is relative ELBO change.
    """

    concentration: float = 1.0
    truncation: int | None = None
    prior: NormalWishartPrior | None = None
    tol: float = 1e-6
    max_iters: int = 500
    seed: int = 0
    min_cluster_weight: float | None = None

    def __post_init__(self):
        if self.concentration <= 0:
            raise ValueError("concentration must be positive")
        if self.truncation is not None and self.truncation < 1:
            raise ValueError("truncation must be >= 1")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.min_cluster_weight is not None and not (0 <= self.min_cluster_weight < 1):
            raise ValueError("min_cluster_weight must lie in [0, 1)")


@dataclass(frozen=True)
class ComponentPosterior:
    """Normal-Wishart posterior parameters for one mixture component."""

    m: np.ndarray
    lam: float
    W: np.ndarray
    nu: float


@dataclass(frozen=True)
class DpmmPosterior:
    """Variational posterior over sticks, components and labels.

    stick_params row k holds the Beta parameters of stick k; the final row is
    the degenerate stick (1, 0), i.e. a point mass at 1 closing the
    truncation. expected_weights are posterior means of the mixing weights.
    """

    responsibilities: np.ndarray
    stick_params: np.ndarray
    component_params: tuple
    expected_weights: np.ndarray
    elbo_trace: tuple
    converged: bool
    iterations: int


@dataclass(frozen=True)
class Clustering:
    """Hard partition of the data rows into K nonempty clusters.

    labels are 1..K; clusters hold 0-based row indices; weights are exact
    rationals |cluster|/N summing to 1.
    """

    labels: np.ndarray
    clusters: tuple
    weights: tuple

    @property
    def k(self) -> int:
        return len(self.clusters)

    def to_json(self) -> str:
        return json.dumps(
            {
                "labels": [int(v) for v in self.labels],
                "weights": [float(w) for w in self.weights],
            },
            sort_keys=True,
        )


def _kmeanspp_responsibilities(points: np.ndarray, T: int, seed: int) -> np.ndarray:
    """One-hot assignment to k-means++-seeded centers."""
    n = points.shape[0]
    rng = np.random.Generator(np.random.Philox(key=np.uint64(seed)))
    centers = [points[int(rng.integers(n))]]
    for _ in range(T - 1):
        d2 = np.min(
            [np.sum((points - c) ** 2, axis=1) for c in centers], axis=0
        )
        total = float(d2.sum())
        if total <= 0.0:
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=d2 / total))
        centers.append(points[idx])
    centers = np.array(centers)
    dist = np.sum((points[:, None, :] - centers[None, :, :]) ** 2, axis=2)
    assign = np.argmin(dist, axis=1)
    resp = np.zeros((n, T))
    resp[np.arange(n), assign] = 1.0
    return resp


def _log_wishart_norm(W: np.ndarray, nu: float) -> float:
    """ln B(W, nu), the Wishart log normalizer."""
    m = W.shape[0]
    _, logdet = np.linalg.slogdet(W)
    val = -(nu / 2.0) * logdet - (nu * m / 2.0) * np.log(2.0)
    val -= (m * (m - 1) / 4.0) * np.log(np.pi)
    val -= float(np.sum(gammaln((nu + 1.0 - np.arange(1, m + 1)) / 2.0)))
    return val


class _State:
    """Mutable fit state; converted to an immutable posterior at the end."""

    def __init__(self, points, config: DpmmConfig):
        self.X = points
        self.n, self.m = points.shape
        self.T = config.truncation or min(self.n, 20)
        self.h = config.concentration
        self.prior = config.prior or NormalWishartPrior.from_data(points)
        if self.prior.mu0.shape[0] != self.m:
            raise ValueError("prior dimension does not match the data")
        self.W0_inv = np.linalg.inv(self.prior.W0)
        self.resp = _kmeanspp_responsibilities(points, self.T, config.seed)
        self.stick_a = np.ones(self.T)
        self.stick_b = np.full(self.T, self.h)
        self.comp_m = np.tile(self.prior.mu0, (self.T, 1))
        self.comp_lam = np.full(self.T, self.prior.lambda0)
        self.comp_W = np.tile(self.prior.W0, (self.T, 1, 1))
        self.comp_nu = np.full(self.T, self.prior.nu0)
        # Sufficient statistics refreshed by the M step.
        self.Nk = np.zeros(self.T)
        self.xbar = np.zeros((self.T, self.m))
        self.Sk = np.zeros((self.T, self.m, self.m))

    def m_step(self):
        X, T, m = self.X, self.T, self.m
        prior = self.prior
        Nk = self.resp.sum(axis=0)
        self.Nk = Nk
        safe = np.maximum(Nk, 1e-12)
        xbar = (self.resp.T @ X) / safe[:, None]
        self.xbar = xbar
        for k in range(T):
            diff = X - xbar[k]
            self.Sk[k] = (self.resp[:, k][:, None] * diff).T @ diff / safe[k]

        # Stick posteriors: a_k = 1 + N_k, b_k = h + mass beyond k.
        tail = np.concatenate([np.cumsum(Nk[::-1])[::-1][1:], [0.0]])
        self.stick_a = 1.0 + Nk
        self.stick_b = self.h + tail

        # Normal-Wishart posteriors.
        self.comp_lam = prior.lambda0 + Nk
        self.comp_nu = prior.nu0 + Nk
        self.comp_m = (prior.lambda0 * prior.mu0 + Nk[:, None] * xbar) / self.comp_lam[:, None]
        for k in range(T):
            d = xbar[k] - prior.mu0
            W_inv = (
                self.W0_inv
                + Nk[k] * self.Sk[k]
                + (prior.lambda0 * Nk[k] / (prior.lambda0 + Nk[k])) * np.outer(d, d)
            )
            W_inv = 0.5 * (W_inv + W_inv.T)
            try:
                np.linalg.cholesky(W_inv)
                W = np.linalg.inv(W_inv)
                W = 0.5 * (W + W.T)
                np.linalg.cholesky(W)
            except np.linalg.LinAlgError:
                raise SingularCovariance(k + 1) from None
            self.comp_W[k] = W

    def _expected_log_weights(self):
        """E[ln gamma_k] under the truncated stick-breaking posterior."""
        a, b = self.stick_a, self.stick_b
        dig_sum = digamma(a + b)
        eln_v = digamma(a) - dig_sum
        eln_1mv = digamma(b) - dig_sum
        eln_v[-1] = 0.0  # final stick fixed at 1
        prefix = np.concatenate([[0.0], np.cumsum(eln_1mv[:-1])])
        return eln_v + prefix, eln_v, eln_1mv

    def _expected_log_det(self):
        out = np.empty(self.T)
        m = self.m
        for k in range(self.T):
            _, logdet = np.linalg.slogdet(self.comp_W[k])
            out[k] = (
                float(np.sum(digamma((self.comp_nu[k] + 1.0 - np.arange(1, m + 1)) / 2.0)))
                + m * np.log(2.0)
                + logdet
            )
        return out

    def e_step(self):
        X, T, m = self.X, self.T, self.m
        eln_pi, _, _ = self._expected_log_weights()
        eln_det = self._expected_log_det()
        quad = np.empty((self.n, T))
        for k in range(T):
            diff = X - self.comp_m[k]
            quad[:, k] = m / self.comp_lam[k] + self.comp_nu[k] * np.einsum(
                "ij,jk,ik->i", diff, self.comp_W[k], diff
            )
        log_rho = eln_pi[None, :] + 0.5 * eln_det[None, :] - 0.5 * m * _LOG_2PI - 0.5 * quad
        log_rho -= log_rho.max(axis=1, keepdims=True)
        rho = np.exp(log_rho)
        self.resp = rho / rho.sum(axis=1, keepdims=True)

    def elbo(self) -> float:
        T, m, prior = self.T, self.m, self.prior
        Nk, xbar = self.Nk, self.xbar
        eln_pi, eln_v, eln_1mv = self._expected_log_weights()
        eln_det = self._expected_log_det()

        # E[ln p(X | Z, mu, Lambda)]
        val = 0.0
        for k in range(T):
            d = xbar[k] - self.comp_m[k]
            val += 0.5 * Nk[k] * (
                eln_det[k]
                - m / self.comp_lam[k]
                - self.comp_nu[k] * float(np.trace(self.Sk[k] @ self.comp_W[k]))
                - self.comp_nu[k] * float(d @ self.comp_W[k] @ d)
                - m * _LOG_2PI
            )

        # E[ln p(Z | V)] and stick prior/entropy terms (first T-1 sticks only).
        val += float(Nk @ eln_pi)
        val += (T - 1) * np.log(self.h) + (self.h - 1.0) * float(np.sum(eln_1mv[:-1]))
        a, b = self.stick_a[:-1], self.stick_b[:-1]
        ln_beta = gammaln(a) + gammaln(b) - gammaln(a + b)
        val -= float(
            np.sum((a - 1.0) * eln_v[:-1] + (b - 1.0) * eln_1mv[:-1] - ln_beta)
        )

        # E[ln p(mu, Lambda)] - E[ln q(mu, Lambda)]
        lnB0 = _log_wishart_norm(prior.W0, prior.nu0)
        for k in range(T):
            d = self.comp_m[k] - prior.mu0
            val += 0.5 * (
                m * np.log(prior.lambda0 / (2.0 * np.pi))
                + eln_det[k]
                - m * prior.lambda0 / self.comp_lam[k]
                - prior.lambda0 * self.comp_nu[k] * float(d @ self.comp_W[k] @ d)
            )
            val += lnB0 + 0.5 * (prior.nu0 - m - 1.0) * eln_det[k]
            val -= 0.5 * self.comp_nu[k] * float(np.trace(self.W0_inv @ self.comp_W[k]))
            # Entropy of the Normal-Wishart posterior, negated.
            h_wishart = (
                -_log_wishart_norm(self.comp_W[k], self.comp_nu[k])
                - 0.5 * (self.comp_nu[k] - m - 1.0) * eln_det[k]
                + 0.5 * self.comp_nu[k] * m
            )
            val -= (
                0.5 * eln_det[k]
                + 0.5 * m * np.log(self.comp_lam[k] / (2.0 * np.pi))
                - 0.5 * m
                - h_wishart
            )

        # -E[ln q(Z)]
        r = np.maximum(self.resp, _LOG_FLOOR)
        val -= float(np.sum(self.resp * np.log(r)))
        return float(val)


def fit(dataset: Dataset, config: DpmmConfig | None = None) -> DpmmPosterior:
    """Run coordinate-ascent variational inference on the dataset.

    Initialization is a k-means++-style seeding with ``truncation`` centers
    followed by one M step; iteration stops when the relative ELBO change
    drops below ``tol`` or after ``max_iters`` rounds. Non-convergence is not
    an error: the posterior is returned with ``converged=False``. The run is
    a pure function of (dataset, config).
    """
    config = config or DpmmConfig()
    if dataset.n < 2:
        raise ValueError("fit requires at least two data points")
    state = _State(dataset.points, config)
    state.m_step()

    trace: list[float] = []
    converged = False
    iters = 0
    for iters in range(1, config.max_iters + 1):
        state.e_step()
        state.m_step()
        trace.append(state.elbo())
        if len(trace) >= 2:
            prev, cur = trace[-2], trace[-1]
            if abs(cur - prev) <= config.tol * max(1.0, abs(prev)):
                converged = True
                break

    eln_pi, _, _ = state._expected_log_weights()
    a, b = state.stick_a, state.stick_b
    ev = a / (a + b)
    ev[-1] = 1.0
    expected_weights = ev * np.concatenate([[1.0], np.cumprod(1.0 - ev[:-1])])
    stick_params = np.column_stack([a, b])
    stick_params[-1] = (1.0, 0.0)  # degenerate closing stick

    comps = tuple(
        ComponentPosterior(
            m=state.comp_m[k].copy(),
            lam=float(state.comp_lam[k]),
            W=state.comp_W[k].copy(),
            nu=float(state.comp_nu[k]),
        )
        for k in range(state.T)
    )
    return DpmmPosterior(
        responsibilities=state.resp,
        stick_params=stick_params,
        component_params=comps,
        expected_weights=expected_weights,
        elbo_trace=tuple(trace),
        converged=converged,
        iterations=iters,
    )


def hard_labels(posterior: DpmmPosterior) -> np.ndarray:
    """Most probable component per point, 1-based; ties break to the smaller index."""
    return np.argmax(posterior.responsibilities, axis=1) + 1


def partition(dataset: Dataset, labels) -> Clustering:
    """Group rows by label, re-indexed 1..K in order of first appearance."""
    labels = np.asarray(labels)
    if labels.shape != (dataset.n,):
        raise ValueError(f"labels must have length {dataset.n}")
    order: dict[int, int] = {}
    for v in labels:
        v = int(v)
        if v not in order:
            order[v] = len(order) + 1
    new_labels = np.array([order[int(v)] for v in labels], dtype=int)
    clusters = tuple(
        np.flatnonzero(new_labels == k) for k in range(1, len(order) + 1)
    )
    n = dataset.n
    weights = tuple(Fraction(len(c), n) for c in clusters)
    return Clustering(labels=new_labels, clusters=clusters, weights=weights)

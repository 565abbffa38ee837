"""Wasserstein radius calibration and ambiguity-set assembly.

Three set families are supported: a weighted Minkowski sum of cluster-local
Wasserstein balls (the cluster-aware set), a single global Wasserstein ball,
and a mean/second-moment set. Radii come from a data-driven sub-Gaussian
formula: theta = C * sqrt(log(1/(1-beta)) / n) with

    C = 2 * inf_{z>0} sqrt( (1/(2z)) * (1 + ln mean_l exp(z * ||w_l - mu||_1^2)) )

evaluated by golden-section search in log z over a bounded bracket.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .dataset import Dataset, DiscreteDistribution
from .dpmm import Clustering
from .errors import DegenerateBeta, WrongVariant

_Z_LO, _Z_HI = 1e-6, 1e6
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
_SCAN_POINTS = 65


@dataclass(frozen=True)
class LocalBall:
    """One cluster-local Wasserstein ball with its mixture weight."""

    center: DiscreteDistribution
    radius: float
    weight: Fraction

    def __post_init__(self):
        if self.radius < 0:
            raise ValueError("radius must be nonnegative")
        if not (0 < self.weight <= 1):
            raise ValueError("ball weight must lie in (0, 1]")


@dataclass(frozen=True)
class BnwdroSet:
    """Weighted Minkowski sum of cluster-local Wasserstein balls."""

    balls: tuple

    kind = "bnwdro"

    def __post_init__(self):
        if not self.balls:
            raise ValueError("need at least one ball")
        total = sum((b.weight for b in self.balls), Fraction(0))
        if total != 1:
            raise ValueError(f"ball weights must sum to 1, got {total}")


@dataclass(frozen=True)
class WdroSet:
    """Single Wasserstein ball around the pooled empirical distribution."""

    center: DiscreteDistribution
    radius: float

    kind = "wdro"

    def __post_init__(self):
        if self.radius < 0:
            raise ValueError("radius must be nonnegative")


@dataclass(frozen=True)
class MdroSet:
    """Mean-equality plus second-central-moment-dominance set."""

    mu_hat: np.ndarray
    sigma_hat: np.ndarray

    kind = "mdro"

    def __post_init__(self):
        mu = np.atleast_1d(np.asarray(self.mu_hat, dtype=float))
        sig = np.atleast_2d(np.asarray(self.sigma_hat, dtype=float))
        if sig.shape != (mu.shape[0], mu.shape[0]):
            raise ValueError("sigma_hat must be m x m")
        if not np.allclose(sig, sig.T, atol=1e-10):
            raise ValueError("sigma_hat must be symmetric")
        if np.linalg.eigvalsh(sig).min() < -1e-10:
            raise ValueError("sigma_hat must be PSD")
        object.__setattr__(self, "mu_hat", mu)
        object.__setattr__(self, "sigma_hat", sig)


AmbiguitySet = BnwdroSet | WdroSet | MdroSet


@dataclass(frozen=True)
class SandwichRadii:
    """Containment radii: the cluster set sits between these two global balls."""

    theta_lower: float
    theta_upper: float

    def __post_init__(self):
        if self.theta_lower > self.theta_upper + 1e-15:
            raise ValueError("theta_lower must not exceed theta_upper")


def _radius_objective(log_z: float, sq_dists: np.ndarray) -> float:
    """(1 + ln mean exp(z d^2)) / (2 z), stabilized via log-sum-exp."""
    z = math.exp(log_z)
    expo = z * sq_dists
    peak = float(expo.max())
    log_mean = peak + math.log(float(np.mean(np.exp(expo - peak))))
    return (1.0 + log_mean) / (2.0 * z)


def calibrate_radius(cluster_points, beta: float) -> float:
    """Wasserstein radius for one cluster at confidence level beta.

    The inner infimum over z is approximated on the bracket [1e-6, 1e6] by a
    coarse log-spaced scan followed by golden-section refinement (relative
    tolerance 1e-9 on z); values are computed with log-sum-exp stabilization.
    """
    if not (0.0 < beta < 1.0):
        raise DegenerateBeta(f"beta must lie in (0, 1), got {beta}")
    pts = np.atleast_2d(np.asarray(cluster_points, dtype=float))
    if pts.shape[0] < 1:
        raise ValueError("cluster must be nonempty")
    mu = pts.mean(axis=0)
    sq_dists = np.sum(np.abs(pts - mu), axis=1) ** 2

    t_lo, t_hi = math.log(_Z_LO), math.log(_Z_HI)
    grid = np.linspace(t_lo, t_hi, _SCAN_POINTS)
    vals = [_radius_objective(t, sq_dists) for t in grid]
    best = int(np.argmin(vals))
    lo = grid[max(best - 1, 0)]
    hi = grid[min(best + 1, _SCAN_POINTS - 1)]

    # Golden-section until the bracket is below 1e-9 relative on z.
    c = hi - _GOLDEN * (hi - lo)
    d = lo + _GOLDEN * (hi - lo)
    fc, fd = _radius_objective(c, sq_dists), _radius_objective(d, sq_dists)
    while hi - lo > 1e-9:
        if fc <= fd:
            hi, d, fd = d, c, fc
            c = hi - _GOLDEN * (hi - lo)
            fc = _radius_objective(c, sq_dists)
        else:
            lo, c, fc = c, d, fd
            d = lo + _GOLDEN * (hi - lo)
            fd = _radius_objective(d, sq_dists)
    constant = 2.0 * math.sqrt(min(fc, fd))
    n = pts.shape[0]
    return constant * math.sqrt(math.log(1.0 / (1.0 - beta)) / n)


def build_bnwdro(dataset: Dataset, clustering: Clustering, beta: float) -> BnwdroSet:
    """One local ball per cluster: uniform center, calibrated radius, count weight."""
    balls = []
    for idx, rows in enumerate(clustering.clusters):
        pts = dataset.points[rows]
        center = DiscreteDistribution(
            points=pts, weights=np.full(len(rows), 1.0 / len(rows))
        )
        balls.append(
            LocalBall(
                center=center,
                radius=calibrate_radius(pts, beta),
                weight=clustering.weights[idx],
            )
        )
    return BnwdroSet(balls=tuple(balls))


def build_wdro(dataset: Dataset, beta: float) -> WdroSet:
    """Single ball over the pooled data."""
    n = dataset.n
    center = DiscreteDistribution(points=dataset.points, weights=np.full(n, 1.0 / n))
    return WdroSet(center=center, radius=calibrate_radius(dataset.points, beta))


def build_mdro(dataset: Dataset) -> MdroSet:
    """Plug-in moments: sample mean and biased (1/N) second central moment."""
    mu = dataset.points.mean(axis=0)
    diff = dataset.points - mu
    sigma = diff.T @ diff / dataset.n
    return MdroSet(mu_hat=mu, sigma_hat=0.5 * (sigma + sigma.T))


def sandwich_radii(ambiguity: BnwdroSet) -> SandwichRadii:
    """Radii of the global balls squeezing the cluster set from both sides."""
    if not isinstance(ambiguity, BnwdroSet):
        raise WrongVariant("sandwich_radii expects the cluster-ball variant")
    lower = min(float(b.weight) * b.radius for b in ambiguity.balls)
    upper = max(b.radius for b in ambiguity.balls)
    return SandwichRadii(theta_lower=lower, theta_upper=upper)


def _g12(x: float) -> float:
    return float(format(x, ".12g"))


def to_json(ambiguity: AmbiguitySet) -> str:
    """Serialize with an explicit kind tag; radii carry 12 significant digits."""
    if isinstance(ambiguity, BnwdroSet):
        payload = {
            "kind": "bnwdro",
            "balls": [
                {
                    "radius": _g12(b.radius),
                    "weight": [b.weight.numerator, b.weight.denominator],
                    "atoms": b.center.points.tolist(),
                }
                for b in ambiguity.balls
            ],
        }
    elif isinstance(ambiguity, WdroSet):
        payload = {
            "kind": "wdro",
            "radius": _g12(ambiguity.radius),
            "atoms": ambiguity.center.points.tolist(),
        }
    elif isinstance(ambiguity, MdroSet):
        payload = {
            "kind": "mdro",
            "mu_hat": ambiguity.mu_hat.tolist(),
            "sigma_hat": ambiguity.sigma_hat.tolist(),
        }
    else:
        raise WrongVariant(f"unknown ambiguity set {type(ambiguity)!r}")
    return json.dumps(payload, sort_keys=True)


def from_json(text: str) -> AmbiguitySet:
    payload = json.loads(text)
    kind = payload.get("kind")
    if kind == "bnwdro":
        balls = []
        for ball in payload["balls"]:
            pts = np.asarray(ball["atoms"], dtype=float)
            balls.append(
                LocalBall(
                    center=DiscreteDistribution(
                        points=pts, weights=np.full(len(pts), 1.0 / len(pts))
                    ),
                    radius=float(ball["radius"]),
                    weight=Fraction(*ball["weight"]),
                )
            )
        return BnwdroSet(balls=tuple(balls))
    if kind == "wdro":
        pts = np.asarray(payload["atoms"], dtype=float)
        return WdroSet(
            center=DiscreteDistribution(points=pts, weights=np.full(len(pts), 1.0 / len(pts))),
            radius=float(payload["radius"]),
        )
    if kind == "mdro":
        return MdroSet(
            mu_hat=np.asarray(payload["mu_hat"], dtype=float),
            sigma_hat=np.asarray(payload["sigma_hat"], dtype=float),
        )
    raise WrongVariant(f"unknown ambiguity kind {kind!r}")


def as_balls(ambiguity: BnwdroSet | WdroSet) -> tuple:
    """View either Wasserstein variant as a tuple of local balls."""
    if isinstance(ambiguity, BnwdroSet):
        return ambiguity.balls
    if isinstance(ambiguity, WdroSet):
        return (
            LocalBall(center=ambiguity.center, radius=ambiguity.radius, weight=Fraction(1)),
        )
    raise WrongVariant(f"expected a Wasserstein variant, got {type(ambiguity)!r}")

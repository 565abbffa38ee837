"""Uncertainty datasets: CSV ingestion, synthetic mixtures, empirical distributions."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InvalidSpec, ParseError


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class Dataset:
    """An N x m matrix of uncertainty realizations with a provenance tag.

    Rows are observations, columns coordinates. All entries must be finite.
    """

    points: np.ndarray
    source: str = "unspecified"

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1)
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise ValueError(f"dataset must be a nonempty 2-D matrix, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            bad = np.argwhere(~np.isfinite(pts))[0]
            raise ValueError(f"non-finite entry at row {bad[0] + 1}, col {bad[1] + 1}")
        object.__setattr__(self, "points", _frozen(pts))

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dimension(self) -> int:
        return self.points.shape[1]


@dataclass(frozen=True)
class DiscreteDistribution:
    """Finitely supported distribution: one atom per row of `points`."""

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1)
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1 or w.shape[0] != pts.shape[0]:
            raise ValueError("weights must align with atom rows")
        if not np.all(np.isfinite(pts)):
            raise ValueError("atom coordinates must be finite")
        if np.any(w < 0):
            raise ValueError("atom weights must be nonnegative")
        if abs(float(np.sum(w)) - 1.0) > 1e-12:
            raise ValueError(f"atom weights must sum to 1, got {np.sum(w)!r}")
        object.__setattr__(self, "points", _frozen(pts))
        object.__setattr__(self, "weights", _frozen(w))

    @property
    def n_atoms(self) -> int:
        return self.points.shape[0]

    def expectation(self, f) -> np.ndarray:
        """Expectation of a row-wise function under the distribution."""
        vals = np.asarray([f(p) for p in self.points], dtype=float)
        return np.tensordot(self.weights, vals, axes=1)


@dataclass(frozen=True)
class MixtureSpec:
    """Gaussian mixture used as a synthetic ground-truth distribution.

    components: list of (weight, mean vector, covariance matrix).
    """

    components: tuple
    seed: int = 0

    def __post_init__(self):
        comps = []
        for weight, mean, cov in self.components:
            mean = np.atleast_1d(np.asarray(mean, dtype=float))
            cov = np.atleast_2d(np.asarray(cov, dtype=float))
            comps.append((float(weight), _frozen(mean), _frozen(cov)))
        if not comps:
            raise InvalidSpec("mixture needs at least one component")
        weights = np.array([c[0] for c in comps])
        if np.any(weights <= 0) or abs(weights.sum() - 1.0) > 1e-9:
            raise InvalidSpec(f"component weights must be positive and sum to 1, got {weights}")
        m = comps[0][1].shape[0]
        for w, mu, cov in comps:
            if mu.shape != (m,) or cov.shape != (m, m):
                raise InvalidSpec("component dimensions are inconsistent")
            if not np.allclose(cov, cov.T, atol=1e-12):
                raise InvalidSpec("covariance must be symmetric")
            eig = np.linalg.eigvalsh(cov)
            if eig.min() < -1e-10:
                raise InvalidSpec(f"covariance must be PSD, min eigenvalue {eig.min()}")
        object.__setattr__(self, "components", tuple(comps))

    @property
    def dimension(self) -> int:
        return self.components[0][1].shape[0]

    def mean(self) -> np.ndarray:
        return sum(w * mu for w, mu, _ in self.components)

    def second_central_moment(self) -> np.ndarray:
        """Population covariance of the mixture."""
        mu = self.mean()
        m = self.dimension
        out = np.zeros((m, m))
        for w, mean, cov in self.components:
            d = mean - mu
            out += w * (cov + np.outer(d, d))
        return out


def scalar_mixture(pairs, seed: int = 0) -> MixtureSpec:
    """Convenience builder for 1-D mixtures from (weight, mean, variance) triples."""
    return MixtureSpec(
        components=tuple((w, [mu], [[var]]) for w, mu, var in pairs), seed=seed
    )


def load_csv(path, *, skip_header: bool = False, source: str | None = None) -> Dataset:
    """Read a headerless numeric CSV into a Dataset.

    Rows are '\\n'-separated, cells ','-separated, decimal point. With
    ``skip_header`` the first line is discarded. Missing files raise the
    native OSError family; bad cells raise ParseError naming row and column
    (1-based, counted over the full file including any header line).
    """
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    rows = []
    arity = None
    lineno = 0
    for lineno, line in enumerate(text.splitlines(), start=1):
        if lineno == 1 and skip_header:
            continue
        if line.strip() == "":
            continue
        cells = line.split(",")
        if arity is None:
            arity = len(cells)
        elif len(cells) != arity:
            raise ParseError(
                f"ragged row: expected {arity} cells, found {len(cells)}", lineno, len(cells)
            )
        parsed = []
        for col, cell in enumerate(cells, start=1):
            try:
                parsed.append(float(cell))
            except ValueError:
                raise ParseError(f"non-numeric cell {cell!r}", lineno, col) from None
        rows.append(parsed)
    if not rows:
        raise ParseError("file contains no data rows", lineno, 1)
    return Dataset(points=np.array(rows), source=source or str(path))


def save_csv(dataset: Dataset, path) -> None:
    """Write a Dataset as headerless CSV; mirrors load_csv exactly.

    Cells use shortest round-trip float formatting, so load_csv(save_csv(D))
    reproduces D bit for bit.
    """
    path = Path(path)
    lines = [",".join(repr(float(v)) for v in row) for row in dataset.points]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def sample_mixture(
    spec: MixtureSpec, n: int, seed: int, *, return_labels: bool = False
):
    """Draw n i.i.d. points from the mixture; pure function of (spec, n, seed).

    Uses a counter-based generator (Philox) so identical seeds give identical
    streams across platforms. With ``return_labels`` the generating component
    index of each row is returned alongside (the data stream is unchanged).
    """
    if n < 1:
        raise InvalidSpec(f"sample count must be >= 1, got {n}")
    rng = np.random.Generator(np.random.Philox(key=np.uint64(seed)))
    weights = np.array([c[0] for c in spec.components])
    labels = rng.choice(len(weights), size=n, p=weights)
    m = spec.dimension
    noise = rng.standard_normal(size=(n, m))
    points = np.empty((n, m))
    for k, (_, mu, cov) in enumerate(spec.components):
        idx = labels == k
        if not np.any(idx):
            continue
        # PSD square root via eigendecomposition; exact for diagonal covs.
        evals, evecs = np.linalg.eigh(cov)
        root = evecs @ np.diag(np.sqrt(np.clip(evals, 0.0, None))) @ evecs.T
        points[idx] = mu + noise[idx] @ root.T
    ds = Dataset(points=points, source=f"mixture(seed={seed}, n={n})")
    if return_labels:
        return ds, labels
    return ds


def empirical(dataset: Dataset) -> DiscreteDistribution:
    """Uniform distribution over the data rows; duplicates stay distinct atoms."""
    n = dataset.n
    return DiscreteDistribution(points=dataset.points, weights=np.full(n, 1.0 / n))

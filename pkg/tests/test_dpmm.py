import numpy as np
import pytest
from sklearn.metrics import adjusted_rand_score

from drokit.dataset import Dataset, sample_mixture, scalar_mixture
from drokit.dpmm import (
    Clustering,
    DpmmConfig,
    DpmmPosterior,
    NormalWishartPrior,
    fit,
    hard_labels,
    partition,
)

BIMODAL = scalar_mixture([(0.5, -5.0, 1.0), (0.5, 5.0, 1.0)])


@pytest.fixture(scope="module")
def two_gaussian_fit():
    data, true_labels = sample_mixture(BIMODAL, 200, seed=42, return_labels=True)
    posterior = fit(data, DpmmConfig(truncation=10, seed=0))
    return data, true_labels, posterior


def test_two_cluster_recovery(two_gaussian_fit):
    data, true_labels, posterior = two_gaussian_fit
    labels = hard_labels(posterior)
    clustering = partition(data, labels)
    assert clustering.k == 2
    assert adjusted_rand_score(true_labels, labels) >= 0.95
    min_w = 1.0 / data.n
    surviving = [w for w in posterior.expected_weights if w > min_w]
    assert len(surviving) == 2


def test_elbo_monotone(two_gaussian_fit):
    _, _, posterior = two_gaussian_fit
    trace = np.array(posterior.elbo_trace)
    assert np.all(np.diff(trace) >= -1e-6)


def test_responsibilities_are_probability_rows(two_gaussian_fit):
    _, _, posterior = two_gaussian_fit
    rows = posterior.responsibilities.sum(axis=1)
    assert np.all(np.abs(rows - 1.0) <= 1e-9)
    assert np.all(posterior.responsibilities >= 0)


def test_expected_weights_valid(two_gaussian_fit):
    _, _, posterior = two_gaussian_fit
    w = posterior.expected_weights
    assert np.all(w >= 0)
    assert w.sum() <= 1.0 + 1e-9


def test_identical_points_single_cluster():
    data = Dataset(points=np.full((30, 1), 2.5))
    posterior = fit(data, DpmmConfig(truncation=5, seed=3))
    col_mass = posterior.responsibilities.sum(axis=0).max() / 30.0
    assert col_mass >= 0.99
    assert partition(data, hard_labels(posterior)).k == 1


def test_fit_deterministic(two_gaussian_fit):
    data, _, posterior = two_gaussian_fit
    again = fit(data, DpmmConfig(truncation=10, seed=0))
    assert np.array_equal(again.responsibilities, posterior.responsibilities)
    assert again.elbo_trace == posterior.elbo_trace
    assert np.array_equal(again.stick_params, posterior.stick_params)


def test_hard_labels_argmax_and_tie_break():
    resp = np.array([[0.1, 0.7, 0.2], [0.5, 0.5, 0.0]])
    posterior = DpmmPosterior(
        responsibilities=resp,
        stick_params=np.ones((3, 2)),
        component_params=(),
        expected_weights=np.full(3, 1 / 3),
        elbo_trace=(0.0,),
        converged=True,
        iterations=1,
    )
    labels = hard_labels(posterior)
    assert labels.tolist() == [2, 1]


def test_partition_single_group():
    data = Dataset(points=np.arange(3.0).reshape(-1, 1))
    clustering = partition(data, [1, 1, 1])
    assert clustering.k == 1
    assert [float(w) for w in clustering.weights] == [1.0]


def test_partition_reindexes_by_first_appearance():
    data = Dataset(points=np.arange(3.0).reshape(-1, 1))
    clustering = partition(data, [3, 1, 3])
    assert clustering.k == 2
    assert clustering.labels.tolist() == [1, 2, 1]
    assert [list(c) for c in clustering.clusters] == [[0, 2], [1]]
    assert [str(w) for w in clustering.weights] == ["2/3", "1/3"]


def test_partition_weights_near_half(two_gaussian_fit):
    data, _, posterior = two_gaussian_fit
    clustering = partition(data, hard_labels(posterior))
    for w in clustering.weights:
        assert abs(float(w) - 0.5) <= 0.1


def test_partition_permutation_equivariance(two_gaussian_fit):
    data, _, posterior = two_gaussian_fit
    labels = hard_labels(posterior)
    clustering = partition(data, labels)
    rng = np.random.default_rng(0)
    perm = rng.permutation(data.n)
    permuted = Dataset(points=data.points[perm])
    clustering_p = partition(permuted, labels[perm])
    # same partition of the original rows, as sets
    orig = {frozenset(c) for c in clustering.clusters}
    mapped = {frozenset(perm[c]) for c in clustering_p.clusters}
    assert orig == mapped


def test_k_never_exceeds_truncation(two_gaussian_fit):
    data, _, _ = two_gaussian_fit
    posterior = fit(data, DpmmConfig(truncation=3, seed=1))
    assert partition(data, hard_labels(posterior)).k <= 3


def test_clustering_json(two_gaussian_fit):
    data, _, posterior = two_gaussian_fit
    clustering = partition(data, hard_labels(posterior))
    import json

    payload = json.loads(clustering.to_json())
    assert set(payload) == {"labels", "weights"}
    assert len(payload["labels"]) == data.n
    assert abs(sum(payload["weights"]) - 1.0) < 1e-12


def test_prior_validation():
    with pytest.raises(ValueError):
        NormalWishartPrior(mu0=[0.0], lambda0=0.0, W0=[[1.0]], nu0=2.0)
    with pytest.raises(ValueError):
        NormalWishartPrior(mu0=[0.0, 0.0], lambda0=1.0, W0=np.eye(2), nu0=0.5)


def test_nonconvergence_is_flagged_not_raised():
    data = sample_mixture(BIMODAL, 100, seed=5)
    posterior = fit(data, DpmmConfig(truncation=10, seed=0, max_iters=2))
    assert posterior.converged is False
    assert posterior.iterations == 2


def test_config_validation():
    with pytest.raises(ValueError):
        DpmmConfig(tol=0.0)
    with pytest.raises(ValueError):
        DpmmConfig(min_cluster_weight=1.5)

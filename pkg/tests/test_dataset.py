import math

import numpy as np
import pytest

from drokit.dataset import (
    Dataset,
    MixtureSpec,
    empirical,
    load_csv,
    sample_mixture,
    save_csv,
    scalar_mixture,
)
from drokit.errors import InvalidSpec, ParseError

BIMODAL = scalar_mixture([(0.5, -5.0, 1.0), (0.5, 5.0, 1.0)])


def test_load_csv_echo(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("0.5\n0.7\n")
    ds = load_csv(path)
    assert ds.n == 2 and ds.dimension == 1
    assert ds.points.tolist() == [[0.5], [0.7]]


def test_load_csv_bad_cell_names_row_col(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("1.0\n2.0\nabc\n")
    with pytest.raises(ParseError) as err:
        load_csv(path)
    assert err.value.row == 3 and err.value.col == 1


def test_load_csv_ragged_row(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("1,2\n3\n")
    with pytest.raises(ParseError) as err:
        load_csv(path)
    assert err.value.row == 2


def test_load_csv_missing_file(tmp_path):
    with pytest.raises(OSError):
        load_csv(tmp_path / "nope.csv")


def test_load_csv_header_flag(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("a,b\n1,2\n")
    ds = load_csv(path, skip_header=True)
    assert ds.n == 1 and ds.dimension == 2


def test_load_csv_mean_against_summation_oracle(tmp_path):
    rng = np.random.default_rng(3)
    rows = rng.normal(size=(100, 2))
    path = tmp_path / "big.csv"
    path.write_text("\n".join(",".join(repr(float(v)) for v in r) for r in rows) + "\n")
    ds = load_csv(path)
    assert ds.n == 100 and ds.dimension == 2
    # independent oracle: exact compensated summation per column
    for col in range(2):
        oracle = math.fsum(rows[:, col]) / 100.0
        assert abs(ds.points[:, col].mean() - oracle) < 1e-12


def test_save_load_round_trip(tmp_path):
    rng = np.random.default_rng(11)
    ds = Dataset(points=rng.normal(size=(37, 3)) * 1e4)
    path = tmp_path / "rt.csv"
    save_csv(ds, path)
    back = load_csv(path)
    assert np.array_equal(back.points, ds.points)


def test_dataset_rejects_nonfinite():
    with pytest.raises(ValueError):
        Dataset(points=[[1.0], [float("nan")]])


def test_sample_mixture_degenerate_component():
    spec = MixtureSpec(components=(((1.0), [3.0], [[0.0]]),))
    ds = sample_mixture(spec, 25, seed=4)
    assert np.allclose(ds.points, 3.0)


def test_sample_mixture_deterministic():
    a = sample_mixture(BIMODAL, 64, seed=9)
    b = sample_mixture(BIMODAL, 64, seed=9)
    assert np.array_equal(a.points, b.points)
    c = sample_mixture(BIMODAL, 64, seed=10)
    assert not np.array_equal(a.points, c.points)


def test_sample_mixture_labels_do_not_change_stream():
    a = sample_mixture(BIMODAL, 64, seed=9)
    b, labels = sample_mixture(BIMODAL, 64, seed=9, return_labels=True)
    assert np.array_equal(a.points, b.points)
    assert labels.shape == (64,)


def test_sample_mixture_clt_mean():
    # population sd of the bimodal mixture is sqrt(26) ~ 5.1
    ds = sample_mixture(BIMODAL, 10_000, seed=2)
    assert abs(ds.points.mean()) < 0.15


def test_sample_mixture_rejects_bad_weights():
    with pytest.raises(InvalidSpec):
        MixtureSpec(components=((0.5, [0.0], [[1.0]]), (0.6, [1.0], [[1.0]])))


def test_mixture_rejects_non_psd():
    with pytest.raises(InvalidSpec):
        MixtureSpec(components=((1.0, [0.0, 0.0], [[1.0, 2.0], [2.0, 1.0]]),))


def test_empirical_uniform_weights():
    ds = Dataset(points=[[1.0], [1.0]])
    emp = empirical(ds)
    assert emp.n_atoms == 2
    assert np.allclose(emp.weights, 0.5)


def test_empirical_weights_sum_large_n():
    ds = Dataset(points=np.ones((1_000_000, 1)))
    emp = empirical(ds)
    assert abs(emp.weights.sum() - 1.0) <= 1e-12


def test_empirical_expectation_matches_column_means():
    rng = np.random.default_rng(5)
    ds = Dataset(points=rng.normal(size=(40, 2)))
    emp = empirical(ds)
    got = emp.expectation(lambda p: p)
    assert np.allclose(got, ds.points.mean(axis=0), atol=1e-12)


def test_mixture_population_moments():
    assert abs(BIMODAL.mean()[0]) < 1e-12
    assert abs(BIMODAL.second_central_moment()[0, 0] - 26.0) < 1e-12

import itertools

import numpy as np
import pytest

from pfedsop import data
from pfedsop.errors import DataError, FormatError, InfeasiblePartitionError
from pfedsop.models import ModelSpec
from pfedsop.training import local_sgd


def _blobs(seed=0, classes=10, per_class=100, sep=3.0, dim=5):
    return data.synthesize_classification(classes, dim, per_class, sep, np.random.default_rng(seed))


def assert_disjoint(plan):
    seen = set()
    for idx in plan.assignments:
        s = set(idx.tolist())
        assert len(s) == len(idx)
        assert not seen & s
        seen |= s


def test_synthesize_deterministic():
    a, b = _blobs(3), _blobs(3)
    np.testing.assert_array_equal(a.samples, b.samples)
    np.testing.assert_array_equal(a.labels, b.labels)
    assert len(a) == 1000 and a.class_count == 10


def test_separable_blobs_are_learnable():
    ds = data.synthesize_classification(2, 5, 100, 10.0, np.random.default_rng(0))
    spec = ModelSpec("logistic_regression", 5, 2)
    x = spec.init_params(np.random.default_rng(1))
    for _ in range(200):
        x = x - 0.1 * spec.gradient(x, ds.samples, ds.labels)
    assert spec.evaluate(x, ds.samples, ds.labels)[0] >= 0.99


def test_zero_separation_is_chance():
    accs = []
    for seed in range(5):
        ds = data.synthesize_classification(4, 5, 2000, 0.0, np.random.default_rng(seed))
        test = data.synthesize_classification(4, 5, 500, 0.0, np.random.default_rng(seed + 100))
        spec = ModelSpec("logistic_regression", 5, 4)
        x = np.zeros(spec.parameter_count)
        for _ in range(100):
            x = x - 0.5 * spec.gradient(x, ds.samples, ds.labels)
        accs.append(spec.evaluate(x, test.samples, test.labels)[0])
    assert abs(np.mean(accs) - 0.25) <= 0.05


def test_load_csv_plain(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("1,0.5,0.5\n0,1.0,2.0\n")
    ds = data.load_csv(p)
    assert len(ds) == 2 and ds.input_dim == 2
    np.testing.assert_array_equal(ds.labels, [1, 0])
    np.testing.assert_array_equal(ds.samples[1], [1.0, 2.0])


def test_load_csv_header(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("label,x,y\n0,1,2\n1,3,4\n2,5,6\n")
    ds = data.load_csv(p)
    assert len(ds) == 3 and ds.class_count == 3


@pytest.mark.parametrize("text, line", [
    ("0,1,2\n1,3\n0,4,5\n", 2),
    ("0,1,2\n1,x,3\n", 2),
    ("0,1,2\n0,1,2\n1.5,1,2\n", 3),
])
def test_load_csv_errors_name_line(tmp_path, text, line):
    p = tmp_path / "d.csv"
    p.write_text(text)
    with pytest.raises(FormatError) as err:
        data.load_csv(p)
    assert err.value.line == line
    assert f"line {line}" in str(err.value)


def test_load_csv_empty(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("")
    with pytest.raises(FormatError):
        data.load_csv(p)


def test_dirichlet_single_client():
    ds = _blobs()
    plan = data.dirichlet_partition(ds, 1, 0.07, np.random.default_rng(0))
    assert sorted(plan.assignments[0].tolist()) == list(range(len(ds)))


def test_dirichlet_hundred_clients_is_valid():
    ds = _blobs(per_class=600)
    plan = data.dirichlet_partition(ds, 100, 0.07, np.random.default_rng(0))
    assert plan.num_clients == 100
    assert min(plan.sizes()) >= 1
    assert sum(plan.sizes()) == len(ds)
    assert_disjoint(plan)


def test_dirichlet_large_alpha_is_balanced():
    ds = data.synthesize_classification(3, 2, 1000, 1.0, np.random.default_rng(0))
    for seed in range(5):
        plan = data.dirichlet_partition(ds, 2, 1e6, np.random.default_rng(seed))
        for idx in plan.assignments:
            counts = np.bincount(ds.labels[idx], minlength=3)
            assert np.all(np.abs(counts - 500) <= 25)


def test_dirichlet_is_heterogeneous():
    ds = _blobs(per_class=200)
    overall = data.class_entropy(ds.labels, 10)
    for seed in range(5):
        plan = data.dirichlet_partition(ds, 20, 0.1, np.random.default_rng(seed))
        mean_client = np.mean([data.class_entropy(ds.labels[i], 10) for i in plan.assignments])
        assert mean_client < overall


def test_dirichlet_repairs_empty_clients():
    ds = data.synthesize_classification(2, 2, 10, 1.0, np.random.default_rng(0))
    for seed in range(20):
        plan = data.dirichlet_partition(ds, 15, 0.05, np.random.default_rng(seed))
        assert min(plan.sizes()) >= 1
        assert_disjoint(plan)


def test_dirichlet_too_few_samples():
    ds = data.synthesize_classification(2, 2, 2, 1.0, np.random.default_rng(0))
    with pytest.raises(DataError):
        data.dirichlet_partition(ds, 5, 0.5, np.random.default_rng(0))


def test_pathological_tiny_instance():
    ds = data.LabeledDataset(np.zeros((10, 1)), np.repeat([0, 1], 5), 2)
    plan = data.pathological_partition(ds, 5, 2, 1, np.random.default_rng(0))
    assert plan.sizes() == [2] * 5
    assert_disjoint(plan)
    distinct = sorted(len(set(ds.labels[i].tolist())) for i in plan.assignments)
    # enumeration: sorted labels 0000011111 cut in pairs -> only shard 2 mixes
    assert distinct == [1, 1, 1, 1, 2]


def test_pathological_exact_deal():
    ds = _blobs(per_class=40)  # 400 samples
    plan = data.pathological_partition(ds, 10, 20, 2, np.random.default_rng(1))
    covered = np.sort(np.concatenate(plan.assignments))
    np.testing.assert_array_equal(covered, np.arange(400))
    assert plan.sizes() == [40] * 10
    for idx in plan.assignments:
        assert len(set(ds.labels[idx].tolist())) <= 2


def test_pathological_hundred_clients_two_shards():
    ds = _blobs(per_class=6000, dim=1)
    plan = data.pathological_partition(ds, 100, 200, 2, np.random.default_rng(0))
    assert plan.sizes() == [400] * 100
    assert_disjoint(plan)
    assert max(len(set(ds.labels[i].tolist())) for i in plan.assignments) <= 2


def test_pathological_infeasible():
    ds = _blobs(per_class=10)
    with pytest.raises(InfeasiblePartitionError):
        data.pathological_partition(ds, 10, 20, 2, np.random.default_rng(0))


@pytest.mark.parametrize("n, n_train", [(10, 8), (5, 4), (2, 1), (3, 2), (7, 6)])
def test_split_sizes(n, n_train):
    plan = data.PartitionPlan([np.arange(n)])
    split = data.split_train_test(plan, 0.8, np.random.default_rng(0))
    assert len(split.train[0]) == n_train
    assert set(split.train[0]) | set(split.test[0]) == set(range(n))
    assert not set(split.train[0]) & set(split.test[0])


def test_split_rejects_singletons():
    with pytest.raises(DataError):
        data.split_train_test(data.PartitionPlan([np.arange(1)]), 0.8, np.random.default_rng(0))


def test_partition_and_split_deterministic():
    ds = _blobs()
    for make in (
        lambda r: data.dirichlet_partition(ds, 7, 0.3, r),
        lambda r: data.pathological_partition(ds, 7, 50, 2, r),
    ):
        a, b = make(np.random.default_rng(9)), make(np.random.default_rng(9))
        for x, y in zip(a.assignments, b.assignments):
            np.testing.assert_array_equal(x, y)
        sa = data.split_train_test(a, 0.8, np.random.default_rng(4))
        sb = data.split_train_test(b, 0.8, np.random.default_rng(4))
        for x, y in itertools.chain(zip(sa.train, sb.train), zip(sa.test, sb.test)):
            np.testing.assert_array_equal(x, y)

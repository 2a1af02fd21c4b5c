"""Datasets, heterogeneous client partitions and per-client train/test splits."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import DataError, FormatError, InfeasiblePartitionError, ParameterError
from .numkit import dirichlet_draw


@dataclass
class LabeledDataset:
    samples: np.ndarray  # (N, input_dim)
    labels: np.ndarray  # (N,) int
    class_count: int

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.intp)
        if self.samples.ndim != 2 or len(self.samples) < 1:
            raise DataError("dataset needs at least one sample row")
        if self.labels.shape != (len(self.samples),):
            raise DataError("one label per sample required")
        if self.labels.min() < 0 or self.labels.max() >= self.class_count:
            raise DataError(f"labels must lie in [0, {self.class_count})")

    def __len__(self):
        return len(self.labels)

    @property
    def input_dim(self) -> int:
        return self.samples.shape[1]

    def subset(self, indices):
        idx = np.asarray(indices, dtype=np.intp)
        return self.samples[idx], self.labels[idx]


def synthesize_classification(num_classes, input_dim, samples_per_class, class_separation, rng):
    """Gaussian blobs with unit covariance.

    Each class mean is a random direction scaled to norm ``class_separation``.
    Rows are grouped by class (class 0 first).
    """
    for name, v in (("num_classes", num_classes), ("input_dim", input_dim),
                    ("samples_per_class", samples_per_class)):
        if v < 1:
            raise ParameterError(f"{name} must be >= 1")
    if class_separation < 0:
        raise ParameterError("class_separation must be >= 0")
    directions = rng.standard_normal((num_classes, input_dim))
    norms = np.linalg.norm(directions, axis=1, keepdims=True)
    means = class_separation * directions / np.where(norms > 0, norms, 1.0)
    samples = np.repeat(means, samples_per_class, axis=0)
    samples += rng.standard_normal(samples.shape)
    labels = np.repeat(np.arange(num_classes), samples_per_class)
    return LabeledDataset(samples, labels, num_classes)


def _is_number(text):
    try:
        float(text)
    except ValueError:
        return False
    return True


def load_csv(path) -> LabeledDataset:
    """Read rows ``label,f1,...,fD``; a non-numeric first cell marks a header."""
    labels, rows = [], []
    width = None
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if lineno == 1 and not _is_number(row[0].strip()):
                continue
            if width is None:
                width = len(row)
                if width < 2:
                    raise FormatError("need a label and at least one feature", lineno)
            elif len(row) != width:
                raise FormatError(f"expected {width} fields, found {len(row)}", lineno)
            try:
                label = float(row[0])
                feats = [float(c) for c in row[1:]]
            except ValueError as exc:
                raise FormatError(f"unparsable cell ({exc})", lineno) from None
            if label != int(label) or label < 0:
                raise FormatError(f"label {row[0]!r} is not a non-negative integer", lineno)
            if not np.all(np.isfinite(feats)):
                raise FormatError("non-finite feature", lineno)
            labels.append(int(label))
            rows.append(feats)
    if not rows:
        raise FormatError(f"{path}: no data rows")
    labels = np.array(labels, dtype=np.intp)
    return LabeledDataset(np.array(rows), labels, int(labels.max()) + 1)


# --------------------------------------------------------------------------
# Partitioners
# --------------------------------------------------------------------------

@dataclass
class PartitionPlan:
    assignments: list  # list[np.ndarray] of sample indices, one per client

    @property
    def num_clients(self):
        return len(self.assignments)

    def sizes(self):
        return [len(a) for a in self.assignments]


def _largest_remainder(p, total):
    raw = p * total
    counts = np.floor(raw).astype(np.intp)
    short = total - counts.sum()
    if short:
        # stable: ties go to the lower client index
        order = np.argsort(-(raw - counts), kind="stable")
        counts[order[:short]] += 1
    return counts


def dirichlet_partition(ds: LabeledDataset, K: int, alpha: float, rng) -> PartitionPlan:
    """Per class, split its shuffled samples across clients by a Dir(alpha) draw.

    Clients left empty each take one sample from the currently largest client.
    """
    if K < 1:
        raise ParameterError("K must be >= 1")
    if not alpha > 0:
        raise ParameterError(f"alpha must be > 0, got {alpha!r}")
    if len(ds) < K:
        raise DataError(f"{len(ds)} samples cannot cover {K} clients")
    buckets = [[] for _ in range(K)]
    for c in range(ds.class_count):
        idx = np.flatnonzero(ds.labels == c)
        if idx.size == 0:
            continue
        idx = rng.permutation(idx)
        counts = _largest_remainder(dirichlet_draw(alpha, K, rng), idx.size)
        for client, chunk in enumerate(np.split(idx, np.cumsum(counts)[:-1])):
            buckets[client].extend(chunk.tolist())
    for client in range(K):
        if not buckets[client]:
            donor = max(range(K), key=lambda j: (len(buckets[j]), -j))
            buckets[client].append(buckets[donor].pop())
    return PartitionPlan([np.array(b, dtype=np.intp) for b in buckets])


def pathological_partition(ds: LabeledDataset, K: int, shard_size: int, shards_per_client: int, rng) -> PartitionPlan:
    """Label-sorted shards of ``shard_size``, ``shards_per_client`` dealt to each client.

    The ``N mod shard_size`` tail of the sorted order is dropped, as are shards
    left over once every client has its share.
    """
    if K < 1 or shard_size < 1 or shards_per_client < 1:
        raise ParameterError("K, shard_size and shards_per_client must be >= 1")
    order = np.argsort(ds.labels, kind="stable")
    n_shards = len(order) // shard_size
    if n_shards < K * shards_per_client:
        raise InfeasiblePartitionError(
            f"{n_shards} shards of size {shard_size} cannot give {shards_per_client} to each of {K} clients"
        )
    shards = order[: n_shards * shard_size].reshape(n_shards, shard_size)
    dealt = rng.permutation(n_shards)
    return PartitionPlan([
        np.concatenate(shards[dealt[i * shards_per_client:(i + 1) * shards_per_client]])
        for i in range(K)
    ])


@dataclass
class SplitPlan:
    train: list  # list[np.ndarray]
    test: list


def split_train_test(plan: PartitionPlan, ratio: float = 0.8, rng=None) -> SplitPlan:
    """Shuffle each client's samples and cut ``round(ratio * n)`` for training.

    At least one sample always lands on each side.
    """
    if not 0 < ratio < 1:
        raise ParameterError("ratio must lie in (0, 1)")
    if rng is None:
        rng = np.random.default_rng(0)
    train, test = [], []
    for client, idx in enumerate(plan.assignments):
        n = len(idx)
        if n < 2:
            raise DataError(f"client {client} has {n} sample(s); a split needs at least 2")
        shuffled = rng.permutation(idx)
        n_train = min(max(int(np.floor(ratio * n + 0.5)), 1), n - 1)
        train.append(shuffled[:n_train])
        test.append(shuffled[n_train:])
    return SplitPlan(train, test)


def class_entropy(labels, class_count) -> float:
    """Shannon entropy (nats) of the empirical label distribution."""
    counts = np.bincount(np.asarray(labels, dtype=np.intp), minlength=class_count)
    p = counts[counts > 0] / counts.sum()
    return float(-(p * np.log(p)).sum())

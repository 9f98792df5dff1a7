import numpy as np
import pytest

from srctrace.store import Corpus, EmbeddingSet, SampleRecord, build_corpus


def make_records(n, checkpoint_of, dataset_of=None, **extras_of):
    """Build n SampleRecords; *_of arguments map row index -> field value."""
    records = []
    for i in range(n):
        fields = {
            "sample_id": f"s{i:06d}",
            "dataset": dataset_of(i) if dataset_of else "synth",
            "checkpoint": checkpoint_of(i),
        }
        for name, fn in extras_of.items():
            fields[name] = fn(i)
        records.append(SampleRecord(**fields))
    return records


def cluster_corpus(
    n_classes,
    per_class,
    dim,
    separation=20.0,
    seed=0,
    n_datasets=1,
    target="checkpoint",
    within_std=1.0,
):
    """Isotropic Gaussian clusters, one per checkpoint, centroids separated
    by >= `separation` (regenerated until the bound holds)."""
    rng = np.random.default_rng(seed)
    while True:
        means = rng.normal(scale=separation, size=(n_classes, dim))
        diff = means[:, None, :] - means[None, :, :]
        dists = np.sqrt(np.square(diff).sum(axis=2))
        np.fill_diagonal(dists, np.inf)
        if dists.min() >= 8.0 * within_std:
            break
    rows = []
    checkpoints = []
    for c in range(n_classes):
        rows.append(means[c] + rng.normal(scale=within_std, size=(per_class, dim)))
        checkpoints.extend([f"ckpt{c:03d}"] * per_class)
    matrix = np.vstack(rows).astype(np.float32)
    records = make_records(
        len(checkpoints),
        checkpoint_of=lambda i: checkpoints[i],
        dataset_of=lambda i: f"ds{(i // per_class) % n_datasets}",
    )
    emb = EmbeddingSet(extractor_id="synthetic", layer_index=4, matrix=matrix)
    return build_corpus(records, emb, target), means


@pytest.fixture
def small_corpus() -> Corpus:
    corpus, _ = cluster_corpus(n_classes=4, per_class=25, dim=8, seed=11)
    return corpus

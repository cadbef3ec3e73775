"""Synthetic long-tailed, mixed-granularity classification data.

The generator draws a two-level label space: ``num_coarse`` parent classes,
each with ``fine_per_coarse`` children. Every instance belongs to a fine
class (Gaussian cluster around a random unit prototype) but is *observed*
with its coarse parent label with probability ``coarse_prob`` -- coarse and
fine labels coexist in one label space, so the classifier's output covers
both. Fine-class frequencies follow a Zipf law, rank r getting probability
proportional to r**(-s); ranks are dealt round-robin across families so each
parent has a frequent and a rare child.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataFormatError


@dataclass(frozen=True)
class GeneratorSpec:
    num_coarse: int = 4
    fine_per_coarse: int = 3
    feature_dim: int = 16
    cluster_spread: float = 0.25
    zipf_exponent: float = 1.5
    coarse_prob: float = 0.3
    n_instances: int = 25000
    split_fractions: tuple[float, float, float] = (0.8, 0.08, 0.12)

    def __post_init__(self):
        if self.num_coarse < 1 or self.fine_per_coarse < 1:
            raise ConfigError("class counts must be positive")
        if self.feature_dim < 1 or self.n_instances < 1:
            raise ConfigError("feature_dim and n_instances must be positive")
        if self.cluster_spread <= 0:
            raise ConfigError("cluster_spread must be positive")
        if not 0.0 <= self.coarse_prob <= 1.0:
            raise ConfigError("coarse_prob must lie in [0, 1]")
        if len(self.split_fractions) != 3 or any(f < 0 for f in self.split_fractions):
            raise ConfigError("split_fractions must be three nonnegative values")
        if abs(sum(self.split_fractions) - 1.0) > 1e-9:
            raise ConfigError("split_fractions must sum to 1")


@dataclass(frozen=True)
class LabeledDataset:
    """Feature vectors with fine and (possibly coarsened) observed labels.

    Labels are stored as integer indices into ``classes``; ``counts`` and
    ``parent`` are keyed by class name. ``split`` maps 'train'/'val'/'test'
    to index arrays into the instance axis.
    """

    features: np.ndarray
    fine_labels: np.ndarray
    observed_labels: np.ndarray
    classes: list[str]
    parent: dict[str, str]
    counts: dict[str, int]
    split: dict[str, np.ndarray] = field(repr=False)

    def __post_init__(self):
        n = len(self.features)
        if not (len(self.fine_labels) == len(self.observed_labels) == n):
            raise ValueError("features and label arrays must have equal length")

    @property
    def n_instances(self) -> int:
        return len(self.features)

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    def class_index(self, name: str) -> int:
        return self.classes.index(name)


@dataclass(frozen=True)
class StageData:
    """The slice of a dataset whose observed labels live on one tree layer."""

    dataset: LabeledDataset
    layer: int
    indices: np.ndarray
    train_indices: np.ndarray
    val_indices: np.ndarray
    test_indices: np.ndarray
    counts: dict[int, int]        # class index -> train-split count
    stage_classes: tuple[int, ...]   # class indices on this layer
    prior_classes: tuple[int, ...]   # class indices on shallower layers

    @property
    def n_train(self) -> int:
        return len(self.train_indices)


def _zipf_probs(n_ranks: int, exponent: float) -> np.ndarray:
    ranks = np.arange(1, n_ranks + 1, dtype=np.float64)
    weights = ranks ** (-exponent)
    return weights / weights.sum()


def generate_synthetic(spec: GeneratorSpec, seed: int) -> LabeledDataset:
    """Deterministically sample a dataset from ``spec``.

    The RNG stream is consumed in a fixed order (prototypes, class draws,
    feature noise, coarsening coin flips, split permutation) so identical
    (spec, seed) pairs produce bit-identical datasets.
    """
    rng = np.random.default_rng(seed)
    n_fine = spec.num_coarse * spec.fine_per_coarse

    coarse_names = [f"c{i}" for i in range(spec.num_coarse)]
    fine_names = [
        f"c{i}_f{j}" for i in range(spec.num_coarse) for j in range(spec.fine_per_coarse)
    ]
    classes = coarse_names + fine_names
    parent = {
        f"c{i}_f{j}": f"c{i}"
        for i in range(spec.num_coarse)
        for j in range(spec.fine_per_coarse)
    }

    # Rank r (1-based) lands on family (r-1) % num_coarse, slot (r-1) // num_coarse,
    # so every family mixes head and tail children.
    probs = np.zeros(n_fine)
    zipf = _zipf_probs(n_fine, spec.zipf_exponent)
    for r in range(1, n_fine + 1):
        family = (r - 1) % spec.num_coarse
        slot = (r - 1) // spec.num_coarse
        probs[family * spec.fine_per_coarse + slot] = zipf[r - 1]

    prototypes = rng.normal(size=(n_fine, spec.feature_dim))
    prototypes /= np.linalg.norm(prototypes, axis=1, keepdims=True)

    fine_idx = rng.choice(n_fine, size=spec.n_instances, p=probs)
    features = prototypes[fine_idx] + spec.cluster_spread * rng.normal(
        size=(spec.n_instances, spec.feature_dim)
    )
    coarsen = rng.random(spec.n_instances) < spec.coarse_prob

    fine_labels = fine_idx + spec.num_coarse  # offset past the coarse block
    coarse_of_fine = np.repeat(np.arange(spec.num_coarse), spec.fine_per_coarse)
    observed = np.where(coarsen, coarse_of_fine[fine_idx], fine_labels)

    perm = rng.permutation(spec.n_instances)
    n_train = int(round(spec.split_fractions[0] * spec.n_instances))
    n_val = int(round(spec.split_fractions[1] * spec.n_instances))
    split = {
        "train": perm[:n_train],
        "val": perm[n_train : n_train + n_val],
        "test": perm[n_train + n_val :],
    }

    bincounts = np.bincount(observed, minlength=len(classes))
    counts = {classes[i]: int(c) for i, c in enumerate(bincounts) if c > 0}

    return LabeledDataset(
        features=features,
        fine_labels=fine_labels,
        observed_labels=observed,
        classes=classes,
        parent=parent,
        counts=counts,
        split=split,
    )


def class_counts(dataset: LabeledDataset, subset) -> dict[str, int]:
    """Exact observed-label counts over ``subset`` indices (zeros omitted)."""
    subset = np.asarray(subset, dtype=np.int64)
    if subset.size == 0:
        return {}
    labels = dataset.observed_labels[subset]
    bincounts = np.bincount(labels, minlength=dataset.n_classes)
    return {dataset.classes[i]: int(c) for i, c in enumerate(bincounts) if c > 0}


def save_dataset(dataset: LabeledDataset, features_path, labels_path) -> None:
    """Write the features/labels CSV pair.

    Features: one row of ``d`` floats per instance. Labels: header plus one
    row per instance of (id, fine name, observed name, split tag). Floats use
    shortest round-trip formatting so reloads are bit-exact.
    """
    tag = np.empty(dataset.n_instances, dtype=object)
    for name, idx in dataset.split.items():
        tag[idx] = name
    with open(features_path, "w", encoding="utf-8") as fh:
        for row in dataset.features:
            fh.write(",".join(repr(float(v)) for v in row))
            fh.write("\n")
    with open(labels_path, "w", encoding="utf-8") as fh:
        fh.write("id,fine,observed,split\n")
        for i in range(dataset.n_instances):
            fh.write(
                f"{i},{dataset.classes[dataset.fine_labels[i]]},"
                f"{dataset.classes[dataset.observed_labels[i]]},{tag[i]}\n"
            )


def load_dataset(features_path, labels_path, classes, parent) -> LabeledDataset:
    """Rebuild a dataset from the CSV pair; ``classes`` fixes logit order."""
    features = []
    with open(features_path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                features.append([float(v) for v in line.split(",")])
    features = np.array(features, dtype=np.float64)

    index = {name: i for i, name in enumerate(classes)}
    fine, observed, tags = [], [], []
    with open(labels_path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != "id,fine,observed,split":
            raise DataFormatError(f"{labels_path}: unexpected header {header!r}")
        for lineno, line in enumerate(fh, 2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 4:
                raise DataFormatError(f"{labels_path}:{lineno}: expected 4 fields")
            _, fine_name, obs_name, tag = parts
            if fine_name not in index or obs_name not in index:
                raise DataFormatError(
                    f"{labels_path}:{lineno}: unknown class {fine_name!r}/{obs_name!r}"
                )
            fine.append(index[fine_name])
            observed.append(index[obs_name])
            tags.append(tag)
    if len(fine) != len(features):
        raise DataFormatError("features/labels files disagree on instance count")

    observed = np.array(observed, dtype=np.int64)
    tags = np.array(tags)
    split = {name: np.flatnonzero(tags == name) for name in ("train", "val", "test")}
    bincounts = np.bincount(observed, minlength=len(classes))
    counts = {classes[i]: int(c) for i, c in enumerate(bincounts) if c > 0}
    return LabeledDataset(
        features=features,
        fine_labels=np.array(fine, dtype=np.int64),
        observed_labels=observed,
        classes=list(classes),
        parent=dict(parent),
        counts=counts,
        split=split,
    )
